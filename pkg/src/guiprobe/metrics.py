"""Step scoring and the aggregate metrics of a probing run.

Rates are percentages. Aggregates keep exact hit counts; rounding to one
decimal (half-up) happens only in :func:`pct1`, which every reported number
passes through.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from fractions import Fraction

from .core import (
    Click,
    OpenApp,
    Point,
    REFLECTIVE_KINDS,
    STATUS_KINDS,
    Scroll,
    Type,
    normalize_point,
    round_half_up,
)

# 14% of the 1000-unit normalized frame
CLICK_RADIUS = 140
VMC_GAMMA_PX = 50.0
RS_KINDS = REFLECTIVE_KINDS | STATUS_KINDS


class MetricError(ValueError):
    pass


def pct1(value) -> float:
    """Round a percentage to one decimal, half-up."""
    return round_half_up(Fraction(value) * 10) / 10


def _rate(hits: int, n: int) -> Fraction:
    return Fraction(100 * hits, n)


@dataclass(frozen=True)
class StepOutcome:
    sample_id: str
    type_ok: bool
    sr_ok: bool
    grounding_ok: bool | None = None
    pred_point: Point | None = None
    answered: bool = True
    pred_kind: str | None = None

    def __post_init__(self) -> None:
        if self.sr_ok and not self.type_ok:
            raise ValueError(f"{self.sample_id}: sr_ok without type_ok")


def match_click(pred: Point, gt: Point) -> bool:
    """True when the two milli-unit points are within 140 units (inclusive)."""
    dx, dy = pred.x - gt.x, pred.y - gt.y
    return dx * dx + dy * dy <= CLICK_RADIUS * CLICK_RADIUS


def match_action(pred, gt_action, screen, *, sample_id: str = "") -> StepOutcome:
    """Score one prediction against the ground truth of a step.

    Args:
        pred: a :class:`~guiprobe.codec.ParseOutcome`, or ``None`` when the
            agent never answered (transport failure).
        gt_action: ground truth with click coordinates in raw pixels of ``screen``.
        screen: the frame ``gt_action`` lives in (width/height).
    """
    if pred is None:
        return StepOutcome(sample_id, False, False, answered=False)
    action = pred.action
    if action is None:
        return StepOutcome(sample_id, False, False)
    type_ok = action.kind == gt_action.kind
    pred_point = action.point if isinstance(action, Click) else None
    grounding_ok = None
    if isinstance(gt_action, Click):
        if gt_action.point is None:
            raise MetricError(f"{sample_id}: ground-truth click has no point")
        if pred_point is not None:
            grounding_ok = match_click(pred_point, normalize_point(gt_action.point, screen))
        sr_ok = type_ok and bool(grounding_ok)
    elif isinstance(gt_action, Scroll):
        sr_ok = type_ok and action.direction == gt_action.direction
    elif isinstance(gt_action, Type):
        sr_ok = type_ok and action.text.strip() == gt_action.text.strip()
    elif isinstance(gt_action, OpenApp):
        sr_ok = type_ok and action.app_name.strip() == gt_action.app_name.strip()
    else:
        sr_ok = type_ok
    return StepOutcome(sample_id, type_ok, sr_ok, grounding_ok, pred_point, True, action.kind)


@dataclass(frozen=True)
class MetricRecord:
    n: int
    type_hits: int
    sr_hits: int
    grounding_hits: int
    grounding_n: int
    unanswered: int
    sample_ids: frozenset

    @property
    def type_acc(self) -> float:
        return 100 * self.type_hits / self.n

    @property
    def sr(self) -> float:
        return 100 * self.sr_hits / self.n

    @property
    def grounding_acc(self) -> float | None:
        if not self.grounding_n:
            return None
        return 100 * self.grounding_hits / self.grounding_n

    def rounded(self) -> dict:
        return {
            "type_acc": pct1(_rate(self.type_hits, self.n)),
            "grounding_acc": pct1(_rate(self.grounding_hits, self.grounding_n)) if self.grounding_n else None,
            "sr": pct1(_rate(self.sr_hits, self.n)),
        }


def aggregate(outcomes: Iterable[StepOutcome]) -> MetricRecord:
    outcomes = list(outcomes)
    if not outcomes:
        raise MetricError("cannot aggregate an empty outcome set")
    g = [o.grounding_ok for o in outcomes if o.grounding_ok is not None]
    return MetricRecord(
        n=len(outcomes),
        type_hits=sum(o.type_ok for o in outcomes),
        sr_hits=sum(o.sr_ok for o in outcomes),
        grounding_hits=sum(g),
        grounding_n=len(g),
        unanswered=sum(not o.answered for o in outcomes),
        sample_ids=frozenset(o.sample_id for o in outcomes),
    )


def task_success(outcomes: Iterable[StepOutcome]) -> bool:
    return all(o.sr_ok for o in outcomes)


def aggregate_tsr(outcomes: Iterable[StepOutcome], episodes: Mapping[str, Sequence[str]]) -> float:
    """Percent of episodes whose every step succeeded.

    ``episodes`` maps episode id to the sample ids of its steps.
    """
    if not episodes:
        raise MetricError("no episodes")
    by_id = {o.sample_id: o for o in outcomes}
    wins = 0
    for eid, sids in episodes.items():
        missing = [s for s in sids if s not in by_id]
        if missing:
            raise MetricError(f"episode {eid}: no outcome for {missing}")
        wins += task_success(by_id[s] for s in sids)
    return pct1(_rate(wins, len(episodes)))


@dataclass(frozen=True)
class DeltaP:
    delta_p_type: float
    delta_p_sr: float


def delta_p(base: MetricRecord, perturbed: MetricRecord) -> DeltaP:
    """Accuracy drop in percentage points (base minus perturbed).

    Computed on the one-decimal reported rates, so the printed columns are
    exact differences of each other. Negative when the perturbation helps.
    """
    if base.sample_ids != perturbed.sample_ids:
        diff = sorted(base.sample_ids ^ perturbed.sample_ids)[:5]
        raise MetricError(f"base and perturbed cover different samples (e.g. {diff})")
    b, p = base.rounded(), perturbed.rounded()
    return DeltaP(
        float(Fraction(str(b["type_acc"])) - Fraction(str(p["type_acc"]))),
        float(Fraction(str(b["sr"])) - Fraction(str(p["sr"]))),
    )


def _within(a, b, gamma: float) -> bool:
    dx, dy = b[0] - a[0], b[1] - a[1]
    return dx * dx + dy * dy <= gamma * gamma


def vmc(pairs: Iterable[tuple], gamma: float = VMC_GAMMA_PX) -> float | None:
    """Share of (original, perturbed) click pairs that land within ``gamma`` pixels.

    Points are raw-pixel ``(x, y)`` pairs. Returns ``None`` for an empty set.
    """
    return vmc_breakdown(pairs, gamma).vmc


@dataclass(frozen=True)
class VmcBreakdown:
    """Where each probed sample went: stayed within gamma, moved away, or had no click to compare."""

    within: int
    moved: int
    excluded: int

    @property
    def total(self) -> int:
        return self.within + self.moved + self.excluded

    @property
    def vmc(self) -> float | None:
        n = self.within + self.moved
        return pct1(_rate(self.within, n)) if n else None


def vmc_breakdown(pairs: Iterable[tuple], gamma: float = VMC_GAMMA_PX) -> VmcBreakdown:
    """Like :func:`vmc` but ``pairs`` may contain ``None`` points (non-click predictions)."""
    within = moved = excluded = 0
    for orig, pert in pairs:
        if orig is None or pert is None:
            excluded += 1
        elif _within(orig, pert, gamma):
            within += 1
        else:
            moved += 1
    return VmcBreakdown(within, moved, excluded)


def reflection_score(kinds: Iterable[str | None]) -> float:
    """Percent of perturbed predictions that back off or report status."""
    kinds = list(kinds)
    if not kinds:
        raise MetricError("reflection score over an empty probe set")
    return pct1(_rate(sum(k in RS_KINDS for k in kinds), len(kinds)))
