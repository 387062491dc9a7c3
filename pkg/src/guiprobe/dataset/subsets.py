"""Probe-eligible subsets of a corpus."""

from __future__ import annotations

import logging
from collections.abc import Iterable
from dataclasses import dataclass, field

from ..core import ACTION_KINDS, Click, Episode
from .canonical import EpisodeCorpus

log = logging.getLogger(__name__)

FAMILY_KINDS = {
    "visual": frozenset({"click"}),
    "text": frozenset({"type", "open_app"}),
    "structure": frozenset({"press_back", "press_home", "wait", "complete", "scroll"}),
    # modality ablation withholds whole inputs, so every step is fair game
    "all": frozenset(ACTION_KINDS),
}


class EmptySubsetError(ValueError):
    """Nothing left to probe; almost always a configuration mistake."""


@dataclass(frozen=True)
class StepRecord:
    type_ok: bool
    grounding_ok: bool | None
    sr_ok: bool


@dataclass(frozen=True)
class BaselineIndex:
    """One agent's unperturbed outcomes, keyed by sample_id."""

    agent_id: str
    records: dict[str, StepRecord] = field(default_factory=dict)

    @classmethod
    def from_outcomes(cls, agent_id: str, outcomes: Iterable, corpus: EpisodeCorpus | None = None) -> BaselineIndex:
        recs = {o.sample_id: StepRecord(o.type_ok, o.grounding_ok, o.sr_ok) for o in outcomes}
        index = cls(agent_id, recs)
        if corpus is not None:
            index.check_against(corpus)
        return index

    def check_against(self, corpus: EpisodeCorpus) -> None:
        known = set(corpus.step_map())
        stray = sorted(set(self.records) - known)
        if stray:
            raise ValueError(f"baseline for {self.agent_id} names samples not in {corpus.name}: {stray[:5]}")


def select_probe_subset(corpus: EpisodeCorpus, probe_family: str,
                        baseline: BaselineIndex | None = None) -> EpisodeCorpus:
    """Keep the steps a probe family applies to.

    visual keeps grounded clicks, text keeps Type/OpenApp, structure keeps
    PressBack/PressHome/Wait/Complete/Scroll, all keeps every groundable
    step. With a ``baseline`` only steps
    the agent already solved unperturbed survive. Surviving steps keep their
    original ``step_index``.

    Raises:
        EmptySubsetError: if no step survives.
    """
    if probe_family not in FAMILY_KINDS:
        raise ValueError(f"unknown probe family {probe_family!r}; expected one of {sorted(FAMILY_KINDS)}")
    if baseline is not None:
        baseline.check_against(corpus)
    kinds = FAMILY_KINDS[probe_family]
    ungroundable = 0
    episodes = []
    for ep in corpus.episodes:
        kept = []
        for s in ep.steps:
            if s.gt_action.kind not in kinds:
                continue
            if isinstance(s.gt_action, Click) and s.gt_action.point is None and s.gt_region is None:
                ungroundable += 1
                continue
            if baseline is not None:
                rec = baseline.records.get(s.sample_id)
                if rec is None or not rec.sr_ok:
                    continue
            kept.append(s)
        if kept:
            episodes.append(Episode(ep.episode_id, ep.goal, tuple(kept), max_steps=ep.max_steps))
    if ungroundable:
        log.warning("%s: %d click step(s) without point or region excluded", corpus.name, ungroundable)
    if not episodes:
        extra = f" after filtering on {baseline.agent_id}'s baseline" if baseline else ""
        raise EmptySubsetError(f"no {probe_family} steps in {corpus.name}{extra}")
    return EpisodeCorpus(f"{corpus.name}[{probe_family}]", tuple(episodes), corpus.platform_tag)
