"""End-to-end probing runs driven by a declarative config.

For every agent: a baseline pass over the unperturbed steps (cached per step,
so every probe reuses it), an optional filter down to steps the agent already
solved, then each probe is applied, queried and scored. Agents run
concurrently up to ``agent_parallel``; report files are written afterwards,
one at a time, in config order.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from . import __version__
from .core import Click, Step, denormalize_point
from .dataset import (
    BaselineIndex,
    EmptySubsetError,
    EpisodeCorpus,
    FORMATS,
    adapt,
    corpus_hash,
    select_probe_subset,
)
from .gateway import AgentEndpoint, PromptBundle, Query, TransportError, build_prompt, make_agent, run_bounded
from .gateway.prompts import SETTINGS
from .gateway.reference import canonical_gt
from .metrics import MetricError, aggregate, aggregate_tsr, delta_p, match_action, reflection_score, vmc_breakdown
from .perturb import PerturbationError, PerturbationSpec, PerturbedStep, apply_perturbation
from .reports import ProbeReport, render_csv

log = logging.getLogger(__name__)

BASELINE = "baseline"
MANIFEST_NAME = "manifest.json"
CSV_NAME = "reports.csv"
_AGENT_ID = re.compile(r"[A-Za-z0-9][A-Za-z0-9_.-]*")


class ConfigError(ValueError):
    pass


class AgentUnreachable(RuntimeError):
    pass


@dataclass(frozen=True)
class AgentSpec:
    agent_id: str
    endpoint: AgentEndpoint

    def to_dict(self) -> dict:
        d = {"agent_id": self.agent_id}
        d.update(dataclasses.asdict(self.endpoint))
        return d

    @classmethod
    def from_dict(cls, data: dict) -> AgentSpec:
        data = dict(data)
        known = {f.name for f in dataclasses.fields(AgentEndpoint)} | {"agent_id"}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown agent fields: {sorted(extra)}")
        agent_id = data.pop("agent_id", None) or data.get("model_name")
        if not isinstance(agent_id, str) or not _AGENT_ID.fullmatch(agent_id):
            raise ConfigError(f"agent_id {agent_id!r} must match {_AGENT_ID.pattern} (it names report files)")
        try:
            endpoint = AgentEndpoint(**data)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"agent {agent_id!r}: {exc}") from exc
        return cls(agent_id, endpoint)


@dataclass(frozen=True)
class RunConfig:
    corpus_path: str
    agents: tuple
    probes: tuple
    format_id: str = "canonical"
    setting: str = "low"
    baseline_filter: bool = True
    output_dir: str = "guiprobe-out"
    seed: int = 0
    # overrides every endpoint's max_parallel when set
    max_parallel: int | None = None
    agent_parallel: int = 4
    template_id: str = "default"
    history_length: int = 0
    persist_perturbed: bool = False
    # relative paths resolve against this; not part of the config identity
    base_dir: str = field(default=".", compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "agents", tuple(self.agents))
        object.__setattr__(self, "probes", tuple(self.probes))
        if not self.agents:
            raise ConfigError("config needs at least one agent")
        if not self.probes:
            raise ConfigError("config needs at least one probe")
        ids = [a.agent_id for a in self.agents]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"duplicate agent ids: {ids}")
        labels = [p.label for p in self.probes]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"duplicate probes: {labels}")
        if self.setting not in SETTINGS:
            raise ConfigError(f"setting must be one of {SETTINGS}")
        if self.format_id not in FORMATS:
            raise ConfigError(f"unknown format_id {self.format_id!r}; expected one of {FORMATS}")
        if self.max_parallel is not None and self.max_parallel < 1:
            raise ConfigError("max_parallel must be >= 1")
        if self.agent_parallel < 1 or self.history_length < 0:
            raise ConfigError("agent_parallel must be >= 1 and history_length >= 0")

    @classmethod
    def from_dict(cls, data: dict, base_dir: str | Path = ".") -> RunConfig:
        if not isinstance(data, dict):
            raise ConfigError("config must be a mapping")
        known = {f.name for f in dataclasses.fields(cls)} - {"base_dir"}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown config fields: {sorted(extra)}")
        missing = {"corpus_path", "agents", "probes"} - set(data)
        if missing:
            raise ConfigError(f"missing config fields: {sorted(missing)}")
        data = dict(data)
        try:
            data["agents"] = tuple(AgentSpec.from_dict(a) for a in data["agents"] or ())
            data["probes"] = tuple(PerturbationSpec.from_dict(p) for p in data["probes"] or ())
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        return cls(base_dir=str(base_dir), **data)

    @classmethod
    def load(cls, path: str | Path) -> RunConfig:
        """Read a YAML (or JSON, which YAML accepts) config file."""
        path = Path(path)
        try:
            data = yaml.safe_load(path.read_text(encoding="utf-8"))
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        return cls.from_dict(data, base_dir=path.parent)

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in dataclasses.fields(self) if f.name != "base_dir"}
        d["agents"] = [a.to_dict() for a in self.agents]
        d["probes"] = [p.to_dict() for p in self.probes]
        return d

    def config_hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"), ensure_ascii=False)
        return hashlib.sha256(canon.encode()).hexdigest()

    def resolve(self, p: str) -> Path:
        path = Path(p)
        return path if path.is_absolute() else Path(self.base_dir) / path


@dataclass
class RunManifest:
    config_hash: str
    corpus_hash: str
    tool_version: str
    reports: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    csv_path: str = CSV_NAME
    timings: dict = field(default_factory=dict)
    output_dir: str = ""

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("output_dir")
        return d

    def write(self) -> Path:
        path = Path(self.output_dir) / MANIFEST_NAME
        path.write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n", encoding="utf-8")
        return path

    @classmethod
    def load(cls, path: str | Path) -> RunManifest:
        path = Path(path)
        data = json.loads(path.read_text(encoding="utf-8"))
        return cls(output_dir=str(path.parent), **data)


def probe_header(spec: PerturbationSpec) -> str:
    return json.dumps(spec.to_dict(), sort_keys=True, separators=(",", ":"))


def _scoring_gt(step: Step, action):
    """Ground truth with a concrete click point (region-only clicks use the region centre)."""
    if isinstance(action, Click) and action.point is None:
        return Click(step.click_point())
    return action


def _outcome_dict(o, response, note: str | None = None) -> dict:
    d = {
        "type_ok": o.type_ok,
        "grounding_ok": o.grounding_ok,
        "sr_ok": o.sr_ok,
        "answered": o.answered,
        "pred_kind": o.pred_kind,
        "pred_point": None if o.pred_point is None else [o.pred_point.x, o.pred_point.y],
    }
    if isinstance(response, TransportError):
        d["error"] = str(response)
    elif response is not None:
        d["raw"] = response.raw
        if response.parsed.failure is not None:
            d["parse_failure"] = response.parsed.failure.reason
    if note is not None:
        d["remap_note"] = note
    return d


def _pixel_point(outcome, screen) -> tuple[float, float] | None:
    if outcome.pred_point is None or outcome.pred_kind != "click":
        return None
    return denormalize_point(outcome.pred_point, screen.width, screen.height)


class _AgentRun:
    """One agent's baseline cache and probe loop."""

    def __init__(self, config: RunConfig, spec: AgentSpec, corpus: EpisodeCorpus, perturbed_dir: Path | None,
                 persisted: set, persist_lock: threading.Lock) -> None:
        self.config = config
        endpoint = spec.endpoint
        if config.max_parallel is not None:
            endpoint = dataclasses.replace(endpoint, max_parallel=config.max_parallel)
        self.endpoint = endpoint
        self.agent_id = spec.agent_id
        self.agent = make_agent(endpoint, agent_id=spec.agent_id, seed=config.seed)
        self.needs_payload = getattr(self.agent, "needs_payload", True)
        self.corpus = corpus
        self.episode_of = corpus.episode_of()
        self.baseline: dict[str, object] = {}
        self.perturbed_dir = perturbed_dir
        self.persisted = persisted
        self.persist_lock = persist_lock

    # -- queries --

    def _history(self, step: Step) -> tuple:
        k = self.config.history_length
        if not k:
            return ()
        ep = self.episode_of[step.sample_id]
        idx = next(i for i, s in enumerate(ep.steps) if s.sample_id == step.sample_id)
        return tuple(canonical_gt(s) for s in ep.steps[max(0, idx - k):idx])

    def _query(self, step: Step, perturbed: PerturbedStep | None, probe: str) -> Query:
        screen = perturbed.screen if perturbed is not None else step.screen
        payload = {}
        if self.needs_payload:
            instruction = perturbed.instruction if perturbed is not None else step.instruction
            goal = perturbed.goal if perturbed is not None else step.goal
            bundle = PromptBundle(self.config.setting, goal, screen,
                                  instruction if self.config.setting == "low" else None, self._history(step))
            payload = build_prompt(self.config.template_id, bundle, model=self.endpoint.model_name,
                                   dialect_id=self.endpoint.dialect_id, params=self.endpoint.params)
        return Query(step.sample_id, probe, payload, screen, step, perturbed)

    def _ask(self, queries: list[Query]) -> list:
        return run_bounded(self.agent.respond, queries, self.endpoint.max_parallel)

    def _baseline_pass(self, steps: list[Step]) -> None:
        todo = [s for s in steps if s.sample_id not in self.baseline]
        if not todo:
            return
        results = self._ask([self._query(s, None, BASELINE) for s in todo])
        for s, r in zip(todo, results):
            if isinstance(r, Exception) and not isinstance(r, TransportError):
                raise r
            self.baseline[s.sample_id] = r
        if all(isinstance(self.baseline[s.sample_id], TransportError) for s in steps):
            raise AgentUnreachable(f"{self.agent_id}: no baseline query answered "
                                   f"(last error: {self.baseline[steps[-1].sample_id]})")

    @staticmethod
    def _score(response, gt, screen, sample_id):
        parsed = None if isinstance(response, TransportError) else response.parsed
        return match_action(parsed, gt, screen, sample_id=sample_id)

    # -- probes --

    def _persist(self, spec: PerturbationSpec, p: PerturbedStep) -> None:
        from PIL import Image

        key = (spec.label, p.base_sample_id)
        with self.persist_lock:
            if key in self.persisted:
                return
            self.persisted.add(key)
        d = self.perturbed_dir / spec.label
        d.mkdir(parents=True, exist_ok=True)
        Image.fromarray(p.screen.pixels).save(d / f"{p.base_sample_id}.png")

    def run_probe(self, spec: PerturbationSpec) -> ProbeReport:
        cfg = self.config
        subset = select_probe_subset(self.corpus, spec.family)
        steps = subset.steps()
        if cfg.setting == "low":
            missing = [s.sample_id for s in steps if s.instruction is None]
            if missing:
                log.warning("%s: %d step(s) without an instruction skipped in the low-level setting",
                            spec.label, len(missing))
                steps = [s for s in steps if s.instruction is not None]
                if not steps:
                    raise EmptySubsetError(f"no {spec.family} steps with instructions")
        self._baseline_pass(steps)
        base = {s.sample_id: self._score(self.baseline[s.sample_id], _scoring_gt(s, s.gt_action),
                                         s.screen, s.sample_id) for s in steps}
        if cfg.baseline_filter:
            index = BaselineIndex.from_outcomes(self.agent_id, base.values())
            subset = select_probe_subset(subset, spec.family, index)
            steps = [s for s in subset.steps() if s.sample_id in base]

        excluded, perturbed = [], []
        for s in steps:
            try:
                perturbed.append((s, apply_perturbation(s, spec)))
            except PerturbationError as exc:
                excluded.append({"sample_id": s.sample_id, "reason": str(exc)})
        if not perturbed:
            raise EmptySubsetError(f"{spec.label}: every step was rejected by the operator")
        if self.perturbed_dir is not None:
            for _, p in perturbed:
                self._persist(spec, p)

        header = probe_header(spec)
        responses = self._ask([self._query(s, p, header) for s, p in perturbed])
        rows, base_out, pert_out, pairs = [], [], [], []
        for (s, p), r in zip(perturbed, responses):
            if isinstance(r, Exception) and not isinstance(r, TransportError):
                raise r
            o = self._score(r, _scoring_gt(s, p.remapped_gt), p.screen, s.sample_id)
            b = base[s.sample_id]
            base_out.append(b)
            pert_out.append(o)
            pairs.append((_pixel_point(b, s.screen), _pixel_point(o, p.screen)))
            rows.append({"sample_id": s.sample_id,
                         "baseline": _outcome_dict(b, self.baseline[s.sample_id]),
                         "perturbed": _outcome_dict(o, r, p.remap_note.value)})

        order = sorted(range(len(rows)), key=lambda i: rows[i]["sample_id"])
        rows = [rows[i] for i in order]
        base_rec, pert_rec = aggregate(base_out), aggregate(pert_out)
        dp = delta_p(base_rec, pert_rec)
        metrics = dict(pert_rec.rounded())
        metrics.update({
            "tsr": self._tsr(pert_out),
            "delta_p_type": dp.delta_p_type,
            "delta_p_sr": dp.delta_p_sr,
            "vmc": vmc_breakdown(pairs).vmc,
            "rs": reflection_score(o.pred_kind for o in pert_out),
        })
        baseline = dict(base_rec.rounded())
        baseline["unanswered"] = base_rec.unanswered
        return ProbeReport(
            agent_id=self.agent_id, probe=spec.label, n_samples=pert_rec.n, metrics=metrics,
            outcomes=tuple(rows), unanswered_count=pert_rec.unanswered, probe_spec=spec.to_dict(),
            setting=cfg.setting, baseline=baseline, excluded=tuple(excluded),
        )

    def _tsr(self, outcomes) -> float | None:
        """Task success, only when the probed steps make up whole episodes."""
        probed = {o.sample_id for o in outcomes}
        episodes = {}
        for sid in probed:
            ep = self.episode_of[sid]
            episodes[ep.episode_id] = [s.sample_id for s in ep.steps]
        if any(not set(sids) <= probed for sids in episodes.values()):
            return None
        return aggregate_tsr(outcomes, episodes)

    def run(self) -> list[tuple[str, ProbeReport | str]]:
        out = []
        dead: str | None = None
        try:
            for spec in self.config.probes:
                if dead is not None:
                    out.append((spec.label, dead))
                    continue
                try:
                    out.append((spec.label, self.run_probe(spec)))
                except AgentUnreachable as exc:
                    dead = f"agent unreachable: {exc}"
                    out.append((spec.label, dead))
                except (EmptySubsetError, MetricError, PerturbationError, ValueError) as exc:
                    log.error("%s / %s failed: %s", self.agent_id, spec.label, exc)
                    out.append((spec.label, f"{type(exc).__name__}: {exc}"))
        finally:
            self.agent.close()
        return out


def run_experiment(config: RunConfig, *, corpus: EpisodeCorpus | None = None) -> RunManifest:
    """Run every (agent, probe) pair in ``config`` and write reports plus a manifest.

    Args:
        corpus: an already-loaded corpus to use instead of ``config.corpus_path``.

    Returns:
        The manifest; ``manifest.ok`` is false when any pair failed.
    """
    t0 = time.perf_counter()
    if corpus is None:
        corpus = adapt(config.format_id, config.resolve(config.corpus_path))
    t_load = time.perf_counter()
    out = config.resolve(config.output_dir).resolve()
    (out / "reports").mkdir(parents=True, exist_ok=True)
    perturbed_dir = out / "perturbed" if config.persist_perturbed else None
    persisted: set = set()
    persist_lock = threading.Lock()

    def one(agent_spec: AgentSpec):
        start = time.perf_counter()
        try:
            run = _AgentRun(config, agent_spec, corpus, perturbed_dir, persisted, persist_lock)
        except (ValueError, KeyError) as exc:
            result = [(p.label, f"agent setup failed: {exc}") for p in config.probes]
        else:
            result = run.run()
        return result, time.perf_counter() - start

    with ThreadPoolExecutor(max_workers=min(config.agent_parallel, len(config.agents))) as pool:
        results = list(pool.map(one, config.agents))

    manifest = RunManifest(config.config_hash(), corpus_hash(corpus), __version__, output_dir=str(out))
    written = []
    for agent_spec, (result, seconds) in zip(config.agents, results):
        manifest.timings[agent_spec.agent_id] = round(seconds, 3)
        for label, item in result:
            if isinstance(item, str):
                manifest.failures.append({"agent_id": agent_spec.agent_id, "probe": label, "error": item})
                continue
            rel = f"reports/{agent_spec.agent_id}__{label}.json"
            (out / rel).write_text(item.to_json(), encoding="utf-8")
            manifest.reports.append({"agent_id": agent_spec.agent_id, "probe": label, "path": rel})
            written.append(item)
    (out / CSV_NAME).write_text(render_csv(written), encoding="utf-8")
    manifest.timings["load_corpus"] = round(t_load - t0, 3)
    manifest.timings["total"] = round(time.perf_counter() - t0, 3)
    manifest.write()
    return manifest
