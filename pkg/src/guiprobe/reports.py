"""Report files, the flat CSV, run-to-run comparison and plot tables."""

from __future__ import annotations

import csv
import io
import json
from collections.abc import Iterable, Sequence
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

from .core import round_half_up

CSV_COLUMNS = ("agent_id", "probe", "n", "type_acc", "grounding_acc", "sr", "tsr",
               "delta_p_type", "delta_p_sr", "vmc", "rs", "unanswered")
METRIC_KEYS = ("type_acc", "grounding_acc", "sr", "tsr", "delta_p_type", "delta_p_sr", "vmc", "rs")


@dataclass(frozen=True)
class ProbeReport:
    agent_id: str
    probe: str
    n_samples: int
    metrics: dict
    outcomes: tuple = ()
    unanswered_count: int = 0
    probe_spec: dict = field(default_factory=dict)
    setting: str = "low"
    baseline: dict = field(default_factory=dict)
    # steps dropped because the operator rejected them, with reasons
    excluded: tuple = ()

    def __post_init__(self) -> None:
        if self.n_samples <= 0:
            raise ValueError("a report needs at least one sample")
        for key in ("type_acc", "grounding_acc", "sr", "tsr", "vmc", "rs"):
            v = self.metrics.get(key)
            if v is not None and not 0 <= v <= 100:
                raise ValueError(f"{key}={v} outside [0, 100]")
        object.__setattr__(self, "outcomes", tuple(self.outcomes))
        object.__setattr__(self, "excluded", tuple(self.excluded))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["outcomes"] = list(self.outcomes)
        d["excluded"] = list(self.excluded)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> ProbeReport:
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True, ensure_ascii=False) + "\n"

    def csv_row(self) -> dict:
        row = {"agent_id": self.agent_id, "probe": self.probe, "n": self.n_samples,
               "unanswered": self.unanswered_count}
        row.update({k: self.metrics.get(k) for k in METRIC_KEYS})
        return row


def read_report(path: str | Path) -> ProbeReport:
    return ProbeReport.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _cell(v) -> str:
    return "" if v is None else str(v)


def render_csv(reports: Iterable[ProbeReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in reports:
        row = r.csv_row()
        w.writerow([_cell(row[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def _manifest_reports(manifest_path: Path) -> tuple[dict, dict[tuple[str, str], ProbeReport]]:
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    root = manifest_path.parent
    reports = {}
    for entry in manifest.get("reports", []):
        reports[(entry["agent_id"], entry["probe"])] = read_report(root / entry["path"])
    return manifest, reports


@dataclass(frozen=True)
class DeltaRow:
    agent_id: str
    probe: str
    metric: str
    a: float | None
    b: float | None
    diff: float | None
    flagged: bool


def _diff(a, b) -> float | None:
    if a is None or b is None:
        return None
    return round_half_up((Fraction(str(b)) - Fraction(str(a))) * 10) / 10


def compare_runs(manifest_a: str | Path, manifest_b: str | Path) -> list[DeltaRow]:
    """Per (agent, probe, metric) differences, b minus a.

    A row is flagged when the values differ, when only one side has a value,
    or (metric ``report``) when only one run produced that report.

    Raises:
        ValueError: the runs were made on different corpora.
    """
    ma, ra = _manifest_reports(Path(manifest_a))
    mb, rb = _manifest_reports(Path(manifest_b))
    if ma.get("corpus_hash") != mb.get("corpus_hash"):
        raise ValueError(f"runs use different corpora ({ma.get('corpus_hash')} vs {mb.get('corpus_hash')})")
    rows = []
    for key in sorted(set(ra) | set(rb)):
        if key not in ra or key not in rb:
            rows.append(DeltaRow(key[0], key[1], "report", None, None, None, True))
            continue
        for m in METRIC_KEYS:
            a, b = ra[key].metrics.get(m), rb[key].metrics.get(m)
            d = _diff(a, b)
            flagged = (a is None) != (b is None) or (d is not None and d != 0)
            rows.append(DeltaRow(key[0], key[1], m, a, b, d, flagged))
        a, b = ra[key].unanswered_count, rb[key].unanswered_count
        rows.append(DeltaRow(key[0], key[1], "unanswered", a, b, b - a, a != b))
    return rows


def render_delta_table(rows: Sequence[DeltaRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("agent_id", "probe", "metric", "a", "b", "diff", "flagged"))
    for r in rows:
        w.writerow((r.agent_id, r.probe, r.metric, _cell(r.a), _cell(r.b), _cell(r.diff), int(r.flagged)))
    return buf.getvalue()


MEMORY_REASONING_COLUMNS = ("agent_id", "probe", "delta_p_sr", "memory", "reasoning")
VMC_RS_COLUMNS = ("agent_id", "probe", "vmc", "rs")


def emit_plot_data(reports: Iterable[ProbeReport]) -> dict[str, list[tuple]]:
    """Tables behind the memory/reasoning scatter and the VMC/RS distributions.

    ``memory_reasoning``: reasoning = 1 - delta_p_sr / 100, memory = its
    complement; reports without a delta are skipped. ``vmc_rs``: one row per
    report.
    """
    reports = list(reports)
    if not reports:
        raise ValueError("no reports to tabulate")
    scatter, dist = [], []
    for r in reports:
        dp = r.metrics.get("delta_p_sr")
        if dp is not None:
            memory = Fraction(str(dp)) / 100
            scatter.append((r.agent_id, r.probe, dp, float(memory), float(1 - memory)))
        dist.append((r.agent_id, r.probe, r.metrics.get("vmc"), r.metrics.get("rs")))
    return {"memory_reasoning": scatter, "vmc_rs": dist}


def write_plot_data(reports: Iterable[ProbeReport], out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tables = emit_plot_data(reports)
    paths = []
    for name, cols in (("memory_reasoning", MEMORY_REASONING_COLUMNS), ("vmc_rs", VMC_RS_COLUMNS)):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for row in tables[name]:
            w.writerow([_cell(v) for v in row])
        p = out / f"{name}.csv"
        p.write_text(buf.getvalue(), encoding="utf-8")
        paths.append(p)
    return paths


def load_manifest_reports(manifest_path: str | Path) -> list[ProbeReport]:
    """The reports a run manifest lists, in manifest order."""
    return list(_manifest_reports(Path(manifest_path))[1].values())
