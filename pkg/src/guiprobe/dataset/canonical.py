"""The on-disk corpus format.

A corpus is a directory holding ``manifest.json`` plus one lossless image per
step. The manifest is::

    {
      "name": "...", "platform_tag": "mobile",
      "records": [
        {"sample_id": "...", "episode_id": "...", "step_index": 0,
         "goal": "...", "instruction": "..." | null,
         "image_file": "images/x.png", "screen_w": 1080, "screen_h": 2400,
         "gt_action": {"kind": "click", "x": 540, "y": 1200, "direction": null, "text": null},
         "gt_region": {"x0": 0, "y0": 0, "x1": 10, "y1": 10} | null},
        ...
      ]
    }

Records are grouped into episodes by ``episode_id`` in manifest order.
Coordinates are raw pixels.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..core import (
    Episode,
    Region,
    Screen,
    Step,
    Violation,
    action_from_dict,
    action_to_dict,
    validate_episode,
)

log = logging.getLogger(__name__)

MANIFEST = "manifest.json"
RECORD_FIELDS = ("sample_id", "episode_id", "step_index", "goal", "instruction", "image_file",
                 "screen_w", "screen_h", "gt_action", "gt_region")


class CorpusError(ValueError):
    def __init__(self, message: str, sample_id: str | None = None) -> None:
        super().__init__(f"{sample_id}: {message}" if sample_id else message)
        self.sample_id = sample_id


@dataclass(frozen=True, eq=False)
class EpisodeCorpus:
    name: str
    episodes: tuple[Episode, ...]
    platform_tag: str = ""
    # steps an adapter could not map onto the shared action space
    dropped_steps: int = field(default=0, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "episodes", tuple(self.episodes))

    def steps(self) -> list[Step]:
        return [s for e in self.episodes for s in e.steps]

    def step_map(self) -> dict[str, Step]:
        return {s.sample_id: s for s in self.steps()}

    def episode_of(self) -> dict[str, Episode]:
        return {s.sample_id: e for e in self.episodes for s in e.steps}

    def __len__(self) -> int:
        return len(self.episodes)


def validate_corpus(corpus: EpisodeCorpus) -> list:
    """All episode-level violations plus corpus-wide sample_id uniqueness."""
    out = []
    seen: set[str] = set()
    if not corpus.episodes:
        out.append(Violation(corpus.name, "empty_corpus", "corpus has no episodes"))
    for ep in corpus.episodes:
        out.extend(v for v in validate_episode(ep) if v.rule != "duplicate_sample_id")
        for s in ep.steps:
            if s.sample_id in seen:
                out.append(Violation(s.sample_id, "duplicate_sample_id", f"sample_id {s.sample_id!r} repeated"))
            seen.add(s.sample_id)
    return out


def _region(d) -> Region | None:
    if d is None:
        return None
    return Region(int(d["x0"]), int(d["y0"]), int(d["x1"]), int(d["y1"]))


def _image_size(path: Path) -> tuple[int, int]:
    from PIL import Image, UnidentifiedImageError

    try:
        with Image.open(path) as im:
            return im.size
    except (OSError, UnidentifiedImageError) as exc:
        raise CorpusError(f"unreadable image {path}: {exc}") from exc


def load_canonical(path: str | Path, *, check_images: bool = True) -> EpisodeCorpus:
    """Load and validate a canonical corpus directory.

    Images are not decoded here; each :class:`~guiprobe.core.Screen` reads its
    file on first pixel access. With ``check_images`` the header of every image
    is read to confirm it exists and matches the declared size.

    Raises:
        CorpusError: missing manifest, unreadable or missing image, schema or
            invariant violation. The message names the offending sample.
    """
    root = Path(path)
    mpath = root / MANIFEST
    if not mpath.is_file():
        raise CorpusError(f"no {MANIFEST} in {root}")
    try:
        manifest = json.loads(mpath.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CorpusError(f"{mpath}: invalid JSON ({exc})") from exc
    records = manifest.get("records")
    if not isinstance(records, list) or not records:
        raise CorpusError(f"{mpath}: 'records' must be a non-empty list")

    seen: set[str] = set()
    grouped: dict[str, list[Step]] = {}
    goals: dict[str, str] = {}
    for i, rec in enumerate(records):
        sid = rec.get("sample_id") if isinstance(rec, dict) else None
        if not isinstance(sid, str) or not sid:
            raise CorpusError(f"record {i} has no sample_id")
        missing = [k for k in RECORD_FIELDS if k not in rec]
        if missing:
            raise CorpusError(f"missing fields {missing}", sid)
        if sid in seen:
            raise CorpusError(f"duplicate sample_id {sid!r}", sid)
        seen.add(sid)
        img = root / rec["image_file"]
        if not img.is_file():
            raise CorpusError(f"image file {rec['image_file']} not found", sid)
        w, h = int(rec["screen_w"]), int(rec["screen_h"])
        if check_images:
            actual = _image_size(img)
            if actual != (w, h):
                raise CorpusError(f"{rec['image_file']} is {actual[0]}x{actual[1]}, manifest says {w}x{h}", sid)
        try:
            step = Step(
                sample_id=sid,
                episode_id=str(rec["episode_id"]),
                step_index=int(rec["step_index"]),
                screen=Screen(width=w, height=h, path=img),
                goal=rec["goal"],
                gt_action=action_from_dict(rec["gt_action"]),
                instruction=rec["instruction"],
                gt_region=_region(rec["gt_region"]),
            )
        except (TypeError, ValueError, KeyError) as exc:
            raise CorpusError(f"schema violation: {exc}", sid) from exc
        grouped.setdefault(step.episode_id, []).append(step)
        goals.setdefault(step.episode_id, step.goal)

    episodes = tuple(Episode(eid, goals[eid], tuple(steps)) for eid, steps in grouped.items())
    corpus = EpisodeCorpus(manifest.get("name", root.name), episodes, manifest.get("platform_tag", ""))
    violations = validate_corpus(corpus)
    if violations:
        v = violations[0]
        more = f" (+{len(violations) - 1} more)" if len(violations) > 1 else ""
        raise CorpusError(f"{v.rule}: {v.message}{more}", v.sample_id)
    return corpus


def _safe_name(sample_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]", "_", sample_id)


def step_record(step: Step, image_file: str) -> dict:
    r = step.gt_region
    return {
        "sample_id": step.sample_id,
        "episode_id": step.episode_id,
        "step_index": step.step_index,
        "goal": step.goal,
        "instruction": step.instruction,
        "image_file": image_file,
        "screen_w": step.screen.width,
        "screen_h": step.screen.height,
        "gt_action": action_to_dict(step.gt_action),
        "gt_region": None if r is None else {"x0": r.x0, "y0": r.y0, "x1": r.x1, "y1": r.y1},
    }


def save_canonical(corpus: EpisodeCorpus, path: str | Path) -> Path:
    """Write ``corpus`` as a canonical directory (PNG images)."""
    from PIL import Image

    root = Path(path)
    (root / "images").mkdir(parents=True, exist_ok=True)
    records = []
    used: set[str] = set()
    for step in corpus.steps():
        name = _safe_name(step.sample_id)
        while name in used:
            name += "_"
        used.add(name)
        rel = f"images/{name}.png"
        Image.fromarray(step.screen.pixels).save(root / rel, format="PNG", optimize=False)
        records.append(step_record(step, rel))
    manifest = {"name": corpus.name, "platform_tag": corpus.platform_tag, "records": records}
    (root / MANIFEST).write_text(json.dumps(manifest, indent=1, ensure_ascii=False) + "\n", encoding="utf-8")
    return root


def corpus_hash(corpus: EpisodeCorpus) -> str:
    """Content hash over every record and every screenshot's pixels."""
    h = hashlib.sha256()
    h.update(json.dumps([corpus.name, corpus.platform_tag], ensure_ascii=False).encode())
    for step in corpus.steps():
        rec = step_record(step, "")
        h.update(json.dumps(rec, sort_keys=True, ensure_ascii=False).encode())
        h.update(np.ascontiguousarray(step.screen.pixels).tobytes())
    return h.hexdigest()
