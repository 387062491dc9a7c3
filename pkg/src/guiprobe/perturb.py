"""Probe operators: deterministic rewrites of a recorded step.

Each operator takes a :class:`~guiprobe.core.Step` and returns a
:class:`PerturbedStep` holding the altered observation together with the
ground truth expressed in the altered frame. Operators never mutate their
input and never consult randomness.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, fields
from fractions import Fraction
from typing import Callable

import numpy as np

from . import kernels
from .core import Click, Point, Region, Screen, Step, round_half_up

PROBE_KINDS = ("mask", "edit", "zoom", "token_drop", "sentence_sub", "ablate")
VISUAL_KINDS = frozenset({"mask", "edit", "zoom"})
TEXT_KINDS = frozenset({"token_drop", "sentence_sub"})

ABLATION_GRAY = (128, 128, 128)
RELAX_TOL = 0.5
RELAX_MAX_ITER = 10_000


class PerturbationError(ValueError):
    def __init__(self, sample_id: str, message: str) -> None:
        super().__init__(f"{sample_id}: {message}")
        self.sample_id = sample_id


class UngroundableClickError(PerturbationError):
    """The step's target has no recoverable footprint."""


class RemapNote(str, enum.Enum):
    IDENTITY = "identity"
    ZOOM_REMAPPED = "zoom_remapped"
    TARGET_REMOVED = "target_removed"


@dataclass(frozen=True)
class PerturbationSpec:
    kind: str
    mask_block_px: int = 50
    fill_rgb: tuple[int, int, int] = (0, 0, 0)
    decoy_instruction: str = "Click the Amazon APP"
    token_placeholder: str = "[]"
    ablate_keep_visual: bool = True
    ablate_keep_instruction: bool = True

    def __post_init__(self) -> None:
        if self.kind not in PROBE_KINDS:
            raise ValueError(f"unknown probe kind {self.kind!r}; expected one of {PROBE_KINDS}")
        if isinstance(self.mask_block_px, bool) or int(self.mask_block_px) != self.mask_block_px \
                or self.mask_block_px < 1:
            raise ValueError(f"mask_block_px must be an integer >= 1, got {self.mask_block_px!r}")
        rgb = tuple(int(c) for c in self.fill_rgb)
        if len(rgb) != 3 or not all(0 <= c <= 255 for c in rgb):
            raise ValueError(f"fill_rgb must be three 0..255 values, got {self.fill_rgb!r}")
        object.__setattr__(self, "fill_rgb", rgb)
        object.__setattr__(self, "mask_block_px", int(self.mask_block_px))

    @property
    def label(self) -> str:
        """Short identifier used in report names and tables."""
        if self.kind == "ablate":
            return f"ablate_v{int(self.ablate_keep_visual)}_i{int(self.ablate_keep_instruction)}"
        return self.kind

    @property
    def family(self) -> str:
        if self.kind in VISUAL_KINDS:
            return "visual"
        if self.kind in TEXT_KINDS:
            return "text"
        return "all"

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["fill_rgb"] = list(self.fill_rgb)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> PerturbationSpec:
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ValueError(f"unknown PerturbationSpec fields: {sorted(extra)}")
        return cls(**data)


@dataclass(frozen=True, eq=False)
class PerturbedStep:
    base_sample_id: str
    spec: PerturbationSpec
    screen: Screen
    goal: str
    instruction: str | None
    remapped_gt: object
    remap_note: RemapNote
    region: Region | None = None
    # zoom only: the crop that was magnified back to full size
    quadrant: Region | None = None


def derive_region(step: Step, block_px: int) -> Region:
    """The target footprint: the recorded region, else a block around the click."""
    if not isinstance(step.gt_action, Click):
        raise UngroundableClickError(step.sample_id, f"{step.gt_action.kind} step has no target element")
    w, h = step.screen.width, step.screen.height
    if step.gt_region is not None:
        region = step.gt_region.clip(w, h)
    elif step.gt_action.point is not None:
        region = Region.square_around(step.gt_action.point, block_px, w, h)
    else:
        region = None
    if region is None:
        raise UngroundableClickError(step.sample_id, "no region derivable from the click")
    return region


def mask_object(step: Step, spec: PerturbationSpec) -> PerturbedStep:
    """Paint the target footprint with ``spec.fill_rgb``."""
    region = derive_region(step, spec.mask_block_px)
    px = step.screen.pixels.copy()
    px[region.y0:region.y1, region.x0:region.x1] = spec.fill_rgb
    return PerturbedStep(step.sample_id, spec, Screen(px), step.goal, step.instruction,
                         step.gt_action, RemapNote.TARGET_REMOVED, region=region)


def edit_object(step: Step, spec: PerturbationSpec, *, backend: str | None = None) -> PerturbedStep:
    """Erase the target and re-synthesize it from the surrounding pixels."""
    region = derive_region(step, spec.mask_block_px)
    w, h = step.screen.width, step.screen.height
    if region.x0 == 0 and region.y0 == 0 and region.x1 == w and region.y1 == h:
        raise PerturbationError(step.sample_id, "edit region covers the whole screen; nothing to interpolate from")
    mask = np.zeros((h, w), dtype=bool)
    mask[region.y0:region.y1, region.x0:region.x1] = True
    px, _ = kernels.laplace_fill(step.screen.pixels, mask, tol=RELAX_TOL,
                                 max_iter=RELAX_MAX_ITER, backend=backend)
    return PerturbedStep(step.sample_id, spec, Screen(px), step.goal, step.instruction,
                         step.gt_action, RemapNote.TARGET_REMOVED, region=region)


def quadrant_of(point: Point, width: int, height: int) -> Region:
    """Quadrant containing ``point``; midlines belong to the right/bottom quadrant."""
    mx, my = width // 2, height // 2
    x0, x1 = (0, mx) if point.x < mx else (mx, width)
    y0, y1 = (0, my) if point.y < my else (my, height)
    return Region(x0, y0, x1, y1)


def zoom_remap(point: Point, quadrant: Region, width: int, height: int) -> Point:
    return Point(round_half_up((point.x - quadrant.x0) * width / Fraction(quadrant.width)),
                 round_half_up((point.y - quadrant.y0) * height / Fraction(quadrant.height)))


def zoom_unmap(point: Point, quadrant: Region, width: int, height: int) -> tuple[float, float]:
    return (quadrant.x0 + point.x * quadrant.width / width,
            quadrant.y0 + point.y * quadrant.height / height)


def zoom_in(step: Step, spec: PerturbationSpec | None = None, *, backend: str | None = None) -> PerturbedStep:
    """Crop the quadrant holding the target and magnify it back to full size."""
    spec = spec or PerturbationSpec("zoom")
    point = step.click_point()
    if point is None:
        raise UngroundableClickError(step.sample_id, "zoom needs a click target")
    w, h = step.screen.width, step.screen.height
    if not (0 <= point.x <= w and 0 <= point.y <= h):
        raise PerturbationError(step.sample_id, f"click {point} outside the {w}x{h} screen")
    q = quadrant_of(point, w, h)
    crop = step.screen.pixels[q.y0:q.y1, q.x0:q.x1]
    px = kernels.resize_bilinear(crop, h, w, backend=backend)
    remapped = Click(zoom_remap(point, q, w, h))
    return PerturbedStep(step.sample_id, spec, Screen(px), step.goal, step.instruction,
                         remapped, RemapNote.ZOOM_REMAPPED, quadrant=q)


_LEADING_TOKEN = re.compile(r"\s*\S+")


def drop_leading_token(step: Step, spec: PerturbationSpec) -> PerturbedStep:
    """Replace the first word of the atomic instruction with a placeholder."""
    if not step.instruction or not step.instruction.strip():
        raise PerturbationError(step.sample_id, "token_drop needs a low-level instruction")
    m = _LEADING_TOKEN.match(step.instruction)
    new = spec.token_placeholder + step.instruction[m.end():]
    return PerturbedStep(step.sample_id, spec, step.screen, step.goal, new,
                         step.gt_action, RemapNote.IDENTITY)


def substitute_instruction(step: Step, spec: PerturbationSpec) -> PerturbedStep:
    """Swap the atomic instruction for an unrelated decoy.

    Ground truth stays the original action: the probe asks whether the agent
    follows the new text or keeps doing what it did before.
    """
    if step.instruction is None:
        raise PerturbationError(step.sample_id, "sentence_sub needs a low-level instruction")
    decoy = spec.decoy_instruction
    if not decoy or not decoy.strip():
        raise PerturbationError(step.sample_id, "decoy instruction is empty")
    if decoy.strip() == step.instruction.strip():
        raise PerturbationError(step.sample_id, "decoy instruction equals the original")
    return PerturbedStep(step.sample_id, spec, step.screen, step.goal, decoy,
                         step.gt_action, RemapNote.IDENTITY)


def ablate_modalities(step: Step, spec: PerturbationSpec) -> PerturbedStep:
    """Withhold the screen (gray canvas) and/or the instruction (empty string)."""
    screen = step.screen
    if not spec.ablate_keep_visual:
        screen = Screen.filled(screen.width, screen.height, ABLATION_GRAY)
    instruction = step.instruction
    if not spec.ablate_keep_instruction:
        instruction = ""
    return PerturbedStep(step.sample_id, spec, screen, step.goal, instruction,
                         step.gt_action, RemapNote.IDENTITY)


OPERATORS: dict[str, Callable[[Step, PerturbationSpec], PerturbedStep]] = {
    "mask": mask_object,
    "edit": edit_object,
    "zoom": zoom_in,
    "token_drop": drop_leading_token,
    "sentence_sub": substitute_instruction,
    "ablate": ablate_modalities,
}


def apply_perturbation(step: Step, spec: PerturbationSpec) -> PerturbedStep:
    return OPERATORS[spec.kind](step, spec)
