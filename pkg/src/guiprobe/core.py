"""Canonical data types shared by every stage of a probing run.

Coordinates inside :class:`Step` (``gt_action`` points and ``gt_region``) are
raw screen pixels. Agent predictions are held in width/height-normalized
milli-units (0..1000). :func:`normalize_point` is the only bridge between the
two frames and is what the metrics use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import ClassVar, Union

import numpy as np

NORM_SCALE = 1000
SCROLL_DIRECTIONS = ("up", "down", "left", "right")


class CoordinateRangeError(ValueError):
    """A raw coordinate lies outside the screen it is measured against."""

    def __init__(self, axis: str, value, limit) -> None:
        super().__init__(f"{axis}={value} is outside [0, {limit}]")
        self.axis = axis
        self.value = value
        self.limit = limit


def round_half_up(value) -> int:
    """Round to the nearest integer, ties toward +inf. Exact for int/float/Fraction."""
    return math.floor(Fraction(value) + Fraction(1, 2))


@dataclass(frozen=True, order=True)
class Point:
    x: int
    y: int

    def __post_init__(self) -> None:
        for axis in ("x", "y"):
            v = getattr(self, axis)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
                raise TypeError(f"Point.{axis} must be an integer, got {v!r}")
            object.__setattr__(self, axis, int(v))


@dataclass(frozen=True)
class Region:
    """Pixel rectangle ``[x0, x1) x [y0, y1)``."""

    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self) -> None:
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError(f"empty region {self}")

    @property
    def width(self) -> int:
        return self.x1 - self.x0

    @property
    def height(self) -> int:
        return self.y1 - self.y0

    @property
    def center(self) -> Point:
        # integer center of the half-open box
        return Point((self.x0 + self.x1) // 2, (self.y0 + self.y1) // 2)

    def fits(self, width: int, height: int) -> bool:
        return 0 <= self.x0 and self.x1 <= width and 0 <= self.y0 and self.y1 <= height

    def clip(self, width: int, height: int) -> Region | None:
        x0, y0 = max(self.x0, 0), max(self.y0, 0)
        x1, y1 = min(self.x1, width), min(self.y1, height)
        if x0 >= x1 or y0 >= y1:
            return None
        return Region(x0, y0, x1, y1)

    @classmethod
    def square_around(cls, center: Point, size: int, width: int, height: int) -> Region | None:
        """A ``size`` x ``size`` block centered on ``center``, clipped to the screen."""
        half = size // 2
        x0 = center.x - half
        y0 = center.y - half
        return cls(x0, y0, x0 + size, y0 + size).clip(width, height)


# --- actions ---------------------------------------------------------------


@dataclass(frozen=True)
class Click:
    kind: ClassVar[str] = "click"
    # None only for recorded steps whose click has no coordinate (region-only)
    point: Point | None = None


@dataclass(frozen=True)
class Scroll:
    kind: ClassVar[str] = "scroll"
    direction: str = "down"

    def __post_init__(self) -> None:
        if self.direction not in SCROLL_DIRECTIONS:
            raise ValueError(f"scroll direction must be one of {SCROLL_DIRECTIONS}, got {self.direction!r}")


@dataclass(frozen=True)
class Type:
    kind: ClassVar[str] = "type"
    text: str = ""

    def __post_init__(self) -> None:
        if not isinstance(self.text, str) or not self.text.strip():
            raise ValueError("type text must be non-empty")


@dataclass(frozen=True)
class OpenApp:
    kind: ClassVar[str] = "open_app"
    app_name: str = ""

    def __post_init__(self) -> None:
        if not isinstance(self.app_name, str) or not self.app_name.strip():
            raise ValueError("open_app name must be non-empty")


@dataclass(frozen=True)
class PressBack:
    kind: ClassVar[str] = "press_back"


@dataclass(frozen=True)
class PressHome:
    kind: ClassVar[str] = "press_home"


@dataclass(frozen=True)
class Enter:
    kind: ClassVar[str] = "enter"


@dataclass(frozen=True)
class Complete:
    kind: ClassVar[str] = "complete"


@dataclass(frozen=True)
class Wait:
    kind: ClassVar[str] = "wait"


Action = Union[Click, Scroll, Type, OpenApp, PressBack, PressHome, Enter, Complete, Wait]

ACTION_TYPES: dict[str, type] = {
    cls.kind: cls for cls in (Click, Scroll, Type, PressBack, PressHome, Enter, Complete, OpenApp, Wait)
}
ACTION_KINDS = tuple(ACTION_TYPES)
REFLECTIVE_KINDS = frozenset({"press_back", "press_home"})
STATUS_KINDS = frozenset({"complete", "wait"})


def action_to_dict(action: Action) -> dict:
    """Manifest form: ``{kind, x, y, direction, text}`` with unused fields null."""
    out = {"kind": action.kind, "x": None, "y": None, "direction": None, "text": None}
    if isinstance(action, Click) and action.point is not None:
        out["x"], out["y"] = action.point.x, action.point.y
    elif isinstance(action, Scroll):
        out["direction"] = action.direction
    elif isinstance(action, Type):
        out["text"] = action.text
    elif isinstance(action, OpenApp):
        out["text"] = action.app_name
    return out


def action_from_dict(data: dict) -> Action:
    kind = data.get("kind")
    if kind not in ACTION_TYPES:
        raise ValueError(f"unknown action kind {kind!r}")
    if kind == "click":
        x, y = data.get("x"), data.get("y")
        if x is None and y is None:
            return Click()
        if x is None or y is None:
            raise ValueError("click needs both x and y, or neither")
        return Click(Point(x, y))
    if kind == "scroll":
        return Scroll(data.get("direction"))
    if kind == "type":
        return Type(data.get("text"))
    if kind == "open_app":
        return OpenApp(data.get("text"))
    return ACTION_TYPES[kind]()


# --- screens, steps, episodes ----------------------------------------------


class Screen:
    """An RGB screenshot, optionally backed by a file that is decoded on first access.

    Pixel arrays are ``(height, width, 3)`` uint8 and are frozen (read-only) once
    materialized.
    """

    __slots__ = ("width", "height", "_pixels", "path")

    def __init__(self, pixels: np.ndarray | None = None, *, width: int | None = None,
                 height: int | None = None, path: str | Path | None = None) -> None:
        if pixels is None and path is None:
            raise ValueError("Screen needs pixels or a path")
        if pixels is not None:
            pixels = np.asarray(pixels)
            if pixels.ndim != 3 or pixels.shape[2] != 3 or pixels.dtype != np.uint8:
                raise ValueError(f"expected (H, W, 3) uint8 pixels, got {pixels.shape} {pixels.dtype}")
            if not pixels.flags.writeable and pixels.flags.c_contiguous:
                frozen = pixels
            else:
                frozen = np.ascontiguousarray(pixels).copy()
                frozen.flags.writeable = False
            pixels = frozen
            height, width = pixels.shape[:2]
        if width is None or height is None:
            raise ValueError("lazy Screen needs width and height")
        if width < 2 or height < 2:
            raise ValueError(f"screen must be at least 2x2, got {width}x{height}")
        self.width = int(width)
        self.height = int(height)
        self._pixels = pixels
        self.path = Path(path) if path is not None else None

    @property
    def pixels(self) -> np.ndarray:
        if self._pixels is None:
            from PIL import Image

            with Image.open(self.path) as im:
                arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
            if arr.shape[:2] != (self.height, self.width):
                raise ValueError(
                    f"{self.path}: image is {arr.shape[1]}x{arr.shape[0]}, "
                    f"manifest says {self.width}x{self.height}"
                )
            arr = np.ascontiguousarray(arr)
            arr.flags.writeable = False
            self._pixels = arr
        return self._pixels

    @classmethod
    def filled(cls, width: int, height: int, rgb=(0, 0, 0)) -> Screen:
        arr = np.empty((height, width, 3), dtype=np.uint8)
        arr[...] = rgb
        return cls(arr)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Screen):
            return NotImplemented
        return (self.width, self.height) == (other.width, other.height) and np.array_equal(
            self.pixels, other.pixels
        )

    __hash__ = None

    def __repr__(self) -> str:
        src = f", path={str(self.path)!r}" if self.path else ""
        return f"Screen({self.width}x{self.height}{src})"


@dataclass(frozen=True, eq=False)
class Step:
    sample_id: str
    episode_id: str
    step_index: int
    screen: Screen
    goal: str
    gt_action: Action
    instruction: str | None = None
    gt_region: Region | None = None

    def click_point(self) -> Point | None:
        """Ground-truth click position: the recorded point, else the region center."""
        if not isinstance(self.gt_action, Click):
            return None
        if self.gt_action.point is not None:
            return self.gt_action.point
        if self.gt_region is not None:
            return self.gt_region.center
        return None


@dataclass(frozen=True, eq=False)
class Episode:
    episode_id: str
    goal: str
    steps: tuple[Step, ...]
    # horizon cap; offline replay never extends a trajectory, so default to the recorded length
    max_steps: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "steps", tuple(self.steps))
        if self.max_steps is None:
            object.__setattr__(self, "max_steps", len(self.steps))


def normalize_point(p_raw, screen) -> Point:
    """Map a raw pixel position onto the 0..1000 milli-unit frame.

    ``p_raw`` is a :class:`Point` or an ``(x, y)`` pair (floats allowed);
    ``screen`` is anything with ``width``/``height``. Rounding is half-up.
    """
    x, y = (p_raw.x, p_raw.y) if isinstance(p_raw, Point) else p_raw
    w, h = screen.width, screen.height
    if not 0 <= x <= w:
        raise CoordinateRangeError("x", x, w)
    if not 0 <= y <= h:
        raise CoordinateRangeError("y", y, h)
    nx = round_half_up(Fraction(x) * NORM_SCALE / w)
    ny = round_half_up(Fraction(y) * NORM_SCALE / h)
    return Point(min(max(nx, 0), NORM_SCALE), min(max(ny, 0), NORM_SCALE))


def denormalize_point(p: Point, width: int, height: int) -> tuple[float, float]:
    """Inverse of :func:`normalize_point` without rounding (raw pixels as floats)."""
    return p.x * width / NORM_SCALE, p.y * height / NORM_SCALE


@dataclass(frozen=True)
class Violation:
    sample_id: str
    rule: str
    message: str


def validate_episode(episode: Episode) -> list[Violation]:
    out: list[Violation] = []
    steps = episode.steps
    if not steps:
        return [Violation(episode.episode_id, "empty_episode", "episode has no steps")]
    if len(steps) > episode.max_steps:
        out.append(Violation(steps[0].sample_id, "horizon_exceeded",
                             f"{len(steps)} steps exceed max_steps={episode.max_steps}"))
    seen: set[str] = set()
    for expected, step in enumerate(steps):
        sid = step.sample_id
        if sid in seen:
            out.append(Violation(sid, "duplicate_sample_id", f"sample_id {sid!r} repeated"))
        seen.add(sid)
        if step.step_index != expected:
            out.append(Violation(sid, "non_consecutive_index",
                                 f"step_index {step.step_index} where {expected} was expected"))
        w, h = step.screen.width, step.screen.height
        a = step.gt_action
        if isinstance(a, Click):
            if a.point is None and step.gt_region is None:
                out.append(Violation(sid, "ungroundable_click", "click has neither a point nor a region"))
            if a.point is not None and not (0 <= a.point.x <= w and 0 <= a.point.y <= h):
                out.append(Violation(sid, "point_out_of_bounds", f"click {a.point} outside {w}x{h}"))
        if step.gt_region is not None and not step.gt_region.fits(w, h):
            out.append(Violation(sid, "region_out_of_bounds", f"{step.gt_region} outside {w}x{h}"))
        if step.goal != episode.goal:
            out.append(Violation(sid, "goal_mismatch", "step goal differs from episode goal"))
    return out
