"""Best-effort converters from benchmark layouts to :class:`EpisodeCorpus`.

Only actions in the shared space survive; anything else (long presses, app
switcher keys, hovers, infeasible-task markers...) is dropped, counted in
``EpisodeCorpus.dropped_steps`` and logged. Surviving steps of an episode are
renumbered so ``step_index`` stays consecutive.

The expected on-disk layouts are the unpacked forms below. Paths inside the
files are relative to the dataset directory.

androidcontrol
    ``episodes.jsonl``, one episode per line: ``episode_id``, ``goal``,
    ``screenshots`` (paths), ``step_instructions``, ``actions`` (objects with
    ``action_type`` in click/long_press/scroll/input_text/open_app/
    navigate_back/navigate_home/wait/status and pixel ``x``/``y``,
    ``direction``, ``text``, ``app_name``, ``goal_status``).
aitz
    ``*.json`` files, each a list of step objects with ``episode_id``,
    ``step_id``, ``instruction`` (goal), ``coat_action_desc`` (atomic
    instruction), ``image_path``, ``result_action_type`` (AITW integer code),
    ``result_touch_yx``/``result_lift_yx`` (``[y, x]`` in 0..1) and
    ``result_action_text``.
gui_odyssey
    ``annotations/*.json``, each with ``episode_id``, ``task_info.instruction``,
    ``device_info.{w,h}`` and ``step_info`` entries holding ``screenshot``,
    ``action`` (CLICK/SCROLL/TEXT/COMPLETE/INCOMPLETE/LONG_PRESS/KEY_*),
    ``info`` (0..1000 coordinates or text) and ``low_level_instruction``.
gui_act
    ``gui_act.jsonl``, one step per line: ``episode_id``, ``step_index``,
    ``goal``, ``instruction``, ``image`` and ``action`` with ``name``
    (click/input/scroll/enter/answer/...) and 0..1 ``point``/``box``,
    ``text``, ``direction`` or ``dual_point``.
omniact
    ``index.json``: list of ``{"task": <txt>, "image": <png>}``. Task files
    read ``Task: ...`` then ``Output Script:`` followed by ``pyautogui`` calls;
    only single-click scripts map to the shared space.
"""

from __future__ import annotations

import ast
import json
import logging
import re
from collections.abc import Callable
from pathlib import Path

from ..core import (
    Click,
    Complete,
    Enter,
    Episode,
    OpenApp,
    Point,
    PressBack,
    PressHome,
    Region,
    Screen,
    Scroll,
    Step,
    Type,
    Wait,
    round_half_up,
)
from .canonical import EpisodeCorpus, _image_size, load_canonical

log = logging.getLogger(__name__)

FORMATS = ("androidcontrol", "aitz", "gui_odyssey", "gui_act", "omniact", "canonical")

# AITW action codes used by AITZ
AITW_TYPE, AITW_DUAL_POINT, AITW_BACK, AITW_HOME, AITW_ENTER, AITW_COMPLETE = 3, 4, 5, 6, 7, 10
# a dual-point gesture shorter than this (fraction of the screen) is a tap
TAP_DISTANCE = 0.04


class AdapterError(ValueError):
    pass


class Unmappable(Exception):
    """Native action outside the shared action space."""


class _Builder:
    """Collects steps per episode, renumbering around dropped ones."""

    def __init__(self, root: Path) -> None:
        self.root = root
        self.episodes: dict[str, list[Step]] = {}
        self.goals: dict[str, str] = {}
        self.dropped = 0
        self.native = 0

    def screen(self, rel: str, w: int | None = None, h: int | None = None) -> Screen:
        path = self.root / rel
        if not path.is_file():
            raise AdapterError(f"image {rel} not found")
        if w is None or h is None:
            w, h = _image_size(path)
        return Screen(width=int(w), height=int(h), path=path)

    def add(self, episode_id: str, sample_id: str, goal: str, make: Callable[[], tuple]) -> None:
        """``make`` returns ``(screen, action, instruction, region)`` or raises Unmappable."""
        self.native += 1
        try:
            screen, action, instruction, region = make()
        except AdapterError:
            raise
        except (Unmappable, ValueError) as exc:
            self.dropped += 1
            log.warning("dropping %s: %s", sample_id, exc)
            return
        steps = self.episodes.setdefault(episode_id, [])
        self.goals.setdefault(episode_id, goal)
        steps.append(Step(sample_id, episode_id, len(steps), screen, goal, action, instruction, region))

    def corpus(self, name: str, platform_tag: str) -> EpisodeCorpus:
        eps = tuple(Episode(eid, self.goals[eid], tuple(s)) for eid, s in self.episodes.items() if s)
        if self.dropped:
            log.warning("%s: dropped %d of %d native steps outside the shared action space",
                        name, self.dropped, self.native)
        return EpisodeCorpus(name, eps, platform_tag, dropped_steps=self.dropped)


def _px(v) -> int:
    return round_half_up(v)


def _clamp_point(x, y, w: int, h: int) -> Point:
    return Point(min(max(_px(x), 0), w), min(max(_px(y), 0), h))


def _drag_direction(x0, y0, x1, y1) -> str:
    """Scroll direction for a finger drag: content moves opposite to the finger."""
    dx, dy = x1 - x0, y1 - y0
    if abs(dy) >= abs(dx):
        return "down" if dy < 0 else "up"
    return "right" if dx < 0 else "left"


def _read_json(path: Path):
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise AdapterError(f"cannot parse {path}: {exc}") from exc


def _read_jsonl(path: Path) -> list:
    if not path.is_file():
        raise AdapterError(f"{path} not found")
    rows = []
    for n, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if line.strip():
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise AdapterError(f"{path}:{n}: {exc}") from exc
    return rows


# --- AndroidControl ---------------------------------------------------------------


def _androidcontrol_action(a: dict, w: int, h: int):
    t = a.get("action_type")
    if t == "click":
        return Click(_clamp_point(a["x"], a["y"], w, h))
    if t == "scroll":
        return Scroll(a["direction"])
    if t == "input_text":
        return Type(a["text"])
    if t == "open_app":
        return OpenApp(a["app_name"])
    if t == "navigate_back":
        return PressBack()
    if t == "navigate_home":
        return PressHome()
    if t == "wait":
        return Wait()
    if t == "status" and a.get("goal_status") == "successful":
        return Complete()
    raise Unmappable(f"androidcontrol action {t!r}")


def adapt_androidcontrol(root: Path) -> EpisodeCorpus:
    b = _Builder(root)
    for ep in _read_jsonl(root / "episodes.jsonl"):
        eid = str(ep["episode_id"])
        instrs = ep.get("step_instructions") or []
        for i, act in enumerate(ep["actions"]):
            def make(i=i, act=act):
                screen = b.screen(ep["screenshots"][i])
                action = _androidcontrol_action(act, screen.width, screen.height)
                return screen, action, instrs[i] if i < len(instrs) else None, None
            b.add(eid, f"{eid}_{i}", ep["goal"], make)
    return b.corpus("androidcontrol", "mobile")


# --- AITZ --------------------------------------------------------------------


def _yx(v):
    if isinstance(v, str):
        v = ast.literal_eval(v)
    return float(v[0]), float(v[1])


def _aitz_action(s: dict, w: int, h: int):
    t = int(s["result_action_type"])
    if t == AITW_DUAL_POINT:
        ty, tx = _yx(s["result_touch_yx"])
        ly, lx = _yx(s["result_lift_yx"])
        if ((ly - ty) ** 2 + (lx - tx) ** 2) ** 0.5 <= TAP_DISTANCE:
            return Click(_clamp_point(tx * w, ty * h, w, h))
        return Scroll(_drag_direction(tx, ty, lx, ly))
    if t == AITW_TYPE:
        return Type(s["result_action_text"])
    if t == AITW_BACK:
        return PressBack()
    if t == AITW_HOME:
        return PressHome()
    if t == AITW_ENTER:
        return Enter()
    if t == AITW_COMPLETE:
        return Complete()
    raise Unmappable(f"AITW action type {t}")


def adapt_aitz(root: Path) -> EpisodeCorpus:
    b = _Builder(root)
    files = sorted(root.glob("*.json"))
    if not files:
        raise AdapterError(f"no episode .json files in {root}")
    for f in files:
        steps = _read_json(f)
        for s in sorted(steps, key=lambda s: int(s["step_id"])):
            eid = str(s["episode_id"])

            def make(s=s):
                screen = b.screen(s["image_path"])
                return screen, _aitz_action(s, screen.width, screen.height), s.get("coat_action_desc"), None
            b.add(eid, f"{eid}_{s['step_id']}", s["instruction"], make)
    return b.corpus("aitz", "mobile")


# --- GUI-Odyssey ----------------------------------------------------------------


def _odyssey_action(st: dict, w: int, h: int):
    act, info = st["action"], st.get("info")
    if act == "CLICK" and isinstance(info, str):
        act = info  # hardware keys are logged as clicks on a key name
    if act == "CLICK":
        x, y = info[0]
        return Click(_clamp_point(x * w / 1000, y * h / 1000, w, h))
    if act == "SCROLL":
        (x0, y0), (x1, y1) = info[0], info[1]
        return Scroll(_drag_direction(x0, y0, x1, y1))
    if act == "TEXT":
        return Type(info)
    if act == "KEY_BACK":
        return PressBack()
    if act == "KEY_HOME":
        return PressHome()
    if act == "COMPLETE":
        return Complete()
    raise Unmappable(f"gui_odyssey action {act!r}")


def adapt_gui_odyssey(root: Path) -> EpisodeCorpus:
    b = _Builder(root)
    files = sorted((root / "annotations").glob("*.json"))
    if not files:
        raise AdapterError(f"no annotations/*.json in {root}")
    for f in files:
        ep = _read_json(f)
        eid = str(ep["episode_id"])
        w, h = ep["device_info"]["w"], ep["device_info"]["h"]
        for st in ep["step_info"]:
            def make(st=st):
                screen = b.screen(st["screenshot"], w, h)
                return screen, _odyssey_action(st, w, h), st.get("low_level_instruction"), None
            b.add(eid, f"{eid}_{st['step']}", ep["task_info"]["instruction"], make)
    return b.corpus("gui_odyssey", "mobile")


# --- GUI-Act --------------------------------------------------------------------


def _gui_act_action(a: dict, w: int, h: int):
    name = a.get("name")
    if name == "click":
        if "box" in a:
            x0, y0, x1, y1 = a["box"]
            region = Region(_px(x0 * w), _px(y0 * h), max(_px(x1 * w), _px(x0 * w) + 1),
                            max(_px(y1 * h), _px(y0 * h) + 1)).clip(w, h)
            pt = a.get("point") or [(x0 + x1) / 2, (y0 + y1) / 2]
            return Click(_clamp_point(pt[0] * w, pt[1] * h, w, h)), region
        x, y = a["point"]
        return Click(_clamp_point(x * w, y * h, w, h)), None
    if name == "input":
        return Type(a["text"]), None
    if name == "scroll":
        if "direction" in a:
            return Scroll(a["direction"]), None
        (x0, y0), (x1, y1) = a["dual_point"]["from"], a["dual_point"]["to"]
        return Scroll(_drag_direction(x0, y0, x1, y1)), None
    if name == "enter":
        return Enter(), None
    if name == "answer":
        return Complete(), None
    raise Unmappable(f"gui_act action {name!r}")


def adapt_gui_act(root: Path, platform_tag: str = "web") -> EpisodeCorpus:
    b = _Builder(root)
    rows = sorted(_read_jsonl(root / "gui_act.jsonl"), key=lambda r: (str(r["episode_id"]), int(r["step_index"])))
    for r in rows:
        eid = str(r["episode_id"])

        def make(r=r):
            screen = b.screen(r["image"], r.get("width"), r.get("height"))
            action, region = _gui_act_action(r["action"], screen.width, screen.height)
            return screen, action, r.get("instruction"), region
        b.add(eid, f"{eid}_{r['step_index']}", r["goal"], make)
    return b.corpus("gui_act", platform_tag)


# --- OmniAct --------------------------------------------------------------------

_TASK = re.compile(r"^\s*Task:\s*(.*)$", re.MULTILINE)
_CLICK = re.compile(r"^pyautogui\.(?:click|leftClick)\(\s*(?:x\s*=\s*)?([\d.]+)\s*,\s*(?:y\s*=\s*)?([\d.]+)\s*\)$")


def _omniact_parse(text: str) -> tuple[str, list[str]]:
    m = _TASK.search(text)
    if not m:
        raise AdapterError("task file has no 'Task:' line")
    _, _, script = text.partition("Output Script:")
    lines = [ln.strip() for ln in script.splitlines() if ln.strip()]
    return m.group(1).strip(), lines


def adapt_omniact(root: Path, platform_tag: str = "desktop") -> EpisodeCorpus:
    b = _Builder(root)
    index = _read_json(root / "index.json")
    for i, entry in enumerate(index):
        try:
            goal, lines = _omniact_parse((root / entry["task"]).read_text(encoding="utf-8"))
        except OSError as exc:
            raise AdapterError(f"cannot read {entry['task']}: {exc}") from exc
        eid = Path(entry["task"]).stem or f"task{i}"

        def make(entry=entry, lines=lines):
            m = _CLICK.match(lines[0]) if len(lines) == 1 else None
            if m is None:
                raise Unmappable(f"script {lines!r} is not a single click")
            screen = b.screen(entry["image"])
            return screen, Click(_clamp_point(float(m.group(1)), float(m.group(2)),
                                              screen.width, screen.height)), None, None
        b.add(eid, f"{eid}_0", goal, make)
    return b.corpus("omniact", platform_tag)


_ADAPTERS = {
    "androidcontrol": adapt_androidcontrol,
    "aitz": adapt_aitz,
    "gui_odyssey": adapt_gui_odyssey,
    "gui_act": adapt_gui_act,
    "omniact": adapt_omniact,
    "canonical": load_canonical,
}


def adapt(format_id: str, path: str | Path) -> EpisodeCorpus:
    """Read a dataset in a native layout (see module docstring) into the canonical model."""
    if format_id not in _ADAPTERS:
        raise ValueError(f"unknown format {format_id!r}; expected one of {FORMATS}")
    root = Path(path)
    if not root.is_dir():
        raise AdapterError(f"{root} is not a directory")
    try:
        return _ADAPTERS[format_id](root)
    except (KeyError, IndexError, TypeError) as exc:
        raise AdapterError(f"{format_id}: malformed native record ({exc!r})") from exc
