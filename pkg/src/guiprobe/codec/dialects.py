"""Agent output dialects.

A dialect knows how to find candidate action blocks in free text and how to
render a canonical action back to text. Each dialect declares whether the
coordinates it speaks are raw screen pixels or 0..1000 milli-units; parsing
always returns milli-units.
"""

from __future__ import annotations

import ast
import json
import re
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import yaml

from ..core import (
    ACTION_KINDS,
    ACTION_TYPES,
    NORM_SCALE,
    Click,
    OpenApp,
    Point,
    Scroll,
    Type,
    normalize_point,
    round_half_up,
)

NO_ACTION = "no_action_found"
UNKNOWN_KIND = "unknown_action_kind"
MALFORMED = "malformed_arguments"

# errors a hostile or sloppy response can provoke while building an action
_BUILD_ERRORS = (ValueError, TypeError, SyntaxError, RecursionError, MemoryError, OverflowError, KeyError)


class MalformedArguments(ValueError):
    pass


@dataclass
class Candidate:
    """One action-shaped span in a response."""

    start: int
    end: int
    kind: str | None = None
    args: dict = field(default_factory=dict)
    failure: str | None = None
    rationale: str | None = None


class Dialect:
    id: str = ""
    description: str = ""
    coordinates: str = "normalized"  # or "pixel"
    example: str = ""

    def candidates(self, text: str) -> list[Candidate]:
        raise NotImplementedError

    def render(self, kind: str, args: dict) -> str:
        raise NotImplementedError

    def clean_rationale(self, prefix: str) -> str | None:
        prefix = prefix.strip()
        return prefix or None

    # shared helpers

    def to_point(self, x, y, screen) -> Point:
        x, y = _number(x), _number(y)
        if self.coordinates == "pixel":
            if screen is None:
                raise MalformedArguments("pixel coordinates need the screen size")
            return normalize_point((x, y), screen)
        if not (0 <= x <= NORM_SCALE and 0 <= y <= NORM_SCALE):
            raise MalformedArguments(f"({x}, {y}) outside 0..{NORM_SCALE}")
        return Point(round_half_up(x), round_half_up(y))

    def from_point(self, p: Point, screen) -> tuple[int, int]:
        if self.coordinates == "pixel":
            w, h = (screen.width, screen.height) if screen is not None else (NORM_SCALE, NORM_SCALE)
            return round_half_up(p.x * w / Fraction(NORM_SCALE)), round_half_up(p.y * h / Fraction(NORM_SCALE))
        return p.x, p.y


def _number(v):
    if isinstance(v, bool) or not isinstance(v, (int, float, str)):
        raise MalformedArguments(f"not a number: {v!r}")
    if isinstance(v, str):
        v = float(v) if any(c in v for c in ".eE") else int(v)
    if isinstance(v, float) and not (v == v and abs(v) != float("inf")):
        raise MalformedArguments("non-finite coordinate")
    return v


def build_action(kind: str, args: dict, dialect: Dialect, screen):
    """Turn a kind + raw argument mapping into a canonical action (milli-units)."""
    if kind == "click":
        if "x" not in args or "y" not in args:
            raise MalformedArguments("click needs x and y")
        return Click(dialect.to_point(args["x"], args["y"], screen))
    if kind == "scroll":
        d = args.get("direction")
        if not isinstance(d, str):
            raise MalformedArguments("scroll needs a direction")
        return Scroll(d.strip().lower())
    if kind == "type":
        return Type(_text(args.get("text")))
    if kind == "open_app":
        return OpenApp(_text(args.get("app_name", args.get("text"))))
    return ACTION_TYPES[kind]()


def _text(v) -> str:
    if not isinstance(v, str):
        raise MalformedArguments("text argument must be a string")
    return v


def action_args(action, dialect: Dialect, screen) -> dict:
    if isinstance(action, Click):
        if action.point is None:
            raise ValueError("cannot serialize a click without a point")
        x, y = dialect.from_point(action.point, screen)
        return {"x": x, "y": y}
    if isinstance(action, Scroll):
        return {"direction": action.direction}
    if isinstance(action, Type):
        return {"text": action.text}
    if isinstance(action, OpenApp):
        return {"app_name": action.app_name}
    return {}


def select_nonoverlapping(cands: list[Candidate]) -> list[Candidate]:
    """Leftmost-longest tokenization: drop candidates nested inside an earlier one."""
    cands = sorted(cands, key=lambda c: (c.start, -(c.end - c.start)))
    out: list[Candidate] = []
    end = -1
    for c in cands:
        if c.start >= end:
            out.append(c)
            end = c.end
    return out


# --- structured JSON --------------------------------------------------------


class JsonDialect(Dialect):
    id = "json"
    description = 'JSON object with an "action" key, coordinates in 0..1000'
    coordinates = "normalized"
    example = '{"action": "click", "x": 500, "y": 500}'

    _decoder = json.JSONDecoder()

    def candidates(self, text: str) -> list[Candidate]:
        out = []
        i = text.find("{")
        while i != -1:
            try:
                obj, end = self._decoder.raw_decode(text, i)
            except (ValueError, RecursionError):
                i = text.find("{", i + 1)
                continue
            if isinstance(obj, dict) and "action" in obj:
                out.append(self._candidate(obj, i, end))
            i = text.find("{", end)
        return out

    def _candidate(self, obj: dict, start: int, end: int) -> Candidate:
        kind = obj.get("action")
        kind = kind.strip().lower() if isinstance(kind, str) else kind
        args = {k: v for k, v in obj.items() if k not in ("action", "thought")}
        thought = obj.get("thought") if isinstance(obj.get("thought"), str) else None
        if kind not in ACTION_TYPES:
            return Candidate(start, end, failure=UNKNOWN_KIND, rationale=thought)
        return Candidate(start, end, kind, args, rationale=thought)

    def render(self, kind: str, args: dict) -> str:
        return json.dumps({"action": kind, **args})


# --- python-style function calls ------------------------------------------------


class FuncCallDialect(Dialect):
    id = "funcall"
    description = "Python-style calls with keyword arguments, coordinates in screen pixels"
    coordinates = "pixel"
    example = "click(x=540, y=1200)"

    _call = re.compile(r"\b([A-Za-z_][A-Za-z0-9_]*)\s*\(")
    _positional = {"click": ("x", "y"), "scroll": ("direction",), "type": ("text",), "open_app": ("app_name",)}

    def candidates(self, text: str) -> list[Candidate]:
        matches = list(self._call.finditer(text))
        # resolve right to left so enclosing calls can skip over inner ones
        closes: dict[int, int | None] = {}
        for m in reversed(matches):
            closes[m.end() - 1] = _close_paren(text, m.end(), closes)
        out = []
        for m in matches:
            name = m.group(1).lower()
            end = closes[m.end() - 1]
            if end is None:
                if name in ACTION_TYPES:
                    out.append(Candidate(m.start(), len(text), name, failure=MALFORMED))
                continue
            if name not in ACTION_TYPES:
                # only a bare call on its own line counts as an attempted action
                if _own_line(text, m.start(), end):
                    out.append(Candidate(m.start(), end, failure=UNKNOWN_KIND))
                continue
            try:
                args = self._args(name, text[m.start():end])
            except _BUILD_ERRORS:
                out.append(Candidate(m.start(), end, name, failure=MALFORMED))
                continue
            out.append(Candidate(m.start(), end, name, args))
        return out

    def _args(self, name: str, snippet: str) -> dict:
        with warnings.catch_warnings():
            # agent text like "\w" must not surface as invalid-escape warnings
            warnings.simplefilter("ignore", (DeprecationWarning, SyntaxWarning))
            node = ast.parse(snippet.strip(), mode="eval").body
        if not isinstance(node, ast.Call):
            raise MalformedArguments("not a call")
        slots = self._positional.get(name, ())
        if len(node.args) > len(slots):
            raise MalformedArguments("too many positional arguments")
        args = {slot: ast.literal_eval(a) for slot, a in zip(slots, node.args)}
        for kw in node.keywords:
            if kw.arg is None:
                raise MalformedArguments("**kwargs not supported")
            args[kw.arg] = ast.literal_eval(kw.value)
        return args

    def render(self, kind: str, args: dict) -> str:
        inner = ", ".join(f"{k}={v!r}" for k, v in args.items())
        return f"{kind}({inner})"


def _close_paren(text: str, i: int, known: dict[int, int | None] | None = None) -> int | None:
    """Index just past the ``)`` closing the call whose ``(`` ends at ``i``.

    ``known`` maps the ``(`` of calls further right to their own result, which
    keeps deeply nested input linear.
    """
    known = known or {}
    depth, quote, n = 1, None, len(text)
    while i < n:
        ch = text[i]
        if quote:
            if ch == "\\":
                i += 1
            elif ch == quote:
                quote = None
        elif ch in "'\"":
            quote = ch
        elif ch == "(" and i in known:
            if known[i] is None:
                return None
            i = known[i]
            continue
        elif ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth == 0:
                return i + 1
        i += 1
    return None


def _own_line(text: str, start: int, end: int) -> bool:
    line_start = text.rfind("\n", 0, start) + 1
    line_end = text.find("\n", end)
    line_end = len(text) if line_end == -1 else line_end
    return not text[line_start:start].strip() and not text[end:line_end].strip()


# --- declarative grammars --------------------------------------------------------


class GrammarDialect(Dialect):
    """A dialect defined entirely by regular patterns and output templates.

    Grammar files are YAML with keys ``id``, ``description``, ``coordinates``
    (``normalized`` or ``pixel``), ``text_quoting`` (``json`` or ``raw``),
    ``patterns`` (kind -> regex with named groups ``x``, ``y``, ``direction``,
    ``text``), ``templates`` (kind -> format string over the same names), and
    optionally ``unknown_pattern`` (regex with a ``kind`` group flagging
    attempted actions of unknown kind), ``output_prefix`` and
    ``rationale_strip`` (regexes removed from the text preceding the action).
    """

    def __init__(self, spec: dict) -> None:
        missing = {"id", "patterns", "templates"} - set(spec)
        if missing:
            raise ValueError(f"grammar missing keys: {sorted(missing)}")
        unknown = (set(spec["patterns"]) | set(spec["templates"])) - set(ACTION_KINDS)
        if unknown:
            raise ValueError(f"grammar names unknown action kinds: {sorted(unknown)}")
        self.id = spec["id"]
        self.description = spec.get("description", "")
        self.coordinates = spec.get("coordinates", "normalized")
        if self.coordinates not in ("normalized", "pixel"):
            raise ValueError(f"coordinates must be 'normalized' or 'pixel', not {self.coordinates!r}")
        self.text_quoting = spec.get("text_quoting", "json")
        self.patterns = {k: re.compile(v) for k, v in spec["patterns"].items()}
        self.templates = dict(spec["templates"])
        up = spec.get("unknown_pattern")
        self.unknown_pattern = re.compile(up) if up else None
        self.output_prefix = spec.get("output_prefix", "")
        self.rationale_strip = [re.compile(p) for p in spec.get("rationale_strip", [])]
        self.example = spec.get("example") or ""

    @classmethod
    def from_file(cls, path: str | Path) -> GrammarDialect:
        with open(path, encoding="utf-8") as fh:
            return cls(yaml.safe_load(fh))

    def candidates(self, text: str) -> list[Candidate]:
        out = []
        for kind, pat in self.patterns.items():
            for m in pat.finditer(text):
                groups = {k: v for k, v in m.groupdict().items() if v is not None}
                try:
                    args = self._decode(groups)
                except _BUILD_ERRORS:
                    out.append(Candidate(m.start(), m.end(), kind, failure=MALFORMED))
                    continue
                out.append(Candidate(m.start(), m.end(), kind, args))
        if self.unknown_pattern is not None:
            for m in self.unknown_pattern.finditer(text):
                word = (m.groupdict().get("kind") or "").lower()
                if word not in ACTION_TYPES:
                    out.append(Candidate(m.start(), m.end(), failure=UNKNOWN_KIND))
        return out

    def _decode(self, groups: dict) -> dict:
        if "text" in groups:
            raw = groups["text"]
            groups["text"] = json.loads(raw) if self.text_quoting == "json" else raw.strip()
        return groups

    def render(self, kind: str, args: dict) -> str:
        if kind not in self.templates:
            raise ValueError(f"dialect {self.id!r} has no template for {kind!r}")
        fmt = dict(args)
        if "app_name" in fmt:
            fmt["text"] = fmt.pop("app_name")
        if "text" in fmt and self.text_quoting == "json":
            fmt["text"] = json.dumps(fmt["text"])
        return self.output_prefix + self.templates[kind].format(**fmt)

    def clean_rationale(self, prefix: str) -> str | None:
        for pat in self.rationale_strip:
            prefix = pat.sub("", prefix)
        return super().clean_rationale(prefix)
