"""Parse agent text into canonical actions and render actions back to text."""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from ..core import NORM_SCALE
from .dialects import (
    MALFORMED,
    NO_ACTION,
    UNKNOWN_KIND,
    Dialect,
    FuncCallDialect,
    GrammarDialect,
    JsonDialect,
    _BUILD_ERRORS,
    action_args,
    build_action,
    select_nonoverlapping,
)

__all__ = [
    "Dialect", "GrammarDialect", "ParseFailure", "ParseOutcome", "get_dialect", "list_dialects",
    "load_grammar", "parse_action", "register_dialect", "serialize_action",
    "NO_ACTION", "UNKNOWN_KIND", "MALFORMED",
]

EXCERPT_CHARS = 200


@dataclass(frozen=True)
class ParseFailure:
    reason: str
    raw_excerpt: str


@dataclass(frozen=True)
class ParseOutcome:
    action: object = None
    rationale: str | None = None
    failure: ParseFailure | None = None

    def __post_init__(self) -> None:
        if (self.action is None) == (self.failure is None):
            raise ValueError("ParseOutcome needs exactly one of action / failure")

    @property
    def ok(self) -> bool:
        return self.action is not None


_REGISTRY: dict[str, Dialect] = {}


def register_dialect(dialect: Dialect, *, replace: bool = False) -> Dialect:
    if dialect.id in _REGISTRY and not replace:
        raise ValueError(f"dialect {dialect.id!r} already registered")
    _REGISTRY[dialect.id] = dialect
    return dialect


def load_grammar(path: str | Path, *, register: bool = True) -> GrammarDialect:
    dialect = GrammarDialect.from_file(path)
    if register:
        register_dialect(dialect, replace=True)
    return dialect


def get_dialect(dialect: str | Dialect) -> Dialect:
    if isinstance(dialect, Dialect):
        return dialect
    try:
        return _REGISTRY[dialect]
    except KeyError:
        raise KeyError(f"unknown dialect {dialect!r}; registered: {sorted(_REGISTRY)}") from None


def list_dialects() -> list[Dialect]:
    return [_REGISTRY[k] for k in sorted(_REGISTRY)]


register_dialect(JsonDialect())
register_dialect(FuncCallDialect())
with resources.as_file(resources.files(__package__) / "grammars" / "keyword.yaml") as _p:
    load_grammar(_p)


def _excerpt(text: str, start: int = 0) -> str:
    return text[start:start + EXCERPT_CHARS]


def parse_action(raw, dialect: str | Dialect, screen=None) -> ParseOutcome:
    """Extract the last well-formed action from an agent response.

    ``screen`` (anything with ``width``/``height``) is required only for
    dialects that speak pixel coordinates. Never raises on malformed input;
    problems come back as ``ParseOutcome.failure``.
    """
    d = get_dialect(dialect)
    if isinstance(raw, (bytes, bytearray)):
        text = bytes(raw).decode("utf-8", errors="replace")
    elif isinstance(raw, str):
        text = raw
    else:
        text = "" if raw is None else str(raw)

    cands = select_nonoverlapping(d.candidates(text))
    last_bad = None
    for c in reversed(cands):
        if c.failure is None:
            try:
                action = build_action(c.kind, c.args, d, screen)
            except _BUILD_ERRORS:
                c.failure = MALFORMED
            else:
                rationale = c.rationale or d.clean_rationale(text[:c.start])
                return ParseOutcome(action=action, rationale=rationale)
        if last_bad is None:
            last_bad = c
    if last_bad is not None:
        return ParseOutcome(failure=ParseFailure(last_bad.failure, _excerpt(text, last_bad.start)),
                            rationale=d.clean_rationale(text[:last_bad.start]))
    return ParseOutcome(failure=ParseFailure(NO_ACTION, _excerpt(text)))


def serialize_action(action, dialect: str | Dialect, screen=None) -> str:
    """Render ``action`` (milli-unit coordinates) in a dialect.

    Pixel dialects scale by ``screen`` (default 1000x1000). Round-trips through
    :func:`parse_action` exactly whenever the screen is at least 1000 px on
    each axis.
    """
    d = get_dialect(dialect)
    return d.render(action.kind, action_args(action, d, screen))
