"""Request payloads in the chat-completion shape most model servers accept."""

from __future__ import annotations

import base64
import io
from dataclasses import dataclass
from typing import Callable

from ..codec import get_dialect, serialize_action
from ..core import Screen

SETTINGS = ("high", "low")


@dataclass(frozen=True)
class PromptBundle:
    setting: str
    goal: str
    screen: Screen
    instruction: str | None = None
    history: tuple = ()

    def __post_init__(self) -> None:
        if self.setting not in SETTINGS:
            raise ValueError(f"setting must be one of {SETTINGS}, got {self.setting!r}")
        if self.setting == "low" and self.instruction is None:
            raise ValueError("low-level setting needs an instruction")
        object.__setattr__(self, "history", tuple(self.history))


@dataclass(frozen=True)
class PromptTemplate:
    """Format strings over ``goal``, ``instruction``, ``history`` and ``format_hint``.

    ``history`` expands to an empty string or to a block ending in a newline.
    """

    high: str
    low: str
    system: str | None = None


DEFAULT_TEMPLATE = PromptTemplate(
    high="Goal: {goal}\n{history}Reply with the single next action. {format_hint}",
    low="Goal: {goal}\nInstruction: {instruction}\n{history}Reply with the single next action. {format_hint}",
    system="You operate a graphical user interface by emitting one action per turn.",
)

_TEMPLATES: dict[str, PromptTemplate | Callable[[PromptBundle, str], str]] = {"default": DEFAULT_TEMPLATE}


def register_template(template_id: str, template: PromptTemplate | Callable[[PromptBundle, str], str]) -> None:
    """Add or replace a template. Callables receive ``(bundle, dialect_id)`` and return the text."""
    _TEMPLATES[template_id] = template


def encode_png(screen: Screen) -> str:
    from PIL import Image

    buf = io.BytesIO()
    Image.fromarray(screen.pixels).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def render_text(template_id: str, bundle: PromptBundle, dialect_id: str = "json") -> str:
    try:
        template = _TEMPLATES[template_id]
    except KeyError:
        raise KeyError(f"unknown prompt template {template_id!r}") from None
    if callable(template):
        return template(bundle, dialect_id)
    dialect = get_dialect(dialect_id)
    history = ""
    if bundle.history:
        lines = [f"{i}. {serialize_action(a, dialect, bundle.screen)}" for i, a in enumerate(bundle.history, 1)]
        history = "Previous actions:\n" + "\n".join(lines) + "\n"
    hint = f"Format: {dialect.description}. Example: {dialect.example}" if dialect.example else ""
    fmt = template.low if bundle.setting == "low" else template.high
    return fmt.format(goal=bundle.goal, instruction=bundle.instruction or "", history=history, format_hint=hint)


def build_prompt(template_id: str, bundle: PromptBundle, *, model: str = "", dialect_id: str = "json",
                 params: dict | None = None) -> dict:
    """The request body: one user message with the screenshot (PNG, base64) and the text.

    Decoding ``params`` (temperature, max_tokens, ...) are copied through untouched.
    """
    text = render_text(template_id, bundle, dialect_id)
    template = _TEMPLATES[template_id]
    messages = []
    system = getattr(template, "system", None)
    if system:
        messages.append({"role": "system", "content": system})
    messages.append({
        "role": "user",
        "content": [
            {"type": "image_url", "image_url": {"url": "data:image/png;base64," + encode_png(bundle.screen)}},
            {"type": "text", "text": text},
        ],
    })
    payload = {"model": model, "messages": messages}
    if params:
        payload.update(params)
    return payload


def payload_text(payload: dict) -> str:
    """The text part of a payload built by :func:`build_prompt`."""
    for msg in payload.get("messages", []):
        if msg.get("role") == "user" and isinstance(msg.get("content"), list):
            for part in msg["content"]:
                if part.get("type") == "text":
                    return part["text"]
    return ""
