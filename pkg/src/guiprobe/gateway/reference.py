"""Scripted agents with known behaviour, used to check that the probes separate them.

* ``memory_oracle`` replays the recorded action whatever it is shown.
* ``reasoner_oracle`` reacts to what actually changed on screen or in the text.
* ``random_agent`` draws a uniformly random action, seeded by sample id.

All three answer in canonical form (milli-unit coordinates). :class:`ReferenceAgent`
pushes that answer through a dialect's serializer and parser so the codec is
exercised exactly as with a remote model.
"""

from __future__ import annotations

import hashlib
import random

from ..codec import parse_action, serialize_action
from ..core import (
    ACTION_KINDS,
    ACTION_TYPES,
    NORM_SCALE,
    SCROLL_DIRECTIONS,
    Click,
    OpenApp,
    Point,
    PressBack,
    Scroll,
    Step,
    Type,
    Wait,
    normalize_point,
)
from ..perturb import PerturbedStep
from .client import AgentResponse

REFERENCE_KINDS = ("memory_oracle", "reasoner_oracle", "random_agent")

# actions whose arguments can only come from the instruction text
_TEXT_ARG_KINDS = frozenset({"type", "open_app"})
_WORDS = ("hello", "search", "settings", "weather", "music", "news", "maps", "camera")


def canonical_gt(step: Step, action=None, screen=None):
    """``action`` (default: the step's ground truth) with click coordinates normalized."""
    action = step.gt_action if action is None else action
    screen = step.screen if screen is None else screen
    if isinstance(action, Click):
        point = action.point if action.point is not None else step.click_point()
        return Click(normalize_point(point, screen))
    return action


def _rng(seed: int, sample_id: str) -> random.Random:
    digest = hashlib.sha256(f"{seed}:{sample_id}".encode()).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def random_action(sample_id: str, seed: int = 0):
    rng = _rng(seed, sample_id)
    kind = rng.choice(ACTION_KINDS)
    if kind == "click":
        return Click(Point(rng.randint(0, NORM_SCALE), rng.randint(0, NORM_SCALE)))
    if kind == "scroll":
        return Scroll(rng.choice(SCROLL_DIRECTIONS))
    if kind == "type":
        return Type(rng.choice(_WORDS))
    if kind == "open_app":
        return OpenApp(rng.choice(_WORDS).title())
    return ACTION_TYPES[kind]()


def _reasoner(step: Step, perturbed: PerturbedStep | None):
    if perturbed is None:
        return canonical_gt(step)
    spec = perturbed.spec
    if spec.kind in ("mask", "edit"):
        return PressBack()
    if spec.kind == "zoom":
        return canonical_gt(step, perturbed.remapped_gt, perturbed.screen)
    if spec.kind == "sentence_sub":
        # follows the decoy, which asks for a click
        return Click(Point(NORM_SCALE // 2, NORM_SCALE // 2))
    if spec.kind == "ablate":
        gt = canonical_gt(step)
        if not spec.ablate_keep_visual and not spec.ablate_keep_instruction:
            return Wait()
        if not spec.ablate_keep_visual:
            # the instruction alone says what to do but not where
            return Wait() if isinstance(gt, Click) else gt
        if not spec.ablate_keep_instruction:
            # the screen shows where, but typed text and app names are unknowable
            return Wait() if gt.kind in _TEXT_ARG_KINDS else gt
        return gt
    return canonical_gt(step)


def reference_agent_step(kind: str, step: Step, perturbed: PerturbedStep | None = None, *, seed: int = 0):
    """The action a reference agent takes on ``step`` (shown ``perturbed`` if given)."""
    if kind == "memory_oracle":
        return canonical_gt(step)
    if kind == "reasoner_oracle":
        return _reasoner(step, perturbed)
    if kind == "random_agent":
        return random_action(step.sample_id, seed)
    raise ValueError(f"unknown reference agent {kind!r}; expected one of {REFERENCE_KINDS}")


def reference_reply(kind: str, step: Step, perturbed: PerturbedStep | None, dialect_id: str,
                    *, seed: int = 0) -> str:
    """The raw text a reference agent would send back."""
    screen = perturbed.screen if perturbed is not None else step.screen
    return serialize_action(reference_agent_step(kind, step, perturbed, seed=seed), dialect_id, screen)


class ReferenceAgent:
    """In-process reference agent with the same ``respond`` interface as remote agents."""

    # answers from the step itself, so the runner can skip rendering prompts
    needs_payload = False

    def __init__(self, kind: str, *, dialect_id: str = "json", seed: int = 0, agent_id: str | None = None,
                 max_parallel: int = 1) -> None:
        if kind not in REFERENCE_KINDS:
            raise ValueError(f"unknown reference agent {kind!r}; expected one of {REFERENCE_KINDS}")
        self.kind = kind
        self.dialect_id = dialect_id
        self.seed = seed
        self.agent_id = agent_id or kind
        self.max_parallel = max_parallel

    def respond(self, query) -> AgentResponse:
        raw = reference_reply(self.kind, query.step, query.perturbed, self.dialect_id, seed=self.seed)
        return AgentResponse(raw, parse_action(raw, self.dialect_id, query.screen), 0.0, 1)

    def close(self) -> None:
        pass
