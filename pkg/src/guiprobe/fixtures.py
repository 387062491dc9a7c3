"""Synthetic corpus used by the self-validation run and the tests.

Screens are flat-coloured phone-sized canvases with a few rectangular
"buttons". Click targets sit in the central band of the screen (200..800
milli-units on both axes), far enough from every corner that a quadrant
zoom always moves them more than the click tolerance.
"""

from __future__ import annotations

import random

import numpy as np

from .core import (
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
)
from .dataset import EpisodeCorpus

SCREEN_W, SCREEN_H = 360, 640
BUTTON_W, BUTTON_H = 64, 40
_LABELS = ("OK", "Search", "Next", "Menu", "Cart", "Share", "Save", "Send", "Play", "Login")
_APPS = ("Gmail", "Maps", "Calendar", "Clock", "Chrome", "Photos")
_QUERIES = ("coffee near me", "weather today", "train times", "pasta recipe", "hello world")


def _canvas(rng: random.Random, targets: list[Region]) -> np.ndarray:
    bg = np.array([rng.randrange(180, 250) for _ in range(3)], dtype=np.uint8)
    px = np.empty((SCREEN_H, SCREEN_W, 3), dtype=np.uint8)
    px[:] = bg
    # a vertical gradient band gives the inpainting something non-flat to fill from
    ramp = np.linspace(0, 40, SCREEN_H, dtype=np.float64)[:, None, None]
    px[:] = np.clip(px.astype(np.float64) - ramp, 0, 255).astype(np.uint8)
    # status bar and a couple of distractor widgets
    px[:24] = (40, 40, 40)
    for _ in range(3):
        x0, y0 = rng.randrange(0, SCREEN_W - 50), rng.randrange(30, SCREEN_H - 30)
        px[y0:y0 + 20, x0:x0 + 50] = [rng.randrange(0, 256) for _ in range(3)]
    for r in targets:
        px[r.y0:r.y1, r.x0:r.x1] = [rng.randrange(0, 160) for _ in range(3)]
        px[r.y0 + 16:r.y0 + 24, r.x0 + 12:r.x1 - 12] = (255, 255, 255)
    return px


def _target(rng: random.Random) -> tuple[Point, Region]:
    # centre in the 0.2..0.8 band of both axes with margin for the button
    cx = rng.randrange(int(0.2 * SCREEN_W) + BUTTON_W // 2, int(0.8 * SCREEN_W) - BUTTON_W // 2)
    cy = rng.randrange(int(0.2 * SCREEN_H) + BUTTON_H // 2, int(0.8 * SCREEN_H) - BUTTON_H // 2)
    region = Region(cx - BUTTON_W // 2, cy - BUTTON_H // 2, cx + BUTTON_W // 2, cy + BUTTON_H // 2)
    return Point(cx, cy), region


def _step_plan(rng: random.Random, length: int) -> list[str]:
    plan = []
    for i in range(length):
        if i == length - 1:
            plan.append(rng.choice(("complete", "complete", "click")))
            continue
        r = rng.random()
        if r < 0.55:
            plan.append("click")
        elif r < 0.68:
            plan.append(rng.choice(("type", "open_app")))
        elif r < 0.78:
            plan.append("scroll")
        else:
            plan.append(rng.choice(("press_back", "press_home", "wait", "enter")))
    return plan


def make_fixture_corpus(n_episodes: int = 20, seed: int = 7, name: str = "synthetic") -> EpisodeCorpus:
    """Deterministic synthetic corpus of ``n_episodes`` phone episodes."""
    rng = random.Random(seed)
    episodes = []
    for e in range(n_episodes):
        eid = f"ep{e:03d}"
        app = rng.choice(_APPS)
        goal = f"In {app}, finish task number {e}"
        steps = []
        for i, kind in enumerate(_step_plan(rng, rng.randrange(4, 9))):
            region = None
            targets = []
            if kind == "click":
                point, box = _target(rng)
                label = rng.choice(_LABELS)
                targets.append(box)
                # a third of the clicks carry no element box, so the block fallback is exercised
                region = box if rng.random() < 0.67 else None
                action = Click(point)
                instruction = f"Tap the {label} button"
            elif kind == "type":
                text = rng.choice(_QUERIES)
                action, instruction = Type(text), f'Type "{text}" into the search box'
            elif kind == "open_app":
                name_ = rng.choice(_APPS)
                action, instruction = OpenApp(name_), f"Open the {name_} app"
            elif kind == "scroll":
                d = rng.choice(("up", "down", "left", "right"))
                action, instruction = Scroll(d), f"Scroll {d} to reveal more items"
            elif kind == "press_back":
                action, instruction = PressBack(), "Go back to the previous page"
            elif kind == "press_home":
                action, instruction = PressHome(), "Return to the home screen"
            elif kind == "wait":
                action, instruction = Wait(), "Wait for the page to load"
            elif kind == "enter":
                action, instruction = Enter(), "Press enter to submit"
            else:
                action, instruction = Complete(), "The task is done"
            screen = Screen(_canvas(rng, targets))
            steps.append(Step(f"{eid}_s{i}", eid, i, screen, goal, action, instruction, region))
        episodes.append(Episode(eid, goal, tuple(steps)))
    return EpisodeCorpus(name, tuple(episodes), "mobile")
