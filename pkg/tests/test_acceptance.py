"""Exit criteria. Each test carries ``@pytest.mark.acceptance(n, title)``; the
terminal summary prints one PASS/FAIL line per criterion."""

from __future__ import annotations

import hashlib
import random
import time
from fractions import Fraction

import numpy as np
import pytest
from click.testing import CliRunner

from guiprobe import kernels
from guiprobe.cli import main as cli_main
from guiprobe.codec import ParseOutcome, get_dialect, list_dialects, parse_action, serialize_action
from guiprobe.core import (
    Click,
    Complete,
    Enter,
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
from guiprobe.gateway.mockserver import MockChatServer, reference_responder
from guiprobe.metrics import StepOutcome, aggregate, delta_p, match_action, match_click, vmc
from guiprobe.perturb import (
    PerturbationSpec,
    edit_object,
    mask_object,
    quadrant_of,
    zoom_in,
    zoom_remap,
    zoom_unmap,
)
from guiprobe.reports import read_report
from guiprobe.runner import RunConfig, run_experiment
from oracles import pct1_dec, relax_oracle, vmc_oracle, zoom_oracle

from conftest import FIXTURE_CONFIG, FIXTURE_CORPUS

SIX_PROBES = [{"kind": k} for k in ("mask", "edit", "zoom", "token_drop", "sentence_sub", "ablate")]
ABLATIONS = [{"kind": "ablate", "ablate_keep_visual": v, "ablate_keep_instruction": i}
             for v in (True, False) for i in (True, False)]


def _step(pixels, point=None, region=None, sid="s"):
    return Step(sid, "e", 0, Screen(pixels), "goal", Click(point), "Tap it", region)


def _config(tmp_path, agents, probes, **kw):
    data = {"corpus_path": str(FIXTURE_CORPUS), "agents": agents, "probes": probes,
            "output_dir": str(tmp_path / "out"), **kw}
    return RunConfig.from_dict(data)


def _reference_agents(dialects=("json", "funcall", "keyword")):
    kinds = ("memory_oracle", "reasoner_oracle", "random_agent")
    return [{"agent_id": k, "base_url": f"reference://{k}", "model_name": k, "dialect_id": d}
            for k, d in zip(kinds, dialects)]


def _reports(manifest) -> dict[tuple[str, str], object]:
    from pathlib import Path

    root = Path(manifest.output_dir)
    return {(e["agent_id"], e["probe"]): read_report(root / e["path"]) for e in manifest.reports}


# --- 1 -------------------------------------------------------------------------------


@pytest.mark.acceptance(1, "mask bit-exactness over 1,000 random fixtures, < 10 s")
def test_mask_bit_exact():
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    for i in range(1000):
        w, h = int(rng.integers(2, 97)), int(rng.integers(2, 97))
        px = rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8)
        fill = tuple(int(c) for c in rng.integers(0, 256, 3))
        block = int(rng.integers(1, 60))
        point = Point(int(rng.integers(0, w)), int(rng.integers(0, h)))
        if i % 2:
            x0, y0 = int(rng.integers(-5, w)), int(rng.integers(-5, h))
            region = Region(x0, y0, x0 + int(rng.integers(1, w + 6)), y0 + int(rng.integers(1, h + 6)))
            if region.clip(w, h) is None:
                region = Region(0, 0, 1, 1)
            rx0, ry0 = max(region.x0, 0), max(region.y0, 0)
            rx1, ry1 = min(region.x1, w), min(region.y1, h)
        else:
            region = None
            rx0, ry0 = max(point.x - block // 2, 0), max(point.y - block // 2, 0)
            rx1, ry1 = min(point.x - block // 2 + block, w), min(point.y - block // 2 + block, h)
        out = mask_object(_step(px, point, region), PerturbationSpec("mask", mask_block_px=block, fill_rgb=fill))
        got = out.screen.pixels
        inside = np.zeros((h, w), dtype=bool)
        inside[ry0:ry1, rx0:rx1] = True
        assert (got[inside] == np.array(fill, dtype=np.uint8)).all(), i
        assert (got[~inside] == px[~inside]).all(), i
        assert got.shape == px.shape
    assert time.perf_counter() - t0 < 10.0


# --- 2 -------------------------------------------------------------------------------


def _edit_fixtures():
    h, w = 40, 48
    yy, xx = np.mgrid[0:h, 0:w]
    base = {
        "gradient_x": np.stack([xx * 5, xx * 3 + 20, 255 - xx * 5], -1),
        "gradient_y": np.stack([yy * 6, 100 + yy * 2, yy * 0 + 77], -1),
        "gradient_diag": np.stack([(xx + yy) * 2, 255 - (xx + 2 * yy) * 2, (3 * xx + yy) % 256], -1),
        "checker_1": np.where(((xx + yy) % 2)[..., None] == 0, 255, 0).repeat(3, -1),
        "checker_4": np.where(((xx // 4 + yy // 4) % 2)[..., None] == 0, np.array([250, 10, 120]),
                              np.array([5, 240, 60])),
    }
    cases = [
        (Point(20, 18), Region(14, 12, 28, 24), 50),  # element box
        (Point(24, 20), None, 12),                      # centred block
        (Point(2, 3), None, 10),                        # block clipped at the corner
        (Point(46, 20), Region(40, 0, 48, 40), 50),     # box spanning the full height at the edge
    ]
    for name, px in base.items():
        px = np.clip(px, 0, 255).astype(np.uint8)
        for point, region, block in cases:
            yield name, px, point, region, block


@pytest.mark.acceptance(2, "edit matches brute-force Laplace relaxation within 1 unit, < 30 s")
@pytest.mark.parametrize("backend", kernels.available_backends())
def test_edit_matches_relaxation_oracle(backend):
    t0 = time.perf_counter()
    n = 0
    for name, px, point, region, block in _edit_fixtures():
        step = _step(px, point, region)
        out = edit_object(step, PerturbationSpec("edit", mask_block_px=block), backend=backend)
        r = out.region
        inside = [[r.x0 <= x < r.x1 and r.y0 <= y < r.y1 for x in range(px.shape[1])] for y in range(px.shape[0])]
        expected = np.array(relax_oracle(px.tolist(), inside), dtype=np.int64)
        diff = np.abs(out.screen.pixels.astype(np.int64) - expected)
        assert diff.max() <= 1, (name, point, region, block, int(diff.max()))
        n += 1
    assert n == 20
    assert time.perf_counter() - t0 < 30.0


# --- 3 -------------------------------------------------------------------------------


@pytest.mark.acceptance(3, "zoom remap exact on 10,000 random triples, inverse within 1 px")
def test_zoom_remap_oracle():
    rng = random.Random(3)
    for i in range(10_000):
        w, h = rng.randint(2, 4000), rng.randint(2, 4000)
        p = Point(rng.randint(0, w - 1), rng.randint(0, h - 1))
        if i % 10 == 0:  # midlines and far edges
            p = Point(rng.choice((w // 2, w - 1, 0)), rng.choice((h // 2, h - 1, 0)))
        (qx0, qy0, qx1, qy1), expected = zoom_oracle(p.x, p.y, w, h)
        q = quadrant_of(p, w, h)
        assert (q.x0, q.y0, q.x1, q.y1) == (qx0, qy0, qx1, qy1)
        got = zoom_remap(p, q, w, h)
        assert (got.x, got.y) == expected, (w, h, p)
        ux, uy = zoom_unmap(got, q, w, h)
        assert abs(ux - p.x) <= 1 and abs(uy - p.y) <= 1


@pytest.mark.acceptance(3, "zoom remap exact on 10,000 random triples, inverse within 1 px")
def test_zoom_operator_remaps_ground_truth():
    # the full operator, image included, on small screens
    rng = random.Random(33)
    for _ in range(2000):
        w, h = rng.randint(2, 40), rng.randint(2, 40)
        px = np.full((h, w, 3), 9, dtype=np.uint8)
        p = Point(rng.randint(0, w - 1), rng.randint(0, h - 1))
        out = zoom_in(_step(px, p))
        _, expected = zoom_oracle(p.x, p.y, w, h)
        assert (out.remapped_gt.point.x, out.remapped_gt.point.y) == expected
        assert out.screen.pixels.shape == px.shape


# --- 4 -------------------------------------------------------------------------------


@pytest.mark.acceptance(4, "click rule boundary: 138.59 passes, 140.00 passes, 141.42 fails")
def test_click_rule_boundary():
    gt = Point(500, 500)
    assert match_click(Point(598, 598), gt)        # 138.59
    assert not match_click(Point(600, 600), gt)    # 141.42
    assert match_click(Point(640, 500), gt)        # 140.00 exactly
    assert match_click(Point(584, 612), gt)        # 84-112-140 triangle, 140.00
    assert not match_click(Point(641, 500), gt)
    # through the step scorer on a 1000x1000 screen, where pixels equal milli-units
    screen = Screen.filled(1000, 1000, (0, 0, 0))
    for pred, ok in (((598, 598), True), ((640, 500), True), ((600, 600), False)):
        outcome = match_action(ParseOutcome(Click(Point(*pred))), Click(gt), screen)
        assert outcome.sr_ok is ok and outcome.grounding_ok is ok


# --- 5 -------------------------------------------------------------------------------


@pytest.mark.acceptance(5, "VMC equals a brute-force count over 1,000 random pair sets")
def test_vmc_matches_brute_force():
    rng = random.Random(5)
    ties = [((0, 0), (30, 40)), ((10, 10), (60, 10)), ((0, 0), (35, 35.5)), ((7, 7), (7, 57.5))]
    for _ in range(1000):
        pairs = []
        for _ in range(rng.randint(1, 60)):
            if rng.random() < 0.1:
                a, b = rng.choice(ties)
            else:
                ax, ay = rng.randint(0, 1500) / 2, rng.randint(0, 3000) / 2
                dx, dy = rng.randint(-120, 120) / 2, rng.randint(-120, 120) / 2
                a, b = (ax, ay), (ax + dx, ay + dy)
            pairs.append((a, b))
        assert vmc(pairs, 50) == vmc_oracle(pairs, 50)
    assert vmc([], 50) is None


# --- 6 -------------------------------------------------------------------------------


@pytest.mark.acceptance(6, "delta_p convention: 100 - perturbed SR under the baseline filter; identity gives 0")
def test_delta_p_convention(tmp_path):
    rng = random.Random(6)
    for _ in range(500):
        n = rng.randint(1, 400)
        ids = [f"s{i}" for i in range(n)]
        base = aggregate(StepOutcome(s, True, True) for s in ids)
        flags = [rng.random() < rng.random() for _ in ids]
        pert = aggregate(StepOutcome(s, f, f) for s, f in zip(ids, flags))
        dp = delta_p(base, pert)
        assert Fraction(str(dp.delta_p_sr)) == 100 - Fraction(str(pct1_dec(sum(flags), n)))
    assert delta_p(base, base).delta_p_sr == 0.0

    # identity probe (both modalities kept) with deterministic agents, end to end
    agents = _reference_agents()
    manifest = run_experiment(_config(tmp_path / "a", agents, [{"kind": "ablate"}], baseline_filter=False))
    assert manifest.ok
    for report in _reports(manifest).values():
        assert report.metrics["delta_p_type"] == 0.0 and report.metrics["delta_p_sr"] == 0.0

    # baseline filter on: every reported delta is exactly 100 minus the perturbed SR
    manifest = run_experiment(_config(tmp_path / "b", agents[:2], SIX_PROBES, baseline_filter=True))
    assert manifest.ok
    for report in _reports(manifest).values():
        assert report.baseline["sr"] == 100.0
        assert Fraction(str(report.metrics["delta_p_sr"])) == 100 - Fraction(str(report.metrics["sr"]))


# --- 7 -------------------------------------------------------------------------------


@pytest.mark.acceptance(7, "reference agents separate on the fixture corpus (mock-served), < 60 s")
def test_reference_agent_separation(tmp_path, fixture_corpus):
    t0 = time.perf_counter()
    kinds = ("memory_oracle", "reasoner_oracle", "random_agent")
    dialects = ("json", "funcall", "keyword")
    servers = [MockChatServer(reference_responder(fixture_corpus, k, d)).start() for k, d in zip(kinds, dialects)]
    try:
        agents = [{"agent_id": k, "base_url": s.url, "model_name": k, "dialect_id": d, "max_parallel": 4,
                   "max_retries": 0}
                  for k, d, s in zip(kinds, dialects, servers)]
        manifest = run_experiment(_config(tmp_path, agents, SIX_PROBES, baseline_filter=False))
    finally:
        for s in servers:
            s.stop()
    assert manifest.ok, manifest.failures
    reports = _reports(manifest)
    assert len(reports) == 18
    mem = {p: r.metrics for (a, p), r in reports.items() if a == "memory_oracle"}
    rea = {p: r.metrics for (a, p), r in reports.items() if a == "reasoner_oracle"}
    assert mem["mask"]["vmc"] == 100.0
    assert mem["mask"]["rs"] == 0.0
    assert mem["zoom"]["delta_p_sr"] == 100.0
    assert rea["mask"]["rs"] == 100.0
    assert rea["zoom"]["delta_p_sr"] == 0.0
    assert rea["sentence_sub"]["delta_p_sr"] > 0
    assert all(r.unanswered_count == 0 for r in reports.values())
    assert max(s.max_in_flight for s in servers) <= 4
    assert time.perf_counter() - t0 < 60.0


# --- 8 -------------------------------------------------------------------------------


@pytest.mark.acceptance(8, "two runs of the fixture config give byte-identical CSV reports")
def test_runs_are_byte_identical(tmp_path):
    runner = CliRunner()
    digests = []
    for name in ("first", "second"):
        out = tmp_path / name
        result = runner.invoke(cli_main, ["run", str(FIXTURE_CONFIG), "--output-dir", str(out)])
        assert result.exit_code == 0, result.output
        digests.append(hashlib.sha256((out / "reports.csv").read_bytes()).hexdigest())
        reports = sorted((out / "reports").iterdir())
        digests.append(hashlib.sha256(b"".join(p.read_bytes() for p in reports)).hexdigest())
    assert digests[0] == digests[2]
    assert digests[1] == digests[3]


# --- 9 -------------------------------------------------------------------------------

_FRAGMENTS = [
    '{"action": "click", "x": 500, "y": 500}', '{"action":"scroll","direction":"up"}', '{"action": "fly"}',
    '{"action": "type", "text": "hi"}', '{"action": "click", "x": "a"}', '{"action": "click", "x": 1e999, "y": 1}',
    "click(x=10, y=20)", "scroll('down')", "type(text='x')", "click(x=", "open_app(app_name=None)",
    "dance(1)\n", "Action: CLICK [300, 400]", "Action: TYPE \"hey\"", "Action: JUMP", "SCROLL sideways",
    "CLICK [1001, 5]", "Thought: first I look.\n", "```json\n", "```", "{", "}", "(", ")", "[", "]", '"', "'",
    "\\", "\x00", "‮", "😀", "\n", " ", "x=", "y=", "-1", "NaN", "Infinity", "1e309", "PRESS_BACK",
    "press_back()", '{"action": "press_home"}', "WAIT", "COMPLETE", "ENTER", "enter()", "((((((((", "{{{{{{{{",
]


def _fuzz_case(rng: random.Random) -> str | bytes:
    r = rng.random()
    if r < 0.45:
        return "".join(rng.choice(_FRAGMENTS) for _ in range(rng.randint(1, 8)))
    if r < 0.6:
        return "".join(chr(rng.randint(0, 0x2FFF)) for _ in range(rng.randint(0, 40)))
    if r < 0.7:
        return bytes(rng.randint(0, 255) for _ in range(rng.randint(0, 40)))
    if r < 0.8:
        depth = rng.randint(1, 3000)
        return rng.choice(("{", "[", "(", "click(")) * depth + rng.choice(("", "}", ")", "]"))
    base = rng.choice(_FRAGMENTS)
    chars = list(base)
    for _ in range(rng.randint(1, 4)):
        if chars and rng.random() < 0.5:
            del chars[rng.randrange(len(chars))]
        else:
            chars.insert(rng.randint(0, len(chars)), rng.choice(_FRAGMENTS)[:3] or "x")
    return "".join(chars)


def _variants():
    pts = [Point(0, 0), Point(1000, 1000), Point(500, 500), Point(1, 999), Point(123, 877)]
    texts = ["hello", 'say "hi"', "it's", "new\nline", "tab\tand \\ slash", "ünïcødé 😀", "  padded  ",
             "CLICK [1, 2]", "click(x=1, y=2)", '{"action": "wait"}']
    out = [Click(p) for p in pts]
    out += [Scroll(d) for d in ("up", "down", "left", "right")]
    out += [Type(t) for t in texts] + [OpenApp(t) for t in texts]
    out += [PressBack(), PressHome(), Enter(), Complete(), Wait()]
    return out


@pytest.mark.acceptance(9, "parse_action survives a 100,000-case fuzz; round-trip holds for all variants and dialects")
def test_codec_totality():
    rng = random.Random(9)
    dialects = [d.id for d in list_dialects()]
    screen = Screen.filled(1080, 2400, (0, 0, 0))
    for i in range(100_000):
        case = _fuzz_case(rng)
        d = dialects[i % len(dialects)]
        out = parse_action(case, d, screen)
        assert isinstance(out, ParseOutcome)
        assert out.ok or out.failure.reason in ("no_action_found", "unknown_action_kind", "malformed_arguments")

    for d in dialects:
        for action in _variants():
            text = serialize_action(action, d, screen)
            back = parse_action(text, get_dialect(d), screen)
            assert back.action == action, (d, action, text, back)


# --- 10 ------------------------------------------------------------------------------


@pytest.mark.acceptance(10, "ablation matrix: memory equal across conditions, reasoner strictly ordered")
def test_ablation_matrix(tmp_path):
    manifest = run_experiment(_config(tmp_path, _reference_agents()[:2], ABLATIONS, baseline_filter=False))
    assert manifest.ok
    reports = _reports(manifest)
    paths = {e["path"] for e in manifest.reports}
    assert len(paths) == 8
    labels = ["ablate_v1_i1", "ablate_v1_i0", "ablate_v0_i1", "ablate_v0_i0"]
    for agent in ("memory_oracle", "reasoner_oracle"):
        assert {p for a, p in reports if a == agent} == set(labels)
    mem = [reports[("memory_oracle", p)].metrics["sr"] for p in labels]
    rea = [reports[("reasoner_oracle", p)].metrics["sr"] for p in labels]
    assert mem[3] <= mem[0]
    assert len(set(mem)) == 1
    assert rea[0] > rea[1] > rea[2] > rea[3]
