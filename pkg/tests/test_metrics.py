from __future__ import annotations

import math
from decimal import Decimal

import pytest
from hypothesis import given
from hypothesis import strategies as st

from guiprobe.codec import ParseFailure, ParseOutcome
from guiprobe.core import Click, Complete, OpenApp, Point, PressBack, Screen, Scroll, Type, Wait
from guiprobe.metrics import (
    MetricError,
    StepOutcome,
    aggregate,
    aggregate_tsr,
    delta_p,
    match_action,
    match_click,
    pct1,
    reflection_score,
    vmc,
    vmc_breakdown,
)
from oracles import pct1_dec, vmc_oracle

SQ = Screen.filled(1000, 1000, (0, 0, 0))
PHONE = Screen.filled(1080, 2400, (0, 0, 0))


def _ok(action):
    return ParseOutcome(action=action)


def _o(sid, t, s, g=None):
    return StepOutcome(sid, t, s, g)


# --- click rule ---------------------------------------------------------------------


def test_click_radius_boundary():
    assert match_click(Point(640, 500), Point(500, 500))
    assert not match_click(Point(641, 500), Point(500, 500))
    # 84^2 + 112^2 = 140^2 exactly
    assert match_click(Point(584, 612), Point(500, 500))
    assert not match_click(Point(585, 612), Point(500, 500))


@given(st.integers(0, 1000), st.integers(0, 1000), st.integers(0, 1000), st.integers(0, 1000))
def test_click_rule_is_symmetric_and_matches_decimal_distance(ax, ay, bx, by):
    a, b = Point(ax, ay), Point(bx, by)
    d = (Decimal(ax - bx) ** 2 + Decimal(ay - by) ** 2).sqrt()
    assert match_click(a, b) == match_click(b, a) == (d <= 140)


def test_match_action_normalizes_pixel_gt():
    out = match_action(_ok(Click(Point(500, 500))), Click(Point(540, 1200)), PHONE)
    assert (out.type_ok, out.sr_ok, out.grounding_ok) == (True, True, True)
    far = match_action(_ok(Click(Point(900, 900))), Click(Point(540, 1200)), PHONE)
    assert (far.type_ok, far.sr_ok, far.grounding_ok) == (True, False, False)


@pytest.mark.parametrize("pred, gt, type_ok, sr_ok", [
    (Scroll("up"), Scroll("up"), True, True),
    (Scroll("up"), Scroll("down"), True, False),
    (Type(" hello "), Type("hello"), True, True),
    (Type("hello"), Type("help"), True, False),
    (OpenApp("Maps"), OpenApp("Maps "), True, True),
    (Wait(), Complete(), False, False),
    (PressBack(), PressBack(), True, True),
    (Wait(), Click(Point(5, 5)), False, False),
])
def test_match_action_kinds(pred, gt, type_ok, sr_ok):
    out = match_action(_ok(pred), gt, SQ)
    assert (out.type_ok, out.sr_ok) == (type_ok, sr_ok)


def test_non_click_prediction_on_click_step_has_no_grounding():
    assert match_action(_ok(Wait()), Click(Point(5, 5)), SQ).grounding_ok is None


def test_failed_parse_and_unanswered():
    failed = match_action(ParseOutcome(failure=ParseFailure("no_action_found", "")), Wait(), SQ)
    assert (failed.type_ok, failed.sr_ok, failed.answered) == (False, False, True)
    none = match_action(None, Wait(), SQ)
    assert (none.type_ok, none.sr_ok, none.answered) == (False, False, False)


def test_gt_click_without_point_is_an_error():
    with pytest.raises(MetricError):
        match_action(_ok(Click(Point(1, 1))), Click(None), SQ)


def test_sr_implies_type():
    with pytest.raises(ValueError):
        StepOutcome("s", False, True)


# --- aggregation ---------------------------------------------------------------------


def test_pct1_examples():
    assert pct1(44.85) == 44.9
    assert pct1(200 / 3) == 66.7
    assert pct1(0) == 0.0 and pct1(100) == 100.0


@given(st.integers(0, 5000), st.integers(1, 5000))
def test_pct1_matches_decimal_oracle(h, n):
    from fractions import Fraction

    h = min(h, n)
    assert pct1(Fraction(100 * h, n)) == pct1_dec(h, n)


def test_aggregate_counts():
    rec = aggregate([_o("a", True, True, True), _o("b", True, False, False), _o("c", False, False)])
    assert (rec.n, rec.type_hits, rec.sr_hits, rec.grounding_hits, rec.grounding_n) == (3, 2, 1, 1, 2)
    assert rec.rounded() == {"type_acc": 66.7, "grounding_acc": 50.0, "sr": 33.3}
    with pytest.raises(MetricError):
        aggregate([])


@given(st.lists(st.tuples(st.booleans(), st.booleans()), min_size=1, max_size=30),
       st.lists(st.tuples(st.booleans(), st.booleans()), min_size=1, max_size=30))
def test_aggregate_concatenation_is_count_weighted(a, b):
    def outs(flags, prefix):
        return [_o(f"{prefix}{i}", t or s, s) for i, (t, s) in enumerate(flags)]

    ra, rb = aggregate(outs(a, "a")), aggregate(outs(a, "a") + outs(b, "b"))
    rb_only = aggregate(outs(b, "b"))
    assert rb.n == ra.n + rb_only.n
    assert math.isclose(rb.sr, (ra.sr * ra.n + rb_only.sr * rb_only.n) / rb.n)
    assert 0 <= rb.sr <= rb.type_acc <= 100


def test_task_success_rate():
    outs = [_o("e1_0", True, True), _o("e1_1", True, True), _o("e2_0", True, False), _o("e3_0", True, True)]
    eps = {"e1": ["e1_0", "e1_1"], "e2": ["e2_0"], "e3": ["e3_0"]}
    assert aggregate_tsr(outs, eps) == 66.7
    with pytest.raises(MetricError):
        aggregate_tsr(outs, {"e4": ["zz"]})
    with pytest.raises(MetricError):
        aggregate_tsr(outs, {})


def test_delta_p():
    base = aggregate([_o("a", True, True), _o("b", True, True)])
    pert = aggregate([_o("a", True, False), _o("b", False, False)])
    d = delta_p(base, pert)
    assert (d.delta_p_type, d.delta_p_sr) == (50.0, 100.0)
    # a perturbation that helps gives a negative drop
    assert delta_p(pert, base).delta_p_sr == -100.0


def test_delta_p_requires_same_samples():
    with pytest.raises(MetricError):
        delta_p(aggregate([_o("a", True, True)]), aggregate([_o("b", True, True)]))


# --- VMC and RS -----------------------------------------------------------------------


def test_vmc_examples():
    assert vmc([((0, 0), (30, 40))]) == 100.0  # distance exactly 50
    assert vmc([((0, 0), (30, 41))]) == 0.0
    assert vmc([]) is None


def test_vmc_breakdown_bookkeeping():
    b = vmc_breakdown([((0, 0), (0, 0)), ((0, 0), None), (None, (1, 1)), ((0, 0), (100, 0))])
    assert (b.within, b.moved, b.excluded, b.total) == (1, 1, 2, 4)
    assert b.vmc == 50.0
    assert vmc_breakdown([(None, None)]).vmc is None


_pt = st.tuples(st.integers(-3000, 3000), st.integers(-3000, 3000))


@given(st.lists(st.tuples(_pt, _pt), max_size=40))
def test_vmc_matches_oracle(pairs):
    assert vmc(pairs) == vmc_oracle(pairs)


@given(st.lists(st.tuples(_pt, _pt), min_size=1, max_size=20), _pt)
def test_vmc_translation_invariant_and_symmetric(pairs, shift):
    sx, sy = shift
    moved = [((a[0] + sx, a[1] + sy), (b[0] + sx, b[1] + sy)) for a, b in pairs]
    swapped = [(b, a) for a, b in pairs]
    assert vmc(pairs) == vmc(moved) == vmc(swapped)


def test_reflection_score():
    assert reflection_score(["press_back", "wait", "click", None]) == 50.0
    assert reflection_score(["complete", "press_home"]) == 100.0
    with pytest.raises(MetricError):
        reflection_score([])
