import math
from fractions import Fraction

import pytest

from foldlab.numerics import LogReal
from foldlab.renorm import (
    AnchoredPoint,
    Chain,
    CloudReport,
    RenormError,
    apply_fold,
    apply_word,
    box_fits_fold,
    chart_eval,
    iterate_cloud,
    renormalized_map,
    rescaling_factors,
    verify_chain,
)
from foldlab.symbolic import Word


def test_chain_validation(deep_chain):
    system = deep_chain.system
    with pytest.raises(RenormError):
        Chain([], system)
    with pytest.raises(RenormError):  # branch 6 feeds no fold
        Chain([Word(system.graph, ("a6",))], system)


def test_normal_form_exact_in_rational_backend(deep_chain):
    nf = deep_chain.normal_form(3)
    # the model fold is exactly x^2 + y + p over a horizontal unstable curve
    assert nf.q == 1 and nf.b == 1
    assert nf.r0 == 0.0
    assert all(r <= 1e-40 for r in nf.jet_residuals)
    assert nf.K == 1.0


def test_gamma_identity(deep_chain):
    facs = deep_chain.factors()
    for j in range(1, len(deep_chain)):
        qlog = math.log(abs(float(deep_chain.normal_form(j).q)))
        lhs = 2 * facs[j - 1].gamma_log
        rhs = (facs[j].sigma_log - qlog) + facs[j].gamma_log
        assert abs(lhs - rhs) <= 1e-12


def test_factors_horizon_robust(deep_chain):
    short = rescaling_factors(deep_chain, horizon=40)
    long = rescaling_factors(deep_chain, horizon=120)
    for a, b in zip(short, long):
        assert abs(a.gamma_log - b.gamma_log) <= 1e-9
        assert abs(a.gamma_breve_log - b.gamma_breve_log) <= 1e-9
        assert b.tail_bound <= a.tail_bound


def test_anchored_fold_matches_exact_arithmetic(deep_chain):
    system = deep_chain.system
    x, y = Fraction(1, 100), Fraction(1, 50)
    ex, ey = Fraction(1, 1000), Fraction(-1, 2000)
    pt = apply_fold(system, "f2", AnchoredPoint(
        x, y, LogReal.from_value(ex), LogReal.from_value(ey)))
    exact_moved = system.fold_point("f2", x + ex, y + ey)
    exact_anchor = system.fold_point("f2", x, y)
    assert pt.x == exact_anchor[0] and pt.y == exact_anchor[1]
    assert math.isclose(pt.ex.to_float(),
                        float(exact_moved[0] - exact_anchor[0]), rel_tol=1e-12)
    assert math.isclose(pt.ey.to_float(),
                        float(exact_moved[1] - exact_anchor[1]), rel_tol=1e-12)


def test_anchored_word_matches_exact_arithmetic(deep_chain):
    system = deep_chain.system
    word = Word(system.graph, ("a2", "a5"))
    x, y = Fraction(1, 7), Fraction(-1, 9)
    ex, ey = Fraction(1, 10**6), Fraction(1, 10**7)
    pt = apply_word(system, word, AnchoredPoint(
        x, y, LogReal.from_value(ex), LogReal.from_value(ey)))

    def push(px, py):
        for letter in word.letters:
            rep = system.generator_rep(letter)
            px = (px - rep.cx) / rep.ax
            py = rep.dy * py + rep.ey
        return px, py

    mx, my = push(x + ex, y + ey)
    ax_, ay_ = push(x, y)
    assert (pt.x, pt.y) == (ax_, ay_)
    assert math.isclose(pt.ex.to_float(), float(mx - ax_), rel_tol=1e-12)
    assert math.isclose(pt.ey.to_float(), float(my - ay_), rel_tol=1e-12)


def test_chart_round_trip(deep_chain):
    for j in (4, 7):
        chart = chart_eval(j, deep_chain)
        assert chart.round_trip_error() <= 1e-9
        # the chart scale is far below float resolution at order-one anchors
        assert chart.gamma.log < math.log(1e-20)


def test_renormalized_map_near_limit(deep_chain):
    rm = renormalized_map(5, deep_chain)
    assert rm.limit_distance(grid=5) <= 1e-9
    X, Y = 0.2, -0.1
    lx, ly = rm.limit_model(X, Y)
    assert lx == rm.limit_sign * (X * X + Y / 2.0) and ly == 0.0
    with pytest.raises(RenormError):
        renormalized_map(len(deep_chain), deep_chain)


def test_verify_chain_threshold_replay(deep_chain):
    report = verify_chain(deep_chain)
    assert report.passed
    # measured inclusion margins are ~0.2: demanding 0.5 must flip the
    # verdict, proving the report replays custom thresholds
    strict = verify_chain(deep_chain, thresholds={"inclusion_margin": 0.5})
    assert not strict.passed
    assert "passed" in report.to_json()


def test_box_fits_fold_monotone(deep_chain):
    fits = [box_fits_fold(j, deep_chain) for j in
            range(1, len(deep_chain) + 1)]
    assert True in fits
    first = fits.index(True)
    assert all(fits[first:])  # once small enough, boxes stay inside


def test_iterate_cloud_needs_room(deep_chain):
    with pytest.raises(RenormError):
        iterate_cloud(deep_chain, J=len(deep_chain))


def test_cloud_report_properties():
    report = CloudReport(
        J=1, expected=["f1", "a2", "f2", "a1"], itinerary=["f1", "a2", "f2"],
        steps=[], diam0_log=0.0, shrink_step=1,
        block_end_diams=[-3.0, -7.0])
    assert report.itinerary_matches
    assert report.no_fold_revisit
    assert report.decaying_blocks
    bad = CloudReport(
        J=1, expected=["f1", "a2"], itinerary=["f1", "f2"], steps=[],
        diam0_log=0.0, shrink_step=None, block_end_diams=[-3.0, -2.0])
    assert not bad.itinerary_matches
    assert not bad.no_fold_revisit
    assert not bad.decaying_blocks
