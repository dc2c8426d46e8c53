import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from foldlab import model
from foldlab.model import (
    INTERSECT,
    K1_IN_GAP,
    HenonParams,
    ModelError,
    ModelParams,
    PrecisionError,
    build_model,
    cantor_approx,
    gap_check,
    stable_gap_size,
    stable_thickness_exact,
    thickness_scan,
)
from foldlab.numerics import as_fraction


def brute_thickness(los, his):
    """O(n^2) reference: for each gap and side, the bridge runs from the gap
    edge to the near edge of the closest strictly larger gap (or hull end)."""
    n = len(los)
    gaps = [(his[i], los[i + 1]) for i in range(n - 1)]
    best = float("inf")
    for i, (glo, ghi) in enumerate(gaps):
        size = ghi - glo
        left = los[0]
        for j in range(i - 1, -1, -1):
            if gaps[j][1] - gaps[j][0] > size:
                left = gaps[j][1]
                break
        right = his[-1]
        for j in range(i + 1, n - 1):
            if gaps[j][1] - gaps[j][0] > size:
                right = gaps[j][0]
                break
        best = min(best, min(glo - left, right - ghi) / size)
    return best


@given(st.lists(st.floats(min_value=0.01, max_value=1.0), min_size=4,
                max_size=24))
def test_thickness_matches_brute(lengths):
    # alternate interval, gap, interval, ... from the random lengths
    xs, pos = [], 0.0
    for k, ln in enumerate(lengths):
        xs.append((pos, pos + ln))
        pos += 2 * ln if k % 2 == 0 else ln
    los = np.array([a for a, _ in xs[::1]][: len(xs) // 2 * 2 : 2])
    his = np.array([b for _, b in xs[::1]][: len(xs) // 2 * 2 : 2])
    if len(los) < 2:
        return
    got = thickness_scan(los, his)
    want = brute_thickness(list(los), list(his))
    assert math.isclose(got, want, rel_tol=1e-12)


def test_thickness_hand_example():
    los = np.array([0.0, 2.0, 4.0])
    his = np.array([1.0, 2.1, 5.0])
    assert math.isclose(thickness_scan(los, his), 0.1, rel_tol=1e-12)


def test_middle_thirds_thickness():
    los, his = np.array([0.0]), np.array([1.0])
    for _ in range(5):
        los = np.concatenate([los / 3, los / 3 + 2 / 3])
        his = np.concatenate([his / 3, his / 3 + 2 / 3])
    order = np.argsort(los)
    assert math.isclose(thickness_scan(los[order], his[order]), 1.0,
                        rel_tol=1e-12)


def test_params_strict_threshold():
    with pytest.raises(ModelError):
        ModelParams.create(6, as_fraction("1/100"))  # needs delta < 1/(8N^3)
    params = ModelParams.create(6, as_fraction("1/100"), strict=False)
    assert params.N == 6
    tiny = ModelParams.create(6, as_fraction("1/10000"))
    assert float(tiny.slope) < 1 / 6


def test_params_p_validation():
    params = ModelParams.create(6, as_fraction("1/10000"))
    big = tuple(1.0 for _ in range(5))
    with pytest.raises(ModelError):
        params.with_p(big)
    with pytest.raises(ModelError):
        params.with_p((0.0,) * 4)  # wrong arity


def test_cantor_closed_forms(float_params):
    approx = cantor_approx("stable", 4, float_params)
    rel = abs(approx.thickness - approx.closed_form) / approx.closed_form
    assert rel <= 0.01
    gaps = approx.los[1:] - approx.his[:-1]
    assert abs(gaps.max() - stable_gap_size(float_params)) <= \
        0.001 * stable_gap_size(float_params)
    assert stable_thickness_exact(float_params) == approx.closed_form


def test_cantor_precision_guard():
    deep = ModelParams.create(6, as_fraction("1/1000000000"), backend="rational")
    with pytest.raises(PrecisionError):
        cantor_approx("stable", 3, deep)


def test_gap_check_verdicts(float_params):
    ks = cantor_approx("stable", 3, float_params)
    # a copy of the set always intersects itself
    assert gap_check(ks, ks) == INTERSECT
    # a tiny set parked inside the central gap is reported as such
    gaps = ks.los[1:] - ks.his[:-1]
    g = int(np.argmax(gaps))
    mid = 0.5 * (ks.his[g] + ks.los[g + 1])
    eps = 0.01 * float(gaps[g])
    k_small = model.CantorApprox(
        "stable", 1, np.array([mid - eps]), np.array([mid + eps]),
        0.0, 0.0, float_params)
    assert gap_check(k_small, ks) == K1_IN_GAP


def test_model_generators_are_hyperbolic(float_system):
    gen = float_system.generators["a2"]
    assert gen.plane_map.check_derivative()
    x1, y0 = 0.3, -0.4
    rep = gen.rep
    # defining relation of the affine branch
    fx, fy = gen.plane_map.f(float(rep.x_of(x1)), y0)
    assert math.isclose(fx, x1, abs_tol=1e-12)
    assert math.isclose(fy, float(rep.y_of(x1, y0)), abs_tol=1e-12)


def test_fold_image_point_exact():
    params = ModelParams.create(6, as_fraction("1/10000"), backend="rational")
    system = build_model(params)
    x = Fraction(1, 100)
    y = Fraction(1, 50)
    fx, fy = model.fold_image_point(system, "f2", x, y)
    assert fx == x * x + y + params.p[1]
    assert fy == -params.sqrt_delta * x


def test_dissipation_margin(float_params):
    assert model.dissipation_margin(float_params) > 0


def test_word_rep_prefix_cache(float_system):
    from foldlab.symbolic import Word
    w = Word(float_system.graph, ("a1", "a2", "a3"))
    r1 = float_system.word_rep(w)
    r2 = float_system.word_rep(w)
    assert r1 is r2  # cached


def test_henon_fixed_point_and_critical_values():
    f = model.henon_map(HenonParams(b=0.0))
    assert f(1.0, 0.0) == (1.0, 0.0)
    assert model.degree6_critical_values_exact() == [-1, 1, -1, 1, -1]
    for x in model.degree6_critical_points():
        assert abs(model.degree6_poly(x)) <= 1 + 1e-9


def test_henon_iterate_escape():
    rec = model.henon_iterate(HenonParams(b=0.0), (2.0, 0.0), 50)
    assert rec.escaped and rec.escape_time is not None
    rec2 = model.henon_iterate(HenonParams(b=0.0), (1.0, 0.0), 50)
    assert not rec2.escaped


def test_henon_scan_bounded_region():
    scan = model.henon_scan(HenonParams(b=0.03), grid=21, steps=200)
    assert scan.shape == (21, 21)
    assert int((scan < 0).sum()) > 0


def test_perturbed_generator_consistency(float_params):
    pert = model.perturbed_generator(2, float_params)
    assert pert.check_derivative()
    # the curved box sides are exact preimages of x1 = +-1
    for y in (-1.0, 0.0, 0.8):
        assert math.isclose(pert.f(pert.box.phi_minus(y), y)[0], -1.0,
                            abs_tol=1e-12)
        assert math.isclose(pert.f(pert.box.phi_plus(y), y)[0], 1.0,
                            abs_tol=1e-12)
