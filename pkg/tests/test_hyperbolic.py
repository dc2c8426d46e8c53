import math
import random
from fractions import Fraction

from hypothesis import given, strategies as st

from foldlab import model
from foldlab.hyperbolic import (
    AffineRep,
    check_hyperbolic,
    box_width,
    distortion,
    distortion_bound,
    extremal_widths,
    identity_rep,
    implicit_from_map,
    invariant_manifold,
    star_product,
    word_rep,
)
from foldlab.symbolic import RIGHT, OneSidedSequence, Word

coeff = st.fractions(min_value=Fraction(-1, 2), max_value=Fraction(1, 2))


@given(coeff, coeff, coeff, coeff, coeff, coeff, coeff, coeff)
def test_affine_compose_exact(a1, c1, d1, e1, a2, c2, d2, e2):
    r1 = AffineRep(a1, c1, d1, e1)
    r2 = AffineRep(a2, c2, d2, e2)
    comp = r1.compose(r2)
    for x1 in (Fraction(-1), Fraction(1, 3)):
        for y0 in (Fraction(0), Fraction(-2, 5)):
            # r1 applied first: x_of composes through r2's x-coordinate
            assert comp.x_of(x1) == r1.x_of(r2.x_of(x1))
            assert comp.y_of(x1, y0) == r2.y_of(x1, r1.y_of(x1, y0))


def test_identity_rep_neutral(float_system):
    r = float_system.generator_rep("a1")
    left = star_product(identity_rep(), r)
    right = star_product(r, identity_rep())
    for x1, y0 in ((-1.0, 0.5), (0.25, -0.75)):
        assert math.isclose(left.x_of(x1, y0), r.x_of(x1, y0), rel_tol=1e-12)
        assert math.isclose(right.y_of(x1, y0), r.y_of(x1, y0), rel_tol=1e-12)


def test_word_rep_analytic_partials(float_params, float_system):
    word = Word(float_system.graph, ("a1", "a2", "a3", "a1", "a2"))
    rep = word_rep(word, float_system)
    slope = float(float_params.slope)
    s = float(float_params.sqrt_delta)
    assert math.isclose(float(rep.dx_dx1()), slope ** 5, rel_tol=1e-12)
    assert math.isclose(float(rep.dy_dy0()), (s * slope) ** 5, rel_tol=1e-12)


def test_fold_order_independence(float_params):
    reps = [implicit_from_map(p, p.box) for p in
            (model.perturbed_generator(j, float_params) for j in (1, 2, 3))]
    a, b, c = reps
    left = star_product(star_product(a, b), c)
    right = star_product(a, star_product(b, c))
    for x1 in (-0.8, 0.0, 0.9):
        for y0 in (-0.9, 0.4):
            assert abs(left.x_of(x1, y0) - right.x_of(x1, y0)) <= 1e-11
            assert abs(left.y_of(x1, y0) - right.y_of(x1, y0)) <= 1e-11


def test_cone_bound_preserved_by_star(float_params):
    reps = [implicit_from_map(p, p.box) for p in
            (model.perturbed_generator(j, float_params) for j in (1, 4))]
    comp = star_product(reps[0], reps[1])
    assert comp.cone_ok(theta=0.5)


def test_residual_on_fresh_grid(float_params, float_system):
    rng = random.Random(11)
    gen = float_system.generators["a3"]
    rep = implicit_from_map(gen.plane_map, gen.box)
    for _ in range(50):
        x1, y0 = rng.uniform(-1, 1), rng.uniform(-1, 1)
        assert rep.residual(x1, y0) <= rep.tol * 10


def test_extremal_widths_model_word(float_params, float_system):
    word = Word(float_system.graph, ("a2",) * 7)
    w = extremal_widths(float_system.word_rep(word))
    expected = 7 * math.log(float(float_params.slope))
    assert math.isclose(w.w_min.log, expected, rel_tol=1e-12)
    assert math.isclose(w.w_max.log, expected, rel_tol=1e-12)


def test_box_width_sandwich(float_params):
    pert = model.perturbed_generator(2, float_params)
    rep = implicit_from_map(pert, pert.box)
    widths = extremal_widths(rep, grid=17, refine=2)
    width = box_width(rep)
    # the cubic shear leaves |dx/dx1| constant, so this sandwich is an
    # equality up to float rounding
    slack = 1e-9
    assert math.log(2) + widths.w_min.log <= width.log + slack
    assert width.log <= math.log(2) + widths.w_max.log + slack


def test_width_vs_derivative_distortion_bound(float_params):
    pert = model.perturbed_generator(3, float_params)
    rep = implicit_from_map(pert, pert.box)
    B = distortion_bound(distortion(rep))
    width = box_width(rep).to_float()
    d = abs(rep.dx_dx1(0.1, -0.2))
    assert width / B <= d <= width * B


def test_distortion_affine_zero(float_system):
    word = Word(float_system.graph, ("a1", "a5"))
    rec = distortion(float_system.word_rep(word))
    assert all(v == 0.0 for v in rec)


def test_invariant_manifolds_fixed_points(float_params, float_system):
    slope = float(float_params.slope)
    s = float(float_params.sqrt_delta)
    c1 = float(float_params.center(1))
    stable = OneSidedSequence(float_system.graph, RIGHT, (), ("a1",))
    curve = invariant_manifold(stable, 25, float_system)
    x_fix = c1 / (1 - slope)
    assert abs(curve(0.3) - x_fix) <= 1e-10
    assert abs(curve(0.3) - curve(-0.4)) <= 2 * curve.error.to_float() + 1e-15
    unstable = OneSidedSequence(float_system.graph, "left", (), ("a1",))
    horiz = invariant_manifold(unstable, 25, float_system)
    y_fix = s * c1 / (1 - s * slope)
    assert abs(horiz(0.2) - y_fix) <= 1e-10


def test_manifold_depth_refinement(float_system):
    seq = OneSidedSequence(float_system.graph, RIGHT, (), ("a2", "a4"))
    shallow = invariant_manifold(seq, 6, float_system)
    deep = invariant_manifold(seq, 11, float_system)
    for y in (-0.9, 0.0, 0.7):
        assert abs(shallow(y) - deep(y)) <= 2 * shallow.error.to_float()


def test_check_hyperbolic_verdicts(float_system):
    gen = float_system.generators["a1"]
    assert check_hyperbolic(gen.plane_map, gen.box)["ok"]
    fold = float_system.folds["f1"]
    report = check_hyperbolic(fold.plane_map, fold.box)
    assert not report["ok"]  # no expansion at the critical line
