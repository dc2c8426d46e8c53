"""Acceptance gate: nine timed end-to-end criteria.

Each test prints one [PASS]/[FAIL] line (straight to the terminal, bypassing
capture) and then asserts, so the gate is readable in any pytest run.
"""

import math
import random
import sys
import time

import pytest

from foldlab import model, renorm, selection, stats
from foldlab.hyperbolic import implicit_from_map, star_product
from foldlab.model import ModelParams, build_model
from foldlab.numerics import as_fraction
from foldlab.symbolic import Word


@pytest.fixture
def report(capfd):
    """One [PASS]/[FAIL] line per criterion, written to the real terminal
    (pytest captures at the fd level, so plain prints would be swallowed)."""
    def _line(num, name, ok, elapsed, budget):
        verdict = "PASS" if ok else "FAIL"
        with capfd.disabled():
            print(f"[{verdict}] criterion {num}: {name} "
                  f"({elapsed:.2f}s / budget {budget:.0f}s)",
                  file=sys.__stdout__, flush=True)
    return _line


def test_criterion_1_thickness(float_params, report):
    t0 = time.perf_counter()
    approx = model.cantor_approx("stable", 4, float_params)
    t_err = abs(approx.thickness - approx.closed_form) / approx.closed_form
    gaps = approx.los[1:] - approx.his[:-1]
    g_closed = model.stable_gap_size(float_params)
    g_err = abs(float(gaps.max()) - g_closed) / g_closed
    elapsed = time.perf_counter() - t0
    ok = t_err <= 0.01 and g_err <= 0.001 and elapsed < 1.0
    report(1, "thickness and gap closed forms", ok, elapsed, 1)
    assert t_err <= 0.01, f"thickness rel error {t_err:.3e}"
    assert g_err <= 0.001, f"gap rel error {g_err:.3e}"
    assert elapsed < 1.0


def test_criterion_2_gap_lemma(report):
    t0 = time.perf_counter()
    params = ModelParams.create(6, as_fraction("1/10000"), strict=False)
    ks = model.cantor_approx("stable", 6, params)
    ku = model.cantor_approx("unstable", 6, params)
    rng = random.Random(20260823)
    failures = 0
    for _ in range(100):
        p = params.random_p(rng)
        for pj in p:
            if model.gap_check(ku.translate(float(pj)), ks) != model.INTERSECT:
                failures += 1
    elapsed = time.perf_counter() - t0
    ok = failures == 0 and elapsed < 5.0
    report(2, "robust Cantor intersection, 100 random offsets", ok, elapsed, 5)
    assert failures == 0
    assert elapsed < 5.0


def test_criterion_3_implicit_reps(float_params, float_system, report):
    t0 = time.perf_counter()
    params, system = float_params, float_system
    grid = [-1.0 + 2.0 * k / 16 for k in range(17)]
    reps = []
    for j in range(1, params.N + 1):
        gen = system.generators[model.generator_label(j)]
        reps.append(implicit_from_map(gen.plane_map, gen.box))
        pert = model.perturbed_generator(j, params)
        reps.append(implicit_from_map(pert, pert.box))
    worst_res, worst_jac = 0.0, 0.0
    for rep in reps:
        for x1 in grid:
            for y0 in grid:
                worst_res = max(worst_res, rep.residual(x1, y0))
                x0 = rep.x_of(x1, y0)
                det = rep.F.det(x0, y0)
                lhs = det * rep.dx_dx1(x1, y0)
                rhs = rep.dy_dy0(x1, y0)
                worst_jac = max(worst_jac,
                                abs(lhs - rhs) / max(abs(rhs), 1e-30))
    # composition sandwich on 50 random perturbed composites
    theta2 = 0.25
    rng = random.Random(3)
    perturbed = [implicit_from_map(p, p.box) for p in
                 (model.perturbed_generator(j, params)
                  for j in range(1, params.N + 1))]
    sandwich_ok = True
    for _ in range(50):
        r1, r2 = rng.choice(perturbed), rng.choice(perturbed)
        comp = star_product(r1, r2)
        x2, y0 = rng.uniform(-0.9, 0.9), rng.uniform(-0.9, 0.9)
        x1, w1 = comp.solve_inner(x2, y0)
        ratio = abs(comp.dx_dx1(x2, y0)) / (
            abs(r1.dx_dx1(x1, y0)) * abs(r2.dx_dx1(x2, w1)))
        if not (1.0 / (1.0 + theta2) <= ratio <= 1.0 / (1.0 - theta2)):
            sandwich_ok = False
    elapsed = time.perf_counter() - t0
    ok = worst_res <= 1e-10 and worst_jac <= 1e-8 and sandwich_ok and elapsed < 10
    report(3, "implicit reps: residual, Jacobian identity, sandwich",
            ok, elapsed, 10)
    assert worst_res <= 1e-10, f"defining-relation residual {worst_res:.3e}"
    assert worst_jac <= 1e-8, f"Jacobian identity error {worst_jac:.3e}"
    assert sandwich_ok
    assert elapsed < 10


def test_criterion_4_width_oracle(float_params, float_system, report):
    t0 = time.perf_counter()
    params, system = float_params, float_system
    slope_log = math.log(float(params.slope))
    rng = random.Random(4)
    labels = [model.generator_label(j) for j in range(1, params.N + 1)]
    worst = 0.0
    for _ in range(200):
        n = rng.randint(1, 30)
        word = Word(system.graph, tuple(rng.choice(labels) for _ in range(n)))
        rep = system.word_rep(word)
        width_log = math.log(abs(float(rep.ax)))
        expected = n * slope_log
        worst = max(worst, abs(width_log - expected) / abs(expected))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and elapsed < 10
    report(4, "word widths match the analytic product", ok, elapsed, 10)
    assert worst <= 1e-10, f"log-relative width error {worst:.3e}"
    assert elapsed < 10


def test_criterion_5_selection(deep_run, report):
    run, elapsed = deep_run
    state = run.state
    c2 = [c for c in state.certificates if c.name == "C2"]
    c2_ok = all(c.passed and math.exp(c.measured_log) <= 1e-10 for c in c2)
    checks = {
        "steps": state.step >= 4,
        "c1": all(c.passed for c in state.certificates if c.name == "C1"),
        "c2_residuals": bool(c2) and c2_ok,
        "c3": all(c.passed for c in state.certificates if c.name == "C3"),
        "newton_one_step": all(n == 1 for n in state.newton_steps),
        "total_displacement": run.total_displacement <= run.displacement_bound,
    }
    ok = all(checks.values()) and elapsed < 60
    report(5, "tangency selection with certificates", ok, elapsed, 60)
    assert all(checks.values()), {k: v for k, v in checks.items() if not v}
    assert elapsed < 60


def test_criterion_6_renormalization(deep_chain, report):
    t0 = time.perf_counter()
    chain_report = renorm.verify_chain(deep_chain)
    conds = all(r.cond_i and r.cond_ii is not False and r.cond_iii
                for r in chain_report.records)
    identity = all(r.identity_error <= 1e-12 for r in chain_report.records
                   if r.identity_error is not None)
    sandwiches = all(r.breve_sandwich and r.bk_sandwich for r in chain_report.records)
    inclusions = [r for r in chain_report.records if r.inclusion_checked]
    incl_ok = bool(inclusions) and all(
        r.inclusion_passed and r.inclusion_margin >= 0.05 for r in inclusions)
    # negative control: the coarse-scale chain must fail at hypothesis (iii)
    nc_params = ModelParams.create(6, as_fraction("1/100"),
                                   backend="rational", strict=False)
    nc_run = selection.run_selection(
        build_model(nc_params), nc_params.centered_p(),
        sched=selection.ScheduleParams(delta0=0.05), max_steps=0)
    nc_report = renorm.verify_chain(renorm.Chain.from_selection(nc_run))
    nc_ok = (not nc_report.passed) and nc_report.blocking == "iii"
    elapsed = time.perf_counter() - t0
    ok = (chain_report.passed and conds and identity and sandwiches and incl_ok
          and nc_ok and elapsed < 120)
    report(6, "renormalization hypotheses, inclusions, negative control",
            ok, elapsed, 120)
    assert chain_report.passed and conds
    assert identity, "rescaling-factor identity exceeded 1e-12"
    assert sandwiches
    assert incl_ok, "441-point inclusion failed or margin < 0.05"
    assert nc_ok, f"negative control blocking={nc_report.blocking!r}"
    assert elapsed < 120


def test_criterion_7_wandering_cloud(deep_chain, report):
    t0 = time.perf_counter()
    cloud = renorm.iterate_cloud(deep_chain, blocks=3)
    first_block = next(k for k, lbl in enumerate(cloud.expected)
                       if k > 0 and lbl.startswith("f"))
    elapsed = time.perf_counter() - t0
    checks = {
        "shrinks_within_block": (cloud.shrink_step is not None
                                 and cloud.shrink_step <= first_block),
        "itinerary": cloud.itinerary_matches
                     and len(cloud.itinerary) == len(cloud.expected),
        "no_fold_revisit": cloud.no_fold_revisit,
        "decaying_blocks": cloud.decaying_blocks,
    }
    ok = all(checks.values())
    report(7, "cloud shrinks and follows the prescribed itinerary",
            ok, elapsed, 120)
    assert all(checks.values()), {k: v for k, v in checks.items() if not v}


def test_criterion_8_emergence(report):
    t0 = time.perf_counter()
    rng = random.Random(8)

    def random_euclidean():
        pts = [(rng.uniform(-1, 1), rng.uniform(-1, 1))
               for _ in range(rng.randint(1, 6))]
        return stats.EmpiricalMeasure.create(pts, None, stats.EUCLIDEAN)

    metric_ok = dual_ok = True
    for _ in range(1000):
        a, b, c = random_euclidean(), random_euclidean(), random_euclidean()
        res = stats.wasserstein1_flow(a, b)
        dab, dba = res.value, stats.wasserstein1_flow(b, a).value
        dac = stats.wasserstein1_flow(a, c).value
        dcb = stats.wasserstein1_flow(c, b).value
        if (abs(dab - dba) > 1e-9 or dab > dac + dcb + 1e-9
                or stats.wasserstein1_flow(a, a).value > 1e-9):
            metric_ok = False
        if (abs(res.dual_value - res.value) > 1e-9
                or res.dual_violation > 1e-9 or res.slack_violation > 1e-9):
            dual_ok = False
    greedy_ok = True
    for _ in range(20):
        ms = [random_euclidean() for _ in range(rng.randint(2, 12))]
        eps = rng.uniform(0.1, 1.0)
        greedy, _ = stats.covering_number(ms, eps)
        brute = stats.brute_covering_number(ms, eps)
        if greedy > 2 * brute:
            greedy_ok = False
    family = stats.periodic_shift_measures((0, 1), 12, 24)
    grid = [2.0 ** -k for k in range(3, 9)]
    emergence = stats.emergence_order(family, grid)
    slope_ok = 0.5 <= emergence.slope <= 1.5
    elapsed = time.perf_counter() - t0
    ok = metric_ok and dual_ok and greedy_ok and slope_ok and elapsed < 60
    report(8, "exact OT suites, covering bounds, emergence slope",
            ok, elapsed, 60)
    assert metric_ok, "metric axioms violated beyond 1e-9"
    assert dual_ok, "dual certificate violated beyond 1e-9"
    assert greedy_ok, "greedy covering exceeded 2x the optimum"
    assert slope_ok, f"emergence slope {emergence.slope:.3f} outside [0.5, 1.5]"
    assert elapsed < 60


def test_criterion_9_henon_sanity(report):
    t0 = time.perf_counter()
    f = model.henon_map(model.HenonParams(b=0.0))
    fixed_ok = f(1.0, 0.0) == (1.0, 0.0)
    crit_ok = model.degree6_critical_values_exact() == [-1, 1, -1, 1, -1]
    bounded_ok = True
    for b in (-0.05, 0.05):
        scan = model.henon_scan(model.HenonParams(b=b), grid=41, steps=400)
        if int((scan < 0).sum()) == 0:
            bounded_ok = False
    elapsed = time.perf_counter() - t0
    ok = fixed_ok and crit_ok and bounded_ok and elapsed < 30
    report(9, "degenerate-map fixed point, critical values, bounded region",
            ok, elapsed, 30)
    assert fixed_ok and crit_ok and bounded_ok
    assert elapsed < 30
