import math

import pytest
from hypothesis import given, strategies as st

from foldlab.selection import (
    PreconditionError,
    ScheduleParams,
    SelectionError,
    calibrate_schedule,
    choose_word,
    delta_schedule,
    historic_extension,
    m_beta_constant,
    run_selection,
    stable_witness,
    width_bounds,
    witness_depth,
)
from foldlab.symbolic import LEFT, RIGHT, OneSidedSequence, Word


def test_schedule_validation():
    with pytest.raises(SelectionError):
        ScheduleParams(beta=2.5)
    with pytest.raises(SelectionError):
        ScheduleParams(delta0=1.5)
    with pytest.raises(SelectionError):
        delta_schedule(-1, ScheduleParams())


@given(st.integers(min_value=0, max_value=12),
       st.floats(min_value=1.05, max_value=1.9),
       st.floats(min_value=0.01, max_value=0.5))
def test_delta_schedule_log_exact(j, beta, delta0):
    d = delta_schedule(j, ScheduleParams(beta=beta, delta0=delta0))
    assert math.isclose(d.log, beta**j * math.log(delta0), rel_tol=1e-12)


def test_schedule_condition():
    assert ScheduleParams(beta=1.5, eps=0.1).schedule_ok()
    assert not ScheduleParams(beta=1.05, eps=0.3).schedule_ok()


def test_m_beta_constant_dominates_samples():
    m = m_beta_constant(1.5)
    for delta in (0.5, 0.1, 0.01):
        total = sum(delta ** (1.5**j - 1.0) for j in range(1, 60))
        assert m >= total - 1e-9
    assert m > 0


def test_calibration(float_system):
    sched = calibrate_schedule(ScheduleParams(), float_system, 8)
    assert sched.C1 > 0 and sched.m_beta > 0
    assert sched.schedule_ok()
    assert "calibrated" in sched.eps_provenance


def test_choose_word_width_sandwich(float_system):
    sched = calibrate_schedule(ScheduleParams(), float_system, 8)
    s = OneSidedSequence(float_system.graph, RIGHT, (), ("a1",))
    u = OneSidedSequence(float_system.graph, LEFT, ("a2",), ("a1",))
    delta = delta_schedule(3, sched)
    word = choose_word(s, u, delta, float_system, sched)
    w_min, w_max = width_bounds(word, float_system)
    assert sched.eps_exponent * delta.log <= w_min.log
    assert w_max.log <= delta.log
    assert word.letters[-2:] == ("a2", "a1")[::-1]  # unstable suffix on top


def test_choose_word_rejects_large_scale(float_system):
    sched = calibrate_schedule(ScheduleParams(), float_system, 8)
    s = OneSidedSequence(float_system.graph, RIGHT, (), ("a1",))
    u = OneSidedSequence(float_system.graph, LEFT, ("a2",), ("a1",))
    from foldlab.numerics import LogReal
    with pytest.raises(PreconditionError):
        choose_word(s, u, LogReal.from_value(0.9), float_system, sched)
    with pytest.raises(SelectionError):
        choose_word(u, s, delta_schedule(3, sched), float_system, sched)


def test_stable_witness_tracks_target(float_system):
    target = 0.123456
    seq = stable_witness(float_system, target, 12)
    cell = float_system.word_rep(seq.truncate(12))
    lo, hi = sorted((float(cell.x_of(-1)), float(cell.x_of(1))))
    # greedy descent: the deep cell sits within a gap's reach of the target
    assert abs(0.5 * (lo + hi) - target) <= 10 * (hi - lo)


def test_witness_depth_scales_with_delta(float_system):
    d_small = delta_schedule(5, ScheduleParams())
    d_large = delta_schedule(2, ScheduleParams())
    assert witness_depth(d_small, float_system) > \
        witness_depth(d_large, float_system)


def test_float_run_certificates(float_run):
    state = float_run.state
    assert state.step == 2
    assert all(c.passed for c in state.certificates if c.name in ("C1", "C2"))
    assert all(n == 1 for n in state.newton_steps)
    assert float_run.total_displacement <= float_run.displacement_bound
    # every certificate stores both sides of its inequality
    for c in state.certificates:
        assert c.measured_log <= c.bound_log or not c.passed


def test_run_selection_rejects_negative_steps(float_system, float_params):
    with pytest.raises(SelectionError):
        run_selection(float_system, float_params.p, max_steps=-1)


def test_historic_extension_budget(float_system):
    graph = float_system.graph
    prefix = Word(graph, ("a1", "a2"))
    word, score, exhaustive = historic_extension(prefix, nu=0.4, graph=graph)
    assert word.is_empty() and score == 0.0 and exhaustive  # budget < 1 letter


def test_historic_extension_picks_far_measure(float_system):
    graph = float_system.graph
    prefix = Word(graph, ("a1",) * 4)
    word, score, exhaustive = historic_extension(prefix, nu=0.5, graph=graph,
                                                 horizon=4)
    assert exhaustive
    assert 1 <= len(word) <= 2
    assert score > 0
    assert word.letters[0] != "a1"  # repeating a1 would not move the measure
