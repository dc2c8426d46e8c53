"""Shared fixtures; the deep-scale selection run is built once per session."""

import time

import pytest

from foldlab.model import ModelParams, build_model
from foldlab.numerics import as_fraction
from foldlab.renorm import Chain
from foldlab.selection import ScheduleParams, run_selection


@pytest.fixture(scope="session")
def float_params():
    """Relaxed float-backend model at the thickness-benchmark scale."""
    return ModelParams.create(6, as_fraction("1/100"), strict=False)


@pytest.fixture(scope="session")
def float_system(float_params):
    return build_model(float_params)


@pytest.fixture(scope="session")
def float_run(float_system, float_params):
    """A short float-backend selection run (initialization plus one step)."""
    return run_selection(float_system, float_params.p, max_steps=1)


@pytest.fixture(scope="session")
def deep_run():
    """The deep-scale rational selection run shared by the selection,
    renormalization and cloud acceptance criteria.  Returns (run, seconds);
    the build time is charged to the selection criterion."""
    params = ModelParams.create(6, as_fraction("1/1000000000"),
                                backend="rational")
    system = build_model(params)
    t0 = time.perf_counter()
    run = run_selection(system, params.centered_p(),
                        sched=ScheduleParams(delta0=0.05), max_steps=4)
    return run, time.perf_counter() - t0


@pytest.fixture(scope="session")
def deep_chain(deep_run):
    run, _ = deep_run
    return Chain.from_selection(run)
