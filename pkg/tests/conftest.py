import pytest
from hypothesis import HealthCheck, settings

from relaxsched.program import load_benchmark, run_schedule
from relaxsched.trace import build_trace_graph

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow], max_examples=60
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def fig1():
    return load_benchmark("fig1_example")


@pytest.fixture(scope="session")
def aliased(fig1):
    return fig1.input_named("x=m0,y=m0")


@pytest.fixture(scope="session")
def distinct(fig1):
    return fig1.input_named("x=m0,y=m1")


@pytest.fixture(scope="session")
def fig2(fig1, aliased):
    """Graph of the run where the first thread goes entirely first."""
    return build_trace_graph(run_schedule(fig1, aliased, [0, 0, 0, 1, 1]), fig1)


@pytest.fixture(scope="session")
def indexer15():
    return load_benchmark("indexer", N=15)
