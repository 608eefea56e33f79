import numpy as np
import pytest

from entroflow.instances import bandit, fig1_twocycle, garnet


def random_policy(rng, n_states, n_actions, floor=0.0):
    pi = rng.dirichlet(np.ones(n_actions), size=n_states) + floor
    return pi / pi.sum(axis=1, keepdims=True)


def random_tangent(rng, n_states, n_actions):
    w = rng.normal(size=(n_states, n_actions))
    return w - w.mean(axis=1, keepdims=True)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def bandit3():
    return bandit((1.0, 0.5, 0.0))


@pytest.fixture
def twocycle():
    return fig1_twocycle(0.9)


@pytest.fixture
def twocycle_left():
    """The two-state cycle started deterministically in the first state."""
    return fig1_twocycle(0.9, mu=[1.0, 0.0])


@pytest.fixture(params=range(3))
def small_garnet(request):
    return garnet(5, 3, 3, gamma=0.8, seed=request.param)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
