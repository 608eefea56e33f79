import numpy as np
import pytest

from entroflow.instances import bandit, chain, fig1_twocycle, garnet, generate_instance
from entroflow.mdp import InvalidMdpError, validate_mdp


def test_twocycle_graph():
    mdp = fig1_twocycle(0.9, reward=1.0)
    # first action leads to the first state and the second action to the second, from anywhere
    for s in range(2):
        np.testing.assert_array_equal(mdp.transition[s, 0], [1.0, 0.0])
        np.testing.assert_array_equal(mdp.transition[s, 1], [0.0, 1.0])
    np.testing.assert_array_equal(mdp.reward, [[1.0, 0.0], [0.0, 0.0]])
    assert mdp.gamma == 0.9
    assert fig1_twocycle(reward=2.5).reward[0, 0] == 2.5


def test_bandit3():
    mdp = bandit((1.0, 0.5, 0.0))
    assert (mdp.n_states, mdp.n_actions, mdp.gamma) == (1, 3, 0.0)


def test_garnet_is_deterministic_and_sparse():
    a, b = garnet(8, 4, 3, seed=42), garnet(8, 4, 3, seed=42)
    assert a.transition.tobytes() == b.transition.tobytes()
    assert a.reward.tobytes() == b.reward.tobytes()
    assert np.all((a.transition > 0).sum(axis=2) == 3)
    assert garnet(8, 4, 3, seed=43).reward.tobytes() != a.reward.tobytes()
    validate_mdp(a)


def test_garnet_rejects_bad_branching():
    with pytest.raises(InvalidMdpError):
        garnet(3, 2, 4, seed=0)


def test_generate_instance_dispatch():
    assert generate_instance("bandit", {"rewards": [0.0, 1.0]}).n_actions == 2
    with pytest.raises(InvalidMdpError, match="seed"):
        generate_instance("garnet", {"n_states": 3, "n_actions": 2, "branching": 2})
    with pytest.raises(InvalidMdpError, match="unknown"):
        generate_instance("maze", {})
    with pytest.raises(InvalidMdpError, match="bad parameters"):
        generate_instance("chain", {"length": 3})


def test_chain_valid():
    mdp = chain(6, slip=0.2)
    validate_mdp(mdp)
    assert mdp.reward[-1, 1] == 1.0
