"""Instance generators: the two-state cycle, bandits, Garnet and chain MDPs."""

from __future__ import annotations

import numpy as np

from .mdp import InvalidMdpError, MdpInstance, make_mdp


def fig1_twocycle(gamma: float = 0.9, reward: float = 1.0, mu=None) -> MdpInstance:
    """Two states, two actions, deterministic.

    Action 0 moves to state 0, action 1 moves to state 1, from either state.
    Only (state 0, action 0) is rewarded. ``mu`` defaults to uniform so that
    both states carry weight in the reward.
    """
    P = np.zeros((2, 2, 2))
    P[:, 0, 0] = 1.0
    P[:, 1, 1] = 1.0
    r = np.zeros((2, 2))
    r[0, 0] = reward
    return make_mdp(P, r, gamma, mu)


def bandit(rewards=(1.0, 0.5, 0.0), gamma: float = 0.0) -> MdpInstance:
    rewards = np.asarray(rewards, dtype=float)
    n = rewards.size
    return make_mdp(np.ones((1, n, 1)), rewards[None, :], gamma, [1.0])


def garnet(
    n_states: int,
    n_actions: int,
    branching: int,
    gamma: float = 0.8,
    seed: int = 0,
) -> MdpInstance:
    """Random sparse MDP: each (s, a) reaches ``branching`` distinct states.

    Rewards are uniform on [0, 1] and mu is uniform. The same seed always
    yields the same arrays.
    """
    if not 1 <= branching <= n_states:
        raise InvalidMdpError(f"branching factor must be in [1, {n_states}], got {branching}")
    if n_states < 1 or n_actions < 1:
        raise InvalidMdpError("need at least one state and one action")
    rng = np.random.default_rng(seed)
    P = np.zeros((n_states, n_actions, n_states))
    for s in range(n_states):
        for a in range(n_actions):
            targets = rng.choice(n_states, size=branching, replace=False)
            weights = rng.random(branching) + 1e-3
            P[s, a, targets] = weights / weights.sum()
    P /= P.sum(axis=2, keepdims=True)
    r = rng.random((n_states, n_actions))
    return make_mdp(P, r, gamma)


def chain(n_states: int = 5, gamma: float = 0.9, slip: float = 0.1, reward_end: float = 1.0) -> MdpInstance:
    """Chain walk with actions (left, right); only the right end pays off."""
    if n_states < 2 or not 0.0 <= slip < 1.0:
        raise InvalidMdpError("chain needs >= 2 states and slip in [0, 1)")
    P = np.zeros((n_states, 2, n_states))
    for s in range(n_states):
        left, right = max(s - 1, 0), min(s + 1, n_states - 1)
        P[s, 0, left] += 1.0 - slip
        P[s, 0, right] += slip
        P[s, 1, right] += 1.0 - slip
        P[s, 1, left] += slip
    r = np.zeros((n_states, 2))
    r[-1, 1] = reward_end
    return make_mdp(P, r, gamma)


GENERATORS = {
    "fig1-twocycle": fig1_twocycle,
    "bandit": bandit,
    "garnet": garnet,
    "chain": chain,
}


def generate_instance(kind: str, params: dict | None = None, seed: int | None = None) -> MdpInstance:
    params = dict(params or {})
    if kind not in GENERATORS:
        raise InvalidMdpError(f"unknown instance kind {kind!r}; choose from {sorted(GENERATORS)}")
    if kind == "garnet":
        if seed is None:
            raise InvalidMdpError("garnet instances need a seed")
        params["seed"] = seed
    try:
        return GENERATORS[kind](**params)
    except TypeError as exc:
        raise InvalidMdpError(f"bad parameters for {kind}: {exc}") from None
