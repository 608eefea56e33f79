"""Finite discounted MDPs, exact policy evaluation and optimal values.

All rewards and values use the (1 - gamma)-normalized convention, i.e.
``R(pi) = (1 - gamma) E[sum_t gamma^t r(S_t, A_t)]`` so that values live in
the same range as the instantaneous reward.

Policies are plain ``(n_states, n_actions)`` row-stochastic arrays.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

STOCHASTIC_TOL = 1e-12


class InvalidMdpError(ValueError):
    """Raised when an MDP or policy violates its invariants."""


@dataclass(frozen=True)
class MdpInstance:
    transition: np.ndarray  # P[s, a, s']
    reward: np.ndarray  # r[s, a]
    gamma: float
    mu: np.ndarray

    @property
    def n_states(self) -> int:
        return self.reward.shape[0]

    @property
    def n_actions(self) -> int:
        return self.reward.shape[1]

    @property
    def r_inf(self) -> float:
        return float(np.max(np.abs(self.reward)))

    def with_gamma(self, gamma: float) -> "MdpInstance":
        return validate_mdp(MdpInstance(self.transition, self.reward, gamma, self.mu))

    def to_dict(self) -> dict:
        return {
            "n_states": self.n_states,
            "n_actions": self.n_actions,
            "gamma": float(self.gamma),
            "mu": self.mu.tolist(),
            "reward": self.reward.tolist(),
            "transition": self.transition.tolist(),
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "MdpInstance":
        try:
            mdp = cls(
                transition=np.asarray(raw["transition"], dtype=float),
                reward=np.asarray(raw["reward"], dtype=float),
                gamma=float(raw["gamma"]),
                mu=np.asarray(raw["mu"], dtype=float),
            )
        except KeyError as exc:
            raise InvalidMdpError(f"missing field {exc.args[0]!r}") from None
        for key, size in (("n_states", mdp.reward.shape[0]), ("n_actions", mdp.reward.shape[-1])):
            if key in raw and int(raw[key]) != size:
                raise InvalidMdpError(f"{key}={raw[key]} does not match array shapes")
        return validate_mdp(mdp)


def make_mdp(transition, reward, gamma, mu=None) -> MdpInstance:
    """Build and validate an instance; ``mu`` defaults to uniform."""
    transition = np.asarray(transition, dtype=float)
    reward = np.asarray(reward, dtype=float)
    if mu is None:
        mu = np.full(reward.shape[0], 1.0 / reward.shape[0])
    return validate_mdp(MdpInstance(transition, reward, float(gamma), np.asarray(mu, dtype=float)))


def validate_mdp(raw: MdpInstance) -> MdpInstance:
    P, r, mu = raw.transition, raw.reward, raw.mu
    if r.ndim != 2 or r.shape[0] < 1 or r.shape[1] < 1:
        raise InvalidMdpError("reward must be a non-empty (n_states, n_actions) matrix")
    n_s, n_a = r.shape
    if P.shape != (n_s, n_a, n_s):
        raise InvalidMdpError(f"transition has shape {P.shape}, expected {(n_s, n_a, n_s)}")
    if mu.shape != (n_s,):
        raise InvalidMdpError(f"mu has shape {mu.shape}, expected {(n_s,)}")
    if not (np.all(np.isfinite(P)) and np.all(np.isfinite(r)) and np.all(np.isfinite(mu))):
        raise InvalidMdpError("non-finite entries")
    if not 0.0 <= raw.gamma < 1.0:
        raise InvalidMdpError(f"discount must be < 1 and >= 0, got {raw.gamma}")
    neg = np.argwhere(P < 0)
    if len(neg):
        s, a, _ = neg[0]
        raise InvalidMdpError(f"kernel row not stochastic at (s={s}, a={a}): negative entry")
    sums = P.sum(axis=2)
    bad = np.argwhere(np.abs(sums - 1.0) > STOCHASTIC_TOL)
    if len(bad):
        s, a = bad[0]
        raise InvalidMdpError(f"kernel row not stochastic at (s={s}, a={a}): sums to {sums[s, a]!r}")
    if np.any(mu < 0) or abs(mu.sum() - 1.0) > STOCHASTIC_TOL:
        raise InvalidMdpError("mu is not a probability vector")
    return raw


def validate_policy(mdp: MdpInstance, pi: np.ndarray, interior: bool = False) -> np.ndarray:
    pi = np.asarray(pi, dtype=float)
    if pi.shape != (mdp.n_states, mdp.n_actions):
        raise InvalidMdpError(f"policy has shape {pi.shape}, expected {(mdp.n_states, mdp.n_actions)}")
    if np.any(pi < 0) or np.any(np.abs(pi.sum(axis=1) - 1.0) > STOCHASTIC_TOL):
        raise InvalidMdpError("policy rows must be probability vectors")
    if interior and np.any(pi <= 0):
        raise InvalidMdpError("policy must be strictly positive")
    return pi


def uniform_policy(mdp: MdpInstance) -> np.ndarray:
    return np.full((mdp.n_states, mdp.n_actions), 1.0 / mdp.n_actions)


def load_mdp(path) -> MdpInstance:
    with open(path) as fh:
        return MdpInstance.from_dict(json.load(fh))


def save_mdp(mdp: MdpInstance, path) -> None:
    Path(path).write_text(json.dumps(mdp.to_dict(), indent=1))


@dataclass(frozen=True)
class ValueBundle:
    v: np.ndarray
    q: np.ndarray
    adv: np.ndarray


@dataclass(frozen=True)
class OptimalStructure:
    bundle: ValueBundle
    optimal_actions: np.ndarray  # boolean mask (n_states, n_actions)
    delta: float  # math.inf when every action is optimal everywhere
    r_star: float
    residual: float

    @property
    def delta_finite(self) -> bool:
        return bool(np.isfinite(self.delta))

    @property
    def suboptimal(self) -> np.ndarray:
        return ~self.optimal_actions


def state_kernel(mdp: MdpInstance, pi: np.ndarray) -> np.ndarray:
    """P_pi(s'|s) = sum_a pi(a|s) P(s'|s,a)."""
    return np.einsum("sa,sat->st", pi, mdp.transition)


def q_from_v(mdp: MdpInstance, v: np.ndarray, reward: np.ndarray | None = None) -> np.ndarray:
    r = mdp.reward if reward is None else reward
    return (1.0 - mdp.gamma) * r + mdp.gamma * mdp.transition @ v


def _solve_values(mdp: MdpInstance, pi: np.ndarray, state_reward: np.ndarray) -> np.ndarray:
    lhs = np.eye(mdp.n_states) - mdp.gamma * state_kernel(mdp, pi)
    try:
        return np.linalg.solve(lhs, (1.0 - mdp.gamma) * state_reward)
    except np.linalg.LinAlgError as exc:
        raise InvalidMdpError(f"singular policy evaluation system: {exc}") from None


def evaluate_policy(mdp: MdpInstance, pi: np.ndarray) -> ValueBundle:
    """Exact V, Q and advantage of ``pi`` by a dense linear solve."""
    v = _solve_values(mdp, pi, np.sum(pi * mdp.reward, axis=1))
    q = q_from_v(mdp, v)
    return ValueBundle(v=v, q=q, adv=q - v[:, None])


def bellman_residual(mdp: MdpInstance, pi: np.ndarray, v: np.ndarray) -> float:
    rhs = (1.0 - mdp.gamma) * np.sum(pi * mdp.reward, axis=1) + mdp.gamma * state_kernel(mdp, pi) @ v
    return float(np.max(np.abs(v - rhs)))


def reward_of(mdp: MdpInstance, pi: np.ndarray) -> float:
    """R(pi) = <r, nu^pi>."""
    from .geometry import occupancy_of

    return float(np.sum(mdp.reward * occupancy_of(mdp, pi).nu))


def optimal_structure(
    mdp: MdpInstance,
    tie_tol: float | None = None,
    vi_tol: float | None = None,
    max_iter: int = 1_000_000,
) -> OptimalStructure:
    """Optimal values, optimal action sets and the gap constant Delta.

    Value iteration is run to the requested sup-norm residual; the greedy
    policy is then evaluated exactly and kept if it does not increase the
    Bellman optimality residual.
    """
    scale = 1.0 + mdp.r_inf
    tie_tol = 1e-9 * scale if tie_tol is None else tie_tol
    vi_tol = 1e-13 * scale if vi_tol is None else vi_tol

    v = np.zeros(mdp.n_states)
    for _ in range(max_iter):
        tv = q_from_v(mdp, v).max(axis=1)
        res = np.max(np.abs(tv - v))
        v = tv
        if res <= vi_tol:
            break

    q = q_from_v(mdp, v)
    greedy = np.zeros_like(q)
    greedy[np.arange(mdp.n_states), q.argmax(axis=1)] = 1.0
    v_pol = evaluate_policy(mdp, greedy).v
    res_vi = np.max(np.abs(q.max(axis=1) - v))
    res_pol = np.max(np.abs(q_from_v(mdp, v_pol).max(axis=1) - v_pol))
    if res_pol <= res_vi:
        v = v_pol
    q = q_from_v(mdp, v)
    v = q.max(axis=1)
    residual = float(np.max(np.abs(q_from_v(mdp, v).max(axis=1) - v)))

    adv = q - v[:, None]
    optimal = adv >= -tie_tol
    adv = np.where(optimal, 0.0, adv)
    if np.all(optimal):
        delta = np.inf
    else:
        delta = -float(np.max(adv[~optimal])) / (1.0 - mdp.gamma)
    return OptimalStructure(
        bundle=ValueBundle(v=v, q=q, adv=adv),
        optimal_actions=optimal,
        delta=delta,
        r_star=float(mdp.mu @ v),
        residual=residual,
    )


def suboptimality_gap(mdp: MdpInstance, pi: np.ndarray, structure: OptimalStructure) -> float:
    """R* - R(pi) through the performance difference identity.

    Only suboptimal actions contribute, so the result keeps full relative
    precision when the gap is far below machine epsilon times R*.
    """
    from .geometry import occupancy_of

    nu = occupancy_of(mdp, pi).nu
    adv = structure.bundle.adv
    return float(-np.sum(nu[structure.suboptimal] * adv[structure.suboptimal]) / (1.0 - mdp.gamma))


def performance_difference(mdp: MdpInstance, pi1: np.ndarray, pi2: np.ndarray) -> tuple[float, float]:
    """Both sides of R(pi1) - R(pi2) = <nu^pi1, A^pi2> / (1 - gamma)."""
    from .geometry import occupancy_of

    lhs = reward_of(mdp, pi1) - reward_of(mdp, pi2)
    rhs = float(np.sum(occupancy_of(mdp, pi1).nu * evaluate_policy(mdp, pi2).adv)) / (1.0 - mdp.gamma)
    return lhs, rhs
