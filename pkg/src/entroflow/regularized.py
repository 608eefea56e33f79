"""Regularized optimal policies: entropy (soft Bellman) and the sigma family."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .geometry import (
    InfiniteDivergenceError,
    kakade_divergence,
    kakade_projection,
    occupancy_of,
    state_kl,
)
from .mdp import MdpInstance, OptimalStructure, optimal_structure, q_from_v, reward_of, state_kernel


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (final residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class RegularizedSolution:
    tau: float
    policy: np.ndarray
    v: np.ndarray
    q: np.ndarray
    residual: float
    iterations: int
    residuals: np.ndarray  # sup-norm residual per iteration


def soft_temperature(mdp: MdpInstance, tau: float) -> float:
    # the KL penalty is paid per step with the same (1 - gamma) weight as the reward
    return (1.0 - mdp.gamma) * tau


def solve_entropy_regularized(
    mdp: MdpInstance,
    pi0: np.ndarray,
    tau: float,
    tol: float | None = None,
    max_iter: int = 1_000_000,
    support: np.ndarray | None = None,
) -> RegularizedSolution:
    """Maximize R(pi) - tau * D_K(pi, pi0) by soft value iteration.

    ``support`` optionally restricts the admissible actions per state; the
    reference is then used unnormalized on the restriction.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    if tol is None:
        tol = 1e-12 * max(tau, 1.0) * (1.0 + mdp.r_inf)
    kappa = soft_temperature(mdp, tau)
    with np.errstate(divide="ignore"):
        log_ref = np.log(pi0)
    if support is not None:
        log_ref = np.where(support, log_ref, -np.inf)

    v = np.zeros(mdp.n_states)
    history = []
    for it in range(1, max_iter + 1):
        q = q_from_v(mdp, v)
        tv = kappa * logsumexp(log_ref + q / kappa, axis=1)
        res = float(np.max(np.abs(tv - v)))
        history.append(res)
        v = tv
        if res <= tol:
            break
    else:
        raise ConvergenceError("max iterations exceeded", history[-1])

    q = q_from_v(mdp, v)
    logits = log_ref + q / kappa
    policy = np.exp(logits - logsumexp(logits, axis=1, keepdims=True))
    return RegularizedSolution(tau, policy, v, q, history[-1], it, np.array(history))


def regularized_values(mdp: MdpInstance, pi: np.ndarray, pi0: np.ndarray, tau: float) -> tuple[np.ndarray, np.ndarray]:
    """V_tau^pi and Q_tau^pi (normalized convention) of an arbitrary policy."""
    kl = state_kl(pi, pi0)
    rhs = (1.0 - mdp.gamma) * (np.sum(pi * mdp.reward, axis=1) - tau * kl)
    v = np.linalg.solve(np.eye(mdp.n_states) - mdp.gamma * state_kernel(mdp, pi), rhs)
    return v, q_from_v(mdp, v)


def evaluate_regularized_reward(mdp: MdpInstance, pi: np.ndarray, pi0: np.ndarray, tau: float) -> float:
    if tau == 0:
        return reward_of(mdp, pi)
    return reward_of(mdp, pi) - tau * kakade_divergence(mdp, pi, pi0)


def _stationarity_coefficients(mdp, pi, tau, cost, h_prime_diff):
    """Per-(s,a) coefficients of the derivative of R - tau * sum_s d(s) cost(s)."""
    rhs = (1.0 - mdp.gamma) * (np.sum(pi * mdp.reward, axis=1) - tau * cost)
    v = np.linalg.solve(np.eye(mdp.n_states) - mdp.gamma * state_kernel(mdp, pi), rhs)
    return q_from_v(mdp, v) - (1.0 - mdp.gamma) * tau * h_prime_diff


def regularized_directional_derivative(
    mdp: MdpInstance, pi: np.ndarray, pi0: np.ndarray, tau: float, w: np.ndarray
) -> float:
    """Derivative of R_tau = R - tau D_K(., pi0) at pi along the tangent field w."""
    live = pi > 0
    log_ratio = np.zeros_like(pi)
    log_ratio[live] = np.log(pi[live] / pi0[live])
    coef = _stationarity_coefficients(mdp, pi, tau, state_kl(pi, pi0), log_ratio)
    d = occupancy_of(mdp, pi).d
    return float(np.sum(d[:, None] * w * coef)) / (1.0 - mdp.gamma)


def max_entropy_optimal_policy(
    mdp: MdpInstance, pi0: np.ndarray, structure: OptimalStructure | None = None
) -> np.ndarray:
    """Kakade projection of pi0 onto the optimal policies (flow limit)."""
    structure = optimal_structure(mdp) if structure is None else structure
    pi_star = kakade_projection(mdp, pi0, structure.optimal_actions)
    gap = structure.r_star - reward_of(mdp, pi_star)
    if abs(gap) > 1e-9 * (1.0 + mdp.r_inf):
        raise ConvergenceError("projected policy is not optimal", abs(gap))
    return pi_star


@dataclass(frozen=True)
class SigmaRegularizer:
    """Separable potential sum_a h(p_a) with h''(x) = x^(-sigma), sigma > 1.

    sigma = 2 uses the Burg form h(x) = -log x.
    """

    sigma: float

    def __post_init__(self):
        if not self.sigma > 1.0:
            raise ValueError("sigma must be > 1")

    def h(self, x):
        x = np.asarray(x, dtype=float)
        s = self.sigma
        with np.errstate(divide="ignore"):
            if s == 2.0:
                return -np.log(x)
            return x ** (2.0 - s) / ((2.0 - s) * (1.0 - s))

    def h_prime(self, x):
        x = np.asarray(x, dtype=float)
        if self.sigma == 2.0:
            return -1.0 / x
        return x ** (1.0 - self.sigma) / (1.0 - self.sigma)

    def h_second(self, x):
        return np.asarray(x, dtype=float) ** (-self.sigma)

    def bregman(self, p: np.ndarray, q: np.ndarray) -> np.ndarray:
        """Per-row Bregman divergence D_psi(p_s, q_s)."""
        p = np.asarray(p, dtype=float)
        if self.sigma >= 2.0 and np.any(p <= 0):
            raise InfiniteDivergenceError(f"sigma={self.sigma} potential diverges on the boundary")
        terms = self.h(p) - self.h(q) - self.h_prime(q) * (p - q)
        return terms.sum(axis=-1)


def sigma_potential_eval(reg: SigmaRegularizer, mdp: MdpInstance, pi: np.ndarray, pi0: np.ndarray) -> float:
    """D_Psi(pi, pi0) = sum_s d^pi(s) D_psi(pi(.|s), pi0(.|s))."""
    d = occupancy_of(mdp, pi).d
    return float(d @ reg.bregman(pi, pi0))


def sigma_stationarity_gap(
    reg: SigmaRegularizer, mdp: MdpInstance, pi: np.ndarray, pi0: np.ndarray, tau: float
) -> float:
    """Largest per-state spread of the first-order coefficients of R - tau D_Psi(., pi0).

    Zero exactly at interior maximizers.
    """
    coef = _stationarity_coefficients(
        mdp, pi, tau, reg.bregman(pi, pi0), reg.h_prime(pi) - reg.h_prime(pi0)
    )
    return float(np.max(coef.max(axis=1) - coef.min(axis=1)))


def entropy_stationarity_gap(mdp: MdpInstance, pi: np.ndarray, pi0: np.ndarray, tau: float) -> float:
    coef = _stationarity_coefficients(mdp, pi, tau, state_kl(pi, pi0), np.log(pi / pi0))
    return float(np.max(coef.max(axis=1) - coef.min(axis=1)))
