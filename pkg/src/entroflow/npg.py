"""Tabular softmax natural policy gradient, plain and entropy-regularized.

Iterates are carried as log-policies so that entries far below the smallest
double never collapse to zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .mdp import MdpInstance, evaluate_policy, state_kernel, uniform_policy, validate_policy
from .regularized import solve_entropy_regularized


@dataclass(frozen=True)
class NpgRun:
    eta: float
    tau: float
    log_policies: np.ndarray  # (k_max + 1, n_states, n_actions)
    reward: np.ndarray
    values: np.ndarray  # V^{pi_k}(s), shape (k_max + 1, n_states)
    log_z: np.ndarray  # log Z_k(s) of the step leaving pi_k; nan for the last iterate
    q_dist: np.ndarray  # sup-norm distance of soft Q-functions to the optimum (tau > 0)
    logpi_dist: np.ndarray  # sup-norm log-policy distance to pi*_tau (tau > 0)
    gamma: float = 0.0

    @property
    def policies(self) -> np.ndarray:
        return np.exp(self.log_policies)

    @property
    def k_max(self) -> int:
        return len(self.reward) - 1

    def progress(self, mu: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Both sides of the per-step progress inequality (plain runs only)."""
        lhs = np.diff(self.reward)
        rhs = (1.0 - self.gamma) / self.eta * (self.log_z[:-1] @ mu)
        return lhs, rhs


def _npg_logit_step(mdp: MdpInstance, log_pi: np.ndarray, eta: float):
    pi = np.exp(log_pi)
    bundle = evaluate_policy(mdp, pi)
    shifted = log_pi + eta * bundle.adv / (1.0 - mdp.gamma)
    log_z = logsumexp(shifted, axis=1)
    return shifted - log_z[:, None], log_z, bundle


def npg_step(mdp: MdpInstance, pi: np.ndarray, eta: float) -> tuple[np.ndarray, np.ndarray]:
    """One NPG step pi * exp(eta A / (1 - gamma)) / Z, returning (next, Z)."""
    if not eta > 0:
        raise ValueError("eta must be positive")
    pi = validate_policy(mdp, pi, interior=True)
    log_next, log_z, _ = _npg_logit_step(mdp, np.log(pi), eta)
    return np.exp(log_next), np.exp(log_z)


def npg_run_unregularized(mdp: MdpInstance, pi0: np.ndarray, eta: float, k_max: int) -> NpgRun:
    if not eta > 0:
        raise ValueError("eta must be positive")
    pi0 = validate_policy(mdp, pi0, interior=True)
    log_pis = np.empty((k_max + 1,) + pi0.shape)
    log_zs = np.full((k_max + 1, mdp.n_states), np.nan)
    values = np.empty((k_max + 1, mdp.n_states))
    log_pis[0] = np.log(pi0)
    for k in range(k_max):
        log_pis[k + 1], log_zs[k], bundle = _npg_logit_step(mdp, log_pis[k], eta)
        values[k] = bundle.v
    values[k_max] = evaluate_policy(mdp, np.exp(log_pis[k_max])).v
    reward = values @ mdp.mu
    nan = np.full(k_max + 1, np.nan)
    return NpgRun(eta, 0.0, log_pis, reward, values, log_zs, nan, nan.copy(), gamma=mdp.gamma)


def _soft_q(mdp: MdpInstance, log_pi: np.ndarray, log_ref: np.ndarray, tau: float) -> np.ndarray:
    """Soft Q-function in unnormalized units: the normalized one divided by (1 - gamma)."""
    pi = np.exp(log_pi)
    kl = np.sum(pi * (log_pi - log_ref), axis=1)
    rhs = np.sum(pi * mdp.reward, axis=1) - tau * kl
    v = np.linalg.solve(np.eye(mdp.n_states) - mdp.gamma * state_kernel(mdp, pi), rhs)
    return mdp.reward + mdp.gamma * mdp.transition @ v


def _check_regularized_step(mdp: MdpInstance, eta: float, tau: float) -> None:
    if not (eta > 0 and tau > 0):
        raise ValueError("eta and tau must be positive")
    if eta * tau > (1.0 - mdp.gamma) * (1.0 + 1e-12):
        raise ValueError(f"stepsize {eta} exceeds (1 - gamma) / tau = {(1.0 - mdp.gamma) / tau}")


def _regularized_logit_step(mdp, log_pi, log_ref, eta, tau):
    decay = max(0.0, 1.0 - eta * tau / (1.0 - mdp.gamma))
    q = _soft_q(mdp, log_pi, log_ref, tau)
    # the reference enters with weight eta tau / (1 - gamma); it is constant for the uniform one
    logits = (decay * log_pi if decay > 0 else 0.0) + (1.0 - decay) * log_ref + eta * q / (1.0 - mdp.gamma)
    return logits - logsumexp(logits, axis=1, keepdims=True), q


def npg_step_regularized(
    mdp: MdpInstance, pi: np.ndarray, eta: float, tau: float, pi0_ref: np.ndarray | None = None
) -> np.ndarray:
    """Entropy-regularized NPG step

    next proportional to pi^(1 - eta tau / (1 - gamma)) * exp(eta Q_tau / (1 - gamma)),

    where Q_tau is the soft Q-function of the discounted sum (not normalized
    by 1 - gamma). ``eta = (1 - gamma) / tau`` is a soft policy-iteration step.
    """
    _check_regularized_step(mdp, eta, tau)
    pi = validate_policy(mdp, pi, interior=True)
    ref = uniform_policy(mdp) if pi0_ref is None else pi0_ref
    log_next, _ = _regularized_logit_step(mdp, np.log(pi), np.log(ref), eta, tau)
    return np.exp(log_next)


def cen_constant(mdp: MdpInstance, eta: float, tau: float, pi_init: np.ndarray, pi_ref: np.ndarray | None = None) -> float:
    """C = |Q*_tau - Q_tau^{pi_init}|_inf + 2 tau (1 - eta tau / (1 - gamma)) |log pi*_tau - log pi_init|_inf."""
    ref = uniform_policy(mdp) if pi_ref is None else pi_ref
    sol = solve_entropy_regularized(mdp, ref, tau)
    log_ref = np.log(ref)
    q_star = _soft_q(mdp, np.log(sol.policy), log_ref, tau)
    q_init = _soft_q(mdp, np.log(pi_init), log_ref, tau)
    log_gap = np.max(np.abs(np.log(sol.policy) - np.log(pi_init)))
    return float(np.max(np.abs(q_star - q_init)) + 2 * tau * (1.0 - eta * tau / (1.0 - mdp.gamma)) * log_gap)


def npg_run_regularized(
    mdp: MdpInstance,
    eta: float,
    tau: float,
    k_max: int,
    pi_init: np.ndarray | None = None,
) -> NpgRun:
    """Regularized NPG towards R - tau D_K(., uniform), starting from ``pi_init``
    (uniform by default).

    Records the distances of soft Q-functions and log-policies to the
    regularized optimum for every iterate.
    """
    _check_regularized_step(mdp, eta, tau)
    ref = uniform_policy(mdp)
    log_ref = np.log(ref)
    start = ref if pi_init is None else validate_policy(mdp, pi_init, interior=True)
    sol = solve_entropy_regularized(mdp, ref, tau)
    log_star = np.log(sol.policy)
    q_star = _soft_q(mdp, log_star, log_ref, tau)

    log_pis = np.empty((k_max + 1,) + ref.shape)
    log_pis[0] = np.log(start)
    q_dist = np.empty(k_max + 1)
    for k in range(k_max):
        log_pis[k + 1], q = _regularized_logit_step(mdp, log_pis[k], log_ref, eta, tau)
        q_dist[k] = np.max(np.abs(q_star - q))
    q_dist[k_max] = np.max(np.abs(q_star - _soft_q(mdp, log_pis[k_max], log_ref, tau)))
    logpi_dist = np.max(np.abs(log_pis - log_star[None]), axis=(1, 2))
    values = np.array([evaluate_policy(mdp, np.exp(lp)).v for lp in log_pis])
    log_z = np.full((k_max + 1, mdp.n_states), np.nan)
    return NpgRun(eta, tau, log_pis, values @ mdp.mu, values, log_z, q_dist, logpi_dist, gamma=mdp.gamma)


def regularized_reward_policy(mdp: MdpInstance, tau: float) -> np.ndarray:
    """pi*_tau for the uniform reference."""
    return solve_entropy_regularized(mdp, uniform_policy(mdp), tau).policy
