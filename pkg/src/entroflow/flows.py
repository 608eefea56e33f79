"""Kakade gradient flow and the sigma-family Hessian gradient flows."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import log_softmax, softmax

from .geometry import kakade_divergence, state_kl
from .mdp import (
    MdpInstance,
    OptimalStructure,
    evaluate_policy,
    optimal_structure,
    reward_of,
    suboptimality_gap,
    validate_policy,
)
from .regularized import SigmaRegularizer, max_entropy_optimal_policy, solve_entropy_regularized
from .rk import StepSizeUnderflow, integrate

SIGMA_FLOOR = 1e-300


class FlowIntegrationError(RuntimeError):
    def __init__(self, t_reached: float, detail: str = ""):
        super().__init__(f"flow integration failed at t={t_reached:.6g} {detail}".rstrip())
        self.t_reached = t_reached


@dataclass(frozen=True)
class FlowTrajectory:
    times: np.ndarray
    log_policies: np.ndarray  # (n_times, n_states, n_actions)
    reward: np.ndarray
    reward_gap: np.ndarray
    dk_to_pistar: np.ndarray
    dk_to_central: np.ndarray  # nan where not computed
    sigma: float | None = None  # None for the Kakade (entropy) flow
    stats: dict = field(default_factory=dict)

    @property
    def policies(self) -> np.ndarray:
        return np.exp(self.log_policies)

    def reward_monotone(self, slack: float = 1e-9) -> bool:
        return bool(np.all(np.diff(self.reward) >= -slack))

    def rows_stochastic(self, tol: float = 1e-10) -> bool:
        return bool(np.all(np.abs(self.policies.sum(axis=2) - 1.0) <= tol))

    def interior(self) -> bool:
        return bool(np.all(self.policies > 0))


def geometric_grid(t_first: float, t_last: float, n: int, include_zero: bool = True) -> np.ndarray:
    """t_first * rho^k for k = 0..n-1 ending at t_last, optionally preceded by 0."""
    grid = np.geomspace(t_first, t_last, n)
    return np.concatenate([[0.0], grid]) if include_zero else grid


def _check_grid(t_grid) -> np.ndarray:
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or len(t_grid) < 1 or np.any(np.diff(t_grid) <= 0) or t_grid[0] < 0:
        raise ValueError("time grid must be non-negative and strictly increasing")
    return t_grid


def _diagnostics(mdp, policies, times, structure, pi_star, central_path, pi0):
    reward = np.array([reward_of(mdp, p) for p in policies])
    gap = np.array([suboptimality_gap(mdp, p, structure) for p in policies])
    dk_star = np.array([kakade_divergence(mdp, pi_star, p) for p in policies])
    dk_central = np.full(len(times), np.nan)
    if central_path:
        for i, t in enumerate(times):
            if t > 0:
                sol = solve_entropy_regularized(mdp, pi0, 1.0 / t)
                dk_central[i] = kakade_divergence(mdp, policies[i], sol.policy)
            else:
                dk_central[i] = 0.0
    return reward, gap, dk_star, dk_central


def kakade_flow_policies(mdp: MdpInstance, pi0: np.ndarray, t_grid, ode_tol: float = 1e-10):
    """Raw integration of the Kakade flow in logit coordinates.

    Returns the log-policies on the grid and the integrator statistics.
    """
    pi0 = validate_policy(mdp, pi0, interior=True)
    t_grid = _check_grid(t_grid)
    shape = pi0.shape
    scale = 1.0 / (1.0 - mdp.gamma)

    def rhs(_t, z):
        pi = softmax(z.reshape(shape), axis=1)
        return (scale * evaluate_policy(mdp, pi).adv).ravel()

    def recenter(z):
        z = z.reshape(shape)
        return (z - z.max(axis=1, keepdims=True)).ravel()

    z0 = np.log(pi0).ravel()
    if len(t_grid) == 1:
        return np.log(pi0)[None], {"accepted": 0, "rejected": 0, "nfev": 0}
    try:
        zs, stats = integrate(rhs, z0, t_grid, rtol=ode_tol, atol=ode_tol, project=recenter)
    except StepSizeUnderflow as exc:
        raise FlowIntegrationError(exc.t, "(step size underflow)") from None
    return log_softmax(zs.reshape((-1,) + shape), axis=2), stats


def integrate_kakade_flow(
    mdp: MdpInstance,
    pi0: np.ndarray,
    t_grid,
    ode_tol: float = 1e-10,
    central_path: bool = False,
    structure: OptimalStructure | None = None,
) -> FlowTrajectory:
    """Kakade gradient flow d/dt pi = A^pi * pi / (1 - gamma) with diagnostics.

    ``central_path=True`` also solves the regularized problem at tau = 1/t on
    every grid point and records D_K(pi_t, pi*_{1/t}).
    """
    t_grid = _check_grid(t_grid)
    log_pis, stats = kakade_flow_policies(mdp, pi0, t_grid, ode_tol)
    structure = optimal_structure(mdp) if structure is None else structure
    pi_star = max_entropy_optimal_policy(mdp, pi0, structure)
    diag = _diagnostics(mdp, np.exp(log_pis), t_grid, structure, pi_star, central_path, pi0)
    return FlowTrajectory(t_grid, log_pis, *diag, sigma=None, stats=stats)


def central_path_check(
    mdp: MdpInstance,
    pi0: np.ndarray,
    t: float,
    ode_tol: float = 1e-12,
    solver_tol: float | None = 1e-13,
) -> float:
    """max_s KL(pi_t(.|s), pi*_{1/t}(.|s)) between the flow and the regularized optimum."""
    if not t > 0:
        raise ValueError("t must be positive")
    log_pis, _ = kakade_flow_policies(mdp, pi0, [0.0, t], ode_tol)
    sol = solve_entropy_regularized(mdp, pi0, 1.0 / t, tol=solver_tol)
    return float(np.max(state_kl(np.exp(log_pis[-1]), sol.policy)))


def implicit_bias_check(
    mdp: MdpInstance,
    pi0: np.ndarray,
    t_final: float,
    ode_tol: float = 1e-10,
    structure: OptimalStructure | None = None,
) -> tuple[float, float]:
    """(D_K(pi*, pi_t_final), policy-convergence upper bound at t_final).

    The bound is +inf while it is not applicable.
    """
    from .bounds import BoundConstants, thm44_bounds

    structure = optimal_structure(mdp) if structure is None else structure
    consts = BoundConstants.for_flow(mdp, pi0, structure)
    log_pis, _ = kakade_flow_policies(mdp, pi0, [0.0, t_final], ode_tol)
    dk = kakade_divergence(mdp, consts.pi_star, np.exp(log_pis[-1]))
    upper, _ = thm44_bounds(consts, max(t_final, 1.0))
    return dk, np.inf if upper is None else upper


def sigma_flow_field(mdp: MdpInstance, reg: SigmaRegularizer, pi: np.ndarray) -> np.ndarray:
    """Hessian-metric gradient of R restricted to the tangent space of the simplex."""
    adv = evaluate_policy(mdp, pi).adv
    weight = pi**reg.sigma
    shift = np.sum(weight * adv, axis=1, keepdims=True) / weight.sum(axis=1, keepdims=True)
    return weight * (adv - shift) / (1.0 - mdp.gamma)


def sigma_flow_policies(mdp: MdpInstance, reg: SigmaRegularizer, pi0: np.ndarray, t_grid, ode_tol: float = 1e-10):
    pi0 = validate_policy(mdp, pi0, interior=True)
    t_grid = _check_grid(t_grid)
    shape = pi0.shape

    def rhs(_t, y):
        return sigma_flow_field(mdp, reg, y.reshape(shape)).ravel()

    def renormalize(y):
        pi = np.maximum(y.reshape(shape), SIGMA_FLOOR)
        return (pi / pi.sum(axis=1, keepdims=True)).ravel()

    if len(t_grid) == 1:
        return pi0[None].copy(), {"accepted": 0, "rejected": 0, "nfev": 0}
    try:
        ys, stats = integrate(rhs, pi0.ravel(), t_grid, rtol=ode_tol, atol=ode_tol * 1e-8, project=renormalize)
    except StepSizeUnderflow as exc:
        raise FlowIntegrationError(exc.t, "(step size underflow near the boundary)") from None
    return ys.reshape((-1,) + shape), stats


def integrate_sigma_flow(
    mdp: MdpInstance,
    reg: SigmaRegularizer,
    pi0: np.ndarray,
    t_grid,
    ode_tol: float = 1e-10,
    structure: OptimalStructure | None = None,
) -> FlowTrajectory:
    """Gradient flow of R under the metric with h''(x) = x^(-sigma).

    D_K to pi* uses the Kakade projection as reference point; it is the flow
    limit whenever every state has a unique optimal action.
    """
    t_grid = _check_grid(t_grid)
    policies, stats = sigma_flow_policies(mdp, reg, pi0, t_grid, ode_tol)
    structure = optimal_structure(mdp) if structure is None else structure
    pi_star = max_entropy_optimal_policy(mdp, pi0, structure)
    diag = _diagnostics(mdp, policies, t_grid, structure, pi_star, False, pi0)
    return FlowTrajectory(t_grid, np.log(policies), *diag, sigma=reg.sigma, stats=stats)


def bandit_flow_closed_form(reward: np.ndarray, pi0: np.ndarray, t: float) -> np.ndarray:
    """Kakade flow of a one-state, gamma = 0 problem: pi_t proportional to pi0 * exp(t r)."""
    return np.exp(log_softmax(np.log(pi0) + t * np.asarray(reward), axis=-1))

