"""Occupancy measures, the Kakade divergence/metric and projections onto faces."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mdp import MdpInstance, evaluate_policy, state_kernel, uniform_policy


class InfiniteDivergenceError(ArithmeticError):
    """A divergence is +inf: the first argument charges a null set of the second."""


@dataclass(frozen=True)
class Occupancy:
    d: np.ndarray  # state distribution
    nu: np.ndarray  # state-action distribution


def occupancy_of(mdp: MdpInstance, pi: np.ndarray) -> Occupancy:
    lhs = np.eye(mdp.n_states) - mdp.gamma * state_kernel(mdp, pi).T
    d = np.linalg.solve(lhs, (1.0 - mdp.gamma) * mdp.mu)
    return Occupancy(d=d, nu=d[:, None] * pi)


def polytope_residual(mdp: MdpInstance, nu: np.ndarray) -> np.ndarray:
    """Linear constraints l_s(nu) describing the state-action polytope."""
    inflow = np.einsum("xat,xa->t", mdp.transition, nu)
    return nu.sum(axis=1) - mdp.gamma * inflow - (1.0 - mdp.gamma) * mdp.mu


def state_exploration_holds(mdp: MdpInstance) -> bool:
    return bool(np.all(occupancy_of(mdp, uniform_policy(mdp)).d > 0))


def xlogy_ratio(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Entrywise p * log(p / q) with 0 log 0 = 0; raises where p > 0 = q."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    bad = (p > 0) & (q <= 0)
    if np.any(bad):
        raise InfiniteDivergenceError(f"divergence infinite at index {tuple(np.argwhere(bad)[0])}")
    out = np.zeros(np.broadcast(p, q).shape)
    pos = p > 0
    out[pos] = (p * np.log(np.where(pos, p, 1.0) / np.where(pos, q, 1.0)))[pos]
    return out


def kl_divergence(p: np.ndarray, q: np.ndarray) -> float:
    return float(np.sum(xlogy_ratio(p, q)))


def state_kl(pi1: np.ndarray, pi2: np.ndarray, weights: np.ndarray | None = None) -> np.ndarray:
    """Per-state KL(pi1(.|s), pi2(.|s)); states with zero weight are skipped."""
    if weights is None:
        return xlogy_ratio(pi1, pi2).sum(axis=1)
    out = np.zeros(pi1.shape[0])
    live = weights > 0
    out[live] = xlogy_ratio(pi1[live], pi2[live]).sum(axis=1)
    return out


def kakade_divergence(mdp: MdpInstance, pi1: np.ndarray, pi2: np.ndarray) -> float:
    """sum_s d^pi1(s) KL(pi1(.|s), pi2(.|s))."""
    d = occupancy_of(mdp, pi1).d
    return float(d @ state_kl(pi1, pi2, weights=d))


def _as_nu(x) -> np.ndarray:
    return x.nu if isinstance(x, Occupancy) else np.asarray(x, dtype=float)


def conditional_kl(nu1, nu2) -> float:
    """Conditional KL divergence sum nu1(s,a) log(nu1(a|s) / nu2(a|s))."""
    nu1, nu2 = _as_nu(nu1), _as_nu(nu2)
    return float(np.sum(xlogy_ratio(nu1, nu1.sum(axis=1, keepdims=True) * condition(nu2))))


def kakade_inner(mdp: MdpInstance, pi: np.ndarray, w1: np.ndarray, w2: np.ndarray) -> float:
    d = occupancy_of(mdp, pi).d
    return float(np.sum(d[:, None] * w1 * w2 / pi))


def kakade_gradient(mdp: MdpInstance, pi: np.ndarray) -> np.ndarray:
    """Riemannian gradient of R in the Kakade metric: A^pi * pi / (1 - gamma)."""
    return evaluate_policy(mdp, pi).adv * pi / (1.0 - mdp.gamma)


def reward_directional_derivative(mdp: MdpInstance, pi: np.ndarray, w: np.ndarray) -> float:
    """Euclidean derivative of R at pi along a tangent field w."""
    d = occupancy_of(mdp, pi).d
    q = evaluate_policy(mdp, pi).q
    return float(np.sum(d[:, None] * w * q)) / (1.0 - mdp.gamma)


def condition(nu: np.ndarray) -> np.ndarray:
    """Policy obtained from a state-action measure by conditioning on the state."""
    nu = np.asarray(nu, dtype=float)
    mass = nu.sum(axis=1, keepdims=True)
    out = np.full(nu.shape, 1.0 / nu.shape[1])
    live = mass[:, 0] > 0
    out[live] = nu[live] / mass[live]
    return out


def as_face_mask(faces, n_states: int, n_actions: int) -> np.ndarray:
    """Accept a boolean mask or a per-state list of action indices."""
    if isinstance(faces, np.ndarray) and faces.dtype == bool:
        mask = faces.copy()
    else:
        mask = np.zeros((n_states, n_actions), dtype=bool)
        for s, acts in enumerate(faces):
            mask[s, list(acts)] = True
    if mask.shape != (n_states, n_actions):
        raise ValueError(f"face mask has shape {mask.shape}")
    if not np.all(mask.any(axis=1)):
        raise ValueError(f"empty face at state {int(np.argmin(mask.any(axis=1)))}")
    return mask


def face_information_projection(ref: np.ndarray, face) -> tuple[np.ndarray, float]:
    """I-projection of ``ref`` onto the face of the simplex spanned by ``face``.

    Returns the renormalized restriction and the value -log(ref(face)).
    """
    ref = np.asarray(ref, dtype=float)
    mask = np.zeros(ref.shape, dtype=bool)
    mask[np.asarray(face, dtype=int)] = True
    if not mask.any():
        raise ValueError("empty face")
    mass = ref[mask].sum()
    if mass <= 0:
        raise ValueError("reference vanishes on face")
    proj = np.where(mask, ref, 0.0) / mass
    return proj, float(-np.log(mass))


def kakade_projection(mdp: MdpInstance, pi0: np.ndarray, faces, tol: float | None = None) -> np.ndarray:
    """argmin of D_K(., pi0) over policies supported in ``faces``.

    Maximizing -D_K(pi, pi0) is the zero-reward regularized problem with
    tau = 1 restricted to the face actions, so the soft Bellman solver does
    the work.
    """
    from .regularized import solve_entropy_regularized

    mask = as_face_mask(faces, mdp.n_states, mdp.n_actions)
    if np.all(mask):
        return np.array(pi0, dtype=float)
    zero = MdpInstance(mdp.transition, np.zeros_like(mdp.reward), mdp.gamma, mdp.mu)
    sol = solve_entropy_regularized(zero, pi0, 1.0, tol=1e-14 if tol is None else tol, support=mask)
    return sol.policy


def pythagoras_check(mdp: MdpInstance, pi0: np.ndarray, faces, pi: np.ndarray) -> tuple[float, float, float]:
    """(D_K(pi, pi0), D_K(pi, proj) + D_K(proj, pi0), difference)."""
    mask = as_face_mask(faces, mdp.n_states, mdp.n_actions)
    if np.any(pi[~mask] > 0):
        raise ValueError("pi is not supported in the faces")
    proj = kakade_projection(mdp, pi0, mask)
    lhs = kakade_divergence(mdp, pi, pi0)
    rhs = kakade_divergence(mdp, pi, proj) + kakade_divergence(mdp, proj, pi0)
    return lhs, rhs, lhs - rhs
