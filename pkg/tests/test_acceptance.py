"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run directly (``python3 tests/test_acceptance.py``) or through pytest; the
collected lines are repeated in the pytest terminal summary.
"""

import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import random_policy, random_tangent  # noqa: E402
from entroflow import bounds as bl  # noqa: E402
from entroflow.flows import (  # noqa: E402
    central_path_check,
    geometric_grid,
    implicit_bias_check,
    integrate_kakade_flow,
    integrate_sigma_flow,
)
from entroflow.geometry import (  # noqa: E402
    conditional_kl,
    face_information_projection,
    kakade_divergence,
    kakade_gradient,
    kakade_inner,
    kl_divergence,
    occupancy_of,
    polytope_residual,
    pythagoras_check,
)
from entroflow.instances import bandit, fig1_twocycle, garnet  # noqa: E402
from entroflow.mdp import (  # noqa: E402
    evaluate_policy,
    optimal_structure,
    performance_difference,
    reward_of,
    suboptimality_gap,
    uniform_policy,
)
from entroflow.npg import cen_constant, npg_run_regularized, npg_run_unregularized  # noqa: E402
from entroflow.regularized import SigmaRegularizer, max_entropy_optimal_policy, solve_entropy_regularized  # noqa: E402

RESULTS: list[str] = []


def record(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS.append(line)
    print(line)


def bandit3():
    return bandit((1.0, 0.5, 0.0))


def rate_garnets():
    return [garnet(8, 4, 3, gamma=0.8, seed=s) for s in range(5)]


def test_criterion_1_gradient():
    rng = np.random.default_rng(1)
    h = 1e-6
    worst = 0.0
    for seed in range(10):
        mdp = garnet(6, 3, 3, gamma=0.8, seed=seed)
        for _ in range(100):
            pi = random_policy(rng, 6, 3, floor=0.02)
            w = random_tangent(rng, 6, 3)
            w *= 0.01 / np.abs(w).max()
            fd = (reward_of(mdp, pi + h * w) - reward_of(mdp, pi - h * w)) / (2 * h)
            exact = kakade_inner(mdp, pi, kakade_gradient(mdp, pi), w)
            worst = max(worst, abs(fd - exact) / abs(exact))
    ok = worst <= 1e-5
    record(1, ok, f"max relative error {worst:.2e} over 1000 cases (limit 1e-5)")
    assert ok


def test_criterion_2_central_path():
    worst = 0.0
    for mdp in (fig1_twocycle(0.9), bandit3()):
        for t in (1.0, 2.0, 5.0, 10.0):
            worst = max(worst, central_path_check(mdp, uniform_policy(mdp), t, ode_tol=1e-12, solver_tol=1e-13))
    ok = worst <= 1e-5
    record(2, ok, f"max state KL {worst:.2e} (limit 1e-5)")
    assert ok


def _flow_grid(consts, initial_gap, extra=60.0):
    t0 = bl.fit_window_start(consts, initial_gap)
    tail = np.linspace(1.0, extra / consts.delta + 2 * t0, 400)
    return np.unique(np.concatenate([[0.0], np.geomspace(1e-2, 1.0, 20), tail]))


def _flow_run(mdp):
    pi0 = uniform_policy(mdp)
    structure = optimal_structure(mdp)
    consts = bl.BoundConstants.for_flow(mdp, pi0, structure)
    grid = _flow_grid(consts, suboptimality_gap(mdp, pi0, structure))
    traj = integrate_kakade_flow(mdp, pi0, grid, structure=structure)
    return structure, consts, traj


def test_criterion_3_exponential_rate():
    details, ok = [], True
    instances = [("cycle", fig1_twocycle(0.9))] + [(f"garnet{s}", m) for s, m in enumerate(rate_garnets())]
    for name, mdp in instances:
        structure, consts, traj = _flow_run(mdp)
        fit, _ = bl.flow_rate_fit(traj, consts)
        ratio = fit.slope / -consts.delta
        report = bl.certify_flow(mdp, traj, consts, structure)
        sandwich = [r for r in report.rows if r.check == "value_sandwich"]
        passed = abs(ratio - 1) <= 0.1 and all(r.passed for r in sandwich)
        ok &= passed
        details.append(f"{name} slope/-delta={ratio:.4f}")
    record(3, ok, "; ".join(details))
    assert ok


def test_criterion_4_policy_convergence():
    details, ok = [], True
    instances = [("cycle", fig1_twocycle(0.9)), ("bandit3", bandit3()), ("tie", bandit((1.0, 1.0, 0.0)))]
    instances += [(f"garnet{s}", m) for s, m in enumerate(rate_garnets())]
    for name, mdp in instances:
        structure, consts, traj = _flow_run(mdp)
        report = bl.certify_flow(mdp, traj, consts, structure)
        rows = [r for r in report.rows if r.check == "policy_sandwich"]
        pi0 = uniform_policy(mdp)
        t_final = 40.0 / consts.delta
        dk, _ = implicit_bias_check(mdp, pi0, t_final, structure=structure)
        limit = integrate_kakade_flow(mdp, pi0, [0.0, t_final], structure=structure).policies[-1]
        entry = float(np.abs(limit - max_entropy_optimal_policy(mdp, pi0, structure)).max())
        passed = bool(rows) and all(r.passed for r in rows) and dk <= 1e-4 and entry <= 1e-4
        ok &= passed
        details.append(f"{name} D_K={dk:.1e} entry={entry:.1e} rows={len(rows)}")
    record(4, ok, "; ".join(details))
    assert ok


def test_criterion_5_npg():
    details, ok = [], True
    for name, mdp in (("cycle", fig1_twocycle(0.9)), ("bandit3", bandit3())):
        structure = optimal_structure(mdp)
        pi0 = uniform_policy(mdp)
        consts = bl.BoundConstants.for_flow(mdp, pi0, structure)
        for eta in (0.1, 0.5, 1.0):
            run = npg_run_unregularized(mdp, pi0, eta, 200)
            report = bl.certify_npg(mdp, run, consts, structure)
            checks = report.checks()
            needed = ("progress", "value_monotone", "state_value", "value_sandwich")
            fit = bl.npg_rate_fit(run, mdp, structure, k_start=100)
            ratio = fit.slope / (-consts.delta * eta)
            passed = all(checks[c] for c in needed) and report.verdict == "pass" and abs(ratio - 1) <= 0.1
            ok &= passed
            details.append(f"{name} eta={eta} slope ratio={ratio:.3f}")
    record(5, ok, "; ".join(details))
    assert ok


def _grid_min_kl(ref, face, step=1e-3):
    n = int(round(1 / step))
    if len(face) == 1:
        return -math.log(ref[face[0]])
    if len(face) == 2:
        x = np.arange(n + 1) * step
        p = np.stack([x, 1 - x], axis=1)
        r = ref[list(face)]
    else:
        i, j = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
        keep = i + j <= n
        p = np.stack([i[keep] * step, j[keep] * step, 1 - (i[keep] + j[keep]) * step], axis=1)
        r = ref
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.where(p > 0, p * np.log(p / r), 0.0).sum(axis=1)
    return float(vals.min())


def test_criterion_6_information_projection():
    rng = np.random.default_rng(6)
    worst_grid = 0.0
    for _ in range(50):
        n = int(rng.integers(2, 4))
        ref = rng.dirichlet(np.ones(n))
        size = int(rng.integers(1, n + 1))
        face = sorted(rng.choice(n, size=size, replace=False).tolist())
        _, kl = face_information_projection(ref, face)
        worst_grid = max(worst_grid, abs(kl - _grid_min_kl(ref, face)))
    worst_eq, min_gap = 0.0, math.inf
    cases = [fig1_twocycle(0.9), garnet(4, 3, 3, gamma=0.85, seed=5)]
    for i in range(20):
        mdp = cases[i % 2]
        mask = rng.random((mdp.n_states, mdp.n_actions)) < 0.6
        mask[np.arange(mdp.n_states), rng.integers(mdp.n_actions, size=mdp.n_states)] = True
        pi0 = random_policy(rng, mdp.n_states, mdp.n_actions, floor=0.01)
        pi = np.where(mask, rng.random(mask.shape) + 0.05, 0.0)
        pi /= pi.sum(axis=1, keepdims=True)
        _, _, gap = pythagoras_check(mdp, pi0, mask, pi)
        worst_eq, min_gap = max(worst_eq, abs(gap)), min(min_gap, gap)
    ok = worst_grid <= 1e-5 and worst_eq <= 1e-6 and min_gap >= -1e-8
    record(6, ok, f"grid error {worst_grid:.1e}; Pythagoras |gap| {worst_eq:.1e}, min gap {min_gap:.1e}")
    assert ok


def test_criterion_7_sigma_rates():
    mdp = bandit3()
    pi0 = uniform_policy(mdp)
    consts = bl.BoundConstants.for_flow(mdp, pi0)
    grid = np.unique(np.concatenate([[0.0], np.geomspace(1e-2, 1.0, 10), np.geomspace(1.0, 100.0, 120)]))
    details, ok = [], True
    for sigma in (1.5, 2.0, 3.0):
        reg = SigmaRegularizer(sigma)
        traj = integrate_sigma_flow(mdp, reg, pi0, grid)
        fit = bl.sigma_rate_fit(traj, sigma, (10.0, 100.0))
        expected = -1.0 / (sigma - 1.0)
        dpsi = bl.sigma_limit_divergence(reg, mdp, pi0)
        entries_ok = True
        for t, pi in zip(grid, traj.policies):
            if t >= 1:
                up, lo = bl.sigma_entry_bounds(reg, consts, dpsi, t)
                entries_ok &= bool(np.all(pi <= up * (1 + 1e-9)) and np.all(pi >= lo * (1 - 1e-9)))
        passed = abs(fit.slope / expected - 1) <= 0.15 and entries_ok
        ok &= passed
        details.append(f"sigma={sigma} slope={fit.slope:.3f} (theory {expected:.3f}) entries={'ok' if entries_ok else 'violated'}")
    record(7, ok, "; ".join(details))
    assert ok


def test_criterion_8_overall_error():
    mdp = bandit3()
    structure = optimal_structure(mdp)
    unif = uniform_policy(mdp)
    consts = bl.BoundConstants.for_flow(mdp, unif, structure)
    c_unif, _ = bl.unif_constant(mdp, structure)
    etas = np.geomspace(0.1, 4.0, 12)
    ks = [2**p for p in range(4, 13)]
    cells = violations = 0
    gaps = {}
    for eta in etas:
        for k in ks:
            tau = math.sqrt(2 * consts.delta / (eta * k))
            if tau > 1 or eta * tau > 1 - mdp.gamma:
                continue
            run = npg_run_regularized(mdp, eta, tau, k)
            gap = suboptimality_gap(mdp, np.exp(run.log_policies[k]), structure)
            bound = bl.thm61_overall(consts, k - 1, eta, tau, cen_constant(mdp, eta, tau, unif), c_unif)
            cells += 1
            violations += gap > bound + bl.certificate_tolerance(mdp.r_inf)
            gaps[eta, k] = gap
    worst_factor = 0.0
    for eta in etas:
        observed = gaps[eta, 4096] / gaps[eta, 64]
        predicted = math.exp(-math.sqrt(consts.delta * eta / 2) * (math.sqrt(4096) - math.sqrt(64)))
        worst_factor = max(worst_factor, abs(math.log(observed / predicted)))
    ok = cells >= 100 and violations == 0 and worst_factor <= math.log(10)
    record(8, ok, f"{cells} cells, {violations} violations; worst scaling mismatch factor {math.exp(worst_factor):.2f} (limit 10)")
    assert ok


def test_criterion_9_structural_identities():
    rng = np.random.default_rng(9)
    worst = {}

    def note(key, value):
        worst[key] = max(worst.get(key, 0.0), value)

    for mdp in (fig1_twocycle(0.9), bandit3(), garnet(5, 3, 3, gamma=0.8, seed=0)):
        structure = optimal_structure(mdp)
        n_s, n_a = mdp.n_states, mdp.n_actions
        for _ in range(100):
            p1 = random_policy(rng, n_s, n_a, floor=1e-3)
            p2 = random_policy(rng, n_s, n_a, floor=1e-3)
            o1, o2 = occupancy_of(mdp, p1), occupancy_of(mdp, p2)
            dk = kakade_divergence(mdp, p1, p2)
            ckl = conditional_kl(o1, o2)
            note("pullback", abs(dk - ckl))
            note("decomposition", abs(ckl - (kl_divergence(o1.nu, o2.nu) - kl_divergence(o1.d, o2.d))))
            lhs, rhs = performance_difference(mdp, p1, p2)
            note("performance difference", abs(lhs - rhs))
            tau = float(rng.uniform(0.05, 2.0))
            gap = suboptimality_gap(mdp, solve_entropy_regularized(mdp, p2, tau).policy, structure)
            dk_star = kakade_divergence(mdp, max_entropy_optimal_policy(mdp, p2, structure), p2)
            note("regularization sandwich", max(0.0, -gap, gap - tau * dk_star))
            lip_lhs, lip_rhs = bl.lipschitz_check(mdp, p1, p2)
            note("lipschitz", max(0.0, lip_lhs - lip_rhs))
            note("centering", float(np.abs(np.sum(p1 * evaluate_policy(mdp, p1).adv, axis=1)).max()))
            note("polytope", float(np.abs(polytope_residual(mdp, o1.nu)).max()))
    ok = all(v <= 1e-10 for v in worst.values())
    record(9, ok, "; ".join(f"{k} {v:.1e}" for k, v in worst.items()))
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
