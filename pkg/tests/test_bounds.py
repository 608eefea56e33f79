import json
import math

import numpy as np
import pytest

from conftest import random_policy
from entroflow import bounds as bl
from entroflow.flows import geometric_grid, integrate_kakade_flow, integrate_sigma_flow
from entroflow.geometry import occupancy_of
from entroflow.instances import bandit, fig1_twocycle, garnet
from entroflow.mdp import optimal_structure, uniform_policy
from entroflow.npg import npg_run_unregularized
from entroflow.regularized import SigmaRegularizer


@pytest.fixture
def bandit_consts(bandit3):
    return bl.BoundConstants.for_flow(bandit3, uniform_policy(bandit3))


def test_constants_bandit(bandit_consts):
    assert bandit_consts.delta == pytest.approx(0.5)
    assert bandit_consts.dk_star == pytest.approx(math.log(3))
    assert bandit_consts.c_flow == pytest.approx(math.log(3))
    assert bandit_consts.c_npg(0.5) == pytest.approx(math.log(3) + 1.0)


def test_degenerate_gap_refused():
    mdp = bandit((1.0, 1.0))
    with pytest.raises(bl.DegenerateGapError):
        bl.BoundConstants.for_flow(mdp, uniform_policy(mdp))


def test_value_bound_at_one(bandit_consts):
    upper, lower = bl.thm42_bounds(bandit_consts, 1.0, 0.3)
    assert upper == pytest.approx(2.0)
    assert 0 < lower < upper
    with pytest.raises(ValueError):
        bl.thm42_bounds(bandit_consts, 0.5, 0.3)


def test_value_bound_decreasing_after_peak(twocycle):
    consts = bl.BoundConstants.for_flow(twocycle, uniform_policy(twocycle))
    ts = np.linspace(consts.c_flow / consts.delta + 1, 60, 200)
    ups = [bl.thm42_bounds(consts, t, 0.1)[0] for t in ts]
    assert np.all(np.diff(ups) < 0)


def test_value_sandwich_bandit_t10(bandit3, bandit_consts):
    traj = integrate_kakade_flow(bandit3, uniform_policy(bandit3), [0.0, 10.0])
    d = occupancy_of(bandit3, traj.policies[-1]).d
    upper, lower = bl.thm42_bounds(bandit_consts, 10.0, bandit_consts.offmass(d))
    assert lower <= traj.reward_gap[-1] <= upper


def test_policy_bound_applicability(bandit_consts):
    upper, _ = bl.thm44_bounds(bandit_consts, 1.0)
    assert upper is None
    t = 200.0
    upper, _ = bl.thm44_bounds(bandit_consts, t)
    x = math.exp(-bandit_consts.delta * (t - 1) + bandit_consts.c_flow * math.log(t))
    assert upper / x == pytest.approx(1.0, rel=1e-12)


def test_policy_sandwich_bandit_t20(bandit3, bandit_consts):
    traj = integrate_kakade_flow(bandit3, uniform_policy(bandit3), [0.0, 20.0])
    upper, lower = bl.thm44_bounds(bandit_consts, 20.0)
    assert lower <= traj.dk_to_pistar[-1] <= upper


def test_npg_bound_at_one(bandit_consts):
    upper, _ = bl.thm47_bounds(bandit_consts, 1, 0.5, 0.2)
    assert upper == pytest.approx(2.0 * math.exp(bandit_consts.c_npg(0.5)))


def test_npg_certificate_bandit(bandit3, bandit_consts):
    run = npg_run_unregularized(bandit3, uniform_policy(bandit3), 0.5, 200)
    report = bl.certify_npg(bandit3, run, bandit_consts)
    assert report.verdict == "pass"
    assert set(report.checks()) >= {"progress", "value_monotone", "value_sandwich", "entry_envelope"}


def test_npg_slope_bandit(bandit3):
    run = npg_run_unregularized(bandit3, uniform_policy(bandit3), 0.5, 200)
    fit = bl.npg_rate_fit(run, bandit3, optimal_structure(bandit3), k_start=100)
    assert fit.slope == pytest.approx(-0.25, rel=0.1)


def test_unif_constant(small_garnet):
    c, closed = bl.unif_constant(small_garnet)
    assert c <= math.log(small_garnet.n_actions) + 1e-12
    assert c == pytest.approx(closed, abs=1e-10)


def test_overall_bound_limits(bandit_consts):
    first_only = 2.0 * math.exp(0.5) * 0.1 ** (-1.0) * math.exp(-5.0)
    value = bl.thm61_overall(bandit_consts, 10**6, 1.0, 0.1, 0.5, 1.0)
    assert value == pytest.approx(first_only, rel=1e-12)
    with pytest.raises(ValueError):
        bl.thm61_overall(bandit_consts, 5, 1.0, 2.0, 0.5, 1.0)
    with pytest.raises(ValueError):
        bl.thm61_overall(bandit_consts, 5, 20.0, 0.1, 0.5, 1.0)


def test_regularization_gap_grid(bandit3):
    taus = 2.0 ** -np.arange(0, 11)
    report = bl.prop23_check(bandit3, uniform_policy(bandit3), taus)
    assert report.verdict == "pass"
    gaps = [row.quantity for row in sorted(report.rows, key=lambda r: r.x)]
    assert gaps[0] < 1e-100
    crossover = report.extras["exponential_beats_linear_below"]
    assert crossover is not None and 0 < crossover <= 1


def test_lipschitz_pairs(small_garnet, rng):
    for _ in range(100):
        p1 = random_policy(rng, small_garnet.n_states, small_garnet.n_actions)
        p2 = random_policy(rng, small_garnet.n_states, small_garnet.n_actions)
        lhs, rhs = bl.lipschitz_check(small_garnet, p1, p2)
        assert lhs <= rhs + 1e-12


@pytest.mark.parametrize("mdp", [fig1_twocycle(0.9), bandit((1.0, 0.5, 0.0)), garnet(5, 3, 3, seed=1)], ids=["cycle", "bandit", "garnet"])
def test_projection_and_gap_sandwiches(mdp, rng):
    st_ = optimal_structure(mdp)
    for _ in range(100):
        pi = random_policy(rng, mdp.n_states, mdp.n_actions, floor=1e-3)
        lo, mid, hi = bl.projection_sandwich(mdp, pi, st_)
        assert lo - 1e-12 <= mid <= hi + 1e-12
        lo, gap, hi = bl.gap_sandwich(mdp, pi, st_)
        assert lo - 1e-12 <= gap <= hi + 1e-12


def test_sigma_entry_bounds_bandit(bandit3, bandit_consts):
    grid = np.concatenate([[0.0], np.linspace(1, 60, 60)])
    for sigma in (1.5, 2.0, 3.0):
        reg = SigmaRegularizer(sigma)
        traj = integrate_sigma_flow(bandit3, reg, uniform_policy(bandit3), grid)
        dpsi = bl.sigma_limit_divergence(reg, bandit3, uniform_policy(bandit3))
        for t, pi in zip(grid[1:], traj.policies[1:]):
            up, lo = bl.sigma_entry_bounds(reg, bandit_consts, dpsi, t)
            assert np.all(pi <= up * (1 + 1e-9)) and np.all(pi >= lo * (1 - 1e-9))


def test_sigma_limit_divergence_vacuous_for_large_sigma(bandit3):
    assert bl.sigma_limit_divergence(SigmaRegularizer(2.0), bandit3, uniform_policy(bandit3)) == math.inf
    assert math.isfinite(bl.sigma_limit_divergence(SigmaRegularizer(1.5), bandit3, uniform_policy(bandit3)))


def test_rate_fit_synthetic():
    t = np.linspace(0, 5, 20)
    assert bl.rate_fit(t, np.exp(-2 * t)).slope == pytest.approx(-2, abs=1e-10)
    t = np.linspace(1, 50, 20)
    assert bl.rate_fit(t, t**-0.5, "log-log").slope == pytest.approx(-0.5, abs=1e-10)
    noisy = np.exp(-t + np.random.default_rng(0).normal(scale=0.1, size=t.size))
    fit = bl.rate_fit(t, noisy)
    assert 0.9 < fit.r2 < 1.0
    lo, hi = fit.interval()
    assert lo < fit.slope < hi


def test_rate_fit_rejects_bad_input():
    with pytest.raises(ValueError):
        bl.rate_fit(np.arange(5.0), np.ones(5))
    with pytest.raises(ValueError):
        bl.rate_fit(np.ones(12), np.ones(12))
    with pytest.raises(ValueError):
        bl.rate_fit(np.arange(12.0), -np.ones(12))


def test_row_pass_flag():
    assert bl.BoundRow("x", 1.0, 1.0 + 5e-10, 1.0, 0.0, 1e-9).passed
    assert not bl.BoundRow("x", 1.0, 1.0 + 2e-9, 1.0, 0.0, 1e-9).passed
    assert not bl.BoundRow("x", 1.0, float("nan"), 1.0, 0.0, 1e-9).passed
    assert bl.certificate_tolerance(2.0) == pytest.approx(3e-9)


def test_report_serialization(tmp_path, twocycle):
    pi0 = uniform_policy(twocycle)
    consts = bl.BoundConstants.for_flow(twocycle, pi0)
    traj = integrate_kakade_flow(twocycle, pi0, geometric_grid(0.1, 20.0, 30))
    report = bl.certify_flow(twocycle, traj, consts)
    report.write_json(tmp_path / "r.json")
    report.write_csv(tmp_path / "r.csv")
    data = json.loads((tmp_path / "r.json").read_text())
    assert data["verdict"] == "pass"
    assert len(data["rows"]) == len(report.rows)
    assert set(data) >= {"constants", "rows", "verdict"}
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0].startswith("check,x,quantity")
    assert len(lines) == len(report.rows) + 1
