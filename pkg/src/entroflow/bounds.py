"""Constants, inequality certificates and rate fits for flows and NPG runs."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .geometry import kakade_divergence, kakade_projection, occupancy_of, state_kl
from .mdp import (
    MdpInstance,
    OptimalStructure,
    evaluate_policy,
    optimal_structure,
    reward_of,
    suboptimality_gap,
    uniform_policy,
)
from .regularized import SigmaRegularizer, max_entropy_optimal_policy, solve_entropy_regularized


class DegenerateGapError(ValueError):
    """Every action is optimal in every state, so Delta is infinite."""


def certificate_tolerance(r_inf: float) -> float:
    return 1e-9 * (1.0 + r_inf)


def _per_state_divergence(mdp: MdpInstance, pi1: np.ndarray, pi2: np.ndarray) -> np.ndarray:
    """D_K(pi1, pi2) for every point mass initial distribution."""
    out = np.empty(mdp.n_states)
    for s in range(mdp.n_states):
        mu = np.zeros(mdp.n_states)
        mu[s] = 1.0
        out[s] = kakade_divergence(MdpInstance(mdp.transition, mdp.reward, mdp.gamma, mu), pi1, pi2)
    return out


@dataclass(frozen=True)
class BoundConstants:
    gamma: float
    n_states: int
    delta: float
    r_inf: float
    dk_star: float  # D_K(pi*, pi0) under mu
    dk_star_sup: float  # max over point-mass initial distributions
    per_state: bool  # use dk_star_sup wherever a divergence constant appears
    min_dstar: float
    min_offmass_star: float  # min over s, a not optimal of d*(s) pi0(a|s)
    pi_star: np.ndarray = field(repr=False)
    pi0: np.ndarray = field(repr=False)
    adv_star: np.ndarray = field(repr=False)
    optimal: np.ndarray = field(repr=False)

    @classmethod
    def for_flow(
        cls,
        mdp: MdpInstance,
        pi0: np.ndarray,
        structure: OptimalStructure | None = None,
        per_state: bool = False,
    ) -> "BoundConstants":
        structure = optimal_structure(mdp) if structure is None else structure
        if not structure.delta_finite:
            raise DegenerateGapError("every action is optimal; the gap constant is infinite")
        pi_star = max_entropy_optimal_policy(mdp, pi0, structure)
        d_star = occupancy_of(mdp, pi_star).d
        off = structure.suboptimal
        return cls(
            gamma=mdp.gamma,
            n_states=mdp.n_states,
            delta=structure.delta,
            r_inf=mdp.r_inf,
            dk_star=kakade_divergence(mdp, pi_star, pi0),
            dk_star_sup=float(_per_state_divergence(mdp, pi_star, pi0).max()),
            per_state=per_state,
            min_dstar=float(d_star.min()),
            min_offmass_star=float(np.min((d_star[:, None] * pi0)[off])),
            pi_star=pi_star,
            pi0=np.asarray(pi0, dtype=float),
            adv_star=structure.bundle.adv,
            optimal=structure.optimal_actions,
        )

    @property
    def dk(self) -> float:
        return self.dk_star_sup if self.per_state else self.dk_star

    @property
    def c_flow(self) -> float:
        return self.dk / (1.0 - self.gamma)

    def c_npg(self, eta: float) -> float:
        return (self.dk + 2.0 * eta * self.r_inf / (1.0 - self.gamma)) / (1.0 - self.gamma)

    def offmass(self, d: np.ndarray) -> float:
        """min_s d(s) * sum of pi0 over the suboptimal actions of s."""
        return float(np.min(d * np.sum(np.where(self.optimal, 0.0, self.pi0), axis=1)))

    def summary(self) -> dict:
        keys = ("gamma", "n_states", "delta", "r_inf", "dk_star", "dk_star_sup", "per_state", "min_dstar", "min_offmass_star")
        out = {k: getattr(self, k) for k in keys}
        out["c_flow"] = self.c_flow
        return out


def _require_gap(consts: BoundConstants) -> None:
    if not math.isfinite(consts.delta):
        raise DegenerateGapError("every action is optimal; the gap constant is infinite")


def _exp(x: float) -> float:
    return math.exp(x) if x < 709.0 else math.inf


# Flow bounds


def thm42_bounds(consts: BoundConstants, t: float, offmass: float) -> tuple[float, float]:
    """Exponential value sandwich of the flow at time t >= 1.

    ``offmass`` is min_s d^{pi_t}(s) sum_{a suboptimal} pi0(a|s).
    """
    _require_gap(consts)
    if t < 1:
        raise ValueError("bound requires t >= 1")
    c, delta, r = consts.c_flow, consts.delta, consts.r_inf
    upper = 2.0 * r / (1.0 - consts.gamma) * _exp(-delta * (t - 1) + c * math.log(t))
    lower = delta * offmass * _exp(-delta * (t - 1) - consts.gamma * c * math.log(t) - 2.0 * r)
    return upper, lower


def thm44_bounds(consts: BoundConstants, t: float) -> tuple[float | None, float]:
    """Sandwich on D_K(pi*, pi_t); the upper value is None while x >= 1."""
    _require_gap(consts)
    if t < 1:
        raise ValueError("bound requires t >= 1")
    c, delta = consts.c_flow, consts.delta
    x = _exp(-delta * (t - 1) + c * math.log(t))
    upper = x / (1.0 - x) if x < 1.0 else None
    lower = consts.min_offmass_star * _exp(-delta * (t - 1) - consts.gamma * c * math.log(t) - 2.0 * consts.r_inf)
    return upper, lower


def flow_advantage_bounds(consts: BoundConstants, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Sublinear advantage envelope A* + D/t and A* - gamma D/t (t > 0)."""
    return consts.adv_star + consts.dk / t, consts.adv_star - consts.gamma * consts.dk / t


def flow_entry_log_bounds(consts: BoundConstants, t: float) -> tuple[np.ndarray, np.ndarray]:
    """log of the entrywise policy envelopes for t >= 1 measured from pi0."""
    if t < 1:
        raise ValueError("bound requires t >= 1")
    scale = 1.0 / (1.0 - consts.gamma)
    log0 = np.log(consts.pi0)
    a, d, r = consts.adv_star, consts.dk, consts.r_inf
    upper = log0 + scale * (a * (t - 1) + d * math.log(t) + 2.0 * r)
    lower = log0 + scale * (a * (t - 1) - consts.gamma * d * math.log(t) - 2.0 * r)
    return upper, lower


def fit_window_start(consts: BoundConstants, initial_gap: float, t_max: float = 1e6) -> float:
    """Time from which on the value upper bound stays below 10% of the initial gap."""
    target = 0.1 * initial_gap
    c, delta = consts.c_flow, consts.delta
    scale = 2.0 * consts.r_inf / (1.0 - consts.gamma)

    def log_excess(t):
        return math.log(scale) - delta * (t - 1) + c * math.log(t) - math.log(target)

    peak = max(1.0, c / delta)  # the bound increases before this time and decreases after
    if log_excess(peak) <= 0:
        return 1.0
    lo, hi = peak, 2.0 * peak
    while log_excess(hi) > 0:
        lo, hi = hi, 2.0 * hi
        if hi > t_max:
            raise ValueError("upper bound never drops below 10% of the initial gap")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if log_excess(mid) > 0 else (lo, mid)
    return hi


# NPG bounds


def thm47_bounds(consts: BoundConstants, k: int, eta: float, offmass: float) -> tuple[float, float]:
    _require_gap(consts)
    if k < 1:
        raise ValueError("bound requires k >= 1")
    c, delta, r = consts.c_npg(eta), consts.delta, consts.r_inf
    decay = -delta * eta * (k - 1)
    upper = 2.0 * r / (1.0 - consts.gamma) * _exp(decay + c * math.log(k) + c)
    lower = delta * offmass * _exp(decay - c * math.log(k) - c - 4.0 * eta * r / (1.0 - consts.gamma))
    return upper, lower


def npg_value_bound(consts: BoundConstants, k: int, eta: float) -> float:
    """Sublinear bound on V*(s) - V^{pi_k}(s)."""
    return (consts.dk + 2.0 * eta * consts.r_inf / (1.0 - consts.gamma)) / (eta * k)


def npg_entry_log_bounds(consts: BoundConstants, k: int, eta: float) -> tuple[np.ndarray, np.ndarray]:
    if k < 1:
        raise ValueError("bound requires k >= 1")
    c = consts.c_npg(eta)
    scale = eta / (1.0 - consts.gamma)
    log0 = np.log(consts.pi0)
    ratio = consts.r_inf / (1.0 - consts.gamma)
    upper = log0 + consts.adv_star * scale * (k - 1) + c * math.log(k) + c + 2.0 * eta * ratio
    lower = log0 + consts.adv_star * scale * k - c * math.log(k) - c - 4.0 * eta * ratio
    return upper, lower


# Regularized NPG and the overall error


def unif_constant(mdp: MdpInstance, structure: OptimalStructure | None = None) -> tuple[float, float]:
    """D_K(pi*, uniform) for the projection of the uniform policy onto the
    optimal policies, and the closed form sum_s d*(s) log(|A| / |A*_s|)
    which assumes the projection is uniform on optimal actions."""
    structure = optimal_structure(mdp) if structure is None else structure
    unif = uniform_policy(mdp)
    pi_star = kakade_projection(mdp, unif, structure.optimal_actions)
    d_star = occupancy_of(mdp, pi_star).d
    counts = structure.optimal_actions.sum(axis=1)
    closed = float(d_star @ np.log(mdp.n_actions / counts))
    return kakade_divergence(mdp, pi_star, unif), closed


def thm61_overall(
    consts: BoundConstants,
    k: int,
    eta: float,
    tau: float,
    cen_c: float,
    c_unif: float,
) -> float:
    """Upper bound on R* - R(pi_{k+1}) for regularized NPG with the uniform reference."""
    _require_gap(consts)
    if not 0 < tau <= 1:
        raise ValueError("tau must lie in (0, 1]")
    if not 0 < eta <= (1.0 - consts.gamma) / tau * (1.0 + 1e-12):
        raise ValueError("stepsize must satisfy 0 < eta <= (1 - gamma) / tau")
    if k < 1:
        raise ValueError("k must be >= 1")
    r, g = consts.r_inf, consts.gamma
    first = 2.0 * r * math.exp(consts.delta) / (1.0 - g) * tau ** (-c_unif) * _exp(-consts.delta / tau)
    second = 2.0 * consts.n_states * r * math.sqrt(cen_c) / (1.0 - g) / math.sqrt(tau) * math.exp(-eta * tau * (k - 1) / 2)
    return first + second


def regularization_gap_report(mdp: MdpInstance, pi0: np.ndarray, tau_grid, structure=None) -> "BoundReport":
    """0 <= R* - R(pi*_tau) <= tau D_K(pi*, pi0) on a grid of strengths.

    The crossover strength below which the exponential estimate beats the
    linear one is stored in ``extras``.
    """
    structure = optimal_structure(mdp) if structure is None else structure
    consts = BoundConstants.for_flow(mdp, pi0, structure)
    tol = certificate_tolerance(mdp.r_inf)
    rows = []
    crossover = None
    for tau in sorted(tau_grid, reverse=True):
        sol = solve_entropy_regularized(mdp, pi0, tau)
        gap = suboptimality_gap(mdp, sol.policy, structure)
        rows.append(BoundRow("regularization_gap", tau, gap, tau * consts.dk_star, 0.0, tol))
        if tau <= 1:
            upper, _ = thm42_bounds(consts, 1.0 / tau, 0.0)
            if upper < tau * consts.dk_star and crossover is None:
                crossover = tau
    report = BoundReport(consts.summary(), rows)
    report.extras["exponential_beats_linear_below"] = crossover
    return report


prop23_check = regularization_gap_report


def lipschitz_check(mdp: MdpInstance, pi1: np.ndarray, pi2: np.ndarray) -> tuple[float, float]:
    """(|R(pi1) - R(pi2)|, |r|_inf / (1 - gamma) * |pi1 - pi2|_1)."""
    lhs = abs(reward_of(mdp, pi1) - reward_of(mdp, pi2))
    return lhs, mdp.r_inf / (1.0 - mdp.gamma) * float(np.abs(pi1 - pi2).sum())


# Projection and gap sandwiches


def projection_sandwich(mdp: MdpInstance, pi: np.ndarray, structure: OptimalStructure) -> tuple[float, float, float]:
    """(lower, D_K(proj, pi), upper) for the Kakade projection of pi onto the optimal policies."""
    proj = kakade_projection(mdp, pi, structure.optimal_actions)
    off = np.sum(np.where(structure.optimal_actions, 0.0, pi), axis=1)
    d_proj = occupancy_of(mdp, proj).d
    m = float(off.max())
    upper = m / (1.0 - m) if m < 1 else math.inf
    return float(d_proj @ off), kakade_divergence(mdp, proj, pi), upper


def gap_sandwich(mdp: MdpInstance, pi: np.ndarray, structure: OptimalStructure) -> tuple[float, float, float]:
    """(lower, R* - R(pi), upper) in terms of the suboptimal occupancy mass."""
    nu = occupancy_of(mdp, pi).nu
    mass = float(nu[structure.suboptimal].sum())
    gap = suboptimality_gap(mdp, pi, structure)
    delta = structure.delta if structure.delta_finite else 0.0
    return delta * mass, gap, 2.0 * mdp.r_inf / (1.0 - mdp.gamma) * mass


# sigma family


def sigma_limit_divergence(reg: SigmaRegularizer, mdp: MdpInstance, pi0: np.ndarray, structure=None) -> float:
    """D_Psi(pi*, pi0) when every state has a single optimal action.

    Then the optimal policy is unique and is the limit of every sigma flow.
    Returns inf where the potential diverges on the boundary.
    """
    structure = optimal_structure(mdp) if structure is None else structure
    if np.any(structure.optimal_actions.sum(axis=1) != 1):
        raise ValueError("the optimal policy is not unique; its sigma projection is not implemented")
    pi_star = structure.optimal_actions.astype(float)
    if reg.sigma >= 2:
        return math.inf
    d = occupancy_of(mdp, pi_star).d
    return float(d @ reg.bregman(pi_star, pi0))


def sigma_entry_bounds(
    reg: SigmaRegularizer, consts: BoundConstants, dpsi: float, t: float
) -> tuple[np.ndarray, np.ndarray]:
    """Entrywise envelopes of the sigma flow for t >= 1; inf / 0 where vacuous."""
    if t < 1:
        raise ValueError("bound requires t >= 1")
    s, g, r = reg.sigma, consts.gamma, consts.r_inf
    a = consts.adv_star
    p0 = consts.pi0 ** (1.0 - s)
    log_t = math.log(t)
    grow = 0.0 if log_t == 0 else dpsi * log_t
    shrink = 0.0 if (g == 0 or log_t == 0) else g * dpsi * log_t
    with np.errstate(invalid="ignore", over="ignore"):
        base_up = (1.0 - s) * ((t - 1) * a + grow + 2.0 * r) / (1.0 - g) + p0
        base_lo = (1.0 - s) * ((t - 1) * a - shrink - 2.0 * r) / (1.0 - g) + p0
        upper = np.where(base_up > 0, np.abs(base_up) ** (-1.0 / (s - 1.0)), np.inf)
        lower = np.where(np.isfinite(base_lo), np.abs(base_lo) ** (-1.0 / (s - 1.0)), 0.0)
    return upper, lower


# Reports


@dataclass
class BoundRow:
    check: str
    x: float  # time t or iteration k
    quantity: float
    upper: float
    lower: float
    tol: float

    @property
    def passed(self) -> bool:
        q = self.quantity
        if not np.isfinite(q):
            return False
        return bool((self.lower - self.tol <= q) and (q <= self.upper + self.tol))


@dataclass
class FitResult:
    slope: float
    intercept: float
    r2: float
    stderr: float
    n_points: int

    def interval(self, z: float = 1.96) -> tuple[float, float]:
        return self.slope - z * self.stderr, self.slope + z * self.stderr


@dataclass
class BoundReport:
    constants: dict
    rows: list = field(default_factory=list)
    fit: FitResult | None = None
    extras: dict = field(default_factory=dict)

    @property
    def failures(self) -> list:
        return [row for row in self.rows if not row.passed]

    @property
    def verdict(self) -> str:
        return "pass" if not self.failures else "fail"

    def checks(self) -> dict:
        """Pass flag per check name."""
        out: dict = {}
        for row in self.rows:
            out[row.check] = out.get(row.check, True) and row.passed
        return out

    def to_dict(self) -> dict:
        return {
            "constants": _jsonable(self.constants),
            "rows": [dict(_jsonable(asdict(r)), passed=r.passed) for r in self.rows],
            "fit": None if self.fit is None else _jsonable(asdict(self.fit)),
            "extras": _jsonable(self.extras),
            "verdict": self.verdict,
        }

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["check", "x", "quantity", "lower", "upper", "tol", "passed"])
            for r in self.rows:
                writer.writerow([r.check, fmt(r.x), fmt(r.quantity), fmt(r.lower), fmt(r.upper), fmt(r.tol), int(r.passed)])


def fmt(x) -> str:
    return "%.17g" % x


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _entry_row(check, x, values, upper, lower, tol):
    """Collapse an entrywise comparison into one row via the worst margin."""
    over = float(np.max(values - upper))
    under = float(np.max(lower - values))
    worst = max(over, under)
    # every envelope vacuous: report the most negative finite margin
    worst = max(worst, -np.finfo(float).max)
    return BoundRow(check, x, worst, 0.0, -math.inf, tol)


def certify_flow(mdp: MdpInstance, traj, consts: BoundConstants, structure=None, tol: float | None = None) -> BoundReport:
    """Check every flow inequality at every grid point of a Kakade trajectory."""
    structure = optimal_structure(mdp) if structure is None else structure
    tol = certificate_tolerance(mdp.r_inf) if tol is None else tol
    rows = []
    v_star = structure.bundle.v
    for i, t in enumerate(traj.times):
        log_pi = traj.log_policies[i]
        pi = np.exp(log_pi)
        gap = traj.reward_gap[i]
        bundle = evaluate_policy(mdp, pi)
        if i > 0:
            rows.append(BoundRow("reward_monotone", t, traj.reward[i] - traj.reward[i - 1], math.inf, 0.0, tol))
        if t <= 0:
            continue
        rows.append(BoundRow("sublinear_value", t, gap, consts.dk_star / t, 0.0, tol))
        rows.append(BoundRow("state_value", t, float(np.max(v_star - bundle.v)), consts.dk / t, 0.0, tol))
        up, lo = flow_advantage_bounds(consts, t)
        rows.append(_entry_row("advantage_envelope", t, bundle.adv, up, lo, tol))
        if t < 1:
            continue
        d = occupancy_of(mdp, pi).d
        upper, lower = thm42_bounds(consts, t, consts.offmass(d))
        rows.append(BoundRow("value_sandwich", t, gap, upper, lower, tol))
        upper44, lower44 = thm44_bounds(consts, t)
        dk = traj.dk_to_pistar[i]
        rows.append(BoundRow("policy_sandwich", t, dk, math.inf if upper44 is None else upper44, lower44, tol))
        log_up, log_lo = flow_entry_log_bounds(consts, t)
        rows.append(_entry_row("entry_envelope", t, log_pi, log_up, log_lo, tol))
    return BoundReport(consts.summary(), rows)


def certify_npg(mdp: MdpInstance, run, consts: BoundConstants, structure=None, tol: float | None = None) -> BoundReport:
    """Check the progress, monotonicity, sublinear and exponential NPG bounds."""
    structure = optimal_structure(mdp) if structure is None else structure
    tol = certificate_tolerance(mdp.r_inf) if tol is None else tol
    eta = run.eta
    rows = []
    lhs, rhs = run.progress(mdp.mu)
    v_star = structure.bundle.v
    for k in range(run.k_max + 1):
        log_pi = run.log_policies[k]
        pi = np.exp(log_pi)
        if k < run.k_max:
            rows.append(BoundRow("progress", k, lhs[k], math.inf, rhs[k], tol))
            rows.append(BoundRow("log_z", k, float(run.log_z[k].min()), math.inf, 0.0, 1e-12))
            rows.append(BoundRow("value_monotone", k, float(np.min(run.values[k + 1] - run.values[k])), math.inf, 0.0, tol))
        if k < 1:
            continue
        bundle = evaluate_policy(mdp, pi)
        bound = npg_value_bound(consts, k, eta)
        rows.append(BoundRow("state_value", k, float(np.max(v_star - bundle.v)), bound, 0.0, tol))
        up = consts.adv_star + bound
        lo = consts.adv_star - consts.gamma * bound
        rows.append(_entry_row("advantage_envelope", k, bundle.adv, up, lo, tol))
        gap = suboptimality_gap(mdp, pi, structure)
        d = occupancy_of(mdp, pi).d
        upper, lower = thm47_bounds(consts, k, eta, consts.offmass(d))
        rows.append(BoundRow("value_sandwich", k, gap, upper, lower, tol))
        log_up, log_lo = npg_entry_log_bounds(consts, k, eta)
        rows.append(_entry_row("entry_envelope", k, log_pi, log_up, log_lo, tol))
    return BoundReport(dict(consts.summary(), eta=eta, c_npg=consts.c_npg(eta)), rows)


def certify_regularized_npg(mdp: MdpInstance, run, cen_c: float, tol: float | None = None) -> BoundReport:
    """Linear contraction of soft Q-functions and log-policies towards pi*_tau."""
    tol = certificate_tolerance(mdp.r_inf) if tol is None else tol
    rate = 1.0 - run.eta * run.tau
    rows = []
    for k in range(run.k_max):
        rows.append(BoundRow("q_contraction", k + 1, run.q_dist[k + 1], cen_c * rate**k, 0.0, tol))
        rows.append(BoundRow("logpi_contraction", k + 1, run.logpi_dist[k + 1], 2 * cen_c / run.tau * rate**k, 0.0, tol))
    return BoundReport({"eta": run.eta, "tau": run.tau, "C": cen_c}, rows)


# Fits


def rate_fit(xs, ys, model: str = "log-linear") -> FitResult:
    """OLS of log(y) against x (log-linear) or log(x) (log-log)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.size < 10:
        raise ValueError("rate fit needs at least 10 paired points")
    if np.any(ys <= 0):
        raise ValueError("rate fit needs positive values")
    if model == "log-linear":
        u = xs
    elif model == "log-log":
        if np.any(xs <= 0):
            raise ValueError("log-log fit needs positive abscissae")
        u = np.log(xs)
    else:
        raise ValueError(f"unknown model {model!r}")
    if np.ptp(u) == 0:
        raise ValueError("degenerate design matrix")
    res = stats.linregress(u, np.log(ys))
    return FitResult(float(res.slope), float(res.intercept), float(res.rvalue**2), float(res.stderr), int(xs.size))


def sigma_rate_fit(traj, sigma: float, window=(10.0, 100.0)) -> FitResult:
    """Log-log slope of the reward gap of a sigma flow; theory gives -1/(sigma - 1)."""
    if traj.sigma is not None and abs(traj.sigma - sigma) > 1e-12:
        raise ValueError("trajectory was produced with a different sigma")
    mask = (traj.times >= window[0]) & (traj.times <= window[1])
    return rate_fit(traj.times[mask], traj.reward_gap[mask], "log-log")


def flow_rate_fit(traj, consts: BoundConstants, span: float = 30.0) -> tuple[FitResult, tuple[float, float]]:
    """Log-linear fit of the flow gap over [t0, t0 + span / Delta], where t0 is
    the first time the value upper bound is below 10% of the initial gap."""
    t0 = fit_window_start(consts, traj.reward_gap[0])
    window = (t0, t0 + span / consts.delta)
    mask = (traj.times >= window[0]) & (traj.times <= window[1])
    return rate_fit(traj.times[mask], traj.reward_gap[mask], "log-linear"), window


def npg_rate_fit(run, mdp: MdpInstance, structure, k_start: int | None = None) -> FitResult:
    """Log-linear fit of the NPG gap over the second half of the run."""
    k_start = run.k_max // 2 if k_start is None else k_start
    ks = np.arange(k_start, run.k_max + 1)
    gaps = np.array([suboptimality_gap(mdp, np.exp(run.log_policies[k]), structure) for k in ks])
    return rate_fit(ks, gaps, "log-linear")
