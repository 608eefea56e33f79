"""Command-line front end: instance generation, runs, certificates and sweeps.

Exit codes: 0 success, 1 usage error, 2 input/output or malformed input,
3 at least one certificate row failed.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import bounds as bl
from .flows import geometric_grid, integrate_kakade_flow, integrate_sigma_flow
from .instances import GENERATORS, generate_instance
from .mdp import InvalidMdpError, load_mdp, optimal_structure, save_mdp, suboptimality_gap, uniform_policy
from .npg import cen_constant, npg_run_regularized, npg_run_unregularized
from .regularized import SigmaRegularizer, solve_entropy_regularized

EXIT_USAGE, EXIT_IO, EXIT_CERT = 1, 2, 3

FLOW_COLUMNS = [
    "t", "reward", "reward_gap", "dk_to_pistar", "dk_to_central_path",
    "upper_bound_thm42", "lower_bound_thm42", "upper_bound_thm44", "lower_bound_thm44",
]
NPG_COLUMNS = [
    "k", "reward", "reward_gap", "log_gap", "min_Z", "q_dist_tau", "logpi_dist_tau",
    "bound_upper", "bound_lower", "progress_lhs", "progress_rhs",
]


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise CliError(f"{self.prog}: error: {message}", EXIT_USAGE)


def fmt(x) -> str:
    return "%.17g" % x


def write_rows(path: Path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def _shared(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mdp", help="MDP JSON file")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int, help="seed for generators and random initial policies")
    p.add_argument("--tol", type=float, help="numerical tolerance (ODE, solver)")
    p.add_argument("--gamma-override", type=float, help="replace the discount of the loaded MDP")
    p.add_argument("--config", help="JSON file with defaults for any flag")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="entroflow", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="generate an instance")
    _shared(p)
    p.add_argument("--kind", choices=sorted(GENERATORS), default="garnet")
    p.add_argument("--params", default="{}", help="JSON object of generator parameters")

    p = sub.add_parser("solve", help="optimal structure and, with --tau, the regularized optimum")
    _shared(p)
    p.add_argument("--tau", type=float)
    p.add_argument("--init", choices=["uniform", "random"], default="uniform")

    for name, helptext in (("flow", "Kakade gradient flow"), ("sigma-flow", "sigma-family gradient flow")):
        p = sub.add_parser(name, help=helptext)
        _shared(p)
        p.add_argument("--t-max", type=float, default=50.0)
        p.add_argument("--n-points", type=int, default=200)
        p.add_argument("--init", choices=["uniform", "random"], default="uniform")
        if name == "flow":
            p.add_argument("--no-central-path", action="store_true")
        else:
            p.add_argument("--sigma", type=float, default=2.0)

    p = sub.add_parser("npg", help="unregularized natural policy gradient")
    _shared(p)
    p.add_argument("--eta", type=float, default=0.5)
    p.add_argument("--k-max", type=int, default=200)
    p.add_argument("--init", choices=["uniform", "random"], default="uniform")

    p = sub.add_parser("npg-reg", help="entropy-regularized NPG with the uniform reference")
    _shared(p)
    p.add_argument("--eta", type=float, default=None)
    p.add_argument("--tau", type=float, default=0.1)
    p.add_argument("--k-max", type=int, default=200)

    p = sub.add_parser("bounds", help="certify all bounds of a flow or NPG run")
    _shared(p)
    p.add_argument("--mode", choices=["flow", "npg"], default="flow")
    p.add_argument("--t-max", type=float, default=50.0)
    p.add_argument("--n-points", type=int, default=200)
    p.add_argument("--eta", type=float, default=0.5)
    p.add_argument("--k-max", type=int, default=200)
    p.add_argument("--init", choices=["uniform", "random"], default="uniform")

    p = sub.add_parser("sweep", help="overall-error sweep of regularized NPG over (eta, k, seed) cells")
    _shared(p)
    p.add_argument("--etas", default="[0.1, 0.5, 1.0]", help="JSON list")
    p.add_argument("--ks", default="[16, 64, 256, 1024]", help="JSON list")
    p.add_argument("--seeds", default=None, help="JSON list of garnet seeds (used when --mdp is absent)")
    p.add_argument("--garnet", default='{"n_states": 6, "n_actions": 3, "branching": 3}', help="JSON garnet parameters")
    p.add_argument("--workers", type=int, default=1)
    return parser


def _read_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}", EXIT_IO) from None
    except json.JSONDecodeError as exc:
        raise CliError(f"malformed JSON in {path}: {exc}", EXIT_IO) from None


def _parse_json_flag(text: str, name: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(f"--{name} is not valid JSON: {exc}", EXIT_USAGE) from None


def parse_args(argv) -> argparse.Namespace:
    """Parse with precedence: explicit flags, then --config values, then defaults."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        config = _read_json(args.config)
        if not isinstance(config, dict):
            raise CliError("config file must hold a JSON object", EXIT_IO)
        subparser = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in subparser._actions}
        cleaned = {k.replace("-", "_"): v for k, v in config.items()}
        unknown = sorted(set(cleaned) - known)
        if unknown:
            raise CliError(f"unknown config keys for {args.command}: {unknown}", EXIT_USAGE)
        subparser.set_defaults(**cleaned)
        args = parser.parse_args(argv)
    return args


def _load(args):
    if not args.mdp:
        raise CliError("--mdp is required for this command", EXIT_USAGE)
    try:
        mdp = load_mdp(args.mdp)
    except OSError as exc:
        raise CliError(f"cannot read {args.mdp}: {exc.strerror}", EXIT_IO) from None
    except json.JSONDecodeError as exc:
        raise CliError(f"malformed JSON in {args.mdp}: {exc}", EXIT_IO) from None
    except InvalidMdpError as exc:
        raise CliError(f"invalid MDP in {args.mdp}: {exc}", EXIT_IO) from None
    if args.gamma_override is not None:
        try:
            mdp = mdp.with_gamma(args.gamma_override)
        except InvalidMdpError as exc:
            raise CliError(str(exc), EXIT_USAGE) from None
    return mdp


def _out_dir(args) -> Path:
    out = Path(args.out or ".")
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(f"cannot create {out}: {exc.strerror}", EXIT_IO) from None
    return out


def _initial_policy(mdp, args):
    if getattr(args, "init", "uniform") == "random":
        if args.seed is None:
            raise CliError("--init random needs --seed", EXIT_USAGE)
        rng = np.random.default_rng(args.seed)
        return rng.dirichlet(np.ones(mdp.n_actions), size=mdp.n_states)
    return uniform_policy(mdp)


def _flow_grid(t_max: float, n_points: int) -> np.ndarray:
    if not t_max > 1 or n_points < 2:
        raise CliError("need --t-max > 1 and --n-points >= 2", EXIT_USAGE)
    early = geometric_grid(1e-3, 1.0, 20)
    late = np.linspace(1.0, t_max, n_points)
    return np.unique(np.concatenate([early, late]))


def _finish(report: bl.BoundReport, out: Path, stem: str) -> int:
    report.write_json(out / f"{stem}_report.json")
    report.write_csv(out / f"{stem}_report.csv")
    print(f"{stem}: verdict {report.verdict} ({len(report.failures)} failed of {len(report.rows)} rows)")
    return 0 if report.verdict == "pass" else EXIT_CERT


def cmd_gen(args) -> int:
    params = _parse_json_flag(args.params, "params")
    try:
        mdp = generate_instance(args.kind, params, args.seed)
    except InvalidMdpError as exc:
        raise CliError(str(exc), EXIT_USAGE) from None
    if args.gamma_override is not None:
        mdp = mdp.with_gamma(args.gamma_override)
    path = _out_dir(args) / f"{args.kind}.json"
    save_mdp(mdp, path)
    print(path)
    return 0


def cmd_solve(args) -> int:
    mdp = _load(args)
    structure = optimal_structure(mdp)
    result = {
        "r_star": structure.r_star,
        "delta": structure.delta if structure.delta_finite else None,
        "optimal_actions": structure.optimal_actions.astype(int).tolist(),
        "v_star": structure.bundle.v.tolist(),
    }
    if args.tau is not None:
        pi0 = _initial_policy(mdp, args)
        sol = solve_entropy_regularized(mdp, pi0, args.tau, tol=args.tol)
        result.update(tau=args.tau, policy=sol.policy.tolist(), residual=sol.residual, iterations=sol.iterations)
    text = json.dumps(result, indent=1)
    print(text)
    if args.out:
        (_out_dir(args) / "solve.json").write_text(text)
    return 0


def _flow_rows(mdp, traj, consts):
    rows = []
    for i, t in enumerate(traj.times):
        nan = float("nan")
        up42 = lo42 = up44 = lo44 = nan
        if t >= 1 and consts is not None:
            d = np.exp(traj.log_policies[i])
            from .geometry import occupancy_of

            up42, lo42 = bl.thm42_bounds(consts, t, consts.offmass(occupancy_of(mdp, d).d))
            up, lo44 = bl.thm44_bounds(consts, t)
            up44 = float("inf") if up is None else up
        rows.append([float(t), traj.reward[i], traj.reward_gap[i], traj.dk_to_pistar[i], traj.dk_to_central[i], up42, lo42, up44, lo44])
    return rows


def cmd_flow(args) -> int:
    mdp = _load(args)
    out = _out_dir(args)
    pi0 = _initial_policy(mdp, args)
    grid = _flow_grid(args.t_max, args.n_points)
    structure = optimal_structure(mdp)
    traj = integrate_kakade_flow(
        mdp, pi0, grid, ode_tol=args.tol or 1e-10, central_path=not args.no_central_path, structure=structure
    )
    consts = bl.BoundConstants.for_flow(mdp, pi0, structure) if structure.delta_finite else None
    write_rows(out / "flow.csv", FLOW_COLUMNS, _flow_rows(mdp, traj, consts))
    if consts is None:
        print("flow: every action is optimal; no bounds to certify")
        return 0
    return _finish(bl.certify_flow(mdp, traj, consts, structure), out, "flow")


def cmd_sigma_flow(args) -> int:
    mdp = _load(args)
    out = _out_dir(args)
    try:
        reg = SigmaRegularizer(args.sigma)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_USAGE) from None
    pi0 = _initial_policy(mdp, args)
    grid = _flow_grid(args.t_max, args.n_points)
    structure = optimal_structure(mdp)
    traj = integrate_sigma_flow(mdp, reg, pi0, grid, ode_tol=args.tol or 1e-10, structure=structure)
    nan = float("nan")
    rows = [[float(t), traj.reward[i], traj.reward_gap[i], traj.dk_to_pistar[i], nan, nan, nan, nan, nan] for i, t in enumerate(traj.times)]
    write_rows(out / "sigma_flow.csv", FLOW_COLUMNS, rows)
    report = bl.BoundReport({"sigma": args.sigma})
    tol = bl.certificate_tolerance(mdp.r_inf)
    for i in range(1, len(grid)):
        report.rows.append(bl.BoundRow("reward_monotone", grid[i], traj.reward[i] - traj.reward[i - 1], math.inf, 0.0, tol))
    if structure.delta_finite and np.all(structure.optimal_actions.sum(axis=1) == 1):
        consts = bl.BoundConstants.for_flow(mdp, pi0, structure)
        dpsi = bl.sigma_limit_divergence(reg, mdp, pi0, structure)
        for i, t in enumerate(grid):
            if t >= 1:
                up, lo = bl.sigma_entry_bounds(reg, consts, dpsi, t)
                with np.errstate(divide="ignore"):
                    report.rows.append(bl._entry_row("sigma_entry_envelope", t, traj.log_policies[i], np.log(up), np.log(lo), tol))
    return _finish(report, out, "sigma_flow")


def _npg_rows(mdp, run, structure, consts, bound_fn):
    rows = []
    lhs, rhs = run.progress(mdp.mu) if run.tau == 0 else (None, None)
    for k in range(run.k_max + 1):
        pi = np.exp(run.log_policies[k])
        gap = suboptimality_gap(mdp, pi, structure)
        min_z = float(np.exp(run.log_z[k]).min()) if run.tau == 0 and k < run.k_max else float("nan")
        up, lo = bound_fn(k, pi)
        pl = lhs[k] if lhs is not None and k < run.k_max else float("nan")
        pr = rhs[k] if rhs is not None and k < run.k_max else float("nan")
        rows.append([k, run.reward[k], gap, math.log(gap) if gap > 0 else float("-inf"), min_z, run.q_dist[k], run.logpi_dist[k], up, lo, pl, pr])
    return rows


def cmd_npg(args) -> int:
    mdp = _load(args)
    out = _out_dir(args)
    if not args.eta > 0 or args.k_max < 1:
        raise CliError("need --eta > 0 and --k-max >= 1", EXIT_USAGE)
    pi0 = _initial_policy(mdp, args)
    structure = optimal_structure(mdp)
    run = npg_run_unregularized(mdp, pi0, args.eta, args.k_max)
    consts = bl.BoundConstants.for_flow(mdp, pi0, structure) if structure.delta_finite else None
    from .geometry import occupancy_of

    def bound_fn(k, pi):
        if k < 1 or consts is None:
            return float("nan"), float("nan")
        return bl.thm47_bounds(consts, k, args.eta, consts.offmass(occupancy_of(mdp, pi).d))

    write_rows(out / "npg.csv", NPG_COLUMNS, _npg_rows(mdp, run, structure, consts, bound_fn))
    if consts is None:
        print("npg: every action is optimal; no bounds to certify")
        return 0
    return _finish(bl.certify_npg(mdp, run, consts, structure), out, "npg")


def cmd_npg_reg(args) -> int:
    mdp = _load(args)
    out = _out_dir(args)
    eta = args.eta if args.eta is not None else 0.5 * (1.0 - mdp.gamma) / args.tau
    try:
        run = npg_run_regularized(mdp, eta, args.tau, args.k_max)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_USAGE) from None
    structure = optimal_structure(mdp)
    unif = uniform_policy(mdp)
    cen_c = cen_constant(mdp, eta, args.tau, unif)
    overall = None
    if structure.delta_finite and args.tau <= 1:
        consts = bl.BoundConstants.for_flow(mdp, unif, structure)
        c_unif, _ = bl.unif_constant(mdp, structure)
        overall = (consts, c_unif)

    def bound_fn(k, pi):
        if overall is None or k < 2:
            return float("nan"), float("nan")
        return bl.thm61_overall(overall[0], k - 1, eta, args.tau, cen_c, overall[1]), float("nan")

    rows = _npg_rows(mdp, run, structure, None, bound_fn)
    write_rows(out / "npg_reg.csv", NPG_COLUMNS, rows)
    report = bl.certify_regularized_npg(mdp, run, cen_c)
    tol = bl.certificate_tolerance(mdp.r_inf)
    for row in rows:
        if math.isfinite(row[7]):
            report.rows.append(bl.BoundRow("overall_error", row[0], row[2], row[7], 0.0, tol))
    return _finish(report, out, "npg_reg")


def cmd_bounds(args) -> int:
    mdp = _load(args)
    out = _out_dir(args)
    pi0 = _initial_policy(mdp, args)
    structure = optimal_structure(mdp)
    try:
        consts = bl.BoundConstants.for_flow(mdp, pi0, structure)
    except bl.DegenerateGapError as exc:
        raise CliError(str(exc), EXIT_USAGE) from None
    if args.mode == "flow":
        traj = integrate_kakade_flow(mdp, pi0, _flow_grid(args.t_max, args.n_points), ode_tol=args.tol or 1e-10, structure=structure)
        report = bl.certify_flow(mdp, traj, consts, structure)
    else:
        run = npg_run_unregularized(mdp, pi0, args.eta, args.k_max)
        report = bl.certify_npg(mdp, run, consts, structure)
    return _finish(report, out, f"bounds_{args.mode}")


def sweep_cell(cell: dict) -> dict:
    """One overall-error cell: regularized NPG at tau = sqrt(2 Delta / (eta k))."""
    mdp = cell["mdp"]
    eta, k = cell["eta"], cell["k"]
    structure = optimal_structure(mdp)
    unif = uniform_policy(mdp)
    consts = bl.BoundConstants.for_flow(mdp, unif, structure)
    tau = math.sqrt(2.0 * consts.delta / (eta * k))
    row = {"seed": cell["seed"], "eta": eta, "k": k, "tau": tau}
    if tau > 1 or eta * tau > 1.0 - mdp.gamma:
        return dict(row, gap=float("nan"), bound=float("nan"), status="skipped")
    run = npg_run_regularized(mdp, eta, tau, k)
    gap = suboptimality_gap(mdp, np.exp(run.log_policies[k]), structure)
    c_unif, _ = bl.unif_constant(mdp, structure)
    bound = bl.thm61_overall(consts, max(k - 1, 1), eta, tau, cen_constant(mdp, eta, tau, unif), c_unif)
    ok = gap <= bound + bl.certificate_tolerance(mdp.r_inf)
    return dict(row, gap=gap, bound=bound, status="pass" if ok else "fail")


def cmd_sweep(args) -> int:
    etas = _parse_json_flag(args.etas, "etas")
    ks = _parse_json_flag(args.ks, "ks")
    out = _out_dir(args)
    if args.mdp:
        instances = [(-1, _load(args))]
    else:
        seeds = _parse_json_flag(args.seeds, "seeds") if args.seeds else [args.seed if args.seed is not None else 0]
        params = _parse_json_flag(args.garnet, "garnet")
        instances = [(s, generate_instance("garnet", params, s)) for s in seeds]
    cells = [{"mdp": m, "seed": s, "eta": float(e), "k": int(k)} for s, m in instances for e in etas for k in ks]
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(sweep_cell, cells))
    else:
        results = [sweep_cell(c) for c in cells]
    columns = ["seed", "eta", "k", "tau", "gap", "bound", "status"]
    write_rows(out / "sweep.csv", columns, [[r[c] for c in columns] for r in results])
    failed = sum(r["status"] == "fail" for r in results)
    print(f"sweep: {len(results)} cells, {failed} failed")
    return EXIT_CERT if failed else 0


COMMANDS = {
    "gen": cmd_gen,
    "solve": cmd_solve,
    "flow": cmd_flow,
    "sigma-flow": cmd_sigma_flow,
    "npg": cmd_npg,
    "npg-reg": cmd_npg_reg,
    "bounds": cmd_bounds,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
        return COMMANDS[args.command](args)
    except CliError as exc:
        print(exc, file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
