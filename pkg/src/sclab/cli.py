"""Command-line front end: ``sclab <command> [options]``."""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import Config, load_config
from .energy import ALPHA, CoordinateX, TabulatedFunction, energy_D, energy_report, restrict
from .errors import CapacityError, InvalidInputError, SCLabError, SolverError
from .exact import DEFAULT_CAP
from .geometry import MAX_BALL_NODES, MAX_LEVEL, cell_graph, vertex_graph, write_graph
from .identities import timed_identities
from .resistance import (BETA_BOUNDS, RHO_BOUNDS, RHO_LITERATURE, RHO_SOFT, beta_star,
                         cell_resistances, corner_resistances, estimate_rho, exact_corner_values,
                         gamma_of, series_csv, vinfty_scaling)
from .solver import solution_csv
from .special import RATIONAL_CAP, GoodFunction, good_function_limit, harmonic_un
from .verify import (approx_local, besov_blowup, critical_exponent, equivalence_EvsFrakE,
                     harnack_ratios, holder_vertex, indicator_cell, monotonicity_B,
                     monotonicity_a, random_cells)

SUITES = ("monotonicity", "harnack", "equivalence", "holder", "blowup", "local")


def provenance(cfg: Config) -> dict:
    return {"config_hash": cfg.digest(), "version": __version__,
            "caps": {"vertex_level": MAX_LEVEL["vertex"], "cell_level": MAX_LEVEL["cell"],
                     "rational_level": RATIONAL_CAP, "exact_nodes": DEFAULT_CAP,
                     "ball_nodes": MAX_BALL_NODES}}


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def emit(name: str, payload: dict, cfg: Config, fmt: str, csv_text: str | None = None) -> None:
    payload = dict(payload)
    payload["provenance"] = provenance(cfg)
    if fmt == "csv" and csv_text is not None:
        text, ext = csv_text, "csv"
    else:
        text, ext = json.dumps(_clean(payload), indent=2, sort_keys=True) + "\n", "json"
    out = cfg.output_dir()
    if out is None:
        sys.stdout.write(text)
        return
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{name}.{ext}"
    path.write_text(text)
    print(path)


def rho_for(cfg: Config, n_max: int | None = None) -> float:
    if cfg.rho is not None:
        return cfg.rho
    n_max = max(3, min(n_max or cfg.level, 6))
    rv = corner_resistances(n_max, tol=cfg.tol, method=cfg.method, threads=cfg.threads,
                            maxiter=cfg.maxiter)["R_V"]
    return estimate_rho(rv).rho_hat


# -- commands ----------------------------------------------------------------------


def cmd_graph(cfg: Config, args) -> int:
    build = vertex_graph if args.kind == "vertex" else cell_graph
    g = build(cfg.level, args.mode)
    out = cfg.output_dir() or Path(".")
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{args.kind}_{args.mode}_{cfg.level}.txt"
    write_graph(g, path)
    print(json.dumps({"file": str(path), "nodes": g.node_count, "edges": g.edge_count,
                      "kind": args.kind, "mode": args.mode, "level": cfg.level}, sort_keys=True))
    return 0


def cmd_resistance(cfg: Config, args) -> int:
    n_max = cfg.level
    corner = corner_resistances(n_max, tol=cfg.tol, method=cfg.method, threads=cfg.threads,
                                maxiter=cfg.maxiter)
    cells = cell_resistances(n_max, tol=cfg.tol, method=cfg.method, threads=cfg.threads,
                             maxiter=cfg.maxiter)
    series = [*corner.values(), *cells.values()]
    payload: dict = {"series": [s.to_dict() for s in series]}
    checks = {
        "R_V <= R(p1,p5)": all(a <= b * (1 + 1e-9) for a, b in zip(corner["R_V"].values, corner["R_p1p5"].values)),
    }
    if n_max >= 3:
        est_v = estimate_rho(corner["R_V"])
        est_c = estimate_rho(cells["N_0_1"])
        payload["estimate"] = est_v.to_dict()
        payload["estimate_cells"] = est_c.to_dict()
        payload["estimate_differenced"] = {
            "R_V": estimate_rho(corner["R_V"], differenced=True).rho_hat,
            "N_0_1": estimate_rho(cells["N_0_1"], differenced=True).rho_hat}
        payload["windows"] = {"rho_bounds": RHO_BOUNDS, "rho_soft": RHO_SOFT,
                              "rho_literature": RHO_LITERATURE, "beta_bounds": BETA_BOUNDS}
        checks["rho in [7/6, 3/2]"] = est_v.in_bounds
        checks["beta* in bounds"] = BETA_BOUNDS[0] <= est_v.beta_star_hat <= BETA_BOUNDS[1]
    else:
        payload["estimate"] = "refused: fewer than 3 levels"
    oracle = {}
    for n in range(1, min(n_max, 2) + 1):
        exact = exact_corner_values(n)
        computed = {s.quantity: s.value(n) for s in series}
        oracle[str(n)] = {k: {"exact": f"{v.numerator}/{v.denominator}",
                              "rel_err": abs(computed[k] - float(v)) / float(v)}
                          for k, v in exact.items()}
    payload["oracle"] = oracle
    payload["checks"] = checks
    # the corner-versus-cell comparison is reported level by level; it is
    # false at small levels (exact counterexample at n = 1), so it does not
    # drive the exit status
    payload["corner_vs_cell"] = {
        name: [a <= b * (1 + 1e-9) for a, b in zip(corner[c].values, cells[w].values)]
        for name, c, w in (("R(p0,p1) <= N(0^n,1^n)", "R_p0p1", "N_0_1"),
                           ("R(p1,p5) <= N(1^n,5^n)", "R_p1p5", "N_1_5"),
                           ("R(p0,p4) <= N(0^n,4^n)", "R_p0p4", "N_0_4"))}
    emit("resistance", payload, cfg, args.format, series_csv(series))
    return 0 if all(checks.values()) else 1


def cmd_identities(cfg: Config, args) -> int:
    top = args.max_rational
    checks, elapsed = timed_identities(max_level=top, seed=cfg.seed, corrupt=args.corrupt)
    for c in checks:
        if c.skipped:
            print(f"warning: {c.name} skipped ({c.got})", file=sys.stderr)
        print(c.line())
    print(f"{sum(c.ok for c in checks)}/{len(checks)} identities hold ({elapsed:.1f} s)")
    return 0 if all(c.ok for c in checks) else 1


def run_suite(name: str, cfg: Config, rho: float) -> tuple[dict, bool]:
    """Returns the report and whether its hard assertions hold (finite
    ratios, inequalities with a proven direction)."""
    bstar = beta_star(rho)
    n_max = min(cfg.level, 6)
    if name == "monotonicity":
        top = harmonic_un(n_max, tol=cfg.tol, method=cfg.method, maxiter=cfg.maxiter).u
        reports = [monotonicity_a(top, rho, n_max, label="u_n"),
                   monotonicity_a(GoodFunction(), rho, n_max, label="U"),
                   monotonicity_B([random_cells(n, cfg.seed + 1000 * n + s)
                                   for n in range(2, min(n_max, 5) + 1) for s in range(20)],
                                  rho, label="random"),
                   monotonicity_B([indicator_cell(n, 0) for n in range(2, 4)], rho, label="indicator")]
        hard = all(math.isfinite(r) for rep in reports for r in rep.ratios)
        return {"reports": [r.to_dict() for r in reports]}, hard
    if name == "harnack":
        levels = list(range(3, max(3, n_max) + 1))
        harmonic = {n: harmonic_un(n, tol=cfg.tol, method=cfg.method, maxiter=cfg.maxiter).u
                    for n in levels}
        rep = harnack_ratios(levels, [(1 / 6, 1 / 6), (1 / 2, 1 / 6), (1 / 3, 1 / 3)], 1 / 6,
                             delta=0.5, draws=20, seed=cfg.seed, tol=cfg.tol, method=cfg.method,
                             harmonic=harmonic)
        return rep.to_dict(), all(math.isfinite(r) and r >= 1 for r in rep.ratios)
    if name == "equivalence":
        u5 = harmonic_un(min(5, n_max), tol=cfg.tol, method=cfg.method, maxiter=cfg.maxiter).u
        betas = [ALPHA + 0.05, (ALPHA + bstar) / 2, bstar - 0.05]
        n = min(4, u5.level - 1)
        reps = [equivalence_EvsFrakE(GoodFunction(), betas, n, quad_depth=5, label="U"),
                equivalence_EvsFrakE(u5, betas, n, quad_depth=u5.level, label="u_5")]
        return {"reports": [r.to_dict() for r in reps]}, all(
            math.isfinite(r) and r > 0 for rep in reps for r in rep.ratios)
    if name == "holder":
        u = harmonic_un(min(5, n_max), tol=cfg.tol, method=cfg.method, maxiter=cfg.maxiter).u
        est = holder_vertex(u)
        return {"theta_hat": est.theta, "embedding_exponent": (bstar - ALPHA) / 2,
                **est.to_dict()}, math.isfinite(est.theta)
    if name == "blowup":
        u = harmonic_un(min(5, n_max), tol=cfg.tol, method=cfg.method, maxiter=cfg.maxiter).u
        reps = [besov_blowup(GoodFunction(), bstar + 0.1, n_max, label="U"),
                besov_blowup(CoordinateX(), 2.3, n_max, label="x"),
                besov_blowup(u, bstar + 0.1, u.level, label="u_n")]
        return {"reports": [r.to_dict() for r in reps]}, all(r.passed for r in reps)
    if name == "local":
        b_u = critical_exponent(6 / 7)
        rep_u = approx_local(None, b_u, [b_u - 0.1 * 2.0**-k for k in range(6)],
                             growth=6 / 7, label="U")
        u = harmonic_un(min(5, n_max), tol=cfg.tol, method=cfg.method, maxiter=cfg.maxiter).u
        rep_h = approx_local(lambda n: energy_D(restrict(u, n)), bstar,
                             [bstar - 0.1 * 2.0**-k for k in range(6)], n_max=u.level,
                             assert_window=False, label="u_n")
        return {"reports": [rep_u.to_dict(), rep_h.to_dict()]}, all(
            math.isfinite(r) for r in rep_u.ratios + rep_h.ratios)
    raise InvalidInputError(f"unknown suite {name!r}")


def cmd_verify(cfg: Config, args) -> int:
    rho = rho_for(cfg)
    names = SUITES if args.suite == "all" else (args.suite,)
    status = 0
    for name in names:
        report, hard = run_suite(name, cfg, rho)
        report["rho"] = rho
        report["hard_assertions_hold"] = hard
        emit(f"verify_{name}", report, cfg, args.format)
        status |= 0 if hard else 1
    return status


def cmd_energy(cfg: Config, args) -> int:
    rho = rho_for(cfg)
    beta = args.beta if args.beta is not None else (ALPHA + beta_star(rho)) / 2
    if args.function == "good":
        u = GoodFunction()
    elif args.function == "x":
        u = CoordinateX()
    else:
        u = TabulatedFunction(harmonic_un(cfg.level, tol=cfg.tol, method=cfg.method,
                                          maxiter=cfg.maxiter).u)
    rep = energy_report(u, cfg.level, beta, rho)
    emit(f"energy_{args.function}", rep.to_dict(), cfg, args.format, rep.to_csv())
    return 0


def cmd_good_function(cfg: Config, args) -> int:
    fam = good_function_limit(cfg.level, tol=cfg.tol, rho=cfg.rho, method=cfg.method,
                              maxiter=cfg.maxiter)
    payload = {"levels": [m.level for m in fam.members],
               "resistance": [m.resistance for m in fam.members],
               "energy": [m.energy() for m in fam.members],
               "solver": [m.report.to_dict() for m in fam.members],
               "sup_differences": fam.sup_differences, "region": fam.region,
               "a_values": fam.a_values, "a_max_over_min": fam.a_ratio, "rho": fam.rho}
    top = fam.members[-1].u
    emit("good_function", payload, cfg, args.format, solution_csv(top.graph, top.values))
    return 0


def cmd_green(cfg: Config, args) -> int:
    z = tuple(int(v) for v in args.center.split(","))
    radii = [int(v) for v in args.radii.split(",")]
    res = vinfty_scaling(z, radii, tol=cfg.tol, method=cfg.method)
    rho = rho_for(cfg)
    target = gamma_of(rho)
    payload = {**res.series().to_dict(), **res.to_dict(), "rho_hat": rho,
               "beta_star_hat": beta_star(rho), "gamma_target": target,
               "relative_gap": abs(res.gamma_hat - target) / target}
    lines = ["radius,green,resistance,nodes"] + [
        f"{r},{g!r},{q!r},{k}" for r, g, q, k in zip(res.radii, res.green, res.resistance, res.nodes)]
    emit("green", payload, cfg, args.format, "\n".join(lines) + "\n")
    return 0


# -- parser ------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value configuration file")
    common.add_argument("--level", type=int, help="level (or maximal level)")
    common.add_argument("--tol", type=float, help="relative residual tolerance")
    common.add_argument("--maxiter", type=int, help="iteration cap for CG")
    common.add_argument("--threads", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--rho", type=float, help="override the fitted scaling factor")
    common.add_argument("--out", help="output directory (else $SCLAB_OUT, else stdout)")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--method", choices=("cg", "direct"))

    p = argparse.ArgumentParser(prog="sclab", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("graph", parents=[common], help="export a vertex or cell graph")
    g.add_argument("--kind", choices=("vertex", "cell"), default="vertex")
    g.add_argument("--mode", choices=("sc", "cross"), default="sc")
    g.set_defaults(func=cmd_graph)

    sub.add_parser("resistance", parents=[common],
                   help="resistance series and rho estimate").set_defaults(func=cmd_resistance)

    i = sub.add_parser("identities", parents=[common], help="exact rational identity suite")
    i.add_argument("--max-rational", type=int, default=8)
    i.add_argument("--corrupt", action="store_true", help="negative control: perturb one weight")
    i.set_defaults(func=cmd_identities)

    v = sub.add_parser("verify", parents=[common], help="ratio reports")
    v.add_argument("--suite", default="all", help=f"one of {', '.join(SUITES)}, or all")
    v.set_defaults(func=cmd_verify)

    e = sub.add_parser("energy", parents=[common], help="energy table for a test function")
    e.add_argument("--function", choices=("good", "x", "harmonic"), default="good")
    e.add_argument("--beta", type=float)
    e.set_defaults(func=cmd_energy)

    sub.add_parser("good-function", parents=[common],
                   help="harmonic family u_n and its diagnostics").set_defaults(func=cmd_good_function)

    gr = sub.add_parser("green", parents=[common], help="Green function scaling on V_inf")
    gr.add_argument("--center", default="0,0", help="doubled coordinates, e.g. 0,0")
    gr.add_argument("--radii", default="3,9,27,81")
    gr.set_defaults(func=cmd_green)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "verify" and args.suite not in (*SUITES, "all"):
        parser.error(f"unknown suite {args.suite!r}")
    try:
        cfg = load_config(args.config, level=args.level, tol=args.tol, maxiter=args.maxiter,
                          threads=args.threads, seed=args.seed, rho=args.rho, out=args.out,
                          method=args.method)
        if args.command == "graph" and cfg.level > MAX_LEVEL[args.kind]:
            raise CapacityError(f"level {cfg.level} exceeds the {args.kind} cap {MAX_LEVEL[args.kind]}")
        return args.func(cfg, args)
    except (InvalidInputError, CapacityError) as exc:
        print(f"sclab: error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"sclab: solver failed: {exc}", file=sys.stderr)
        return 3
    except SCLabError as exc:
        print(f"sclab: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
