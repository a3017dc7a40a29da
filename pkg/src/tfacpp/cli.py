"""Command-line entry point: generate | solve | eam | analyze | benders-trace."""

from __future__ import annotations

import argparse
import json
import logging
import math
import statistics
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from . import analysis
from .benders import benders_loop
from .colgen import ColgenError, finish_report_csv, mip_finish, run_colgen
from .instance import InstanceError, Instance, dumps_instance, generate_synthetic, load_instance, perturb_demand
from .models import COVER_EQ, COVER_LE, Solution, build_bim_legbased, extract_solution
from .pairing import build_pools
from .solver import Status, solve_lp, solve_mip
from .timespace import build_networks

log = logging.getLogger("tfacpp")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_ITERATION_CAP = 3
EXIT_INFEASIBLE = 4

MODES = ("monolithic", "benders-exact", "benders-empirical", "colgen")


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--instance", type=Path, help="instance JSON file")
    common.add_argument("--out", type=Path, help="output file (generate) or directory")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--tol", type=float, default=1e-6)
    common.add_argument("--demand", choices=("high", "mid", "low"), default="mid")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="tfacpp", description="Integrated fleet assignment and crew planning.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="write a synthetic instance")
    g.add_argument("--stations", type=int, default=4)
    g.add_argument("--families", type=int, default=2)
    g.add_argument("--fleet-types", type=int, default=3)
    g.add_argument("--legs-per-month", type=int, default=20)
    g.add_argument("--months", type=int, default=12)

    s = sub.add_parser("solve", parents=[common], help="solve an instance")
    s.add_argument("--mode", choices=MODES, default="colgen")
    s.add_argument("--cover", choices=(COVER_EQ, COVER_LE), default=None,
                   help="leg cover rows: eq (every leg flown) or le; default le for colgen, eq otherwise")
    s.add_argument("--mip-only", action="store_true", help="monolithic: skip the LP relaxation (no duals)")
    s.add_argument("--dump-network", action="store_true", help="write time-space networks as DOT files")
    s.add_argument("--max-iter", type=int, default=100)
    s.add_argument("--gap", type=float, default=1e-4, help="relative MIP gap")

    e = sub.add_parser("eam", parents=[common], help="compare with equal monthly allocation of crew hours")
    e.add_argument("--max-iter", type=int, default=500)

    a = sub.add_parser("analyze", parents=[common], help="marginal profits and quadrant grouping")
    a.add_argument("--gamma0", type=float, default=None, help="aircraft threshold (default: median)")
    a.add_argument("--beta0", type=float, default=None, help="crew threshold (default: median)")

    b = sub.add_parser("benders-trace", parents=[common], help="exact Benders loop with iteration trace")
    b.add_argument("--max-iter", type=int, default=100)
    b.add_argument("--gap", type=float, default=1e-4)
    return p


def _load(args) -> Instance:
    if args.instance is None:
        raise CliError("--instance is required", EXIT_USAGE)
    try:
        inst = load_instance(args.instance)
    except FileNotFoundError as exc:
        raise CliError(f"cannot read instance: {exc}", EXIT_USAGE) from exc
    except InstanceError as exc:
        raise CliError(f"invalid instance: {exc}", EXIT_INFEASIBLE) from exc
    return perturb_demand(inst, args.demand, args.seed)


def _outdir(args) -> Path:
    if args.out is None:
        raise CliError("--out is required", EXIT_USAGE)
    args.out.mkdir(parents=True, exist_ok=True)
    return args.out


def _write(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8")
    log.info("wrote %s", path)


def _num(v: float) -> Optional[float]:
    return v if isinstance(v, (int, float)) and math.isfinite(v) else None


def solution_to_dict(sol: Solution, mode: str) -> Dict:
    return {
        "mode": mode,
        "status": sol.status,
        "objective": _num(sol.objective),
        "lp_objective": _num(sol.lp_objective),
        "profit": _num(sol.profit),
        "crew_cost": _num(sol.crew_cost),
        "assignment": [{"month": m, "leg": lid, "fleet_type": f} for (m, lid), f in sorted(sol.assignment.items())],
        "crew_time_used": [{"month": m, "family": b, "hours": h} for (m, b), h in sorted(sol.crew_time_used.items())],
        "dropped_legs": [{"month": m, "leg": lid} for m, lid in sol.dropped_legs],
    }


def _duals_json(duals: Dict) -> str:
    return json.dumps({"beta": duals.get("beta", {}), "gamma": duals.get("gamma", {})}, indent=1, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------


def cmd_generate(args) -> int:
    if args.out is None:
        raise CliError("--out is required", EXIT_USAGE)
    try:
        inst = generate_synthetic(args.seed, stations=args.stations, families=args.families,
                                  fleet_types=args.fleet_types, legs_per_month=args.legs_per_month,
                                  months=args.months)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_USAGE) from exc
    args.out.parent.mkdir(parents=True, exist_ok=True)
    _write(args.out, dumps_instance(inst))
    return EXIT_OK


def cmd_solve(args) -> int:
    inst = _load(args)
    out = _outdir(args)
    networks = build_networks(inst)
    if args.dump_network:
        net_dir = out / "networks"
        net_dir.mkdir(exist_ok=True)
        for (m, f), net in sorted(networks.items()):
            _write(net_dir / f"{m}_{f}.dot", net.to_dot())
    cover = args.cover or (COVER_LE if args.mode == "colgen" else COVER_EQ)
    code = EXIT_OK
    duals: Optional[Dict] = None

    if args.mode == "monolithic":
        model = build_bim_legbased(inst, networks, cover=cover)
        res = solve_mip(model, gap=args.gap)
        if res.status is not Status.OPTIMAL:
            raise CliError(f"model is {res.status.value}", EXIT_INFEASIBLE)
        sol = extract_solution(model, res, inst)
        if not args.mip_only:
            lp_model = build_bim_legbased(inst, networks, relax=True, cover=cover)
            lp = solve_lp(lp_model)
            sol.lp_objective = lp.objective
            duals = extract_solution(lp_model, lp, inst).duals
    elif args.mode.startswith("benders"):
        pools = build_pools(inst)
        kind = args.mode.split("-")[1]
        res_b = benders_loop(inst, networks, pools, kind, tol=args.tol, max_iter=args.max_iter, cover=cover,
                             gap=args.gap, threads=args.threads)
        if res_b.status not in ("converged", "iteration_cap"):
            raise CliError(f"master problem is {res_b.status}", EXIT_INFEASIBLE)
        _write(out / "convergence.csv", res_b.trace_csv())
        sol = res_b.solution
        if res_b.status == "iteration_cap":
            code = EXIT_ITERATION_CAP
    else:
        state = run_colgen(inst, networks, tol=args.tol, cover=cover, max_iter=args.max_iter, threads=args.threads)
        if state.status == "iteration_cap":
            _write(out / "convergence.csv", state.trace_csv())
            return EXIT_ITERATION_CAP
        if state.status != "converged":
            raise CliError(f"column generation ended {state.status}", EXIT_INFEASIBLE)
        _write(out / "convergence.csv", state.trace_csv())
        try:
            sol = mip_finish(state, networks, gap=args.gap)
        except ColgenError as exc:
            raise CliError(str(exc), EXIT_INFEASIBLE) from exc
        _write(out / "finish.csv", finish_report_csv(sol.info["finish"]))
        duals = sol.duals
    _write(out / "solution.json", json.dumps(solution_to_dict(sol, args.mode), indent=1) + "\n")
    _write(out / "allocation.csv", analysis.allocation_csv(sol, inst))
    dual_path = out / "duals.json"
    if duals:
        _write(dual_path, _duals_json(duals))
    elif dual_path.exists():
        dual_path.unlink()
    print(f"{args.mode}: status={sol.status} objective={sol.objective!r} lp_objective={sol.lp_objective!r}")
    return code


def cmd_eam(args) -> int:
    inst = _load(args)
    out = _outdir(args)
    networks = build_networks(inst)
    state = run_colgen(inst, networks, tol=args.tol, cover=COVER_LE, max_iter=args.max_iter, threads=args.threads)
    if state.status != "converged":
        raise CliError(f"column generation ended {state.status}", EXIT_ITERATION_CAP)
    eam = analysis.eam_baseline(inst, networks)
    cg_month = {m: state.month_lp_objective(m) for m in inst.months}
    _write(out / "eam.csv", analysis.eam_csv(state.lp_objective, eam, inst, cg_month))
    print(f"cgmp={state.lp_objective!r} eam={eam.profit!r} growth={analysis.growth_rate(state.lp_objective, eam.profit):.4f}%")
    return EXIT_OK


def _threshold(value: Optional[float], points: Sequence[float]) -> float:
    if value is not None:
        return value
    return statistics.median(points) if points else 0.0


def cmd_analyze(args) -> int:
    inst = _load(args)
    out = _outdir(args)
    dual_path = out / "duals.json"
    if not dual_path.exists():
        raise CliError("no LP duals found; run `solve` in LP mode (colgen or monolithic without --mip-only) first",
                       EXIT_USAGE)
    duals = json.loads(dual_path.read_text(encoding="utf-8"))
    try:
        report = analysis.marginal_profits(duals, inst)
    except analysis.MissingDualsError as exc:
        raise CliError(str(exc), EXIT_USAGE) from exc
    gamma0 = _threshold(args.gamma0, [a.yearly for a in report.aircraft.values()])
    beta0 = _threshold(args.beta0, [c.yearly_marginal for c in report.crew.values()])
    grouping = analysis.quadrant_grouping(report, inst, gamma0, beta0)
    _write(out / "marginal.csv", analysis.marginal_csv(report, inst))
    _write(out / "quadrant.csv", analysis.quadrant_csv(grouping, inst))
    networks = build_networks(inst)
    state = run_colgen(inst, networks, tol=args.tol, cover=COVER_LE, threads=args.threads)
    if state.status == "converged":
        eam = analysis.eam_baseline(inst, networks)
        cg_month = {m: state.month_lp_objective(m) for m in inst.months}
        _write(out / "eam.csv", analysis.eam_csv(state.lp_objective, eam, inst, cg_month))
    for f, q in sorted(grouping.assignment.items()):
        print(f"{f}: quadrant {q}")
    return EXIT_OK


def cmd_benders_trace(args) -> int:
    inst = _load(args)
    out = _outdir(args)
    networks = build_networks(inst)
    res = benders_loop(inst, networks, build_pools(inst), "exact", tol=args.tol, max_iter=args.max_iter,
                       gap=args.gap, threads=args.threads)
    _write(out / "benders_trace.csv", res.trace_csv())
    if res.status == "iteration_cap":
        return EXIT_ITERATION_CAP
    if res.status != "converged":
        raise CliError(f"master problem is {res.status}", EXIT_INFEASIBLE)
    return EXIT_OK


COMMANDS = {
    "generate": cmd_generate,
    "solve": cmd_solve,
    "eam": cmd_eam,
    "analyze": cmd_analyze,
    "benders-trace": cmd_benders_trace,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
