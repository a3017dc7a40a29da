"""Benders decomposition: crew pairing subproblems, exact and empirical
optimality cuts, and the master iteration loop."""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .instance import Instance
from .models import (
    COVER_EQ,
    OptimalityCut,
    Solution,
    build_monolithic_bmp,
    eta_name,
    extract_solution,
    fleet_profit,
)
from .pairing import Pairing, Pools, solve_cover
from .solver import Status, solve_mip
from .timespace import Networks


class BendersError(RuntimeError):
    pass


@dataclass
class BspResult:
    month: str
    family: str
    objective: float
    duals: Dict[str, float]
    legs: List[str]
    selection: Dict[str, float] = field(default_factory=dict)


def family_legs(inst: Instance, assignment: Mapping[str, str], month: str, family: str) -> List[str]:
    """Legs of ``month`` whose assigned fleet type belongs to ``family``."""
    types = set(inst.family_by_id[family].fleet_type_ids)
    return [leg.id for leg in inst.legs_in(month) if assignment.get(leg.id) in types]


def solve_bsp(
    inst: Instance,
    assignment: Mapping[str, str],
    month: str,
    family: str,
    pool: Sequence[Pairing],
) -> BspResult:
    """Crew pairing LP of ``family`` for the legs ``assignment`` gives it.

    ``assignment`` maps leg id to fleet type for the legs of ``month``. The LP
    keeps one cover row for every leg of the month (right-hand side 1 for the
    family's legs, 0 otherwise), so the returned duals satisfy the dual
    constraints of every pairing in ``pool`` and the cut they define is valid
    at any assignment, not only at this one.
    """
    legs = family_legs(inst, assignment, month, family)
    if not legs:
        return BspResult(month, family, 0.0, {}, [])
    own = set(legs)
    rhs = {leg.id: (1.0 if leg.id in own else 0.0) for leg in inst.legs_in(month)}
    res = solve_cover(pool, rhs, relax=True)
    if res.status is not Status.OPTIMAL:
        raise BendersError(f"subproblem ({month}, {family}) is {res.status.value}; pool lacks complete recourse")
    return BspResult(month, family, res.objective, res.duals, legs, res.selection)


def make_cut(duals: Mapping[str, float], month: str, family: str, kind: str = "exact") -> OptimalityCut:
    return OptimalityCut(month, family, {k: float(v) for k, v in duals.items()}, kind)


def estimate_empirical_duals(
    historical_pool: Sequence[Pairing],
    month: str,
    family: str,
    leg_universe: Iterable[str],
    markup: float = 1.0,
) -> Dict[str, float]:
    """Leg prices from the crew pairing LP over a historical pairing pool.

    ``markup`` (at least 1) scales the LP duals up to compensate for costs the
    pairing model leaves out.
    """
    if markup < 1.0:
        raise ValueError("markup must be >= 1")
    res = solve_cover(historical_pool, {lid: 1.0 for lid in leg_universe}, relax=True)
    if res.status is not Status.OPTIMAL:
        raise BendersError(f"historical pool for ({month}, {family}) does not cover its legs")
    return {lid: markup * w for lid, w in res.duals.items()}


def empirical_cuts(inst: Instance, historical_pools: Pools, markup: Optional[float] = None) -> List[OptimalityCut]:
    """One empirical cut per (month, family)."""
    markup = inst.crew_policy.empirical_markup if markup is None else markup
    cuts = []
    for m in inst.months:
        universe = [leg.id for leg in inst.legs_in(m)]
        for b in inst.families:
            w = estimate_empirical_duals(historical_pools[(m, b.id)], m, b.id, universe, markup)
            cuts.append(make_cut(w, m, b.id, "empirical"))
    return cuts


# ---------------------------------------------------------------------------


@dataclass
class BendersIteration:
    iteration: int
    upper_bound: float
    lower_bound: float
    cuts_added: int
    wall_time: float


@dataclass
class BendersResult:
    solution: Solution
    trace: List[BendersIteration]
    cuts: List[OptimalityCut]
    status: str

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    def trace_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iteration", "upper_bound", "lower_bound", "cuts_added", "wall_time"])
        for it in self.trace:
            w.writerow([it.iteration, repr(it.upper_bound), repr(it.lower_bound), it.cuts_added,
                        f"{it.wall_time:.6f}"])
        return buf.getvalue()


def _month_assignment(sol: Solution, month: str) -> Dict[str, str]:
    return {lid: f for (m, lid), f in sol.assignment.items() if m == month}


def evaluate_assignment(
    inst: Instance,
    assignment: Mapping[Tuple[str, str], str],
    pools: Pools,
    threads: int = 1,
) -> Tuple[float, List[BspResult]]:
    """Fleet profit minus the crew pairing LP cost of every (month, family)."""
    keys = [(m, b.id) for m in inst.months for b in inst.families]
    per_month = {m: {lid: f for (mm, lid), f in assignment.items() if mm == m} for m in inst.months}

    def run(key):
        m, b = key
        return solve_bsp(inst, per_month[m], m, b, pools[key])

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            bsps = list(ex.map(run, keys))
    else:
        bsps = [run(k) for k in keys]
    x = {(m, lid, f): 1.0 for (m, lid), f in assignment.items()}
    return fleet_profit(inst, x) - sum(r.objective for r in bsps), bsps


def benders_loop(
    inst: Instance,
    networks: Networks,
    pools: Pools,
    mode: str = "exact",
    tol: float = 1e-6,
    max_iter: int = 100,
    historical_pools: Optional[Pools] = None,
    markup: Optional[float] = None,
    cover: str = COVER_EQ,
    gap: float = 0.0,
    threads: int = 1,
) -> BendersResult:
    """Solve the integrated model by Benders decomposition.

    ``exact``: iterate master MIP / subproblem LPs until the relative gap
    between the master bound (UB) and the best evaluated incumbent (LB) is at
    most ``tol``. ``empirical``: add one cut per (month, family) from
    ``historical_pools`` (default: ``pools``) and solve the master once.
    """
    if mode not in ("exact", "empirical"):
        raise ValueError(f"unknown mode {mode!r}")
    t0 = time.perf_counter()
    trace: List[BendersIteration] = []

    if mode == "empirical":
        cuts = empirical_cuts(inst, historical_pools or pools, markup)
        model = build_monolithic_bmp(inst, networks, cuts, cover=cover)
        res = solve_mip(model, gap=gap)
        if res.status is not Status.OPTIMAL:
            return BendersResult(Solution(status=res.status.value), trace, cuts, res.status.value)
        sol = extract_solution(model, res, inst)
        sol.crew_cost = sum(v for k, v in res.primal.items() if k.startswith("eta|"))
        trace.append(BendersIteration(1, res.dual_bound, res.objective, len(cuts), time.perf_counter() - t0))
        return BendersResult(sol, trace, cuts, "converged")

    cuts: List[OptimalityCut] = []
    best_lb = -math.inf
    best: Optional[Solution] = None
    status = "iteration_cap"
    for it in range(1, max_iter + 1):
        model = build_monolithic_bmp(inst, networks, cuts, cover=cover)
        res = solve_mip(model, gap=gap)
        if res.status is not Status.OPTIMAL:
            status = res.status.value
            break
        ub = res.dual_bound
        sol = extract_solution(model, res, inst)
        lb, bsps = evaluate_assignment(inst, sol.assignment, pools, threads)
        if lb > best_lb:
            best_lb = lb
            sol.objective = lb
            sol.crew_cost = sol.profit - lb
            sol.pairing_selection = {(r.month, r.family): r.selection for r in bsps}
            sol.duals["omega"] = {f"{r.month}|{r.family}": r.duals for r in bsps}
            best = sol
        added = 0
        for r in bsps:
            eta = res.primal.get(eta_name(r.month, r.family), 0.0)
            if r.objective > eta + 1e-9 * max(1.0, abs(r.objective)):
                cuts.append(make_cut(r.duals, r.month, r.family, "exact"))
                added += 1
        trace.append(BendersIteration(it, ub, best_lb, added, time.perf_counter() - t0))
        if (ub - best_lb) <= tol * max(1.0, abs(ub)) or added == 0:
            status = "converged"
            break
    if best is None:
        return BendersResult(Solution(status=status), trace, cuts, status)
    best.status = status
    return BendersResult(best, trace, cuts, status)
