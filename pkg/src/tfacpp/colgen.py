"""Column generation over monthly fleet assignment schedules.

The master selects a convex combination of monthly schedule columns subject
to the yearly crew budgets. Each month's pricing problem is the monthly
fleet assignment with crew-time penalties, monthly caps and optimality cuts.
After the LP converges, a finishing pass fixes each month's crew-time
allocation from the LP and re-solves the months as MIPs.
"""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .instance import Instance, family_time_budget, leg_flight_time, leg_profit
from .models import (
    COVER_EQ,
    COVER_LE,
    OptimalityCut,
    Solution,
    add_cut_rows,
    add_fleet_block,
    add_leg_crew_rows,
    crew_hours,
    eta_name,
    fleet_profit,
    x_name,
)
from .solver import CGSP_MIP_GAP, LinearModel, Sense, SolveResult, Status, solve_lp, solve_mip
from .timespace import Networks

PRICING_TOL = 1e-6
ARTIFICIAL_PROFIT = -1e12
FINISH_SNAP = 1e-9


class ColgenError(RuntimeError):
    pass


@dataclass(frozen=True)
class Column:
    """One monthly schedule: fleet assignment values with profit and crew time."""

    id: str
    month: str
    x: Dict[Tuple[str, str], float]
    profit: float
    crew_time: Dict[str, float]
    eta: Dict[str, float] = field(default_factory=dict)
    artificial: bool = False


@dataclass
class CgIteration:
    cgmp_calls: int
    cgsp_calls: int
    lp_objective: float
    columns_added: int
    total_columns: int
    cgmp_time: float
    cgsp_time: float


@dataclass
class CgState:
    inst: Instance
    cover: str = COVER_LE
    columns: Dict[str, List[Column]] = field(default_factory=dict)
    alpha: Dict[str, float] = field(default_factory=dict)
    beta: Dict[str, float] = field(default_factory=dict)
    gamma: Dict[str, Dict[str, float]] = field(default_factory=dict)
    u: Dict[str, float] = field(default_factory=dict)
    lp_objective: float = math.nan
    lp_trace: List[float] = field(default_factory=list)
    iterations: List[CgIteration] = field(default_factory=list)
    cgsp_calls: int = 0
    cgmp_calls: int = 0
    cgsp_time: float = 0.0
    cgmp_time: float = 0.0
    status: str = "running"
    yearly_rhs: Dict[str, float] = field(default_factory=dict)

    def all_columns(self) -> List[Column]:
        return [c for m in self.inst.months for c in self.columns.get(m, [])]

    def month_lp_objective(self, month: str) -> float:
        """Profit of the LP's convex combination of ``month``'s columns."""
        return math.fsum(c.profit * self.u.get(c.id, 0.0) for c in self.columns.get(month, []) if not c.artificial)

    def allocated_time(self, month: str, family: str) -> float:
        return sum(c.crew_time.get(family, 0.0) * self.u.get(c.id, 0.0) for c in self.columns.get(month, []))

    def trace_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["cgmp_calls", "cgsp_calls", "avg_cgmp_time", "avg_cgsp_time", "columns_added",
                    "total_columns", "lp_objective"])
        for it in self.iterations:
            w.writerow([it.cgmp_calls, it.cgsp_calls,
                        f"{it.cgmp_time / max(it.cgmp_calls, 1):.6f}", f"{it.cgsp_time / max(it.cgsp_calls, 1):.6f}",
                        it.columns_added, it.total_columns, repr(it.lp_objective)])
        return buf.getvalue()


# ---------------------------------------------------------------------------
# master


def build_cgmp(inst: Instance, columns: Mapping[str, Sequence[Column]], relax: bool = True,
               yearly_rhs: Optional[Mapping[str, float]] = None) -> LinearModel:
    """Convexity row per month (``conv|m``) and yearly budget per family (``year|b``)."""
    model = LinearModel("cgmp", Sense.MAXIMIZE)
    year_rows: Dict[str, Dict[str, float]] = {b.id: {} for b in inst.families}
    for m in inst.months:
        cols = columns.get(m, ())
        if not cols:
            raise ColgenError(f"month {m} has no columns")
        conv = {}
        for c in cols:
            v = model.add_var(f"u|{c.id}", 0.0, 1.0 if not relax else math.inf, c.profit, integer=not relax)
            conv[v] = 1.0
            for b, t in c.crew_time.items():
                if t:
                    year_rows[b][v] = t
        model.add_constr(f"conv|{m}", conv, "==", 1.0)
    for b in inst.families:
        rhs = yearly_rhs[b.id] if yearly_rhs and b.id in yearly_rhs else family_time_budget(b).yearly
        model.add_constr(f"year|{b.id}", year_rows[b.id], "<=", rhs)
    model.meta.update(months=tuple(inst.months), kind="cgmp")
    return model


def reduced_cost(column: Column, alpha: Mapping[str, float], beta: Mapping[str, float]) -> float:
    """Profit less the priced crew time and the month's convexity dual."""
    return column.profit - sum(beta.get(b, 0.0) * t for b, t in column.crew_time.items()) - alpha.get(column.month, 0.0)


# ---------------------------------------------------------------------------
# pricing


def build_cgsp(
    inst: Instance,
    networks: Networks,
    month: str,
    beta: Mapping[str, float],
    cuts: Sequence[OptimalityCut] = (),
    relax: bool = True,
    cover: str = COVER_LE,
    monthly_rhs: Optional[Mapping[Tuple[str, str], float]] = None,
    drop_penalty: float = 0.0,
) -> LinearModel:
    """Monthly pricing problem.

    Objective: sum of (profit - crew time x beta) over assigned legs, less the
    crew cost surrogates. ``drop_penalty`` is charged per leg left unassigned
    (only meaningful with the ``le`` cover); it is implemented as a bonus on
    every x plus a constant offset.
    """
    obj: Dict[Tuple[str, str], float] = {}
    for leg in inst.legs_in(month):
        for f in inst.fleet_types:
            if (month, f.id) in networks and leg.id in networks[(month, f.id)].leg_arcs:
                b = f.family_id
                obj[(leg.id, f.id)] = (leg_profit(leg, f) - leg_flight_time(leg, b) * beta.get(b, 0.0)
                                       + drop_penalty)
    model = LinearModel(f"cgsp|{month}", Sense.MAXIMIZE)
    add_fleet_block(model, inst, networks, month, relax, cover, objective=obj)
    add_leg_crew_rows(model, inst, (month,), monthly_rhs, yearly=False)
    add_cut_rows(model, inst, cuts, (month,))
    model.objective_offset = -drop_penalty * len(inst.legs_in(month))
    model.meta.update(months=(month,), kind="cgsp")
    return model


@dataclass
class PricingResult:
    month: str
    chi: float
    column: Optional[Column]
    result: SolveResult
    wall_time: float


def column_from_result(inst: Instance, month: str, result: SolveResult, cid: str,
                       drop_penalty: float = 0.0) -> Column:
    x: Dict[Tuple[str, str], float] = {}
    for leg in inst.legs_in(month):
        for f in inst.fleet_types:
            v = result.primal.get(x_name(month, leg.id, f.id), 0.0)
            if v > 1e-9:
                x[(leg.id, f.id)] = v
    xv = {(month, lid, fid): v for (lid, fid), v in x.items()}
    eta = {b.id: max(0.0, result.primal.get(eta_name(month, b.id), 0.0)) for b in inst.families}
    hours = crew_hours(inst, xv)
    uncovered = len(inst.legs_in(month)) - sum(x.values())
    profit = fleet_profit(inst, xv) - math.fsum(eta.values()) - drop_penalty * uncovered
    crew_time = {b.id: hours.get((month, b.id), 0.0) for b in inst.families}
    return Column(cid, month, x, profit, crew_time, eta)


def price_month(
    inst: Instance,
    networks: Networks,
    month: str,
    alpha: float,
    beta: Mapping[str, float],
    cuts: Sequence[OptimalityCut] = (),
    tol: float = PRICING_TOL,
    relax: bool = True,
    cover: str = COVER_LE,
    column_id: str = "",
    gap: float = CGSP_MIP_GAP,
    drop_penalty: float = 0.0,
    force: bool = False,
) -> PricingResult:
    """Solve the pricing problem; return a column iff chi > alpha + tol (or ``force``)."""
    t0 = time.perf_counter()
    model = build_cgsp(inst, networks, month, beta, cuts, relax, cover, drop_penalty=drop_penalty)
    res = solve_lp(model) if relax else solve_mip(model, gap=gap)
    dt = time.perf_counter() - t0
    if res.status is not Status.OPTIMAL:
        return PricingResult(month, -math.inf, None, res, dt)
    chi = res.objective
    col = None
    if force or chi > alpha + tol:
        col = column_from_result(inst, month, res, column_id or f"{month}:{id(res)}", drop_penalty)
    return PricingResult(month, chi, col, res, dt)


def _gamma_from(result: SolveResult, month: str) -> Dict[str, float]:
    out = {}
    for k, v in result.duals.items():
        if k.startswith(f"count|{month}|"):
            out[k.split("|")[2]] = v
    return out


def run_colgen(
    inst: Instance,
    networks: Networks,
    cuts: Sequence[OptimalityCut] = (),
    tol: float = PRICING_TOL,
    cover: str = COVER_LE,
    max_iter: int = 500,
    threads: int = 1,
    init_mip: bool = True,
    init_gap: float = 1e-2,
    drop_penalty: float = 0.0,
    yearly_rhs: Optional[Mapping[str, float]] = None,
) -> CgState:
    """Solve the LP relaxation of the leg-based integrated model by column generation.

    Initialization prices each month once without duals. Each iteration then
    solves the master LP once and prices every month; the loop stops when no
    month yields a column with positive reduced cost. Hence
    ``cgsp_calls == months * cgmp_calls + months``.
    """
    state = CgState(inst, cover, yearly_rhs=dict(yearly_rhs or {}))
    counter = [0]

    def next_id(m: str) -> str:
        counter[0] += 1
        return f"c{counter[0]}:{m}"

    def add(col: Column) -> None:
        state.columns.setdefault(col.month, []).append(col)

    for m in inst.months:
        if cover == COVER_LE:
            empty = {b.id: 0.0 for b in inst.families}
            add(Column(f"e:{m}", m, {}, -drop_penalty * len(inst.legs_in(m)), empty, {}, True))
        else:
            add(Column(f"a:{m}", m, {}, ARTIFICIAL_PROFIT, {b.id: 0.0 for b in inst.families}, {}, True))

    zero_beta = {b.id: 0.0 for b in inst.families}
    t0 = time.perf_counter()
    inits = [price_month(inst, networks, m, -math.inf, zero_beta, cuts, tol, not init_mip, cover, next_id(m),
                         init_gap, drop_penalty, force=True) for m in inst.months]
    state.cgsp_calls += len(inits)
    state.cgsp_time += time.perf_counter() - t0
    for pr in inits:
        if pr.column is not None:
            add(pr.column)

    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for _ in range(max_iter):
            t0 = time.perf_counter()
            master = build_cgmp(inst, state.columns, relax=True, yearly_rhs=yearly_rhs)
            res = solve_lp(master)
            state.cgmp_time += time.perf_counter() - t0
            state.cgmp_calls += 1
            if res.status is not Status.OPTIMAL:
                state.status = res.status.value
                return state
            state.lp_objective = res.objective
            state.lp_trace.append(res.objective)
            state.alpha = {m: res.duals[f"conv|{m}"] for m in inst.months}
            state.beta = {b.id: res.duals[f"year|{b.id}"] for b in inst.families}
            state.u = {k[2:]: v for k, v in res.primal.items()}

            def run(m: str) -> PricingResult:
                return price_month(inst, networks, m, state.alpha[m], state.beta, cuts, tol, True, cover,
                                   "pending", drop_penalty=drop_penalty)

            t1 = time.perf_counter()
            prs = list(pool.map(run, inst.months)) if pool else [run(m) for m in inst.months]
            state.cgsp_time += time.perf_counter() - t1
            state.cgsp_calls += len(prs)
            added = 0
            for pr in prs:
                if pr.result.status is Status.OPTIMAL:
                    state.gamma.update({f: {**state.gamma.get(f, {}), pr.month: g}
                                        for f, g in _gamma_from(pr.result, pr.month).items()})
                if pr.column is not None:
                    # ids are assigned in month order so threaded runs match serial ones
                    add(replace(pr.column, id=next_id(pr.month)))
                    added += 1
            state.iterations.append(CgIteration(state.cgmp_calls, state.cgsp_calls, res.objective, added,
                                                sum(len(v) for v in state.columns.values()),
                                                state.cgmp_time, state.cgsp_time))
            if added == 0:
                state.status = "converged"
                if cover == COVER_EQ and any(state.u.get(c.id, 0.0) > 1e-9
                                             for c in state.all_columns() if c.artificial):
                    state.status = "infeasible"
                return state
        state.status = "iteration_cap"
        return state
    finally:
        if pool:
            pool.shutdown()


# ---------------------------------------------------------------------------
# MIP finishing


@dataclass
class MonthFinish:
    month: str
    lp_objective: float
    mip_objective: float
    gap: float
    mip_time: float
    cover: str
    dropped_legs: List[str]


def mip_finish(
    state: CgState,
    networks: Networks,
    cuts: Sequence[OptimalityCut] = (),
    gap: float = CGSP_MIP_GAP,
    restore_cover: bool = True,
) -> Solution:
    """Fix each month's crew time at the LP allocation and solve the month as a MIP.

    The month objective is profit less crew cost surrogates (no crew-time
    penalty). With ``restore_cover`` the month is first tried with every leg
    covered; if that is infeasible it falls back to the at-most-once cover and
    reports the legs left open.
    """
    if state.status != "converged":
        raise ColgenError(f"column generation did not converge (status {state.status})")
    inst = state.inst
    sol = Solution()
    report: List[MonthFinish] = []
    total_lp = 0.0
    for m in inst.months:
        rhs = {(m, b.id): max(0.0, state.allocated_time(m, b.id)) for b in inst.families}
        lp_obj = state.month_lp_objective(m)
        covers = [COVER_EQ, COVER_LE] if restore_cover else [state.cover]
        t0 = time.perf_counter()
        res = None
        used = covers[-1]
        for cov in covers:
            model = LinearModel(f"finish|{m}", Sense.MAXIMIZE)
            add_fleet_block(model, inst, networks, m, False, cov)
            add_leg_crew_rows(model, inst, (m,), rhs, yearly=False)
            add_cut_rows(model, inst, cuts, (m,))
            res = solve_mip(model, gap=gap)
            if res.status is Status.OPTIMAL:
                used = cov
                break
        dt = time.perf_counter() - t0
        if res is None or res.status is not Status.OPTIMAL:
            raise ColgenError(f"finishing MIP for month {m} is {res.status.value if res else 'unsolved'}")
        col = column_from_result(inst, m, res, f"mip:{m}")
        dropped = [leg.id for leg in inst.legs_in(m) if sum(v for (lid, _), v in col.x.items() if lid == leg.id) < 0.5]
        # both sides recomputed from x so that identical schedules give identical values
        mip_obj = col.profit
        if abs(mip_obj - lp_obj) <= FINISH_SNAP * max(1.0, abs(lp_obj)):
            # the LP value is rebuilt from fractional weights; equal up to rounding means equal
            lp_obj = mip_obj
        g = (mip_obj - lp_obj) / abs(lp_obj) if lp_obj else 0.0
        report.append(MonthFinish(m, lp_obj, mip_obj, g, dt, used, dropped))
        total_lp += lp_obj
        for (lid, fid), v in col.x.items():
            sol.x_values[(m, lid, fid)] = round(v)
            if v > 0.5:
                sol.assignment[(m, lid)] = fid
        sol.dropped_legs.extend((m, lid) for lid in dropped)
        sol.crew_cost += sum(col.eta.values())
    sol.crew_time_used = crew_hours(inst, sol.x_values)
    sol.profit = fleet_profit(inst, sol.x_values)
    sol.objective = sum(r.mip_objective for r in report)
    sol.lp_objective = state.lp_objective
    sol.duals = {"beta": dict(state.beta), "gamma": {f: dict(v) for f, v in state.gamma.items()},
                 "alpha": dict(state.alpha)}
    sol.info["finish"] = report
    sol.info["total_lp"] = total_lp
    sol.status = "optimal" if not sol.dropped_legs else "partial_cover"
    return sol


def finish_report_csv(report: Sequence[MonthFinish]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["month", "mon_lp_obj", "mon_mip_obj", "mon_int_gap", "mon_mip_time", "cover", "dropped_legs"])
    for r in report:
        w.writerow([r.month, repr(r.lp_objective), repr(r.mip_objective), repr(r.gap), f"{r.mip_time:.6f}", r.cover,
                    " ".join(r.dropped_legs)])
    return buf.getvalue()
