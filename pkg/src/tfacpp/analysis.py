"""Shadow-price analytics, the equal-allocation baseline and report writers."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .colgen import build_cgsp, column_from_result
from .instance import Instance, family_time_budget
from .models import COVER_EQ, COVER_LE, OptimalityCut, Solution, build_bim_legbased, crew_hours
from .solver import LinearModel, Sense, SolveResult, Status, solve_lp, solve_mip
from .timespace import Networks


class MissingDualsError(ValueError):
    """Raised when marginal profits are requested from a solve without LP duals."""


@dataclass(frozen=True)
class CrewMarginal:
    dual: float
    yearly_marginal: float


@dataclass(frozen=True)
class AircraftMarginal:
    monthly: Dict[str, float]
    yearly: float


@dataclass(frozen=True)
class MarginalProfitReport:
    crew: Dict[str, CrewMarginal]
    aircraft: Dict[str, AircraftMarginal]


def marginal_profits(duals: Mapping[str, Mapping], inst: Instance) -> MarginalProfitReport:
    """Crew marginal profit per family (dual x yearly hours per crew) and
    aircraft marginal profit per fleet type (sum of monthly count duals)."""
    if not duals or "beta" not in duals or "gamma" not in duals:
        raise MissingDualsError("no LP duals available; re-solve in LP mode (colgen or relaxed monolithic)")
    beta, gamma = duals["beta"], duals["gamma"]
    crew = {}
    for b in inst.families:
        d = float(beta.get(b.id, 0.0))
        crew[b.id] = CrewMarginal(d, d * b.yearly_cap_per_crew)
    aircraft = {}
    for f in inst.fleet_types:
        monthly = {m: float(gamma.get(f.id, {}).get(m, 0.0)) for m in inst.months}
        aircraft[f.id] = AircraftMarginal(monthly, math.fsum(monthly.values()))
    return MarginalProfitReport(crew, aircraft)


QUADRANTS = ("I", "II", "III", "IV")


@dataclass(frozen=True)
class QuadrantGrouping:
    gamma0: float
    beta0: float
    assignment: Dict[str, str]
    points: Dict[str, Tuple[float, float]] = field(default_factory=dict)


def quadrant_of(gamma: float, beta: float, gamma0: float, beta0: float) -> str:
    high_a, high_c = gamma >= gamma0, beta >= beta0
    if high_a and high_c:
        return "I"
    if high_c:
        return "II"
    if high_a:
        return "IV"
    return "III"


def quadrant_grouping(report: MarginalProfitReport, inst: Instance, gamma0: float, beta0: float) -> QuadrantGrouping:
    """Place each fleet type by (aircraft marginal, its family's crew marginal)."""
    if gamma0 < 0 or beta0 < 0:
        raise ValueError("thresholds must be nonnegative")
    assignment, points = {}, {}
    for f in inst.fleet_types:
        g = report.aircraft[f.id].yearly
        b = report.crew[f.family_id].yearly_marginal
        points[f.id] = (g, b)
        assignment[f.id] = quadrant_of(g, b, gamma0, beta0)
    return QuadrantGrouping(gamma0, beta0, assignment, points)


# ---------------------------------------------------------------------------
# equal allocation baseline


@dataclass
class EamResult:
    profit: float
    objective: float
    month_objectives: Dict[str, float]
    usage: Dict[Tuple[str, str], float]
    monthly_cap_per_crew: Dict[str, float]
    x_values: Dict[Tuple[str, str, str], float]


def eam_monthly_cap(inst: Instance, family: str) -> float:
    """Per-crew monthly hours under equal allocation of the yearly cap."""
    return inst.family_by_id[family].yearly_cap_per_crew / len(inst.months)


def eam_baseline(inst: Instance, networks: Networks, cuts: Sequence[OptimalityCut] = (),
                 relax: bool = True) -> EamResult:
    """Solve every month separately with the yearly crew hours split evenly."""
    caps = {b.id: eam_monthly_cap(inst, b.id) for b in inst.families}
    zero = {b.id: 0.0 for b in inst.families}
    month_obj: Dict[str, float] = {}
    x_values: Dict[Tuple[str, str, str], float] = {}
    eta_total = 0.0
    for m in inst.months:
        rhs = {(m, b.id): b.crew_count * caps[b.id] for b in inst.families}
        model = build_cgsp(inst, networks, m, zero, cuts, relax, COVER_LE, monthly_rhs=rhs)
        res = solve_lp(model) if relax else solve_mip(model)
        if res.status is not Status.OPTIMAL:
            raise RuntimeError(f"equal-allocation month {m} is {res.status.value}")
        col = column_from_result(inst, m, res, f"eam:{m}")
        month_obj[m] = res.objective
        eta_total += sum(col.eta.values())
        for (lid, fid), v in col.x.items():
            x_values[(m, lid, fid)] = v
    profit = math.fsum(month_obj.values()) + eta_total
    return EamResult(profit, math.fsum(month_obj.values()), month_obj, crew_hours(inst, x_values), caps, x_values)


def growth_rate(cgmp_profit: float, eam_profit: float) -> float:
    """Relative gain of the optimized allocation over equal allocation, in percent."""
    if eam_profit == 0:
        raise ZeroDivisionError("equal-allocation profit is zero")
    return (cgmp_profit - eam_profit) / eam_profit * 100.0


# ---------------------------------------------------------------------------
# allocation report


@dataclass(frozen=True)
class AllocationRow:
    month: str
    family: str
    used: float
    per_crew: float
    cap_per_crew: float


@dataclass(frozen=True)
class FamilyAllocation:
    family: str
    yearly_used: float
    yearly_per_crew: float
    yearly_cap_per_crew: float
    monthly_max: float
    monthly_min: float

    @property
    def monthly_diff(self) -> float:
        return self.monthly_max - self.monthly_min


def allocation_report(solution: Solution, inst: Instance) -> Tuple[List[AllocationRow], List[FamilyAllocation]]:
    """Used crew hours per (month, family) and per family, also per crew member."""
    rows: List[AllocationRow] = []
    fams: List[FamilyAllocation] = []
    for b in inst.families:
        k = b.crew_count or 1
        per = []
        for m in inst.months:
            used = solution.crew_time_used.get((m, b.id), 0.0)
            rows.append(AllocationRow(m, b.id, used, used / k, b.monthly_cap_per_crew[m]))
            per.append(used / k)
        total = math.fsum(solution.crew_time_used.get((m, b.id), 0.0) for m in inst.months)
        fams.append(FamilyAllocation(b.id, total, total / k, b.yearly_cap_per_crew, max(per, default=0.0),
                                     min(per, default=0.0)))
    return rows, fams


# ---------------------------------------------------------------------------
# dual checks


def complementary_slackness(model: LinearModel, result: SolveResult, tol: float = 1e-6) -> List[str]:
    """Rows whose dual sign or slack/dual product contradicts LP optimality.

    Duals are derivatives of the objective with respect to the right-hand
    side, so in a maximization ``<=`` rows have nonnegative duals and ``>=``
    rows nonpositive ones (reversed when minimizing).
    """
    issues = []
    sign = 1.0 if model.sense is Sense.MAXIMIZE else -1.0
    obj_scale = max(1.0, abs(result.objective))
    for name, c in model.constraints.items():
        y = result.duals.get(name)
        if y is None:
            continue
        act = model.activity(name, result.primal)
        scale = max(1.0, abs(c.rhs), abs(act))
        slack = abs(c.rhs - act)
        if c.sense == "<=" and sign * y < -tol * max(1.0, abs(y)):
            issues.append(f"{name}: dual {y} has wrong sign")
        if c.sense == ">=" and sign * y > tol * max(1.0, abs(y)):
            issues.append(f"{name}: dual {y} has wrong sign")
        if c.sense != "==" and slack > tol * scale and abs(y) * slack > tol * obj_scale:
            issues.append(f"{name}: slack {slack} with dual {y}")
    return issues


@dataclass(frozen=True)
class FiniteDifference:
    family: str
    dual: float
    forward: float
    backward: float
    status: str


def finite_difference_check(
    inst: Instance,
    networks: Networks,
    family: str,
    delta: float = 1.0,
    cover: str = COVER_EQ,
    rel_tol: float = 1e-4,
) -> FiniteDifference:
    """Compare a family's yearly crew dual with re-solves at t_b +/- delta.

    If the two one-sided differences disagree the budget sits at a
    breakpoint (degenerate basis) and the check is reported as unverifiable.
    """
    base_rhs = {b.id: family_time_budget(b).yearly for b in inst.families}

    def solve(shift: float) -> SolveResult:
        rhs = dict(base_rhs)
        rhs[family] += shift
        res = solve_lp(build_bim_legbased(inst, networks, relax=True, cover=cover, yearly_rhs=rhs))
        if res.status is not Status.OPTIMAL:
            raise RuntimeError(f"LP at shift {shift} is {res.status.value}")
        return res

    base = solve(0.0)
    dual = base.duals[f"year|{family}"]
    fwd = (solve(delta).objective - base.objective) / delta
    bwd = (base.objective - solve(-delta).objective) / delta
    scale = max(1.0, abs(fwd), abs(bwd))
    if abs(fwd - bwd) > rel_tol * scale:
        status = "unverifiable"
    elif abs(fwd - dual) <= rel_tol * max(1.0, abs(dual)):
        status = "ok"
    else:
        status = "mismatch"
    return FiniteDifference(family, dual, fwd, bwd, status)


# ---------------------------------------------------------------------------
# CSV writers


def _csv(header: Sequence[str], rows: Iterable[Sequence[object]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def marginal_csv(report: MarginalProfitReport, inst: Instance) -> str:
    rows = [("crew", b, "", c.dual, c.yearly_marginal) for b, c in report.crew.items()]
    for f, a in report.aircraft.items():
        for m in inst.months:
            rows.append(("aircraft", f, m, a.monthly[m], a.yearly))
    return _csv(["kind", "id", "month", "dual", "yearly_marginal"], rows)


def quadrant_csv(grouping: QuadrantGrouping, inst: Instance) -> str:
    """Scatter data: fleet type, aircraft marginal, family, crew marginal, quadrant."""
    rows = [(f, grouping.points[f][0], inst.family_of(f), grouping.points[f][1], q)
            for f, q in grouping.assignment.items()]
    return _csv(["fleet_type", "gamma", "family", "beta", "quadrant"], rows)


def eam_csv(cgmp_profit: float, eam: EamResult, inst: Instance,
            cg_month: Optional[Mapping[str, float]] = None) -> str:
    rows = [(m, (cg_month or {}).get(m, ""), eam.month_objectives[m]) for m in inst.months]
    rows.append(("total", cgmp_profit, eam.profit))
    out = _csv(["month", "cgmp_obj", "eam_obj"], rows)
    return out + _csv(["cgmp_profit", "eam_profit", "growth_rate_pct"],
                      [(cgmp_profit, eam.profit, growth_rate(cgmp_profit, eam.profit))])


def allocation_csv(solution: Solution, inst: Instance) -> str:
    rows, fams = allocation_report(solution, inst)
    out = _csv(["month", "family", "used_hours", "per_crew", "cap_per_crew"],
               [(r.month, r.family, r.used, r.per_crew, r.cap_per_crew) for r in rows])
    return out + _csv(["family", "yearly_used", "yearly_per_crew", "yearly_cap_per_crew", "monthly_max",
                       "monthly_min", "monthly_diff"],
                      [(f.family, f.yearly_used, f.yearly_per_crew, f.yearly_cap_per_crew, f.monthly_max,
                        f.monthly_min, f.monthly_diff) for f in fams])
