"""Model builders: classic FAM, pairing-based TFACPP, leg-based BIM and the
Benders master problem, plus solution extraction.

Variable names: ``x|m|leg|type``, ``y|m|type|arc``, ``z|m|family|pairing``,
``eta|m|family``. Row names: ``cover|m|leg``, ``bal|m|type|station|time``,
``count|m|type``, ``link|m|leg|family``, ``month|m|family`` (leg form),
``pmonth|m|family`` (pairing form), ``year|family``, ``pyear|family``,
``cut|m|family|k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .instance import Instance, family_time_budget, leg_flight_time, leg_profit
from .pairing import Pairing, Pools
from .solver import LinearModel, Sense, SolveResult
from .timespace import Networks

COVER_EQ = "eq"
COVER_LE = "le"


def x_name(m: str, leg: str, f: str) -> str:
    return f"x|{m}|{leg}|{f}"


def y_name(m: str, f: str, arc: str) -> str:
    return f"y|{m}|{f}|{arc}"


def z_name(m: str, b: str, pid: str) -> str:
    return f"z|{m}|{b}|{pid}"


def eta_name(m: str, b: str) -> str:
    return f"eta|{m}|{b}"


@dataclass(frozen=True)
class OptimalityCut:
    month: str
    family: str
    coeffs: Dict[str, float]
    kind: str = "exact"

    def value(self, family_legs: Iterable[str] | Mapping[str, float]) -> float:
        """Cut right-hand side for legs flown by the family (0/1 or fractional weights)."""
        if isinstance(family_legs, Mapping):
            return sum(self.coeffs.get(l, 0.0) * w for l, w in family_legs.items())
        return sum(self.coeffs.get(l, 0.0) for l in family_legs)


@dataclass
class Solution:
    """Fleet assignment with crew usage, selected pairings and available duals."""

    assignment: Dict[Tuple[str, str], str] = field(default_factory=dict)
    x_values: Dict[Tuple[str, str, str], float] = field(default_factory=dict)
    ground_flows: Dict[Tuple[str, str, str], float] = field(default_factory=dict)
    pairing_selection: Dict[Tuple[str, str], Dict[str, float]] = field(default_factory=dict)
    objective: float = math.nan
    profit: float = math.nan
    crew_cost: float = 0.0
    crew_time_used: Dict[Tuple[str, str], float] = field(default_factory=dict)
    duals: Dict[str, Dict] = field(default_factory=dict)
    status: str = "optimal"
    lp_objective: float = math.nan
    dropped_legs: List[Tuple[str, str]] = field(default_factory=list)
    info: Dict[str, object] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# building blocks


def add_fleet_block(
    model: LinearModel,
    inst: Instance,
    networks: Networks,
    month: str,
    relax: bool = False,
    cover: str = COVER_EQ,
    objective: Optional[Mapping[Tuple[str, str], float]] = None,
) -> None:
    """Variables and rows of one month's fleet assignment (cover, balance, count).

    ``objective`` overrides the profit coefficient of ``(leg, type)`` pairs.
    """
    if cover not in (COVER_EQ, COVER_LE):
        raise ValueError(f"cover must be 'eq' or 'le', got {cover!r}")
    cover_rows: Dict[str, Dict[str, float]] = {leg.id: {} for leg in inst.legs_in(month)}
    for f in inst.fleet_types:
        net = networks[(month, f.id)]
        for lid in net.leg_arcs:
            leg = inst.leg_by_id[lid]
            r = objective[(lid, f.id)] if objective is not None else leg_profit(leg, f)
            v = model.add_var(x_name(month, lid, f.id), 0.0, 1.0, r, integer=not relax)
            cover_rows[lid][v] = 1.0
        for gid in net.ground_arcs:
            model.add_var(y_name(month, f.id, gid), 0.0, math.inf, 0.0)
        for node in net.nodes:
            adj = net.adjacency(node)
            row: Dict[str, float] = {}
            for lid in adj.legs_out:
                row[x_name(month, lid, f.id)] = row.get(x_name(month, lid, f.id), 0.0) + 1.0
            for lid in adj.legs_in:
                row[x_name(month, lid, f.id)] = row.get(x_name(month, lid, f.id), 0.0) - 1.0
            for gid in adj.ground_out:
                row[y_name(month, f.id, gid)] = row.get(y_name(month, f.id, gid), 0.0) + 1.0
            for gid in adj.ground_in:
                row[y_name(month, f.id, gid)] = row.get(y_name(month, f.id, gid), 0.0) - 1.0
            model.add_constr(f"bal|{month}|{f.id}|{node.station}|{node.time}", row, "==", 0.0)
        count = {x_name(month, lid, f.id): float(c) for lid, c in net.leg_crossers.items()}
        count.update({y_name(month, f.id, gid): float(c) for gid, c in net.ground_crossers.items()})
        model.add_constr(f"count|{month}|{f.id}", count, "<=", float(f.aircraft_count))
    sense = "==" if cover == COVER_EQ else "<="
    for lid, row in cover_rows.items():
        model.add_constr(f"cover|{month}|{lid}", row, sense, 1.0)


def family_hours_row(inst: Instance, model: LinearModel, month: str, family_id: str) -> Dict[str, float]:
    """Leg-based crew flight hours of ``family_id`` in ``month`` as a row."""
    fam = inst.family_by_id[family_id]
    row: Dict[str, float] = {}
    for leg in inst.legs_in(month):
        t = leg_flight_time(leg, family_id)
        for fid in fam.fleet_type_ids:
            name = x_name(month, leg.id, fid)
            if name in model.variables:
                row[name] = t
    return row


def add_leg_crew_rows(
    model: LinearModel,
    inst: Instance,
    months: Sequence[str],
    monthly_rhs: Optional[Mapping[Tuple[str, str], float]] = None,
    yearly_rhs: Optional[Mapping[str, float]] = None,
    yearly: bool = True,
) -> None:
    for b in inst.families:
        budget = family_time_budget(b)
        year_row: Dict[str, float] = {}
        for m in months:
            row = family_hours_row(inst, model, m, b.id)
            year_row.update(row)
            rhs = monthly_rhs[(m, b.id)] if monthly_rhs and (m, b.id) in monthly_rhs else budget.monthly[m]
            model.add_constr(f"month|{m}|{b.id}", row, "<=", rhs)
        if yearly:
            rhs = yearly_rhs[b.id] if yearly_rhs and b.id in yearly_rhs else budget.yearly
            model.add_constr(f"year|{b.id}", year_row, "<=", rhs)


def add_pairing_block(
    model: LinearModel,
    inst: Instance,
    months: Sequence[str],
    pools: Pools,
    relax_z: bool = False,
    pairing_crew_rows: bool = True,
) -> None:
    """z variables, linking rows and (optionally) pairing-form crew rows."""
    for b in inst.families:
        budget = family_time_budget(b)
        year_row: Dict[str, float] = {}
        for m in months:
            pool = pools[(m, b.id)]
            if not pool:
                raise ValueError(f"empty pairing pool for ({m}, {b.id})")
            link: Dict[str, Dict[str, float]] = {leg.id: {} for leg in inst.legs_in(m)}
            month_row: Dict[str, float] = {}
            for p in pool:
                z = model.add_var(z_name(m, b.id, p.id), 0.0, 1.0, -p.cost, integer=not relax_z)
                for lid in p.legs:
                    link[lid][z] = 1.0
                month_row[z] = p.flight_time
            year_row.update(month_row)
            for leg in inst.legs_in(m):
                row = dict(link[leg.id])
                for fid in b.fleet_type_ids:
                    name = x_name(m, leg.id, fid)
                    if name in model.variables:
                        row[name] = -1.0
                model.add_constr(f"link|{m}|{leg.id}|{b.id}", row, "==", 0.0)
            if pairing_crew_rows:
                model.add_constr(f"pmonth|{m}|{b.id}", month_row, "<=", budget.monthly[m])
        if pairing_crew_rows:
            model.add_constr(f"pyear|{b.id}", year_row, "<=", budget.yearly)


def add_cut_rows(model: LinearModel, inst: Instance, cuts: Sequence[OptimalityCut],
                 months: Sequence[str]) -> None:
    """``eta`` variables (bounded below by 0) and one row per cut."""
    for m in months:
        for b in inst.families:
            model.add_var(eta_name(m, b.id), 0.0, math.inf, -1.0)
    counter: Dict[Tuple[str, str], int] = {}
    for cut in cuts:
        if cut.month not in months:
            continue
        k = counter.get((cut.month, cut.family), 0)
        counter[(cut.month, cut.family)] = k + 1
        model.add_constr(f"cut|{cut.month}|{cut.family}|{k}", cut_row(model, inst, cut), ">=", 0.0)


def cut_row(model: LinearModel, inst: Instance, cut: OptimalityCut) -> Dict[str, float]:
    fam = inst.family_by_id[cut.family]
    row = {eta_name(cut.month, cut.family): 1.0}
    for lid, w in cut.coeffs.items():
        if w == 0.0:
            continue
        for fid in fam.fleet_type_ids:
            name = x_name(cut.month, lid, fid)
            if name in model.variables:
                row[name] = -w
    return row


# ---------------------------------------------------------------------------
# public builders


def build_fam(
    inst: Instance,
    networks: Networks,
    months: Optional[Iterable[str]] = None,
    relax: bool = False,
    cover: str = COVER_EQ,
) -> LinearModel:
    """Classic fleet assignment over ``months`` (no crew rows)."""
    months = tuple(inst.months if months is None else months)
    model = LinearModel("fam", Sense.MAXIMIZE)
    for m in months:
        add_fleet_block(model, inst, networks, m, relax, cover)
    model.meta.update(months=months, kind="fam")
    return model


def build_tfacpp_pairing(
    inst: Instance,
    networks: Networks,
    pools: Pools,
    relax: bool = False,
    relax_z: Optional[bool] = None,
    months: Optional[Iterable[str]] = None,
    cover: str = COVER_EQ,
) -> LinearModel:
    """Integrated model with pairing-form crew rows (linking + monthly + yearly)."""
    months = tuple(inst.months if months is None else months)
    model = LinearModel("tfacpp", Sense.MAXIMIZE)
    for m in months:
        add_fleet_block(model, inst, networks, m, relax, cover)
    add_pairing_block(model, inst, months, pools, relax if relax_z is None else relax_z)
    model.meta.update(months=months, kind="tfacpp")
    return model


def build_bim_legbased(
    inst: Instance,
    networks: Networks,
    pools: Optional[Pools] = None,
    relax: bool = False,
    relax_z: Optional[bool] = None,
    months: Optional[Iterable[str]] = None,
    cover: str = COVER_EQ,
    monthly_rhs: Optional[Mapping[Tuple[str, str], float]] = None,
    yearly_rhs: Optional[Mapping[str, float]] = None,
) -> LinearModel:
    """Integrated model with leg-based crew rows.

    With ``pools`` the pairing variables and linking rows are kept; without
    them the model is the pure leg-based fleet assignment with crew budgets.
    """
    months = tuple(inst.months if months is None else months)
    model = LinearModel("bim", Sense.MAXIMIZE)
    for m in months:
        add_fleet_block(model, inst, networks, m, relax, cover)
    if pools is not None:
        add_pairing_block(model, inst, months, pools, relax if relax_z is None else relax_z,
                          pairing_crew_rows=False)
    add_leg_crew_rows(model, inst, months, monthly_rhs, yearly_rhs)
    model.meta.update(months=months, kind="bim")
    return model


def build_monolithic_bmp(
    inst: Instance,
    networks: Networks,
    cuts: Sequence[OptimalityCut] = (),
    relax: bool = False,
    months: Optional[Iterable[str]] = None,
    cover: str = COVER_EQ,
    monthly_rhs: Optional[Mapping[Tuple[str, str], float]] = None,
    yearly_rhs: Optional[Mapping[str, float]] = None,
) -> LinearModel:
    """Benders master: leg-based BIM plus ``eta >= cut`` rows per (month, family)."""
    months = tuple(inst.months if months is None else months)
    model = build_bim_legbased(inst, networks, None, relax, None, months, cover, monthly_rhs, yearly_rhs)
    add_cut_rows(model, inst, cuts, months)
    model.name = "bmp"
    model.meta.update(kind="bmp")
    return model


# ---------------------------------------------------------------------------
# extraction


def crew_hours(inst: Instance, x_values: Mapping[Tuple[str, str, str], float]) -> Dict[Tuple[str, str], float]:
    """Leg-based crew flight hours per (month, family) from x values."""
    out: Dict[Tuple[str, str], float] = {(m, b.id): 0.0 for m in inst.months for b in inst.families}
    for (m, lid, fid), v in x_values.items():
        b = inst.family_of(fid)
        out[(m, b)] = out.get((m, b), 0.0) + leg_flight_time(inst.leg_by_id[lid], b) * v
    return out


def fleet_profit(inst: Instance, x_values: Mapping[Tuple[str, str, str], float]) -> float:
    return math.fsum(leg_profit(inst.leg_by_id[lid], inst.fleet_type_by_id[fid]) * v
                     for (m, lid, fid), v in x_values.items())


def extract_solution(model: LinearModel, result: SolveResult, inst: Instance) -> Solution:
    """Split a solve result into assignment, flows, pairings, usage and duals."""
    sol = Solution(status=result.status.value, objective=result.objective)
    for name, v in result.primal.items():
        parts = name.split("|")
        if parts[0] == "x" and v > 1e-9:
            sol.x_values[(parts[1], parts[2], parts[3])] = v
        elif parts[0] == "y" and v > 1e-9:
            sol.ground_flows[(parts[1], parts[2], parts[3])] = v
        elif parts[0] == "z" and v > 1e-9:
            sol.pairing_selection.setdefault((parts[1], parts[2]), {})[parts[3]] = v
    for (m, lid, fid), v in sol.x_values.items():
        if v > 0.5:
            sol.assignment[(m, lid)] = fid
    months = model.meta.get("months", inst.months)
    for m in months:
        for leg in inst.legs_in(m):
            if (m, leg.id) not in sol.assignment:
                sol.dropped_legs.append((m, leg.id))
    sol.crew_time_used = crew_hours(inst, sol.x_values)
    sol.profit = fleet_profit(inst, sol.x_values)
    sol.crew_cost = sol.profit - sol.objective if math.isfinite(sol.objective) else math.nan
    if result.duals:
        beta = {k.split("|")[1]: v for k, v in result.duals.items() if k.startswith("year|")}
        gamma: Dict[str, Dict[str, float]] = {}
        for k, v in result.duals.items():
            if k.startswith("count|"):
                _, m, f = k.split("|")
                gamma.setdefault(f, {})[m] = v
        sol.duals = {"beta": beta, "gamma": gamma}
    return sol
