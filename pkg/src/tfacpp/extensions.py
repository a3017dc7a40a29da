"""Crew transition between fleet families and chance-constrained crew budgets."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from .instance import Instance
from .models import COVER_EQ, Solution, add_fleet_block, build_bim_legbased, family_hours_row
from .solver import LinearModel, Sense, SolveResult, Status, solve_lp
from .timespace import Networks

CUM_TOL = 1e-12


def v_name(b1: str, b2: str) -> str:
    return f"v|{b1}|{b2}"


@dataclass(frozen=True)
class TransitionPlan:
    v: Dict[Tuple[str, str], float]
    effective_crew: Dict[str, float]
    total_cost: float


def absence_cost(training_years: float, beta_b: float, yearly_cap_per_crew: float) -> float:
    """Profit lost while a crew member trains: duration x (dual x yearly hours per crew)."""
    return training_years * beta_b * yearly_cap_per_crew


def base_crew_duals(inst: Instance, networks: Networks, cover: str = COVER_EQ) -> Dict[str, float]:
    """Yearly crew-time duals of the leg-based model's LP relaxation."""
    res = solve_lp(build_bim_legbased(inst, networks, relax=True, cover=cover))
    if res.status is not Status.OPTIMAL:
        raise RuntimeError(f"base LP is {res.status.value}")
    return {b.id: res.duals[f"year|{b.id}"] for b in inst.families}


def transition_costs(inst: Instance, beta: Optional[Mapping[str, float]] = None) -> Dict[Tuple[str, str], float]:
    """Per-crew cost of each transition: training cost plus absence cost.

    Absence is valued at the target family's yearly crew marginal profit.
    ``beta=None`` leaves the absence component out.
    """
    out = {}
    for arc in inst.transition:
        b2 = inst.family_by_id[arc.target]
        extra = absence_cost(arc.training_years, beta.get(arc.target, 0.0), b2.yearly_cap_per_crew) if beta else 0.0
        out[(arc.source, arc.target)] = arc.cost + extra
    return out


def build_tfacpp_ct(
    inst: Instance,
    networks: Networks,
    costs: Optional[Mapping[Tuple[str, str], float]] = None,
    relax: bool = False,
    relax_v: bool = False,
    cover: str = COVER_EQ,
    months: Optional[Sequence[str]] = None,
) -> LinearModel:
    """Leg-based integrated model where crews may be moved between families.

    Crew budgets become (k_b + inflow - outflow) x per-crew cap; the
    objective subtracts the transition cost. ``costs`` defaults to the
    training costs of the instance's transition arcs.
    """
    months = tuple(inst.months if months is None else months)
    costs = transition_costs(inst) if costs is None else costs
    model = LinearModel("tfacpp_ct", Sense.MAXIMIZE)
    for m in months:
        add_fleet_block(model, inst, networks, m, relax, cover)
    flows: Dict[str, Dict[str, float]] = {b.id: {} for b in inst.families}
    for arc in inst.transition:
        v = model.add_var(v_name(arc.source, arc.target), 0.0, float(arc.cap), -costs.get((arc.source, arc.target),
                                                                                           arc.cost),
                          integer=not (relax or relax_v))
        flows[arc.target][v] = flows[arc.target].get(v, 0.0) + 1.0
        flows[arc.source][v] = flows[arc.source].get(v, 0.0) - 1.0
    for b in inst.families:
        year_row: Dict[str, float] = {}
        for m in months:
            row = family_hours_row(inst, model, m, b.id)
            year_row.update(row)
            cap = b.monthly_cap_per_crew[m]
            for v, s in flows[b.id].items():
                row[v] = row.get(v, 0.0) - s * cap
            model.add_constr(f"month|{m}|{b.id}", row, "<=", b.crew_count * cap)
        for v, s in flows[b.id].items():
            year_row[v] = year_row.get(v, 0.0) - s * b.yearly_cap_per_crew
        model.add_constr(f"year|{b.id}", year_row, "<=", b.crew_count * b.yearly_cap_per_crew)
        if flows[b.id]:
            model.add_constr(f"crew|{b.id}", {v: -s for v, s in flows[b.id].items()}, "<=", float(b.crew_count))
    model.meta.update(months=months, kind="tfacpp_ct", costs=dict(costs))
    return model


def transition_plan(inst: Instance, model: LinearModel, result: SolveResult) -> TransitionPlan:
    costs = model.meta.get("costs", {})
    v = {(a.source, a.target): result.primal.get(v_name(a.source, a.target), 0.0) for a in inst.transition}
    eff = {b.id: float(b.crew_count) for b in inst.families}
    for (b1, b2), n in v.items():
        eff[b1] -= n
        eff[b2] += n
    total = sum(costs.get(k, 0.0) * n for k, n in v.items())
    return TransitionPlan(v, eff, total)


# ---------------------------------------------------------------------------
# chance-constrained budgets


@dataclass(frozen=True)
class ScenarioQuantile:
    family: str
    q0: int
    value: float


def quantile_index(rho: Sequence[float], phi: Sequence[float], epsilon: float, family: str = "") -> ScenarioQuantile:
    """Smallest 1-based q0 whose cumulative probability reaches ``epsilon``.

    With ascending scenarios this brackets epsilon as
    sum(phi[:q0-1]) < epsilon <= sum(phi[:q0]).
    """
    if len(rho) != len(phi) or len(rho) == 0:
        raise ValueError("rho and phi must be nonempty and equally long")
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    if abs(math.fsum(phi) - 1.0) > 1e-9:
        raise ValueError("phi must sum to 1")
    cum = np.cumsum(np.asarray(phi, dtype=float))
    idx = int(np.searchsorted(cum, epsilon - CUM_TOL, side="left"))
    idx = min(idx, len(rho) - 1)
    return ScenarioQuantile(family, idx + 1, float(rho[idx]))


def cu_yearly_rhs(inst: Instance) -> Dict[str, float]:
    out = {}
    for b in inst.families:
        u = inst.uncertainty_for(b.id)
        out[b.id] = quantile_index(u.rho, u.phi, u.epsilon, b.id).value
    return out


def build_tfacpp_cu(
    inst: Instance,
    networks: Networks,
    relax: bool = False,
    cover: str = COVER_EQ,
    months: Optional[Sequence[str]] = None,
) -> LinearModel:
    """Deterministic equivalent: leg-based model with each yearly budget at its quantile."""
    model = build_bim_legbased(inst, networks, relax=relax, months=months, cover=cover,
                               yearly_rhs=cu_yearly_rhs(inst))
    model.name = "tfacpp_cu"
    model.meta.update(kind="tfacpp_cu")
    return model


@dataclass(frozen=True)
class ChanceCheck:
    family: str
    usage: float
    probability: float
    std_error: float
    target: float

    @property
    def ok(self) -> bool:
        return self.probability >= self.target - 3.0 * self.std_error


def monte_carlo_check(inst: Instance, solution: Solution, draws: int = 100_000,
                      seed: int = 0) -> Dict[str, ChanceCheck]:
    """Estimate P{yearly usage <= sampled available hours} per family."""
    rng = np.random.default_rng(seed)
    out = {}
    for b in inst.families:
        u = inst.uncertainty_for(b.id)
        usage = sum(v for (m, fam), v in solution.crew_time_used.items() if fam == b.id)
        sample = rng.choice(np.asarray(u.rho, dtype=float), size=draws, p=np.asarray(u.phi, dtype=float))
        p = float(np.mean(usage <= sample + 1e-6))
        se = math.sqrt(max(p * (1.0 - p), 0.0) / draws)
        out[b.id] = ChanceCheck(b.id, usage, p, se, 1.0 - u.epsilon)
    return out

