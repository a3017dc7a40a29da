"""Crew pairing enumeration and the set-partitioning crew pairing model."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

from .instance import MINUTES_PER_DAY, CrewPolicy, FlightLeg, Instance, leg_flight_time
from .solver import LinearModel, Sense, Status, solve_lp, solve_mip


class PairingLimitError(RuntimeError):
    """Enumeration produced more pairings than the configured cap."""


@dataclass(frozen=True)
class PairingRules:
    crew_bases: Tuple[str, ...]
    max_duty_legs: int = 4
    min_connect: int = 45
    max_duty_span: float = 12.0
    max_pairing_days: int = 4
    max_duty_flight_hours: float = 10.0
    min_rest: int = 600

    def __post_init__(self):
        if not 1 <= self.max_pairing_days <= 5:
            raise ValueError("max_pairing_days must lie in [1, 5]")
        if self.min_connect < 0:
            raise ValueError("min_connect must be nonnegative")
        if self.min_rest < self.min_connect:
            raise ValueError("min_rest must be at least min_connect")

    @classmethod
    def from_policy(cls, policy: CrewPolicy) -> "PairingRules":
        return cls(
            crew_bases=tuple(policy.crew_bases),
            max_duty_legs=policy.max_duty_legs,
            min_connect=policy.min_connect,
            max_duty_span=policy.max_duty_span,
            max_pairing_days=policy.max_pairing_days,
            max_duty_flight_hours=policy.max_duty_flight_hours,
            min_rest=policy.min_rest,
        )


@dataclass(frozen=True)
class CostModel:
    pay_rate: float
    min_guarantee: float

    @classmethod
    def from_policy(cls, policy: CrewPolicy) -> "CostModel":
        return cls(policy.pay_rate, policy.min_guarantee)


@dataclass(frozen=True)
class Pairing:
    id: str
    family_id: str
    month: str
    legs: Tuple[str, ...]
    cost: float
    flight_time: float
    days: int = 1
    artificial: bool = False

    def covers(self, leg_id: str) -> bool:
        return leg_id in self.legs


def pairing_cost(p: Pairing, cost_model: CostModel) -> float:
    """Pay for the flight hours, floored by the daily guarantee."""
    return max(cost_model.pay_rate * p.flight_time, cost_model.min_guarantee * p.days)


# ---------------------------------------------------------------------------
# enumeration


@dataclass
class _State:
    base: str
    seq: List[FlightLeg]
    arr: int
    duty_start: int
    duty_legs: int
    duty_hours: float


def _next_departure(leg: FlightLeg, earliest: int) -> int:
    return earliest + (leg.departure - earliest) % MINUTES_PER_DAY


def enumerate_pairings(
    inst: Instance,
    month: str,
    family_id: str,
    rules: Optional[PairingRules] = None,
    leg_subset: Optional[Iterable[str]] = None,
    cost_model: Optional[CostModel] = None,
    max_pairings: int = 200_000,
) -> List[Pairing]:
    """All legal pairings of ``family_id`` over the legs of ``month``.

    Legs repeat daily. After each leg the crew either connects within the
    duty (earliest departure at least ``min_connect`` later, provided the
    sit is shorter than ``min_rest``) or rests (earliest departure at least
    ``min_rest`` later). A pairing ends at its first return to the base it
    started from. If one leg sequence admits several timings, the one
    spanning the fewest days is kept.
    """
    rules = rules or PairingRules.from_policy(inst.crew_policy)
    cost_model = cost_model or CostModel.from_policy(inst.crew_policy)
    legs = list(inst.legs_in(month))
    if leg_subset is not None:
        allowed = set(leg_subset)
        unknown = allowed - {leg.id for leg in legs}
        if unknown:
            raise ValueError(f"legs {sorted(unknown)} are not in month {month}")
        legs = [leg for leg in legs if leg.id in allowed]
    by_origin: Dict[str, List[FlightLeg]] = {}
    for leg in legs:
        by_origin.setdefault(leg.origin, []).append(leg)
    dur = {leg.id: leg.duration_by_family[family_id] for leg in legs}
    max_span = rules.max_duty_span * 60.0
    horizon = rules.max_pairing_days * MINUTES_PER_DAY
    found: Dict[Tuple[str, ...], int] = {}

    def record(seq: List[FlightLeg], arr: int) -> None:
        key = tuple(leg.id for leg in seq)
        days = (arr - 1) // MINUTES_PER_DAY + 1
        if key not in found or days < found[key]:
            found[key] = days
            if len(found) > max_pairings:
                raise PairingLimitError(f"more than {max_pairings} pairings for ({month}, {family_id})")

    def extend(st: _State) -> None:
        used = {leg.id for leg in st.seq}
        station = st.seq[-1].destination
        for nxt in by_origin.get(station, ()):
            if nxt.id in used:
                continue
            options = []
            dep = _next_departure(nxt, st.arr + rules.min_connect)
            if dep - st.arr < rules.min_rest:
                options.append((dep, False))
            options.append((_next_departure(nxt, st.arr + rules.min_rest), True))
            for dep, rest in options:
                arr = dep + nxt.elapsed
                if arr > horizon:
                    continue
                if rest:
                    duty_start, duty_legs, duty_hours = dep, 1, dur[nxt.id]
                else:
                    duty_start, duty_legs, duty_hours = st.duty_start, st.duty_legs + 1, st.duty_hours + dur[nxt.id]
                if (duty_legs > rules.max_duty_legs or arr - duty_start > max_span
                        or duty_hours > rules.max_duty_flight_hours + 1e-9):
                    continue
                seq = st.seq + [nxt]
                if nxt.destination == st.base:
                    record(seq, arr)
                else:
                    extend(_State(st.base, seq, arr, duty_start, duty_legs, duty_hours))

    for first in legs:
        if first.origin not in rules.crew_bases:
            continue
        if first.elapsed > max_span or dur[first.id] > rules.max_duty_flight_hours + 1e-9:
            continue
        start = first.departure
        arr = start + first.elapsed
        if first.destination == first.origin:
            continue
        extend(_State(first.origin, [first], arr, start, 1, dur[first.id]))

    leg_by_id = {leg.id: leg for leg in legs}
    out = []
    for i, (key, days) in enumerate(sorted(found.items())):
        flight_time = sum(leg_flight_time(leg_by_id[lid], family_id) for lid in key)
        proto = Pairing(f"p:{family_id}:{month}:{i}", family_id, month, key, 0.0, flight_time, days)
        out.append(Pairing(proto.id, family_id, month, key, pairing_cost(proto, cost_model), flight_time, days))
    return out


def artificial_pairings(
    inst: Instance,
    month: str,
    family_id: str,
    leg_ids: Optional[Iterable[str]] = None,
    cost_model: Optional[CostModel] = None,
    multiplier: Optional[float] = None,
) -> List[Pairing]:
    """Single-leg, high-cost closing pairings that keep every cover row feasible."""
    cost_model = cost_model or CostModel.from_policy(inst.crew_policy)
    multiplier = inst.crew_policy.artificial_multiplier if multiplier is None else multiplier
    legs = inst.legs_in(month) if leg_ids is None else [inst.leg_by_id[i] for i in leg_ids]
    out = []
    for leg in legs:
        t = leg_flight_time(leg, family_id)
        proto = Pairing(f"a:{family_id}:{leg.id}", family_id, month, (leg.id,), 0.0, t, 1, True)
        out.append(Pairing(proto.id, family_id, month, (leg.id,), multiplier * pairing_cost(proto, cost_model), t, 1,
                           True))
    return out


def pairing_pool(
    inst: Instance,
    month: str,
    family_id: str,
    rules: Optional[PairingRules] = None,
    cost_model: Optional[CostModel] = None,
    max_pairings: int = 200_000,
) -> List[Pairing]:
    """Enumerated legal pairings plus one artificial pairing per leg."""
    return enumerate_pairings(inst, month, family_id, rules, None, cost_model, max_pairings) + artificial_pairings(
        inst, month, family_id, cost_model=cost_model
    )


Pools = Dict[Tuple[str, str], List[Pairing]]


def build_pools(inst: Instance, rules: Optional[PairingRules] = None, cost_model: Optional[CostModel] = None) -> Pools:
    return {(m, b.id): pairing_pool(inst, m, b.id, rules, cost_model) for m in inst.months for b in inst.families}


# ---------------------------------------------------------------------------
# crew pairing model


@dataclass
class CppResult:
    status: Status
    objective: float
    selection: Dict[str, float] = field(default_factory=dict)
    duals: Dict[str, float] = field(default_factory=dict)


def _cover_model(pairings: Sequence[Pairing], rhs: Mapping[str, float], integer: bool) -> LinearModel:
    model = LinearModel("cpp", Sense.MINIMIZE)
    rows: Dict[str, Dict[str, float]] = {lid: {} for lid in rhs}
    for p in pairings:
        if not all(lid in rows for lid in p.legs):
            continue
        model.add_var(p.id, 0.0, 1.0 if integer else math.inf, p.cost, integer)
        for lid in p.legs:
            rows[lid][p.id] = 1.0
    for lid, r in rhs.items():
        model.add_constr(lid, rows[lid], "==", r)
    return model


def solve_cover(pairings: Sequence[Pairing], rhs: Mapping[str, float], relax: bool = True) -> CppResult:
    """Min-cost cover with one ``==`` row per key of ``rhs``.

    Pairings touching a leg outside ``rhs`` are not eligible. Rows with
    right-hand side 0 keep their pairings out of the solution while still
    pricing them in the dual, which is what makes the duals feasible for
    every pairing in ``pairings`` that lies inside ``rhs``.
    """
    model = _cover_model(pairings, rhs, integer=not relax)
    res = solve_lp(model) if relax else solve_mip(model, gap=0.0)
    if res.status is not Status.OPTIMAL:
        return CppResult(res.status, math.nan)
    selection = {k: v for k, v in res.primal.items() if abs(v) > 1e-9}
    return CppResult(res.status, res.objective, selection, dict(res.duals) if relax else {})


def solve_cpp(pairings: Sequence[Pairing], legs_to_cover: Iterable[str], relax: bool = True) -> CppResult:
    """Set-partitioning crew pairing problem over ``legs_to_cover``."""
    return solve_cover(pairings, {lid: 1.0 for lid in legs_to_cover}, relax)


# ---------------------------------------------------------------------------
# pool persistence


def pools_to_json(pools: Pools) -> str:
    data = [
        {
            "month": m,
            "family": b,
            "pairings": [
                {"id": p.id, "legs": list(p.legs), "cost": p.cost, "flight_time": p.flight_time, "days": p.days,
                 "artificial": p.artificial}
                for p in ps
            ],
        }
        for (m, b), ps in pools.items()
    ]
    return json.dumps(data, indent=1) + "\n"


def pools_from_json(text: str) -> Pools:
    out: Pools = {}
    for block in json.loads(text):
        m, b = str(block["month"]), str(block["family"])
        out[(m, b)] = [
            Pairing(str(p["id"]), b, m, tuple(p["legs"]), float(p["cost"]), float(p["flight_time"]),
                    int(p.get("days", 1)), bool(p.get("artificial", False)))
            for p in block["pairings"]
        ]
    return out


def save_pools(pools: Pools, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(pools_to_json(pools), encoding="utf-8")
    return path


def load_pools(path: str | Path) -> Pools:
    return pools_from_json(Path(path).read_text(encoding="utf-8"))
