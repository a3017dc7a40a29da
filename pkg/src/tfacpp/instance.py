"""Instance data model, JSON ingestion/validation, synthetic generation and
demand perturbation.

Units used throughout the package:

* times of day are integer minutes in ``[0, 1440)``;
* flight durations, crew caps and crew flight times are hours (floats,
  serialized with three fractional digits);
* money (fares, operating costs, transition costs) is integer minor units.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

MINUTES_PER_DAY = 1440
DEMAND_LEVELS = ("high", "mid", "low")
_DEMAND_RANGES = {"high": (1.1, 1.2), "low": (0.8, 0.9)}
_DAYS_IN_MONTH = (31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31)


class InstanceError(Exception):
    """Base class for instance ingestion problems."""


class InstanceParseError(InstanceError):
    """The instance file is not well-formed JSON or misses top-level keys."""


class InstanceValidationError(InstanceError):
    """One or more invariant violations; ``errors`` lists all of them."""

    def __init__(self, errors: Sequence[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class FleetType:
    id: str
    family_id: str
    seats: int
    aircraft_count: int
    operating_cost: Dict[str, int] = field(default_factory=dict)
    min_turn_time: int = 45


@dataclass(frozen=True)
class FleetFamily:
    id: str
    fleet_type_ids: Tuple[str, ...]
    crew_count: int
    monthly_cap_per_crew: Dict[str, float]
    yearly_cap_per_crew: float


@dataclass(frozen=True)
class FlightLeg:
    id: str
    month: str
    origin: str
    destination: str
    departure: int
    arrival: int
    frequency: int
    duration_by_family: Dict[str, float]
    demand: float
    fare: int

    @property
    def elapsed(self) -> int:
        """Block minutes from departure to arrival (overnight legs wrap)."""
        return (self.arrival - self.departure) % MINUTES_PER_DAY


@dataclass(frozen=True)
class CrewPolicy:
    """Crew work rules and pay parameters used for pairing generation."""

    crew_bases: Tuple[str, ...] = ()
    min_connect: int = 45
    max_duty_legs: int = 4
    max_duty_span: float = 12.0
    max_pairing_days: int = 4
    max_duty_flight_hours: float = 10.0
    min_rest: int = 600
    pay_rate: int = 300
    min_guarantee: int = 36000
    artificial_multiplier: float = 3.0
    empirical_markup: float = 1.0


@dataclass(frozen=True)
class TransitionArc:
    source: str
    target: str
    cost: int
    cap: int
    training_years: float = 0.0


@dataclass(frozen=True)
class Uncertainty:
    """Discrete distribution of a family's yearly available crew hours."""

    rho: Tuple[float, ...]
    phi: Tuple[float, ...]
    epsilon: float


@dataclass(frozen=True)
class TimeBudget:
    yearly: float
    monthly: Dict[str, float]


@dataclass(frozen=True)
class Instance:
    months: Tuple[str, ...]
    stations: Tuple[str, ...]
    fleet_types: Tuple[FleetType, ...]
    families: Tuple[FleetFamily, ...]
    legs: Tuple[FlightLeg, ...]
    crew_policy: CrewPolicy = CrewPolicy()
    transition: Tuple[TransitionArc, ...] = ()
    uncertainty: Dict[str, Uncertainty] = field(default_factory=dict)

    @cached_property
    def fleet_type_by_id(self) -> Dict[str, FleetType]:
        return {f.id: f for f in self.fleet_types}

    @cached_property
    def family_by_id(self) -> Dict[str, FleetFamily]:
        return {b.id: b for b in self.families}

    @cached_property
    def leg_by_id(self) -> Dict[str, FlightLeg]:
        return {leg.id: leg for leg in self.legs}

    @cached_property
    def _legs_by_month(self) -> Dict[str, Tuple[FlightLeg, ...]]:
        out: Dict[str, List[FlightLeg]] = {m: [] for m in self.months}
        for leg in self.legs:
            out.setdefault(leg.month, []).append(leg)
        return {m: tuple(v) for m, v in out.items()}

    def legs_in(self, month: str) -> Tuple[FlightLeg, ...]:
        return self._legs_by_month.get(month, ())

    def family_of(self, fleet_type_id: str) -> str:
        return self.fleet_type_by_id[fleet_type_id].family_id

    @property
    def min_turn_time(self) -> Dict[str, int]:
        return {f.id: f.min_turn_time for f in self.fleet_types}

    @property
    def transition_cost(self) -> Dict[Tuple[str, str], int]:
        return {(a.source, a.target): a.cost for a in self.transition}

    @property
    def transition_cap(self) -> Dict[Tuple[str, str], int]:
        return {(a.source, a.target): a.cap for a in self.transition}

    def uncertainty_for(self, family_id: str) -> Uncertainty:
        """Scenario distribution for ``family_id``.

        Falls back to a three-point distribution at 95/100/105 % of the
        family's yearly budget (probabilities 1/4, 1/2, 1/4, risk 0.1).
        """
        if family_id in self.uncertainty:
            return self.uncertainty[family_id]
        tb = family_time_budget(self.family_by_id[family_id]).yearly
        return Uncertainty(rho=(0.95 * tb, tb, 1.05 * tb), phi=(0.25, 0.5, 0.25), epsilon=0.1)


# ---------------------------------------------------------------------------
# derived quantities


def leg_profit(leg: FlightLeg, fleet_type: FleetType, month: Optional[str] = None) -> float:
    """Monthly profit of flying ``leg`` with ``fleet_type``.

    Revenue is capped by the seat count (spilled passengers earn nothing):
    ``fare * min(demand, seats) * frequency - operating_cost``.
    """
    if month is not None and month != leg.month:
        raise ValueError(f"leg {leg.id} belongs to month {leg.month}, not {month}")
    try:
        cost = fleet_type.operating_cost[leg.id]
    except KeyError:
        raise ValueError(f"fleet type {fleet_type.id} has no operating cost for leg {leg.id}") from None
    return leg.fare * min(leg.demand, fleet_type.seats) * leg.frequency - cost


def leg_flight_time(leg: FlightLeg, family_id: str) -> float:
    """Monthly crew flight hours of a leg flown by ``family_id`` (frequency x duration)."""
    return leg.frequency * leg.duration_by_family[family_id]


def family_time_budget(family: FleetFamily) -> TimeBudget:
    return TimeBudget(
        yearly=family.crew_count * family.yearly_cap_per_crew,
        monthly={m: family.crew_count * cap for m, cap in family.monthly_cap_per_crew.items()},
    )


# ---------------------------------------------------------------------------
# validation


def validate_instance(inst: Instance) -> Instance:
    """Return ``inst`` unchanged or raise InstanceValidationError listing every violation."""
    errors: List[str] = []
    if not inst.months:
        errors.append("no months")
    if len(set(inst.months)) != len(inst.months):
        errors.append("duplicate month ids")
    if not inst.legs:
        errors.append("no legs")
    stations = set(inst.stations)
    months = set(inst.months)
    family_ids = {b.id for b in inst.families}
    type_ids = [f.id for f in inst.fleet_types]
    if len(set(type_ids)) != len(type_ids):
        errors.append("duplicate fleet type ids")
    if len(family_ids) != len(inst.families):
        errors.append("duplicate family ids")

    for f in inst.fleet_types:
        if f.seats <= 0:
            errors.append(f"fleet type {f.id}: seats must be positive")
        if f.aircraft_count < 0:
            errors.append(f"fleet type {f.id}: negative aircraft count")
        if f.family_id not in family_ids:
            errors.append(f"fleet type {f.id}: unknown family {f.family_id}")
        if f.min_turn_time < 0:
            errors.append(f"fleet type {f.id}: negative min turn time")

    claimed: Dict[str, str] = {}
    for b in inst.families:
        if b.crew_count < 0:
            errors.append(f"family {b.id}: negative crew count")
        if b.yearly_cap_per_crew < 0:
            errors.append(f"family {b.id}: negative yearly cap")
        for m in inst.months:
            if m not in b.monthly_cap_per_crew:
                errors.append(f"family {b.id}: no monthly cap for month {m}")
        for m, cap in b.monthly_cap_per_crew.items():
            if cap < 0:
                errors.append(f"family {b.id}: negative monthly cap in month {m}")
        for fid in b.fleet_type_ids:
            if fid in claimed:
                errors.append(f"fleet type {fid} listed in families {claimed[fid]} and {b.id}")
            claimed[fid] = b.id
            ft = inst.fleet_type_by_id.get(fid)
            if ft is None:
                errors.append(f"family {b.id}: unknown fleet type {fid}")
            elif ft.family_id != b.id:
                errors.append(f"family {b.id}: fleet type {fid} declares family {ft.family_id}")
    for f in inst.fleet_types:
        if f.id not in claimed:
            errors.append(f"fleet type {f.id} not listed in any family")

    seen: set = set()
    for leg in inst.legs:
        if leg.id in seen:
            errors.append(f"duplicate leg id {leg.id}")
        seen.add(leg.id)
        if leg.month not in months:
            errors.append(f"leg {leg.id}: unknown month {leg.month}")
        for s in (leg.origin, leg.destination):
            if s not in stations:
                errors.append(f"leg {leg.id}: unknown station {s}")
        if leg.origin == leg.destination:
            errors.append(f"leg {leg.id}: origin equals destination")
        for t in (leg.departure, leg.arrival):
            if not 0 <= t < MINUTES_PER_DAY:
                errors.append(f"leg {leg.id}: time {t} outside [0, 1440)")
        if leg.departure == leg.arrival:
            errors.append(f"leg {leg.id}: zero block time")
        if leg.frequency < 0:
            errors.append(f"leg {leg.id}: negative frequency")
        if leg.demand < 0:
            errors.append(f"leg {leg.id}: negative demand")
        missing = family_ids - set(leg.duration_by_family)
        if missing:
            errors.append(f"leg {leg.id}: no duration for families {sorted(missing)}")
    for f in inst.fleet_types:
        for lid in f.operating_cost:
            if lid not in seen:
                errors.append(f"fleet type {f.id}: cost for unknown leg {lid}")

    for base in inst.crew_policy.crew_bases:
        if base not in stations:
            errors.append(f"crew base {base} is not a station")

    for a in inst.transition:
        if a.source not in family_ids or a.target not in family_ids:
            errors.append(f"transition {a.source}->{a.target}: unknown family")
        if a.source == a.target:
            errors.append(f"transition {a.source}->{a.target}: self transition")
        if a.cap < 0:
            errors.append(f"transition {a.source}->{a.target}: negative cap")

    for b, u in inst.uncertainty.items():
        if b not in family_ids:
            errors.append(f"uncertainty for unknown family {b}")
        if len(u.rho) != len(u.phi) or not u.rho:
            errors.append(f"uncertainty {b}: rho/phi length mismatch")
        if any(p < 0 for p in u.phi) or abs(math.fsum(u.phi) - 1.0) > 1e-9:
            errors.append(f"uncertainty {b}: probabilities must be nonnegative and sum to 1")
        if any(u.rho[i] >= u.rho[i + 1] for i in range(len(u.rho) - 1)):
            errors.append(f"uncertainty {b}: scenarios must be strictly ascending")
        if not 0.0 < u.epsilon < 1.0:
            errors.append(f"uncertainty {b}: epsilon must lie in (0, 1)")

    if errors:
        raise InstanceValidationError(errors)
    return inst


# ---------------------------------------------------------------------------
# serialization


def _hours(x: float) -> float:
    return round(float(x), 3)


def instance_to_dict(inst: Instance) -> Dict[str, Any]:
    return {
        "months": list(inst.months),
        "stations": list(inst.stations),
        "fleet_types": [
            {
                "id": f.id,
                "family_id": f.family_id,
                "seats": f.seats,
                "aircraft_count": f.aircraft_count,
                "operating_cost": dict(f.operating_cost),
                "min_turn_time": f.min_turn_time,
            }
            for f in inst.fleet_types
        ],
        "fleet_families": [
            {
                "id": b.id,
                "fleet_type_ids": list(b.fleet_type_ids),
                "crew_count": b.crew_count,
                "monthly_cap_per_crew": {m: _hours(v) for m, v in b.monthly_cap_per_crew.items()},
                "yearly_cap_per_crew": _hours(b.yearly_cap_per_crew),
            }
            for b in inst.families
        ],
        "legs": [
            {
                "id": leg.id,
                "month": leg.month,
                "origin": leg.origin,
                "destination": leg.destination,
                "departure": leg.departure,
                "arrival": leg.arrival,
                "frequency": leg.frequency,
                "duration_by_family": {b: _hours(v) for b, v in leg.duration_by_family.items()},
                "demand": leg.demand,
                "fare": leg.fare,
            }
            for leg in inst.legs
        ],
        "crew_policy": {**asdict(inst.crew_policy), "crew_bases": list(inst.crew_policy.crew_bases)},
        "transition": [
            {"from": a.source, "to": a.target, "cost": a.cost, "cap": a.cap, "training_years": a.training_years}
            for a in inst.transition
        ],
        "uncertainty": {
            b: {"rho": [_hours(r) for r in u.rho], "phi": list(u.phi), "epsilon": u.epsilon}
            for b, u in inst.uncertainty.items()
        },
    }


_TOP_KEYS = ("months", "stations", "fleet_types", "fleet_families", "legs")


def instance_from_dict(data: Mapping[str, Any]) -> Instance:
    """Build an Instance from the JSON document structure (no validation)."""
    missing = [k for k in _TOP_KEYS if k not in data]
    if missing:
        raise InstanceParseError(f"missing top-level keys: {missing}")
    try:
        fleet_types = tuple(
            FleetType(
                id=str(f["id"]),
                family_id=str(f["family_id"]),
                seats=int(f["seats"]),
                aircraft_count=int(f["aircraft_count"]),
                operating_cost={str(k): int(v) for k, v in f.get("operating_cost", {}).items()},
                min_turn_time=int(f.get("min_turn_time", 45)),
            )
            for f in data["fleet_types"]
        )
        families = tuple(
            FleetFamily(
                id=str(b["id"]),
                fleet_type_ids=tuple(str(x) for x in b["fleet_type_ids"]),
                crew_count=int(b["crew_count"]),
                monthly_cap_per_crew=_monthly_caps(b["monthly_cap_per_crew"], data["months"]),
                yearly_cap_per_crew=float(b["yearly_cap_per_crew"]),
            )
            for b in data["fleet_families"]
        )
        legs = tuple(
            FlightLeg(
                id=str(leg["id"]),
                month=str(leg["month"]),
                origin=str(leg["origin"]),
                destination=str(leg["destination"]),
                departure=int(leg["departure"]),
                arrival=int(leg["arrival"]),
                frequency=int(leg["frequency"]),
                duration_by_family={str(k): float(v) for k, v in leg["duration_by_family"].items()},
                demand=float(leg["demand"]),
                fare=int(leg["fare"]),
            )
            for leg in data["legs"]
        )
        policy_raw = dict(data.get("crew_policy") or {})
        policy_raw["crew_bases"] = tuple(policy_raw.get("crew_bases", ()))
        policy = CrewPolicy(**policy_raw)
        transition = tuple(
            TransitionArc(
                source=str(a["from"]),
                target=str(a["to"]),
                cost=int(a["cost"]),
                cap=int(a["cap"]),
                training_years=float(a.get("training_years", 0.0)),
            )
            for a in data.get("transition") or ()
        )
        uncertainty = {
            str(b): Uncertainty(
                rho=tuple(float(r) for r in u["rho"]),
                phi=tuple(float(p) for p in u["phi"]),
                epsilon=float(u["epsilon"]),
            )
            for b, u in (data.get("uncertainty") or {}).items()
        }
    except (KeyError, TypeError, ValueError) as exc:
        raise InstanceParseError(f"malformed instance record: {exc!r}") from exc
    return Instance(
        months=tuple(str(m) for m in data["months"]),
        stations=tuple(str(s) for s in data["stations"]),
        fleet_types=fleet_types,
        families=families,
        legs=legs,
        crew_policy=policy,
        transition=transition,
        uncertainty=uncertainty,
    )


def _monthly_caps(raw: Any, months: Sequence[Any]) -> Dict[str, float]:
    if isinstance(raw, Mapping):
        return {str(k): float(v) for k, v in raw.items()}
    return {str(m): float(raw) for m in months}


def dumps_instance(inst: Instance) -> str:
    return json.dumps(instance_to_dict(inst), indent=1, sort_keys=False, ensure_ascii=False) + "\n"


def save_instance(inst: Instance, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(dumps_instance(inst), encoding="utf-8")
    return path


def load_instance(path: str | Path) -> Instance:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InstanceParseError(f"{path}: {exc}") from exc
    if not isinstance(data, dict):
        raise InstanceParseError(f"{path}: top level must be an object")
    return validate_instance(instance_from_dict(data))


# ---------------------------------------------------------------------------
# demand perturbation


def perturb_demand(inst: Instance, level: str, seed: int) -> Instance:
    """Scale every leg's demand by an i.i.d. uniform factor.

    ``high`` draws from [1.1, 1.2], ``low`` from [0.8, 0.9]; ``mid`` returns
    the instance untouched.
    """
    if level not in DEMAND_LEVELS:
        raise ValueError(f"unknown demand level {level!r}")
    if level == "mid":
        return inst
    lo, hi = _DEMAND_RANGES[level]
    rng = np.random.default_rng(seed)
    factors = rng.uniform(lo, hi, size=len(inst.legs))
    legs = tuple(replace(leg, demand=leg.demand * float(k)) for leg, k in zip(inst.legs, factors))
    return replace(inst, legs=legs)


# ---------------------------------------------------------------------------
# synthetic generator


def generate_synthetic(
    seed: int,
    stations: int = 4,
    families: int = 2,
    fleet_types: int = 3,
    legs_per_month: int = 20,
    months: int = 12,
) -> Instance:
    """Random instance built from closed daily rotations out of a hub.

    Every rotation leaves the hub and returns to it, so any assignment that
    flies whole rotations balances on the cyclic daily network. Station
    ``S0`` is the hub and sole crew base. An odd leg count with only two
    stations is rounded down to the nearest closed rotation (at least 2 legs).

    With ``stations < 2`` no leg can be built; the returned instance is left
    unvalidated and ``validate_instance`` rejects it with "no legs".
    """
    for name, v in (("stations", stations), ("families", families), ("fleet_types", fleet_types),
                    ("legs_per_month", legs_per_month), ("months", months)):
        if v < 1:
            raise ValueError(f"{name} must be >= 1")
    if fleet_types < families:
        raise ValueError("need at least one fleet type per family")
    rng = np.random.default_rng(seed)

    month_ids = tuple(str(i + 1) for i in range(months))
    family_ids = tuple(f"B{i + 1}" for i in range(families))
    station_ids = [f"S{i}" for i in range(stations)]
    hub = station_ids[0]

    # family speed factor: later families are "wide-body" and slightly faster
    speed = {b: 1.0 - 0.05 * (i / max(1, families - 1)) for i, b in enumerate(family_ids)}
    seat_base = {b: 150 + int(130 * i / max(1, families - 1)) for i, b in enumerate(family_ids)}

    type_ids = [f"T{i + 1}" for i in range(fleet_types)]
    type_family = {t: family_ids[i % families] for i, t in enumerate(type_ids)}
    seats = {t: int(seat_base[type_family[t]] + rng.integers(-20, 21)) for t in type_ids}

    # rotation templates shared by all months
    rotations: List[List[Tuple[str, str]]] = []
    outstations = station_ids[1:]
    remaining = legs_per_month
    k = 0
    while outstations and (remaining >= 2 or not rotations):
        x = outstations[k % len(outstations)]
        if remaining == 3 and len(outstations) >= 2:
            y = outstations[(k + 1) % len(outstations)]
            rotations.append([(hub, x), (x, y), (y, hub)])
            remaining -= 3
        else:
            rotations.append([(hub, x), (x, hub)])
            remaining -= 2
        k += 1
    used = {hub} | {s for rot in rotations for pair in rot for s in pair}
    station_list = tuple(s for s in station_ids if s in used) if rotations else tuple(station_ids)

    block: Dict[Tuple[str, str], int] = {}
    for rot in rotations:
        for o, d in rot:
            if (o, d) not in block:
                minutes = int(rng.integers(12, 37)) * 5
                block[(o, d)] = minutes
                block[(d, o)] = minutes
    schedule: List[List[Tuple[str, str, int, int]]] = []
    for rot in rotations:
        t = int(rng.integers(5 * 12, 14 * 12)) * 5
        timed = []
        for o, d in rot:
            dep = t % MINUTES_PER_DAY
            arr = (t + block[(o, d)]) % MINUTES_PER_DAY
            timed.append((o, d, dep, arr))
            t += block[(o, d)] + int(rng.integers(10, 19)) * 5
        schedule.append(timed)
    base_demand = {pair: float(rng.uniform(80, 260)) for pair in block}
    fare_rate = {pair: float(rng.uniform(0.9, 1.4)) for pair in block}

    legs: List[FlightLeg] = []
    costs: Dict[str, Dict[str, int]] = {t: {} for t in type_ids}
    n_rot = len(schedule)
    for mi, m in enumerate(month_ids):
        days = _DAYS_IN_MONTH[mi % 12]
        season = 1.0 + 0.15 * math.cos(2 * math.pi * (mi - 0.5) / 6.0)
        idx = 0
        for r, timed in enumerate(schedule):
            for o, d, dep, arr in timed:
                idx += 1
                lid = f"M{m}-L{idx}"
                bmin = block[(o, d)]
                demand = round(base_demand[(o, d)] * season * float(rng.uniform(0.95, 1.05)), 3)
                legs.append(
                    FlightLeg(
                        id=lid,
                        month=m,
                        origin=o,
                        destination=d,
                        departure=dep,
                        arrival=arr,
                        frequency=days,
                        duration_by_family={b: round(bmin / 60.0 * speed[b], 3) for b in family_ids},
                        demand=demand,
                        fare=int(round(bmin * fare_rate[(o, d)])),
                    )
                )
                for t in type_ids:
                    per_flight = (bmin / 60.0) * (1500 + 25 * seats[t]) * float(rng.uniform(0.9, 1.1))
                    costs[t][lid] = int(round(days * per_flight))

    # aircraft: one per rotation plus slack, every type at least one
    total_aircraft = max(fleet_types, n_rot + 1)
    counts = {t: 1 for t in type_ids}
    for _ in range(total_aircraft - fleet_types):
        counts[type_ids[int(rng.integers(0, fleet_types))]] += 1

    fleet = tuple(
        FleetType(
            id=t,
            family_id=type_family[t],
            seats=seats[t],
            aircraft_count=counts[t],
            operating_cost=costs[t],
            min_turn_time=int(rng.integers(6, 10)) * 5,
        )
        for t in type_ids
    )

    # crew sized to the family's aircraft share of the yearly leg hours, with
    # a thin margin so that the yearly cap tends to bind
    yearly_cap = round(1000.0 * len(month_ids) / 12.0, 3)
    fam_list = []
    for b in family_ids:
        share = sum(counts[t] for t in type_ids if type_family[t] == b) / sum(counts.values())
        need = sum(leg.frequency * leg.duration_by_family[b] for leg in legs)
        crew = max(1, int(math.ceil(share * need / yearly_cap * float(rng.uniform(1.02, 1.15)))))
        fam_list.append(
            FleetFamily(
                id=b,
                fleet_type_ids=tuple(t for t in type_ids if type_family[t] == b),
                crew_count=crew,
                monthly_cap_per_crew={m: 100.0 for m in month_ids},
                yearly_cap_per_crew=yearly_cap,
            )
        )

    transition = tuple(
        TransitionArc(source=a, target=b, cost=int(rng.integers(200, 500)) * 1000, cap=2, training_years=0.25)
        for a in family_ids
        for b in family_ids
        if a != b
    )
    uncertainty = {}
    for fam in fam_list:
        tb = family_time_budget(fam).yearly
        uncertainty[fam.id] = Uncertainty(
            rho=(_hours(0.9 * tb), _hours(0.95 * tb), _hours(tb)), phi=(0.2, 0.5, 0.3), epsilon=0.1
        )

    inst = Instance(
        months=month_ids,
        stations=station_list,
        fleet_types=fleet,
        families=tuple(fam_list),
        legs=tuple(legs),
        crew_policy=CrewPolicy(crew_bases=(hub,)),
        transition=transition,
        uncertainty=uncertainty,
    )
    if stations < 2:
        return inst
    return validate_instance(inst)
