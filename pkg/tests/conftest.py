from __future__ import annotations

from typing import Dict, Iterable, Optional, Sequence, Tuple

import pytest

from tfacpp.instance import (
    CrewPolicy,
    FleetFamily,
    FleetType,
    FlightLeg,
    Instance,
    TransitionArc,
    generate_synthetic,
)
from tfacpp.timespace import build_networks

LegSpec = Tuple[str, str, str, int, int]  # id, origin, destination, departure, arrival


def hand_instance(
    legs: Sequence[LegSpec],
    types: Sequence[Tuple[str, str, int, int]] = (("T1", "B1", 100, 1),),
    costs: Optional[Dict[Tuple[str, str], int]] = None,
    month: str = "1",
    frequency: int = 30,
    demand: float = 150.0,
    fare: int = 100,
    duration: float = 1.0,
    crew: Tuple[int, float, float] = (10, 100.0, 1000.0),
    bases: Iterable[str] = ("A",),
    turn: int = 45,
    transition: Sequence[TransitionArc] = (),
) -> Instance:
    """Small instance from explicit legs; every type can fly every leg."""
    fams: Dict[str, list] = {}
    for tid, fam, _, _ in types:
        fams.setdefault(fam, []).append(tid)
    stations = sorted({s for _, o, d, _, _ in legs for s in (o, d)} | set(bases))
    costs = costs or {}
    ftypes = tuple(
        FleetType(tid, fam, seats, count, {lid: costs.get((lid, tid), 1000) for lid, *_ in legs}, turn)
        for tid, fam, seats, count in types
    )
    families = tuple(
        FleetFamily(b, tuple(ids), crew[0], {month: crew[1]}, crew[2]) for b, ids in sorted(fams.items())
    )
    flight_legs = tuple(
        FlightLeg(lid, month, o, d, dep, arr, frequency, {b: duration for b in fams}, demand, fare)
        for lid, o, d, dep, arr in legs
    )
    return Instance(
        months=(month,),
        stations=tuple(stations),
        fleet_types=ftypes,
        families=families,
        legs=flight_legs,
        crew_policy=CrewPolicy(crew_bases=tuple(bases)),
        transition=tuple(transition),
    )


def tiny(seed: int, stations: int = 3, families: int = 2, fleet_types: int = 3, legs: int = 6,
         months: int = 2) -> Instance:
    return generate_synthetic(seed, stations=stations, families=families, fleet_types=fleet_types,
                              legs_per_month=legs, months=months)


@pytest.fixture(scope="session")
def desk():
    inst = generate_synthetic(0)
    return inst, build_networks(inst)


@pytest.fixture(scope="session")
def small():
    inst = tiny(1, stations=4, legs=10, months=3)
    return inst, build_networks(inst)


def random_assignment(inst: Instance, networks, seed: int):
    """A feasible fleet assignment: the fleet model under a random objective."""
    import numpy as np

    from tfacpp.models import build_fam, extract_solution
    from tfacpp.solver import solve_mip

    rng = np.random.default_rng(seed)
    model = build_fam(inst, networks)
    for name in model.variables:
        if name.startswith("x|"):
            model.set_obj(name, float(rng.uniform(-1.0, 1.0)))
    res = solve_mip(model)
    assert res.ok
    return extract_solution(model, res, inst).assignment


# acceptance criteria outcomes, reported at the end of the run
ACCEPTANCE: Dict[int, Tuple[str, bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {title}  {detail}".rstrip())
