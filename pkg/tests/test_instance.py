from __future__ import annotations

import json
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tfacpp.instance import (
    FleetFamily,
    FleetType,
    InstanceParseError,
    InstanceValidationError,
    dumps_instance,
    family_time_budget,
    generate_synthetic,
    instance_from_dict,
    instance_to_dict,
    leg_flight_time,
    leg_profit,
    load_instance,
    perturb_demand,
    save_instance,
    validate_instance,
)

from conftest import hand_instance, tiny


def test_fleet_type_record_round_trips(tmp_path):
    inst = hand_instance([("L1", "A", "B", 480, 600), ("L2", "B", "A", 700, 820)])
    ft = FleetType("A319-1", "A320", 128, 12, {"L1": 500, "L2": 600}, 40)
    fam = FleetFamily("A320", ("A319-1",), 5, {"1": 100.0}, 1000.0)
    legs = tuple(replace(l, duration_by_family={"A320": 2.0}) for l in inst.legs)
    inst = replace(inst, fleet_types=(ft,), families=(fam,), legs=legs)
    back = load_instance(save_instance(inst, tmp_path / "i.json"))
    assert back.fleet_types[0] == ft
    assert back.families[0] == fam
    assert back == inst


def test_empty_legs_rejected():
    inst = hand_instance([("L1", "A", "B", 480, 600)])
    with pytest.raises(InstanceValidationError) as err:
        validate_instance(replace(inst, legs=()))
    assert "no legs" in err.value.errors


def test_unknown_station_names_leg():
    inst = hand_instance([("L1", "A", "B", 480, 600)])
    bad = replace(inst.legs[0], destination="ZZZ")
    with pytest.raises(InstanceValidationError) as err:
        validate_instance(replace(inst, legs=(bad,)))
    assert any("L1" in e and "unknown station" in e for e in err.value.errors)


def test_validation_collects_every_error():
    inst = hand_instance([("L1", "A", "B", 480, 600)])
    bad = replace(inst.legs[0], destination="ZZZ", frequency=-1, departure=2000)
    with pytest.raises(InstanceValidationError) as err:
        validate_instance(replace(inst, legs=(bad,)))
    assert len(err.value.errors) >= 3


def test_bad_json_is_parse_error(tmp_path):
    p = tmp_path / "x.json"
    p.write_text("{not json", encoding="utf-8")
    with pytest.raises(InstanceParseError):
        load_instance(p)


def test_generator_deterministic():
    assert dumps_instance(generate_synthetic(7)) == dumps_instance(generate_synthetic(7))
    assert dumps_instance(generate_synthetic(7)) != dumps_instance(generate_synthetic(8))


def test_generator_single_station_fails_validation_downstream():
    inst = generate_synthetic(3, stations=1)
    with pytest.raises(InstanceValidationError) as err:
        validate_instance(inst)
    assert "no legs" in err.value.errors


def test_generator_desk_dimensions():
    inst = generate_synthetic(0)
    validate_instance(inst)
    assert len(inst.stations) == 4 and len(inst.families) == 2 and len(inst.fleet_types) == 3
    assert len(inst.months) == 12
    assert all(len(inst.legs_in(m)) == 20 for m in inst.months)
    assert all(b.yearly_cap_per_crew == 1000.0 for b in inst.families)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_json_round_trip_property(seed):
    inst = tiny(seed)
    text = dumps_instance(inst)
    assert dumps_instance(instance_from_dict(json.loads(text))) == text


def test_demand_mid_unchanged():
    inst = tiny(2)
    assert perturb_demand(inst, "mid", 5) is inst


@pytest.mark.parametrize("seed", range(5))
def test_demand_high_range(seed):
    inst = tiny(2)
    out = perturb_demand(inst, "high", seed)
    for a, b in zip(inst.legs, out.legs):
        assert 1.1 <= b.demand / a.demand <= 1.2


def test_demand_low_value():
    inst = hand_instance([("L1", "A", "B", 480, 600)], demand=100.0)
    d = perturb_demand(inst, "low", 11).legs[0].demand
    assert 80.0 <= d <= 90.0


def test_demand_level_unknown():
    with pytest.raises(ValueError):
        perturb_demand(tiny(0), "extreme", 0)


def test_leg_profit_hand_arithmetic():
    inst = hand_instance([("L1", "A", "B", 480, 600)], types=(("T1", "B1", 128, 1),), costs={("L1", "T1"): 1000},
                         fare=10, demand=50, frequency=30)
    assert leg_profit(inst.legs[0], inst.fleet_types[0]) == 14000


def test_leg_profit_zero_demand():
    inst = hand_instance([("L1", "A", "B", 480, 600)], costs={("L1", "T1"): 777}, demand=0.0)
    assert leg_profit(inst.legs[0], inst.fleet_types[0]) == -777


def test_leg_profit_larger_type_not_worse():
    inst = hand_instance([("L1", "A", "B", 480, 600)], types=(("T1", "B1", 100, 1), ("T2", "B1", 180, 1)),
                         demand=300.0)
    small, big = inst.fleet_types
    assert leg_profit(inst.legs[0], big) >= leg_profit(inst.legs[0], small)


def test_leg_profit_missing_cost():
    inst = hand_instance([("L1", "A", "B", 480, 600)])
    with pytest.raises(ValueError):
        leg_profit(inst.legs[0], replace(inst.fleet_types[0], operating_cost={}))


def test_time_budgets():
    b = FleetFamily("B", ("T",), 10, {"1": 100.0}, 1000.0)
    tb = family_time_budget(b)
    assert tb.yearly == 10000.0 and tb.monthly == {"1": 1000.0}
    zero = family_time_budget(replace(b, crew_count=0))
    assert zero.yearly == 0.0 and zero.monthly == {"1": 0.0}


def test_leg_flight_time():
    inst = hand_instance([("L1", "A", "B", 480, 600)], duration=2.5, frequency=4)
    assert leg_flight_time(inst.legs[0], "B1") == 10.0


def test_instance_to_dict_keys():
    d = instance_to_dict(tiny(0))
    assert {"months", "stations", "fleet_types", "fleet_families", "legs", "crew_policy", "transition",
            "uncertainty"} <= set(d)
