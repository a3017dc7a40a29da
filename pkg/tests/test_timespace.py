from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tfacpp.models import build_fam
from tfacpp.solver import solve_mip
from tfacpp.timespace import Arc, build_network, build_networks, set_count_time

from conftest import hand_instance, tiny


def brute_crossings(start: int, elapsed: int, count_time: int) -> int:
    return sum(1 for t in range(start, start + elapsed) if t % 1440 == count_time)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 1439), st.integers(1, 4 * 1440), st.integers(0, 1439))
def test_crossings_match_minute_scan(start, elapsed, count_time):
    assert Arc("a", ("S", start), ("S", 0), start, elapsed).crossings(count_time) == brute_crossings(
        start, elapsed, count_time)


def test_single_leg_network():
    inst = hand_instance([("L1", "A", "B", 480, 600)], turn=45)
    net = build_network(inst, "1", "T1")
    assert [(n.station, n.time) for n in net.nodes] == [("A", 480), ("B", 645)]
    assert len(net.leg_arcs) == 1
    wraps = net.wraparound_arcs()
    assert sorted(a.tail[0] for a in wraps) == ["A", "B"]
    assert all(a.elapsed == 1440 and a.tail == a.head for a in wraps)


def test_isolated_departure_adjacency():
    inst = hand_instance([("L1", "A", "B", 480, 600)])
    net = build_network(inst, "1", "T1")
    adj = net.adjacency(("A", 480))
    assert adj.legs_out == ["L1"] and adj.legs_in == []
    assert adj.ground_out == adj.ground_in and len(adj.ground_out) == 1


def test_unknown_node_raises():
    net = build_network(hand_instance([("L1", "A", "B", 480, 600)]), "1", "T1")
    with pytest.raises(KeyError):
        net.adjacency(("A", 1))


def test_loop_adjacency_and_crossers():
    inst = hand_instance([("L1", "A", "B", 480, 600), ("L2", "B", "A", 700, 820)], turn=45)
    net = build_network(inst, "1", "T1", count_time=180)
    adj = net.adjacency(("B", 645))
    assert adj.legs_in == ["L1"] and adj.ground_out
    # at 03:00 only the overnight ground arcs are in the air or on the ground
    assert not net.leg_crossers
    assert all(net.ground_arcs[g].wrap for g in net.ground_crossers)


def test_loop_circulation_uses_one_aircraft():
    inst = hand_instance([("L1", "A", "B", 480, 600), ("L2", "B", "A", 700, 820)])
    nets = build_networks(inst)
    res = solve_mip(build_fam(inst, nets))
    assert res.ok
    count = sum(res.primal[f"x|1|{l}|T1"] * c for l, c in nets[("1", "T1")].leg_crossers.items())
    count += sum(res.primal[f"y|1|T1|{g}"] * c for g, c in nets[("1", "T1")].ground_crossers.items())
    assert count == pytest.approx(1.0)


def test_redeye_leg_is_crosser():
    inst = hand_instance([("L1", "A", "B", 1380, 120), ("L2", "B", "A", 300, 420)])
    net = build_network(inst, "1", "T1", count_time=60)
    assert net.leg_crossers == {"L1": 1}


def test_set_count_time_recomputes():
    inst = hand_instance([("L1", "A", "B", 480, 600), ("L2", "B", "A", 700, 820)])
    net = build_network(inst, "1", "T1", count_time=180)
    set_count_time(net, 500)
    assert net.leg_crossers == {"L1": 1}


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 500), st.integers(0, 1439))
def test_network_invariants(seed, count_time):
    inst = tiny(seed, stations=4, legs=8, months=1)
    for net in build_networks(inst, count_time).values():
        keys = {n.key for n in net.nodes}
        for a in list(net.leg_arcs.values()) + list(net.ground_arcs.values()):
            assert a.tail in keys and a.head in keys
        # each node has exactly one outgoing and one incoming ground arc
        for n in net.nodes:
            adj = net.adjacency(n)
            assert len(adj.ground_out) == 1 and len(adj.ground_in) == 1
        # ground arcs of a station tile exactly one day
        per_station = {}
        for a in net.ground_arcs.values():
            per_station[a.tail[0]] = per_station.get(a.tail[0], 0) + a.elapsed
        assert all(v == 1440 for v in per_station.values())
        for gid, a in net.ground_arcs.items():
            assert net.ground_crossers.get(gid, 0) == brute_crossings(a.start, a.elapsed, count_time)
        # exactly one ground arc per station crosses the count time
        assert sum(net.ground_crossers.values()) == len(per_station)


def test_dot_output_mentions_arcs():
    net = build_network(hand_instance([("L1", "A", "B", 480, 600)]), "1", "T1")
    dot = net.to_dot()
    assert dot.startswith("digraph") and "L1" in dot
