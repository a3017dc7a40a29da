"""Cyclic daily time-space networks, one per (month, fleet type).

Aircraft occupy an arc over the half-open interval ``[start, start + elapsed)``
on the repeating day. An arc "crosses" the count time once for every
occurrence of the count time inside that interval, so the crosser flow of a
feasible circulation equals the number of aircraft in use, whatever count
time is chosen.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple

from .instance import MINUTES_PER_DAY, Instance

DEFAULT_COUNT_TIME = 180

DEPARTURE = "departure"
ARRIVAL_READY = "arrival-ready"
MIXED = "mixed"


@dataclass(frozen=True)
class EventNode:
    station: str
    time: int
    kind: str

    @property
    def key(self) -> Tuple[str, int]:
        return (self.station, self.time)


@dataclass(frozen=True)
class Arc:
    id: str
    tail: Tuple[str, int]
    head: Tuple[str, int]
    start: int
    elapsed: int
    wrap: bool = False

    def crossings(self, count_time: int) -> int:
        """Occurrences of ``count_time`` (mod one day) in ``[start, start + elapsed)``."""
        first = self.start + (count_time - self.start) % MINUTES_PER_DAY
        end = self.start + self.elapsed
        if first >= end:
            return 0
        return 1 + (end - 1 - first) // MINUTES_PER_DAY


@dataclass
class Adjacency:
    legs_out: List[str] = field(default_factory=list)
    legs_in: List[str] = field(default_factory=list)
    ground_out: List[str] = field(default_factory=list)
    ground_in: List[str] = field(default_factory=list)


@dataclass
class TimeSpaceNetwork:
    month: str
    fleet_type: str
    nodes: List[EventNode]
    leg_arcs: Dict[str, Arc]
    ground_arcs: Dict[str, Arc]
    count_time: int
    leg_crossers: Dict[str, int]
    ground_crossers: Dict[str, int]
    _adj: Dict[Tuple[str, int], Adjacency] = field(default_factory=dict, repr=False)

    def node_keys(self) -> List[Tuple[str, int]]:
        return [n.key for n in self.nodes]

    def adjacency(self, node) -> Adjacency:
        key = node.key if isinstance(node, EventNode) else tuple(node)
        try:
            return self._adj[key]
        except KeyError:
            raise KeyError(f"node {key} not in network ({self.month}, {self.fleet_type})") from None

    def wraparound_arcs(self) -> List[Arc]:
        return [a for a in self.ground_arcs.values() if a.wrap]

    def to_dot(self) -> str:
        lines = [f'digraph "tsn_{self.month}_{self.fleet_type}" {{']
        for n in self.nodes:
            lines.append(f'  "{n.station}@{n.time}" [label="{n.station} {n.time // 60:02d}:{n.time % 60:02d}"];')
        for a in self.leg_arcs.values():
            lines.append(f'  "{a.tail[0]}@{a.tail[1]}" -> "{a.head[0]}@{a.head[1]}" [label="{a.id}"];')
        for a in self.ground_arcs.values():
            style = "dashed" if a.wrap else "dotted"
            lines.append(f'  "{a.tail[0]}@{a.tail[1]}" -> "{a.head[0]}@{a.head[1]}" [style={style}];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def build_network(
    inst: Instance,
    month: str,
    fleet_type: str,
    count_time: int = DEFAULT_COUNT_TIME,
) -> TimeSpaceNetwork:
    """Build the network of ``fleet_type`` for ``month``.

    Legs the fleet type has no operating cost for are left out. Events at
    the same (station, time) share one node; stations without events are
    omitted.
    """
    ft = inst.fleet_type_by_id[fleet_type]
    turn = ft.min_turn_time
    kinds: Dict[Tuple[str, int], str] = {}

    def touch(key: Tuple[str, int], kind: str) -> None:
        prev = kinds.get(key)
        kinds[key] = kind if prev in (None, kind) else MIXED

    leg_arcs: Dict[str, Arc] = {}
    for leg in inst.legs_in(month):
        if leg.id not in ft.operating_cost:
            continue
        tail = (leg.origin, leg.departure)
        head = (leg.destination, (leg.arrival + turn) % MINUTES_PER_DAY)
        touch(tail, DEPARTURE)
        touch(head, ARRIVAL_READY)
        leg_arcs[leg.id] = Arc(leg.id, tail, head, leg.departure, leg.elapsed + turn)

    by_station: Dict[str, List[int]] = {}
    for station, t in kinds:
        by_station.setdefault(station, []).append(t)
    ground_arcs: Dict[str, Arc] = {}
    for station in sorted(by_station):
        times = sorted(by_station[station])
        for i, t in enumerate(times):
            last = i == len(times) - 1
            nxt = times[0] if last else times[i + 1]
            if last:
                elapsed = (nxt - t) % MINUTES_PER_DAY or MINUTES_PER_DAY
            else:
                elapsed = nxt - t
            gid = f"g:{station}:{i}"
            ground_arcs[gid] = Arc(gid, (station, t), (station, nxt), t, elapsed, wrap=last)

    nodes = [EventNode(s, t, kinds[(s, t)]) for s, t in sorted(kinds)]
    adj = {n.key: Adjacency() for n in nodes}
    for a in leg_arcs.values():
        adj[a.tail].legs_out.append(a.id)
        adj[a.head].legs_in.append(a.id)
    for a in ground_arcs.values():
        adj[a.tail].ground_out.append(a.id)
        adj[a.head].ground_in.append(a.id)

    net = TimeSpaceNetwork(
        month=month,
        fleet_type=fleet_type,
        nodes=nodes,
        leg_arcs=leg_arcs,
        ground_arcs=ground_arcs,
        count_time=count_time,
        leg_crossers={},
        ground_crossers={},
        _adj=adj,
    )
    set_count_time(net, count_time)
    return net


def set_count_time(net: TimeSpaceNetwork, count_time: int) -> TimeSpaceNetwork:
    """Recompute the crosser sets of ``net`` in place for a new count time."""
    count_time %= MINUTES_PER_DAY
    net.count_time = count_time
    net.leg_crossers = {k: c for k, a in net.leg_arcs.items() if (c := a.crossings(count_time))}
    net.ground_crossers = {k: c for k, a in net.ground_arcs.items() if (c := a.crossings(count_time))}
    return net


def adjacency(net: TimeSpaceNetwork, node) -> Adjacency:
    return net.adjacency(node)


Networks = Dict[Tuple[str, str], TimeSpaceNetwork]


def build_networks(
    inst: Instance,
    count_time: int = DEFAULT_COUNT_TIME,
    months: Optional[Iterable[str]] = None,
) -> Networks:
    """All networks of the instance keyed by (month, fleet type)."""
    months = inst.months if months is None else tuple(months)
    return {(m, f.id): build_network(inst, m, f.id, count_time) for m in months for f in inst.fleet_types}
