"""Power quotient system and its timed-automaton realization."""

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Union
from xml.sax.saxutils import escape

from .errors import AssemblyError
from .partition import Partition, locate_region
from .reachability import TransitionSet

log = logging.getLogger(__name__)

REPLAY_TOL = 1e-6
DEFAULT_XML_SCALE = 10_000
ACTION = "*"


@dataclass
class QuotientSystem:
    partition: Partition
    bounds: list  # RegionalBounds, ordered by region index
    transitions: TransitionSet
    initial: List[int]

    def output(self, s):
        """Interval of inter-sample times attached to region ``s``."""
        b = self.bounds[s - 1]
        return (b.tau_lo, b.tau_hi)


def build_quotient(part: Partition, bounds, trans: TransitionSet,
                   X0_spec: Union[str, Sequence[int]] = "all") -> QuotientSystem:
    bounds = sorted(bounds, key=lambda b: b.index)
    if [b.index for b in bounds] != list(range(1, part.q + 1)):
        raise AssemblyError(f"bounds cover {len(bounds)} regions, partition has {part.q}")
    for s, t in trans.edges:
        if not (1 <= s <= part.q and 1 <= t <= part.q):
            raise AssemblyError(f"edge ({s}, {t}) refers to a missing region")
    for b in bounds:
        if not b.tau_lo <= b.tau_hi:
            raise AssemblyError(f"region {b.index}: tau_lo > tau_hi")
    if X0_spec == "all":
        initial = list(range(1, part.q + 1))
    else:
        initial = sorted(set(int(s) for s in X0_spec))
        bad = [s for s in initial if not 1 <= s <= part.q]
        if bad:
            raise AssemblyError(f"initial regions {bad} out of range")
    return QuotientSystem(part, bounds, trans, initial)


def precision(bounds) -> float:
    """Largest interval width max_s (tau_hi - tau_lo).

    A concrete output is a point inside its region's interval, and the
    Hausdorff distance from a point to an interval is at most the width.
    """
    return max((b.tau_hi - b.tau_lo for b in bounds), default=0.0)


@dataclass
class Location:
    id: int
    tau_lo: float
    tau_hi: float
    initial: bool

    @property
    def name(self):
        return f"l{self.id}"


@dataclass
class Edge:
    src: int
    dst: int
    guard_lo: float
    guard_hi: float
    action: str = ACTION
    reset: str = "c"


@dataclass
class TrafficAutomaton:
    """Timed safety automaton (L, L0, {*}, {c}, E, I) with precision metadata.

    Location ``s`` has invariant 0 <= c <= tau_hi(s); each edge out of it
    has guard tau_lo(s) <= c <= tau_hi(s) and resets c.
    """

    locations: List[Location]
    edges: List[Edge]
    epsilon: float
    clock: str = "c"
    dead_ends: List[int] = field(default_factory=list)
    metadata: Dict = field(default_factory=dict)

    def __post_init__(self):
        self._succ = {}
        for e in self.edges:
            self._succ.setdefault(e.src, set()).add(e.dst)

    @property
    def initial_locations(self):
        return [loc.id for loc in self.locations if loc.initial]

    def invariant(self, s):
        return (0.0, self.locations[s - 1].tau_hi)

    def has_edge(self, s, t) -> bool:
        return t in self._succ.get(s, ())

    def to_dict(self):
        return {
            "locations": [{"id": loc.id, "tau_lo": loc.tau_lo, "tau_hi": loc.tau_hi,
                           "initial": loc.initial} for loc in self.locations],
            "edges": [{"src": e.src, "dst": e.dst, "guard_lo": e.guard_lo,
                       "guard_hi": e.guard_hi} for e in self.edges],
            "clock": self.clock,
            "epsilon": self.epsilon,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, data):
        locs = [Location(d["id"], d["tau_lo"], d["tau_hi"], d["initial"])
                for d in data["locations"]]
        edges = [Edge(d["src"], d["dst"], d["guard_lo"], d["guard_hi"])
                 for d in data["edges"]]
        dead = [loc.id for loc in locs if not any(e.src == loc.id for e in edges)]
        return cls(locs, edges, data["epsilon"], data.get("clock", "c"), dead)

    def to_xml(self, scale: int = DEFAULT_XML_SCALE, name: str = "ETCLoop") -> str:
        """UPPAAL-style model with integer clock bounds (time units = 1/scale s).

        Lower guards are floored and upper bounds ceiled so the integer
        model over-approximates the real-valued one.  Several initial
        locations are reached through an urgent start location.
        """
        c = self.clock

        def lo(v):
            return int(math.floor(v * scale + 1e-9))

        def hi(v):
            return int(math.ceil(v * scale - 1e-9))

        lines = ['<?xml version="1.0" encoding="utf-8"?>',
                 "<!DOCTYPE nta PUBLIC '-//Uppaal Team//DTD Flat System 1.1//EN' "
                 "'http://www.it.uu.se/research/group/darts/uppaal/flat-1_2.dtd'>",
                 "<nta>",
                 f"  <declaration>// time unit: 1/{scale} s; precision epsilon = "
                 f"{self.epsilon:.6g} s</declaration>",
                 "  <template>",
                 f"    <name>{escape(name)}</name>",
                 f"    <declaration>clock {c};</declaration>"]
        for loc in self.locations:
            inv = escape(f"{c} <= {hi(loc.tau_hi)}")
            lines += [f'    <location id="id{loc.id}">',
                      f"      <name>{loc.name}</name>",
                      f'      <label kind="invariant">{inv}</label>',
                      "    </location>"]
        inits = self.initial_locations
        if len(inits) == 1:
            init_ref = f"id{inits[0]}"
        else:
            init_ref = "id0"
            lines += ['    <location id="id0">', "      <name>start</name>",
                      "      <urgent/>", "    </location>"]
        lines.append(f'    <init ref="{init_ref}"/>')
        if len(inits) != 1:
            for s in inits:
                lines += ["    <transition>", '      <source ref="id0"/>',
                          f'      <target ref="id{s}"/>',
                          f'      <label kind="assignment">{c} = 0</label>',
                          "    </transition>"]
        for e in self.edges:
            guard = escape(f"{c} >= {lo(e.guard_lo)} && {c} <= {hi(e.guard_hi)}")
            lines += ["    <transition>",
                      f'      <source ref="id{e.src}"/>',
                      f'      <target ref="id{e.dst}"/>',
                      f'      <label kind="guard">{guard}</label>',
                      f'      <label kind="assignment">{c} = 0</label>',
                      "    </transition>"]
        lines += ["  </template>", f"  <system>loop = {escape(name)}();\nsystem loop;</system>",
                  "</nta>", ""]
        return "\n".join(lines)


def to_timed_automaton(qs: QuotientSystem) -> TrafficAutomaton:
    init = set(qs.initial)
    locs = [Location(b.index, b.tau_lo, b.tau_hi, b.index in init) for b in qs.bounds]
    edges = []
    for s, t in qs.transitions.sorted_edges():
        b = qs.bounds[s - 1]
        edges.append(Edge(s, t, b.tau_lo, b.tau_hi))
    sources = {e.src for e in edges}
    dead = [loc.id for loc in locs if loc.id not in sources]
    if dead:
        log.warning("locations without outgoing edges (deadlock at c = tau_hi): %s", dead)
    return TrafficAutomaton(locs, edges, precision(qs.bounds), dead_ends=dead,
                            metadata={"epsilon_method": "max interval width"})


@dataclass
class ReplayResult:
    ok: bool
    step: Optional[int] = None
    reason: str = ""

    def __bool__(self):
        return self.ok


def replay_trace(ta: TrafficAutomaton, trace, part: Partition,
                 tol: float = REPLAY_TOL) -> ReplayResult:
    """Check that a concrete trace is a run of the automaton.

    Each tau_k must satisfy the guard of the location holding x_k and the
    move to the location of x_{k+1} must be an edge.
    """
    events = list(trace)
    regions = [locate_region(part, ev.x) for ev in events]
    for k, ev in enumerate(events):
        s = regions[k]
        loc = ta.locations[s - 1]
        if not loc.tau_lo - tol <= ev.tau <= loc.tau_hi + tol:
            return ReplayResult(False, k, f"tau {ev.tau:.9g} outside [{loc.tau_lo:.9g}, "
                                          f"{loc.tau_hi:.9g}] of l{s}")
        if k + 1 < len(events) and not ta.has_edge(s, regions[k + 1]):
            return ReplayResult(False, k, f"no edge l{s} -> l{regions[k + 1]}")
    return ReplayResult(True)
