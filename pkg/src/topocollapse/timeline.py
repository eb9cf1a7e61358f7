"""Discrete-event propagation of the photon through a scene.

The packet moves at ``scene.speed``; each fiber of length L delays it by
L/speed.  Shutter transitions and Pockels voltage edges are taken from the
scene as declared.  Events are processed in the order

    (time, kind rank, position along the route, component id)

so that at equal timestamps a shutter closes before it opens and both happen
before the packet arrives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from decimal import Decimal
from enum import Enum
from typing import NamedTuple

from .collapse import CollapsePolicy, on_topology_event
from .errors import ConfigurationError, TimingError
from .optics import (
    TERMINAL_KINDS,
    ComponentKind,
    beam_splitter_unitary,
    phase_shifter_unitary,
    pockels_apply,
    polarizer_apply,
    transport_unitary,
)
from .qstate import DensityMatrix, Mode, Polarization, PureState, apply_unitary, to_density
from .scenedsl import SceneDoc, ShutterTransition, VoltageWindow
from .topology import CLOSED, OPEN, PassCondition, RegionGraph, polarized_only

# relative tolerance for two paths meeting at one beam splitter
_MEET_RTOL = 1e-9


class EventKind(Enum):
    SHUTTER_CLOSE = ("shutter-close", 0)
    SHUTTER_OPEN = ("shutter-open", 1)
    VOLTAGE_ON = ("voltage-on", 2)
    VOLTAGE_OFF = ("voltage-off", 3)
    EMIT = ("emit", 4)
    TRAVERSE = ("traverse", 5)
    DETECT = ("detect", 6)

    @property
    def label(self) -> str:
        return self.value[0]

    @property
    def rank(self) -> int:
        return self.value[1]


@dataclass(frozen=True)
class Event:
    time: float
    kind: EventKind
    target: str = ""
    paths: tuple[str, ...] = ()
    # (lead, trail) of the packet at the component, Traverse only
    packet_window: tuple[float, float] | None = None
    seq: int = 0

    def sort_key(self) -> tuple:
        return (self.time, self.kind.rank, self.seq, self.target)

    def __str__(self) -> str:
        where = f" {self.target}" if self.target else ""
        return f"t={self.time:.9g} {self.kind.label}{where}"


@dataclass(frozen=True)
class Timeline:
    events: tuple[Event, ...]
    propagation_speed: float
    packet_duration: float
    # arrival time of each path at each element of its route
    arrivals: dict[tuple[str, str], float] = field(default_factory=dict, compare=False)
    # response times of shutters and Pockels cells
    responses: dict[str, float] = field(default_factory=dict, compare=False)

    def of_kind(self, kind: EventKind) -> list[Event]:
        return [e for e in self.events if e.kind is kind]

    def traversals(self, cid: str) -> list[Event]:
        return [e for e in self.events if e.kind is EventKind.TRAVERSE and e.target == cid]


@dataclass(frozen=True)
class TimingViolation:
    kind: str  # "contact" | "ordering" | "pockels-edge"
    component: str
    time: float
    message: str

    def __str__(self) -> str:
        return f"{self.kind} violation at {self.component} (t={self.time:.9g} s): {self.message}"


class RunResult(NamedTuple):
    state: DensityMatrix
    history: tuple[tuple[float, RegionGraph], ...]


# --------------------------------------------------------------------------
# scheduling


def schedule(scene: SceneDoc) -> Timeline:
    """Turn scene geometry and requested transitions into a sorted event list."""
    speed, dur = scene.speed, scene.packet_duration
    if not (speed > 0 and math.isfinite(speed)) or not (dur > 0 and math.isfinite(dur)):
        raise ConfigurationError("propagation speed and packet duration must be positive and finite")
    comps = {c.id: c for c in scene.components}
    source = scene.source

    arrivals: dict[tuple[str, str], float] = {}
    at_element: dict[str, tuple[float, str]] = {}
    seq: dict[str, int] = {}
    visits: dict[tuple[str, float], list[str]] = {}
    pending = list(scene.routes)
    while pending:
        progressed = False
        for route in list(pending):
            head = route.elements[0]
            if comps[head].kind is ComponentKind.SOURCE:
                t = source.time
            elif head in at_element:
                t = at_element[head][0]
            else:
                continue
            expanded = scene.expanded_route(route)
            if len(set(expanded)) != len(expanded):
                raise ConfigurationError(f"route {route.path!r} is cyclic")
            for k, cid in enumerate(expanded):
                comp = comps[cid]
                if cid in at_element:
                    t0, first_path = at_element[cid]
                    if not math.isclose(t, t0, rel_tol=_MEET_RTOL, abs_tol=1e-18):
                        raise ConfigurationError(
                            f"paths {first_path} and {route.path} reach {cid} at different times "
                            f"({t0!r} s vs {t!r} s)"
                        )
                    t = t0
                else:
                    at_element[cid] = (t, route.path)
                arrivals[(route.path, cid)] = t
                seq[cid] = max(seq.get(cid, 0), k)
                if comp.kind is not ComponentKind.SOURCE:
                    visits.setdefault((cid, t), []).append(route.path)
                if comp.kind is ComponentKind.FIBER:
                    length = comp.params["length"]
                    if not length > 0:
                        raise ConfigurationError(f"fiber {cid!r} must have positive length")
                    t = t + length / speed
            pending.remove(route)
            progressed = True
        if not progressed:
            names = ", ".join(r.path for r in pending)
            raise ConfigurationError(f"routes {names} cannot be timed (cyclic or unanchored geometry)")

    events = [Event(source.time, EventKind.EMIT, source.id)]
    for (cid, t), paths in visits.items():
        comp = comps[cid]
        transit = comp.params["length"] / speed if comp.kind is ComponentKind.FIBER else 0.0
        events.append(Event(t, EventKind.TRAVERSE, cid, tuple(paths), (t, t + transit + dur), seq[cid]))
    for s in scene.schedules:
        if isinstance(s, ShutterTransition):
            kind = EventKind.SHUTTER_CLOSE if s.closing else EventKind.SHUTTER_OPEN
            events.append(Event(s.time, kind, s.shutter))
        elif isinstance(s, VoltageWindow):
            events.append(Event(s.on, EventKind.VOLTAGE_ON, s.cell))
            events.append(Event(s.off, EventKind.VOLTAGE_OFF, s.cell))
    for e in events:
        if not (math.isfinite(e.time) and e.time >= 0):
            raise ConfigurationError(f"event {e} has a negative or non-finite time")

    terminal = [t for (cid, t) in visits if comps[cid].kind in TERMINAL_KINDS]
    detect_at = max(terminal) if terminal else max(e.time for e in events)
    events.append(Event(detect_at, EventKind.DETECT, seq=max(seq.values(), default=0) + 1))

    responses = {
        c.id: float(c.params.get("response", 0.0))
        for c in scene.components
        if c.kind in (ComponentKind.SHUTTER, ComponentKind.POCKELS_CELL)
    }
    return Timeline(tuple(sorted(events, key=Event.sort_key)), speed, dur, arrivals, responses)


def _overlap(a: tuple[float, float], b: tuple[float, float]) -> bool:
    return a[0] <= b[1] and b[0] <= a[1]


def validate_timing(tl: Timeline) -> list[TimingViolation]:
    """Contact, ordering and Pockels-edge problems of a timeline (empty when fine)."""
    found: list[TimingViolation] = []
    edges = {
        EventKind.SHUTTER_CLOSE: "close",
        EventKind.SHUTTER_OPEN: "open",
        EventKind.VOLTAGE_ON: "voltage on",
        EventKind.VOLTAGE_OFF: "voltage off",
    }
    for e in tl.events:
        if e.kind not in edges:
            continue
        half = tl.responses.get(e.target, 0.0) / 2.0
        window = (e.time - half, e.time + half)
        for tr in tl.traversals(e.target):
            if _overlap(window, tr.packet_window):
                kind = "pockels-edge" if e.kind in (EventKind.VOLTAGE_ON, EventKind.VOLTAGE_OFF) else "contact"
                found.append(
                    TimingViolation(
                        kind,
                        e.target,
                        e.time,
                        f"{edges[e.kind]} window [{window[0]:.9g}, {window[1]:.9g}] s overlaps the packet "
                        f"window [{tr.packet_window[0]:.9g}, {tr.packet_window[1]:.9g}] s",
                    )
                )
    closed: set[str] = set()
    for e in tl.events:
        if e.kind is EventKind.SHUTTER_CLOSE:
            closed.add(e.target)
        elif e.kind is EventKind.SHUTTER_OPEN:
            closed.discard(e.target)
        elif e.kind is EventKind.TRAVERSE and e.target in closed:
            found.append(
                TimingViolation("ordering", e.target, e.time, "packet arrives while the shutter is closed")
            )
    return found


def min_separation(response_time: float, speed: float) -> float:
    """Shortest path between two shutters that allows a contact-free close/open cycle.

    The product is formed in decimal from the shortest repr of each input, so
    1e-6 s at 10 m/s gives exactly 1e-05 m.
    """
    for name, value in (("response time", response_time), ("speed", speed)):
        if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
            raise ConfigurationError(f"{name} must be a positive finite number, got {value!r}")
    return float(Decimal(repr(float(response_time))) * Decimal(repr(float(speed))))


# --------------------------------------------------------------------------
# state evolution


def region_graph(scene: SceneDoc, closed: set[str] | frozenset[str] = frozenset()) -> RegionGraph:
    """Connectivity of the scene with the shutters in ``closed`` shut."""
    passages = []
    for p in scene.passages:
        cond: PassCondition = OPEN
        if p.via is not None:
            comp = scene.component(p.via)
            if comp.kind is ComponentKind.SHUTTER:
                cond = CLOSED if p.via in closed else OPEN
            elif comp.kind is ComponentKind.POLARIZER:
                cond = polarized_only(comp.params["axis"])
        passages.append((p.a, p.b, cond))
    rotators = frozenset(scene.location(c.id) for c in scene.components_of(ComponentKind.POCKELS_CELL))
    return RegionGraph(scene.regions, tuple(passages), rotators)


def _initial(scene: SceneDoc) -> list[tuple[Mode, complex]]:
    if scene.amplitudes:
        return [(a.mode, a.value) for a in scene.amplitudes]
    s = scene.source
    return [(Mode(s.region, s.path, s.polarization), 1.0)]


def mode_basis(scene: SceneDoc, tl: Timeline) -> tuple[Mode, ...]:
    """Every mode the photon can occupy during the run, in order of first appearance."""
    basis: dict[Mode, None] = {}
    pols: dict[str, set[Polarization]] = {}
    for mode, _ in _initial(scene):
        basis[mode] = None
        pols.setdefault(mode.path, set()).add(mode.polarization)
    on: set[str] = set()

    def add(region: str, path: str) -> None:
        for pol in sorted(pols.get(path, ()), key=lambda p: p.value):
            basis.setdefault(Mode(region, path, pol), None)

    for e in tl.events:
        if e.kind is EventKind.VOLTAGE_ON:
            on.add(e.target)
        elif e.kind is EventKind.VOLTAGE_OFF:
            on.discard(e.target)
        elif e.kind is EventKind.TRAVERSE:
            comp = scene.component(e.target)
            region = scene.location(e.target)
            paths = comp.params["paths"] if comp.kind is ComponentKind.BEAM_SPLITTER else e.paths
            for p in paths:
                add(region, p)
            if comp.kind is ComponentKind.BEAM_SPLITTER:
                union = set().union(*(pols.get(p, set()) for p in paths))
                for p in paths:
                    pols[p] = set(union)
            elif comp.kind is ComponentKind.POCKELS_CELL and e.target in on:
                for p in paths:
                    pols[p] = pols.get(p, set()) | {q.flipped for q in pols.get(p, set())}
            elif comp.kind is ComponentKind.POLARIZER:
                for p in paths:
                    pols[p] = pols.get(p, set()) & {comp.params["axis"]}
            for p in paths:
                add(region, p)
    return tuple(basis)


def _present(basis: tuple[Mode, ...], *modes: Mode) -> bool:
    return all(m in basis for m in modes)


def run(tl: Timeline, scene: SceneDoc, policy: CollapsePolicy) -> RunResult:
    """Evolve the scene's initial state through the timeline; returns the pre-detection state."""
    violations = validate_timing(tl)
    if violations:
        raise TimingError(violations)
    basis = mode_basis(scene, tl)
    rho = to_density(PureState.from_amplitudes(_initial(scene), basis))

    where: dict[str, str] = {}
    for mode, _ in _initial(scene):
        if where.setdefault(mode.path, mode.region) != mode.region and any(r.path == mode.path for r in scene.routes):
            raise ConfigurationError(f"path {mode.path!r} starts in more than one region")

    closed: set[str] = set()
    on: set[str] = set()
    graph = region_graph(scene)
    start = tl.events[0].time if tl.events else 0.0
    history = [(start, graph)]

    for e in tl.events:
        if e.kind is EventKind.DETECT:
            break
        if e.kind in (EventKind.SHUTTER_CLOSE, EventKind.SHUTTER_OPEN):
            if e.kind is EventKind.SHUTTER_CLOSE:
                closed.add(e.target)
            else:
                closed.discard(e.target)
            graph = region_graph(scene, closed)
            history.append((e.time, graph))
            rho = on_topology_event(rho, policy, graph)
        elif e.kind is EventKind.VOLTAGE_ON:
            on.add(e.target)
        elif e.kind is EventKind.VOLTAGE_OFF:
            on.discard(e.target)
        elif e.kind is EventKind.TRAVERSE:
            rho = _traverse(rho, e, scene, where, closed, on, policy, graph)
    return RunResult(rho, tuple(history))


def _traverse(rho, e: Event, scene: SceneDoc, where, closed, on, policy, graph) -> DensityMatrix:
    basis = rho.basis
    comp = scene.component(e.target)
    region = scene.location(e.target)
    for p in e.paths:
        old = where.get(p)
        if old is not None and old != region:
            pairs = [
                (Mode(old, p, pol), Mode(region, p, pol))
                for pol in Polarization
                if _present(basis, Mode(old, p, pol), Mode(region, p, pol))
            ]
            if pairs:
                rho = apply_unitary(rho, transport_unitary(pairs))
        where[p] = region

    kind = comp.kind
    if kind is ComponentKind.BEAM_SPLITTER:
        first, second = comp.params["paths"]
        pairs = [
            (Mode(region, first, pol), Mode(region, second, pol))
            for pol in Polarization
            if _present(basis, Mode(region, first, pol), Mode(region, second, pol))
        ]
        for p in (first, second):
            where[p] = region
        if pairs:
            rho = apply_unitary(rho, beam_splitter_unitary(pairs))
    elif kind is ComponentKind.PHASE_SHIFTER:
        modes = [Mode(region, p, pol) for p in e.paths for pol in Polarization if Mode(region, p, pol) in basis]
        if modes:
            rho = apply_unitary(rho, phase_shifter_unitary(comp.params.get("phi", 0.0), modes))
    elif kind is ComponentKind.POLARIZER:
        for p in e.paths:
            rho = polarizer_apply(rho, comp.params["axis"], region, p)
    elif kind is ComponentKind.POCKELS_CELL and e.target in on:
        pairs = [
            (Mode(region, p, Polarization.H), Mode(region, p, Polarization.V))
            for p in e.paths
            if _present(basis, Mode(region, p, Polarization.H), Mode(region, p, Polarization.V))
        ]
        if pairs:
            rho = apply_unitary(rho, pockels_apply(pairs))
        # the photon's polarization changed, so its weak connectivity may have too
        rho = on_topology_event(rho, policy, graph)
    elif kind is ComponentKind.SHUTTER and e.target in closed:
        raise TimingError([TimingViolation("ordering", e.target, e.time, "packet arrives while the shutter is closed")])
    return rho
