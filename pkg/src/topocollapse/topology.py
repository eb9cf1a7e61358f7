"""Connectivity between regions of the apparatus at one instant.

Regions are nodes, passages are undirected edges labelled with what they let
through.  Two kinds of separation are distinguished:

* strong: no path at all once closed passages are removed, whatever
  happens to the photon's polarization;
* weak: no path for the photon's current polarization, although one would
  exist if the polarization could be changed along the way.

Regions listed in ``RegionGraph.rotators`` are where the apparatus itself
can flip polarization (a Pockels cell, say).  :func:`flip_reachable` answers
whether a transfer is realizable with those rotators alone; classification
does not depend on it, because any pair that is neither connected nor
strongly separated is weakly separated.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable

from .errors import ConfigurationError
from .qstate import Polarization


@dataclass(frozen=True)
class PassCondition:
    kind: str  # "open" | "polarized" | "closed"
    axis: Polarization | None = None

    def __post_init__(self):
        if self.kind not in ("open", "polarized", "closed"):
            raise ConfigurationError(f"unknown pass condition {self.kind!r}")
        if (self.kind == "polarized") != (self.axis is not None):
            raise ConfigurationError("only polarized passages carry an axis")

    def admits(self, pol: Polarization) -> bool:
        if self.kind == "open":
            return True
        if self.kind == "closed":
            return False
        return pol is self.axis

    def __str__(self) -> str:
        return f"polarized({self.axis})" if self.kind == "polarized" else self.kind


OPEN = PassCondition("open")
CLOSED = PassCondition("closed")


def polarized_only(axis: Polarization) -> PassCondition:
    return PassCondition("polarized", axis)


class ConnectivityClass(IntEnum):
    CONNECTED = 0
    WEAKLY_DISCONNECTED = 1
    STRONGLY_DISCONNECTED = 2


@dataclass(frozen=True)
class RegionGraph:
    regions: tuple[str, ...]
    passages: tuple[tuple[str, str, PassCondition], ...] = ()
    rotators: frozenset[str] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "regions", tuple(self.regions))
        object.__setattr__(self, "passages", tuple(tuple(p) for p in self.passages))
        object.__setattr__(self, "rotators", frozenset(self.rotators))
        known = set(self.regions)
        if len(known) != len(self.regions):
            raise ConfigurationError("duplicate region in graph")
        for a, b, _ in self.passages:
            if a not in known or b not in known:
                raise ConfigurationError(f"passage {a}-{b} references an unknown region")
        for r in self.rotators:
            if r not in known:
                raise ConfigurationError(f"rotator region {r!r} is unknown")

    def with_passage(self, index: int, condition: PassCondition) -> "RegionGraph":
        passages = list(self.passages)
        a, b, _ = passages[index]
        passages[index] = (a, b, condition)
        return RegionGraph(self.regions, tuple(passages), self.rotators)

    def _require(self, *regions: str) -> None:
        for r in regions:
            if r not in self.regions:
                raise ConfigurationError(f"unknown region {r!r}")


class _Components:
    def __init__(self, items: Iterable[str]):
        self.parent = {x: x for x in items}

    def find(self, x: str) -> str:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: str, b: str) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)

    def blocks(self) -> tuple[frozenset[str], ...]:
        groups: dict[str, set[str]] = {}
        for x in self.parent:
            groups.setdefault(self.find(x), set()).add(x)
        return tuple(frozenset(g) for g in sorted(groups.values(), key=min))


def strong_partition(graph: RegionGraph) -> tuple[frozenset[str], ...]:
    """Components once closed passages are removed, ordered by smallest member."""
    comps = _Components(graph.regions)
    for a, b, cond in graph.passages:
        if cond.kind != "closed":
            comps.union(a, b)
    return comps.blocks()


def weak_partition(graph: RegionGraph, pol: Polarization) -> tuple[frozenset[str], ...]:
    """Components reachable with polarization ``pol`` held fixed."""
    comps = _Components(graph.regions)
    for a, b, cond in graph.passages:
        if cond.admits(pol):
            comps.union(a, b)
    return comps.blocks()


def block_of(partition: Iterable[frozenset[str]], region: str) -> int:
    for k, block in enumerate(partition):
        if region in block:
            return k
    raise ConfigurationError(f"region {region!r} is not covered by the partition")


def flip_reachable(graph: RegionGraph, a: str, b: str, pol: Polarization) -> bool:
    """Can a photon starting in ``a`` with ``pol`` reach ``b``, flipping only at rotators?"""
    graph._require(a, b)
    adjacency: dict[str, list[tuple[str, PassCondition]]] = {r: [] for r in graph.regions}
    for x, y, cond in graph.passages:
        adjacency[x].append((y, cond))
        adjacency[y].append((x, cond))
    seen = {(a, pol)}
    queue = deque(seen)
    while queue:
        region, p = queue.popleft()
        if region == b:
            return True
        moves = [(nxt, p) for nxt, cond in adjacency[region] if cond.admits(p)]
        if region in graph.rotators:
            moves.append((region, p.flipped))
        for state in moves:
            if state not in seen:
                seen.add(state)
                queue.append(state)
    return False


def classify(graph: RegionGraph, a: str, b: str, pol: Polarization) -> ConnectivityClass:
    graph._require(a, b)
    weak = weak_partition(graph, pol)
    if block_of(weak, a) == block_of(weak, b):
        return ConnectivityClass.CONNECTED
    strong = strong_partition(graph)
    if block_of(strong, a) != block_of(strong, b):
        return ConnectivityClass.STRONGLY_DISCONNECTED
    return ConnectivityClass.WEAKLY_DISCONNECTED
