"""Point-of-view I versus point-of-view II dynamics at topology changes.

Under point of view II, coherence between parts of the state that end up in
disconnected regions is destroyed the moment the disconnection happens:

    rho -> sum_k P_k rho P_k

with P_k projecting on the modes whose region lies in block k.  For a
two-box superposition this is exactly |a|^2 |1><1| + |b|^2 |2><2|.
"""

from __future__ import annotations

from enum import Enum
from typing import Hashable, Iterable, Sequence

import numpy as np

from .errors import ConfigurationError
from .qstate import DensityMatrix, Polarization
from .topology import RegionGraph, block_of, strong_partition, weak_partition


class CollapsePolicy(Enum):
    POV1 = "pov1"
    POV2_STRONG = "pov2-strong"
    POV2_WEAK = "pov2-weak"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, name: str) -> "CollapsePolicy":
        try:
            return cls(name)
        except ValueError:
            choices = ", ".join(p.value for p in cls)
            raise ConfigurationError(f"unknown policy {name!r} (choose from {choices})") from None


def dephase_labels(rho: DensityMatrix, labels: Sequence[Hashable]) -> DensityMatrix:
    """Zero every coherence between modes carrying different labels."""
    if len(labels) != rho.dim:
        raise ConfigurationError("one block label per mode is required")
    keep = np.array([[li == lj for lj in labels] for li in labels], dtype=bool)
    return rho.replace(np.where(keep, rho.matrix, 0.0))


def block_dephase(rho: DensityMatrix, partition: Iterable[Iterable[str]]) -> DensityMatrix:
    partition = [frozenset(block) for block in partition]
    labels = [block_of(partition, mode.region) for mode in rho.basis]
    return dephase_labels(rho, labels)


def weak_labels(rho: DensityMatrix, graph: RegionGraph) -> list[frozenset[str]]:
    """Regions each mode can reach while keeping its own polarization."""
    cache = {pol: weak_partition(graph, pol) for pol in Polarization}
    return [cache[m.polarization][block_of(cache[m.polarization], m.region)] for m in rho.basis]


def on_topology_event(
    rho: DensityMatrix,
    policy: CollapsePolicy,
    graph: RegionGraph,
    pol: Polarization | None = None,
) -> DensityMatrix:
    """State right after the apparatus topology (or the photon's polarization) changed.

    For ``POV2_WEAK`` a fixed ``pol`` dephases over ``weak_partition(graph, pol)``;
    with ``pol=None`` each mode is labelled by the set of regions reachable
    with its own polarization and coherence survives only between modes with
    equal labels.  The timeline uses the latter because different paths may
    carry different polarizations.
    """
    if policy is CollapsePolicy.POV1:
        return rho
    if policy is CollapsePolicy.POV2_STRONG:
        return block_dephase(rho, strong_partition(graph))
    if pol is not None:
        return block_dephase(rho, weak_partition(graph, pol))
    return dephase_labels(rho, weak_labels(rho, graph))
