"""Optical component catalog and the action each one has on the photon state."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Sequence

import numpy as np

from .errors import ConfigurationError
from .qstate import DensityMatrix, Mode, Polarization, Unitary

_SQRT_HALF = 1.0 / math.sqrt(2.0)


class ComponentKind(Enum):
    BEAM_SPLITTER = "beamsplitter"
    PHASE_SHIFTER = "phaseshifter"
    MIRROR = "mirror"
    POLARIZER = "polarizer"
    POCKELS_CELL = "pockels"
    SHUTTER = "shutter"
    FIBER = "fiber"
    DETECTOR = "detector"
    SCREEN = "screen"
    SOURCE = "source"


# Components that sit on the junction between two fibers instead of being
# listed explicitly in a route.
BOUNDARY_KINDS = frozenset({ComponentKind.SHUTTER, ComponentKind.POLARIZER})
TERMINAL_KINDS = frozenset({ComponentKind.DETECTOR, ComponentKind.SCREEN})


@dataclass(frozen=True)
class ComponentSpec:
    kind: ComponentKind
    id: str
    location: str | None
    params: dict[str, Any] = field(default_factory=dict, hash=False)

    def __post_init__(self):
        p = self.params
        if self.kind is ComponentKind.FIBER and not p.get("length", 0) > 0:
            raise ConfigurationError(f"fiber {self.id!r} must have positive length, got {p.get('length')!r}")
        if self.kind is ComponentKind.SHUTTER and not p.get("response", 0) > 0:
            raise ConfigurationError(f"shutter {self.id!r} must have positive response time")


@dataclass(frozen=True)
class PockelsSchedule:
    """Voltage-on intervals of one Pockels cell, in seconds."""

    windows: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        windows = tuple(sorted((float(a), float(b)) for a, b in self.windows))
        for on, off in windows:
            if not on < off:
                raise ConfigurationError(f"Pockels window ({on!r}, {off!r}) must have t_on < t_off")
        for (_, prev_off), (nxt_on, _) in zip(windows, windows[1:]):
            if nxt_on <= prev_off:
                raise ConfigurationError("Pockels windows overlap")
        object.__setattr__(self, "windows", windows)

    def is_on(self, t: float) -> bool:
        return any(on <= t < off for on, off in self.windows)


def beam_splitter_matrix() -> np.ndarray:
    # columns are images of (first, second): first -> (first+second)/sqrt2,
    # second -> (-first+second)/sqrt2
    return _SQRT_HALF * np.array([[1.0, -1.0], [1.0, 1.0]], dtype=np.complex128)


def beam_splitter_unitary(pairs: Sequence[tuple[Mode, Mode]] = ()) -> Unitary:
    """50/50 splitter.

    Without ``pairs`` the bare 2x2 matrix on (x, y) is returned.  Each pair
    is (first-path mode, second-path mode) for one polarization; the splitter
    acts block-diagonally over the pairs.
    """
    bs = beam_splitter_matrix()
    if not pairs:
        return Unitary(bs)
    modes = [m for pair in pairs for m in pair]
    return Unitary(np.kron(np.eye(len(pairs)), bs), tuple(modes))


def phase_shifter_unitary(phi: float, modes: Sequence[Mode] = ()) -> Unitary:
    """Multiply the designated path by exp(i*phi).

    Bare form is diag(exp(i*phi), 1) on (x, y), phase on x.
    """
    phase = np.exp(1j * phi)
    if not modes:
        return Unitary(np.diag([phase, 1.0]))
    return Unitary(np.diag([phase] * len(modes)), tuple(modes))


def pockels_apply(pairs: Sequence[tuple[Mode, Mode]] = (), voltage_on: bool = True) -> Unitary:
    """90 degree polarization rotation while the voltage is applied.

    ``pairs`` are (H mode, V mode) of the traversing path; the bare form acts
    on the (H, V) plane of a single path.
    """
    swap = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=np.complex128)
    block = swap if voltage_on else np.eye(2, dtype=np.complex128)
    if not pairs:
        return Unitary(block)
    modes = [m for pair in pairs for m in pair]
    return Unitary(np.kron(np.eye(len(pairs)), block), tuple(modes))


def polarizer_apply(rho: DensityMatrix, axis: Polarization, region: str, path: str) -> DensityMatrix:
    """Ideal polarizer on the modes of ``path`` in ``region``.

    The blocked polarization is projected out and its probability moved
    into ``norm_deficit``.
    """
    keep = np.array(
        [not (m.region == region and m.path == path and m.polarization is not axis) for m in rho.basis]
    )
    projected = np.asarray(rho.matrix) * np.outer(keep, keep)
    lost = rho.trace() - float(np.trace(projected).real)
    return rho.replace(projected, rho.norm_deficit + lost)


def transport_unitary(pairs: Sequence[tuple[Mode, Mode]]) -> Unitary:
    """Move amplitude between two modes of the same path (swap on each pair)."""
    swap = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=np.complex128)
    modes = [m for pair in pairs for m in pair]
    return Unitary(np.kron(np.eye(len(pairs)), swap), tuple(modes))
