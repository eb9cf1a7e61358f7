"""Single-photon state algebra over a finite mode basis.

A mode is one (region, path, polarization) slot the photon can occupy.
States are stored as dense complex arrays indexed by a basis tuple that is
fixed when a scene is compiled; all functions return new objects.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import ConfigurationError

ALGEBRA_TOL = 1e-12
SPECTRAL_TOL = 1e-9


class Polarization(Enum):
    H = "H"
    V = "V"

    @property
    def flipped(self) -> "Polarization":
        return Polarization.V if self is Polarization.H else Polarization.H

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Mode:
    region: str
    path: str
    polarization: Polarization

    def __str__(self) -> str:
        return f"{self.region}/{self.path}/{self.polarization.value}"


def _check_basis(basis: Sequence[Mode]) -> tuple[Mode, ...]:
    basis = tuple(basis)
    if len(set(basis)) != len(basis):
        raise ConfigurationError("mode basis contains duplicate (region, path, polarization) triples")
    return basis


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=np.complex128, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class PureState:
    """Amplitude vector over ``basis``.

    A state is either normalized or explicitly ``subnormalized`` (some
    probability already absorbed); anything else is rejected.
    """

    basis: tuple[Mode, ...]
    amplitudes: np.ndarray
    subnormalized: bool = False

    def __post_init__(self):
        object.__setattr__(self, "basis", _check_basis(self.basis))
        amps = _frozen(self.amplitudes)
        if amps.shape != (len(self.basis),):
            raise ConfigurationError(
                f"amplitude vector of shape {amps.shape} does not match basis of size {len(self.basis)}"
            )
        object.__setattr__(self, "amplitudes", amps)
        norm = self.norm()
        if self.subnormalized:
            if norm > 1.0 + ALGEBRA_TOL:
                raise ConfigurationError(f"sub-normalized state has norm {norm!r} > 1")
        elif abs(norm - 1.0) > ALGEBRA_TOL:
            raise ConfigurationError(f"state norm is {norm!r}, expected 1")

    def norm(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    @classmethod
    def basis_state(cls, basis: Sequence[Mode], mode: Mode) -> "PureState":
        basis = tuple(basis)
        amps = np.zeros(len(basis), dtype=np.complex128)
        amps[_index(basis, mode)] = 1.0
        return cls(basis, amps)

    @classmethod
    def from_amplitudes(cls, pairs: Sequence[tuple[Mode, complex]], basis: Sequence[Mode] | None = None) -> "PureState":
        modes = [m for m, _ in pairs]
        basis = tuple(basis) if basis is not None else tuple(modes)
        amps = np.zeros(len(basis), dtype=np.complex128)
        for mode, amp in pairs:
            amps[_index(basis, mode)] += amp
        return cls(basis, amps)


@dataclass(frozen=True)
class DensityMatrix:
    basis: tuple[Mode, ...]
    matrix: np.ndarray
    # probability already absorbed (polarizers); kept so trace + deficit = 1
    norm_deficit: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "basis", _check_basis(self.basis))
        mat = _frozen(self.matrix)
        n = len(self.basis)
        if mat.shape != (n, n):
            raise ConfigurationError(f"density matrix of shape {mat.shape} does not match basis of size {n}")
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "norm_deficit", float(self.norm_deficit))

    @property
    def dim(self) -> int:
        return len(self.basis)

    def index(self, mode: Mode) -> int:
        return _index(self.basis, mode)

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def populations(self) -> np.ndarray:
        """Diagonal entries clamped to [0, 1], in basis order."""
        return np.clip(np.diag(self.matrix).real, 0.0, 1.0)

    def replace(self, matrix: np.ndarray, norm_deficit: float | None = None) -> "DensityMatrix":
        deficit = self.norm_deficit if norm_deficit is None else norm_deficit
        return DensityMatrix(self.basis, matrix, deficit)


@dataclass(frozen=True)
class Unitary:
    """A unitary acting on ``modes`` (identity on the rest of the basis).

    With ``modes=None`` the matrix must span the whole basis it is applied to.
    """

    matrix: np.ndarray
    modes: tuple[Mode, ...] | None = field(default=None)

    def __post_init__(self):
        mat = _frozen(self.matrix)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ConfigurationError(f"unitary must be square, got shape {mat.shape}")
        if self.modes is not None:
            modes = _check_basis(self.modes)
            if len(modes) != mat.shape[0]:
                raise ConfigurationError("unitary size does not match its mode list")
            object.__setattr__(self, "modes", modes)
        err = np.max(np.abs(mat.conj().T @ mat - np.eye(mat.shape[0])), initial=0.0)
        if err > ALGEBRA_TOL:
            raise ConfigurationError(f"matrix is not unitary (max |U^dag U - 1| = {err:.3e})")
        object.__setattr__(self, "matrix", mat)

    def on(self, basis: Sequence[Mode]) -> np.ndarray:
        """Full matrix over ``basis``."""
        basis = tuple(basis)
        if self.modes is None:
            if self.matrix.shape[0] != len(basis):
                raise ConfigurationError(
                    f"unitary of size {self.matrix.shape[0]} applied to basis of size {len(basis)}"
                )
            return np.asarray(self.matrix)
        full = np.eye(len(basis), dtype=np.complex128)
        idx = [_index(basis, m) for m in self.modes]
        full[np.ix_(idx, idx)] = self.matrix
        return full


@dataclass(frozen=True)
class Violation:
    invariant: str
    magnitude: float

    def __str__(self) -> str:
        return f"{self.invariant} violated by {self.magnitude:.3e}"


def _index(basis: Sequence[Mode], mode: Mode) -> int:
    try:
        return basis.index(mode)
    except ValueError:
        raise ConfigurationError(f"mode {mode} is not in the basis") from None


def to_density(psi: PureState) -> DensityMatrix:
    amps = psi.amplitudes
    return DensityMatrix(psi.basis, np.outer(amps, amps.conj()), 1.0 - psi.norm())


def apply_unitary(rho: DensityMatrix, u: Unitary) -> DensityMatrix:
    full = u.on(rho.basis)
    return rho.replace(full @ rho.matrix @ full.conj().T)


def born_probability(rho: DensityMatrix, mode: Mode) -> float:
    i = rho.index(mode)
    return float(min(max(rho.matrix[i, i].real, 0.0), 1.0))


def validate(rho: DensityMatrix) -> list[Violation]:
    """Report which density-matrix invariants ``rho`` breaks (empty when valid)."""
    report = []
    m = np.asarray(rho.matrix)
    herm = float(np.max(np.abs(m - m.conj().T), initial=0.0))
    if herm > ALGEBRA_TOL:
        report.append(Violation("hermiticity", herm))
    total = rho.trace() + rho.norm_deficit
    if abs(total - 1.0) > ALGEBRA_TOL:
        report.append(Violation("trace", abs(total - 1.0)))
    if rho.norm_deficit < -ALGEBRA_TOL or rho.norm_deficit > 1.0 + ALGEBRA_TOL:
        report.append(Violation("norm_deficit_range", abs(rho.norm_deficit - min(max(rho.norm_deficit, 0.0), 1.0))))
    if m.size:
        lowest = float(np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0])
        if lowest < -SPECTRAL_TOL:
            report.append(Violation("psd", -lowest))
    return report
