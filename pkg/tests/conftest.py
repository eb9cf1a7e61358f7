import numpy as np
import pytest
from hypothesis import strategies as st

from topocollapse.qstate import DensityMatrix, Mode, Polarization


def modes(n, regions=("r0", "r1", "r2", "r3")):
    return tuple(Mode(regions[i % len(regions)], f"p{i}", Polarization.V) for i in range(n))


@st.composite
def density_matrices(draw, min_dim=1, max_dim=6, regions=("r0", "r1", "r2", "r3")):
    """Random valid density matrices: mixtures of random pure states."""
    n = draw(st.integers(min_dim, max_dim))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    rank = int(rng.integers(1, n + 1))
    vecs = rng.normal(size=(rank, n)) + 1j * rng.normal(size=(rank, n))
    vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
    weights = rng.dirichlet(np.ones(rank))
    rho = sum(w * np.outer(v, v.conj()) for w, v in zip(weights, vecs))
    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho).real
    return DensityMatrix(modes(n, regions), rho)


@pytest.fixture
def two_box_basis():
    return (Mode("box1", "a", Polarization.V), Mode("box2", "b", Polarization.V))


# acceptance criteria report: one line per criterion in the terminal summary
ACCEPTANCE = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = {}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, {})
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(lines):
        terminalreporter.write_line(lines[number])
