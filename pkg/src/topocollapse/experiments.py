"""Preset apparatuses and their closed-form predictions.

Presets are generated as scene text and parsed, so a preset and its shipped
``.scene`` fixture go through exactly the same reader.

fig1  two boxes joined by one shutter, photon in a superposition of both
fig2  two cavities separated by crossed polarizers, rotators in each region
fig3  double slit with shutters A and B enclosing part of fiber 1
fig4  Mach-Zehnder interferometer with shutters A and B on arm y
fig5  Mach-Zehnder with arm y boxed by V polarizers and two Pockels cells
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .collapse import CollapsePolicy
from .errors import ConfigurationError, VisibilityUndefined
from .optics import ComponentKind
from .qstate import DensityMatrix
from .scenedsl import SPEED_OF_LIGHT, SceneDoc, ScreenParams, parse

PRESETS = ("fig1", "fig2", "fig3", "fig4", "fig5")

# arm y leads into and out of the enclosed section
_LEAD = 10.0
_PACKET = 1e-9


@dataclass(frozen=True)
class AnalyticPrediction:
    policy: CollapsePolicy
    detector_probs: dict[str, float]
    screen_density: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False)
    visibility: float = 0.0
    loss: float = 0.0


# --------------------------------------------------------------------------
# presets


def _num(x: float) -> str:
    return repr(float(x))


def _positive(name: str, value: float) -> float:
    value = float(value)
    if not (math.isfinite(value) and value > 0):
        raise ConfigurationError(f"{name} must be positive and finite, got {value!r}")
    return value


def _finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ConfigurationError(f"{name} must be finite, got {value!r}")
    return value


def preset(which: str, **params) -> SceneDoc:
    """Build one of the five apparatuses; keyword arguments override geometry defaults."""
    return parse(preset_text(which, **params))


def preset_text(which: str, **params) -> str:
    builders = {"fig1": _fig1, "fig2": _fig2, "fig3": _fig3, "fig4": _fig4, "fig5": _fig5}
    if which not in builders:
        raise ConfigurationError(f"unknown preset {which!r} (choose from {', '.join(PRESETS)})")
    try:
        lines = builders[which](**params)
    except TypeError as exc:
        raise ConfigurationError(f"bad parameters for {which}: {exc}") from None
    return "\n".join(lines) + "\n"


def _fig1(alpha: complex = 1 / math.sqrt(2), beta: complex = 1 / math.sqrt(2), response: float = 1e-7):
    alpha, beta = complex(alpha), complex(beta)
    if abs(abs(alpha) ** 2 + abs(beta) ** 2 - 1.0) > 1e-12:
        raise ConfigurationError("|alpha|^2 + |beta|^2 must equal 1")
    _positive("response", response)
    return [
        "scene fig1",
        "meta apparatus=fig1",
        "region box1",
        "region box2",
        "source src region=box1 path=a pol=V",
        f"shutter S response={_num(response)} region=box1",
        "passage door a=box1 b=box2 via=S",
        f"amplitude alpha region=box1 path=a pol=V value={_cnum(alpha)}",
        f"amplitude beta region=box2 path=b pol=V value={_cnum(beta)}",
        "close shut shutter=S t=1e-06",
        "open reopen shutter=S t=2e-06",
    ]


def _cnum(z: complex) -> str:
    sign = "-" if z.imag < 0 or (z.imag == 0 and math.copysign(1.0, z.imag) < 0) else "+"
    return f"{repr(z.real)}{sign}{repr(abs(z.imag))}j"


def _fig2():
    half = 1 / math.sqrt(2)
    return [
        "scene fig2",
        "meta apparatus=fig2",
        "region cav1",
        "region gap",
        "region cav2",
        "source src region=cav1 path=left pol=V",
        "polarizer pV axis=V region=cav1",
        "polarizer pH axis=H region=gap",
        "pockels pc1 region=cav1",
        "pockels pcg region=gap",
        "pockels pc2 region=cav2",
        "passage left a=cav1 b=gap via=pV",
        "passage right a=gap b=cav2 via=pH",
        f"amplitude inner region=cav1 path=left pol=V value={_cnum(complex(half))}",
        f"amplitude outer region=cav2 path=right pol=H value={_cnum(complex(half))}",
    ]


def _fig3(
    length: float = 600.0,
    tau: float = 1e-6,
    slit: float = 0.5e-3,
    distance: float = 1.0,
    wavelength: float = 632.8e-9,
    sigma: float = 0.017,
    bins: int = 64,
    halfwidth: float = 2.5e-3,
    close_fraction: float = 0.5,
    hold: float = 0.0,
):
    for name in ("length", "tau", "slit", "distance", "wavelength", "sigma", "halfwidth"):
        _positive(name, locals()[name])
    if int(bins) != bins or bins < 2:
        raise ConfigurationError("bins must be an integer >= 2")
    c = SPEED_OF_LIGHT
    t_a = _LEAD / c
    close, reopen = _cycle(t_a, length, tau, close_fraction, hold, c)
    total = 2 * _LEAD + length
    return [
        "scene fig3",
        "meta apparatus=fig3 slit_splitter=slits",
        *[f"region {r}" for r in ("src", "s1a", "s1cav", "s1b", "s2", "screen")],
        "source src0 region=src path=slit1 pol=V",
        "beamsplitter slits region=src paths=slit1:slit2",
        f"fiber f1a region=s1a length={_num(_LEAD)}",
        f"fiber f1cav region=s1cav length={_num(length)}",
        f"fiber f1b region=s1b length={_num(_LEAD)}",
        f"fiber f2 region=s2 length={_num(total)}",
        f"shutter A response={_num(tau)} between=f1a:f1cav",
        f"shutter B response={_num(tau)} between=f1cav:f1b",
        f"screen scr region=screen slit={_num(slit)} distance={_num(distance)} wavelength={_num(wavelength)} "
        f"sigma={_num(sigma)} bins={int(bins)} halfwidth={_num(halfwidth)}",
        "passage p1 a=src b=s1a",
        "passage pA a=s1a b=s1cav via=A",
        "passage pB a=s1cav b=s1b via=B",
        "passage p1s a=s1b b=screen",
        "passage p2 a=src b=s2",
        "passage p2s a=s2 b=screen",
        "route slit1 via=src0,slits,f1a,f1cav,f1b,scr",
        "route slit2 via=slits,f2,scr",
        f"close closeA shutter=A t={_num(close)}",
        f"close closeB shutter=B t={_num(close)}",
        f"open openA shutter=A t={_num(reopen)}",
        f"open openB shutter=B t={_num(reopen)}",
    ]


def _cycle(t_a: float, length: float, tau: float, fraction: float, hold: float, c: float) -> tuple[float, float]:
    """Close/open instants for a packet entering the enclosed fiber at ``t_a``.

    The close happens when the packet centre has covered ``fraction`` of the
    fiber; ``hold`` is how long the shutters stay shut.
    """
    fraction = _finite("close_fraction", fraction)
    hold = _finite("hold", hold)
    if not 0.0 < fraction < 1.0:
        raise ConfigurationError("close_fraction must lie strictly between 0 and 1")
    if hold < 0:
        raise ConfigurationError("hold must be non-negative")
    close = t_a + _PACKET / 2 + fraction * length / c
    return close, close + hold


def _fig4(
    phi: float = 0.0,
    length: float = 600.0,
    tau: float = 1e-6,
    close_fraction: float = 0.5,
    hold: float = 0.0,
    close_time: float | None = None,
):
    phi = _finite("phi", phi)
    _positive("length", length)
    _positive("tau", tau)
    c = SPEED_OF_LIGHT
    close, reopen = _cycle(_LEAD / c, length, tau, close_fraction, hold, c)
    if close_time is not None:
        close = _finite("close_time", close_time)
        reopen = close + hold
    return [
        "scene fig4",
        "meta apparatus=fig4 phase_shifter=ps",
        *[f"region {r}" for r in ("src", "xarm", "y1", "ycav", "y2", "out")],
        "source src0 region=src path=x pol=V",
        "beamsplitter bs1 region=src paths=x:y",
        f"fiber fx region=xarm length={_num(2 * _LEAD + length)}",
        f"phaseshifter ps region=xarm phi={_num(phi)}",
        "mirror Mx region=xarm",
        f"fiber fy1 region=y1 length={_num(_LEAD)}",
        f"fiber fcav region=ycav length={_num(length)}",
        f"fiber fy2 region=y2 length={_num(_LEAD)}",
        "mirror My region=y2",
        f"shutter A response={_num(tau)} between=fy1:fcav",
        f"shutter B response={_num(tau)} between=fcav:fy2",
        "beamsplitter bs2 region=out paths=x:y",
        "detector Dx region=out label=x",
        "detector Dy region=out label=y",
        "passage px a=src b=xarm",
        "passage pxo a=xarm b=out",
        "passage py a=src b=y1",
        "passage pA a=y1 b=ycav via=A",
        "passage pB a=ycav b=y2 via=B",
        "passage pyo a=y2 b=out",
        "route x via=src0,bs1,fx,ps,Mx,bs2,Dx",
        "route y via=bs1,fy1,fcav,fy2,My,bs2,Dy",
        f"close closeA shutter=A t={_num(close)}",
        f"close closeB shutter=B t={_num(close)}",
        f"open openA shutter=A t={_num(reopen)}",
        f"open openB shutter=B t={_num(reopen)}",
    ]


def _fig5(
    phi: float = 0.0,
    L1: float = 300.0,
    L2: float = 300.0,
    L3: float = 300.0,
    margin: float = 5e-9,
    response: float = 1e-9,
):
    phi = _finite("phi", phi)
    for name, value in (("L1", L1), ("L2", L2), ("L3", L3), ("margin", margin)):
        _positive(name, value)
    if not (math.isfinite(response) and response >= 0):
        raise ConfigurationError("response must be non-negative")
    if response / 2 >= margin:
        raise ConfigurationError("margin must exceed half the Pockels response time")
    c = SPEED_OF_LIGHT
    t_n0 = _LEAD / c
    t_n1 = t_n0 + L1 / c
    t_n2 = t_n1 + L2 / c
    if t_n2 - t_n1 <= 2 * margin + _PACKET:
        raise ConfigurationError("L2 is too short to separate the two Pockels windows")
    # each cell is on only while the packet passes it, with a margin on both sides
    windows = [(t - margin, t + _PACKET + margin) for t in (t_n1, t_n2)]
    return [
        "scene fig5",
        "meta apparatus=fig5 phase_shifter=ps",
        *[f"region {r}" for r in ("src", "xarm", "y1", "ybox", "y2", "out")],
        "source src0 region=src path=x pol=V",
        "beamsplitter bs1 region=src paths=x:y",
        f"fiber fx region=xarm length={_num(2 * _LEAD + L1 + L2 + L3)}",
        f"phaseshifter ps region=xarm phi={_num(phi)}",
        "mirror Mx region=xarm",
        f"fiber fy1 region=y1 length={_num(_LEAD)}",
        f"fiber fb1 region=ybox length={_num(L1)}",
        f"pockels PC1 region=ybox response={_num(response)}",
        f"fiber fb2 region=ybox length={_num(L2)}",
        f"pockels PC2 region=ybox response={_num(response)}",
        f"fiber fb3 region=ybox length={_num(L3)}",
        f"fiber fy2 region=y2 length={_num(_LEAD)}",
        "mirror My region=y2",
        "polarizer polL axis=V between=fy1:fb1",
        "polarizer polR axis=V between=fb3:fy2",
        "beamsplitter bs2 region=out paths=x:y",
        "detector Dx region=out label=x",
        "detector Dy region=out label=y",
        "passage px a=src b=xarm",
        "passage pxo a=xarm b=out",
        "passage py a=src b=y1",
        "passage pL a=y1 b=ybox via=polL",
        "passage pR a=ybox b=y2 via=polR",
        "passage pyo a=y2 b=out",
        "route x via=src0,bs1,fx,ps,Mx,bs2,Dx",
        "route y via=bs1,fy1,fb1,PC1,fb2,PC2,fb3,fy2,My,bs2,Dy",
        f"voltage v1 cell=PC1 on={_num(windows[0][0])} off={_num(windows[0][1])}",
        f"voltage v2 cell=PC2 on={_num(windows[1][0])} off={_num(windows[1][1])}",
    ]


# --------------------------------------------------------------------------
# closed forms


def mz_probabilities(phi: float, policy: CollapsePolicy, apparatus: str = "fig4") -> tuple[float, float]:
    """(p_x, p_y) at the two detectors of the interferometer presets."""
    if apparatus not in ("fig4", "fig5"):
        raise ConfigurationError(f"no interferometer prediction for {apparatus!r}")
    # fig4's shutters separate the arms strongly; fig5 only separates them
    # for the horizontally polarized packet, which the strong view ignores
    collapses = policy is CollapsePolicy.POV2_WEAK or (policy is CollapsePolicy.POV2_STRONG and apparatus == "fig4")
    if collapses:
        return 0.5, 0.5
    e = cmath.exp(1j * phi)
    return abs(e - 1) ** 2 / 4, abs(e + 1) ** 2 / 4


def default_phi_grid(points: int = 16) -> np.ndarray:
    if points < 2:
        raise ConfigurationError("a phase sweep needs at least 2 points")
    return np.linspace(0.0, 2 * np.pi, points, endpoint=False)


def analytic_mz(phi: float, policy: CollapsePolicy, apparatus: str = "fig4", grid: Sequence[float] | None = None) -> AnalyticPrediction:
    """Detector probabilities at ``phi``; visibility is that of p_x over ``grid``."""
    px, py = mz_probabilities(phi, policy, apparatus)
    grid = default_phi_grid() if grid is None else grid
    vis = visibility([mz_probabilities(p, policy, apparatus)[0] for p in grid])
    return AnalyticPrediction(policy, {"x": px, "y": py}, None, vis, 0.0)


def analytic_sweep(phis: Iterable[float], policy: CollapsePolicy, apparatus: str = "fig4") -> tuple[list[AnalyticPrediction], float]:
    phis = list(phis)
    preds = [analytic_mz(p, policy, apparatus, phis) for p in phis]
    return preds, visibility([p.detector_probs["x"] for p in preds])


def slit_positions(screen: ScreenParams) -> tuple[float, float]:
    return screen.slit_separation / 2, -screen.slit_separation / 2


def screen_amplitudes(r, screen: ScreenParams) -> tuple[np.ndarray, np.ndarray]:
    """Single-slit amplitudes on the screen: Gaussian envelope times path-length phase.

    Each |A_j|^2 integrates to 1 over the real line.
    """
    r = np.asarray(r, dtype=float)
    norm = (2 * np.pi * screen.sigma**2) ** -0.25
    envelope = norm * np.exp(-(r**2) / (4 * screen.sigma**2))
    k = 2 * np.pi / screen.wavelength
    out = []
    for y in slit_positions(screen):
        path = np.hypot(screen.distance, r - y)
        out.append(envelope * np.exp(1j * k * path))
    return out[0], out[1]


def analytic_screen(r, screen: ScreenParams, policy: CollapsePolicy, n: float = 1.0):
    """Screen density for an equal-weight two-slit state, with or without the cross term."""
    a1, a2 = screen_amplitudes(r, screen)
    density = 0.5 * np.abs(a1) ** 2 + 0.5 * np.abs(a2) ** 2
    if policy is CollapsePolicy.POV1:
        density = density + np.real(a1 * np.conj(a2))
    return n * density


def screen_density_from_state(r, screen: ScreenParams, rho: DensityMatrix, paths: tuple[str, str], region: str | None = None):
    """Density sum_jk rho_jk A_j(r) A_k(r)^* over the modes of the two slit paths."""
    amps = screen_amplitudes(r, screen)
    weights = []
    idx = []
    for i, m in enumerate(rho.basis):
        if m.path in paths and (region is None or m.region == region):
            idx.append(i)
            weights.append(amps[paths.index(m.path)])
    sub = np.asarray(rho.matrix)[np.ix_(idx, idx)]
    stacked = np.array(weights)
    return np.real(np.einsum("j...,jk,k...->...", stacked, sub, np.conj(stacked)))


def bin_masses(density: Callable[[np.ndarray], np.ndarray], edges: np.ndarray, nodes: int = 24) -> np.ndarray:
    """Integral of ``density`` over each bin by Gauss-Legendre quadrature."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    lo, hi = edges[:-1, None], edges[1:, None]
    half = (hi - lo) / 2
    points = lo + half * (x + 1)
    return np.sum(density(points) * w * half, axis=1)


def visibility(samples: Mapping[object, float] | Sequence[float] | np.ndarray) -> float:
    """(max - min) / (max + min) over sample values."""
    values = np.asarray(list(samples.values()) if isinstance(samples, Mapping) else samples, dtype=float)
    if values.size < 2:
        raise ConfigurationError("visibility needs at least 2 samples")
    if not np.all(np.isfinite(values)) or np.any(values < 0):
        raise ConfigurationError("visibility needs finite non-negative samples")
    hi, lo = float(values.max()), float(values.min())
    if hi + lo == 0:
        raise VisibilityUndefined("all samples are zero")
    return (hi - lo) / (hi + lo)


def analytic_for(scene: SceneDoc, policy: CollapsePolicy) -> AnalyticPrediction | None:
    """Closed-form prediction for a preset-shaped scene, or None when there is none."""
    apparatus = scene.meta.get("apparatus")
    if apparatus in ("fig4", "fig5"):
        ps = scene.meta.get("phase_shifter", "ps")
        phi = scene.component(ps).params.get("phi", 0.0)
        return analytic_mz(phi, policy, apparatus)
    if apparatus == "fig3" and scene.screen is not None:
        screen = scene.screen
        density = lambda r: analytic_screen(r, screen, policy)  # noqa: E731
        masses = bin_masses(density, screen.bin_edges())
        return AnalyticPrediction(policy, {}, density, visibility(masses), 0.0)
    return None


def phase_shifter_of(scene: SceneDoc) -> str:
    name = scene.meta.get("phase_shifter")
    if name is None:
        shifters = scene.components_of(ComponentKind.PHASE_SHIFTER)
        if len(shifters) != 1:
            raise ConfigurationError("scene needs exactly one phase shifter to sweep phi")
        name = shifters[0].id
    return name
