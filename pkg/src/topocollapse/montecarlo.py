"""Born-rule sampling of detection outcomes and aggregation over trials.

Every run point owns a Philox stream keyed by ``(seed, stream)``; trial i
consumes the i-th uniform of that stream.  Sweep points use their index as
the stream number, so running them in parallel cannot change any count.

The timeline is deterministic and the shutter/Pockels schedule is identical
for every pulse, so the final state is computed once per configuration and
each trial draws one whole-photon outcome from it.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import experiments, timeline
from .collapse import CollapsePolicy
from .errors import ConfigurationError, TimingError
from .optics import ComponentKind
from .qstate import DensityMatrix, Mode, validate
from .scenedsl import SceneDoc

LOSS = "loss"
# populations below this on non-detector modes are rounding residue
_STRAY = 1e-15


@dataclass(frozen=True)
class RunConfig:
    trials: int
    seed: int
    policy: CollapsePolicy
    sweep: tuple[float, ...] | None = None
    bins: int | None = None

    def __post_init__(self):
        if isinstance(self.trials, bool) or not isinstance(self.trials, (int, np.integer)) or self.trials < 1:
            raise ConfigurationError(f"trials must be a positive integer, got {self.trials!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)) or not 0 <= self.seed < 2**64:
            raise ConfigurationError(f"seed must be an integer in [0, 2**64), got {self.seed!r}")
        if self.sweep is not None:
            sweep = tuple(float(p) for p in self.sweep)
            if not sweep or not all(math.isfinite(p) for p in sweep):
                raise ConfigurationError("sweep values must be finite and non-empty")
            object.__setattr__(self, "sweep", sweep)
        if self.bins is not None and (int(self.bins) != self.bins or self.bins < 2):
            raise ConfigurationError("bins must be an integer >= 2")


@dataclass(frozen=True)
class ExperimentResult:
    counts: dict[str, int]
    policy: CollapsePolicy
    seed: int
    trials: int
    visibility: float | None = None
    analytic_reference: experiments.AnalyticPrediction | None = field(default=None, compare=False)
    phi: float | None = None
    # analytic probability of each outcome in ``counts`` (same keys)
    expected: dict[str, float] = field(default_factory=dict, compare=False)

    @property
    def frequencies(self) -> dict[str, float]:
        return {k: v / self.trials for k, v in self.counts.items()}


@dataclass(frozen=True)
class SweepResult:
    results: tuple[ExperimentResult, ...]
    visibility: float
    outcome: str


def stream(seed: int, index: int = 0) -> np.random.Generator:
    """Counter-based generator for one run point."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(index)])))


def _cdf(probs: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(probs)
    if not cdf[-1] > 0:
        raise ConfigurationError("outcome distribution has zero total probability")
    return cdf / cdf[-1]


def _check(rho: DensityMatrix) -> None:
    problems = validate(rho)
    if problems:
        raise ConfigurationError("invalid density matrix: " + "; ".join(str(p) for p in problems))


def sample_outcome(rho: DensityMatrix, rng: np.random.Generator) -> tuple[Mode | str, np.random.Generator]:
    """One whole-photon outcome: a basis mode or ``"loss"`` (inverse CDF in basis order)."""
    _check(rho)
    probs = np.append(rho.populations(), max(rho.norm_deficit, 0.0))
    k = int(np.searchsorted(_cdf(probs), rng.random(), side="right"))
    outcome = rho.basis[k] if k < rho.dim else LOSS
    return outcome, rng


def _detector_labels(scene: SceneDoc) -> dict[tuple[str, str], str]:
    """(region, path) -> outcome label for every route that ends at a terminal."""
    labels = {}
    for r in scene.routes:
        last = scene.component(r.elements[-1])
        if last.kind is ComponentKind.DETECTOR:
            labels[(last.location, r.path)] = last.params.get("label", last.id)
        elif last.kind is ComponentKind.SCREEN:
            labels[(last.location, r.path)] = last.id
    return labels


def outcome_distribution(rho: DensityMatrix, scene: SceneDoc) -> dict[str, float]:
    """Probabilities of each reported outcome, loss last.

    Detector outcomes are always listed; a mode that is not at a detector
    appears (as ``region/path/pol``) only if it still holds probability.
    """
    labels = _detector_labels(scene)
    dist: dict[str, float] = {label: 0.0 for label in labels.values()}
    for mode, p in zip(rho.basis, rho.populations()):
        key = labels.get((mode.region, mode.path))
        if key is None:
            if p <= _STRAY:
                continue
            key = str(mode)
        dist[key] = dist.get(key, 0.0) + float(p)
    dist[LOSS] = max(rho.norm_deficit, 0.0)
    return dist


def final_state(scene: SceneDoc, policy: CollapsePolicy) -> DensityMatrix:
    tl = timeline.schedule(scene)
    violations = timeline.validate_timing(tl)
    if violations:
        raise TimingError(violations)
    return timeline.run(tl, scene, policy).state


def _draw(probs: Sequence[float], trials: int, rng: np.random.Generator) -> np.ndarray:
    cdf = _cdf(np.asarray(probs, dtype=float))
    picks = np.searchsorted(cdf, rng.random(trials), side="right")
    return np.bincount(picks, minlength=len(cdf))


def run_trials(cfg: RunConfig, scene: SceneDoc, stream_index: int = 0) -> ExperimentResult:
    rho = final_state(scene, cfg.policy)
    _check(rho)
    dist = outcome_distribution(rho, scene)
    counts = _draw(list(dist.values()), cfg.trials, stream(cfg.seed, stream_index))
    reference = experiments.analytic_for(scene, cfg.policy)
    phi = None
    if scene.components_of(ComponentKind.PHASE_SHIFTER):
        phi = scene.component(experiments.phase_shifter_of(scene)).params.get("phi", 0.0)
    return ExperimentResult(
        counts={k: int(c) for k, c in zip(dist, counts)},
        policy=cfg.policy,
        seed=cfg.seed,
        trials=cfg.trials,
        analytic_reference=reference,
        phi=phi,
        expected=dict(dist),
    )


def run_sweep(cfg: RunConfig, scene: SceneDoc, workers: int | None = None, outcome: str = "x") -> SweepResult:
    """One run per phase in ``cfg.sweep``; visibility of ``outcome`` frequencies across the grid."""
    phis = cfg.sweep if cfg.sweep is not None else tuple(experiments.default_phi_grid())
    shifter = experiments.phase_shifter_of(scene)
    point_cfg = RunConfig(cfg.trials, cfg.seed, cfg.policy)

    def point(i: int) -> ExperimentResult:
        return run_trials(point_cfg, scene.with_component_params(shifter, phi=phis[i]), stream_index=i)

    if workers is not None and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = tuple(pool.map(point, range(len(phis))))
    else:
        results = tuple(point(i) for i in range(len(phis)))
    freqs = [r.frequencies.get(outcome, 0.0) for r in results]
    return SweepResult(results, experiments.visibility(freqs), outcome)


def _slit_paths(scene: SceneDoc) -> tuple[str, str]:
    splitter = scene.meta.get("slit_splitter")
    if splitter is not None:
        return tuple(scene.component(splitter).params["paths"])
    screen = scene.components_of(ComponentKind.SCREEN)[0]
    paths = tuple(r.path for r in scene.routes if r.elements[-1] == screen.id)
    if len(paths) != 2:
        raise ConfigurationError("the screen must terminate exactly two routes")
    return paths


def screen_bin_probabilities(scene: SceneDoc, rho: DensityMatrix, bins: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """(edges, probabilities) of the screen bins for the final state; probabilities sum to 1 - loss."""
    screen = scene.screen
    if screen is None:
        raise ConfigurationError("scene has no screen")
    if bins is not None:
        screen = replace(screen, bins=int(bins))
    paths = _slit_paths(scene)
    region = scene.components_of(ComponentKind.SCREEN)[0].location
    edges = screen.bin_edges()
    masses = experiments.bin_masses(
        lambda r: experiments.screen_density_from_state(r, screen, rho, paths, region), edges
    )
    masses = np.clip(masses, 0.0, None)
    arrived = max(1.0 - rho.norm_deficit, 0.0)
    return edges, arrived * masses / masses.sum()


def screen_histogram(cfg: RunConfig, scene: SceneDoc) -> ExperimentResult:
    """Histogram of screen positions over ``cfg.trials`` photons."""
    if scene.screen is None:
        raise ConfigurationError("scene has no screen")
    rho = final_state(scene, cfg.policy)
    _check(rho)
    _, probs = screen_bin_probabilities(scene, rho, cfg.bins)
    width = len(str(len(probs) - 1))
    keys = [f"bin{k:0{width}d}" for k in range(len(probs))] + [LOSS]
    full = np.append(probs, max(rho.norm_deficit, 0.0))
    counts = _draw(full, cfg.trials, stream(cfg.seed))
    binned = counts[:-1]
    vis = experiments.visibility(binned) if binned.sum() > 0 else None
    return ExperimentResult(
        counts={k: int(c) for k, c in zip(keys, counts)},
        policy=cfg.policy,
        seed=cfg.seed,
        trials=cfg.trials,
        visibility=vis,
        analytic_reference=experiments.analytic_for(scene, cfg.policy),
        expected=dict(zip(keys, full.tolist())),
    )
