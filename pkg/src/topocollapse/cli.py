"""Command-line front end.

    topocollapse run --scene fig4 --policy pov1 --trials 10000 --seed 7
    topocollapse sweep --scene fig4 --policy pov1 --phi-grid 16 --trials 100000 --seed 7
    topocollapse analytic --scene fig4 --policy pov2-strong --phi 0
    topocollapse validate --scene my.scene
    topocollapse feasibility --response 1e-6 --speed 3e8
    topocollapse presets --output scenes/

``--scene`` takes a preset name (fig1..fig5) or a path to a ``.scene`` file.
Relative ``--output`` paths are resolved against ``$TOPOCOLLAPSE_OUTPUT_DIR``
when it is set.  Exit status: 0 success, 1 scene/timing/IO error, 2 usage.
"""

from __future__ import annotations

import argparse
import io
import math
import os
import sys
from pathlib import Path
from typing import Sequence, TextIO

from . import experiments, montecarlo, scenedsl, timeline
from .collapse import CollapsePolicy
from .errors import ConfigurationError, SceneSyntaxError, TimingError, VisibilityUndefined

OUTPUT_DIR_ENV = "TOPOCOLLAPSE_OUTPUT_DIR"
CSV_HEADER = "phi,policy,seed,trials,outcome,count,frequency,analytic_p"


class UsageError(Exception):
    pass


def _fmt(x: float | int | None) -> str:
    if x is None:
        return ""
    if isinstance(x, int):
        return str(x)
    x = float(x)
    if x.is_integer():
        return str(int(x))
    return repr(x)


def _analytic_p(result: montecarlo.ExperimentResult, outcome: str) -> float | None:
    ref = result.analytic_reference
    if ref is not None and outcome in ref.detector_probs:
        return ref.detector_probs[outcome]
    if ref is not None and outcome == montecarlo.LOSS and ref.detector_probs:
        return ref.loss
    return result.expected.get(outcome)


def write_csv(results: Sequence[montecarlo.ExperimentResult], out: TextIO) -> None:
    """One row per (phi, outcome), in result order then outcome order."""
    if not results:
        raise UsageError("no results to write")
    out.write(CSV_HEADER + "\n")
    for r in results:
        for outcome, count in r.counts.items():
            row = [
                _fmt(r.phi),
                str(r.policy),
                str(r.seed),
                str(r.trials),
                outcome,
                str(count),
                _fmt(count / r.trials),
                _fmt(_analytic_p(r, outcome)),
            ]
            out.write(",".join(row) + "\n")


def _pretty(results: Sequence[montecarlo.ExperimentResult], out: TextIO) -> None:
    for r in results:
        head = f"policy={r.policy} seed={r.seed} trials={r.trials}"
        if r.phi is not None:
            head += f" phi={r.phi:.6g}"
        out.write(head + "\n")
        out.write(f"  {'outcome':<16}{'count':>10}{'frequency':>12}{'analytic':>12}\n")
        for outcome, count in r.counts.items():
            p = _analytic_p(r, outcome)
            shown = "" if p is None else f"{p:.6f}"
            out.write(f"  {outcome:<16}{count:>10}{count / r.trials:>12.6f}{shown:>12}\n")
        if r.visibility is not None:
            out.write(f"  visibility {r.visibility:.6f}\n")


# --------------------------------------------------------------------------
# argument handling


def _policy(name: str) -> CollapsePolicy:
    try:
        return CollapsePolicy.parse(name)
    except ConfigurationError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _finite_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"must be finite: {text!r}")
    return value


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return value


def _seed(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must lie in [0, 2**64)")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="topocollapse", description="Single-photon collapse-policy simulator.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, policy=True):
        p.add_argument("--scene", required=True, help="preset name (fig1..fig5) or .scene file")
        if policy:
            p.add_argument("--policy", required=True, type=_policy, help="pov1, pov2-strong or pov2-weak")

    def sampling(p):
        p.add_argument("--trials", type=_positive_int, default=10_000)
        p.add_argument("--seed", type=_seed, default=0)
        p.add_argument("--output", help="CSV/report file (default: stdout)")
        p.add_argument("--format", choices=("csv", "pretty"), default="csv")

    p = sub.add_parser("run", help="sample one configuration")
    common(p)
    p.add_argument("--phi", type=_finite_float, help="phase shifter setting in radians")
    p.add_argument("--bins", type=_positive_int, help="screen bins (screen scenes only)")
    sampling(p)

    p = sub.add_parser("sweep", help="sample over a grid of phases")
    common(p)
    grid = p.add_mutually_exclusive_group()
    grid.add_argument("--phi-grid", type=_positive_int, default=16, help="number of equally spaced phases in [0, 2pi)")
    grid.add_argument("--phis", type=_finite_float, nargs="+", help="explicit phases in radians")
    p.add_argument("--workers", type=_positive_int, default=1)
    sampling(p)

    p = sub.add_parser("analytic", help="closed-form predictions only")
    common(p)
    p.add_argument("--phi", type=_finite_float)

    p = sub.add_parser("validate", help="check a scene")
    common(p, policy=False)

    p = sub.add_parser("feasibility", help="minimum shutter separation table")
    p.add_argument("--response", type=_finite_float, nargs="+", required=True, help="shutter response times [s]")
    p.add_argument("--speed", type=_finite_float, nargs="+", required=True, help="propagation speeds [m/s]")

    p = sub.add_parser("presets", help="write the five preset .scene files")
    p.add_argument("--output", help="directory (default: $TOPOCOLLAPSE_OUTPUT_DIR or current directory)")
    return parser


def _output_path(raw: str | None) -> Path | None:
    if raw is None:
        return None
    path = Path(raw)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not path.is_absolute():
        path = Path(base) / path
    return path


def load_scene(spec: str) -> scenedsl.SceneDoc:
    if spec in experiments.PRESETS:
        return experiments.preset(spec)
    path = Path(spec)
    if not path.is_file():
        raise ConfigurationError(f"{spec!r} is neither a preset ({', '.join(experiments.PRESETS)}) nor a file")
    return scenedsl.parse(path.read_bytes())


def _scene_line(doc: scenedsl.SceneDoc | None, line: int | None) -> str | None:
    if doc is None or line is None or not 0 < line <= len(doc.text):
        return None
    return f"  line {line}: {doc.text[line - 1]}"


def _emit(text: str, target: Path | None, stdout: TextIO) -> None:
    if target is None:
        stdout.write(text)
    else:
        target.parent.mkdir(parents=True, exist_ok=True)
        with open(target, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _with_phi(doc: scenedsl.SceneDoc, phi: float | None) -> scenedsl.SceneDoc:
    if phi is None:
        return doc
    return doc.with_component_params(experiments.phase_shifter_of(doc), phi=phi)


def _cmd_run(args, stdout, stderr) -> int:
    doc = _with_phi(load_scene(args.scene), args.phi)
    cfg = montecarlo.RunConfig(args.trials, args.seed, args.policy, bins=args.bins)
    if doc.screen is not None:
        result = montecarlo.screen_histogram(cfg, doc)
    else:
        result = montecarlo.run_trials(cfg, doc)
    buf = io.StringIO()
    (write_csv if args.format == "csv" else _pretty)([result], buf)
    _emit(buf.getvalue(), _output_path(args.output), stdout)
    return 0


def _cmd_sweep(args, stdout, stderr) -> int:
    doc = load_scene(args.scene)
    phis = tuple(args.phis) if args.phis else tuple(experiments.default_phi_grid(args.phi_grid))
    if len(phis) < 2:
        raise UsageError("a sweep needs at least 2 phases")
    cfg = montecarlo.RunConfig(args.trials, args.seed, args.policy, sweep=phis)
    sweep = montecarlo.run_sweep(cfg, doc, workers=args.workers)
    buf = io.StringIO()
    (write_csv if args.format == "csv" else _pretty)(sweep.results, buf)
    _emit(buf.getvalue(), _output_path(args.output), stdout)
    summary = f"visibility({sweep.outcome}) = {sweep.visibility:.6f} over {len(phis)} phases\n"
    (stderr if args.format == "csv" or args.output else stdout).write(summary)
    return 0


def _cmd_analytic(args, stdout, stderr) -> int:
    doc = _with_phi(load_scene(args.scene), args.phi)
    pred = experiments.analytic_for(doc, args.policy)
    if pred is None:
        raise ConfigurationError(f"no closed-form prediction for scene {doc.name!r}")
    stdout.write(f"policy={pred.policy}\n")
    for outcome, p in pred.detector_probs.items():
        stdout.write(f"p_{outcome}={_fmt(p)}\n")
    if pred.screen_density is not None:
        screen = doc.screen
        masses = experiments.bin_masses(pred.screen_density, screen.bin_edges())
        masses = masses / masses.sum()
        stdout.write(f"fringe_spacing={_fmt(screen.fringe_spacing)}\n")
        stdout.write("bin_p=" + ",".join(_fmt(m) for m in masses) + "\n")
    stdout.write(f"visibility={_fmt(pred.visibility)}\n")
    return 0


def _cmd_validate(args, stdout, stderr) -> int:
    doc = load_scene(args.scene)
    report = scenedsl.validate(doc)
    for issue in report:
        stream = stderr if issue.severity == "error" else stdout
        stream.write(str(issue) + "\n")
        shown = _scene_line(doc, issue.line)
        if shown:
            stream.write(shown + "\n")
    errors = scenedsl.errors_only(report)
    if errors:
        return 1
    stdout.write(f"scene {doc.name}: ok\n")
    return 0


def _cmd_feasibility(args, stdout, stderr) -> int:
    stdout.write("response_s,speed_m_per_s,min_separation_m\n")
    for response in args.response:
        for speed in args.speed:
            length = timeline.min_separation(response, speed)
            stdout.write(f"{_fmt(response)},{_fmt(speed)},{_fmt(length)}\n")
    return 0


def _cmd_presets(args, stdout, stderr) -> int:
    target = _output_path(args.output) or Path(os.environ.get(OUTPUT_DIR_ENV) or ".")
    target.mkdir(parents=True, exist_ok=True)
    for name in experiments.PRESETS:
        path = target / f"{name}.scene"
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(scenedsl.serialize(experiments.preset(name)))
        stdout.write(f"wrote {path}\n")
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "analytic": _cmd_analytic,
    "validate": _cmd_validate,
    "feasibility": _cmd_feasibility,
    "presets": _cmd_presets,
}


def main(argv: Sequence[str] | None = None, stdout: TextIO | None = None, stderr: TextIO | None = None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    doc_for_lines: scenedsl.SceneDoc | None = None
    try:
        if getattr(args, "scene", None) and args.command != "presets":
            try:
                doc_for_lines = load_scene(args.scene)
            except ConfigurationError:
                doc_for_lines = None
        return _COMMANDS[args.command](args, stdout, stderr)
    except UsageError as exc:
        stderr.write(f"usage error: {exc}\n")
        return 2
    except SceneSyntaxError as exc:
        text = _raw_lines(args.scene)
        for issue in exc.errors:
            stderr.write(f"error: {issue}\n")
            if text and 0 < issue.line <= len(text):
                stderr.write(f"  line {issue.line}: {text[issue.line - 1]}\n")
        return 1
    except TimingError as exc:
        stderr.write(f"error: {exc}\n")
        for v in exc.violations:
            shown = _scene_line(doc_for_lines, doc_for_lines.line_of("component", v.component) if doc_for_lines else None)
            if shown:
                stderr.write(shown + "\n")
        return 1
    except (ConfigurationError, VisibilityUndefined) as exc:
        stderr.write(f"error: {exc}\n")
        return 1
    except OSError as exc:
        stderr.write(f"error: {exc}\n")
        return 1


def _raw_lines(spec: str) -> list[str]:
    try:
        return Path(spec).read_bytes().decode("utf-8", errors="replace").splitlines()
    except OSError:
        return []


if __name__ == "__main__":
    sys.exit(main())
