"""Reader and writer for ``.scene`` bench descriptions.

One declaration per line::

    keyword [name] key=value key=value ...

``#`` starts a comment.  Declarations may come in any order; references are
resolved once the whole file has been read.  Values are SI numbers
(``3e8``), identifiers (ASCII letters, digits, underscore), ``a:b`` pairs,
comma lists, polarizations ``H``/``V`` and, for ``amplitude``, complex
literals such as ``0.6-0.8j``.

Keywords
--------
scene NAME
meta key=value ...
constants speed=M_PER_S packet=SECONDS
region NAME
source NAME region= path= pol= [t=]
amplitude NAME region= path= pol= value=
beamsplitter NAME region= paths=FIRST:SECOND
phaseshifter NAME region= [phi=]
mirror NAME region=
fiber NAME region= length=
pockels NAME region= [response=]
shutter NAME response= [region=] [between=FIBER:FIBER]
polarizer NAME axis= [region=] [between=FIBER:FIBER]
detector NAME region= [label=]
screen NAME region= slit= distance= wavelength= sigma= bins= [halfwidth=]
passage NAME a=REGION b=REGION [via=COMPONENT]
route PATH via=ELEMENT,ELEMENT,...
close NAME shutter= t=
open NAME shutter= t=
voltage NAME cell= on= off=

Shutters and polarizers with ``between=`` sit on the junction of two
consecutive fibers of a route and are not listed in the route itself.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Iterable

import numpy as np

from .errors import ConfigurationError, SceneSyntaxError
from .optics import BOUNDARY_KINDS, TERMINAL_KINDS, ComponentKind, ComponentSpec, PockelsSchedule
from .qstate import Mode, Polarization

SPEED_OF_LIGHT = 299_792_458.0
DEFAULT_PACKET_DURATION = 1e-9

_IDENT = re.compile(r"[A-Za-z0-9_]+\Z", re.ASCII)
_META_VALUE = re.compile(r"[A-Za-z0-9_.:+\-]+\Z", re.ASCII)
_FLOAT = re.compile(r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?\Z", re.ASCII)
_INT = re.compile(r"[+-]?\d+\Z", re.ASCII)
_COMPLEX = re.compile(r"[0-9eE.+\-j]+\Z", re.ASCII)


# --------------------------------------------------------------------------
# document model


@dataclass(frozen=True)
class Passage:
    id: str
    a: str
    b: str
    via: str | None = None  # None: always open


@dataclass(frozen=True)
class Route:
    path: str
    elements: tuple[str, ...]


@dataclass(frozen=True)
class Amplitude:
    id: str
    mode: Mode
    value: complex


@dataclass(frozen=True)
class ShutterTransition:
    id: str
    shutter: str
    time: float
    closing: bool


@dataclass(frozen=True)
class VoltageWindow:
    id: str
    cell: str
    on: float
    off: float


@dataclass(frozen=True)
class SourceSpec:
    id: str
    region: str
    path: str
    polarization: Polarization
    time: float


@dataclass(frozen=True)
class ScreenParams:
    slit_separation: float
    distance: float
    wavelength: float
    sigma: float
    bins: int
    halfwidth: float

    @property
    def fringe_spacing(self) -> float:
        return self.wavelength * self.distance / self.slit_separation

    def bin_edges(self) -> np.ndarray:
        return np.linspace(-self.halfwidth, self.halfwidth, self.bins + 1)


@dataclass
class SceneDoc:
    name: str
    regions: tuple[str, ...]
    components: tuple[ComponentSpec, ...]
    passages: tuple[Passage, ...] = ()
    routes: tuple[Route, ...] = ()
    amplitudes: tuple[Amplitude, ...] = ()
    schedules: tuple[ShutterTransition | VoltageWindow, ...] = ()
    speed: float = SPEED_OF_LIGHT
    packet_duration: float = DEFAULT_PACKET_DURATION
    meta: dict[str, str] = field(default_factory=dict)
    # declaration key -> 1-based line, only filled by parse()
    lines: dict[tuple[str, str], int] = field(default_factory=dict, compare=False, repr=False)
    text: tuple[str, ...] = field(default=(), compare=False, repr=False)

    def component(self, cid: str) -> ComponentSpec:
        for c in self.components:
            if c.id == cid:
                return c
        raise ConfigurationError(f"unknown component {cid!r}")

    def components_of(self, kind: ComponentKind) -> list[ComponentSpec]:
        return [c for c in self.components if c.kind is kind]

    @property
    def source(self) -> SourceSpec:
        sources = self.components_of(ComponentKind.SOURCE)
        if len(sources) != 1:
            raise ConfigurationError(f"scene needs exactly one source, found {len(sources)}")
        s = sources[0]
        return SourceSpec(s.id, s.location, s.params["path"], s.params["pol"], s.params.get("t", 0.0))

    @property
    def screen(self) -> ScreenParams | None:
        screens = self.components_of(ComponentKind.SCREEN)
        if not screens:
            return None
        p = screens[0].params
        return ScreenParams(
            slit_separation=p["slit"],
            distance=p["distance"],
            wavelength=p["wavelength"],
            sigma=p["sigma"],
            bins=p["bins"],
            halfwidth=p.get("halfwidth", 3.0 * p["sigma"]),
        )

    def location(self, cid: str) -> str:
        """Region of a component; boundary components default to their upstream fiber's region."""
        comp = self.component(cid)
        if comp.location is not None:
            return comp.location
        between = comp.params.get("between")
        if between:
            return self.component(between[0]).location
        raise ConfigurationError(f"component {cid!r} has no region")

    def expanded_route(self, route: Route) -> tuple[str, ...]:
        """Route elements with junction components spliced in."""
        junctions = {
            c.params["between"]: c.id
            for c in self.components
            if c.kind in BOUNDARY_KINDS and c.params.get("between")
        }
        out: list[str] = []
        for prev, cur in zip((None,) + route.elements, route.elements):
            if prev is not None and (prev, cur) in junctions:
                out.append(junctions[(prev, cur)])
            out.append(cur)
        return tuple(out)

    def pockels_schedule(self, cell: str) -> PockelsSchedule:
        return PockelsSchedule(
            tuple((w.on, w.off) for w in self.schedules if isinstance(w, VoltageWindow) and w.cell == cell)
        )

    def shutter_transitions(self, shutter: str | None = None) -> list[ShutterTransition]:
        return [
            s
            for s in self.schedules
            if isinstance(s, ShutterTransition) and (shutter is None or s.shutter == shutter)
        ]

    def line_of(self, category: str, name: str) -> int | None:
        return self.lines.get((category, name))

    def with_component_params(self, cid: str, **params: Any) -> "SceneDoc":
        comps = tuple(
            ComponentSpec(c.kind, c.id, c.location, {**c.params, **params}) if c.id == cid else c
            for c in self.components
        )
        return replace(self, components=comps)

    def without_schedules(self, predicate: Callable[[Any], bool]) -> "SceneDoc":
        return replace(self, schedules=tuple(s for s in self.schedules if not predicate(s)))


# --------------------------------------------------------------------------
# value codecs


class _BadValue(Exception):
    pass


def _ident(tok: str) -> str:
    if not _IDENT.match(tok):
        raise _BadValue(f"invalid identifier {tok!r}")
    return tok


def _float(tok: str) -> float:
    if not _FLOAT.match(tok):
        raise _BadValue(f"invalid number {tok!r}")
    value = float(tok)
    if not math.isfinite(value):
        raise _BadValue(f"number {tok!r} is not finite")
    return value


def _int(tok: str) -> int:
    if not _INT.match(tok):
        raise _BadValue(f"invalid integer {tok!r}")
    return int(tok)


def _pair(tok: str) -> tuple[str, str]:
    parts = tok.split(":")
    if len(parts) != 2:
        raise _BadValue(f"expected FIRST:SECOND, got {tok!r}")
    return _ident(parts[0]), _ident(parts[1])


def _list(tok: str) -> tuple[str, ...]:
    return tuple(_ident(p) for p in tok.split(","))


def _pol(tok: str) -> Polarization:
    try:
        return Polarization(tok)
    except ValueError:
        raise _BadValue(f"polarization must be H or V, got {tok!r}") from None


def _complex(tok: str) -> complex:
    if not _COMPLEX.match(tok):
        raise _BadValue(f"invalid complex number {tok!r}")
    try:
        value = complex(tok)
    except ValueError:
        raise _BadValue(f"invalid complex number {tok!r}") from None
    if not (math.isfinite(value.real) and math.isfinite(value.imag)):
        raise _BadValue(f"complex number {tok!r} is not finite")
    return value


def _token(tok: str) -> str:
    if not _META_VALUE.match(tok):
        raise _BadValue(f"invalid value {tok!r}")
    return tok


def _fmt_float(x: float) -> str:
    return repr(float(x))


def _fmt_complex(z: complex) -> str:
    sign = "-" if math.copysign(1.0, z.imag) < 0 else "+"
    return f"{z.real!r}{sign}{abs(z.imag)!r}j"


_DECODE = {
    "id": _ident,
    "float": _float,
    "int": _int,
    "pair": _pair,
    "list": _list,
    "pol": _pol,
    "complex": _complex,
    "token": _token,
}
_ENCODE: dict[str, Callable[[Any], str]] = {
    "id": str,
    "float": _fmt_float,
    "int": str,
    "pair": lambda p: f"{p[0]}:{p[1]}",
    "list": ",".join,
    "pol": lambda p: p.value,
    "complex": _fmt_complex,
    "token": str,
}


@dataclass(frozen=True)
class _Key:
    name: str
    kind: str
    required: bool = False


def _keys(*specs: tuple) -> dict[str, _Key]:
    return {s[0]: _Key(*s) for s in specs}


# keys of each component kind, in canonical output order; "region" maps to location
_COMPONENT_KEYS: dict[ComponentKind, dict[str, _Key]] = {
    ComponentKind.SOURCE: _keys(("region", "id", True), ("path", "id", True), ("pol", "pol", True), ("t", "float")),
    ComponentKind.BEAM_SPLITTER: _keys(("region", "id", True), ("paths", "pair", True)),
    ComponentKind.PHASE_SHIFTER: _keys(("region", "id", True), ("phi", "float")),
    ComponentKind.MIRROR: _keys(("region", "id", True)),
    ComponentKind.POLARIZER: _keys(("axis", "pol", True), ("region", "id"), ("between", "pair")),
    ComponentKind.POCKELS_CELL: _keys(("region", "id", True), ("response", "float")),
    ComponentKind.SHUTTER: _keys(("response", "float", True), ("region", "id"), ("between", "pair")),
    ComponentKind.FIBER: _keys(("region", "id", True), ("length", "float", True)),
    ComponentKind.DETECTOR: _keys(("region", "id", True), ("label", "id")),
    ComponentKind.SCREEN: _keys(
        ("region", "id", True),
        ("slit", "float", True),
        ("distance", "float", True),
        ("wavelength", "float", True),
        ("sigma", "float", True),
        ("bins", "int", True),
        ("halfwidth", "float"),
    ),
}

_OTHER_KEYS: dict[str, dict[str, _Key]] = {
    "scene": {},
    "region": {},
    "constants": _keys(("speed", "float"), ("packet", "float")),
    "passage": _keys(("a", "id", True), ("b", "id", True), ("via", "id")),
    "route": _keys(("via", "list", True)),
    "amplitude": _keys(("region", "id", True), ("path", "id", True), ("pol", "pol", True), ("value", "complex", True)),
    "close": _keys(("shutter", "id", True), ("t", "float", True)),
    "open": _keys(("shutter", "id", True), ("t", "float", True)),
    "voltage": _keys(("cell", "id", True), ("on", "float", True), ("off", "float", True)),
}

_KIND_BY_KEYWORD = {k.value: k for k in ComponentKind}
# keywords that take no NAME token
_UNNAMED = {"meta", "constants"}


@dataclass(frozen=True)
class ParseIssue:
    line: int
    column: int
    message: str

    def __str__(self) -> str:
        return f"line {self.line}, column {self.column}: {self.message}"


@dataclass
class _Decl:
    keyword: str
    name: str | None
    values: dict[str, Any]
    line: int
    columns: dict[str, int]


def _tokenize(line: str) -> list[tuple[int, str]]:
    body = line.split("#", 1)[0]
    return [(m.start() + 1, m.group()) for m in re.finditer(r"\S+", body)]


def _read_line(lineno: int, line: str, errors: list[ParseIssue]) -> _Decl | None:
    tokens = _tokenize(line)
    if not tokens:
        return None
    col, keyword = tokens[0]
    if keyword in _KIND_BY_KEYWORD:
        schema = _COMPONENT_KEYS[_KIND_BY_KEYWORD[keyword]]
    elif keyword in _OTHER_KEYS:
        schema = _OTHER_KEYS[keyword]
    elif keyword == "meta":
        schema = None
    else:
        errors.append(ParseIssue(lineno, col, f"unknown keyword {keyword!r}"))
        return None

    rest = tokens[1:]
    name = None
    name_col = col
    if keyword not in _UNNAMED:
        if not rest or "=" in rest[0][1]:
            errors.append(ParseIssue(lineno, col, f"{keyword} declaration needs a name"))
            return None
        name_col, name = rest[0]
        rest = rest[1:]
        if not _IDENT.match(name):
            errors.append(ParseIssue(lineno, name_col, f"invalid identifier {name!r}"))
            return None

    values: dict[str, Any] = {}
    columns: dict[str, int] = {"": name_col}
    given: set[str] = set()
    ok = True
    for tcol, tok in rest:
        key, eq, raw = tok.partition("=")
        if not eq or not key:
            errors.append(ParseIssue(lineno, tcol, f"expected key=value, got {tok!r}"))
            ok = False
            continue
        if key in given:
            errors.append(ParseIssue(lineno, tcol, f"key {key!r} given twice"))
            ok = False
            continue
        given.add(key)
        if schema is None:
            if not _IDENT.match(key):
                errors.append(ParseIssue(lineno, tcol, f"invalid key {key!r}"))
                ok = False
                continue
            spec = _Key(key, "token")
        elif key not in schema:
            errors.append(ParseIssue(lineno, tcol, f"{keyword} does not accept key {key!r}"))
            ok = False
            continue
        else:
            spec = schema[key]
        try:
            values[key] = _DECODE[spec.kind](raw)
        except _BadValue as exc:
            errors.append(ParseIssue(lineno, tcol + len(key) + 1, str(exc)))
            ok = False
            continue
        columns[key] = tcol
    if schema is not None:
        for spec in schema.values():
            if spec.required and spec.name not in given:
                errors.append(ParseIssue(lineno, col, f"{keyword} {name or ''} is missing {spec.name}=".strip()))
                ok = False
    if not ok:
        return None
    return _Decl(keyword, name, values, lineno, columns)


def _as_text(data: str | bytes, errors: list[ParseIssue]) -> str | None:
    if isinstance(data, str):
        return data
    try:
        return bytes(data).decode("utf-8")
    except UnicodeDecodeError as exc:
        before = bytes(data)[: exc.start]
        line = before.count(b"\n") + 1
        column = exc.start - (before.rfind(b"\n") + 1) + 1
        errors.append(ParseIssue(line, column, "input is not valid UTF-8"))
        return None


def parse(data: str | bytes) -> SceneDoc:
    """Parse a scene document, raising :class:`SceneSyntaxError` with every problem found."""
    errors: list[ParseIssue] = []
    text = _as_text(data, errors)
    if text is None:
        raise SceneSyntaxError(errors)
    lines = text.splitlines()
    decls = []
    for lineno, line in enumerate(lines, start=1):
        decl = _read_line(lineno, line, errors)
        if decl is not None:
            decls.append(decl)
    doc = _assemble(decls, errors, len(lines))
    if errors:
        raise SceneSyntaxError(sorted(errors, key=lambda e: (e.line, e.column)))
    doc.text = tuple(lines)
    return doc


def _assemble(decls: list[_Decl], errors: list[ParseIssue], nlines: int) -> SceneDoc:
    name = "unnamed"
    meta: dict[str, str] = {}
    speed, packet = SPEED_OF_LIGHT, DEFAULT_PACKET_DURATION
    regions: list[str] = []
    components: list[ComponentSpec] = []
    passages: list[Passage] = []
    routes: list[Route] = []
    amplitudes: list[Amplitude] = []
    schedules: list[ShutterTransition | VoltageWindow] = []
    lines: dict[tuple[str, str], int] = {}
    seen: dict[tuple[str, str], int] = {}
    decl_of: dict[tuple[str, str], _Decl] = {}
    singletons: dict[str, int] = {}

    def claim(namespace: str, decl: _Decl) -> bool:
        key = (namespace, decl.name)
        if key in seen:
            errors.append(
                ParseIssue(decl.line, decl.columns[""], f"duplicate identifier {decl.name!r} (first declared on line {seen[key]})")
            )
            return False
        seen[key] = decl.line
        decl_of[key] = decl
        return True

    for d in decls:
        v = d.values
        if d.keyword in ("scene", "constants", "meta"):
            if d.keyword != "meta" and d.keyword in singletons:
                errors.append(ParseIssue(d.line, 1, f"{d.keyword} declared twice (first on line {singletons[d.keyword]})"))
                continue
            singletons.setdefault(d.keyword, d.line)
            if d.keyword == "scene":
                name = d.name
            elif d.keyword == "constants":
                speed = v.get("speed", speed)
                packet = v.get("packet", packet)
                for key in ("speed", "packet"):
                    if key in v and not v[key] > 0:
                        errors.append(ParseIssue(d.line, d.columns[key], f"{key} must be positive"))
            else:
                for key, value in v.items():
                    if key in meta:
                        errors.append(ParseIssue(d.line, d.columns[key], f"meta key {key!r} given twice"))
                    meta[key] = value
        elif d.keyword == "region":
            if claim("region", d):
                regions.append(d.name)
                lines[("region", d.name)] = d.line
        elif d.keyword == "route":
            if claim("route", d):
                routes.append(Route(d.name, v["via"]))
                lines[("route", d.name)] = d.line
        elif d.keyword in _KIND_BY_KEYWORD:
            if not claim("object", d):
                continue
            kind = _KIND_BY_KEYWORD[d.keyword]
            params = {k: val for k, val in v.items() if k != "region"}
            try:
                components.append(ComponentSpec(kind, d.name, v.get("region"), params))
            except ConfigurationError as exc:
                errors.append(ParseIssue(d.line, d.columns[""], str(exc)))
                continue
            lines[("component", d.name)] = d.line
        elif d.keyword == "passage":
            if claim("object", d):
                passages.append(Passage(d.name, v["a"], v["b"], v.get("via")))
                lines[("passage", d.name)] = d.line
        elif d.keyword == "amplitude":
            if claim("object", d):
                amplitudes.append(Amplitude(d.name, Mode(v["region"], v["path"], v["pol"]), v["value"]))
                lines[("amplitude", d.name)] = d.line
        elif d.keyword in ("close", "open"):
            if claim("object", d):
                schedules.append(ShutterTransition(d.name, v["shutter"], v["t"], d.keyword == "close"))
                lines[("schedule", d.name)] = d.line
        elif d.keyword == "voltage":
            if claim("object", d):
                schedules.append(VoltageWindow(d.name, v["cell"], v["on"], v["off"]))
                lines[("schedule", d.name)] = d.line

    doc = SceneDoc(
        name=name,
        regions=tuple(regions),
        components=tuple(components),
        passages=tuple(passages),
        routes=tuple(routes),
        amplitudes=tuple(amplitudes),
        schedules=tuple(schedules),
        speed=speed,
        packet_duration=packet,
        meta=meta,
        lines=lines,
    )
    _resolve(doc, decl_of, errors, nlines)
    return doc


def _resolve(doc: SceneDoc, decl_of: dict, errors: list[ParseIssue], nlines: int) -> None:
    region_set = set(doc.regions)
    comps = {c.id: c for c in doc.components}

    def at(namespace: str, name: str, key: str) -> tuple[int, int]:
        d = decl_of[(namespace, name)]
        return d.line, d.columns.get(key, d.columns[""])

    def need_region(namespace: str, name: str, key: str, region: str | None) -> None:
        if region is not None and region not in region_set:
            errors.append(ParseIssue(*at(namespace, name, key), f"unresolved reference: region {region!r}"))

    def need_component(namespace, name, key, cid, kinds=None) -> ComponentSpec | None:
        comp = comps.get(cid)
        if comp is None:
            errors.append(ParseIssue(*at(namespace, name, key), f"unresolved reference: component {cid!r}"))
            return None
        if kinds is not None and comp.kind not in kinds:
            wanted = "/".join(k.value for k in kinds)
            errors.append(ParseIssue(*at(namespace, name, key), f"{cid!r} is a {comp.kind.value}, expected {wanted}"))
            return None
        return comp

    sources = [c for c in doc.components if c.kind is ComponentKind.SOURCE]
    if not sources:
        errors.append(ParseIssue(max(nlines, 1), 1, "missing source declaration"))
    for extra in sources[1:]:
        errors.append(ParseIssue(*at("object", extra.id, ""), "only one source may be declared"))

    for c in doc.components:
        need_region("object", c.id, "region", c.location)
        between = c.params.get("between")
        if between:
            for fid in between:
                need_component("object", c.id, "between", fid, {ComponentKind.FIBER})
        elif c.kind in BOUNDARY_KINDS and c.location is None:
            errors.append(ParseIssue(*at("object", c.id, ""), f"{c.kind.value} {c.id!r} needs region= or between="))
    for p in doc.passages:
        need_region("object", p.id, "a", p.a)
        need_region("object", p.id, "b", p.b)
        if p.via is not None:
            need_component("object", p.id, "via", p.via, BOUNDARY_KINDS)
    for a in doc.amplitudes:
        need_region("object", a.id, "region", a.mode.region)
    for r in doc.routes:
        for cid in r.elements:
            comp = need_component("route", r.path, "via", cid)
            if comp is not None and comp.kind in BOUNDARY_KINDS:
                errors.append(
                    ParseIssue(*at("route", r.path, "via"), f"{cid!r} is placed with between= and must not be listed in a route")
                )
    for s in doc.schedules:
        if isinstance(s, ShutterTransition):
            need_component("object", s.id, "shutter", s.shutter, {ComponentKind.SHUTTER})
        else:
            need_component("object", s.id, "cell", s.cell, {ComponentKind.POCKELS_CELL})


# --------------------------------------------------------------------------
# serializer


def _component_line(c: ComponentSpec) -> str:
    schema = _COMPONENT_KEYS[c.kind]
    parts = [c.kind.value, c.id]
    for key, spec in schema.items():
        value = c.location if key == "region" else c.params.get(key)
        if value is None:
            continue
        parts.append(f"{key}={_ENCODE[spec.kind](value)}")
    return " ".join(parts)


def serialize(doc: SceneDoc) -> str:
    out = [f"scene {doc.name}"]
    if doc.meta:
        out.append("meta " + " ".join(f"{k}={v}" for k, v in doc.meta.items()))
    out += [f"region {r}" for r in doc.regions]
    out += [_component_line(c) for c in doc.components]
    for p in doc.passages:
        out.append(f"passage {p.id} a={p.a} b={p.b}" + (f" via={p.via}" if p.via else ""))
    for a in doc.amplitudes:
        m = a.mode
        out.append(
            f"amplitude {a.id} region={m.region} path={m.path} pol={m.polarization.value} value={_fmt_complex(a.value)}"
        )
    out += [f"route {r.path} via={','.join(r.elements)}" for r in doc.routes]
    for s in doc.schedules:
        if isinstance(s, ShutterTransition):
            out.append(f"{'close' if s.closing else 'open'} {s.id} shutter={s.shutter} t={_fmt_float(s.time)}")
        else:
            out.append(f"voltage {s.id} cell={s.cell} on={_fmt_float(s.on)} off={_fmt_float(s.off)}")
    out.append(f"constants speed={_fmt_float(doc.speed)} packet={_fmt_float(doc.packet_duration)}")
    return "\n".join(out) + "\n"


# --------------------------------------------------------------------------
# semantic validation


@dataclass(frozen=True)
class Issue:
    severity: str  # "error" | "warning"
    message: str
    line: int | None = None

    def __str__(self) -> str:
        where = f"line {self.line}: " if self.line else ""
        return f"{self.severity}: {where}{self.message}"


def errors_only(report: Iterable[Issue]) -> list[Issue]:
    return [i for i in report if i.severity == "error"]


def validate(doc: SceneDoc) -> list[Issue]:
    """Cross-check a parsed scene; returns errors and feasibility warnings."""
    from . import timeline  # timeline depends on this module

    report: list[Issue] = []

    def err(msg, line=None):
        report.append(Issue("error", msg, line))

    comps = {c.id: c for c in doc.components}
    if not doc.speed > 0 or not doc.packet_duration > 0:
        err("propagation speed and packet duration must be positive")
    try:
        doc.source
    except ConfigurationError as exc:
        err(str(exc))
        return report

    for c in doc.components:
        line = doc.line_of("component", c.id)
        if c.kind is ComponentKind.SCREEN:
            s = doc.screen
            if min(s.slit_separation, s.distance, s.wavelength, s.sigma, s.halfwidth) <= 0:
                err(f"screen {c.id!r} needs positive slit, distance, wavelength, sigma and halfwidth", line)
            if s.bins < 2:
                err(f"screen {c.id!r} needs at least 2 bins", line)
        if c.kind is ComponentKind.POCKELS_CELL and c.params.get("response", 0.0) < 0:
            err(f"pockels {c.id!r} response must be non-negative", line)
    if len(doc.components_of(ComponentKind.SCREEN)) > 1:
        err("at most one screen per scene")

    if doc.amplitudes:
        norm = sum(abs(a.value) ** 2 for a in doc.amplitudes)
        if abs(norm - 1.0) > 1e-12:
            err(f"initial amplitudes have squared norm {norm!r}, expected 1")
        if len({a.mode for a in doc.amplitudes}) != len(doc.amplitudes):
            err("two amplitude declarations address the same mode")

    report += _check_routes(doc, comps)
    report += _check_schedules(doc)

    if not errors_only(report):
        try:
            tl = timeline.schedule(doc)
        except ConfigurationError as exc:
            err(str(exc))
        else:
            for v in timeline.validate_timing(tl):
                err(str(v), doc.line_of("component", v.component))
        report += _feasibility(doc)
    return report


def _check_routes(doc: SceneDoc, comps: dict[str, ComponentSpec]) -> list[Issue]:
    report = []
    passages = {}
    for p in doc.passages:
        passages.setdefault(frozenset((p.a, p.b)), []).append(p)
    on_routes: dict[str, list[str]] = {}
    placed: set[str] = set()
    for r in doc.routes:
        line = doc.line_of("route", r.path)
        if len(set(r.elements)) != len(r.elements):
            report.append(Issue("error", f"route {r.path!r} visits an element twice (cyclic geometry)", line))
            continue
        expanded = doc.expanded_route(r)
        for cid in expanded:
            on_routes.setdefault(cid, []).append(r.path)
        first = comps[r.elements[0]]
        if first.kind not in (ComponentKind.SOURCE, ComponentKind.BEAM_SPLITTER):
            report.append(Issue("error", f"route {r.path!r} must start at the source or a beam splitter", line))
        if first.kind is ComponentKind.SOURCE and doc.source.path != r.path:
            report.append(Issue("error", f"route {r.path!r} starts at the source but the source emits on {doc.source.path!r}", line))
        for cid in r.elements[1:]:
            if comps[cid].kind is ComponentKind.SOURCE:
                report.append(Issue("error", f"route {r.path!r} passes through the source", line))
        for cid in expanded:
            if comps[cid].kind in BOUNDARY_KINDS:
                placed.add(cid)
        for cid in r.elements[:-1]:
            if comps[cid].kind in TERMINAL_KINDS:
                report.append(Issue("error", f"route {r.path!r} continues past terminal {cid!r}", line))
        prev_region = None
        for k, cid in enumerate(expanded):
            region = doc.location(cid)
            if prev_region is not None and region != prev_region:
                junction = _junction_at(expanded, k, comps)
                link = passages.get(frozenset((prev_region, region)), [])
                if not link:
                    report.append(Issue("error", f"route {r.path!r} moves {prev_region}->{region} with no passage", line))
                elif not any(p.via == junction for p in link):
                    via = junction or "an open passage"
                    report.append(
                        Issue("error", f"route {r.path!r} crosses {prev_region}->{region} at {via} but no passage matches", line)
                    )
            prev_region = region
    for c in doc.components:
        line = doc.line_of("component", c.id)
        if c.kind is ComponentKind.BEAM_SPLITTER and c.id in on_routes:
            first, second = c.params["paths"]
            if sorted(on_routes[c.id]) != sorted((first, second)):
                report.append(Issue("error", f"beam splitter {c.id!r} must lie on routes {first} and {second}", line))
        if c.kind in BOUNDARY_KINDS and c.params.get("between") and c.id not in placed:
            report.append(Issue("error", f"{c.kind.value} {c.id!r} sits between fibers that are not consecutive in any route", line))
        if c.kind is ComponentKind.PHASE_SHIFTER and c.id in on_routes and len(on_routes[c.id]) != 1:
            report.append(Issue("error", f"phase shifter {c.id!r} must be on exactly one route", line))
    for p in doc.passages:
        if p.a == p.b:
            report.append(Issue("error", f"passage {p.id!r} joins region {p.a!r} to itself", doc.line_of("passage", p.id)))
    return report


def _junction_at(expanded: tuple[str, ...], k: int, comps) -> str | None:
    """Boundary component responsible for a region change at position ``k``."""
    for i in (k, k - 1):
        if i >= 0 and comps[expanded[i]].kind in BOUNDARY_KINDS:
            return expanded[i]
    return None


def _check_schedules(doc: SceneDoc) -> list[Issue]:
    report = []
    for shutter in doc.components_of(ComponentKind.SHUTTER):
        transitions = sorted(doc.shutter_transitions(shutter.id), key=lambda s: (s.time, not s.closing))
        closed = False
        for s in transitions:
            line = doc.line_of("schedule", s.id)
            if s.time < 0:
                report.append(Issue("error", f"{s.id!r} is scheduled at negative time", line))
            if s.closing == closed:
                state = "closed" if closed else "open"
                report.append(Issue("error", f"shutter {shutter.id!r} is already {state} at {s.id!r}", line))
            closed = s.closing
        if closed:
            report.append(
                Issue("error", f"shutter {shutter.id!r} is closed but never reopened", doc.line_of("component", shutter.id))
            )
    for cell in doc.components_of(ComponentKind.POCKELS_CELL):
        try:
            sched = doc.pockels_schedule(cell.id)
        except ConfigurationError as exc:
            report.append(Issue("error", f"pockels {cell.id!r}: {exc}", doc.line_of("component", cell.id)))
            continue
        if any(on < 0 for on, _ in sched.windows):
            report.append(Issue("error", f"pockels {cell.id!r} has a window at negative time", doc.line_of("component", cell.id)))
    return report


def _feasibility(doc: SceneDoc) -> list[Issue]:
    """Warn when two shutters on one route enclose less path than a close/open cycle needs."""
    from .timeline import min_separation

    report = []
    comps = {c.id: c for c in doc.components}
    for r in doc.routes:
        expanded = doc.expanded_route(r)
        shutters = [i for i, cid in enumerate(expanded) if comps[cid].kind is ComponentKind.SHUTTER]
        for i, j in zip(shutters, shutters[1:]):
            first, second = expanded[i], expanded[j]
            length = sum(
                comps[cid].params["length"] for cid in expanded[i + 1 : j] if comps[cid].kind is ComponentKind.FIBER
            )
            response = max(comps[first].params["response"], comps[second].params["response"])
            needed = min_separation(response, doc.speed)
            if length <= needed:
                report.append(
                    Issue(
                        "warning",
                        f"shutters {first} and {second} enclose {length:g} m of path; a contact-free "
                        f"close/open cycle with {response:g} s shutters needs more than {needed:.3g} m "
                        f"({needed!r} m at {doc.speed!r} m/s)",
                        doc.line_of("component", first),
                    )
                )
    return report
