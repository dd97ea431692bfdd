"""Scenario description, TOML loading and validation.

A scenario file is flat TOML with SI units. Complex numbers are written as
``[re, im]`` pairs. See ``configs/*.toml`` for complete examples.
"""

from __future__ import annotations

import hashlib
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError, GeometryViolation
from .geometry import (
    BasisSet,
    ControlRegion,
    FarFieldTarget,
    SectorBounds,
    SourceGeometry,
    cartesian_to_spherical,
    check_clear_of_ball,
    check_distinct_targets,
    check_ocean_target,
    free_direction,
    make_annular_sector_grid,
    make_sphere_patch_basis,
)
from .greens import Medium, ModeTruncation

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

BUNDLED = ("freespace_null", "freespace_plane", "ocean_null", "ocean_plane", "ocean_two_controls")


@dataclass(frozen=True)
class Prescription:
    kind: str = "null"  # null | plane_wave | grid_file
    direction: tuple[float, float, float] = (1.0, 0.0, 0.0)
    wavenumber: float = 0.0
    amplitude: complex = 1.0
    path: Path | None = None


@dataclass(frozen=True)
class RegionSpec:
    name: str
    bounds: SectorBounds
    counts: tuple[int, int, int]
    prescription: Prescription
    weight: float = 1.0


@dataclass(frozen=True)
class SolverSettings:
    epsilon_rel: float = 1e-3
    tol_rel: float = 0.05
    alpha_bracket: tuple[float, float] = (1e-16, 1e4)
    farfield_weight: float = 1.0
    method: str = "qr"


@dataclass(frozen=True)
class OutputSettings:
    directory: str = "out"
    patch_half_width: float = 0.1
    patch_n: int = 11
    power_radius: float = 0.05
    power_n_theta: int = 32
    power_n_phi: int = 64
    offset_fraction: float = 0.5


@dataclass(frozen=True)
class Scenario:
    name: str
    medium: Medium
    source: SourceGeometry
    n_lat: int
    n_lon: int
    quadrature: str
    regions: tuple[RegionSpec, ...]
    farfield: tuple[FarFieldTarget, ...]
    solver: SolverSettings = field(default_factory=SolverSettings)
    truncation: ModeTruncation = field(default_factory=ModeTruncation)
    outputs: OutputSettings = field(default_factory=OutputSettings)
    source_text: str = ""

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.source_text.encode()).hexdigest()

    def basis(self) -> BasisSet:
        return make_sphere_patch_basis(self.source.center, self.source.fictitious_radius,
                                       self.n_lat, self.n_lon, self.quadrature)

    def build_regions(self, offset_fraction: float = 0.0) -> list[ControlRegion]:
        out = []
        for spec in self.regions:
            reg = make_annular_sector_grid(spec.name, self.source.center, spec.bounds, spec.counts,
                                           self.source, offset_fraction)
            reg.prescribed = prescribed_values(spec.prescription, reg.points)
            out.append(reg)
        return out


def prescribed_values(pres: Prescription, points: np.ndarray) -> np.ndarray:
    if pres.kind == "null":
        return np.zeros(len(points), complex)
    if pres.kind == "plane_wave":
        d = np.asarray(pres.direction, float)
        return pres.amplitude * np.exp(1j * pres.wavenumber * (points @ d))
    if pres.kind == "grid_file":
        data = np.loadtxt(pres.path, delimiter=",", ndmin=2)
        if data.shape != (len(points), 2):
            raise ConfigError(
                f"prescription file {pres.path} must hold {len(points)} rows of re,im; "
                f"found shape {data.shape}")
        return data[:, 0] + 1j * data[:, 1]
    raise ConfigError(f"unknown prescription kind {pres.kind!r}")


def _complex(v, where: str) -> complex:
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, list) and len(v) == 2 and all(isinstance(t, (int, float)) for t in v):
        return complex(v[0], v[1])
    raise ConfigError(f"{where}: complex values are written as [re, im], got {v!r}")


def _get(table: dict, key: str, where: str, default=None, required=False):
    if key not in table:
        if required:
            raise ConfigError(f"{where}.{key} is required")
        return default
    return table[key]


def _pair(v, where: str) -> tuple[float, float]:
    if not (isinstance(v, list) and len(v) == 2):
        raise ConfigError(f"{where} must be a [lo, hi] pair, got {v!r}")
    return float(v[0]), float(v[1])


def _known(table: dict, keys: set[str], where: str) -> None:
    extra = set(table) - keys
    if extra:
        raise ConfigError(f"{where}: unknown key(s) {sorted(extra)}")


def parse_scenario(text: str, base_dir: Path | None = None, name: str = "scenario") -> Scenario:
    """Parse and validate a scenario; raises ConfigError or GeometryViolation."""
    try:
        cfg = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"TOML syntax: {exc}") from exc
    base_dir = base_dir or Path.cwd()
    _known(cfg, {"name", "medium", "source", "regions", "farfield", "solver", "truncation",
                 "outputs"}, "top level")

    med = _get(cfg, "medium", "top level", required=True)
    _known(med, {"kind", "k", "depth", "rho", "c"}, "medium")
    try:
        medium = Medium(
            kind=str(_get(med, "kind", "medium", required=True)),
            k=float(_get(med, "k", "medium", required=True)),
            depth=None if "depth" not in med else float(med["depth"]),
            rho=float(_get(med, "rho", "medium", 1000.0)),
            c=float(_get(med, "c", "medium", 1500.0)),
        )
    except ValueError as exc:
        raise ConfigError(f"medium: {exc}") from exc

    src = _get(cfg, "source", "top level", required=True)
    _known(src, {"center", "fictitious_radius", "physical_radius", "n_lat", "n_lon",
                 "quadrature"}, "source")
    center = tuple(float(v) for v in _get(src, "center", "source", [0.0, 0.0, 0.0]))
    if len(center) != 3:
        raise ConfigError("source.center must have three coordinates")
    source = SourceGeometry(center, float(_get(src, "fictitious_radius", "source", required=True)),
                            float(_get(src, "physical_radius", "source", required=True)))
    n_lat = int(_get(src, "n_lat", "source", 13))
    n_lon = int(_get(src, "n_lon", "source", 18))
    if n_lat < 1 or n_lon < 1:
        raise ConfigError(f"source.n_lat and source.n_lon must be >= 1, got {n_lat}, {n_lon}")
    quadrature = str(_get(src, "quadrature", "source", "centroid"))
    if quadrature not in ("centroid", "gauss2"):
        raise ConfigError(f"source.quadrature must be centroid or gauss2, got {quadrature!r}")
    if medium.is_ocean:
        top = center[2] + source.physical_radius
        bottom = center[2] - source.physical_radius
        if not (medium.depth < bottom and top < 0):
            raise GeometryViolation("source ball must lie strictly inside the ocean layer")

    regions = []
    for i, reg in enumerate(_get(cfg, "regions", "top level", [])):
        where = f"regions[{i}]"
        _known(reg, {"name", "r", "theta", "phi", "counts", "prescription", "weight"}, where)
        try:
            bounds = SectorBounds(_pair(_get(reg, "r", where, required=True), f"{where}.r"),
                                  _pair(_get(reg, "theta", where, required=True), f"{where}.theta"),
                                  _pair(_get(reg, "phi", where, required=True), f"{where}.phi"))
        except ValueError as exc:
            raise ConfigError(f"{where}: {exc}") from exc
        counts = tuple(int(c) for c in _get(reg, "counts", where, required=True))
        if len(counts) != 3 or min(counts) < 1:
            raise ConfigError(f"{where}.counts must be three positive integers, got {counts}")
        pres_t = _get(reg, "prescription", where, {"kind": "null"})
        _known(pres_t, {"kind", "direction", "wavenumber", "amplitude", "path"},
               f"{where}.prescription")
        kind = str(_get(pres_t, "kind", f"{where}.prescription", "null"))
        if kind == "plane_wave":
            d = tuple(float(v) for v in _get(pres_t, "direction", f"{where}.prescription",
                                             required=True))
            try:
                free_direction(d)
            except ValueError as exc:
                raise ConfigError(f"{where}.prescription.direction: {exc}") from exc
            pres = Prescription("plane_wave", d,
                                float(_get(pres_t, "wavenumber", f"{where}.prescription",
                                           medium.k)),
                                _complex(_get(pres_t, "amplitude", f"{where}.prescription", 1.0),
                                         f"{where}.prescription.amplitude"))
        elif kind == "grid_file":
            p = Path(str(_get(pres_t, "path", f"{where}.prescription", required=True)))
            pres = Prescription("grid_file", path=p if p.is_absolute() else base_dir / p)
        elif kind == "null":
            pres = Prescription("null")
        else:
            raise ConfigError(f"{where}.prescription.kind must be null, plane_wave or grid_file")
        weight = float(_get(reg, "weight", where, 1.0))
        if not weight > 0:
            raise ConfigError(f"{where}.weight must be positive, got {weight}")
        regions.append(RegionSpec(str(_get(reg, "name", where, f"W{i + 1}")), bounds, counts,
                                  pres, weight))
    if len({r.name for r in regions}) != len(regions):
        raise ConfigError("region names must be unique")

    targets = []
    for i, ff in enumerate(_get(cfg, "farfield", "top level", [])):
        where = f"farfield[{i}]"
        _known(ff, {"direction", "theta", "z", "value"}, where)
        value = _complex(_get(ff, "value", where, required=True), f"{where}.value")
        if medium.is_ocean:
            theta = float(_get(ff, "theta", where, required=True))
            z = float(_get(ff, "z", where, required=True))
            try:
                check_ocean_target(theta, z, medium.depth)
            except GeometryViolation as exc:
                raise ConfigError(f"{where}.z: {exc}") from exc
            targets.append(FarFieldTarget(value, theta=theta, z=z))
        else:
            d = tuple(float(v) for v in _get(ff, "direction", where, required=True))
            try:
                free_direction(d)
            except ValueError as exc:
                raise ConfigError(f"{where}.direction: {exc}") from exc
            targets.append(FarFieldTarget(value, direction=d))
    try:
        check_distinct_targets(targets)
    except ValueError as exc:
        raise ConfigError(f"farfield: {exc}") from exc

    sol = _get(cfg, "solver", "top level", {})
    _known(sol, {"epsilon_rel", "tol_rel", "alpha_bracket", "farfield_weight", "method"}, "solver")
    solver = SolverSettings(
        epsilon_rel=float(_get(sol, "epsilon_rel", "solver", 1e-3)),
        tol_rel=float(_get(sol, "tol_rel", "solver", 0.05)),
        alpha_bracket=_pair(_get(sol, "alpha_bracket", "solver", [1e-16, 1e4]),
                            "solver.alpha_bracket"),
        farfield_weight=float(_get(sol, "farfield_weight", "solver", 1.0)),
        method=str(_get(sol, "method", "solver", "qr")),
    )
    if not 0 < solver.epsilon_rel < 1:
        raise ConfigError(f"solver.epsilon_rel must lie in (0, 1), got {solver.epsilon_rel}")
    if not 0 < solver.tol_rel < 1:
        raise ConfigError(f"solver.tol_rel must lie in (0, 1), got {solver.tol_rel}")
    lo, hi = solver.alpha_bracket
    if not 0 < lo < hi:
        raise ConfigError(f"solver.alpha_bracket must satisfy 0 < lo < hi, got {lo}, {hi}")
    if not solver.farfield_weight > 0:
        raise ConfigError("solver.farfield_weight must be positive")
    if solver.method not in ("qr", "cholesky", "svd"):
        raise ConfigError(f"solver.method must be qr, cholesky or svd, got {solver.method!r}")

    tr = _get(cfg, "truncation", "top level", {})
    _known(tr, {"p_max", "q_max"}, "truncation")
    try:
        trunc = ModeTruncation(int(_get(tr, "p_max", "truncation", 100)),
                               int(_get(tr, "q_max", "truncation", 100)))
    except ValueError as exc:
        raise ConfigError(f"truncation: {exc}") from exc

    out = _get(cfg, "outputs", "top level", {})
    _known(out, {"directory", "patch_half_width", "patch_n", "power_radius", "power_n_theta",
                 "power_n_phi", "offset_fraction"}, "outputs")
    outputs = OutputSettings(
        directory=str(_get(out, "directory", "outputs", f"out/{cfg.get('name', name)}")),
        patch_half_width=float(_get(out, "patch_half_width", "outputs", 0.1)),
        patch_n=int(_get(out, "patch_n", "outputs", 11)),
        power_radius=float(_get(out, "power_radius", "outputs", 0.05)),
        power_n_theta=int(_get(out, "power_n_theta", "outputs", 32)),
        power_n_phi=int(_get(out, "power_n_phi", "outputs", 64)),
        offset_fraction=float(_get(out, "offset_fraction", "outputs", 0.5)),
    )
    if outputs.patch_n % 2 == 0 or not 0 < outputs.patch_half_width <= np.pi / 4:
        raise ConfigError("outputs.patch_n must be odd and patch_half_width in (0, pi/4]")
    if min(outputs.power_n_theta, outputs.power_n_phi) < 16:
        raise ConfigError("outputs.power_n_theta and power_n_phi must be >= 16")
    if outputs.power_radius <= source.physical_radius:
        raise GeometryViolation("outputs.power_radius must enclose the physical source")
    if medium.is_ocean and not (medium.depth < center[2] - outputs.power_radius
                                and center[2] + outputs.power_radius < 0):
        raise GeometryViolation("outputs.power_radius: power sphere leaves the ocean layer")
    if not 0 < outputs.offset_fraction <= 0.5:
        raise ConfigError("outputs.offset_fraction must lie in (0, 0.5]")

    scen = Scenario(str(cfg.get("name", name)), medium, source, n_lat, n_lon, quadrature,
                    tuple(regions), tuple(targets), solver, trunc, outputs, text)
    validate_geometry(scen)
    return scen


def validate_geometry(scen: Scenario) -> None:
    """Region grids clear of the physical ball, of each other and, in the ocean, of the boundaries."""
    built = scen.build_regions()
    for reg in built:
        check_clear_of_ball(reg.points, scen.source.center, scen.source.physical_radius,
                            f"region {reg.name!r}")
        if scen.medium.is_ocean:
            z = reg.points[:, 2]
            if np.any(z <= scen.medium.depth) or np.any(z >= 0):
                raise GeometryViolation(f"region {reg.name!r} leaves the ocean layer")
    for i, a in enumerate(built):
        for b in built[i + 1:]:
            if np.any(_inside_sector(a.points - b.center, b.bounds)):
                raise GeometryViolation(f"regions {a.name!r} and {b.name!r} overlap")


def _inside_sector(rel: np.ndarray, bounds: SectorBounds) -> np.ndarray:
    r, theta, phi = cartesian_to_spherical(rel)
    lo, hi = bounds.phi
    # Azimuth is periodic; shift into [lo, lo + 2 pi).
    phi = lo + np.mod(phi - lo, 2 * np.pi)
    return ((bounds.r[0] <= r) & (r <= bounds.r[1]) & (bounds.theta[0] <= theta)
            & (theta <= bounds.theta[1]) & (phi <= hi))


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_scenario(text, path.parent, path.stem)


def bundled_path(name: str) -> Path:
    if name not in BUNDLED:
        raise ConfigError(f"unknown bundled scenario {name!r}; choose from {', '.join(BUNDLED)}")
    return Path(str(resources.files("helmcontrol") / "configs" / f"{name}.toml"))


def load_bundled(name: str) -> Scenario:
    return load_scenario(bundled_path(name))
