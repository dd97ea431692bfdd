"""Discrete geometry: source spheres, patch bases, sector grids, far-field directions.

All point sets are stored as ``(n, 3)`` float arrays in meters. Spherical
coordinates use inclination ``theta`` in [0, pi] and azimuth ``phi`` in
[0, 2 pi); cylindrical coordinates are ``(r, theta, z)`` about the z axis.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import GeometryViolation

logger = logging.getLogger(__name__)


def spherical_to_cartesian(r, theta, phi) -> np.ndarray:
    r, theta, phi = np.broadcast_arrays(
        np.asarray(r, float), np.asarray(theta, float), np.asarray(phi, float)
    )
    st = np.sin(theta)
    return np.stack([r * st * np.cos(phi), r * st * np.sin(phi), r * np.cos(theta)], axis=-1)


def cartesian_to_spherical(points) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    p = np.asarray(points, float)
    r = np.linalg.norm(p, axis=-1)
    # atan2 keeps full precision near the poles, where arccos(z/r) does not.
    theta = np.arctan2(np.hypot(p[..., 0], p[..., 1]), p[..., 2])
    phi = np.mod(np.arctan2(p[..., 1], p[..., 0]), 2 * np.pi)
    return r, theta, phi


def cartesian_to_cylindrical(points) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    p = np.asarray(points, float)
    return np.hypot(p[..., 0], p[..., 1]), np.arctan2(p[..., 1], p[..., 0]), p[..., 2]


def cylindrical_to_cartesian(r, theta, z) -> np.ndarray:
    r, theta, z = np.broadcast_arrays(
        np.asarray(r, float), np.asarray(theta, float), np.asarray(z, float)
    )
    return np.stack([r * np.cos(theta), r * np.sin(theta), z], axis=-1)


@dataclass(frozen=True)
class SourceGeometry:
    center: tuple[float, float, float]
    fictitious_radius: float
    physical_radius: float

    def __post_init__(self):
        if not 0 < self.fictitious_radius < self.physical_radius:
            raise GeometryViolation(
                "need 0 < fictitious_radius < physical_radius, got "
                f"{self.fictitious_radius} and {self.physical_radius}"
            )

    @property
    def center_array(self) -> np.ndarray:
        return np.asarray(self.center, float)


@dataclass(frozen=True)
class BasisSet:
    """Piecewise-constant patches on a sphere.

    ``nodes[j]`` and ``weights[j]`` are the quadrature rule on patch ``j``;
    the weights of one patch sum to its area.
    """

    center: np.ndarray
    radius: float
    n_lat: int
    n_lon: int
    centroids: np.ndarray
    normals: np.ndarray
    areas: np.ndarray
    nodes: np.ndarray
    weights: np.ndarray

    def __len__(self) -> int:
        return len(self.areas)


def make_sphere_patch_basis(
    center, radius: float, n_lat: int, n_lon: int, quadrature: str = "centroid"
) -> BasisSet:
    """Partition a sphere into equal-angle latitude bands times longitude slices.

    Parameters
    ----------
    center : array_like, shape (3,)
    radius : float
    n_lat, n_lon : int
        Number of bands in inclination and of slices in azimuth.
    quadrature : {"centroid", "gauss2"}
        One node per patch at the band/slice midpoint, or a 2x2 Gauss rule in
        (cos theta, phi), which is exact for the area element.
    """
    if n_lat < 1 or n_lon < 1:
        raise ValueError(f"patch counts must be >= 1, got {n_lat}x{n_lon}")
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    c = np.asarray(center, float)
    tb = np.linspace(0.0, np.pi, n_lat + 1)
    pb = np.linspace(0.0, 2 * np.pi, n_lon + 1)
    dphi = 2 * np.pi / n_lon
    tmid = 0.5 * (tb[:-1] + tb[1:])
    pmid = 0.5 * (pb[:-1] + pb[1:])
    T, P = np.meshgrid(tmid, pmid, indexing="ij")
    normals = spherical_to_cartesian(1.0, T, P).reshape(-1, 3)
    band = radius**2 * dphi * (np.cos(tb[:-1]) - np.cos(tb[1:]))
    areas = np.repeat(band, n_lon)
    centroids = c + radius * normals

    if quadrature == "centroid":
        nodes = centroids[:, None, :]
        weights = areas[:, None]
    elif quadrature == "gauss2":
        g = np.array([-1.0, 1.0]) / np.sqrt(3.0)
        # Gauss nodes in mu = cos(theta) across each band and phi across each slice.
        mu_lo, mu_hi = np.cos(tb[1:]), np.cos(tb[:-1])
        mu = 0.5 * (mu_lo + mu_hi)[:, None] + 0.5 * (mu_hi - mu_lo)[:, None] * g[None, :]
        ph = pmid[:, None] + 0.5 * dphi * g[None, :]
        th = np.arccos(mu)
        TT = np.broadcast_to(th[:, None, :, None], (n_lat, n_lon, 2, 2))
        PP = np.broadcast_to(ph[None, :, None, :], (n_lat, n_lon, 2, 2))
        nodes = (c + radius * spherical_to_cartesian(1.0, TT, PP)).reshape(-1, 4, 3)
        weights = np.repeat(areas[:, None] / 4.0, 4, axis=1)
    else:
        raise ValueError(f"unknown quadrature {quadrature!r}")

    return BasisSet(c, float(radius), n_lat, n_lon, centroids, normals, areas, nodes, weights)


@dataclass(frozen=True)
class SectorBounds:
    r: tuple[float, float]
    theta: tuple[float, float]
    phi: tuple[float, float]

    def __post_init__(self):
        for name in ("r", "theta", "phi"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"sector bound {name} is reversed: {lo} > {hi}")
        if self.r[0] <= 0:
            raise ValueError(f"sector inner radius must be positive, got {self.r[0]}")


@dataclass
class ControlRegion:
    name: str
    center: np.ndarray
    bounds: SectorBounds
    counts: tuple[int, int, int]
    points: np.ndarray
    prescribed: np.ndarray = field(default=None)
    offset_fraction: float = 0.0

    def __post_init__(self):
        if self.prescribed is None:
            self.prescribed = np.zeros(len(self.points), complex)
        if len(self.prescribed) != len(self.points):
            raise ValueError("prescribed field length does not match the point count")

    def __len__(self) -> int:
        return len(self.points)


def _axis(lo: float, hi: float, n: int, offset: float) -> np.ndarray:
    if n == 1:
        return np.array([0.5 * (lo + hi)])
    if offset == 0.0:
        return np.linspace(lo, hi, n)
    # n nodes spaced evenly with the first and last pulled in by `offset` of a step.
    step = (hi - lo) / (n - 1 + 2 * offset)
    return lo + (np.arange(n) + offset) * step


def sector_points(center, bounds: SectorBounds, counts, offset: float = 0.0) -> np.ndarray:
    n_r, n_t, n_p = counts
    if min(counts) < 1:
        raise ValueError(f"grid counts must be >= 1, got {counts}")
    R, T, P = np.meshgrid(
        _axis(*bounds.r, n_r, offset),
        _axis(*bounds.theta, n_t, offset),
        _axis(*bounds.phi, n_p, offset),
        indexing="ij",
    )
    return np.asarray(center, float) + spherical_to_cartesian(R, T, P).reshape(-1, 3)


def check_clear_of_ball(points: np.ndarray, center, radius: float, what: str) -> None:
    d = np.linalg.norm(np.asarray(points) - np.asarray(center, float), axis=-1)
    bad = np.flatnonzero(d <= radius)
    if bad.size:
        i = int(bad[0])
        raise GeometryViolation(
            f"{what}: {bad.size} point(s) inside the closed source ball of radius {radius}; "
            f"first offender index {i} at distance {d[i]:.6g}"
        )


def _sector_corners(center, bounds: SectorBounds) -> np.ndarray:
    R, T, P = np.meshgrid(bounds.r, bounds.theta, bounds.phi, indexing="ij")
    return np.asarray(center, float) + spherical_to_cartesian(R, T, P).reshape(-1, 3)


def make_annular_sector_grid(
    name: str,
    center,
    bounds: SectorBounds,
    counts: tuple[int, int, int],
    source: SourceGeometry | None = None,
    offset_fraction: float = 0.0,
) -> ControlRegion:
    """Tensor grid over an annular sector, endpoints included unless offset.

    When ``source`` is given the sector must stay clear of the closed
    physical source ball; grid nodes and sector corners are both checked.
    """
    pts = sector_points(center, bounds, counts, offset_fraction)
    if source is not None:
        check_clear_of_ball(pts, source.center, source.physical_radius, f"region {name!r}")
        check_clear_of_ball(
            _sector_corners(center, bounds), source.center, source.physical_radius,
            f"region {name!r} corners",
        )
    return ControlRegion(name, np.asarray(center, float), bounds, tuple(counts), pts,
                         offset_fraction=offset_fraction)


def offset_region(region: ControlRegion, offset_fraction: float) -> ControlRegion:
    """Same sector and counts, nodes shifted inward by a fraction of a step on every axis."""
    if not 0 < offset_fraction < 0.5 + 1e-15:
        raise ValueError(f"offset_fraction must lie in (0, 0.5], got {offset_fraction}")
    pts = sector_points(region.center, region.bounds, region.counts, offset_fraction)
    return ControlRegion(region.name, region.center, region.bounds, region.counts, pts,
                         offset_fraction=offset_fraction)


@dataclass(frozen=True)
class FarFieldTarget:
    """A far-field constraint.

    Free space uses a unit ``direction``; the ocean uses ``(theta, z)`` with
    the depth ``z`` strictly inside the layer.
    """

    value: complex
    direction: tuple[float, float, float] | None = None
    theta: float | None = None
    z: float | None = None

    @property
    def is_ocean(self) -> bool:
        return self.direction is None


def free_direction(vec) -> np.ndarray:
    d = np.asarray(vec, float)
    n = np.linalg.norm(d)
    if abs(n - 1.0) > 1e-12:
        raise ValueError(f"far-field direction must be a unit vector, |d| = {n!r}")
    return d


def check_ocean_target(theta: float, z: float, depth: float) -> None:
    if not depth < z < 0:
        raise GeometryViolation(f"far-field depth z={z} must lie strictly inside ({depth}, 0)")


def check_distinct_targets(targets: list[FarFieldTarget]) -> None:
    keys = []
    for t in targets:
        key = tuple(np.round(t.direction, 12)) if not t.is_ocean else (
            round(float(np.mod(t.theta, 2 * np.pi)), 12), round(float(t.z), 12))
        if key in keys:
            raise ValueError(f"duplicate far-field direction {key}")
        keys.append(key)


def make_farfield_patch(direction, half_width: float, n: int) -> np.ndarray:
    """n x n unit directions on a (theta, phi) grid centred on ``direction``.

    The centre node, index ``(n // 2, n // 2)``, is the input direction.
    The grid is built in a frame whose pole is the target, so it stays
    regular even when the target sits on the z axis.
    """
    if n % 2 == 0 or n < 1:
        raise ValueError(f"patch size must be odd, got {n}")
    if not 0 < half_width <= np.pi / 4:
        raise ValueError(f"half_width must lie in (0, pi/4], got {half_width}")
    d = free_direction(direction)
    helper = np.array([0.0, 0.0, 1.0]) if abs(d[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    e1 = np.cross(helper, d)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(d, e1)
    a = np.linspace(-half_width, half_width, n)
    A, B = np.meshgrid(a, a, indexing="ij")
    # Rotate d by angle A about e2, then by B about the rotated e1 image; exact at A=B=0.
    v = (np.cos(A) * np.cos(B))[..., None] * d + np.sin(A)[..., None] * e1 + (
        np.cos(A) * np.sin(B))[..., None] * e2
    v /= np.linalg.norm(v, axis=-1, keepdims=True)
    v[n // 2, n // 2] = d
    return v.reshape(-1, 3)


def make_ocean_farfield_patch(theta: float, z: float, half_width: float, n: int,
                              depth: float) -> np.ndarray:
    """n x n grid of (theta, z) pairs; depth offsets span ``half_width * |depth|``.

    Depths are clamped into the open layer so every node is a valid target.
    """
    if n % 2 == 0 or n < 1:
        raise ValueError(f"patch size must be odd, got {n}")
    if not 0 < half_width <= np.pi / 4:
        raise ValueError(f"half_width must lie in (0, pi/4], got {half_width}")
    check_ocean_target(theta, z, depth)
    a = np.linspace(-1.0, 1.0, n) * half_width
    th = theta + a
    eps = 1e-9 * abs(depth)
    zz = np.clip(z + a * abs(depth), depth + eps, -eps)
    T, Z = np.meshgrid(th, zz, indexing="ij")
    out = np.stack([T, Z], axis=-1).reshape(-1, 2)
    out[(n * n) // 2] = (theta, z)
    return out


def write_points_csv(path: Path, points: np.ndarray, basis: BasisSet | None = None) -> None:
    """CSV dump ``id,x,y,z`` plus ``area,nx,ny,nz`` columns for basis patches."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        if basis is None:
            w.writerow(["id", "x", "y", "z"])
            for i, p in enumerate(points):
                w.writerow([i, *(repr(float(v)) for v in p)])
        else:
            w.writerow(["id", "x", "y", "z", "area", "nx", "ny", "nz"])
            for i, (p, a, nrm) in enumerate(zip(basis.centroids, basis.areas, basis.normals)):
                w.writerow([i, *(repr(float(v)) for v in p), repr(float(a)),
                            *(repr(float(v)) for v in nrm)])
