"""From a solved density to fields, boundary inputs, power and error metrics.

Power convention: the time-averaged radiated power is

    P = 1/2 * surface integral of Re[conj(u) * (rho c v)]

with the normal velocity scaled as ``rho c v = (-i / k) du/dn``. This equals
``(1 / 2k) * integral of Im[conj(u) du/dn]``, which is positive and
independent of the enclosing sphere for an outgoing field.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import GeometryViolation
from .geometry import BasisSet, ControlRegion, make_sphere_patch_basis, offset_region
from .greens import (
    Medium,
    ModeTruncation,
    dphi_dn_free,
    farfield_kernel_free,
    mode_eigenvalues,
    mode_shape,
    n_propagating,
    u_infinity_ocean_row,
)
from .propagator import near_field_matrix

logger = logging.getLogger(__name__)

REL_FLOOR = 1e-12
PW_REF = 1e-12


def _patch_diameter(basis: BasisSet) -> float:
    return float(np.sqrt(basis.areas.max()) * np.sqrt(2.0))


def eval_field(density, basis: BasisSet, points, medium: Medium, trunc: ModeTruncation,
               threads: int = 1) -> np.ndarray:
    """Single-layer field of ``density`` at ``points``."""
    pts = np.asarray(points, float).reshape(-1, 3)
    dist = np.linalg.norm(pts - basis.center, axis=-1) - basis.radius
    if dist.size and dist.min() < _patch_diameter(basis):
        logger.warning("evaluation point within %.3g m of the source surface; "
                       "one-point patch quadrature is inaccurate there", dist.min())
    w = np.asarray(density, complex)
    out = np.empty(len(pts), complex)
    # Bounded memory: ocean kernels are built per block of points.
    block = 4096
    for s in range(0, len(pts), block):
        out[s:s + block] = near_field_matrix(pts[s:s + block], basis, medium, trunc, threads) @ w
    return out


def u_infinity_free(density, basis: BasisSet, direction, k: float) -> complex:
    ker = farfield_kernel_free(np.asarray(direction, float), basis.nodes, k)
    return complex(np.sum(ker * basis.weights, axis=-1) @ np.asarray(density, complex))


def u_infinity_ocean(density, basis: BasisSet, theta: float, z: float, medium: Medium,
                     trunc: ModeTruncation) -> complex:
    row = u_infinity_ocean_row(theta, z, basis.nodes, basis.weights, medium, trunc)
    return complex(row @ np.asarray(density, complex))


def _normal_derivative(density, basis, points, normals, medium, trunc, step, threads=1):
    """du/dn at surface points: analytic in free space, central difference in the ocean."""
    w = np.asarray(density, complex)
    if medium.is_ocean:
        up = eval_field(w, basis, points + step * normals, medium, trunc, threads)
        dn = eval_field(w, basis, points - step * normals, medium, trunc, threads)
        return (up - dn) / (2 * step)
    # Gradient in the evaluation point equals the y-gradient with roles swapped.
    ker = dphi_dn_free(basis.nodes[None], points[:, None, None, :], normals[:, None, None, :], medium.k)
    return np.sum(ker * basis.weights[None], axis=-1) @ w


@dataclass
class BoundaryInput:
    points: np.ndarray
    normals: np.ndarray
    pressure: np.ndarray
    velocity: np.ndarray


def boundary_inputs(density, basis: BasisSet, surface: BasisSet, medium: Medium,
                    trunc: ModeTruncation, threads: int = 1) -> BoundaryInput:
    """Pressure and normal velocity on the physical source surface."""
    if surface.radius <= basis.radius:
        raise GeometryViolation("physical surface must enclose the fictitious source")
    pts, nrm = surface.centroids, surface.normals
    p = eval_field(density, basis, pts, medium, trunc, threads)
    dudn = _normal_derivative(density, basis, pts, nrm, medium, trunc, 1e-4 * surface.radius,
                              threads)
    v = (-1j / (medium.rho * medium.c * medium.k)) * dudn
    return BoundaryInput(pts, nrm, p, v)


@dataclass
class PowerReport:
    power: float
    level_db: float
    radius: float
    n_theta: int
    n_phi: int

    def to_dict(self) -> dict:
        return asdict(self)


def level_db(power: float) -> float:
    return float(10.0 * np.log10(power / PW_REF)) if power > 0 else float("-inf")


def sphere_rule(n_theta: int, n_phi: int) -> tuple[np.ndarray, np.ndarray]:
    """Unit directions and weights: Gauss-Legendre in cos(theta), uniform in phi."""
    x, wx = np.polynomial.legendre.leggauss(n_theta)
    th = np.arccos(x)
    ph = 2 * np.pi * np.arange(n_phi) / n_phi
    T, P = np.meshgrid(th, ph, indexing="ij")
    dirs = np.stack([np.sin(T) * np.cos(P), np.sin(T) * np.sin(P), np.cos(T)], -1).reshape(-1, 3)
    wts = np.repeat(wx, n_phi) * (2 * np.pi / n_phi)
    return dirs, wts


def radiated_power(density, basis: BasisSet, medium: Medium, trunc: ModeTruncation,
                   radius: float, n_theta: int = 32, n_phi: int = 64,
                   threads: int = 1) -> PowerReport:
    """Flux of the radiated field through a sphere about the source centre."""
    if min(n_theta, n_phi) < 16:
        raise ValueError("power quadrature needs at least 16 nodes per angle")
    if radius <= basis.radius:
        raise GeometryViolation(f"power sphere radius {radius} does not enclose the source")
    if medium.is_ocean:
        zc = basis.center[2]
        if not (medium.depth < zc - radius and zc + radius < 0):
            raise GeometryViolation(f"power sphere of radius {radius} leaves the ocean layer")
    dirs, wts = sphere_rule(n_theta, n_phi)
    pts = basis.center + radius * dirs
    u = eval_field(density, basis, pts, medium, trunc, threads)
    dudn = _normal_derivative(density, basis, pts, dirs, medium, trunc, 1e-4 * radius, threads)
    p = float(0.5 / medium.k * np.sum(wts * radius**2 * np.imag(np.conj(u) * dudn)))
    return PowerReport(p, level_db(p), float(radius), n_theta, n_phi)


def ocean_modal_power(density, basis: BasisSet, medium: Medium, n_theta: int = 256) -> float:
    """Power carried to infinity by the propagating modes.

    Each mode contributes ``(|h|/4k) * integral |g_p(theta)/phi_p(z)|^2 dtheta``;
    the modal amplitudes use the closed-form azimuthal sum.
    """
    h, k = medium.depth, medium.k
    n = n_propagating(k, h)
    a = mode_eigenvalues(k, h, n).real
    w = np.asarray(density, complex)
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    y = basis.nodes
    total = 0.0
    for p in range(n):
        proj = np.cos(th)[:, None, None] * y[None, ..., 0] + np.sin(th)[:, None, None] * y[None, ..., 1]
        src = basis.weights * mode_shape(p, y[..., 2], h)
        amp = np.sum(src[None] * np.exp(-1j * k * a[p] * proj), axis=-1) @ w
        g = np.sqrt(2 / np.pi) * (0.5 / abs(h)) * amp
        total += float(np.sum(np.abs(g) ** 2)) * 2 * np.pi / n_theta
    return 0.5 / k * (abs(h) / 2) * total


def modal_projection(density, basis: BasisSet, medium: Medium, trunc: ModeTruncation,
                     p: int, r: float, theta: float, n_z: int = 400) -> complex:
    """Modal amplitude read off the forward field on a vertical line at range ``r``.

    Returns ``(2/|h|) * sqrt(k a_p r) * exp(-i k a_p r) * integral u phi_p dz``,
    which tends to ``g_p(theta, z) / phi_p(z)`` for large ``r``.
    """
    h, k = medium.depth, medium.k
    a = mode_eigenvalues(k, h, p + 1)[p].real
    x, wx = np.polynomial.legendre.leggauss(n_z)
    z = 0.5 * h * (1 - x)
    wz = 0.5 * abs(h) * wx
    pts = np.stack([np.full(n_z, r * np.cos(theta)), np.full(n_z, r * np.sin(theta)), z], -1)
    u = eval_field(density, basis, pts, medium, trunc)
    proj = np.sum(wz * u * mode_shape(p, z, h))
    return complex((2 / abs(h)) * np.sqrt(k * a * r) * np.exp(-1j * k * a * r) * proj)


@dataclass
class RegionErrors:
    name: str
    max_rel_error: float | None
    max_abs_null: float | None
    l2_error: float
    n_points: int


@dataclass
class DirectionErrors:
    index: int
    generated: complex
    prescribed: complex
    abs_error: float
    rel_error: float | None


@dataclass
class ErrorReport:
    regions: list[RegionErrors]
    directions: list[DirectionErrors]

    def to_dict(self) -> dict:
        dirs = []
        for d in self.directions:
            e = asdict(d)
            e["generated"] = [d.generated.real, d.generated.imag]
            e["prescribed"] = [d.prescribed.real, d.prescribed.imag]
            dirs.append(e)
        return {"regions": [asdict(r) for r in self.regions], "directions": dirs}


def region_errors(name: str, generated, prescribed) -> RegionErrors:
    g = np.asarray(generated, complex)
    f = np.asarray(prescribed, complex)
    if g.shape != f.shape:
        raise ValueError(f"region {name}: {g.shape} generated vs {f.shape} prescribed")
    mag = np.abs(f)
    rel_mask = mag > REL_FLOOR
    diff = np.abs(g - f)
    rel = float(np.max(diff[rel_mask] / mag[rel_mask])) if rel_mask.any() else None
    null = float(np.max(np.abs(g[~rel_mask]))) if (~rel_mask).any() else None
    return RegionErrors(name, rel, null, float(np.linalg.norm(g - f)), int(g.size))


def error_report(regions: list[tuple[str, np.ndarray, np.ndarray]],
                 directions: list[tuple[complex, complex]]) -> ErrorReport:
    """Metrics per region ``(name, generated, prescribed)`` and per far-field direction."""
    regs = [region_errors(*r) for r in regions]
    dirs = []
    for j, (g, f) in enumerate(directions):
        err = abs(g - f)
        dirs.append(DirectionErrors(j, complex(g), complex(f), float(err),
                                    float(err / abs(f)) if abs(f) > REL_FLOOR else None))
    return ErrorReport(regs, dirs)


def stability_offset_grid(region: ControlRegion, offset_fraction: float) -> ControlRegion:
    return offset_region(region, offset_fraction)


def physical_surface(center, radius: float, n_lat: int, n_lon: int) -> BasisSet:
    return make_sphere_patch_basis(center, radius, n_lat, n_lon)


def write_field_csv(path, points, values, prescribed=None) -> None:
    """Columns x,y,z,re,im,abs and, when prescribed is given, re_f,im_f,rel_err."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        head = ["x", "y", "z", "re", "im", "abs"]
        if prescribed is not None:
            head += ["re_f", "im_f", "rel_err"]
        w.writerow(head)
        for i, (p, u) in enumerate(zip(points, values)):
            row = [*(repr(float(c)) for c in p), repr(float(u.real)), repr(float(u.imag)),
                   repr(float(abs(u)))]
            if prescribed is not None:
                f = prescribed[i]
                rel = abs(u - f) / abs(f) if abs(f) > REL_FLOOR else abs(u)
                row += [repr(float(f.real)), repr(float(f.imag)), repr(float(rel))]
            w.writerow(row)


def write_boundary_csv(path, bi: BoundaryInput) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "x", "y", "z", "nx", "ny", "nz", "re_p", "im_p", "re_v", "im_v"])
        for i in range(len(bi.points)):
            w.writerow([i, *(repr(float(c)) for c in bi.points[i]),
                        *(repr(float(c)) for c in bi.normals[i]),
                        repr(float(bi.pressure[i].real)), repr(float(bi.pressure[i].imag)),
                        repr(float(bi.velocity[i].real)), repr(float(bi.velocity[i].imag))])


def write_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
