"""Kernels for the two media.

Free space uses the outgoing fundamental solution ``exp(ikR) / (4 pi R)``.
The ocean is a homogeneous layer ``h <= z <= 0`` with a pressure-release
surface and a rigid floor; its Green's function is the normal-mode sum

    G(x, y) = (i / 2h) sum_p phi_p(z) phi_p(z') H0(k a_p r)

with ``phi_p(z) = sin((2p+1) pi z / (2h))`` and
``a_p = sqrt(1 - (2p+1)^2 pi^2 / (4 k^2 h^2))``. Evanescent modes take the
root ``a_p = +i |.|`` so their Hankel factor decays in range.

All kernels broadcast over leading axes of point arrays shaped ``(..., 3)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularKernelError
from .specfun import bessel_j_orders, hankel1_0, hankel1_0_imag

FOUR_PI = 4.0 * np.pi


@dataclass(frozen=True)
class Medium:
    kind: str  # "free_space" or "ocean"
    k: float
    depth: float | None = None  # h < 0 for the ocean
    rho: float = 1000.0
    c: float = 1500.0

    def __post_init__(self):
        if self.kind not in ("free_space", "ocean"):
            raise ValueError(f"unknown medium kind {self.kind!r}")
        if not self.k > 0:
            raise ValueError(f"wavenumber must be positive, got {self.k}")
        if not (self.rho > 0 and self.c > 0):
            raise ValueError("rho and c must be positive")
        if self.kind == "ocean" and not (self.depth is not None and self.depth < 0):
            raise ValueError(f"ocean depth coordinate h must be negative, got {self.depth}")

    @property
    def is_ocean(self) -> bool:
        return self.kind == "ocean"


@dataclass(frozen=True)
class ModeTruncation:
    p_max: int = 100
    q_max: int = 100

    def __post_init__(self):
        if self.p_max < 1 or self.q_max < 0:
            raise ValueError(f"bad truncation p_max={self.p_max}, q_max={self.q_max}")


# ---------------------------------------------------------------- free space


def _distance(x, y) -> tuple[np.ndarray, np.ndarray]:
    diff = np.asarray(y, float) - np.asarray(x, float)
    dist = np.linalg.norm(diff, axis=-1)
    if np.any(dist == 0):
        raise SingularKernelError("free-space kernel evaluated at coincident points")
    return diff, dist


def phi_free(x, y, k: float):
    """exp(ik|x-y|) / (4 pi |x-y|)."""
    _, d = _distance(x, y)
    return np.exp(1j * k * d) / (FOUR_PI * d)


def dphi_dn_free(x, y, n_y, k: float):
    """Gradient of phi_free with respect to ``y``, projected on ``n_y``."""
    diff, d = _distance(x, y)
    proj = np.sum(diff * np.asarray(n_y, float), axis=-1) / d
    return np.exp(1j * k * d) / (FOUR_PI * d) * (1j * k - 1.0 / d) * proj


def farfield_kernel_free(xhat, y, k: float):
    """exp(-ik xhat.y) / (4 pi): the free-space far-field pattern kernel."""
    dot = np.sum(np.asarray(xhat, float) * np.asarray(y, float), axis=-1)
    return np.exp(-1j * k * dot) / FOUR_PI


# ---------------------------------------------------------------- ocean modes


def mode_eigenvalues(k: float, depth: float, count: int) -> np.ndarray:
    p = np.arange(count)
    s = 1.0 - ((2 * p + 1) * np.pi / (2.0 * k * depth)) ** 2
    return np.where(s >= 0, np.sqrt(np.abs(s)) + 0j, 1j * np.sqrt(np.abs(s)))


def n_propagating(k: float, depth: float) -> int:
    """Number of modes with a real eigenvalue, i.e. (2p+1) pi / (2|h|) < k."""
    # Largest p with (2p+1) < 2k|h|/pi; ceil handles the exact-cutoff case.
    return int(np.ceil(k * abs(depth) / np.pi - 0.5))


def mode_shape(p, z, depth: float):
    p = np.asarray(p)
    return np.sin((2 * p + 1) * np.pi * np.asarray(z, float) / (2.0 * depth))


def _horizontal(x, y) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    r = np.hypot(x[..., 0] - y[..., 0], x[..., 1] - y[..., 1])
    if np.any(r == 0):
        raise SingularKernelError("ocean Green's function evaluated at zero horizontal range")
    return r, x[..., 2], y[..., 2]


def green_ocean(x, y, medium: Medium, trunc: ModeTruncation):
    """Truncated normal-mode sum over p = 0 .. p_max - 1."""
    r, zx, zy = _horizontal(x, y)
    h, k = medium.depth, medium.k
    a = mode_eigenvalues(k, h, trunc.p_max)
    out = np.zeros(np.broadcast_shapes(r.shape, zx.shape, zy.shape), complex)
    for p in range(trunc.p_max):
        shape = mode_shape(p, zx, h) * mode_shape(p, zy, h)
        if a[p].imag == 0:
            radial = hankel1_0(k * a[p].real * r)
        else:
            radial = hankel1_0_imag(k * a[p].imag * r)
        out += shape * radial
    return (0.5j / h) * out


def _cylindrical(points) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    p = np.asarray(points, float)
    return np.hypot(p[..., 0], p[..., 1]), np.arctan2(p[..., 1], p[..., 0]), p[..., 2]


def ocean_modal_rows(thetas, zs, nodes, weights, medium: Medium, trunc: ModeTruncation,
                     modes=None) -> np.ndarray:
    """Rows ``c[t, p, j]`` with ``g_p(theta_t, z_t) = sum_j c[t, p, j] w_j``.

    The azimuthal series runs over q = 0 .. q_max. ``nodes`` has shape
    ``(n_patches, n_quad, 3)`` and ``weights`` ``(n_patches, n_quad)``;
    ``modes`` defaults to every propagating mode.
    """
    h, k = medium.depth, medium.k
    n_prop = n_propagating(k, h)
    modes = list(range(n_prop)) if modes is None else [int(p) for p in modes]
    for p in modes:
        if not 0 <= p < n_prop:
            raise ValueError(f"mode {p} is not propagating (N_prop = {n_prop})")
    thetas = np.atleast_1d(np.asarray(thetas, float))
    zs = np.atleast_1d(np.asarray(zs, float))
    a = mode_eigenvalues(k, h, n_prop).real
    rr, tt, zz = _cylindrical(nodes)
    q = np.arange(trunc.q_max + 1)
    coef = np.where(q == 0, 1.0, 2.0) * np.exp(-1j * (q + 0.5) * np.pi / 2)
    # cos(q (theta - theta')) = cos(q theta) cos(q theta') + sin(q theta) sin(q theta').
    cq_t, sq_t = np.cos(np.outer(thetas, q)), np.sin(np.outer(thetas, q))
    cq_s, sq_s = np.cos(q[:, None, None] * tt[None]), np.sin(q[:, None, None] * tt[None])
    out = np.empty((len(thetas), len(modes), nodes.shape[0]), complex)
    for i, p in enumerate(modes):
        jq = bessel_j_orders(trunc.q_max, k * a[p] * rr)  # (q, patch, quad)
        src = weights * mode_shape(p, zz, h)
        bc = np.sum(jq * cq_s * src[None], axis=-1)  # (q, patch)
        bs = np.sum(jq * sq_s * src[None], axis=-1)
        series = (cq_t * coef) @ bc + (sq_t * coef) @ bs  # (target, patch)
        out[:, i] = (np.sqrt(2.0 / np.pi) * (0.5j / h) * mode_shape(p, zs, h))[:, None] * series
    return out


def ocean_g_p_row(p: int, theta: float, z: float, nodes, weights, medium: Medium,
                  trunc: ModeTruncation) -> np.ndarray:
    return ocean_modal_rows(theta, z, nodes, weights, medium, trunc, [p])[0, 0]


def ocean_g_p(p: int, theta: float, z: float, density, nodes, weights, medium: Medium,
              trunc: ModeTruncation) -> complex:
    return complex(ocean_g_p_row(p, theta, z, nodes, weights, medium, trunc) @ np.asarray(density))


def u_infinity_ocean_rows(thetas, zs, nodes, weights, medium: Medium,
                          trunc: ModeTruncation) -> np.ndarray:
    """Rows mapping patch coefficients to the modal far-field pattern, one per target."""
    zs = np.atleast_1d(np.asarray(zs, float))
    if np.any((zs <= medium.depth) | (zs >= 0)):
        raise ValueError(f"far-field depths must lie in the open layer ({medium.depth}, 0)")
    return ocean_modal_rows(thetas, zs, nodes, weights, medium, trunc).sum(axis=1)


def u_infinity_ocean_row(theta: float, z: float, nodes, weights, medium: Medium,
                         trunc: ModeTruncation) -> np.ndarray:
    return u_infinity_ocean_rows(theta, z, nodes, weights, medium, trunc)[0]


def u_infinity_ocean(theta: float, z: float, density, nodes, weights, medium: Medium,
                     trunc: ModeTruncation) -> complex:
    return complex(u_infinity_ocean_row(theta, z, nodes, weights, medium, trunc) @ np.asarray(density))
