"""Assembly of the moment matrix mapping patch coefficients to constrained values."""

from __future__ import annotations

import logging
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import NumericalFailure
from .geometry import BasisSet, ControlRegion, FarFieldTarget, check_clear_of_ball, free_direction
from .greens import (
    Medium,
    ModeTruncation,
    farfield_kernel_free,
    green_ocean,
    phi_free,
    u_infinity_ocean_rows,
)

logger = logging.getLogger(__name__)

# Fixed chunk so the floating-point result does not depend on the thread count.
ROW_CHUNK = 256

MAGIC = b"HCPM"


def _near_rows(points: np.ndarray, basis: BasisSet, medium: Medium,
               trunc: ModeTruncation) -> np.ndarray:
    x = points[:, None, None, :]
    y = basis.nodes[None, :, :, :]
    if medium.is_ocean:
        ker = green_ocean(x, y, medium, trunc)
    else:
        ker = phi_free(x, y, medium.k)
    return np.sum(ker * basis.weights[None], axis=-1)


def near_field_matrix(points, basis: BasisSet, medium: Medium, trunc: ModeTruncation,
                      threads: int = 1) -> np.ndarray:
    """Single-layer values at ``points`` for unit coefficients on each patch."""
    points = np.asarray(points, float).reshape(-1, 3)
    out = np.empty((len(points), len(basis)), complex)
    starts = range(0, len(points), ROW_CHUNK)

    def work(s):
        out[s:s + ROW_CHUNK] = _near_rows(points[s:s + ROW_CHUNK], basis, medium, trunc)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            list(pool.map(work, starts))
    else:
        for s in starts:
            work(s)
    return out


def far_field_matrix(targets: list[FarFieldTarget], basis: BasisSet, medium: Medium,
                     trunc: ModeTruncation) -> np.ndarray:
    if not targets:
        return np.zeros((0, len(basis)), complex)
    if medium.is_ocean:
        return u_infinity_ocean_rows([t.theta for t in targets], [t.z for t in targets],
                                     basis.nodes, basis.weights, medium, trunc)
    dirs = np.array([free_direction(t.direction) for t in targets])
    ker = farfield_kernel_free(dirs[:, None, None, :], basis.nodes[None], medium.k)
    return np.sum(ker * basis.weights[None], axis=-1)


@dataclass
class PropagatorSystem:
    """Weighted system ``A w ~ b``; rows already multiplied by ``row_weights``."""

    A: np.ndarray
    b: np.ndarray
    row_map: list[tuple[str, int]]
    row_weights: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape

    def unweighted(self) -> tuple[np.ndarray, np.ndarray]:
        return self.A / self.row_weights[:, None], self.b / self.row_weights

    def rows_of(self, block: str) -> np.ndarray:
        return np.array([i for i, (name, _) in enumerate(self.row_map) if name == block], int)


def assemble(regions: list[ControlRegion], targets: list[FarFieldTarget], basis: BasisSet,
             medium: Medium, trunc: ModeTruncation, region_weights: dict[str, float] | None = None,
             farfield_weight: float = 1.0, threads: int = 1) -> PropagatorSystem:
    """Stack near-field rows region by region, then far-field rows."""
    region_weights = region_weights or {}
    blocks, rhs, row_map, weights = [], [], [], []
    for reg in regions:
        check_clear_of_ball(reg.points, basis.center, basis.radius, f"region {reg.name!r}")
        blocks.append(near_field_matrix(reg.points, basis, medium, trunc, threads))
        rhs.append(reg.prescribed)
        row_map += [(reg.name, i) for i in range(len(reg))]
        weights.append(np.full(len(reg), float(region_weights.get(reg.name, 1.0))))
    if targets:
        blocks.append(far_field_matrix(targets, basis, medium, trunc))
        rhs.append(np.array([t.value for t in targets], complex))
        row_map += [("farfield", j) for j in range(len(targets))]
        weights.append(np.full(len(targets), float(farfield_weight)))
    A = np.vstack(blocks)
    b = np.concatenate(rhs).astype(complex)
    w = np.concatenate(weights)
    if np.any(w <= 0):
        raise ValueError("row weights must be positive")
    bad = np.argwhere(~np.isfinite(A))
    if bad.size:
        i, j = bad[0]
        raise NumericalFailure(f"non-finite matrix entry at row {i} ({row_map[i]}), column {j}")
    logger.info("assembled %d x %d system", *A.shape)
    return PropagatorSystem(A * w[:, None], b * w, row_map, w)


def assemble_scenario(scenario, threads: int = 1, offset_fraction: float = 0.0) -> PropagatorSystem:
    return assemble(
        scenario.build_regions(offset_fraction),
        list(scenario.farfield),
        scenario.basis(),
        scenario.medium,
        scenario.truncation,
        {r.name: r.weight for r in scenario.regions},
        scenario.solver.farfield_weight,
        threads,
    )


def condition_report(A: np.ndarray, singular_values: np.ndarray | None = None,
                     rank_threshold: float = 1e-12) -> dict:
    s = np.linalg.svd(A, compute_uv=False) if singular_values is None else singular_values
    rows = np.linalg.norm(A, axis=1)
    cols = np.linalg.norm(A, axis=0)
    return {
        "sigma_max": float(s[0]),
        "sigma_min": float(s[-1]),
        "sigma_ratio": float(s[-1] / s[0]) if s[0] > 0 else 0.0,
        "effective_rank": int(np.sum(s > rank_threshold * s[0])),
        "row_norm_range": [float(rows.min()), float(rows.max())],
        "column_norm_range": [float(cols.min()), float(cols.max())],
    }


def write_system(path, system: PropagatorSystem, flags: int = 0) -> None:
    """Binary dump: "HCPM", u32 rows, u32 cols, u32 flags, then A and b as LE float64 re/im."""
    n_r, n_c = system.A.shape
    with Path(path).open("wb") as fh:
        fh.write(MAGIC + struct.pack("<III", n_r, n_c, flags))
        fh.write(np.ascontiguousarray(system.A, dtype="<c16").tobytes())
        fh.write(np.ascontiguousarray(system.b, dtype="<c16").tobytes())


def read_system(path) -> tuple[np.ndarray, np.ndarray, int]:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise ValueError(f"{path}: bad magic {raw[:4]!r}")
    n_r, n_c, flags = struct.unpack("<III", raw[4:16])
    data = np.frombuffer(raw[16:], dtype="<c16")
    if data.size != n_r * n_c + n_r:
        raise ValueError(f"{path}: payload size {data.size} does not match {n_r}x{n_c}")
    return data[: n_r * n_c].reshape(n_r, n_c).copy(), data[n_r * n_c:].copy(), flags
