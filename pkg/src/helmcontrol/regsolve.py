"""Tikhonov regularization with the discrepancy-principle choice of alpha.

``tikhonov_solve`` returns ``(alpha I + A^H A)^{-1} A^H b``. The default
route factors the stacked matrix ``[A; sqrt(alpha) I] = Q R``; ``R`` is the
Cholesky factor of ``alpha I + A^H A``, but because the normal matrix is
never formed the solve loses accuracy like ``cond(R)`` rather than
``cond(R)**2``. The explicit Cholesky route is kept for comparison.

``svd_solve`` applies the filter factors ``s / (s^2 + alpha)`` to a full
SVD and serves as the independent oracle.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import NumericalFailure

logger = logging.getLogger(__name__)

FLAG_ABOVE = "target-above-data-norm"
FLAG_BELOW = "target-below-attainable"
FLAG_MAXITER = "max-iterations"
FLAG_ZERO = "zero-data"


@dataclass
class DensitySolution:
    w: np.ndarray
    alpha: float
    residual_norm: float
    solution_norm: float
    iterations: int = 0
    method: str = "normal-equations"
    delta: float | None = None
    flags: list[str] = field(default_factory=list)

    def diagnostics(self) -> dict:
        d = asdict(self)
        d.pop("w")
        return d


class SVD(NamedTuple):
    U: np.ndarray
    s: np.ndarray
    Vh: np.ndarray


def _check_finite(A, b) -> None:
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
        raise NumericalFailure("non-finite entries in the linear system")


def svd_factor(A: np.ndarray) -> SVD:
    _check_finite(A, np.zeros(1))
    U, s, Vh = np.linalg.svd(A, full_matrices=False)
    return SVD(U, s, Vh)


def _solution(A, b, w, alpha, method, **kw) -> DensitySolution:
    return DensitySolution(w, float(alpha), float(np.linalg.norm(A @ w - b)),
                           float(np.linalg.norm(w)), method=method, **kw)


def tikhonov_solve(A: np.ndarray, b: np.ndarray, alpha: float, method: str = "qr") -> DensitySolution:
    """Regularized normal-equation solution for ``alpha > 0``."""
    A = np.asarray(A, complex)
    b = np.asarray(b, complex)
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    _check_finite(A, b)
    n = A.shape[1]
    if not np.any(b):
        return _solution(A, b, np.zeros(n, complex), alpha, "normal-equations")
    if method == "qr":
        stacked = np.vstack([A, np.sqrt(alpha) * np.eye(n)])
        Q, R = np.linalg.qr(stacked)
        rhs = Q[: A.shape[0]].conj().T @ b
        w = scipy.linalg.solve_triangular(R, rhs)
    elif method == "cholesky":
        M = A.conj().T @ A + alpha * np.eye(n)
        try:
            c = scipy.linalg.cho_factor(M)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure(f"Cholesky factorization failed at alpha={alpha:.3e}") from exc
        w = scipy.linalg.cho_solve(c, A.conj().T @ b)
    else:
        raise ValueError(f"unknown method {method!r}")
    if not np.all(np.isfinite(w)):
        raise NumericalFailure(f"non-finite solution at alpha={alpha:.3e}")
    return _solution(A, b, w, alpha, "normal-equations")


def svd_solve(A: np.ndarray, b: np.ndarray, alpha: float, svd: SVD | None = None) -> DensitySolution:
    """Filter-factor solution; ``alpha = 0`` gives the pseudo-inverse solution."""
    A = np.asarray(A, complex)
    b = np.asarray(b, complex)
    if alpha < 0:
        raise ValueError(f"alpha must be non-negative, got {alpha}")
    _check_finite(A, b)
    U, s, Vh = svd if svd is not None else svd_factor(A)
    if alpha == 0:
        f = np.where(s > 0, 1.0 / np.where(s > 0, s, 1.0), 0.0)
    else:
        f = s / (s * s + alpha)
    w = Vh.conj().T @ (f * (U.conj().T @ b))
    return _solution(A, b, w, alpha, "svd")


def discrepancy(svd: SVD, b: np.ndarray, alpha: float) -> float:
    """||A w_alpha - b|| from the SVD, including the part of b outside range(U)."""
    beta = svd.U.conj().T @ b
    outside = max(float(np.vdot(b, b).real - np.vdot(beta, beta).real), 0.0)
    s2 = svd.s**2
    inside = np.abs(alpha / (s2 + alpha) * beta) ** 2
    return float(np.sqrt(outside + inside.sum()))


def morozov_search(A: np.ndarray, b: np.ndarray, delta: float, tol_rel: float = 0.05,
                   bracket: tuple[float, float] = (1e-16, 1e4), method: str = "qr",
                   svd: SVD | None = None, max_iter: int = 200) -> DensitySolution:
    """Choose alpha so that ||A w_alpha - b|| = delta within ``tol_rel * delta``.

    The search bisects log10(alpha) over ``bracket * sigma_max**2``; the
    residual is evaluated through the SVD and is non-decreasing in alpha.
    The final density comes from ``tikhonov_solve`` (or ``svd_solve`` when
    ``method == "svd"``) at the selected alpha.
    """
    A = np.asarray(A, complex)
    b = np.asarray(b, complex)
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    _check_finite(A, b)
    svd = svd if svd is not None else svd_factor(A)
    smax2 = float(svd.s[0] ** 2) if svd.s.size and svd.s[0] > 0 else 1.0
    lo, hi = np.log10(bracket[0] * smax2), np.log10(bracket[1] * smax2)
    bnorm = float(np.linalg.norm(b))

    def finish(alpha, iterations, flags):
        if method == "svd":
            sol = svd_solve(A, b, alpha, svd)
        else:
            sol = tikhonov_solve(A, b, alpha, method)
        sol.iterations, sol.delta, sol.flags = iterations, float(delta), flags
        return sol

    if bnorm == 0:
        return finish(10**lo, 0, [FLAG_ZERO])
    if delta >= bnorm:
        return finish(10**hi, 0, [FLAG_ABOVE])
    if discrepancy(svd, b, 10**lo) > delta * (1 + tol_rel):
        logger.warning("discrepancy target %.3e below attainable residual at the lower bracket", delta)
        return finish(10**lo, 0, [FLAG_BELOW])

    flags = [FLAG_MAXITER]
    for it in range(1, max_iter + 1):
        mid = 0.5 * (lo + hi)
        r = discrepancy(svd, b, 10**mid)
        if abs(r - delta) <= tol_rel * delta:
            flags = []
            break
        if r > delta:
            hi = mid
        else:
            lo = mid
    return finish(10**mid, it, flags)


def write_density_csv(path, w: np.ndarray) -> None:
    with Path(path).open("w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["patch", "re", "im"])
        for i, v in enumerate(w):
            out.writerow([i, repr(float(v.real)), repr(float(v.imag))])


def read_density_csv(path) -> np.ndarray:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 1] + 1j * data[:, 2]


def write_diagnostics(path, sol: DensitySolution, extra: dict | None = None) -> None:
    d = sol.diagnostics()
    d.update(extra or {})
    Path(path).write_text(json.dumps(d, indent=2, sort_keys=True) + "\n")
