"""Bessel-family special functions used by the waveguide kernels.

Everything here is vectorized over numpy arrays and built from three
classical ingredients:

* ascending power series for small arguments,
* Miller's downward recurrence normalized with ``J0 + 2 sum J_2k = 1``,
* Hankel's asymptotic expansion for large arguments.

The modified Bessel function ``K0`` needed by evanescent modes uses its
ascending series for small arguments and a trapezoidal rule on the integral
``K0(t) = int_0^inf exp(-t cosh s) ds`` otherwise, which converges
geometrically because the integrand is analytic in a strip.
"""

from __future__ import annotations

import math

import numpy as np

EULER_GAMMA = 0.57721566490153286061

MAX_ORDER = 400

# Regime boundaries for J0/Y0/J1/Y1.
_SERIES_LIMIT = 8.0
_ASYMPTOTIC_LIMIT = 17.0
_SERIES_TERMS = 34
_ASYMPTOTIC_TERMS = 30
_K0_SERIES_LIMIT = 2.0
_K0_NODES = 32

_RESCALE_THRESHOLD = 1e250


def _harmonic(m: int) -> float:
    return float(sum(1.0 / j for j in range(1, m + 1)))


# Ascending-series coefficients in powers of u = x**2 / 4.
_m = np.arange(_SERIES_TERMS)
_FACT = np.array([math.factorial(int(m)) for m in _m], dtype=float)
_HARM = np.array([_harmonic(int(m)) for m in _m])
_SIGN = (-1.0) ** _m
_J0_COEF = _SIGN / _FACT**2
_Y0_COEF = -_SIGN * _HARM / _FACT**2
_J1_COEF = _SIGN / (_FACT * _FACT * (_m + 1))
_HARM1 = np.array([_harmonic(int(m) + 1) for m in _m])
# psi(m+1) + psi(m+2) = H_m + H_{m+1} - 2*gamma; the gamma part is folded into the log term.
_Y1_COEF = _SIGN * (_HARM + _HARM1) / (_FACT * _FACT * (_m + 1))
_I0_COEF = 1.0 / _FACT**2
_K0_COEF = _HARM / _FACT**2


def _horner(coef: np.ndarray, u: np.ndarray) -> np.ndarray:
    out = np.full_like(u, coef[-1])
    for c in coef[-2::-1]:
        out = out * u + c
    return out


def _series_terms(u: np.ndarray) -> int:
    # Smallest M with umax^M / (M!)^2 below 1e-18; the series tail is dominated by that term.
    umax = float(u.max()) if u.size else 0.0
    for m in range(4, _SERIES_TERMS):
        if m * math.log(max(umax, 1e-300)) - 2.0 * math.lgamma(m + 1) < -41.5:
            return m + 1
    return _SERIES_TERMS


def _series_0(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    u = 0.25 * x * x
    n = _series_terms(u)
    j0 = _horner(_J0_COEF[:n], u)
    y0 = (2.0 / np.pi) * ((np.log(0.5 * x) + EULER_GAMMA) * j0 + _horner(_Y0_COEF[:n], u))
    return j0, y0


def _series_01(x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    u = 0.25 * x * x
    lg = np.log(0.5 * x) + EULER_GAMMA
    j0 = _horner(_J0_COEF, u)
    y0 = (2.0 / np.pi) * (lg * j0 + _horner(_Y0_COEF, u))
    half = 0.5 * x
    j1 = half * _horner(_J1_COEF, u)
    y1 = (2.0 / np.pi) * (lg * j1 - 1.0 / x) - (half / np.pi) * _horner(_Y1_COEF, u)
    return j0, y0, j1, y1


def _miller_start(xmax: float, order: int) -> int:
    n = int(max(order, xmax) + 30 + 1.5 * max(xmax, 1.0) ** (1.0 / 3.0) * 10)
    return n + (n % 2)


def _miller(x: np.ndarray, order: int) -> np.ndarray:
    """Return J_0..J_order at each x as an array of shape (order + 1, len(x)).

    x must be strictly positive.
    """
    x = np.asarray(x, dtype=float)
    start = _miller_start(float(x.max()), order)
    out = np.zeros((order + 1,) + x.shape)
    nxt = np.zeros_like(x)
    cur = np.full_like(x, 1e-300)
    norm = np.zeros_like(x)
    for n in range(start, 0, -1):
        prev = (2.0 * n / x) * cur - nxt
        nxt, cur = cur, prev
        # cur now holds the unnormalized J_{n-1}.
        if (n - 1) % 2 == 0 and n - 1 > 0:
            norm += 2.0 * cur
        if n - 1 <= order:
            out[n - 1] = cur
        big = np.abs(cur) > _RESCALE_THRESHOLD
        if big.any():
            scale = np.where(big, 1.0 / _RESCALE_THRESHOLD, 1.0)
            cur *= scale
            nxt *= scale
            norm *= scale
            out[:, big] *= 1.0 / _RESCALE_THRESHOLD
    norm += out[0]
    return out / norm


def _neumann_y01(x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """J0, Y0, J1, Y1 from one Miller sweep plus Neumann's series for Y0."""
    top = _miller_start(float(x.max()), 0)
    jn = _miller(x, top - 2)
    j0, j1 = jn[0], jn[1]
    k = np.arange(1, (top - 2) // 2)
    even = jn[2 * k]
    sgn = ((-1.0) ** k / k)[:, None]
    lg = np.log(0.5 * x) + EULER_GAMMA
    y0 = (2.0 / np.pi) * (lg * j0 - 2.0 * np.sum(sgn * even, axis=0))
    # Differentiate the Neumann series term by term: J_n' = (J_{n-1} - J_{n+1}) / 2.
    deven = 0.5 * (jn[2 * k - 1] - jn[2 * k + 1])
    dy0 = (2.0 / np.pi) * (j0 / x - lg * j1 - 2.0 * np.sum(sgn * deven, axis=0))
    return j0, y0, j1, -dy0


def _asymptotic_hankel(x: np.ndarray, nu: int) -> np.ndarray:
    mu = 4.0 * nu * nu
    term = np.ones_like(x, dtype=complex)
    total = term.copy()
    for kk in range(1, _ASYMPTOTIC_TERMS):
        term = term * (1j * (mu - (2 * kk - 1) ** 2) / (kk * 8.0)) / x
        total += term
    phase = x - (0.5 * nu + 0.25) * np.pi
    return np.sqrt(2.0 / (np.pi * x)) * np.exp(1j * phase) * total


def bessel_01(x) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(J0, Y0, J1, Y1)`` at positive real arguments."""
    x = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(x)) or np.any(x <= 0):
        raise ValueError("bessel_01 requires finite x > 0")
    flat = x.ravel()
    outs = [np.empty_like(flat) for _ in range(4)]
    small = flat <= _SERIES_LIMIT
    large = flat >= _ASYMPTOTIC_LIMIT
    mid = ~(small | large)
    if small.any():
        for o, v in zip(outs, _series_01(flat[small])):
            o[small] = v
    if mid.any():
        for o, v in zip(outs, _neumann_y01(flat[mid])):
            o[mid] = v
    if large.any():
        h0 = _asymptotic_hankel(flat[large], 0)
        h1 = _asymptotic_hankel(flat[large], 1)
        outs[0][large], outs[1][large] = h0.real, h0.imag
        outs[2][large], outs[3][large] = h1.real, h1.imag
    return tuple(o.reshape(x.shape) for o in outs)


def bessel_j_orders(order: int, x) -> np.ndarray:
    """J_0..J_order at each x, shape ``(order + 1,) + x.shape``."""
    if order < 0 or order > MAX_ORDER:
        raise ValueError(f"order must lie in [0, {MAX_ORDER}], got {order}")
    x = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(x)) or np.any(x < 0):
        raise ValueError("bessel_j requires finite x >= 0")
    flat = x.ravel()
    out = np.zeros((order + 1, flat.size))
    zero = flat == 0.0
    out[0, zero] = 1.0
    tiny = (flat > 0) & (flat <= 2.0)
    if tiny.any():
        out[:, tiny] = _ascending_orders(order, flat[tiny])
    rest = flat > 2.0
    if rest.any():
        out[:, rest] = _miller(flat[rest], order)
    return out.reshape((order + 1,) + x.shape)


def _ascending_orders(order: int, x: np.ndarray) -> np.ndarray:
    u = 0.25 * x * x
    half = 0.5 * x
    out = np.empty((order + 1, x.size))
    lead = np.ones_like(x)  # (x/2)^q / q!
    for q in range(order + 1):
        if q > 0:
            lead = lead * half / q
        term = np.ones_like(x)
        total = np.ones_like(x)
        for m in range(1, 40):
            term = term * (-u) / (m * (m + q))
            total += term
            if np.all(np.abs(term) <= 1e-17 * np.abs(total)):
                break
        out[q] = lead * total
    return out


def bessel_j(q: int, x):
    """Bessel function of the first kind, integer order ``q >= 0``.

    Parameters
    ----------
    q : int
        Order, at most ``MAX_ORDER``.
    x : float or array_like
        Non-negative argument.
    """
    if int(q) != q or q < 0:
        raise ValueError(f"order must be a non-negative integer, got {q}")
    x = np.asarray(x, dtype=float)
    out = bessel_j_orders(int(q), x)[int(q)]
    return out if out.ndim else float(out)


def hankel1_0(x):
    """H0^(1)(x) = J0(x) + i Y0(x) for real x > 0."""
    x = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(x)) or np.any(x <= 0):
        raise ValueError("hankel1_0 requires finite x > 0 (branch point at 0)")
    if x.size and float(x.max()) <= _SERIES_LIMIT:
        j0, y0 = _series_0(x)
    else:
        j0, y0, _, _ = bessel_01(x)
    out = j0 + 1j * y0
    return out if out.ndim else complex(out)


def hankel1_1(x):
    """H1^(1)(x); note d/dx H0^(1) = -H1^(1)."""
    x = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(x)) or np.any(x <= 0):
        raise ValueError("hankel1_1 requires finite x > 0")
    _, _, j1, y1 = bessel_01(x)
    out = j1 + 1j * y1
    return out if out.ndim else complex(out)


def bessel_k0(t):
    """Modified Bessel function of the second kind, order zero, for t > 0."""
    t = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(t)) or np.any(t <= 0):
        raise ValueError("bessel_k0 requires finite t > 0")
    flat = t.ravel()
    out = np.empty_like(flat)
    small = flat <= _K0_SERIES_LIMIT
    if small.any():
        ts = flat[small]
        u = 0.25 * ts * ts
        out[small] = -(np.log(0.5 * ts) + EULER_GAMMA) * _horner(_I0_COEF, u) + _horner(_K0_COEF, u)
    big = ~small
    if big.any():
        tb = flat[big][:, None]
        # Truncate where t*(cosh s - 1) reaches 40, i.e. the integrand has fallen below e^-40.
        smax = np.arccosh(1.0 + 40.0 / tb)
        step = smax / _K0_NODES
        s = step * np.arange(_K0_NODES + 1)[None, :]
        vals = np.exp(-tb * (np.cosh(s) - 1.0))
        vals[:, 0] *= 0.5
        out[big] = np.exp(-flat[big]) * step[:, 0] * vals.sum(axis=1)
    out = out.reshape(t.shape)
    return out if out.ndim else float(out)


def hankel1_0_imag(t):
    """H0^(1)(i t) = (2 / (i pi)) K0(t) for t > 0, the evanescent continuation."""
    k0 = bessel_k0(t)
    out = (-2j / np.pi) * np.asarray(k0)
    return out if out.ndim else complex(out)
