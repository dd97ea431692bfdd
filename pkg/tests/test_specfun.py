import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helmcontrol.specfun import (
    MAX_ORDER,
    bessel_01,
    bessel_j,
    bessel_j_orders,
    bessel_k0,
    hankel1_0,
    hankel1_0_imag,
    hankel1_1,
)


def series_j0(x: float) -> float:
    # Independent evaluator: plain ascending series in float, enough terms for x < 4.
    return sum((-1) ** m * (x / 2) ** (2 * m) / math.factorial(m) ** 2 for m in range(40))


def test_j_at_zero():
    assert bessel_j(0, 0.0) == 1.0
    assert bessel_j(3, 0.0) == 0.0


def test_first_zero_of_j0():
    lo, hi = 2.0, 3.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if series_j0(lo) * series_j0(mid) <= 0:
            hi = mid
        else:
            lo = mid
    assert lo == pytest.approx(2.404825557695773, abs=1e-14)
    assert abs(bessel_j(0, 2.404825557695773)) <= 1e-12


def test_hankel_at_one_matches_frozen_series():
    # Frozen from a 30-digit series evaluation of J0(1), Y0(1).
    assert abs(hankel1_0(1.0) - (0.765197686557966551 + 0.088256964215676958j)) < 1e-14


@pytest.mark.parametrize("x", [0.5, 5.0, 50.0])
def test_wronskian(x):
    j0, y0, j1, y1 = bessel_01(x)
    # J0' = -J1, Y0' = -Y1.
    assert abs(j0 * -y1 - -j1 * y0 - 2 / (math.pi * x)) <= 1e-10


@pytest.mark.parametrize("x", [8.0 - 1e-9, 8.0 + 1e-9, 17.0 - 1e-9, 17.0 + 1e-9])
def test_regime_boundaries_continuous(x):
    a = np.array(bessel_01(x))
    b = np.array(bessel_01(x + 2e-9))
    assert np.max(np.abs(a - b)) < 1e-8


def test_leading_asymptotic_at_100():
    x = 100.0
    lead = math.sqrt(2 / (math.pi * x)) * np.exp(1j * (x - math.pi / 4))
    assert abs(hankel1_0(x) - lead) / abs(lead) < 0.01


def test_recurrence():
    xs = np.geomspace(0.5, 100.0, 200)
    j = bessel_j_orders(51, xs)
    for q in range(1, 51):
        lhs = j[q - 1] + j[q + 1]
        rhs = 2 * q / xs * j[q]
        scale = np.maximum(np.abs(lhs), np.abs(rhs))
        big = scale > 1e-250
        assert np.all(np.abs(lhs - rhs)[big] <= 1e-9 * scale[big] + 1e-15)


def test_neumann_sum():
    xs = np.linspace(0.0, 20.0, 401)
    j = bessel_j_orders(150, xs)
    total = j[0] ** 2 + 2 * np.sum(j[1:] ** 2, axis=0)
    assert np.max(np.abs(total - 1)) <= 1e-10


def test_k0_at_one_by_quadrature():
    # Oracle: trapezoid on K0(1) = int_0^inf exp(-cosh s) ds, independent node count and cutoff.
    s = np.linspace(0.0, 6.0, 6001)
    f = np.exp(-np.cosh(s))
    oracle = (f.sum() - 0.5 * (f[0] + f[-1])) * (s[1] - s[0])
    assert oracle == pytest.approx(0.42102443824070833, abs=1e-12)
    assert bessel_k0(1.0) == pytest.approx(oracle, rel=1e-13)
    assert hankel1_0_imag(1.0) == pytest.approx(-2j / math.pi * oracle, rel=1e-13)
    assert abs(hankel1_0_imag(1.0) - -0.2680j) < 1e-4


def test_k0_series_and_integral_branches_agree():
    assert bessel_k0(2.0) == pytest.approx(bessel_k0(2.0 + 1e-12), rel=1e-11)


def test_imag_branch_decays_and_is_negative_imaginary():
    assert abs(hankel1_0_imag(2.0)) < abs(hankel1_0_imag(1.0))
    ts = np.geomspace(1e-3, 300.0, 50)
    h = hankel1_0_imag(ts)
    assert np.all(h.real == 0) and np.all(h.imag < 0)


def test_domain_errors():
    with pytest.raises(ValueError):
        hankel1_0(0.0)
    with pytest.raises(ValueError):
        hankel1_0(-1.0)
    with pytest.raises(ValueError):
        hankel1_0_imag(0.0)
    with pytest.raises(ValueError):
        bessel_j(2, -1.0)
    with pytest.raises(ValueError):
        bessel_j(MAX_ORDER + 1, 1.0)
    with pytest.raises(ValueError):
        bessel_j(1.5, 1.0)


def test_supports_order_120():
    assert MAX_ORDER >= 120
    # J_120(10) is astronomically small but representable; it must be finite and positive.
    v = bessel_j(120, 10.0)
    assert np.isfinite(v) and 0 < v < 1e-100


def test_scalar_in_scalar_out():
    assert isinstance(hankel1_0(2.0), complex)
    assert isinstance(hankel1_1(2.0), complex)
    assert isinstance(bessel_k0(2.0), float)
    assert isinstance(bessel_j(1, 2.0), float)


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=-6.0, max_value=5.0))
def test_finite_over_log_spaced_arguments(log_x):
    x = 10.0**log_x
    assert np.all(np.isfinite(np.array(bessel_01(x))))
    assert np.isfinite(hankel1_0(x))
    assert np.isfinite(hankel1_0_imag(x))
    if x <= 1e3:
        assert np.all(np.isfinite(bessel_j_orders(120, x)))


@settings(max_examples=100, deadline=None)
@given(st.floats(min_value=0.01, max_value=300.0))
def test_j0_sum_rule(x):
    # Orders above x + 100 contribute below 1e-20.
    j = bessel_j_orders(int(x) + 100, x)
    # J0 + 2 sum J_2k = 1 holds for every x.
    assert abs(j[0] + 2 * j[2::2].sum() - 1) < 1e-12


def test_accuracy_against_reference_library():
    special = pytest.importorskip("scipy.special")
    xs = np.concatenate([np.geomspace(1e-5, 1e5, 3000), np.linspace(7.5, 26.0, 2000)])
    assert np.max(np.abs(hankel1_0(xs) - special.hankel1(0, xs))) <= 1e-10
    assert np.max(np.abs(hankel1_1(xs) - special.hankel1(1, xs))) <= 1e-10
    xq = np.linspace(0.0, 1e3, 4001)
    jq = bessel_j_orders(120, xq)
    for q in (0, 1, 7, 50, 120):
        assert np.max(np.abs(jq[q] - special.jv(q, xq))) <= 1e-12
    ts = np.geomspace(1e-4, 600.0, 2000)
    assert np.max(np.abs(bessel_k0(ts) / special.k0(ts) - 1)) <= 1e-12
