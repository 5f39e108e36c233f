import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import j0

from ringlab.barriers import (InadmissibleError, build_exp_barrier, build_exp_superbarrier,
                              build_radial_correction, eval_series, pick_constants)
from ringlab.nonlinearity import make_builtin


def closed_form(n, A, s):
    k = math.sqrt(A)
    if n == 2:
        return j0(k * s)
    return np.sinc(k * s / np.pi)


def test_recurrence_coefficients():
    ser = build_radial_correction(2, 1.0, 1.0, K=2)
    assert ser.coeffs[1] == pytest.approx(-1 / 4, abs=1e-15)
    assert ser.coeffs[2] == pytest.approx(1 / 64, abs=1e-15)
    ser = build_radial_correction(3, 1.0, 1.0, K=1)
    assert ser.coeffs[1] == pytest.approx(-1 / 6, abs=1e-15)


def test_tiny_A_is_constant():
    ser = build_radial_correction(2, 1e-12, 1.0, "auto", radius=4.0)
    s = np.linspace(0, 4, 9)
    assert np.max(np.abs(ser(s) - 1.0)) < 1e-10
    with pytest.raises(ValueError):
        build_radial_correction(2, 0.0, 1.0, "auto", radius=4.0)


@pytest.mark.parametrize("n", [2, 3])
@pytest.mark.parametrize("A", [0.5, 1.0, 2.0])
def test_series_against_bessel(n, A):
    ser = build_radial_correction(n, A, 1.0, "auto", radius=4.0)
    s = np.linspace(0, 4, 401)
    assert np.max(np.abs(ser(s) - closed_form(n, A, s))) <= 1e-10


def test_known_zeros():
    ser = build_radial_correction(2, 1.0, 1.0, "auto", radius=4.0)
    assert abs(ser(2.404825557)) < 1e-8
    ser = build_radial_correction(3, 1.0, 1.0, "auto", radius=4.0)
    assert abs(ser(math.pi)) < 1e-8


def test_origin_values():
    ser = build_radial_correction(3, 1.3, 2.5, "auto", radius=3.0)
    assert ser(0.0) == 2.5
    assert eval_series(ser, 0.0, 1) == 0.0


def test_out_of_range():
    ser = build_radial_correction(2, 1.0, 1.0, "auto", radius=2.0)
    with pytest.raises(ValueError):
        ser(2.5)
    with pytest.raises(ValueError):
        ser(-0.1)


def test_derivatives_against_finite_differences():
    ser = build_radial_correction(2, 1.5, 1.0, "auto", radius=4.0)
    s = np.linspace(0.5, 3.5, 31)
    h = 1e-5
    d1 = (ser(s + h) - ser(s - h)) / (2 * h)
    d2 = (ser(s + h) - 2 * ser(s) + ser(s - h)) / h**2
    assert np.max(np.abs(d1 - ser(s, 1))) < 1e-8
    assert np.max(np.abs(d2 - ser(s, 2))) < 1e-4


@given(st.sampled_from([2, 3]), st.floats(0.1, 3.0), st.floats(0.05, 4.0))
@settings(max_examples=50, deadline=None)
def test_ode_residual(n, A, s):
    ser = build_radial_correction(n, A, 1.0, "auto", radius=4.0)
    res = ser(s, 2) + (n - 1) / s * ser(s, 1) + A * ser(s)
    assert abs(res) <= 1e-8


def test_pick_constants_example():
    c = pick_constants(make_builtin("zero"), 2, 2.0, 1.0, 1.0)
    assert c.window == (0.0, 2.0)
    assert c.A == pytest.approx(1.0)
    assert c.C == pytest.approx(4.0)


def test_pick_constants_inadmissible():
    with pytest.raises(InadmissibleError) as exc:
        pick_constants(make_builtin("quad-exp", 2.0), 2, 4.0, 1.0)
    s = 2 - math.sqrt(2)
    assert exc.value.lower == pytest.approx(2.0 * (2 * s - s * s) * math.exp(-s), abs=1e-10)
    assert exc.value.upper == pytest.approx(0.5)


def test_exp_barrier_example():
    b = build_exp_barrier(2, 2.0, -2.0)
    assert b.A == pytest.approx(2 / (math.exp(-2) - math.exp(-4)), rel=1e-14)
    assert b.B == pytest.approx(1 - b.A * math.exp(-2), rel=1e-14)
    assert abs(b(1.0) - 1.0) <= 1e-12 and abs(b(2.0) + 1.0) <= 1e-12


def test_exp_barrier_lambda_rule():
    with pytest.raises(ValueError):
        build_exp_barrier(3, 2.0, -1.5)
    with pytest.raises(ValueError):
        build_exp_superbarrier(2, 2.0, -1.0)


@pytest.mark.parametrize("n,R,lam", [(2, 2.0, "auto"), (3, 3.0, -2.5), (2, 4.0, -5.0)])
def test_barrier_laplacian_lower_bound(n, R, lam):
    b = build_exp_barrier(n, R, lam)
    assert b.mu > 0
    r = np.linspace(1, R, 1000)
    # radial Laplacian from finite differences of the profile itself
    h = 1e-4
    fd = (b(r + h) - 2 * b(r) + b(r - h)) / h**2 + (n - 1) / r * (b(r + h) - b(r - h)) / (2 * h)
    assert np.max(np.abs(fd - b.laplacian(r))) < 1e-4 * np.max(np.abs(fd))
    assert np.all(-b.laplacian(r) <= -b.mu)


def test_superbarrier_sign():
    b = build_exp_superbarrier(2, 2.0)
    r = np.linspace(1, 2, 500)
    assert b.mu > 0
    assert np.all(-b.laplacian(r) >= b.mu * (1 - 1e-12))
    assert b(1.0) == pytest.approx(1.0, abs=1e-12) and b(2.0) == pytest.approx(-1.0, abs=1e-12)
