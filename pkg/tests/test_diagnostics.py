import math
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ringlab.barriers import build_exp_barrier, build_radial_correction, pick_constants
from ringlab.diagnostics import (FreeBoundary, asymmetry, build_v0, check_sub_super,
                                 choose_epsilon, chord_tolerance, fb_distance, fb_hausdorff,
                                 free_boundary, moving_plane_audit, nondegeneracy,
                                 nonuniqueness_demo, stable_certificate, torsion_profile)
from ringlab.diagnostics.certificates import pulled_barrier, smooth_max, smooth_min
from ringlab.discretization import Field, gradient_sup, interpolate, make_grid
from ringlab.geometry import RingGeometry
from ringlab.solvers import steady_state

SQRT2 = math.sqrt(2.0)


def steady(geom, f, m=128, tol=1e-10):
    g = make_grid(geom, None, m, m)
    v0 = pulled_barrier(g, build_exp_barrier(geom.n, geom.R), 1.0, -1.0)
    return steady_state(g, f, v0, tol=tol).field


@pytest.fixture(scope="module")
def harmonic_u(zero):
    return steady(RingGeometry(2, 2.0), zero)


@pytest.fixture(scope="module")
def shifted_u(quad01):
    geom = RingGeometry.shifted(2, 2.0, 0.02)
    return geom, steady(geom, quad01, m=96)


# sub/super checks and certificates ---------------------------------------

def test_barrier_is_strict_subsolution(zero):
    g = make_grid(RingGeometry(2, 2.0), None, 64, 32)
    bar = build_exp_barrier(2, 2.0)
    v = pulled_barrier(g, bar, 1.0, -1.0)
    assert check_sub_super(v, zero, "sub", margin=bar.mu / 2).passed


def test_steady_state_is_neither(harmonic_u, zero):
    assert not check_sub_super(harmonic_u, zero, "sub", 1e-3).passed
    assert not check_sub_super(harmonic_u, zero, "super", 1e-3).passed


@pytest.mark.parametrize("n,R", [(2, 2.0), (2, 3.5), (3, 2.0)])
def test_torsion_profile(n, R):
    q, k = torsion_profile(n, R)
    r = np.linspace(1, R, 2001)
    assert abs(q(1.0)) < 1e-13 and abs(q(R)) < 1e-13
    assert np.max(q(r)) == pytest.approx(1.0, abs=1e-6)
    h = 1e-4
    rr = r[1:-1]
    lap = (q(rr + h) - 2 * q(rr) + q(rr - h)) / h**2 + (n - 1) / rr * (q(rr + h) - q(rr - h)) / (2 * h)
    assert np.max(np.abs(-lap - k)) < 1e-5 * k


def test_certificate_harmonic(harmonic_u, zero):
    cert = stable_certificate(harmonic_u, zero, RingGeometry(2, 2.0), 0.1)
    assert cert.passed and cert.ordered
    assert -cert.sub_residual > 0.05 and cert.super_residual > 0.05
    with pytest.raises(ValueError):
        stable_certificate(harmonic_u, zero, RingGeometry(2, 2.0), 0.0)


def test_certificate_supersolution_residual(harmonic_u, zero):
    cert = stable_certificate(harmonic_u, zero, RingGeometry(2, 2.0), 0.1)
    assert check_sub_super(cert.v2, zero, "super", margin=0.05).passed


def test_certificate_shifted(shifted_u, quad01):
    geom, u = shifted_u
    assert stable_certificate(u, quad01, geom, 0.05).passed


def test_smooth_blends():
    a = np.linspace(-1, 1, 11)
    b = np.zeros(11)
    assert np.all(smooth_max(a, b, 1e-3) >= np.maximum(a, b))
    assert np.all(smooth_max(a, b, 1e-3) <= np.maximum(a, b) + 1e-3 / 2 + 1e-15)
    assert np.all(smooth_min(a, b, 1e-3) <= np.minimum(a, b))


def test_build_v0_identity_and_boundary(harmonic_u, shifted_u):
    v0 = build_v0(harmonic_u, RingGeometry(2, 2.0), 2.0)
    assert np.array_equal(v0.values, harmonic_u.values)
    geom, u = shifted_u
    v = build_v0(u, geom)
    assert np.all(v.values[0] == 1.0) and np.all(v.values[-1] == -1.0)
    assert v.grid.geom.R == geom.R1
    # nodal copy agrees with interpolation at the star-mapped node positions
    from ringlab.geometry import star_map
    P = v.grid.points().reshape(-1, 2)
    inner = (np.linalg.norm(P, axis=1) > 1 + 1e-9) & (np.linalg.norm(P, axis=1) < geom.R1 - 1e-9)
    got = interpolate(u, star_map(P[inner], geom))
    assert np.max(np.abs(got - v.values.ravel()[inner])) < 1e-10


def test_pullback_subsolution(shifted_u, quad01):
    geom, u = shifted_u
    rep = choose_epsilon(u, quad01, geom, "sub")
    assert rep.passed
    v0 = rep.pulled["inner"]
    assert check_sub_super(v0, quad01, "sub").passed
    u1 = steady(RingGeometry(2, geom.R1), quad01, m=96)
    assert np.all(v0.values <= u1.values + 1e-12)


# free boundary -----------------------------------------------------------

def test_harmonic_free_boundary(harmonic_u):
    F = free_boundary(harmonic_u)
    assert np.max(np.abs(F.rho - SQRT2)) <= 2e-3
    assert F.closed and not F.multiple


def test_positive_field_has_empty_boundary():
    g = make_grid(RingGeometry(2, 2.0), None, 16, 16)
    F = free_boundary(Field(g, np.ones(g.shape), 1.0, 1.0))
    assert F.empty
    with pytest.raises(ValueError):
        fb_distance(F, FreeBoundary.circle(1.5, 16))


def test_multiple_crossings_warn():
    g = make_grid(RingGeometry(2, 2.0), None, 64, 16)
    u = Field.radial(g, lambda r: np.cos(3 * np.pi * (r - 1)))
    with pytest.warns(UserWarning):
        F = free_boundary(u)
    assert len(F.multiple) == 16
    assert np.all(F.rho > 1.8)


def test_shifted_free_boundary_variation(shifted_u):
    geom, u = shifted_u
    F = free_boundary(u)
    spread = np.nanmax(F.rho) - np.nanmin(F.rho)
    assert 0 < spread / geom.delta < 5.0


def test_distance_examples():
    F = FreeBoundary.circle(1.3, 128)
    assert fb_distance(F, F) == 0.0
    G = FreeBoundary.circle(1.6, 128)
    tol = chord_tolerance(G)
    assert abs(fb_distance(F, G) - 0.3) <= tol
    S = FreeBoundary.circle(1.3, 256, center=(0.1, 0.0))
    tol = max(chord_tolerance(F), chord_tolerance(S))
    assert abs(fb_hausdorff(F, S) - 0.1) <= tol


@given(st.floats(1.1, 1.9), st.floats(0.0, 0.2), st.floats(0, 2 * np.pi))
@settings(max_examples=30, deadline=None)
def test_shifted_circle_distance(rho, d, phi):
    F = FreeBoundary.circle(rho, 512)
    S = FreeBoundary.circle(rho, 512, center=(d * math.cos(phi), d * math.sin(phi)))
    assert abs(fb_hausdorff(F, S) - d) <= chord_tolerance(S) + 1e-12


def test_asymmetry_examples(harmonic_u):
    g = make_grid(RingGeometry(2, 2.0), None, 32, 32)
    radial = Field.radial(g, lambda r: 2 - r)
    assert asymmetry(radial) == 0.0
    B, T = np.meshgrid(g.beta, g.theta, indexing="ij")
    bumped = radial.copy(radial.values + 0.01 * np.cos(T))
    assert asymmetry(bumped) == pytest.approx(0.02, abs=1e-15)
    assert asymmetry(harmonic_u) <= 1e-3


def test_nondegeneracy_harmonic(harmonic_u):
    nd = nondegeneracy(harmonic_u, free_boundary(harmonic_u))
    target = 2 / (SQRT2 * math.log(2))
    assert abs(nd.C_est - target) <= 0.05 * target
    assert not nd.degenerate


def test_nondegeneracy_synthetic():
    g = make_grid(RingGeometry(2, 2.0), None, 128, 64)
    lin = Field.radial(g, lambda r: 1.5 - r)
    nd = nondegeneracy(lin, free_boundary(lin))
    assert nd.C_est == pytest.approx(1.0, abs=2e-3) and not nd.degenerate
    sq = Field.radial(g, lambda r: np.where(r < 1.5, (1.5 - r) ** 2, -(r - 1.5) ** 2))
    nd2 = nondegeneracy(sq, free_boundary(sq))
    assert nd2.degenerate and nd2.C_est < 0.05
    coarse = make_grid(RingGeometry(2, 2.0), None, 32, 64)
    sqc = Field.radial(coarse, lambda r: np.where(r < 1.5, (1.5 - r) ** 2, -(r - 1.5) ** 2))
    assert nd2.C_est < nondegeneracy(sqc, free_boundary(sqc)).C_est


# moving plane --------------------------------------------------------------

def test_audit_radial_field():
    g = make_grid(RingGeometry(2, 2.0), None, 64, 64)
    u = Field.radial(g, lambda r: 2.0 - r ** 2)
    ser = build_radial_correction(2, 1.0, 1.0, "auto", radius=2.0)
    with pytest.warns(UserWarning, match="below the required"):
        sweep = moving_plane_audit(u, ser, 0.0, tol=0.0)
    assert sweep.passed


def test_audit_harmonic_with_certified_constant(harmonic_u, zero):
    c = pick_constants(zero, 2, 2.0, gradient_sup(harmonic_u))
    sweep = moving_plane_audit(harmonic_u, c.series, c.C)
    assert sweep.passed
    assert sweep.C >= sweep.C_required * (1 - 1e-12)


def test_audit_counterexample():
    g = make_grid(RingGeometry(2, 2.0), None, 64, 64)
    u = Field.radial(g, lambda r: np.cos(2 * np.pi * (r - 1)))
    ser = build_radial_correction(2, 1.0, 1.0, "auto", radius=2.0)
    with pytest.warns(UserWarning):
        sweep = moving_plane_audit(u, ser, 0.0)
    assert not sweep.radial_pass and not sweep.passed


def test_audit_needs_concentric(shifted_u):
    geom, u = shifted_u
    ser = build_radial_correction(2, 1.0, 1.0, "auto", radius=2.0)
    with pytest.raises(ValueError):
        moving_plane_audit(u, ser, 1.0)


# non-uniqueness ----------------------------------------------------------

@pytest.mark.parametrize("n", [2, 3])
def test_nonuniqueness(n):
    rep = nonuniqueness_demo(2.0, 1e-6, n=n, m=512)
    assert rep.passed
    assert rep.residual_u <= 1e-6 and rep.residual_uw <= 1e-6
    assert rep.w_norm == 1.0 and rep.boundary_equal
    assert rep.u[0] == 1.0 and rep.u[-1] == -1.0


def test_nonuniqueness_zero_multiple():
    rep = nonuniqueness_demo(2.0)
    # u + 0 w solves trivially; the residual of u alone is the same quantity
    assert rep.residual_u <= rep.residual_uw


def test_nonuniqueness_eigenvalue_against_bessel():
    # the k = 1 Dirichlet eigenvalue on 1 < r < 2 solves J1(s) Y1(2s) = J1(2s) Y1(s), s = sqrt(lambda)
    from scipy.optimize import brentq
    from scipy.special import j1, y1
    g = lambda s: j1(s) * y1(2 * s) - j1(2 * s) * y1(s)  # noqa: E731
    s = brentq(g, 2.5, 3.5)
    rep = nonuniqueness_demo(2.0, m=1024)
    assert rep.eigenvalue == pytest.approx(s * s, rel=1e-4)
