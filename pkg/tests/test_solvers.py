import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ringlab.barriers import build_exp_barrier
from ringlab.diagnostics import free_boundary
from ringlab.diagnostics.certificates import pulled_barrier
from ringlab.discretization import Field, make_grid
from ringlab.geometry import RingGeometry
from ringlab.nonlinearity import make_builtin
from ringlab.solvers import (ConvergenceError, DivergenceError, evolve, picard_slab_solve,
                             radial_bvp_newton, steady_state)


def harmonic(n, R):
    if n == 2:
        return lambda r: 1 - 2 * np.log(r) / math.log(R)
    return lambda r: -1 + 2 * (1 / r - 1 / R) / (1 - 1 / R)


def radial_grid(n, R, m=256):
    return make_grid(RingGeometry(n, R), "radial-1d", m, 1)


def barrier_start(grid):
    return pulled_barrier(grid, build_exp_barrier(grid.geom.n, grid.geom.R), 1.0, -1.0)


@pytest.mark.parametrize("n,R", [(2, 2.0), (3, 2.0), (2, 4.0)])
def test_newton_matches_closed_form(n, R, zero):
    prof = radial_bvp_newton(n, R, zero, m=256)
    assert prof.converged
    assert np.max(np.abs(prof.u - harmonic(n, R)(prof.r))) <= 1e-10
    assert prof.u[0] == 1.0 and prof.u[-1] == -1.0


def test_newton_quad_exp_residual(quad01):
    prof = radial_bvp_newton(2, 2.0, quad01, m=256)
    assert prof.converged and prof.residual <= 1e-12


@pytest.mark.parametrize("n", [2, 3])
def test_steady_radial_closed_form(n, zero):
    g = radial_grid(n, 2.0)
    rep = steady_state(g, zero, barrier_start(g))
    assert rep.converged
    assert np.max(np.abs(rep.field.values[:, 0] - harmonic(n, 2.0)(g.r[:, 0]))) <= 5e-4


def test_steady_vs_newton_quad_exp():
    f = make_builtin("quad-exp", 0.3)
    g = radial_grid(2, 2.0)
    rep = steady_state(g, f, barrier_start(g))
    prof = radial_bvp_newton(2, 2.0, f, m=256)
    assert np.max(np.abs(rep.field.values[:, 0] - prof.u)) <= 5e-4


def test_steady_2d_free_boundary(zero):
    g = make_grid(RingGeometry(2, 2.0), None, 128, 128)
    rep = steady_state(g, zero, barrier_start(g))
    F = free_boundary(rep.field)
    assert np.max(np.abs(F.rho - math.sqrt(2))) <= 2e-3


def test_fixed_point_of_flow(zero):
    g = make_grid(RingGeometry(2, 2.0), None, 48, 32)
    u = steady_state(g, zero, barrier_start(g), tol=1e-12).field
    st_ = evolve(g, zero, u, dt=0.1, steps=1000)
    assert np.max(np.abs(st_.field.values - u.values)) <= 1e-8


def test_monotone_from_subsolution(quad01):
    g = make_grid(RingGeometry(2, 2.0), None, 48, 32)
    v0 = barrier_start(g)
    u = steady_state(g, quad01, v0, tol=1e-11).field
    st_, hist = evolve(g, quad01, v0, steps=300, record=True)
    assert min(st_.wt_min) >= -1e-8
    assert max(np.max(h - u.values) for h in hist) <= 1e-8


@given(st.integers(0, 10_000))
@settings(max_examples=8, deadline=None)
def test_comparison_preserves_order(seed):
    rng = np.random.default_rng(seed)
    f = make_builtin("quad-exp", float(rng.uniform(0.05, 0.5)))
    g = make_grid(RingGeometry(2, 2.0), None, 16, 16)
    a = rng.uniform(-1, 1, g.shape)
    b = a + rng.uniform(0, 0.5, g.shape)
    w1 = Field(g, a, 1.0, -1.0)
    w2 = Field(g, b, 1.2, -0.9)
    _, h1 = evolve(g, f, w1, dt=0.05, steps=100, record=True)
    _, h2 = evolve(g, f, w2, dt=0.05, steps=100, record=True)
    assert min(np.min(y - x) for x, y in zip(h1, h2)) >= -1e-10


def test_picard_contracts_and_matches_imex(zero, quad01):
    g = make_grid(RingGeometry(2, 2.0), None, 32, 16)
    for f in (zero, quad01):
        v0 = barrier_start(g)
        u, rep = picard_slab_solve(g, f, v0)
        assert rep.converged and rep.max_ratio <= 0.8
        ref = steady_state(g, f, v0, tol=1e-10).field
        assert np.max(np.abs(u.values - ref.values)) <= 1e-6


def test_picard_halving_does_not_raise_ratio(zero):
    g = make_grid(RingGeometry(2, 2.0), None, 32, 16)
    v0 = barrier_start(g)
    _, a = picard_slab_solve(g, zero, v0, T=0.1, max_slabs=3)
    _, b = picard_slab_solve(g, zero, v0, T=0.05, max_slabs=3)
    assert b.max_ratio <= a.max_ratio * (1 + 1e-9)


def test_picard_rejects_small_lambda(zero):
    g = make_grid(RingGeometry(2, 2.0), None, 16, 16)
    with pytest.raises(ValueError):
        picard_slab_solve(g, zero, barrier_start(g), lambda_p=0.0)


def test_budget_exhaustion(zero):
    g = make_grid(RingGeometry(2, 2.0), None, 32, 32)
    with pytest.raises(ConvergenceError):
        steady_state(g, zero, barrier_start(g), max_steps=5)
    rep = steady_state(g, zero, barrier_start(g), max_steps=5, raise_on_failure=False)
    assert not rep.converged


def test_divergence_detected():
    g = make_grid(RingGeometry(2, 2.0), None, 16, 16)

    def explosive(w):
        return -1e3 * np.asarray(w)
    with pytest.raises(DivergenceError):
        evolve(g, explosive, barrier_start(g), dt=0.1, steps=50)


def test_bad_dt(zero):
    g = make_grid(RingGeometry(2, 2.0), None, 16, 16)
    with pytest.raises(ValueError):
        evolve(g, zero, barrier_start(g), dt=-1.0, steps=2)
