"""Parabolic relaxation w_t - Δw + f(w) = 0 and an independent radial Newton solver."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_banded
from scipy.sparse.linalg import splu

from .discretization import Field, Grid, laplacian_matrix, laplacian_values
from .nonlinearity import Nonlinearity


class DivergenceError(RuntimeError):
    pass


class ConvergenceError(RuntimeError):
    pass


def auto_dt(f: Nonlinearity) -> float:
    lip = f.lipschitz
    return 0.1 if lip == 0 else min(0.5 / lip, 0.1)


def _boundary_mask(grid: Grid) -> np.ndarray:
    mask = np.zeros(grid.shape, dtype=bool)
    mask[0, :] = True
    mask[-1, :] = True
    return mask.ravel()


def implicit_operator(grid: Grid, dt: float):
    """LU factors of I - dt Δ_h with identity rows on the boundary."""
    L = laplacian_matrix(grid)
    n = grid.size
    interior = sp.diags((~_boundary_mask(grid)).astype(float))
    M = (sp.identity(n, format="csr") - dt * (interior @ L)).tocsc()
    return splu(M)


def elliptic_residual(u: Field, f: Nonlinearity) -> np.ndarray:
    """Nodal -Δ_h u + f(u); boundary rows are 0."""
    r = -laplacian_values(u.grid, u.values) + f(u.values)
    r[0, :] = 0.0
    r[-1, :] = 0.0
    return r


@dataclass
class EvolutionState:
    field: Field
    time: float
    dt: float
    step_count: int
    wt_norms: list = field(default_factory=list)
    wt_min: list = field(default_factory=list)
    wt_max: list = field(default_factory=list)


def iterate(grid: Grid, f: Nonlinearity, initial: Field, dt: float, lu=None):
    """Generator of IMEX steps (I - dt Δ_h) w+ = w - dt f(w), boundary held fixed.

    The step is solved in increment form, (I - dt Δ_h) dw = dt (Δ_h w - f(w)),
    so solver round-off scales with the update and vanishes at steady state.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    lu = implicit_operator(grid, dt) if lu is None else lu
    w = initial.with_boundary().values.ravel().copy()
    bmask = _boundary_mask(grid)
    while True:
        rhs = dt * (laplacian_values(grid, w).ravel() - np.asarray(f(w)))
        rhs[bmask] = 0.0
        dw = lu.solve(rhs)
        dw[bmask] = 0.0
        w = w + dw
        yield w


def evolve(grid: Grid, f: Nonlinearity, initial: Field, dt="auto", steps: int = 100,
           record: bool = False, lu=None):
    """Run ``steps`` IMEX steps; with record=True also return every iterate."""
    dt = auto_dt(f) if dt == "auto" else float(dt)
    w0 = initial.with_boundary()
    bound = max(float(np.max(np.abs(w0.values))), abs(w0.g_in), abs(w0.g_out), 1.0)
    state = EvolutionState(w0, 0.0, dt, 0)
    prev = w0.values.ravel()
    history = [prev.reshape(grid.shape)] if record else None
    gen = iterate(grid, f, w0, dt, lu)
    for k in range(steps):
        w = next(gen)
        wt = (w - prev) / dt
        state.wt_norms.append(float(np.max(np.abs(wt))))
        state.wt_min.append(float(np.min(wt)))
        state.wt_max.append(float(np.max(wt)))
        if not np.all(np.isfinite(w)) or np.max(np.abs(w)) > 10.0 * bound:
            raise DivergenceError(
                f"step {k + 1}: |w|_inf = {np.max(np.abs(w)):.3g} exceeds 10x initial bound {bound:.3g}")
        if record:
            history.append(w.reshape(grid.shape))
        prev = w
    state.field = w0.copy(prev.reshape(grid.shape).copy())
    state.time = steps * dt
    state.step_count = steps
    return (state, history) if record else state


@dataclass
class SteadyReport:
    field: Field
    residual: float
    steps: int
    monotone: bool
    converged: bool
    wt_norms: list
    wt_min: float
    wt_max: float


def steady_state(grid: Grid, f: Nonlinearity, initial: Field, dt="auto", tol: float = 1e-8,
                 max_steps: int = 1_000_000, raise_on_failure: bool = True) -> SteadyReport:
    """Relax until |w+ - w|_inf/dt < tol and the elliptic residual is below tol(1 + |f(u)|_inf)."""
    dt = auto_dt(f) if dt == "auto" else float(dt)
    w0 = initial.with_boundary()
    bound = max(float(np.max(np.abs(w0.values))), 1.0)
    prev = w0.values.ravel()
    norms = []
    wt_lo, wt_hi = math.inf, -math.inf
    res = math.inf
    converged = False
    gen = iterate(grid, f, w0, dt)
    steps = 0
    for steps in range(1, max_steps + 1):
        w = next(gen)
        wt = (w - prev) / dt
        prev = w
        nrm = float(np.max(np.abs(wt)))
        norms.append(nrm)
        wt_lo = min(wt_lo, float(np.min(wt)))
        wt_hi = max(wt_hi, float(np.max(wt)))
        if not np.all(np.isfinite(w)) or np.max(np.abs(w)) > 10.0 * bound:
            raise DivergenceError(f"step {steps}: iterate left 10x initial bound {bound:.3g}")
        if nrm < tol:
            u = w0.copy(w.reshape(grid.shape).copy())
            fu = np.asarray(f(u.values))
            res = float(np.max(np.abs(elliptic_residual(u, f))))
            if res <= tol * (1.0 + float(np.max(np.abs(fu)))):
                converged = True
                break
    u = w0.copy(prev.reshape(grid.shape).copy())
    if not converged:
        res = float(np.max(np.abs(elliptic_residual(u, f))))
        if raise_on_failure:
            raise ConvergenceError(
                f"no steady state after {steps} steps: |w_t|_inf = {norms[-1]:.3g}, residual = {res:.3g}")
    scale = max(max(norms), 1e-300)
    monotone = bool(wt_lo >= -1e-12 * scale or wt_hi <= 1e-12 * scale)
    return SteadyReport(u, res, steps, monotone, converged, norms, wt_lo, wt_hi)


# Picard slab iteration --------------------------------------------------

@dataclass
class PicardReport:
    T: float
    lambda_p: float
    substeps: int
    slabs: int
    diffs: list
    ratios: list
    max_ratio: float
    converged: bool
    T_tried: list


def default_lambda_p(f: Nonlinearity, n: int, R: float) -> float:
    return 2.0 * max(1.0, -f.inf_fprime) + 2.0 * (n + 2) / R**2


def _picard_slab(lu, grid, f, w_start, bvals, bmask, lam, T, substeps, tol, max_iter):
    """One slab in the variable v = e^{-lam s} w, s = t - t_slab.

    Each sweep solves the linear problem v_t - Δv + g(s, v_prev) = 0 by
    backward Euler, with g(s, v) = lam_eff v + e^{-lam s} f(e^{lam s} v)
    frozen at the previous sweep.  lam_eff = (e^{lam dt} - 1)/dt makes the
    fixed point an implicit Euler step for w, so steady states coincide
    with those of the elliptic problem.
    """
    dt = T / substeps
    lam_eff = math.expm1(lam * dt) / dt
    s = dt * np.arange(1, substeps + 1)
    decay = np.exp(-lam * s)
    v0 = w_start.copy()
    V = np.tile(v0, (substeps, 1))
    diffs = []
    for _ in range(max_iter):
        Vn = np.empty_like(V)
        prev = v0
        for m in range(substeps):
            g = lam_eff * V[m] + decay[m] * np.asarray(f(V[m] / decay[m]))
            rhs = prev - dt * g
            rhs[bmask] = decay[m] * bvals
            prev = lu.solve(rhs)
            prev[bmask] = decay[m] * bvals
            Vn[m] = prev
        d = float(np.sqrt(dt * np.sum((Vn - V) ** 2) / V.shape[1]))
        diffs.append(d)
        V = Vn
        if d < tol:
            return V[-1] / decay[-1], diffs, True
    return V[-1] / decay[-1], diffs, False


def _ratios(diffs):
    return [diffs[k] / diffs[k - 1] for k in range(1, len(diffs)) if diffs[k - 1] > 0]


def picard_slab_solve(grid: Grid, f: Nonlinearity, v0: Field, lambda_p="auto", T="auto",
                      tol: float = 1e-12, substeps: int = 10, max_iter: int = 50,
                      contraction: float = 0.8, steady_tol: float = 1e-9,
                      max_slabs: int = 100_000):
    """Chain Picard-iterated slabs forward until the slab-to-slab change stalls.

    With T="auto" the slab length starts at 0.1 and is halved until the
    first slab contracts with every ratio at most ``contraction``.
    Returns (Field, PicardReport).
    """
    n, R = grid.geom.n, grid.geom.R
    lam = default_lambda_p(f, n, R) if lambda_p == "auto" else float(lambda_p)
    if not lam > max(0.0, -f.inf_fprime):
        raise ValueError(f"lambda_p = {lam} must exceed max(0, -inf f') = {max(0.0, -f.inf_fprime)}")
    w = v0.with_boundary()
    bmask = _boundary_mask(grid)
    w_vec = w.values.ravel().copy()
    bvals = w_vec[bmask].copy()
    tried = []
    if T == "auto":
        T = 0.1
        while True:
            tried.append(T)
            lu = implicit_operator(grid, T / substeps)
            _, diffs, ok = _picard_slab(lu, grid, f, w_vec, bvals, bmask, lam, T,
                                        substeps, tol, max_iter)
            rs = _ratios(_significant(diffs, tol))
            if ok and (not rs or max(rs) <= contraction):
                break
            T /= 2.0
            if T < 1e-6:
                raise ConvergenceError("no slab length down to 1e-6 contracts")
    else:
        T = float(T)
        tried.append(T)
    lu = implicit_operator(grid, T / substeps)
    all_diffs, all_ratios = [], []
    slabs = 0
    converged = False
    while slabs < max_slabs:
        w_new, diffs, ok = _picard_slab(lu, grid, f, w_vec, bvals, bmask, lam, T,
                                        substeps, tol, max_iter)
        if not ok:
            raise ConvergenceError(
                f"slab {slabs}: no contraction after {max_iter} iterations; T = {T} too large")
        slabs += 1
        all_diffs.append(diffs)
        all_ratios.extend(_ratios(_significant(diffs, tol)))
        change = float(np.max(np.abs(w_new - w_vec))) / T
        w_vec = w_new
        if change < steady_tol:
            converged = True
            break
    report = PicardReport(T=T, lambda_p=lam, substeps=substeps, slabs=slabs, diffs=all_diffs,
                          ratios=all_ratios, max_ratio=max(all_ratios) if all_ratios else 0.0,
                          converged=converged, T_tried=tried)
    return w.copy(w_vec.reshape(grid.shape)), report


def _significant(diffs, tol):
    """Differences above the round-off floor, where ratios mean something."""
    floor = max(100.0 * tol, 1e-13)
    return [d for d in diffs if d > floor]


# radial Newton oracle ---------------------------------------------------

@dataclass
class RadialProfile:
    n: int
    r: np.ndarray
    u: np.ndarray
    residual: float
    iterations: int
    converged: bool

    def __call__(self, r):
        return CubicSpline(self.r, self.u)(np.asarray(r, dtype=float))


def _radial_weights(n: int, r: np.ndarray):
    """Harmonic flux weights 1/∫ s^{1-n} ds and control volumes ∫ s^{n-1} ds."""
    a, b = r[:-1], r[1:]
    if n == 2:
        W = np.log(b / a)
    else:
        W = (a ** (2 - n) - b ** (2 - n)) / (n - 2)
    k = 1.0 / W
    mid = 0.5 * (a + b)
    edges = np.concatenate([[r[0]], mid, [r[-1]]])
    V = (edges[1:] ** n - edges[:-1] ** n) / n
    return k, V


def _flux_residual(u, k, V, f):
    F = np.zeros_like(u)
    flux = k * np.diff(u)
    F[1:-1] = flux[1:] - flux[:-1] - V[1:-1] * np.asarray(f(u[1:-1]))
    return F


def radial_bvp_newton(n: int, Rout: float, f: Nonlinearity, m: int = 256, g_in: float = 1.0,
                      g_out: float = -1.0, tol: float = 1e-12, max_iter: int = 100,
                      initial=None) -> RadialProfile:
    """Damped Newton on the finite-volume form of u'' + (n-1)/r u' = f(u).

    The flux weights are exact for radial harmonics, so f = 0 reproduces
    the closed-form profile at the nodes.  The residual is measured in flux
    form (per unit solid angle).  Stagnation returns converged=False.
    """
    if m < 16:
        raise ValueError(f"need m >= 16 nodes, got {m}")
    if not Rout > 1:
        raise ValueError(f"outer radius must exceed 1, got {Rout}")
    r = np.linspace(1.0, Rout, m)
    k, V = _radial_weights(n, r)
    if initial is None:
        u = g_in + (g_out - g_in) * (r - 1.0) / (Rout - 1.0)
    else:
        u = np.asarray(initial(r) if callable(initial) else initial, dtype=float).copy()
    u[0], u[-1] = g_in, g_out
    F = _flux_residual(u, k, V, f)
    res = float(np.max(np.abs(F)))
    it = 0
    while res > tol and it < max_iter:
        it += 1
        ab = np.zeros((3, m - 2))
        ab[0, 1:] = k[1:-1]
        ab[1] = -(k[:-1] + k[1:]) - V[1:-1] * np.asarray(f.fprime(u[1:-1]))
        ab[2, :-1] = k[1:-1]
        du = solve_banded((1, 1), ab, -F[1:-1])
        step = 1.0
        while True:
            trial = u.copy()
            trial[1:-1] += step * du
            Ft = _flux_residual(trial, k, V, f)
            rt = float(np.max(np.abs(Ft)))
            if rt < res or step < 1e-4:
                break
            step /= 2.0
        if rt >= res:
            break
        u, F, res = trial, Ft, rt
    return RadialProfile(n, r, u, res, it, res <= tol)
