"""Strict sub/supersolution checks, the stable-solution certificate and pulled-back data."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..barriers import ExpBarrier, build_exp_barrier, build_exp_superbarrier
from ..discretization import Field, Grid, gradient_sup, make_grid
from ..geometry import RingGeometry
from ..nonlinearity import Nonlinearity
from ..solvers import elliptic_residual


@dataclass(frozen=True)
class SubSuperReport:
    kind: str
    extremal_residual: float
    location: tuple
    margin: float
    passed: bool


def check_sub_super(v: Field, f: Nonlinearity, kind: str, margin: float = 0.0) -> SubSuperReport:
    """Interior residual r = -Δ_h v + f(v) against a strictness margin.

    A subsolution passes when max r < -margin, a supersolution when
    min r > margin.
    """
    if kind not in ("sub", "super"):
        raise ValueError(f"kind must be 'sub' or 'super', got {kind!r}")
    r = elliptic_residual(v, f)[1:-1]
    if kind == "sub":
        idx = np.unravel_index(np.argmax(r), r.shape)
        ext = float(r[idx])
        ok = ext < -margin
    else:
        idx = np.unravel_index(np.argmin(r), r.shape)
        ext = float(r[idx])
        ok = ext > margin
    return SubSuperReport(kind, ext, (int(idx[0]) + 1, int(idx[1])), float(margin), bool(ok))


def torsion_profile(n: int, Rq: float):
    """Normalised torsion function of the ring 1 < |x| < Rq.

    Returns (q, k): q(r) = w(r)/max w where -Δw = 1, w = 0 on both spheres,
    so that -Δq = k = 1/max w and 0 <= q <= 1.
    """
    if n == 2:
        phi = np.log
        crit = lambda b: math.sqrt(2.0 * b)  # noqa: E731
    else:
        phi = lambda r: r ** (2.0 - n)  # noqa: E731
        crit = lambda b: (-n * b) ** (1.0 / n)  # noqa: E731
    # w = -r^2/(2n) + a + b phi(r)
    A = np.array([[1.0, phi(1.0)], [1.0, phi(Rq)]])
    rhs = np.array([1.0 / (2 * n), Rq * Rq / (2 * n)])
    a, b = np.linalg.solve(A, rhs)
    w = lambda r: -np.asarray(r) ** 2 / (2 * n) + a + b * phi(np.asarray(r))  # noqa: E731
    wmax = float(w(crit(b)))
    return (lambda r: w(r) / wmax), 1.0 / wmax


@dataclass
class StabilityCertificate:
    epsilon: float
    v1: Field
    v2: Field
    q: np.ndarray
    k: float
    sub_residual: float
    super_residual: float
    margin_sub: float
    margin_super: float
    ordered: bool
    passed: bool


def stable_certificate(u: Field, f: Nonlinearity, geom: RingGeometry, epsilon: float) -> StabilityCertificate:
    """v1 = u - eps q and v2 = u + eps q with q the normalised torsion function.

    q is taken on the ring 1 < |x| < R + delta, which contains the shifted
    domain, so q >= 0 on every node.  Margins are measured beyond eps:
    margin_sub = -max r(v1) - eps, margin_super = min r(v2) - eps.
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    qf, k = torsion_profile(geom.n, geom.R2)
    q = np.clip(qf(u.grid.r), 0.0, 1.0)
    v1 = u.copy(u.values - epsilon * q)
    v2 = u.copy(u.values + epsilon * q)
    r1 = float(np.max(elliptic_residual(v1, f)[1:-1]))
    r2 = float(np.min(elliptic_residual(v2, f)[1:-1]))
    uu = u.values
    ordered = bool(np.all(uu - epsilon <= v1.values) and np.all(v1.values <= uu)
                   and np.all(uu <= v2.values) and np.all(v2.values <= uu + epsilon))
    m1, m2 = -r1 - epsilon, r2 - epsilon
    return StabilityCertificate(epsilon, v1, v2, q, k, r1, r2, m1, m2, ordered,
                                bool(ordered and m1 > 0 and m2 > 0))


def smooth_max(a, b, kappa):
    return 0.5 * (a + b + np.sqrt((a - b) ** 2 + kappa * kappa))


def smooth_min(a, b, kappa):
    return 0.5 * (a + b - np.sqrt((a - b) ** 2 + kappa * kappa))


def concentric_grid(like: Grid, R: float) -> Grid:
    """Concentric grid of outer radius R sharing the (beta, theta) nodes of ``like``."""
    geom = RingGeometry(like.geom.n, R, 0.0, "concentric")
    kind = "polar-2d" if like.geom.n == 2 else "axisym-3d"
    return make_grid(geom, kind, like.m_s, like.m_theta)


def build_v0(v1: Field, geom: RingGeometry, target_R: float | None = None) -> Field:
    """Pull a field on the shifted domain back to the concentric ring of radius target_R.

    The ray map from {1 <= |x| <= target_R} onto the shifted domain keeps the
    direction and the chart fraction beta, so on a concentric grid with the
    same (m_s, m_theta) every node lands exactly on a node of v1's grid and
    the pull-back is a nodal copy.  Default target is R - delta.
    """
    R_t = geom.R1 if target_R is None else float(target_R)
    g = v1.grid
    if g.kind not in ("mapped-2d", "polar-2d", "axisym-3d"):
        raise ValueError(f"cannot pull back from a {g.kind} grid")
    if g.geom.R != geom.R or g.geom.delta != geom.delta or g.geom.n != geom.n:
        raise ValueError("v1 is not defined on the given shifted geometry")
    if not 1.0 < R_t:
        raise ValueError(f"target radius must exceed 1, got {R_t}")
    target = concentric_grid(g, R_t)
    return Field(target, v1.values.copy(), v1.g_in, v1.g_out)


def pulled_barrier(grid: Grid, barrier: ExpBarrier, g_in: float, g_out: float) -> Field:
    """Barrier transported along rays: phi0(1 + beta (R - 1)) at every node."""
    R = barrier.R
    rr = 1.0 + grid.beta[:, None] * (R - 1.0) * np.ones((1, grid.m_theta))
    scale = 0.5 * (g_in - g_out)
    vals = g_out + scale * (barrier(rr) + 1.0)
    return Field(grid, vals, g_in, g_out)


@dataclass
class PullbackReport:
    kind: str
    epsilon: float
    K: float
    C1: float
    kappa: float
    certificate: StabilityCertificate
    blended: Field
    pulled: dict = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)
    passed: bool = False


def default_C1(u: Field, geom: RingGeometry) -> float:
    return 1.1 * 4.0 * geom.R / (geom.R - geom.delta) * gradient_sup(u)


def pullback_data(u: Field, f: Nonlinearity, geom: RingGeometry, epsilon: float, kind: str = "sub",
                  C1: float | None = None, targets=None) -> PullbackReport:
    """Blend the certificate with the ray-transported barrier and pull it back.

    sub:   blended = smooth_max(v1 - C1 delta, phi),   phi from the exp subsolution;
    super: blended = smooth_min(v2 + C1 delta, phi),   phi from the exp supersolution.
    Boundary rows are reset to the Dirichlet data, the blend is checked as a
    strict sub/supersolution on the shifted grid, and each pulled-back copy
    is checked on its concentric grid.  ``targets`` maps names to outer radii
    (default: inner ring R - delta for sub, outer ring R + delta for super).
    """
    if kind not in ("sub", "super"):
        raise ValueError(f"kind must be 'sub' or 'super', got {kind!r}")
    cert = stable_certificate(u, f, geom, epsilon)
    C1 = default_C1(u, geom) if C1 is None else float(C1)
    kappa = 1e-3 * epsilon
    d = geom.delta
    if kind == "sub":
        bar = pulled_barrier(u.grid, build_exp_barrier(geom.n, geom.R), u.g_in, u.g_out)
        vals = smooth_max(cert.v1.values - C1 * d, bar.values, kappa)
        targets = {"inner": geom.R1} if targets is None else targets
    else:
        bar = pulled_barrier(u.grid, build_exp_superbarrier(geom.n, geom.R), u.g_in, u.g_out)
        vals = smooth_min(cert.v2.values + C1 * d, bar.values, kappa)
        targets = {"outer": geom.R2} if targets is None else targets
    blended = Field(u.grid, vals, u.g_in, u.g_out).with_boundary()
    rep = PullbackReport(kind, epsilon, epsilon / d if d > 0 else math.inf, C1, kappa, cert, blended)
    res = check_sub_super(blended, f, kind)
    rep.residuals["blended"] = res.extremal_residual
    ok = cert.passed and res.passed
    for name, R_t in targets.items():
        v0 = build_v0(blended, geom, R_t)
        rr = check_sub_super(v0, f, kind)
        rep.pulled[name] = v0
        rep.residuals[name] = rr.extremal_residual
        ok = ok and rr.passed
    rep.passed = bool(ok)
    return rep


def choose_epsilon(u: Field, f: Nonlinearity, geom: RingGeometry, kind: str = "sub",
                   C1: float | None = None, targets=None, K_max: int = 2**16) -> PullbackReport:
    """Smallest eps = K delta, K a power of two, for which every margin is positive."""
    if not geom.delta > 0:
        raise ValueError("eps = K delta needs delta > 0")
    K = 1
    last = None
    while K <= K_max:
        last = pullback_data(u, f, geom, K * geom.delta, kind, C1, targets)
        if last.passed:
            return last
        K *= 2
    return last
