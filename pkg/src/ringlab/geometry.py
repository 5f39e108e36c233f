"""Shifted rings and their ray maps.

The outer sphere is |x - Z| = R with Z = -delta e1 and the inner one is the
unit sphere.  Along the ray through x (direction e = x/|x|) the outer sphere
sits at radius

    t = sigma(x) = sqrt(delta^2 mu^2 + R^2 - delta^2) - delta mu,   mu = x1/|x|.

The shifted chart coordinate beta = (|x| - 1)/(t - 1) runs from 0 on the
inner sphere to 1 on the outer one.  All derivative formulas below are
closed forms; tests compare them against centered differences.

Arrays of points have shape (..., n).  Derivative bundles put the
differentiation index last: ``grad[..., i]`` is d/dx_i and ``second[..., i]``
is d^2/dx_i^2 (the Laplacian is the sum over i).  For vector quantities
``jac[..., k, i]`` is d(component k)/dx_i.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

MODES = ("concentric", "shifted-2d", "shifted-axisym-3d")


@dataclass(frozen=True)
class RingGeometry:
    n: int
    R: float
    delta: float = 0.0
    mode: str = "concentric"

    def __post_init__(self):
        if self.n not in (2, 3):
            raise ValueError(f"dimension n must be 2 or 3, got {self.n}")
        if not self.R > 1:
            raise ValueError(f"outer radius R must exceed 1, got {self.R}")
        if self.mode not in MODES:
            raise ValueError(f"unknown geometry mode {self.mode!r}")
        if not 0 <= self.delta < (self.R - 1) / 2:
            raise ValueError(
                f"shift delta = {self.delta} outside [0, (R-1)/2) = [0, {(self.R - 1) / 2})"
            )
        if self.mode == "concentric" and self.delta != 0:
            raise ValueError("concentric mode requires delta = 0")
        if self.mode == "shifted-2d" and self.n != 2:
            raise ValueError("shifted-2d mode requires n = 2")
        if self.mode == "shifted-axisym-3d" and self.n != 3:
            raise ValueError("shifted-axisym-3d mode requires n = 3")

    @classmethod
    def shifted(cls, n: int, R: float, delta: float) -> "RingGeometry":
        return cls(n, R, delta, "shifted-2d" if n == 2 else "shifted-axisym-3d")

    @property
    def center(self) -> np.ndarray:
        z = np.zeros(self.n)
        z[0] = -self.delta
        return z

    @property
    def R1(self) -> float:
        """Radius of the largest origin-centred ball inside B_R(Z)."""
        return self.R - self.delta

    @property
    def R2(self) -> float:
        """Radius of the smallest origin-centred ball containing B_R(Z)."""
        return self.R + self.delta

    def sigma(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        return sigma_of(x[..., 0] / r, self.R, self.delta)

    def contains(self, x, closed: bool = True) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        d = np.linalg.norm(x - self.center, axis=-1)
        if closed:
            return (r >= 1.0) & (d <= self.R)
        return (r > 1.0) & (d < self.R)

    def tau(self, x) -> np.ndarray:
        return tau_map(x, self)

    def star(self, x) -> np.ndarray:
        return star_map(x, self)


def sigma_of(mu, R: float, delta: float):
    mu = np.asarray(mu, dtype=float)
    t = np.sqrt(delta * delta * mu * mu + (R * R - delta * delta)) - delta * mu
    return t if t.ndim else float(t)


def _radial(x):
    r = np.linalg.norm(x, axis=-1)
    r_i = x / r[..., None]
    r_ii = 1.0 / r[..., None] - x * x / r[..., None] ** 3
    return r, r_i, r_ii


def _mu_derivs(x, r):
    n = x.shape[-1]
    x1 = x[..., :1]
    rr = r[..., None]
    e1 = np.zeros(n)
    e1[0] = 1.0
    mu = x[..., 0] / r
    mu_i = e1 / rr - x1 * x / rr**3
    mu_ii = -2.0 * e1 * x / rr**3 - x1 / rr**3 + 3.0 * x1 * x * x / rr**5
    return mu, mu_i, mu_ii


def sigma_derivs(x, R: float, delta: float):
    """t, grad t and the pure second derivatives t_{x_i x_i}."""
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    mu, mu_i, mu_ii = _mu_derivs(x, r)
    S = np.sqrt(delta * delta * mu * mu + (R * R - delta * delta))
    t = S - delta * mu
    fac = (delta * mu / S - 1.0)[..., None] * delta
    t_i = fac * mu_i
    t_ii = fac * mu_ii + ((R * R - delta * delta) * delta * delta / S**3)[..., None] * mu_i**2
    return t, t_i, t_ii


def _e_derivs(x, r):
    """e = x/|x|; e_i[..., k, i] = d e^k / dx_i, e_ii likewise for d^2/dx_i^2."""
    n = x.shape[-1]
    rr = r[..., None, None]
    eye = np.eye(n)
    xk = x[..., :, None]
    xi = x[..., None, :]
    e = x / r[..., None]
    e_i = eye / rr - xk * xi / rr**3
    e_ii = -2.0 * eye * xi / rr**3 - xk / rr**3 + 3.0 * xk * xi**2 / rr**5
    return e, e_i, e_ii


@dataclass(frozen=True)
class RayMapEval:
    mu: np.ndarray
    t: np.ndarray
    beta: np.ndarray
    grad_mu: np.ndarray
    mu_second: np.ndarray
    grad_sigma: np.ndarray
    sigma_second: np.ndarray
    grad_beta: np.ndarray
    beta_second: np.ndarray
    lap_beta: np.ndarray
    grad_theta: np.ndarray
    lap_theta: np.ndarray
    e: np.ndarray
    e_jac: np.ndarray
    e_second: np.ndarray
    psi: np.ndarray
    psi_jac: np.ndarray
    psi_second: np.ndarray
    psi_star: np.ndarray
    psi_star_jac: np.ndarray
    psi_star_second: np.ndarray


def _theta_derivs(x, r):
    """Angular chart coordinate: planar angle (n=2) or polar angle from e1 (n=3)."""
    n = x.shape[-1]
    if n == 2:
        grad = np.stack([-x[..., 1], x[..., 0]], axis=-1) / (r * r)[..., None]
        return grad, np.zeros_like(r)
    rho = np.sqrt(np.maximum(r * r - x[..., 0] ** 2, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        e1 = np.zeros(n)
        e1[0] = 1.0
        grad = (x[..., :1] * x / (r * r)[..., None] - e1) / rho[..., None]
        lap = x[..., 0] / (r * r * rho)
    return grad, lap


def map_metrics(x, geom: RingGeometry) -> RayMapEval:
    x = np.asarray(x, dtype=float)
    R, delta = geom.R, geom.delta
    r, r_i, r_ii = _radial(x)
    mu, mu_i, mu_ii = _mu_derivs(x, r)
    t, t_i, t_ii = sigma_derivs(x, R, delta)
    tm1 = (t - 1.0)[..., None]
    rm1 = (r - 1.0)[..., None]
    beta = (r - 1.0) / (t - 1.0)
    b_i = r_i / tm1 - rm1 * t_i / tm1**2
    b_ii = (r_ii / tm1 - 2.0 * r_i * t_i / tm1**2
            + 2.0 * rm1 * t_i**2 / tm1**3 - rm1 * t_ii / tm1**2)
    grad_theta, lap_theta = _theta_derivs(x, r)
    e, e_i, e_ii = _e_derivs(x, r)

    # tau map: psi = -delta e1 + a e with a = beta (R - t)
    Rt = (R - t)[..., None]
    a = beta * (R - t)
    a_i = b_i * Rt - beta[..., None] * t_i
    a_ii = b_ii * Rt - 2.0 * b_i * t_i - beta[..., None] * t_ii
    center = np.zeros(x.shape[-1])
    center[0] = -delta
    psi = center + a[..., None] * e
    psi_jac = e[..., :, None] * a_i[..., None, :] + a[..., None, None] * e_i
    psi_second = (e[..., :, None] * a_ii[..., None, :] + 2.0 * a_i[..., None, :] * e_i
                  + a[..., None, None] * e_ii)

    # star map: psi* = b (t - R1) e with b = (|x| - 1)/(R1 - 1)
    R1m1 = geom.R1 - 1.0
    b = (r - 1.0) / R1m1
    tR1 = (t - geom.R1)[..., None]
    s = b * (t - geom.R1)
    s_i = r_i / R1m1 * tR1 + b[..., None] * t_i
    s_ii = r_ii / R1m1 * tR1 + 2.0 * r_i / R1m1 * t_i + b[..., None] * t_ii
    psi_star = s[..., None] * e
    psi_star_jac = e[..., :, None] * s_i[..., None, :] + s[..., None, None] * e_i
    psi_star_second = (e[..., :, None] * s_ii[..., None, :] + 2.0 * s_i[..., None, :] * e_i
                       + s[..., None, None] * e_ii)

    return RayMapEval(
        mu=mu, t=t, beta=beta, grad_mu=mu_i, mu_second=mu_ii,
        grad_sigma=t_i, sigma_second=t_ii,
        grad_beta=b_i, beta_second=b_ii, lap_beta=b_ii.sum(axis=-1),
        grad_theta=grad_theta, lap_theta=lap_theta,
        e=e, e_jac=e_i, e_second=e_ii,
        psi=psi, psi_jac=psi_jac, psi_second=psi_second,
        psi_star=psi_star, psi_star_jac=psi_star_jac, psi_star_second=psi_star_second,
    )


def tau_map(x, geom: RingGeometry) -> np.ndarray:
    """Omega -> B_R(Z) minus the closed unit ball centred at Z, ray by ray."""
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    if np.any(r < 1.0 - 1e-12):
        raise ValueError("tau_map is defined for |x| >= 1 only")
    t = sigma_of(x[..., 0] / r, geom.R, geom.delta)
    coef = (t - r) / (t - 1.0) + (r - 1.0) * geom.R / (t - 1.0)
    return geom.center + np.asarray(coef)[..., None] * x / r[..., None]


def star_map(x, geom: RingGeometry) -> np.ndarray:
    """Closed Omega_1 = {1 <= |x| <= R1} onto closed Omega, ray by ray."""
    return ray_map(x, geom, geom.R1)


def ray_map(x, geom: RingGeometry, source_outer: float) -> np.ndarray:
    """Concentric ring {1 <= |x| <= source_outer} onto closed Omega, ray by ray.

    The radial fraction (|x| - 1)/(source_outer - 1) is carried over to the
    segment from the unit sphere to the outer sphere of Omega.
    """
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    tol = 1e-12 * source_outer
    if np.any(r < 1.0 - tol) or np.any(r > source_outer + tol):
        raise ValueError(f"point outside the closed ring 1 <= |x| <= {source_outer}")
    t = sigma_of(x[..., 0] / r, geom.R, geom.delta)
    lam = (r - 1.0) / (source_outer - 1.0)
    coef = (1.0 - lam) + lam * t
    return np.asarray(coef)[..., None] * x / r[..., None]


def chart_to_point(beta, theta, geom: RingGeometry, outer=None) -> np.ndarray:
    """Point with chart coordinates (beta, theta); outer=None uses sigma."""
    beta = np.asarray(beta, dtype=float)
    theta = np.asarray(theta, dtype=float)
    c, s = np.cos(theta), np.sin(theta)
    mu = c
    t = sigma_of(mu, geom.R, geom.delta) if outer is None else outer
    r = 1.0 + beta * (t - 1.0)
    if geom.n == 2:
        return np.stack([r * c, r * s], axis=-1)
    return np.stack([r * c, r * s, np.zeros_like(r * s)], axis=-1)


def sample_chart(samples: int, n: int, seed: int = 0):
    """Quasi-random (beta, direction) pairs covering the ring chart."""
    d = 2 if n == 2 else 3
    pts = qmc.Halton(d=d, scramble=True, seed=seed).random(samples)
    beta = pts[:, 0]
    if n == 2:
        th = 2.0 * np.pi * pts[:, 1]
        e = np.stack([np.cos(th), np.sin(th)], axis=-1)
    else:
        ct = 2.0 * pts[:, 1] - 1.0
        st = np.sqrt(1.0 - ct * ct)
        ph = 2.0 * np.pi * pts[:, 2]
        e = np.stack([ct, st * np.cos(ph), st * np.sin(ph)], axis=-1)
    return beta, e


def sample_points(geom: RingGeometry, samples: int, seed: int = 0) -> np.ndarray:
    beta, e = sample_chart(samples, geom.n, seed)
    t = sigma_of(e[:, 0], geom.R, geom.delta)
    return (1.0 + beta * (t - 1.0))[:, None] * e


@dataclass(frozen=True)
class BoundReport:
    delta: float
    samples: int
    max_psi_x: float
    max_psi_xx: float
    max_R_minus_t: float
    psi_x_ratio: float
    psi_xx_ratio: float
    R_minus_t_ratio: float
    psi_x_ratio_half: float
    psi_xx_ratio_half: float
    lipschitz_ok: bool
    stable: bool

    @property
    def passed(self) -> bool:
        return self.lipschitz_ok and self.stable


def _psi_maxima(geom: RingGeometry, beta, e):
    t = sigma_of(e[:, 0], geom.R, geom.delta)
    x = (1.0 + beta * (t - 1.0))[:, None] * e
    ev = map_metrics(x, geom)
    return (float(np.max(np.abs(ev.psi_jac))), float(np.max(np.abs(ev.psi_second))),
            float(np.max(np.abs(geom.R - ev.t))))


def delta_bounds_audit(geom: RingGeometry, samples: int = 1000, seed: int = 0,
                       stability_tol: float = 0.25) -> BoundReport:
    """Sample |psi_x|/delta, |psi_xx|/delta and |R - t|/delta, and repeat at delta/2."""
    beta, e = sample_chart(samples, geom.n, seed)
    px, pxx, rt = _psi_maxima(geom, beta, e)
    d = geom.delta
    if d == 0:
        return BoundReport(0.0, samples, px, pxx, rt, 0.0, 0.0, 0.0, 0.0, 0.0,
                           lipschitz_ok=rt == 0.0, stable=px == 0.0 and pxx == 0.0)
    half = RingGeometry(geom.n, geom.R, d / 2, geom.mode)
    hpx, hpxx, _ = _psi_maxima(half, beta, e)
    rx, rxx = px / d, pxx / d
    hx, hxx = hpx / (d / 2), hpxx / (d / 2)
    stable = (abs(rx - hx) <= stability_tol * max(rx, hx)
              and abs(rxx - hxx) <= stability_tol * max(rxx, hxx))
    return BoundReport(
        delta=d, samples=samples, max_psi_x=px, max_psi_xx=pxx, max_R_minus_t=rt,
        psi_x_ratio=rx, psi_xx_ratio=rxx, R_minus_t_ratio=rt / d,
        psi_x_ratio_half=hx, psi_xx_ratio_half=hxx,
        lipschitz_ok=bool(rt <= 2.0 * d), stable=bool(stable),
    )
