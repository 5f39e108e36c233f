"""Radial correction series and exponential barriers.

The correction is the even power series

    phi(s) = sum_k a_k s^{2k},   a_{k+1} = -A a_k / (2 (n + 2k) (k + 1)),

which solves phi'' + (n-1)/s phi' = -A phi.  For n = 2 it is a0 J0(sqrt(A) s),
for n = 3 it is a0 sin(sqrt(A) s) / (sqrt(A) s).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .nonlinearity import Nonlinearity, validate

TAIL_TOL = 1e-12
K_MAX = 400


class InadmissibleError(ValueError):
    """The window for A is empty: -inf f' >= 2(n+2)/R^2."""

    def __init__(self, lower: float, upper: float):
        self.lower = lower
        self.upper = upper
        super().__init__(
            f"empty window for A: lower end max(0, -inf f') = {lower:.6g} "
            f">= upper end 2(n+2)/R^2 = {upper:.6g}"
        )


@dataclass(frozen=True)
class RadialSeries:
    n: int
    A: float
    a0: float
    coeffs: np.ndarray
    radius: float
    tail_bound: float

    @property
    def K(self) -> int:
        return len(self.coeffs) - 1

    @property
    def certified(self) -> bool:
        return self.tail_bound <= TAIL_TOL

    def __call__(self, s, order: int = 0):
        return eval_series(self, s, order)


def _coefficients(n: int, A: float, a0: float, K: int) -> np.ndarray:
    a = np.empty(K + 1)
    a[0] = a0
    for k in range(K):
        a[k + 1] = -A * a[k] / (2.0 * (n + 2 * k) * (k + 1))
    return a


def tail_bound(n: int, A: float, coeffs: np.ndarray, s: float) -> float:
    """Geometric majorant of sum_{k>K} |a_k| s^{2k}.

    Term ratios A s^2 / (2 (n+2k)(k+1)) decrease in k, so once the ratio at
    k = K+1 is below 1 the tail is bounded by a geometric series.
    """
    K = len(coeffs) - 1
    if s == 0.0:
        return 0.0
    first = abs(coeffs[K]) * A * s * s / (2.0 * (n + 2 * K) * (K + 1)) * s ** (2 * K)
    q = A * s * s / (2.0 * (n + 2 * K + 2) * (K + 2))
    if q >= 1.0:
        return math.inf
    return first / (1.0 - q)


def build_radial_correction(n: int, A: float, a0: float = 1.0, K="auto",
                            radius: float | None = None) -> RadialSeries:
    """Truncated correction series certified on [0, radius].

    With ``K="auto"`` the smallest order whose tail bound at ``radius`` is
    at most 1e-12 is used.  With an explicit K and no radius, the certified
    radius is the largest s at which the tail bound stays below 1e-12.
    """
    if n < 2:
        raise ValueError(f"dimension n must be >= 2, got {n}")
    if not A > 0:
        raise ValueError(f"A must be positive, got {A}")
    if not a0 > 0:
        raise ValueError(f"a0 must be positive, got {a0}")
    if K == "auto":
        if radius is None:
            raise ValueError("K='auto' needs a radius to certify against")
        for k in range(1, K_MAX + 1):
            c = _coefficients(n, A, a0, k)
            tb = tail_bound(n, A, c, radius)
            if tb <= TAIL_TOL:
                return RadialSeries(n, float(A), float(a0), c, float(radius), tb)
        raise ValueError(f"no K <= {K_MAX} certifies the series at radius {radius}")
    K = int(K)
    if K < 1:
        raise ValueError(f"truncation order K must be >= 1, got {K}")
    c = _coefficients(n, A, a0, K)
    if radius is None:
        lo, hi = 0.0, 1.0
        while tail_bound(n, A, c, hi) <= TAIL_TOL and hi < 1e6:
            lo, hi = hi, 2.0 * hi
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if tail_bound(n, A, c, mid) <= TAIL_TOL:
                lo = mid
            else:
                hi = mid
        radius = lo
    tb = tail_bound(n, A, c, radius)
    if tb > TAIL_TOL:
        warnings.warn(f"K={K} gives tail bound {tb:.3g} > {TAIL_TOL:g} at s={radius}",
                      stacklevel=2)
    return RadialSeries(n, float(A), float(a0), c, float(radius), tb)


def eval_series(series: RadialSeries, s, order: int = 0):
    """phi, phi' or phi'' by termwise differentiation of the truncated series."""
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < 0):
        raise ValueError("series is evaluated at s >= 0 only")
    if np.any(s_arr > series.radius * (1 + 1e-12)):
        raise ValueError(f"s outside certified range [0, {series.radius}]")
    a = series.coeffs
    k = np.arange(len(a), dtype=float)
    x = s_arr * s_arr
    if order == 0:
        c = a
        out = np.polynomial.polynomial.polyval(x, c)
    elif order == 1:
        # phi' = s * sum_{k>=1} 2k a_k s^{2k-2}
        c = (2.0 * k * a)[1:]
        out = s_arr * np.polynomial.polynomial.polyval(x, c)
    elif order == 2:
        # phi'' = sum_{k>=1} 2k (2k-1) a_k s^{2k-2}
        c = (2.0 * k * (2.0 * k - 1.0) * a)[1:]
        out = np.polynomial.polynomial.polyval(x, c)
    else:
        raise ValueError(f"order must be 0, 1 or 2, got {order}")
    return out if np.ndim(out) else float(out)


def slope_bound(series: RadialSeries, R: float) -> float:
    """Upper bound on phi' over [1, R]: -(A a0 / n)(1 - A R^2 / (2(n+2)))."""
    n, A = series.n, series.A
    return -(A * series.a0 / n) * (1.0 - A * R * R / (2.0 * (n + 2)))


@dataclass(frozen=True)
class Constants:
    A: float
    C: float
    series: RadialSeries
    window: tuple[float, float]


def pick_constants(f: Nonlinearity, n: int, R: float, grad_sup: float,
                   a0: float = 1.0) -> Constants:
    """Midpoint A of (max(0, -inf f'), 2(n+2)/R^2) and the smallest admissible C."""
    if not grad_sup > 0:
        raise ValueError(f"grad_sup must be positive, got {grad_sup}")
    report = validate(f, n, R)
    lower = max(0.0, -report.inf_fprime_est)
    upper = 2.0 * (n + 2) / R**2
    if not report.admissible or lower >= upper:
        raise InadmissibleError(lower, upper)
    A = 0.5 * (lower + upper)
    C = n * grad_sup / (A * a0 * (1.0 - A * R * R / (2.0 * (n + 2))))
    series = build_radial_correction(n, A, a0, "auto", radius=R)
    return Constants(A=A, C=C, series=series, window=(lower, upper))


@dataclass(frozen=True)
class ExpBarrier:
    """phi0(r) = A e^{lambda r} + B with phi0(1) = 1, phi0(R) = -1.

    lambda < -(n-1) gives a strict subsolution with -Δphi0 <= -mu;
    lambda > 0 gives a strict supersolution with -Δphi0 >= mu.
    """

    n: int
    R: float
    lam: float
    A: float
    B: float
    mu: float

    @property
    def kind(self) -> str:
        return "sub" if self.lam < 0 else "super"

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        return self.A * np.exp(self.lam * r) + self.B

    def dr(self, r):
        r = np.asarray(r, dtype=float)
        return self.A * self.lam * np.exp(self.lam * r)

    def laplacian(self, r):
        r = np.asarray(r, dtype=float)
        lam = self.lam
        return self.A * (lam * lam + lam * (self.n - 1) / r) * np.exp(lam * r)


def _two_point(n: int, R: float, lam: float) -> tuple[float, float]:
    A = 2.0 / (math.exp(lam) - math.exp(lam * R))
    B = 1.0 - A * math.exp(lam)
    return A, B


def build_exp_barrier(n: int, R: float, lam="auto") -> ExpBarrier:
    if not R > 1:
        raise ValueError(f"outer radius R must exceed 1, got {R}")
    lam = -float(n) if lam == "auto" else float(lam)
    if not lam < -(n - 1):
        raise ValueError(
            f"lambda = {lam} violates lambda < -(n-1) = {-(n - 1)}: "
            "lambda^2 + lambda (n-1)/|x| is not positive at |x| = 1"
        )
    A, B = _two_point(n, R, lam)
    # worst case of the residual bound sits at |x| = 1
    mu = 2.0 * math.exp(lam * R) / (math.exp(lam) - math.exp(lam * R)) * (lam * lam + lam * (n - 1))
    return ExpBarrier(n, float(R), lam, A, B, mu)


def build_exp_superbarrier(n: int, R: float, lam="auto") -> ExpBarrier:
    """Superharmonic counterpart used on the upper side of the bracket."""
    if not R > 1:
        raise ValueError(f"outer radius R must exceed 1, got {R}")
    lam = float(n) if lam == "auto" else float(lam)
    if not lam > 0:
        raise ValueError(f"superbarrier needs lambda > 0, got {lam}")
    A, B = _two_point(n, R, lam)
    r = np.linspace(1.0, R, 2001)
    mu = float(np.min(-A * (lam * lam + lam * (n - 1) / r) * np.exp(lam * r)))
    return ExpBarrier(n, float(R), lam, A, B, mu)
