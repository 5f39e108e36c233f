"""Reaction terms f for the steady problem  Δu = f(u).

Every admissible f vanishes on s <= 0, is nonpositive, and is C^1 across
s = 0.  Builtins are ``zero`` and ``quad-exp`` (f(s) = -c s^2 e^{-s} for
s > 0); ``user-table`` wraps sampled (s, f) pairs with a C^1 Hermite
interpolant.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicHermiteSpline, PchipInterpolator
from scipy.optimize import minimize_scalar

FAMILIES = ("zero", "quad-exp", "user-table")

# grid for the inf f' estimate; builtin f' -> 0 as s -> oo
S_MAX = 20.0
N_GRID = 10_000


@dataclass(frozen=True)
class Nonlinearity:
    family: str
    c: float = 0.0
    table: tuple[np.ndarray, np.ndarray] | None = field(default=None, repr=False)
    inf_fprime: float = 0.0
    sup_fprime: float = 0.0
    smoothness_class: str = "C1"
    _spline: CubicHermiteSpline | None = field(default=None, repr=False, compare=False)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        pos = s > 0.0
        out = np.zeros_like(s)
        if self.family == "quad-exp":
            sp = s[pos]
            out[pos] = -self.c * sp * sp * np.exp(-sp)
        elif self.family == "user-table":
            sp = np.minimum(s[pos], self.table[0][-1])
            out[pos] = np.minimum(self._spline(sp), 0.0)
        return out if out.ndim else float(out)

    def fprime(self, s):
        s = np.asarray(s, dtype=float)
        pos = s > 0.0
        out = np.zeros_like(s)
        if self.family == "quad-exp":
            sp = s[pos]
            out[pos] = -self.c * (2.0 * sp - sp * sp) * np.exp(-sp)
        elif self.family == "user-table":
            sp = s[pos]
            inside = sp < self.table[0][-1]
            vals = np.zeros_like(sp)
            vals[inside] = self._spline(sp[inside], 1)
            out[pos] = vals
        return out if out.ndim else float(out)

    @property
    def lipschitz(self) -> float:
        """sup |f'| over the real line."""
        return max(abs(self.inf_fprime), abs(self.sup_fprime))

    @property
    def c0(self) -> float:
        """max(0, -inf f'), the one-sided growth constant."""
        return max(0.0, -self.inf_fprime)


@dataclass(frozen=True)
class AdmissibilityReport:
    n: int
    R: float
    inf_fprime_est: float
    bound: float
    bound_thm11: float
    admissible: bool
    margin: float


def _grid_extremum(fp, s_max: float, sign: float) -> float:
    """min over [0, s_max] of sign*fp, by grid search plus bounded refinement."""
    s = np.linspace(0.0, s_max, N_GRID)
    vals = sign * np.asarray(fp(s), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise ValueError("non-finite f' values encountered")
    k = int(np.argmin(vals))
    best = vals[k]
    lo = s[max(k - 1, 0)]
    hi = s[min(k + 1, N_GRID - 1)]
    if hi > lo:
        res = minimize_scalar(lambda x: sign * float(fp(x)), bounds=(lo, hi),
                              method="bounded", options={"xatol": 1e-12})
        if res.fun < best:
            best = float(res.fun)
    return sign * best


def make_builtin(family: str, c: float = 0.0) -> Nonlinearity:
    if family not in ("zero", "quad-exp"):
        raise ValueError(f"unknown builtin family {family!r}; expected 'zero' or 'quad-exp'")
    if family == "zero":
        return Nonlinearity("zero", 0.0, inf_fprime=0.0, sup_fprime=0.0,
                            smoothness_class="C3-claimed")
    if not c > 0.0:
        raise ValueError(f"strength c must be positive, got {c}")
    # f'(s) = -c (2s - s^2) e^{-s}; stationary points at s = 2 -+ sqrt(2)
    s_lo, s_hi = 2.0 - np.sqrt(2.0), 2.0 + np.sqrt(2.0)
    inf_fp = -c * (2.0 * s_lo - s_lo**2) * np.exp(-s_lo)
    sup_fp = -c * (2.0 * s_hi - s_hi**2) * np.exp(-s_hi)
    return Nonlinearity("quad-exp", float(c), inf_fprime=float(inf_fp),
                        sup_fprime=float(sup_fp), smoothness_class="C1")


def from_table(s, fvals) -> Nonlinearity:
    """Nonlinearity from sampled pairs; (0, 0) is prepended when missing.

    Slopes come from PCHIP except at s = 0, where the slope is pinned to 0
    so the extension by zero to s <= 0 stays C^1.
    """
    s = np.asarray(s, dtype=float)
    fvals = np.asarray(fvals, dtype=float)
    if s.shape != fvals.shape or s.ndim != 1:
        raise ValueError("table columns must be 1-D and of equal length")
    if not (np.all(np.isfinite(s)) and np.all(np.isfinite(fvals))):
        raise ValueError("non-finite f values encountered in table")
    if np.any(np.diff(s) <= 0):
        raise ValueError("table s column must be strictly increasing")
    if np.any(fvals > 0):
        raise ValueError("table violates f <= 0")
    if np.any(fvals[s <= 0] != 0):
        raise ValueError("table violates f(s) = 0 for s <= 0")
    keep = s > 0
    s, fvals = s[keep], fvals[keep]
    s = np.concatenate([[0.0], s])
    fvals = np.concatenate([[0.0], fvals])
    if s.size < 3:
        raise ValueError("table needs at least two samples with s > 0")
    slopes = PchipInterpolator(s, fvals).derivative()(s)
    slopes[0] = 0.0
    slopes[-1] = 0.0
    spline = CubicHermiteSpline(s, fvals, slopes)
    probe = Nonlinearity("user-table", 0.0, table=(s, fvals), _spline=spline)
    inf_fp = min(_grid_extremum(probe.fprime, s[-1], 1.0), 0.0)
    sup_fp = max(_grid_extremum(probe.fprime, s[-1], -1.0), 0.0)
    return Nonlinearity("user-table", 0.0, table=(s, fvals), inf_fprime=inf_fp,
                        sup_fprime=sup_fp, smoothness_class="C1", _spline=spline)


def load_table(path) -> Nonlinearity:
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [h.strip() for h in reader.fieldnames] != ["s", "f"]:
            raise ValueError(f"{path}: expected CSV header 's,f'")
        rows = [(float(r["s"]), float(r["f"])) for r in reader]
    arr = np.array(rows, dtype=float).reshape(-1, 2)
    return from_table(arr[:, 0], arr[:, 1])


def estimate_inf_fprime(f: Nonlinearity) -> float:
    s_max = f.table[0][-1] if f.family == "user-table" else S_MAX
    return min(_grid_extremum(f.fprime, s_max, 1.0), 0.0)


def validate(f: Nonlinearity, n: int, R: float) -> AdmissibilityReport:
    """Check inf f' > -2(n+2)/R^2 with a numerical estimate of inf f'.

    The stricter-looking -4(n+2)/R^2 constant of the exact-symmetry
    statement is reported as ``bound_thm11`` but never used for gating.
    """
    if n < 2:
        raise ValueError(f"dimension n must be >= 2, got {n}")
    if not R > 1:
        raise ValueError(f"outer radius R must exceed 1, got {R}")
    inf_est = estimate_inf_fprime(f)
    bound = -2.0 * (n + 2) / R**2
    return AdmissibilityReport(
        n=n, R=float(R), inf_fprime_est=inf_est, bound=bound,
        bound_thm11=-4.0 * (n + 2) / R**2,
        admissible=bool(inf_est > bound), margin=inf_est - bound,
    )
