"""Two distinct solutions of Δu = -λ u with the same Dirichlet data.

If w is a Dirichlet eigenfunction of -Δ on the ring with eigenvalue λ and u
solves Δu + λu = 0 with data (g_in, g_out), then u + w solves the same
problem.  w is taken as W(r) cos θ (angular mode k, principal in r), so λ is
not an eigenvalue of the radial mode and the radial problem for u is
uniquely solvable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal, solve_banded

from ..solvers import _radial_weights


@dataclass
class NonuniquenessReport:
    n: int
    R: float
    mode: int
    eigenvalue: float
    r: np.ndarray
    u: np.ndarray
    w: np.ndarray
    residual_u: float
    residual_uw: float
    w_norm: float
    boundary_equal: bool
    tol: float

    @property
    def passed(self) -> bool:
        return (self.residual_u <= self.tol and self.residual_uw <= self.tol
                and self.boundary_equal and self.w_norm > 0.1)


def _mode_operator(n: int, r: np.ndarray, mode: int):
    """Tridiagonal entries of the mode-k operator  -(1/V)(flux difference) + k(k+n-2)/r^2.

    Returns (lower, diag, upper) acting on the interior nodes.
    """
    k, V = _radial_weights(n, r)
    Vi = V[1:-1]
    diag = (k[:-1] + k[1:]) / Vi + mode * (mode + n - 2) / r[1:-1] ** 2
    upper = -k[1:-1] / Vi[:-1]
    lower = -k[1:-1] / Vi[1:]
    return lower, diag, upper, k, V


def _apply(n, r, mode, y, lam):
    """(-Δ_k - lam) y on interior nodes, y including its boundary values."""
    k, V = _radial_weights(n, r)
    flux = k * np.diff(y)
    lap = (flux[1:] - flux[:-1]) / V[1:-1]
    return -lap + mode * (mode + n - 2) / r[1:-1] ** 2 * y[1:-1] - lam * y[1:-1]


def nonuniqueness_demo(R: float, tol: float = 1e-6, n: int = 2, m: int = 512, mode: int = 1,
                       g_in: float = 1.0, g_out: float = -1.0) -> NonuniquenessReport:
    if not R > 1:
        raise ValueError(f"outer radius must exceed 1, got {R}")
    r = np.linspace(1.0, R, m)
    lower, diag, upper, k, V = _mode_operator(n, r, mode)
    # symmetrise with V^{1/2}: off-diagonal -k_i / sqrt(V_i V_{i+1})
    Vi = V[1:-1]
    off = -k[1:-1] / np.sqrt(Vi[:-1] * Vi[1:])
    vals, vecs = eigh_tridiagonal(diag, off, select="i", select_range=(0, 0))
    lam = float(vals[0])
    W = np.zeros(m)
    W[1:-1] = vecs[:, 0] / np.sqrt(Vi)
    W /= np.max(np.abs(W))

    # radial solve of -Δ_0 U - lam U = 0 with the Dirichlet data
    l0, d0, u0, _, _ = _mode_operator(n, r, 0)
    ab = np.zeros((3, m - 2))
    ab[0, 1:] = u0
    ab[1] = d0 - lam
    ab[2, :-1] = l0
    rhs = np.zeros(m - 2)
    rhs[0] = k[0] / Vi[0] * g_in
    rhs[-1] = k[-1] / Vi[-1] * g_out
    U = np.empty(m)
    U[0], U[-1] = g_in, g_out
    U[1:-1] = solve_banded((1, 1), ab, rhs)

    res_u = float(np.max(np.abs(_apply(n, r, 0, U, lam))))
    res_w = float(np.max(np.abs(_apply(n, r, mode, W, lam))))
    # u + w cos(k theta): the two angular modes decouple, so the residual on
    # any ray is bounded by the sum of the mode residuals
    res_uw = res_u + res_w
    return NonuniquenessReport(
        n=n, R=float(R), mode=mode, eigenvalue=lam, r=r, u=U, w=W,
        residual_u=res_u, residual_uw=res_uw, w_norm=float(np.max(np.abs(W))),
        boundary_equal=bool(W[0] == 0.0 and W[-1] == 0.0), tol=float(tol),
    )
