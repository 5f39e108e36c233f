"""Structured grids on rings and the discrete Laplacian in (beta, theta) chart form.

Every grid uses the chart x = (1 + beta (t(theta) - 1)) e(theta) with beta
uniform on [0, 1].  The Laplacian is assembled by the chain rule

    Δu = g11 U_bb + 2 g12 U_bt + g22 U_tt + Lb U_b + Lt U_t,

with g11 = |∇β|^2, g12 = ∇β·∇θ, g22 = |∇θ|^2, Lb = Δβ, Lt = Δθ, and
second-order centred differences for every chart derivative.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import CubicSpline, PchipInterpolator

from .geometry import RingGeometry, map_metrics, sigma_of

KINDS = ("radial-1d", "polar-2d", "mapped-2d", "axisym-3d")


@dataclass(eq=False)
class Grid:
    geom: RingGeometry
    kind: str
    m_s: int
    m_theta: int
    beta: np.ndarray = field(init=False, repr=False)
    theta: np.ndarray = field(init=False, repr=False)
    outer: np.ndarray = field(init=False, repr=False)
    r: np.ndarray = field(init=False, repr=False)
    x1: np.ndarray = field(init=False, repr=False)
    x2: np.ndarray = field(init=False, repr=False)
    g11: np.ndarray = field(init=False, repr=False)
    g12: np.ndarray = field(init=False, repr=False)
    g22: np.ndarray = field(init=False, repr=False)
    Lb: np.ndarray = field(init=False, repr=False)
    Lt: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        g = self.geom
        if self.kind not in KINDS:
            raise ValueError(f"unknown grid kind {self.kind!r}")
        if self.m_s < 4:
            raise ValueError(f"grid too coarse: m_s = {self.m_s} < 4")
        if self.kind == "radial-1d":
            self.m_theta = 1
            if g.delta != 0:
                raise ValueError("radial-1d grids need a concentric geometry")
        elif self.m_theta < 4:
            raise ValueError(f"grid too coarse: m_theta = {self.m_theta} < 4")
        if self.kind == "polar-2d" and (g.delta != 0 or g.n != 2):
            raise ValueError("polar-2d grids need a concentric 2-D geometry")
        if self.kind == "mapped-2d" and g.n != 2:
            raise ValueError("mapped-2d grids need n = 2")
        if self.kind == "axisym-3d" and g.n != 3:
            raise ValueError("axisym-3d grids need n = 3")

        self.beta = np.linspace(0.0, 1.0, self.m_s)
        if self.kind == "radial-1d":
            self.theta = np.zeros(1)
        elif self.kind == "axisym-3d":
            self.theta = np.linspace(0.0, np.pi, self.m_theta)
        else:
            self.theta = 2.0 * np.pi * np.arange(self.m_theta) / self.m_theta
        if self.kind in ("radial-1d", "polar-2d"):
            self.outer = np.full(self.m_theta, float(g.R))
        else:
            self.outer = np.asarray(sigma_of(np.cos(self.theta), g.R, g.delta), dtype=float).reshape(-1)
        B, T = np.meshgrid(self.beta, self.theta, indexing="ij")
        self.r = 1.0 + B * (self.outer[None, :] - 1.0)
        self.x1 = self.r * np.cos(T)
        self.x2 = self.r * np.sin(T)
        self._metrics()

    @property
    def periodic(self) -> bool:
        return self.kind in ("polar-2d", "mapped-2d")

    @property
    def hb(self) -> float:
        return 1.0 / (self.m_s - 1)

    @property
    def ht(self) -> float:
        if self.kind == "radial-1d":
            return 1.0
        if self.kind == "axisym-3d":
            return np.pi / (self.m_theta - 1)
        return 2.0 * np.pi / self.m_theta

    @property
    def shape(self) -> tuple[int, int]:
        return (self.m_s, self.m_theta)

    @property
    def size(self) -> int:
        return self.m_s * self.m_theta

    def points(self) -> np.ndarray:
        """Node coordinates, shape (m_s, m_theta, n); meridian plane x3 = 0 in 3-D."""
        cols = [self.x1, self.x2]
        if self.geom.n == 3:
            cols.append(np.zeros_like(self.x1))
        return np.stack(cols, axis=-1)

    def _metrics(self):
        g = self.geom
        R = g.R
        if self.kind in ("radial-1d", "polar-2d"):
            self.g11 = np.full(self.shape, 1.0 / (R - 1.0) ** 2)
            self.g12 = np.zeros(self.shape)
            self.Lb = (g.n - 1) / (self.r * (R - 1.0))
            if self.kind == "radial-1d":
                self.g22 = np.zeros(self.shape)
            else:
                self.g22 = 1.0 / self.r**2
            self.Lt = np.zeros(self.shape)
            return
        pts = self.points()
        ev = map_metrics(pts.reshape(-1, g.n), g)
        gb = ev.grad_beta.reshape(*self.shape, g.n)
        gt = ev.grad_theta.reshape(*self.shape, g.n)
        self.g11 = np.sum(gb * gb, axis=-1)
        self.Lb = ev.lap_beta.reshape(self.shape)
        if self.kind == "mapped-2d":
            self.g12 = np.sum(gb * gt, axis=-1)
            self.g22 = 1.0 / self.r**2
            self.Lt = np.zeros(self.shape)
            return
        # axisymmetric: theta is the polar angle, singular on the axis
        inner = slice(1, -1)
        self.g12 = np.zeros(self.shape)
        self.g12[:, inner] = np.sum(gb[:, inner] * gt[:, inner], axis=-1)
        self.g22 = 1.0 / self.r**2
        self.Lt = np.zeros(self.shape)
        self.Lt[:, inner] = ev.lap_theta.reshape(self.shape)[:, inner]
        # pole closure: cot(theta) U_t -> U_tt, so the angular weight doubles
        self.g22[:, 0] *= 2.0
        self.g22[:, -1] *= 2.0

    def theta_neighbours(self):
        j = np.arange(self.m_theta)
        if self.kind == "radial-1d":
            return j, j
        if self.periodic:
            return (j + 1) % self.m_theta, (j - 1) % self.m_theta
        jp = j + 1
        jm = j - 1
        jp[-1] = self.m_theta - 2
        jm[0] = 1
        return jp, jm

    def chart_coords(self, x):
        """(beta, theta) of points x; 3-D points may be given in the meridian plane."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        r = np.linalg.norm(x, axis=-1)
        if self.kind == "radial-1d":
            theta = np.zeros_like(r)
            t = np.full_like(r, self.geom.R)
        elif self.kind == "axisym-3d":
            theta = np.arccos(np.clip(x[:, 0] / r, -1.0, 1.0))
            t = np.asarray(sigma_of(x[:, 0] / r, self.geom.R, self.geom.delta)) * np.ones_like(r)
        else:
            theta = np.mod(np.arctan2(x[:, 1], x[:, 0]), 2.0 * np.pi)
            if self.kind == "polar-2d":
                t = np.full_like(r, self.geom.R)
            else:
                t = np.asarray(sigma_of(x[:, 0] / r, self.geom.R, self.geom.delta)) * np.ones_like(r)
        return (r - 1.0) / (t - 1.0), theta


def make_grid(geom: RingGeometry, kind: str | None = None, m_s: int = 128,
              m_theta: int = 128) -> Grid:
    if kind is None:
        if geom.n == 3:
            kind = "axisym-3d"
        else:
            kind = "polar-2d" if geom.delta == 0 else "mapped-2d"
    return Grid(geom, kind, m_s, m_theta)


@dataclass
class Field:
    grid: Grid
    values: np.ndarray
    g_in: float = 1.0
    g_out: float = -1.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            self.values = self.values.reshape(self.grid.shape)

    def copy(self, values=None) -> "Field":
        v = self.values.copy() if values is None else values
        return Field(self.grid, v, self.g_in, self.g_out)

    def with_boundary(self) -> "Field":
        v = self.values.copy()
        v[0, :] = self.g_in
        v[-1, :] = self.g_out
        return Field(self.grid, v, self.g_in, self.g_out)

    @classmethod
    def from_function(cls, grid: Grid, fn, g_in=1.0, g_out=-1.0, chart=False) -> "Field":
        """Sample fn(x1, x2) (or fn(beta, theta) with chart=True) at the nodes."""
        if chart:
            B, T = np.meshgrid(grid.beta, grid.theta, indexing="ij")
            vals = fn(B, T)
        else:
            vals = fn(grid.x1, grid.x2)
        return cls(grid, np.broadcast_to(vals, grid.shape).copy(), g_in, g_out)

    @classmethod
    def radial(cls, grid: Grid, profile, g_in=1.0, g_out=-1.0) -> "Field":
        """Nodes filled from a function of |x|."""
        return cls(grid, profile(grid.r), g_in, g_out)


def laplacian_values(grid: Grid, U) -> np.ndarray:
    """Stencil application; boundary rows of the result are 0."""
    U = np.asarray(U, dtype=float).reshape(grid.shape)
    hb, ht = grid.hb, grid.ht
    jp, jm = grid.theta_neighbours()
    Up, Um = U[:, jp], U[:, jm]
    c = slice(1, -1)
    out = np.zeros(grid.shape)
    d2b = (U[2:] - 2.0 * U[c] + U[:-2]) / hb**2
    db = (U[2:] - U[:-2]) / (2.0 * hb)
    val = grid.g11[c] * d2b + grid.Lb[c] * db
    if grid.kind != "radial-1d":
        d2t = (Up[c] - 2.0 * U[c] + Um[c]) / ht**2
        dt = (Up[c] - Um[c]) / (2.0 * ht)
        dbt = (Up[2:] - Um[2:] - Up[:-2] + Um[:-2]) / (4.0 * hb * ht)
        val = val + 2.0 * grid.g12[c] * dbt + grid.g22[c] * d2t + grid.Lt[c] * dt
    out[c] = val
    return out


def apply_laplacian(field: Field) -> Field:
    return Field(field.grid, laplacian_values(field.grid, field.values), 0.0, 0.0)


def laplacian_matrix(grid: Grid) -> sp.csr_matrix:
    """Sparse form of laplacian_values (rows of boundary nodes are empty)."""
    m_s, m_t = grid.shape
    hb, ht = grid.hb, grid.ht
    jp, jm = grid.theta_neighbours()
    I, J = np.meshgrid(np.arange(1, m_s - 1), np.arange(m_t), indexing="ij")
    I, J = I.ravel(), J.ravel()
    row = I * m_t + J
    g11, g12, g22 = grid.g11[I, J], grid.g12[I, J], grid.g22[I, J]
    Lb, Lt = grid.Lb[I, J], grid.Lt[I, J]
    rows, cols, vals = [], [], []

    def add(ii, jj, v):
        rows.append(row)
        cols.append(ii * m_t + jj)
        vals.append(v)

    add(I + 1, J, g11 / hb**2 + Lb / (2 * hb))
    add(I - 1, J, g11 / hb**2 - Lb / (2 * hb))
    add(I, J, -2.0 * g11 / hb**2)
    if grid.kind != "radial-1d":
        add(I, jp[J], g22 / ht**2 + Lt / (2 * ht))
        add(I, jm[J], g22 / ht**2 - Lt / (2 * ht))
        add(I, J, -2.0 * g22 / ht**2)
        x = g12 / (2.0 * hb * ht)
        add(I + 1, jp[J], x)
        add(I - 1, jm[J], x)
        add(I + 1, jm[J], -x)
        add(I - 1, jp[J], -x)
    n = grid.size
    return sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(n, n)).tocsr()


class _Interp:
    def __init__(self, field: Field, method: str):
        g = field.grid
        if method == "linear":
            self.fn = None
        elif method == "pchip":
            self.fn = PchipInterpolator(g.beta, field.values, axis=0, extrapolate=False)
        elif method == "cubic":
            self.fn = CubicSpline(g.beta, field.values, axis=0, extrapolate=False)
        else:
            raise ValueError(f"unknown interpolation method {method!r}")


def interpolate(field: Field, x, method: str = "linear", tol: float = 1e-12):
    """Value of the field at x from its chart coordinates.

    ``linear`` is bilinear in (beta, theta).  ``pchip`` and ``cubic`` use the
    named one-dimensional interpolant in beta on the two neighbouring
    angular lines and blend linearly in theta.
    """
    g = field.grid
    scalar = np.ndim(x) == 1
    b, th = g.chart_coords(x)
    if np.any(b < -tol) or np.any(b > 1.0 + tol):
        raise ValueError("point outside the grid's domain")
    b = np.clip(b, 0.0, 1.0)
    if g.kind == "radial-1d":
        j0 = j1 = np.zeros(b.shape, dtype=int)
        wt = np.zeros_like(b)
    elif g.periodic:
        s = th / g.ht
        j0 = np.floor(s).astype(int) % g.m_theta
        wt = s - np.floor(s)
        j1 = (j0 + 1) % g.m_theta
    else:
        s = th / g.ht
        j0 = np.clip(np.floor(s).astype(int), 0, g.m_theta - 2)
        wt = s - j0
        j1 = j0 + 1
    V = field.values
    if method == "linear":
        sb = b / g.hb
        i0 = np.clip(np.floor(sb).astype(int), 0, g.m_s - 2)
        wb = sb - i0
        a = (1 - wb) * V[i0, j0] + wb * V[i0 + 1, j0]
        c = (1 - wb) * V[i0, j1] + wb * V[i0 + 1, j1]
    else:
        fn = _Interp(field, method).fn
        cols = fn(b)
        k = np.arange(b.size)
        a = cols[k, j0]
        c = cols[k, j1]
    out = a + wt * (c - a)
    return float(out[0]) if scalar else out


def dump_field_csv(field: Field, path) -> None:
    g = field.grid
    B, T = np.meshgrid(g.beta, g.theta, indexing="ij")
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["beta", "theta", "x1", "x2", "u"])
        for row in zip(B.ravel(), T.ravel(), g.x1.ravel(), g.x2.ravel(), field.values.ravel()):
            w.writerow([f"{v:.17g}" for v in row])


# manufactured solutions ---------------------------------------------------

def _chart_mms(grid: Grid):
    B, T = np.meshgrid(grid.beta, grid.theta, indexing="ij")
    u = np.sin(np.pi * B) * np.cos(2 * T)
    ub = np.pi * np.cos(np.pi * B) * np.cos(2 * T)
    ubb = -np.pi**2 * u
    ut = -2.0 * np.sin(np.pi * B) * np.sin(2 * T)
    utt = -4.0 * u
    ubt = -2.0 * np.pi * np.cos(np.pi * B) * np.sin(2 * T)
    lap = (grid.g11 * ubb + 2 * grid.g12 * ubt + grid.g22 * utt
           + grid.Lb * ub + grid.Lt * ut)
    return u, lap


def _cartesian_mms(grid: Grid):
    x1, x2 = grid.x1, grid.x2
    if grid.geom.n == 2:
        u = np.exp(0.3 * x1) * np.sin(0.7 * x2) + x1**2
        lap = (0.09 - 0.49) * np.exp(0.3 * x1) * np.sin(0.7 * x2) + 2.0
    else:
        # axisymmetric: x2 is the distance to the axis
        u = np.exp(0.3 * x1) * x2**2
        lap = np.exp(0.3 * x1) * (0.09 * x2**2 + 4.0)
    return u, lap


@dataclass(frozen=True)
class MMSResult:
    sizes: tuple
    h: np.ndarray
    errors: np.ndarray
    order: float


def mms_convergence(geom: RingGeometry, sizes=(32, 64, 128), kind: str | None = None,
                    manufactured: str = "chart") -> MMSResult:
    """Observed order of the discrete Laplacian on a manufactured field.

    ``chart`` uses u = sin(pi beta) cos(2 theta) with its chain-rule Laplacian;
    ``cartesian`` uses a closed-form function of x with its exact Laplacian.
    """
    sizes = tuple(int(m) for m in sizes)
    if len(sizes) < 3:
        raise ValueError("need at least three grid sizes")
    fn = {"chart": _chart_mms, "cartesian": _cartesian_mms}[manufactured]
    errs, hs = [], []
    for m in sizes:
        grid = make_grid(geom, kind, m, m)
        u, lap = fn(grid)
        d = laplacian_values(grid, u)[1:-1] - lap[1:-1]
        errs.append(float(np.max(np.abs(d))))
        hs.append(grid.hb)
    hs, errs = np.array(hs), np.array(errs)
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    return MMSResult(sizes, hs, errs, float(slope))


def chart_gradients(field: Field):
    """Second-order U_beta and U_theta at every node (one-sided rows at the ends)."""
    g = field.grid
    U = field.values
    ub = np.gradient(U, g.hb, axis=0, edge_order=2)
    if g.kind == "radial-1d":
        return ub, np.zeros_like(U)
    jp, jm = g.theta_neighbours()
    ut = (U[:, jp] - U[:, jm]) / (2.0 * g.ht)
    return ub, ut


def gradient_norm(field: Field) -> np.ndarray:
    """Nodal |∇_h u| from chart differences and the metric coefficients."""
    g = field.grid
    ub, ut = chart_gradients(field)
    g22 = g.g22.copy()
    if g.kind == "axisym-3d":
        g22[:, [0, -1]] /= 2.0
    sq = g.g11 * ub**2 + 2.0 * g.g12 * ub * ut + g22 * ut**2
    return np.sqrt(np.maximum(sq, 0.0))


def gradient_sup(field: Field) -> float:
    return float(np.max(gradient_norm(field)))
