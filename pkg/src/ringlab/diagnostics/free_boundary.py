"""Zero-level extraction of ∂{u > 0}, polyline distances, asymmetry and non-degeneracy."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..discretization import Field


@dataclass
class FreeBoundary:
    """Primary crossing radius per angular line (nan where the ray has none)."""

    theta: np.ndarray
    rho: np.ndarray
    closed: bool
    crossings: list = field(default_factory=list)
    multiple: list = field(default_factory=list)

    @classmethod
    def circle(cls, rho: float, m_theta: int, center=(0.0, 0.0)) -> "FreeBoundary":
        th = 2.0 * np.pi * np.arange(m_theta) / m_theta
        if center[0] == 0 and center[1] == 0:
            return cls(th, np.full(m_theta, float(rho)), True)
        # circle |x - c| = rho seen from the origin along each ray (c inside the circle)
        c = np.asarray(center, dtype=float)
        e = np.stack([np.cos(th), np.sin(th)], axis=-1)
        ce = e @ c
        rr = ce + np.sqrt(ce * ce - c @ c + rho * rho)
        return cls(th, rr, True)

    @property
    def empty(self) -> bool:
        return not np.any(np.isfinite(self.rho))

    def points(self) -> np.ndarray:
        ok = np.isfinite(self.rho)
        r, th = self.rho[ok], self.theta[ok]
        return np.stack([r * np.cos(th), r * np.sin(th)], axis=-1)

    def segments(self):
        """Polyline pieces joining primary crossings on consecutive angular lines."""
        ok = np.isfinite(self.rho)
        pts = np.stack([self.rho * np.cos(self.theta), self.rho * np.sin(self.theta)], axis=-1)
        m = len(self.theta)
        idx = np.arange(m - 1)
        if self.closed:
            idx = np.arange(m)
        j = (idx + 1) % m
        keep = ok[idx] & ok[j]
        return pts[idx[keep]], pts[j[keep]]

    def dump_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["theta", "rho", "x1", "x2"])
            for th, r in zip(self.theta, self.rho):
                if np.isfinite(r):
                    w.writerow([f"{v:.17g}" for v in (th, r, r * np.cos(th), r * np.sin(th))])


def free_boundary(u: Field, warn: bool = True) -> FreeBoundary:
    """Sign changes of u along every angular line, linearly interpolated in beta.

    The primary crossing of a ray is the outermost one; all crossings are
    kept in ``crossings`` and rays with more than one are listed in
    ``multiple``.
    """
    g = u.grid
    U = u.values
    pos = U > 0
    m_t = g.m_theta
    rho = np.full(m_t, np.nan)
    crossings, multiple = [], []
    for j in range(m_t):
        col = U[:, j]
        idx = np.nonzero(pos[:-1, j] != pos[1:, j])[0]
        found = []
        for i in idx:
            a, b = col[i], col[i + 1]
            w = a / (a - b) if a != b else 0.0
            beta = g.beta[i] + w * g.hb
            found.append(1.0 + beta * (g.outer[j] - 1.0))
        crossings.append(found)
        if found:
            rho[j] = found[-1]
        if len(found) > 1:
            multiple.append(j)
    if multiple and warn:
        warnings.warn(f"{len(multiple)} rays cross zero more than once; outermost crossing used",
                      stacklevel=2)
    th = g.theta
    return FreeBoundary(th, rho, g.periodic, crossings, multiple)


def _point_polyline_distance(P: np.ndarray, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Distance from each point in P to the union of segments [A_k, B_k]."""
    P = P[:, None, :]
    d = B - A
    L2 = np.sum(d * d, axis=-1)
    L2 = np.where(L2 > 0, L2, 1.0)
    t = np.clip(np.sum((P - A) * d, axis=-1) / L2, 0.0, 1.0)
    proj = A + t[..., None] * d
    return np.min(np.linalg.norm(P - proj, axis=-1), axis=1)


def distance_to(F: FreeBoundary, pts) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(pts, dtype=float))[:, :2]
    A, B = F.segments()
    if len(A) == 0:
        V = F.points()
        return np.min(np.linalg.norm(pts[:, None, :] - V[None], axis=-1), axis=1)
    return _point_polyline_distance(pts, A, B)


def fb_distance(Fa: FreeBoundary, Fb: FreeBoundary) -> float:
    """One-sided sup over Fa's vertices of the distance to Fb's polyline."""
    if Fa.empty or Fb.empty:
        raise ValueError("free boundary distance needs two non-empty contours")
    return float(np.max(distance_to(Fb, Fa.points())))


def fb_hausdorff(Fa: FreeBoundary, Fb: FreeBoundary) -> float:
    return max(fb_distance(Fa, Fb), fb_distance(Fb, Fa))


def chord_tolerance(F: FreeBoundary) -> float:
    """Polyline chord error (Δθ)^2 ρ / 8 for the largest reported radius."""
    dth = float(np.max(np.diff(F.theta))) if len(F.theta) > 1 else 0.0
    return dth * dth * float(np.nanmax(F.rho)) / 8.0


def asymmetry(u: Field) -> float:
    """max over beta-levels of (max_theta u - min_theta u)."""
    V = u.values
    return float(np.max(np.max(V, axis=1) - np.min(V, axis=1)))


@dataclass(frozen=True)
class NondegeneracyReport:
    C_est: float
    exponent: float
    degenerate: bool
    nodes: int

    def __float__(self) -> float:
        return self.C_est


def nondegeneracy(u: Field, F: FreeBoundary, tol_pos: float = 1e-10,
                  near_fraction: float = 0.25, threshold: float = 1.5) -> NondegeneracyReport:
    """C_est = min of u/dist(x, F) over nodes with u > tol_pos.

    The growth exponent p of u ~ dist^p is fitted by least squares on the
    positive nodes whose distance is within ``near_fraction`` of the
    largest; p > ``threshold`` flags a degenerate (superlinear) vanishing.
    """
    if F.empty:
        raise ValueError("non-degeneracy needs a non-empty free boundary")
    g = u.grid
    mask = u.values > tol_pos
    if not np.any(mask):
        raise ValueError("positive set is empty")
    pts = np.stack([g.x1[mask], g.x2[mask]], axis=-1)
    d = distance_to(F, pts)
    vals = u.values[mask]
    good = d > 0
    ratio = vals[good] / d[good]
    C = float(np.min(ratio))
    near = good & (d <= near_fraction * np.max(d))
    if np.count_nonzero(near) >= 3 and np.ptp(np.log(d[near])) > 0:
        p = float(np.polyfit(np.log(d[near]), np.log(vals[near]), 1)[0])
    else:
        p = float("nan")
    return NondegeneracyReport(C, p, bool(p > threshold), int(np.count_nonzero(mask)))
