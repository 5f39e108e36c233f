"""End-to-end experiments: each run writes CSVs, an optional SVG and a manifest."""

from __future__ import annotations

import csv
import hashlib
import json
import os
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from .. import __version__
from ..barriers import (InadmissibleError, build_exp_barrier, build_radial_correction,
                        pick_constants)
from ..diagnostics import (FreeBoundary, asymmetry, choose_epsilon, chord_tolerance,
                           fb_distance, free_boundary, moving_plane_audit, nondegeneracy,
                           nonuniqueness_demo)
from ..diagnostics.certificates import pulled_barrier
from ..discretization import Field, dump_field_csv, gradient_sup, interpolate, make_grid
from ..geometry import RingGeometry, delta_bounds_audit
from ..nonlinearity import load_table, make_builtin, validate
from ..solvers import (ConvergenceError, DivergenceError, picard_slab_solve, steady_state)
from .config import ExperimentConfig
from .svg import write_svg

BRACKET_TOL = 1e-8
MONOTONE_TOL = 1e-8


class NumericalFailure(RuntimeError):
    pass


class CheckFailure(RuntimeError):
    pass


@dataclass
class RunManifest:
    config: dict
    versions: dict
    wall_time: float = 0.0
    stages: list = field(default_factory=list)
    files: list = field(default_factory=list)
    passed: bool = False
    exit_code: int = 0

    def to_dict(self) -> dict:
        return {"config": self.config, "versions": self.versions, "wall_time": self.wall_time,
                "stages": self.stages, "files": self.files, "passed": self.passed,
                "exit_code": self.exit_code}


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def write_rows(path, header, rows) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    return obj


# builders ----------------------------------------------------------------

def make_nonlinearity(cfg: ExperimentConfig):
    nl = cfg.nonlinearity
    if nl["family"] == "user-table":
        return load_table(nl["table_path"])
    return make_builtin(nl["family"], nl["c"])


def make_geometry(cfg: ExperimentConfig, delta: float | None = None, R: float | None = None):
    g = cfg.geometry
    d = g["delta"] if delta is None else delta
    R = g["R"] if R is None else R
    if d == 0:
        return RingGeometry(g["n"], R, 0.0, "concentric")
    return RingGeometry.shifted(g["n"], R, d)


def make_cfg_grid(cfg: ExperimentConfig, geom: RingGeometry):
    kind = cfg.grid["kind"]
    if kind in ("auto", "radial-1d") or (kind == "polar-2d" and geom.delta != 0):
        kind = None
    if kind == "mapped-2d" and geom.n == 3:
        kind = None
    return make_grid(geom, kind, cfg.grid["m_s"], cfg.grid["m_theta"])


def barrier_field(cfg: ExperimentConfig, grid, R: float):
    lam = cfg.barrier["lambda"]
    bar = build_exp_barrier(grid.geom.n, R, lam)
    b = cfg.boundary
    return pulled_barrier(grid, bar, b["g_in"], b["g_out"])


def solve(cfg: ExperimentConfig, grid, f, initial: Field) -> Field:
    sol = cfg.solver
    if sol["scheme"] == "picard":
        u, rep = picard_slab_solve(grid, f, initial, steady_tol=sol["tol"])
        if not rep.converged:
            raise ConvergenceError("Picard slab chain did not reach a steady state")
        return u
    return steady_state(grid, f, initial, sol["dt"], sol["tol"], sol["max_steps"]).field


def radial_free_boundary(cfg, f, R: float, theta, closed: bool) -> tuple[float, FreeBoundary]:
    """Crossing radius of the radial steady state on the concentric ring of radius R."""
    geom = RingGeometry(cfg.geometry["n"], R, 0.0, "concentric")
    grid = make_grid(geom, "radial-1d", cfg.grid["m_s"], 1)
    u = solve(cfg, grid, f, barrier_field(cfg, grid, R))
    rho = free_boundary(u).rho[0]
    return float(rho), FreeBoundary(np.asarray(theta), np.full(len(theta), rho), closed)


# run bookkeeping ---------------------------------------------------------

class _Run:
    def __init__(self, cfg: ExperimentConfig, out: Path):
        self.cfg = cfg
        self.out = out
        self.stages = []
        self.metrics = []
        self.halted = False
        self.numerical = False

    def stage(self, name, fn):
        if self.halted:
            self.stages.append({"name": name, "status": "skipped"})
            return None
        try:
            ok, detail, value = fn()
        except (ConvergenceError, DivergenceError, InadmissibleError, NumericalFailure,
                np.linalg.LinAlgError, FloatingPointError) as exc:
            self.stages.append({"name": name, "status": "error", "error": str(exc)})
            self.halted = True
            self.numerical = True
            return None
        self.stages.append({"name": name, "status": "pass" if ok else "fail",
                            "detail": _jsonable(detail)})
        if not ok:
            self.halted = True
        return value

    def metric(self, name, value):
        self.metrics.append((name, value))

    def path(self, name) -> Path:
        return self.out / name


def _inventory(out: Path):
    files = []
    for p in sorted(out.rglob("*")):
        if p.is_file() and p.name != "manifest.json":
            data = p.read_bytes()
            files.append({"path": str(p.relative_to(out)), "bytes": len(data),
                          "sha256": hashlib.sha256(data).hexdigest()})
    files.append({"path": "manifest.json"})
    return files


def _write_manifest(out: Path, manifest: RunManifest) -> None:
    tmp = out / ".manifest.json.tmp"
    tmp.write_text(json.dumps(_jsonable(manifest.to_dict()), indent=2, sort_keys=True) + "\n")
    os.replace(tmp, out / "manifest.json")


def versions() -> dict:
    return {"ringlab": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def run_experiment(cfg: ExperimentConfig, output_dir=None) -> RunManifest:
    out = Path(cfg.output_dir if output_dir is None else output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise PermissionError(f"output directory {out} is not writable")
    t0 = time.perf_counter()
    run = _Run(cfg, out)
    {
        "symmetry": _symmetry,
        "audit": _audit,
        "bracket": _bracket,
        "sweep-delta": _sweep,
        "nonuniqueness": _nonuniqueness,
    }[cfg.experiment](run)
    if run.metrics:
        write_rows(run.path(f"{cfg.experiment}.csv"), ["metric", "value"], run.metrics)
    manifest = RunManifest(config=cfg.to_dict(), versions=versions(), stages=run.stages)
    manifest.passed = all(s["status"] == "pass" for s in run.stages)
    manifest.exit_code = 3 if run.numerical else (0 if manifest.passed else 1)
    manifest.wall_time = time.perf_counter() - t0
    manifest.files = _inventory(out)
    _write_manifest(out, manifest)
    return manifest


# experiments -------------------------------------------------------------

def _admissibility(run: _Run, f, R: float):
    def go():
        rep = validate(f, run.cfg.geometry["n"], R)
        run.metric("inf_fprime", rep.inf_fprime_est)
        run.metric("admissibility_bound", rep.bound)
        return rep.admissible, {"inf_fprime": rep.inf_fprime_est, "bound": rep.bound,
                                "bound_strict": rep.bound_thm11}, rep
    return run.stage("admissibility", go)


def _concentric_steady(run: _Run, f, perturb: bool):
    cfg = run.cfg
    geom = make_geometry(cfg, delta=0.0)
    grid = make_cfg_grid(cfg, geom)

    def go():
        init = barrier_field(cfg, grid, geom.R)
        if perturb and grid.m_theta > 1:
            # non-radial start so that symmetry is an outcome, not an input
            B = grid.beta[:, None]
            init = init.copy(init.values + 0.05 * np.sin(np.pi * B) * np.cos(grid.theta)[None, :])
        u = solve(cfg, grid, f, init)
        return True, {"grid": grid.kind, "m_s": grid.m_s, "m_theta": grid.m_theta}, u
    return run.stage("steady", go)


def _audit_stage(run: _Run, f, u: Field):
    cfg = run.cfg

    def go():
        if u.grid.geom.n != 2:
            return True, {"note": "reflection audit runs on 2-D fields only"}, None
        n, R = u.grid.geom.n, u.grid.geom.R
        gs = gradient_sup(u)
        consts = pick_constants(f, n, R, gs, cfg.correction["a0"])
        series = consts.series
        if cfg.correction["K"] != "auto":
            series = build_radial_correction(n, consts.A, cfg.correction["a0"], cfg.correction["K"], R)
        sweep = moving_plane_audit(u, series, consts.C)
        sweep.dump_csv(run.path("audit.csv"))
        run.metric("grad_sup", gs)
        run.metric("correction_A", consts.A)
        run.metric("correction_C", consts.C)
        run.metric("audit_max_reflect_violation", float(np.max(sweep.max_reflect_violation)))
        run.metric("audit_max_du1", float(np.max(sweep.max_du1)))
        run.metric("audit_pass", sweep.passed)
        return sweep.passed, {"A": consts.A, "C": consts.C, "tol": sweep.tol,
                              "reflect": sweep.reflect_pass, "du1": sweep.du1_pass,
                              "radial": sweep.radial_pass}, sweep
    return run.stage("audit", go)


def _domain_circles(geom: RingGeometry):
    return [(0.0, 0.0, 1.0), (-geom.delta, 0.0, geom.R)]


def _symmetry(run: _Run):
    cfg = run.cfg
    f = make_nonlinearity(cfg)
    _admissibility(run, f, cfg.geometry["R"])
    u = _concentric_steady(run, f, perturb=True)
    if u is None:
        return
    dump_field_csv(u, run.path("field.csv"))

    def asym():
        a = asymmetry(u)
        run.metric("asymmetry", a)
        return a <= 1e-3, {"asymmetry": a}, a
    run.stage("asymmetry", asym)

    def fb():
        F = free_boundary(u, warn=False)
        if F.empty:
            return False, {"note": "no sign change"}, F
        F.dump_csv(run.path("free_boundary.csv"))
        run.metric("rho_min", float(np.nanmin(F.rho)))
        run.metric("rho_max", float(np.nanmax(F.rho)))
        nd = nondegeneracy(u, F)
        run.metric("nondegeneracy_C", nd.C_est)
        if cfg.svg:
            write_svg(run.path("contour.svg"), _domain_circles(u.grid.geom),
                      [("u = 0", F.points(), F.closed)], u.grid.geom.R2)
        return not nd.degenerate, {"rho_min": float(np.nanmin(F.rho)),
                                   "rho_max": float(np.nanmax(F.rho)), "C_est": nd.C_est}, F
    run.stage("free-boundary", fb)
    _audit_stage(run, f, u)


def _audit(run: _Run):
    f = make_nonlinearity(run.cfg)
    _admissibility(run, f, run.cfg.geometry["R"])
    u = _concentric_steady(run, f, perturb=False)
    if u is not None:
        _audit_stage(run, f, u)


def _nonuniqueness(run: _Run):
    cfg = run.cfg

    def go():
        rep = nonuniqueness_demo(cfg.geometry["R"], 1e-6, cfg.geometry["n"], max(cfg.grid["m_s"], 16),
                                 g_in=cfg.boundary["g_in"], g_out=cfg.boundary["g_out"])
        write_rows(run.path("nonuniqueness_profiles.csv"), ["r", "u", "w"], zip(rep.r, rep.u, rep.w))
        run.metric("eigenvalue", rep.eigenvalue)
        run.metric("residual_u", rep.residual_u)
        run.metric("residual_u_plus_w", rep.residual_uw)
        run.metric("w_norm", rep.w_norm)
        return rep.passed, {"eigenvalue": rep.eigenvalue, "residual_u": rep.residual_u,
                            "residual_u_plus_w": rep.residual_uw}, rep
    run.stage("nonuniqueness", go)


def _samples_inside(grid, radius: float):
    P = grid.points().reshape(-1, grid.geom.n)
    mask = np.linalg.norm(P, axis=1) <= radius * (1 + 1e-14)
    return P, mask


def _bracket(run: _Run):
    cfg = run.cfg
    f = make_nonlinearity(cfg)
    geom = make_geometry(cfg)
    d = geom.delta
    _admissibility(run, f, geom.R2)

    def bounds():
        rep = delta_bounds_audit(geom, 1000, cfg.seed)
        run.metric("psi_x_over_delta", rep.psi_x_ratio)
        run.metric("psi_xx_over_delta", rep.psi_xx_ratio)
        run.metric("R_minus_t_over_delta", rep.R_minus_t_ratio)
        return rep.passed, {"psi_x_ratio": rep.psi_x_ratio, "psi_xx_ratio": rep.psi_xx_ratio,
                            "lipschitz": rep.lipschitz_ok, "stable": rep.stable}, rep
    run.stage("map-bounds", bounds)

    grid = make_cfg_grid(cfg, geom)

    def shifted():
        u = solve(cfg, grid, f, barrier_field(cfg, grid, geom.R))
        dump_field_csv(u, run.path("field_u.csv"))
        return True, {"grid": grid.kind}, u
    u = run.stage("steady-shifted", shifted)

    def certificate(kind, targets):
        def go():
            rep = choose_epsilon(u, f, geom, kind, targets=targets)
            run.metric(f"{kind}_epsilon", rep.epsilon)
            run.metric(f"{kind}_K", rep.K)
            run.metric(f"{kind}_C1", rep.C1)
            for k, v in rep.residuals.items():
                run.metric(f"{kind}_residual_{k}", v)
            return rep.passed, {"epsilon": rep.epsilon, "K": rep.K, "residuals": rep.residuals}, rep
        return go
    sub = run.stage("certificate-sub", certificate("sub", {"inner": geom.R1, "reference": geom.R}))
    sup = run.stage("certificate-super", certificate("super", {"outer": geom.R2}))

    def evolve(data, name, sign):
        def go():
            v0 = data.pulled[name]
            rep = steady_state(v0.grid, f, v0, cfg.solver["dt"], cfg.solver["tol"], cfg.solver["max_steps"])
            dump_field_csv(rep.field, run.path(f"field_{name}.csv"))
            if sign > 0:
                ok = rep.wt_min >= -MONOTONE_TOL
                run.metric(f"{name}_min_wt", rep.wt_min)
            else:
                ok = rep.wt_max <= MONOTONE_TOL
                run.metric(f"{name}_max_wt", rep.wt_max)
            return ok, {"steps": rep.steps, "wt_min": rep.wt_min, "wt_max": rep.wt_max}, rep.field
        return go
    u1 = run.stage("evolve-inner", evolve(sub, "inner", +1)) if sub is not None else None
    u0 = run.stage("evolve-reference", evolve(sub, "reference", +1)) if sub is not None else None
    u2 = run.stage("evolve-outer", evolve(sup, "outer", -1)) if sup is not None else None

    def bracket():
        P, in1 = _samples_inside(grid, geom.R1)
        uv = u.values.ravel()
        a = interpolate(u1, P[in1], "cubic")
        b = interpolate(u2, P, "cubic")
        low = float(np.max(a - uv[in1]))
        high = float(np.max(uv - b))
        nest_low = bool(np.all(uv[in1][a > BRACKET_TOL] > 0))
        nest_high = bool(np.all(b[uv > BRACKET_TOL] > 0))
        closeness = float(np.max(uv[in1] - a)) / d
        run.metric("max_u1_minus_u", low)
        run.metric("max_u_minus_u2", high)
        run.metric("nesting_inner", nest_low)
        run.metric("nesting_outer", nest_high)
        run.metric("closeness_C", closeness)
        ok = low <= BRACKET_TOL and high <= BRACKET_TOL and nest_low and nest_high
        return ok, {"max_u1_minus_u": low, "max_u_minus_u2": high, "nesting": [nest_low, nest_high],
                    "C": closeness}, None
    run.stage("bracket", bracket)

    def boundaries():
        F, F0 = free_boundary(u, warn=False), free_boundary(u0, warn=False)
        F1, F2 = free_boundary(u1, warn=False), free_boundary(u2, warn=False)
        for name, Fx in (("fb_u", F), ("fb_u0", F0), ("fb_u1", F1), ("fb_u2", F2)):
            Fx.dump_csv(run.path(f"{name}.csv"))
        D = fb_distance(F, F0)
        D12 = fb_distance(F1, F2)
        tol = chord_tolerance(F2)
        run.metric("dist_F_F0", D)
        run.metric("dist_F1_F2", D12)
        if cfg.svg:
            write_svg(run.path("contour.svg"), _domain_circles(geom),
                      [(lbl, Fx.points(), Fx.closed) for lbl, Fx in
                       (("u = 0", F), ("u0 = 0", F0), ("u1 = 0", F1), ("u2 = 0", F2))], geom.R2)
        return D <= D12 + tol, {"dist_F_F0": D, "dist_F1_F2": D12, "chord_tol": tol}, None
    run.stage("free-boundary", boundaries)


SWEEP_HEADER = ["delta", "dist_F_F0", "dist_F1_F2", "ratio", "sep_inner", "sep_outer",
                "closeness", "chord_tol", "sandwich"]


class SweepAborted(NumericalFailure):
    """A sweep point failed; ``table`` holds the rows completed before it."""

    def __init__(self, msg, table):
        super().__init__(msg)
        self.table = table


@dataclass
class SweepTable:
    rows: list
    slope: float = float("nan")
    delta0: float = float("nan")
    curves: tuple | None = None

    def column(self, name) -> np.ndarray:
        k = SWEEP_HEADER.index(name)
        return np.array([r[k] for r in self.rows], dtype=float)

    def finish(self) -> "SweepTable":
        if len(self.rows) >= 2:
            self.slope = float(np.polyfit(np.log(self.column("delta")), np.log(self.column("dist_F_F0")), 1)[0])
        ok = [r[0] for r in self.rows if r[4] > 0 and r[5] > 0]
        self.delta0 = max(ok) if ok else float("nan")
        return self

    def dump_csv(self, path) -> None:
        write_rows(path, SWEEP_HEADER, self.rows)


def sweep_reference(cfg: ExperimentConfig, f):
    geom0 = make_geometry(cfg, delta=0.0)
    grid0 = make_cfg_grid(cfg, geom0)
    u0 = solve(cfg, grid0, f, barrier_field(cfg, grid0, geom0.R))
    F0 = free_boundary(u0, warn=False)
    if F0.empty:
        raise NumericalFailure("reference solve has no free boundary")
    return u0, F0


def sweep_point(cfg: ExperimentConfig, f, u0: Field, F0: FreeBoundary, d: float):
    """One sweep row plus the four free boundaries (F, F0, F1, F2)."""
    R = cfg.geometry["R"]
    geom = make_geometry(cfg, delta=d)
    grid = make_cfg_grid(cfg, geom)
    u = solve(cfg, grid, f, barrier_field(cfg, grid, R))
    F = free_boundary(u, warn=False)
    if F.empty:
        raise NumericalFailure(f"delta = {d}: no free boundary")
    _, F1 = radial_free_boundary(cfg, f, geom.R1, grid.theta, grid.periodic)
    _, F2 = radial_free_boundary(cfg, f, geom.R2, grid.theta, grid.periodic)
    D = fb_distance(F, F0)
    D12 = fb_distance(F1, F2)
    tol = chord_tolerance(F2)
    sep_in = float(np.nanmin(F.rho - 1.0))
    sep_out = float(np.nanmin(grid.outer - F.rho))
    P, inR = _samples_inside(grid, R)
    clo = float(np.max(np.abs(u.values.ravel()[inR] - interpolate(u0, P[inR], "cubic")))) / d
    row = [d, D, D12, D / d, sep_in, sep_out, clo, tol, bool(D <= D12 + tol)]
    return row, (geom, F, F0, F1, F2)


def sweep_delta(cfg: ExperimentConfig) -> SweepTable:
    """Shifted solves over cfg.delta_list against the concentric reference.

    A point that fails to converge raises SweepAborted carrying the partial table.
    """
    if len(cfg.delta_list) < 3:
        raise ValueError("sweep needs at least 3 delta values")
    f = make_nonlinearity(cfg)
    u0, F0 = sweep_reference(cfg, f)
    table = SweepTable([])
    for d in cfg.delta_list:
        try:
            row, curves = sweep_point(cfg, f, u0, F0, d)
        except (ConvergenceError, DivergenceError, NumericalFailure) as exc:
            raise SweepAborted(f"delta = {d}: {exc}", table.finish()) from exc
        table.rows.append(row)
        table.curves = curves
    return table.finish()


def _sweep(run: _Run):
    cfg = run.cfg
    f = make_nonlinearity(cfg)
    deltas = list(cfg.delta_list)
    _admissibility(run, f, cfg.geometry["R"] + deltas[-1])

    def reference():
        u0, F0 = sweep_reference(cfg, f)
        return True, {"rho": float(np.nanmean(F0.rho))}, (u0, F0)
    ref = run.stage("reference", reference)
    table = SweepTable([])
    for d in deltas:
        def point(d=d):
            try:
                row, curves = sweep_point(cfg, f, *ref, d)
            except (ConvergenceError, DivergenceError, NumericalFailure):
                table.dump_csv(run.path("sweep.csv"))
                raise
            table.rows.append(row)
            table.curves = curves
            ok = row[4] > 0 and row[5] > 0
            return ok, dict(zip(SWEEP_HEADER, row)), row
        run.stage(f"delta={d:g}", point)
    table.finish().dump_csv(run.path("sweep.csv"))
    if len(table.rows) < len(deltas):
        return
    dist, d12, tol = table.column("dist_F_F0"), table.column("dist_F1_F2"), table.column("chord_tol")
    ratio, clo = table.column("ratio"), table.column("closeness")
    s_in, s_out = table.column("sep_inner"), table.column("sep_outer")
    slope = table.slope
    spread = float(np.max(ratio) / np.min(ratio))
    run.metric("slope", slope)
    run.metric("delta0", table.delta0)
    run.metric("ratio_spread", spread)

    run.stage("slope", lambda: (abs(slope - 1.0) <= 0.15, {"slope": slope}, slope))
    run.stage("sandwich", lambda: (bool(np.all(dist <= d12 + tol)), {"points": len(table.rows)}, None))
    run.stage("separation", lambda: (bool(np.all(s_in > 0) and np.all(s_out > 0)),
                                     {"min_inner": float(np.min(s_in)),
                                      "min_outer": float(np.min(s_out)), "delta0": table.delta0}, None))
    run.stage("ratio-stability", lambda: (spread <= 1.3, {"spread": spread}, None))
    rel = [abs(a - b) / max(a, b) for a, b in zip(clo[:-1], clo[1:])]
    run.stage("closeness-stability", lambda: (max(rel) <= 0.3, {"relative_changes": rel}, None))
    inversions = [(k, float(dist[k] - dist[k + 1])) for k in range(len(dist) - 1) if dist[k + 1] < dist[k]]
    mono_ok = len(inversions) <= 1 and all(v <= tol[k] for k, v in inversions)
    run.stage("monotone", lambda: (mono_ok, {"inversions": inversions}, None))
    if cfg.svg and table.curves is not None:
        geom, F, F0, F1, F2 = table.curves
        write_svg(run.path("contour.svg"), _domain_circles(geom),
                  [(lbl, Fx.points(), Fx.closed) for lbl, Fx in
                   (("u = 0", F), ("u0 = 0", F0), ("u1 = 0", F1), ("u2 = 0", F2))], geom.R2)
