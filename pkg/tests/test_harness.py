import json

import numpy as np
import pytest

from ringlab.harness import ConfigError, load_config, sweep_delta
from ringlab.harness.cli import main
from ringlab.harness.config import apply_overrides, validate_config

SMALL = ["grid.m_s=48", "grid.m_theta=48"]


def write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc) if not isinstance(doc, str) else doc)
    return p


def run_cli(tmp_path, experiment, *extra, out="out"):
    return main([experiment, "--out", str(tmp_path / out), "-q", *extra])


def test_empty_config_needs_experiment(tmp_path):
    p = write(tmp_path, "")
    with pytest.raises(ConfigError, match="missing field: experiment"):
        load_config(p)


def test_defaults_fill_in():
    cfg = load_config(overrides=['experiment="symmetry"'])
    assert cfg.geometry["R"] == 2.0 and cfg.grid["m_s"] == 128
    assert cfg.solver["scheme"] == "imex"


@pytest.mark.parametrize("doc,match", [
    ({"experiment": "symmetry", "geometry": {"R": 0.5}}, "geometry.R"),
    ({"experiment": "symmetry", "geometry": {"n": 4}}, "geometry.n"),
    ({"experiment": "symmetry", "colour": 1}, "unknown field: colour"),
    ({"experiment": "symmetry", "grid": {"m_s": 2}}, "grid.m_s"),
    ({"experiment": "sweep-delta", "delta_list": [0, 0.01, 0.02]}, "delta_list"),
    ({"experiment": "sweep-delta", "delta_list": [0.02, 0.01, 0.04]}, "delta_list"),
    ({"experiment": "sweep-delta", "delta_list": [0.01, 0.02]}, "at least 3"),
    ({"experiment": "sweep-delta", "delta_list": [0.01, 0.2, 0.6]}, "delta_list"),
    ({"experiment": "bracket"}, "geometry.delta"),
    ({"experiment": "symmetry", "nonlinearity": {"family": "quad-exp", "c": -1}}, "nonlinearity.c"),
    ({"experiment": "symmetry", "barrier": {"lambda": -0.5}}, "barrier.lambda"),
    ({"experiment": "nope"}, "experiment"),
])
def test_config_diagnostics(doc, match):
    with pytest.raises(ConfigError, match=match):
        validate_config(doc)


def test_overrides():
    doc = apply_overrides({"experiment": "symmetry"}, ["geometry.R=3", "nonlinearity.family=quad-exp",
                                                       "nonlinearity.c=0.2"])
    cfg = validate_config(doc)
    assert cfg.geometry["R"] == 3 and cfg.nonlinearity["c"] == 0.2


def test_experiment_mismatch(tmp_path):
    p = write(tmp_path, {"experiment": "audit"})
    assert main(["symmetry", "--config", str(p), "-q"]) == 2


def test_cli_config_error_exit(tmp_path):
    assert run_cli(tmp_path, "symmetry", "--set", "geometry.R=0.5") == 2
    p = write(tmp_path, "{not json")
    assert run_cli(tmp_path, "symmetry", "--config", str(p)) == 2


def test_symmetry_run(tmp_path):
    assert run_cli(tmp_path, "symmetry", "--set", "grid.m_s=64", "--set", "grid.m_theta=64") == 0
    out = tmp_path / "out"
    man = json.loads((out / "manifest.json").read_text())
    assert man["passed"] and man["exit_code"] == 0
    names = {s["name"]: s["status"] for s in man["stages"]}
    assert names == {"admissibility": "pass", "steady": "pass", "asymmetry": "pass",
                     "free-boundary": "pass", "audit": "pass"}
    listed = {f["path"] for f in man["files"]}
    on_disk = {str(p.relative_to(out)) for p in out.rglob("*") if p.is_file()}
    assert listed == on_disk
    assert not (out / ".manifest.json.tmp").exists()
    rows = dict(line.split(",") for line in (out / "symmetry.csv").read_text().splitlines()[1:])
    assert float(rows["asymmetry"]) <= 1e-3
    assert (out / "audit.csv").read_text().startswith("lambda,max_reflect_violation,max_du1\n")
    assert (out / "free_boundary.csv").read_text().startswith("theta,rho,x1,x2\n")
    assert (out / "contour.svg").read_text().startswith("<svg")


def test_svg_optional(tmp_path):
    assert run_cli(tmp_path, "audit", *sum((["--set", s] for s in SMALL), []), "--set", "svg=false") == 0
    assert not (tmp_path / "out" / "contour.svg").exists()


def test_check_failure_skips_later_stages(tmp_path):
    code = run_cli(tmp_path, "symmetry", "--set", "geometry.R=4", "--set",
                   'nonlinearity={"family": "quad-exp", "c": 2.0}', *sum((["--set", s] for s in SMALL), []))
    assert code == 1
    man = json.loads((tmp_path / "out" / "manifest.json").read_text())
    status = [s["status"] for s in man["stages"]]
    assert status[0] == "fail" and set(status[1:]) == {"skipped"}


def test_numerical_failure_exit(tmp_path):
    code = run_cli(tmp_path, "audit", "--set", "solver.max_steps=3", *sum((["--set", s] for s in SMALL), []))
    assert code == 3
    man = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert any(s["status"] == "error" for s in man["stages"])


def test_determinism(tmp_path):
    args = ["--set", "geometry.delta=0.04", *sum((["--set", s] for s in SMALL), [])]
    assert run_cli(tmp_path, "bracket", *args, out="a") == 0
    assert run_cli(tmp_path, "bracket", *args, out="b") == 0
    csvs = sorted(p.name for p in (tmp_path / "a").glob("*.csv"))
    assert "bracket.csv" in csvs and "fb_u1.csv" in csvs
    for name in csvs:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name


def test_nonuniqueness_run(tmp_path):
    assert run_cli(tmp_path, "nonuniqueness", "--set", "grid.m_s=256") == 0
    lines = (tmp_path / "out" / "nonuniqueness_profiles.csv").read_text().splitlines()
    assert lines[0] == "r,u,w" and len(lines) == 257


def test_user_table_nonlinearity(tmp_path):
    s = np.linspace(0, 10, 41)
    table = tmp_path / "f.csv"
    table.write_text("s,f\n" + "".join(f"{a:.17g},{-0.1 * a * a * np.exp(-a):.17g}\n" for a in s))
    cfg = write(tmp_path, {"experiment": "audit",
                           "nonlinearity": {"family": "user-table", "table_path": str(table)},
                           "grid": {"m_s": 48, "m_theta": 48}})
    assert main(["audit", "--config", str(cfg), "--out", str(tmp_path / "out"), "-q"]) == 0


def test_sweep_table():
    cfg = load_config(overrides=['experiment="sweep-delta"', *SMALL])
    table = sweep_delta(cfg)
    assert len(table.rows) == 4
    assert abs(table.slope - 1.0) <= 0.15
    assert np.all(table.column("sep_inner") > 0) and np.all(table.column("sep_outer") > 0)
    assert table.delta0 == 0.08
