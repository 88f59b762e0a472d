import csv
import json
import math

import numpy as np
import pytest

from ellipsoid_rh.cli import main
from ellipsoid_rh.errors import ConfigError
from ellipsoid_rh.io import RunConfig, load_config, parse_config_text, write_atomic


def read_csv(path):
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    return {k: np.array([float(r[k]) for r in rows]) for k in rows[0]}


def test_parse_config_text():
    cfg = parse_config_text("b = 0.8  # flattened\n\nl=3\nn_list = 1, 2 5\nbackend = fd\n")
    assert cfg == {"b": 0.8, "l": 3, "n_list": [1, 2, 5], "backend": "fd"}


@pytest.mark.parametrize("text", ["b 0.8", "nonsense = 1", "l = two"])
def test_parse_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


def test_load_config_overrides(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("b = 0.8\nl = 3\n")
    cfg = load_config(p, {"l": 4, "m": None})
    assert (cfg.b, cfg.l, cfg.m) == (0.8, 4, 1)


@pytest.mark.parametrize("kw", [dict(b=0.0), dict(b=1.5), dict(grid_n=63), dict(grid_n=32),
                                dict(l=1, m=2), dict(tol=0.0), dict(backend="x")])
def test_validation(kw):
    with pytest.raises(ConfigError):
        RunConfig(**kw).validate()


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.cfg")


def test_write_atomic_leaves_no_temp(tmp_path):
    target = tmp_path / "sub" / "x.txt"
    write_atomic(target, "one\n")
    write_atomic(target, "two\n")
    assert target.read_text() == "two\n"
    assert [p.name for p in target.parent.iterdir()] == ["x.txt"]


def test_exit_code_config_error(tmp_path):
    assert main(["eig", "--b", "0", "--out", str(tmp_path)]) == 2
    assert main(["eig", "--grid-n", "10", "--out", str(tmp_path)]) == 2
    assert main(["bogus"]) == 2


def test_exit_code_solver_error(tmp_path):
    # l = m = 1 on the sphere: the Coriolis forcing is resonant
    assert main(["stationary", "--b", "1", "--l", "1", "--m", "1", "--grid-n", "64",
                 "--out", str(tmp_path)]) == 3


def test_eig_sphere(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("lmax = 3\nm = 0\nl = 0\n")
    assert main(["eig", "--config", str(cfg), "--b", "1", "--grid-n", "128",
                 "--out", str(tmp_path / "o")]) == 0
    s = read_csv(tmp_path / "o" / "spectrum.csv")
    assert np.allclose(s["lambda"], [0, 2, 6, 12], atol=1e-10)
    man = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert man["command"] == "eig" and "spectrum.csv" in man["files"]


def test_eig_near_sphere_prediction(tmp_path):
    assert main(["eig", "--b", "0.99", "--l", "2", "--m", "1", "--grid-n", "128",
                 "--out", str(tmp_path)]) == 0
    s = read_csv(tmp_path / "spectrum.csv")
    assert np.max(np.abs(s["lambda"] - s["lambda_pred"])) <= 1e-3


def test_stationary_sphere_profile(tmp_path):
    assert main(["stationary", "--b", "1", "--grid-n", "128", "--out", str(tmp_path)]) == 0
    g = read_csv(tmp_path / "g.csv")
    assert np.max(np.abs(g["g"] + 0.5 * np.sin(g["theta"]))) < 1e-10
    summ = json.loads((tmp_path / "summary.json").read_text())
    assert summ["residual_sup"] < 1e-8


def test_traveling_zero_speed_matches_stationary(tmp_path):
    args = ["--grid-n", "128", "--c", "0"]
    assert main(["stationary", *args, "--out", str(tmp_path / "s")]) == 0
    assert main(["traveling", *args, "--out", str(tmp_path / "t")]) == 0
    assert (tmp_path / "s" / "field.csv").read_bytes() == (tmp_path / "t" / "field.csv").read_bytes()


def test_outputs_deterministic(tmp_path):
    for k in ("a", "b"):
        assert main(["traveling", "--grid-n", "64", "--out", str(tmp_path / k)]) == 0
    for name in ("g.csv", "f.csv", "field.csv", "summary.json", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_manifest_reload_reproduces(tmp_path):
    assert main(["stationary", "--b", "0.8", "--grid-n", "64", "--out", str(tmp_path / "a")]) == 0
    man = tmp_path / "a" / "manifest.json"
    assert main(["stationary", "--config", str(man), "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "g.csv").read_bytes() == (tmp_path / "b" / "g.csv").read_bytes()


def test_instability_command(tmp_path):
    assert main(["instability", "--grid-n", "64", "--out", str(tmp_path)]) == 0
    rows = json.loads((tmp_path / "summary.json").read_text())["experiments"]
    assert [r["n"] for r in rows] == [1, 2, 5, 10, 100]
    for r in rows:
        assert r["sup_distance_sq"] >= r["lower_bound"]
        assert math.isclose(r["sup_distance_sq"], r["two_term_value"], rel_tol=1e-10)
        assert (tmp_path / f"distance_n{r['n']}.csv").exists()


def test_evolve_command(tmp_path):
    cfg = tmp_path / "e.cfg"
    cfg.write_text("T = 0.2\ndt = 0.005\nmmax = 4\nsave_every = 10\n")
    assert main(["evolve", "--config", str(cfg), "--grid-n", "64", "--out", str(tmp_path / "o")]) == 0
    summ = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summ["drift"] <= 1e-4
    man = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert len(man["times"]) == len(man["energy"]) == 5
    assert (tmp_path / "o" / "states" / "psi_0000.csv").exists()


def test_evolve_unstable_step_is_solver_error(tmp_path):
    cfg = tmp_path / "e.cfg"
    cfg.write_text("T = 0.1\ndt = 0.05\nmmax = 4\n")
    assert main(["evolve", "--config", str(cfg), "--grid-n", "64", "--out", str(tmp_path / "o")]) == 3
