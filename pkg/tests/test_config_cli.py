import json
import subprocess
import sys

import pytest

from granular_basin.cli import main
from granular_basin.config import ConfigError, load_config, parse_lines

BASE = """\
# reference double well
potential.coeffs = [0, 0, -0.5, 0, 0.25]
model.alpha = 1.0
model.sigma = 0.5   # trailing comment
init.kind = steady_family
init.m_fraction = 0.5
sim.n_particles = 400
sim.t_final = 0.5
pde.t_final = 0.5
pde.n_cells = 128
check.n_delta = 16
quadrature.n_scan = 512
grid.n_cells = 512
"""


@pytest.fixture
def cfg_path(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text(BASE)
    return p


def test_parse_and_defaults(cfg_path):
    cfg = load_config(cfg_path, ["model.sigma=0.4"], seed=12)
    assert cfg["model.sigma"] == 0.4
    assert cfg["seed"] == 12
    assert cfg["pde.scheme"] == "chang_cooper"
    assert cfg.init_params() == {"m_fraction": 0.5}
    assert cfg.potential().a == pytest.approx(1.0)


@pytest.mark.parametrize("text, needle", [
    ("model.alpha = 1\nbogus.key = 3\n", "line 2: bogus.key"),
    ("model.alpha = [1, 2]\n", "line 1: model.alpha"),
    ("model.alpha = -1\n", "line 1: model.alpha"),
    ("just words\n", "line 1"),
    ("sim.n_particles = 1.5\n", "sim.n_particles"),
])
def test_line_numbered_errors(tmp_path, text, needle):
    p = tmp_path / "bad.cfg"
    p.write_text(text)
    with pytest.raises(ConfigError, match=needle):
        load_config(p)


def test_bad_potential_names_key(tmp_path):
    p = tmp_path / "bad.cfg"
    p.write_text("potential.coeffs = [0, 0, 0.5, 0, 0.25]\n")
    with pytest.raises(ConfigError, match="line 1: potential.coeffs"):
        load_config(p).potential()


def test_parse_lines_values():
    out = parse_lines(['pde.scheme = central', 'init.file = "a b.csv"', 'check.mirror = true'])
    assert out["pde.scheme"][0] == "central"
    assert out["init.file"][0] == "a b.csv"
    assert out["check.mirror"][0] is True


def test_analyze(cfg_path, tmp_path):
    out = tmp_path / "a"
    assert main(["analyze", "--config", str(cfg_path), "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["m_sigma"] > 0 and not rep["unique_steady_state"]
    for name in ("nu_plus.csv", "nu_zero.csv", "nu_minus.csv", "chi.csv", "chi.svg"):
        assert (out / name).is_file()
    assert (out / "nu_plus.csv").read_text().splitlines()[0] == "x,density"


def test_analyze_unique(cfg_path, tmp_path):
    out = tmp_path / "u"
    assert main(["analyze", "--config", str(cfg_path), "--out", str(out), "--set", "model.sigma=2.0"]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["m_sigma"] is None and rep["unique_steady_state"]
    assert not (out / "nu_plus.csv").exists()


def test_malformed_coeffs_exit(cfg_path, tmp_path, capsys):
    rc = main(["analyze", "--config", str(cfg_path), "--out", str(tmp_path / "x"),
               "--set", "potential.coeffs=[0, 0, 0.5]"])
    assert rc == 2
    assert "potential.coeffs" in capsys.readouterr().err


def test_check(cfg_path, tmp_path):
    out = tmp_path / "c"
    assert main(["check", "--config", str(cfg_path), "--out", str(out), "--set", "check.mirror=true"]) == 0
    res = json.loads((out / "condition.json").read_text())
    assert res["predicted_limit"] == "nu_plus"
    assert (out / "delta_table.csv").read_text().startswith("delta,lhs,rhs")
    out0 = tmp_path / "c0"
    assert main(["check", "--config", str(cfg_path), "--out", str(out0), "--set", "init.m_fraction=0"]) == 0
    assert json.loads((out0 / "condition.json").read_text())["best"] is None


def test_check_missing_file(cfg_path, tmp_path, capsys):
    rc = main(["check", "--config", str(cfg_path), "--out", str(tmp_path / "m"),
               "--set", "init.kind=tabulated", "--set", "init.file=/no/such/density.csv"])
    assert rc == 2
    assert "/no/such/density.csv" in capsys.readouterr().err


def test_numerical_failure_exit(cfg_path, tmp_path):
    rc = main(["simulate", "particles", "--config", str(cfg_path), "--out", str(tmp_path / "n"),
               "--set", "sim.dt=0.4"])
    assert rc == 3


@pytest.mark.parametrize("engine", ["particles", "pde"])
def test_simulate(cfg_path, tmp_path, engine):
    out = tmp_path / engine
    assert main(["simulate", engine, "--config", str(cfg_path), "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["engine"] == engine
    assert (out / "mean.svg").is_file() and (out / "w2.svg").is_file()
    if engine == "pde":
        assert (out / "diagnostics.csv").read_text().startswith("t,mass,m1,free_energy,w2_plus")
        assert (out / "snapshots.csv").read_text().startswith("t,x,density")
    else:
        assert (out / "trajectory.csv").read_text().startswith("t,mean,w2_plus,w2_zero,w2_minus")


def test_position_dumps(cfg_path, tmp_path):
    out = tmp_path / "dump"
    assert main(["simulate", "particles", "--config", str(cfg_path), "--out", str(out),
                 "--set", "sim.dump_positions=true", "--set", "sim.record_every=250"]) == 0
    assert len(list(out.glob("positions_*.csv"))) == 3


def test_sweep_rows(cfg_path, tmp_path):
    out = tmp_path / "s"
    assert main(["sweep", "--config", str(cfg_path), "--out", str(out), "--set", "sweep.values=[0.3, 0.7]",
                 "--set", "sweep.family=mirror", "--jobs", "2"]) == 0
    rows = (out / "sweep.csv").read_text().splitlines()
    assert rows[0].startswith("index,param,condition_pass,delta,predicted_limit,simulated_limit")
    assert len(rows) == 3
    assert sorted(p.name for p in (out / "rows").iterdir()) == ["row_0000.json", "row_0001.json"]
    row = json.loads((out / "rows" / "row_0000.json").read_text())
    assert row["predicted_limit"] == "nu_minus"
    assert row["simulated_limit"] in {"nu_plus", "nu_minus", "nu_zero", "undecided"}


def test_module_entry_point(cfg_path, tmp_path):
    r = subprocess.run([sys.executable, "-m", "granular_basin", "sigma-c", "--config", str(cfg_path),
                        "--out", str(tmp_path / "sc")], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    res = json.loads((tmp_path / "sc" / "sigma_c.json").read_text())
    assert res["sigma_c"] == pytest.approx(0.95598, abs=1e-4)


def test_json_round_trip(cfg_path, tmp_path):
    out = tmp_path / "rt"
    main(["analyze", "--config", str(cfg_path), "--out", str(out)])
    text = (out / "report.json").read_text()
    assert json.dumps(json.loads(text), indent=2, sort_keys=True) + "\n" == text
