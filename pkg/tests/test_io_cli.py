import csv
import io
import json
import math
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from wqedbands import ChainConfig, PhaseMode, transmittance_reflectance
from wqedbands.bandgap import ANTIBRAGG_BRAGG, TETRAMER
from wqedbands.cli import main
from wqedbands.io import ConfigError, config_to_dict, csv_text, fmt, json_text, load_config, parse_config_text

PI = math.pi
CONFIGS = Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture
def runner():
    return CliRunner()


def _cfg(tmp_path, body, name="chain.cfg"):
    path = tmp_path / name
    path.write_text(body)
    return str(path)


def _rows(text):
    return list(csv.reader(io.StringIO(text)))


def _err(result):
    return json.loads(result.stderr.strip().splitlines()[-1])


# -- config parsing -----------------------------------------------------------------

def test_parse_full_config():
    cfg = parse_config_text("cells = 15\natoms_per_cell = 2\ncouplings = 0.5  # J\nalpha0_pi = 1.5\n"
                            "beta0_pi = 3\ngamma = 2\nomega_a = 5e4\nphase_mode = FULL\n")
    assert cfg == ChainConfig(15, 2, (0.5,), 1.5 * PI, 3 * PI, 2.0, 5e4, PhaseMode.FULL)


def test_parse_defaults_and_eta():
    cfg = parse_config_text("cells = 3\natoms_per_cell = 1\n")
    assert cfg.beta0 == PI and cfg.gamma == 1 and cfg.phase_mode is PhaseMode.MARKOV
    tet = parse_config_text("cells=4\natoms_per_cell=4\ncouplings=0.2\neta=5\nalpha0_pi=0.5\nbeta0_pi=2\n")
    assert tet.couplings == (0.2, 1.0, 0.2)


def test_shipped_configs_load():
    for path in sorted(CONFIGS.glob("*.cfg")):
        cfg, text = load_config(path)
        assert text and cfg.cells >= 1


@pytest.mark.parametrize("body,line,field", [
    ("cells = 3\natoms_per_cell = 2\ncouplings = 1, 2\n", 3, "couplings"),
    ("cells = 3\natoms_per_cell = 2\ncolour = red\n", 3, "colour"),
    ("cells = x\natoms_per_cell = 2\n", 1, "cells"),
    ("cells = 2.5\natoms_per_cell = 1\n", 1, "cells"),
    ("cells = 0\natoms_per_cell = 1\n", 1, "cells"),
    ("atoms_per_cell = 1\n", None, "cells"),
    ("cells = 2\natoms_per_cell = 1\ngamma = -1\n", 3, "gamma"),
    ("cells = 2\natoms_per_cell = 1\nphase_mode = fast\n", 3, "phase_mode"),
    ("cells = 2\natoms_per_cell = 3\ncouplings = 1, 1\nalpha0_pi = 1\nbeta0_pi = 1.5\n", 5, "beta0_pi"),
    ("cells = 2\natoms_per_cell = 2\ncouplings = 1\neta = 2\n", 4, "eta"),
])
def test_config_errors_name_line_and_field(body, line, field):
    with pytest.raises(ConfigError) as info:
        parse_config_text(body)
    assert info.value.line == line and info.value.field == field


def test_config_round_trip_dict():
    cfg = ChainConfig.dimer(4, 0.5, PI / 2, PI)
    assert config_to_dict(cfg)["couplings"] == [0.5]


# -- serialisation --------------------------------------------------------------------

def test_fmt_round_trips_doubles():
    rng = np.random.default_rng(0)
    for x in rng.standard_normal(500) * 10.0 ** rng.integers(-300, 300, 500):
        assert float(fmt(x)) == x
    assert fmt(float("nan")) == "nan" and fmt(-math.inf) == "-inf"


def test_csv_and_json_text():
    text = csv_text([(1, 0.1, math.inf)], ["k", "x", "y"])
    assert text == "k,x,y\n1,0.10000000000000001,inf\n"
    assert json.loads(json_text({"a": math.nan, "b": np.float64(2.5)})) == {"a": "nan", "b": 2.5}


# -- spectrum -------------------------------------------------------------------------

def test_spectrum_csv(runner, tmp_path):
    path = _cfg(tmp_path, "cells = 6\natoms_per_cell = 2\ncouplings = 0.5\nalpha0_pi = 0.5\nbeta0_pi = 1\n")
    res = runner.invoke(main, ["spectrum", "--config", path, "--dmin", "-2", "--dmax", "2", "--points", "9"])
    assert res.exit_code == 0, res.output
    assert "\r" not in res.stdout
    rows = _rows(res.stdout)
    assert rows[0] == ["delta_over_gamma", "T", "R", "y", "zeta"]
    assert len(rows) == 10
    cfg = load_config(path)[0]
    for row in rows[1:]:
        d, T, R = float(row[0]), float(row[1]), float(row[2])
        s = transmittance_reflectance(cfg, d)
        assert (T, R) == (s.T, s.R)


def test_spectrum_scales_by_gamma(runner, tmp_path):
    path = _cfg(tmp_path, "cells = 3\natoms_per_cell = 1\nbeta0_pi = 0.5\ngamma = 2\n")
    res = runner.invoke(main, ["spectrum", "--config", path, "--dmin", "0", "--dmax", "0", "--points", "1"])
    assert _rows(res.stdout)[1][:3] == ["0", "0", "1"]


def test_spectrum_empty_grid(runner, tmp_path):
    path = _cfg(tmp_path, "cells = 3\natoms_per_cell = 1\n")
    res = runner.invoke(main, ["spectrum", "--config", path, "--dmin", "1", "--dmax", "-1", "--points", "5"])
    assert res.exit_code == 2
    assert "dmin" in _err(res)["message"] or "empty" in _err(res)["message"]


def test_bad_config_exit_code(runner, tmp_path):
    path = _cfg(tmp_path, "cells = 3\natoms_per_cell = 2\n")
    res = runner.invoke(main, ["spectrum", "--config", path])
    assert res.exit_code == 2
    err = _err(res)
    assert err["field"] == "couplings" and err["exit_code"] == 2
    missing = runner.invoke(main, ["spectrum", "--config", str(tmp_path / "none.cfg")])
    assert missing.exit_code == 2


def test_output_is_deterministic(runner, tmp_path, monkeypatch):
    path = str(CONFIGS / "dimer_zero_reflection.cfg")
    outs = []
    for threads in ("1", "4"):
        monkeypatch.setenv("WQED_THREADS", threads)
        out = tmp_path / f"s{threads}.csv"
        res = runner.invoke(main, ["spectrum", "--config", path, "--points", "2001", "--out", str(out)])
        assert res.exit_code == 0
        outs.append(out.read_bytes())
        man = json.loads((tmp_path / f"s{threads}.csv.manifest.json").read_text())
        assert man["outputs"]["main"]["sha256"]
    assert outs[0] == outs[1]


def test_manifest_and_replay(runner, tmp_path):
    path = str(CONFIGS / "dimer_subradiant.cfg")
    out = tmp_path / "modes.json"
    assert runner.invoke(main, ["modes", "--config", path, "--points", "101", "--out", str(out)]).exit_code == 0
    man = json.loads(Path(str(out) + ".manifest.json").read_text())
    assert man["command"] == "modes" and man["tool_version"]
    assert set(man["outputs"]) == {"main", "components"}
    assert man["config_text"] == Path(path).read_text()
    res = runner.invoke(main, ["replay", str(out) + ".manifest.json", "--check"])
    assert res.exit_code == 0 and "identical" in res.stdout
    Path(man["outputs"]["components"]["path"]).unlink()
    assert runner.invoke(main, ["replay", str(out) + ".manifest.json"]).exit_code == 0
    assert Path(man["outputs"]["components"]["path"]).exists()
    man["outputs"]["main"]["sha256"] = "0" * 64
    Path(str(out) + ".manifest.json").write_text(json.dumps(man))
    assert runner.invoke(main, ["replay", str(out) + ".manifest.json", "--check"]).exit_code == 1


# -- bandgaps -------------------------------------------------------------------------

def test_bandgaps_analytic(runner, tmp_path):
    path = _cfg(tmp_path, "cells = 15\natoms_per_cell = 2\ncouplings = 2\nalpha0_pi = 0.5\nbeta0_pi = 3\n")
    res = runner.invoke(main, ["bandgaps", "--config", path, "--analytic"])
    assert res.exit_code == 0
    rep = json.loads(res.stdout)
    assert len(rep["gaps"]) == 1 and rep["gaps"][0]["width"] == pytest.approx(5, abs=1e-8)
    assert rep["analytic"]["regime"] == ANTIBRAGG_BRAGG
    assert rep["analytic"]["max_deviation"] < 1e-6


def test_bandgaps_analytic_no_regime(runner, tmp_path):
    path = _cfg(tmp_path, "cells = 15\natoms_per_cell = 2\ncouplings = 2\nalpha0_pi = 0.52\nbeta0_pi = 3\n")
    res = runner.invoke(main, ["bandgaps", "--config", path, "--analytic"])
    assert res.exit_code == 4
    assert _err(res)["nearest_regime"] == ANTIBRAGG_BRAGG
    assert runner.invoke(main, ["bandgaps", "--config", path]).exit_code == 0


def test_bandgaps_sweep_j_v_shape(runner, tmp_path):
    path = _cfg(tmp_path, "cells = 15\natoms_per_cell = 2\ncouplings = 0\nalpha0_pi = 1.5\nbeta0_pi = 2.5\n")
    res = runner.invoke(main, ["bandgaps", "--config", path, "--range", "-4", "4",
                               "--sweep-j", "0", "1", "11"])
    assert res.exit_code == 0
    pts = json.loads(res.stdout)["sweep"]["points"]
    central = []
    for p in pts:
        central.append(sum(g["width"] for g in p["gaps"]))
    assert min(range(len(pts)), key=lambda k: central[k]) == 5
    assert pts[5]["gaps"] == []


def test_bandgaps_sweep_b_ab_constant_width(runner, tmp_path):
    path = _cfg(tmp_path, "cells = 15\natoms_per_cell = 2\ncouplings = 1\nalpha0_pi = 1\nbeta0_pi = 2.5\n")
    res = runner.invoke(main, ["bandgaps", "--config", path, "--sweep-j", "0.5", "3", "6"])
    widths = [p["gaps"][0]["width"] for p in json.loads(res.stdout)["sweep"]["points"]]
    assert np.allclose(widths, 2.0, atol=1e-8)


def test_bandgaps_sweep_eta(runner):
    res = runner.invoke(main, ["bandgaps", "--config", str(CONFIGS / "tetramer_flat.cfg"), "--range", "-20", "20",
                               "--resolution", "0.001", "--analytic", "--sweep-eta", "2", "6", "3"])
    assert res.exit_code == 0, res.stderr
    pts = json.loads(res.stdout)["sweep"]["points"]
    assert [p["eta"] for p in pts] == [2.0, 4.0, 6.0]
    assert all(p["analytic"]["regime"] == TETRAMER for p in pts)


def test_bandgaps_sweep_eta_needs_tetramer(runner):
    res = runner.invoke(main, ["bandgaps", "--config", str(CONFIGS / "dimer_subradiant.cfg"),
                               "--sweep-eta", "1", "2", "2"])
    assert res.exit_code == 2


# -- dispersion -----------------------------------------------------------------------

def test_dispersion_full_mode_refused(runner):
    res = runner.invoke(main, ["dispersion", "--config", str(CONFIGS / "dimer_full_phase.cfg")])
    assert res.exit_code == 5
    assert "markov" in _err(res)["message"]


def test_dispersion_csv(runner):
    res = runner.invoke(main, ["dispersion", "--config", str(CONFIGS / "dimer_linear_dispersion.cfg"),
                               "--range", "-1", "1", "--resolution", "0.01"])
    assert res.exit_code == 0
    rows = _rows(res.stdout)
    assert rows[0] == ["band_index", "delta_over_gamma", "qL_over_pi", "dDelta_dqL_over_gamma"]
    q = np.array([float(r[2]) for r in rows[1:]])
    assert np.all((q >= 0) & (q <= 1))


def test_dispersion_gap_only_range(runner, tmp_path):
    path = _cfg(tmp_path, "cells = 15\natoms_per_cell = 2\ncouplings = 2\nalpha0_pi = 0.5\nbeta0_pi = 3\n")
    res = runner.invoke(main, ["dispersion", "--config", path, "--range", "-1", "1"])
    assert res.exit_code == 0
    assert len(_rows(res.stdout)) == 1


# -- modes ----------------------------------------------------------------------------

def test_modes_outputs_agree_with_spectrum(runner, tmp_path):
    path = str(CONFIGS / "dimer_subradiant.cfg")
    out = tmp_path / "m.json"
    args = ["--config", path, "--dmin", "-3", "--dmax", "3", "--points", "61"]
    assert runner.invoke(main, ["modes", *args, "--out", str(out)]).exit_code == 0
    summary = json.loads(out.read_text())
    assert summary["n_modes"] == 12
    assert summary["gamma_ms_over_gamma"] > 0
    comp = _rows((tmp_path / "m_components.csv").read_text())
    assert comp[0][-1] == "R_modes" and len(comp[0]) == 14
    spec = _rows(runner.invoke(main, ["spectrum", *args]).stdout)
    for a, b in zip(comp[1:], spec[1:]):
        assert float(a[0]) == float(b[0])
        assert abs(float(a[-1]) - float(b[2])) < 1e-6


def test_modes_single_atom(runner, tmp_path):
    path = _cfg(tmp_path, "cells = 1\natoms_per_cell = 1\n")
    res = runner.invoke(main, ["modes", "--config", path])
    summary = json.loads(res.stdout)
    assert summary["n_modes"] == 1 and summary["gamma_ms_over_gamma"] is None
    mode = summary["modes"][0]
    assert abs(mode["delta_tilde_over_gamma"]) < 1e-15 and mode["gamma_tilde_over_gamma"] == pytest.approx(1)


def test_modes_degenerate(runner, tmp_path):
    path = _cfg(tmp_path, "cells = 1\natoms_per_cell = 3\ncouplings = 0, 0\nalpha0_pi = 0\nbeta0_pi = 1\n")
    res = runner.invoke(main, ["modes", "--config", path])
    assert res.exit_code == 6
    assert "suggestion" in _err(res)


def test_modes_full_mode_refused(runner):
    assert runner.invoke(main, ["modes", "--config", str(CONFIGS / "dimer_full_phase.cfg")]).exit_code == 5


# -- validate -------------------------------------------------------------------------

def test_validate_random(runner):
    res = runner.invoke(main, ["validate", "--samples", "100", "--seed", "3"])
    assert res.exit_code == 0, res.stderr
    rep = json.loads(res.stdout)
    assert rep["max_deviation"] < 1e-9 and rep["samples"] == 100


def test_validate_pinned_config(runner):
    res = runner.invoke(main, ["validate", "--config", str(CONFIGS / "tetramer_flat.cfg"), "--samples", "1"])
    assert res.exit_code == 0
    assert json.loads(res.stdout)["worst_config"]["atoms_per_cell"] == 4


def test_validate_detects_broken_build(runner, monkeypatch):
    import wqedbands.cli as cli

    real = cli.chain_amplitudes

    def broken(config, delta):
        t, r = real(config, delta)
        return t * (1 + 1e-6), r

    monkeypatch.setattr(cli, "chain_amplitudes", broken)
    res = runner.invoke(main, ["validate", "--samples", "20"])
    assert res.exit_code == 1
    err = _err(res)
    assert err["max_deviation"] > 1e-9 and "config" in err


def test_version(runner):
    res = runner.invoke(main, ["--version"])
    assert res.exit_code == 0 and "wqed-bands" in res.stdout
