import csv
import json

import numpy as np
import pytest

from optcz.cli import main, parse_phi


@pytest.fixture(scope="module")
def fitted(tmp_path_factory):
    d = tmp_path_factory.mktemp("run")
    counts = d / "counts.csv"
    assert main(["tomo", "gen", "--phi", "pi", "--seed", "3", "--out", str(counts)]) == 0
    choi = d / "choi.json"
    assert main(["tomo", "fit", "--counts", str(counts), "--out", str(choi)]) == 0
    return d


@pytest.mark.parametrize(
    "text, value",
    [("pi", np.pi), ("0.25pi", np.pi / 4), ("pi/4", np.pi / 4), ("3pi/4", 0.75 * np.pi), ("1.5", 1.5)],
)
def test_parse_phi(text, value):
    assert parse_phi(text) == pytest.approx(value)


def test_design_pi(capsys):
    assert main(["design", "--phi", "pi"]) == 0
    out = capsys.readouterr().out
    assert "p_s        = 0.1111" in out
    assert "theta      = 1.0000" in out


def test_design_zero(capsys):
    assert main(["design", "--phi", "0"]) == 0
    assert "p_s        = 1.0000" in capsys.readouterr().out


def test_design_out_of_range(capsys):
    with pytest.raises(SystemExit) as info:
        main(["design", "--phi", "4.0"])
    assert info.value.code == 2
    assert "phi outside [0, pi]" in capsys.readouterr().err


def test_design_json(tmp_path):
    out = tmp_path / "d.json"
    assert main(["design", "--phi", "0.5pi", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["theta"] == pytest.approx(0.6726243818984174)
    assert doc["residual"] < 1e-10


def test_sweep(tmp_path, capsys):
    out = tmp_path / "sweep.csv"
    assert main(["sweep", "--steps", "41", "--restarts", "4", "--out", str(out)]) == 0
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["phi", "p_s_closed_form", "p_s_brute_force", "theta"]
    assert len(rows) == 42
    assert (tmp_path / "sweep.png").stat().st_size > 0
    assert "minimum (interior)" in capsys.readouterr().out


def test_sweep_stdout(capsys):
    assert main(["sweep", "--steps", "5", "--no-oracle"]) == 0
    assert capsys.readouterr().out.startswith("phi,p_s_closed_form")


def test_simulate(capsys):
    assert main(["simulate", "--phi", "pi", "--input", "DD", "--seed", "1"]) == 0
    out = capsys.readouterr().out
    assert "success probability = 0.111111" in out
    assert "output fidelity = 1.000000" in out


def test_tomo_gen_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        assert main(["tomo", "gen", "--phi", "0.5pi", "--seed", "9", "--shots", "100", "--out", str(path)]) == 0
    assert a.read_text() == b.read_text()
    assert (tmp_path / "a.reference.csv").exists()
    assert json.loads((tmp_path / "a.meta.json").read_text())["seed"] == 9


def test_tomo_fit_artifacts(fitted):
    chi = json.loads((fitted / "choi.json").read_text())
    assert chi["phi"] == pytest.approx(np.pi)
    states = json.loads((fitted / "choi.states.json").read_text())
    assert len(states["states"]) == 36
    assert abs(states["p_s_obs"] - 1 / 9) < 3 * states["p_s_obs_std"]
    assert (fitted / "choi.png").stat().st_size > 0


def test_report(fitted, tmp_path, capsys):
    out = tmp_path / "row.csv"
    args = ["report", "--choi", str(fitted / "choi.json"), "--states", str(fitted / "choi.states.json")]
    assert main(args + ["--phi", "pi", "--out", str(out)]) == 0
    row = dict(zip(*csv.reader(out.open())))
    assert float(row["F_chi"]) > 0.999
    capsys.readouterr()
    assert main(args + ["--phi", "0.5pi"]) == 1
    assert "phi" in capsys.readouterr().err


def test_tomo_fit_truncated(fitted, tmp_path, capsys):
    lines = (fitted / "counts.csv").read_text().splitlines()
    bad = tmp_path / "bad.csv"
    bad.write_text("\n".join(lines[:-10]) + "\n")
    assert main(["tomo", "fit", "--counts", str(bad), "--out", str(tmp_path / "c.json")]) == 1
    assert "missing" in capsys.readouterr().err
    assert not (tmp_path / "c.json").exists()


def test_missing_file(tmp_path, capsys):
    assert main(["tomo", "fit", "--counts", str(tmp_path / "none.csv"), "--out", str(tmp_path / "c.json")]) == 1
    assert "error" in capsys.readouterr().err


def test_oracle(capsys):
    assert main(["oracle", "optimal-b", "--phi", "pi", "--restarts", "8"]) == 0
    assert "closed form       p_s = 0.1111111111" in capsys.readouterr().out


def test_table(tmp_path, capsys):
    assert main(["table", "--phases", "pi", "--shots", "1000", "--seed", "2", "--out-dir", str(tmp_path)]) == 0
    assert (tmp_path / "summary.csv").exists()
    assert (tmp_path / "summary.png").exists()
    assert capsys.readouterr().out.startswith("1pi")
