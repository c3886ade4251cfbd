import csv
import json

import pytest

from conftest import SPECS
from flockwave.cli import main

PLANS = SPECS.parent / "plans"


def body(path):
    return [line for line in path.read_text().splitlines() if not line.startswith("#")]


def rows(path):
    return list(csv.DictReader(body(path)))


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def test_classify_fig6(workdir, capsys):
    assert main(["classify", str(SPECS / "fig6.yaml"), "--out", "o"]) == 0
    out = capsys.readouterr().out
    assert "c+ = 2.5, c- = -1" in out
    assert "TypeI" in out and "all conditions: pass" in out
    assert [p.name for p in workdir.iterdir()] == ["o"]
    assert [p.name for p in (workdir / "o").iterdir()] == ["classify.csv"]


def test_simulate_then_characterize_fig7(workdir, capsys):
    spec = str(SPECS / "fig7.yaml")
    assert main(["simulate", spec, "--out", "o"]) == 0
    traj = workdir / "o" / "trajectory.csv"
    assert traj.read_text().startswith("# tool: flockwave")
    assert main(["characterize", spec, "--trajectory", str(traj), "--out", "o"]) == 0
    got = {r["descriptor"]: r for r in rows(workdir / "o" / "characterize.csv")}
    assert float(got["A"]["measured"]) == pytest.approx(43.182, rel=0.02)
    assert float(got["T1"]["measured"]) == pytest.approx(43.182, rel=0.02)
    assert float(got["T2"]["measured"]) == pytest.approx(453.95, rel=0.02)
    assert float(got["T2"]["predicted"]) == pytest.approx(456.16, abs=1e-2)


def test_validate_reports_residual(workdir, capsys):
    assert main(["validate", str(SPECS / "bad.yaml")]) != 0
    cap = capsys.readouterr()
    err = json.loads(cap.err.strip().splitlines()[0])
    assert err["error"]["module"] == "coupling_model"
    assert "7.5" in err["error"]["message"]
    assert main(["validate", str(SPECS / "fig6.yaml")]) == 0


def test_missing_file_is_structured_error(workdir, capsys):
    assert main(["classify", "nope.yaml"]) == 1
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert "nope.yaml" in err["error"]["message"]
    assert not (workdir / "flockwave-out").exists()


def test_rk4_artifacts_byte_identical(workdir):
    args = ["simulate", str(SPECS / "fig6.yaml"), "--N", "30", "--t-max", "40", "--dt", "0.01", "--n-out", "200"]
    assert main(args + ["--out", "a"]) == 0
    assert main(args + ["--out", "b"]) == 0
    a, b = workdir / "a" / "trajectory.csv", workdir / "b" / "trajectory.csv"
    assert body(a) == body(b)
    assert len(body(a)) == 202


def test_spectrum_artifact(workdir, capsys):
    assert main(["spectrum", str(SPECS / "fig6.yaml"), "--samples", "64", "--out", "o"]) == 0
    assert "spectral margin" in capsys.readouterr().out
    assert len(rows(workdir / "o" / "spectrum.csv")) >= 64


def test_sweep_smoke(workdir, capsys):
    assert main(["sweep", str(PLANS / "smoke.yaml"), "--seed", "1", "--out", "o", "--workers", "1"]) == 0
    names = sorted(p.name for p in (workdir / "o").iterdir())
    assert names == ["aggregates.csv", "records.csv", "slopes.csv", "timings.csv"]
    recs = rows(workdir / "o" / "records.csv")
    assert recs and "wall_time" not in recs[0]

