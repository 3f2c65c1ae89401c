import json

import numpy as np
import pytest

from hele_shaw.cli import main
from hele_shaw.core import MarkerCurve, ellipse
from hele_shaw.moments import MomentSeries


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_weak_empty_start(tmp_path, capsys):
    out = tmp_path / "weak"
    code, _, _ = run(["run", "--solver", "weak", "--domain", "empty", "--tmax", "0.5", "--frames", "5",
                      "--h", "0.015625", "--out", str(out)], capsys)
    assert code == 0
    frames = sorted((out / "frames").glob("frame_*.json"))
    assert len(frames) == 5
    assert [json.loads(f.read_text())["t"] for f in frames] == pytest.approx([0.1, 0.2, 0.3, 0.4, 0.5])
    series = MomentSeries.read_csv(out / "moments.csv")
    assert len(series.times) == 5
    assert (out / "evolution.svg").read_text().startswith("<svg")
    assert "drift" in json.loads((out / "drift.json").read_text())


def test_classical_disc_final_radius(tmp_path, capsys):
    code, stdout, _ = run(["run", "--solver", "classical", "--domain", "disc:0.5", "--T", "0.3",
                           "--dt", "0.002", "--markers", "128", "--out", str(tmp_path / "c")], capsys)
    assert code == 0
    report = json.loads(stdout)
    assert report["final_mean_radius"] == pytest.approx(0.5879, rel=1e-3)
    last = sorted((tmp_path / "c" / "frames").glob("*.json"))[-1]
    curve = MarkerCurve.from_json(json.loads(last.read_text()))
    assert np.abs(np.abs(curve.markers) - 0.5879).max() <= 2e-3


def test_malformed_kappa_names_field(tmp_path, capsys):
    code, _, err = run(["run", "--solver", "classical", "--domain", "disc:0.5", "--kappa", "lin:1",
                        "--out", str(tmp_path)], capsys)
    assert code == 2 and "kappa" in err


@pytest.mark.parametrize("cfg, field", [
    ({"solver": "both"}, "solver"),
    ({"h": -1}, "h"),
    ({"times": [0.2, 0.1]}, "times"),
    ({"box": [1, 1, 2, 2]}, "box"),
    ({"domain": {"type": "curve", "path": "missing.json"}}, "domain"),
    ({"domain": {"type": "star"}}, "domain"),
    ({"colour": "red"}, "colour"),
    ({"solver": "classical", "T": -0.1}, "T"),
])
def test_config_validation(tmp_path, capsys, cfg, field):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    code, _, err = run(["run", "--config", str(path)], capsys)
    assert code == 2 and f"'{field}'" in err


def test_invalid_json_config(tmp_path, capsys):
    path = tmp_path / "cfg.json"
    path.write_text("{not json")
    code, _, err = run(["run", "--config", str(path)], capsys)
    assert code == 2 and "config" in err


def test_runs_are_byte_identical_and_output_dir_env(tmp_path, capsys, monkeypatch):
    cfg = {"solver": "weak", "domain": {"type": "ellipse", "a": 0.4, "b": 0.25},
           "rho": "linear:1,0.2,0", "h": 0.03125, "times": [0.05, 0.1], "seed": 3}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    assert run(["run", "--config", str(path), "--out", str(tmp_path / "a")], capsys)[0] == 0
    monkeypatch.setenv("OUTPUT_DIR", str(tmp_path / "b"))
    assert run(["run", "--config", str(path)], capsys)[0] == 0
    files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    assert files
    for f in files:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_grid_csv_output(tmp_path, capsys):
    out = tmp_path / "g"
    code, _, _ = run(["run", "--domain", "empty", "--tmax", "0.1", "--frames", "1", "--h", "0.03125",
                      "--grid-csv", "--out", str(out)], capsys)
    assert code == 0
    assert (out / "frames" / "u_0000.csv").read_text().startswith("nx,ny,h,ox,oy")


def test_verify_quadrature(capsys):
    code, stdout, _ = run(["verify", "quadrature"], capsys)
    lines = stdout.strip().splitlines()
    assert code == 0 and all(line.startswith("[PASS]") for line in lines[:-1])


def test_verify_unknown_suite(capsys):
    with pytest.raises(SystemExit) as err:
        main(["verify", "nonsense"])
    assert err.value.code == 2
    assert "invalid choice" in capsys.readouterr().err


@pytest.fixture
def ellipse_file(tmp_path):
    path = tmp_path / "e.json"
    ellipse(128, 1.0, 0.6).save(path)
    return path


def test_schwarz_command(ellipse_file, tmp_path, capsys):
    out = tmp_path / "s.json"
    assert run(["schwarz", "--curve", str(ellipse_file), "--out", str(out)], capsys)[0] == 0
    obj = json.loads(out.read_text())
    assert set(obj) >= {"a", "tail", "curve", "g"}
    # b_1 of zbar on an ellipse is -ab
    assert obj["a"][0] == pytest.approx(-0.6, abs=1e-10)


def test_quadcheck_command(capsys):
    code, stdout, _ = run(["quadcheck", "--polymap", "1,0.3", "--K", "6"], capsys)
    assert code == 0 and json.loads(stdout)["residual"] <= 1e-6


def test_quadcheck_with_data_file(tmp_path, capsys):
    from hele_shaw.core import circle
    curve = tmp_path / "c.json"
    circle(256, 0.7, 0.2).save(curve)
    data = tmp_path / "q.json"
    data.write_text(json.dumps({"nodes": [[0.2, 0]], "mult": [1], "coeffs": [[[np.pi * 0.49, 0]]]}))
    code, stdout, _ = run(["quadcheck", "--curve", str(curve), "--data", str(data)], capsys)
    assert code == 0 and json.loads(stdout)["residual"] <= 1e-8


def test_momentflow_command(ellipse_file, capsys):
    code, stdout, _ = run(["momentflow", "--curve", str(ellipse_file), "--field", "cos:1", "--K", "8"], capsys)
    obj = json.loads(stdout)
    assert code == 0 and len(obj["d"]) == 9 and obj["max_abs_difference"] <= 1e-8


def test_momentflow_bad_field(ellipse_file, capsys):
    code, _, err = run(["momentflow", "--curve", str(ellipse_file), "--field", "tan:1"], capsys)
    assert code == 2 and "field" in err


def test_regmax_command(capsys):
    code, stdout, _ = run(["regmax", "--eps", "0.1"], capsys)
    obj = json.loads(stdout)
    assert code == 0
    assert set(obj["params"]) == {"R", "delta1", "delta2", "r", "a"}
    assert obj["checks"]["equal_on_ball"] and obj["checks"]["equal_psi_outside"]
    assert obj["checks"]["c2_small"] and obj["checks"]["subharmonic"]


def test_solver_error_exit_status(tmp_path, capsys):
    code, _, err = run(["run", "--domain", "empty", "--tmax", "0.5", "--frames", "1", "--h", "0.0625",
                        "--box=-0.3,-0.3,0.3,0.3", "--out", str(tmp_path)], capsys)
    assert code == 1 and "BoxTooSmallError" in err
