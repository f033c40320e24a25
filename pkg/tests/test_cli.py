import json
from fractions import Fraction
import subprocess
import sys

import pytest

from kontsevich.cli import main, make_config, parse_grid, run
from kontsevich.errors import ConfigError


def _write(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def _run(tmp_path, cfg, *extra, fmt="json"):
    out = tmp_path / f"out.{fmt}"
    code = main(["--config", _write(tmp_path, cfg), "--format", fmt, "--out", str(out), *extra])
    return code, out.read_text()


HYPER = {"command": "hypercoh", "dim": 1, "f_exp": [2], "alpha": "0"}


def test_hypercoh_default_grid(tmp_path):
    code, text = _run(tmp_path, HYPER)
    report = json.loads(text)
    assert code == 0
    assert set(report) == {"command", "input", "tables", "verdicts", "timing"}
    assert report["verdicts"]["independence"] is True
    assert len(report["tables"]["dims"]) == 9
    assert all(r["dims"] == [0, 2, 0] for r in report["tables"]["dims"])
    assert report["timing"] is None


def test_json_is_deterministic(tmp_path):
    first = _run(tmp_path, HYPER)[1]
    second = _run(tmp_path, HYPER)[1]
    assert first == second
    local = {"command": "local-check", "charts": [{"ell": 1, "ell1": 1, "k": [2]}], "samples": 3}
    assert _run(tmp_path, local, "--seed", "5")[1] == _run(tmp_path, local, "--seed", "5")[1]


def test_csv_rows_match_grid(tmp_path):
    code, text = _run(tmp_path, HYPER, "--grid", "0,0;1,0;1/2,-1;2,2", fmt="csv")
    assert code == 0
    lines = text.strip().splitlines()
    assert lines[0] == "lambda,tau,h0,h1,h2"
    assert len(lines) - 1 == 4
    assert "1/2,-1,0,2,0" in lines


def test_residue_command(tmp_path):
    code, text = _run(tmp_path, {"command": "residue", "dim": 1, "f_exp": [2], "alpha": "1/2"})
    report = json.loads(text)
    assert code == 0
    spectrum = report["tables"]["spectra"]["1"]
    assert len(spectrum) == 2
    assert all(Fraction(-1, 2) <= Fraction(s) < Fraction(1, 2) for s in spectrum)


def test_corrupted_chart_exit_2(tmp_path, capsys):
    code, text = _run(tmp_path, {"command": "local-check", "charts": [{"ell": 1, "ell1": 1, "k": [0]}]})
    assert code == 2
    assert json.loads(text)["errors"][0].startswith("ConfigError")


@pytest.mark.parametrize("cfg", [
    {**HYPER, "grid": []},
    {**HYPER, "grid": [["1", "0"]]},
    {**HYPER, "colour": "red"},
    {**HYPER, "alpha": "0.5"},
    {"command": "nope"},
    {"command": "hypercoh", "dim": 1, "f_exp": [2, 1]},
])
def test_config_errors(cfg):
    with pytest.raises(ConfigError):
        cfg_obj = make_config(cfg)
        report = run(cfg_obj)
        if report.status == 2:
            raise ConfigError(report.errors[0])


@pytest.mark.parametrize("cfg", [
    {**HYPER, "grid": []},
    {**HYPER, "colour": "red"},
    {"command": "strictness"},
])
def test_input_errors_exit_2(tmp_path, cfg):
    assert _run(tmp_path, cfg)[0] == 2


def test_missing_config_file_and_bad_flag(tmp_path):
    assert main(["--config", str(tmp_path / "missing.json")]) == 2
    assert main(["--config", _write(tmp_path, HYPER), "--format", "xml"]) == 2
    (tmp_path / "broken.json").write_text("{not json")
    assert main(["--config", str(tmp_path / "broken.json")]) == 2


def _strict_cfg(filtration):
    return {"command": "strictness", "filtered_space": {
        "total_dim": 2, "pieces": [[["1", "0"], ["0", "1"]]],
        "n_mat": [["0", "0"], ["1", "0"]], "filtration": filtration}}


def test_strictness_exit_codes(tmp_path):
    code, text = _run(tmp_path, _strict_cfg([[], [["1", "0"]]]))
    assert code == 0 and json.loads(text)["verdicts"]["strict"] is True
    code, text = _run(tmp_path, _strict_cfg([[], [["0", "1"]]]))
    assert code == 1 and json.loads(text)["verdicts"]["strict"] is False


def test_parse_grid():
    assert parse_grid("0,0; 1/2,-1") == [(0, 0), (0.5, -1)]
    with pytest.raises(ConfigError):
        parse_grid("1,2,3")


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "kontsevich", "--config", _write(tmp_path, HYPER),
                           "--grid", "0,0"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["verdicts"]["independence"] is True


def test_timing_flag(tmp_path):
    code, text = _run(tmp_path, HYPER, "--grid", "0,0", "--timing")
    assert code == 0 and json.loads(text)["timing"]["seconds"] >= 0
