import csv
import json

import pytest

from layersep import cli
from layersep.harness import CaseBlowUp
from layersep.nschannel import BlowUpError


def write_config(tmp_path, **over):
    raw = {"schema_version": 1, "shear": {"kind": "constant", "A": [0.0]}, "nu": [0.1], "T": 0.05,
           "resolutions": [[8, 8]], "ramp_width": 0.25, "output_dir": str(tmp_path / "out")}
    raw.update(over)
    path = tmp_path / "c.json"
    path.write_text(json.dumps(raw))
    return path


def last_json(capsys):
    out = capsys.readouterr().out.strip().splitlines()
    assert len(out) == 1
    return json.loads(out[0])


def test_run_rest_state(tmp_path, capsys):
    assert cli.main(["run", "--config", str(write_config(tmp_path))]) == 0
    summary = last_json(capsys)
    assert summary["cases"][0]["final_separation"] == 0.0
    with open(tmp_path / "out/case_000/separation.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert rows and all(float(r["separation"]) == 0.0 for r in rows)


def test_run_seed_and_out_override(tmp_path, capsys):
    cfg = write_config(tmp_path, shear={"kind": "constant", "A": [1.0]},
                       perturbation={"amplitude": 0.1, "seed": 1})
    assert cli.main(["run", "--config", str(cfg), "--seed", "5", "--out", str(tmp_path / "o2")]) == 0
    manifest = json.loads((tmp_path / "o2/case_000/manifest.json").read_text())
    assert manifest["seed"] == 5


def test_subsolution_report(capsys):
    assert cli.main(["subsolution", "--lambda", "0.5", "--eps", "0.5", "--samples", "20"]) == 0
    out = last_json(capsys)
    assert out["energy_rate"]["formula"] == pytest.approx(1 / 12)
    assert out["deviation_rate"]["formula"] == pytest.approx(5 / 12)


def test_subsolution_bad_parameters(capsys):
    assert cli.main(["subsolution", "--lambda", "1.5", "--eps", "0.5"]) == 2


def test_bounds_without_run(tmp_path, capsys):
    assert cli.main(["bounds", "--out", str(tmp_path / "empty")]) == 2
    assert "run the sweep first" in capsys.readouterr().err


def test_unknown_flag_is_usage_error(capsys):
    assert cli.main(["run", "--frobnicate"]) == 1
    assert cli.main([]) == 1


def test_invalid_config_exit_code(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"schema_version": 7}))
    assert cli.main(["run", "--config", str(path)]) == 2


def test_blow_up_exit_code(tmp_path, monkeypatch):
    def explode(*args, **kwargs):
        raise CaseBlowUp(0, {}, BlowUpError(3, 0.1))

    monkeypatch.setattr(cli, "run_all", explode)
    assert cli.main(["run", "--config", str(write_config(tmp_path))]) == 3


def test_full_pipeline(tmp_path, capsys):
    cfg = write_config(tmp_path, shear={"kind": "constant", "A": [1.0]}, nu=[0.05], T=0.2,
                       resolutions=[[8, 16]], ramp_width=0.125)
    assert cli.main(["run", "--config", str(cfg)]) == 0
    assert cli.main(["decompose", "--config", str(cfg), "--c0", "1", "--min-samples", "2",
                     "--keep-unresolved"]) == 0
    assert cli.main(["bounds", "--config", str(cfg), "--split"]) == 0
    assert cli.main(["report", "--config", str(cfg)]) == 0
    capsys.readouterr()
    assert (tmp_path / "out/bounds.json").exists()
    assert (tmp_path / "out/case_000/decomposition.json").exists()
    assert (tmp_path / "out/report/separation_case_000.dat").exists()


def test_decompose_bad_case_index(tmp_path, capsys):
    cfg = write_config(tmp_path)
    cli.main(["run", "--config", str(cfg)])
    assert cli.main(["decompose", "--config", str(cfg), "--case", "4"]) == 1


def test_prandtl_check(capsys):
    assert cli.main(["prandtl-check", "--nu", "1e-3", "--times", "0.5", "--modes", "2000"]) == 0
    rows = last_json(capsys)
    assert rows[0]["relative"] < 1e-3
