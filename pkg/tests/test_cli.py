import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from ssmf.cli import main, parse_config, parse_grid, parse_radii, run
from ssmf.errors import InputError
from ssmf.ifs import load_ifs
from ssmf.measures import (
    measure_from_csv,
    measure_to_csv,
    natural_measure,
    save_measure,
)

ROOT = Path(__file__).resolve().parents[1]
CANTOR_JSON = str(ROOT / "configs" / "cantor.json")


def run_main(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_parse_tau_config():
    cfg = parse_config(["tau", "--ifs", CANTOR_JSON, "--q", "0:1:11", "--levels", "6:12"])
    assert len(cfg.options["q"]) == 11
    assert cfg.options["q"][0] == 0.0 and cfg.options["q"][-1] == 1.0
    assert cfg.options["levels"] == [6, 12]
    assert cfg.seed == 0


def test_missing_ifs_names_flag():
    with pytest.raises(InputError, match="--ifs"):
        parse_config(["dim"])
    with pytest.raises(InputError, match="--ifs"):
        parse_config(["tau", "--q", "0:1:5"])


def test_bad_grid_message():
    with pytest.raises(InputError, match="start < end required"):
        parse_config(["tau", "--ifs", "cantor", "--q", "1:0:5"])
    with pytest.raises(InputError):
        parse_grid("0:1:1", "q")
    with pytest.raises(InputError):
        parse_grid("0:x:3", "q")


def test_radii_syntax():
    assert parse_radii("geom:3:2:4", "radii") == [3.0**-2, 3.0**-3, 3.0**-4]
    assert parse_radii("0.5,0.25", "radii") == [0.5, 0.25]
    with pytest.raises(InputError):
        parse_radii("geom:1:2:4", "radii")


def test_missing_file():
    with pytest.raises(InputError, match="not found"):
        parse_config(["dim", "--ifs", "/no/such/file.json"])


def test_config_file_and_unknown_keys(tmp_path):
    good = tmp_path / "good.json"
    good.write_text(json.dumps({"q": "0:1:5", "tol": 0.2}))
    cfg = parse_config(["verify-formalism", "--ifs", "cantor", "--config", str(good)])
    assert len(cfg.options["q"]) == 5 and cfg.options["tol"] == 0.2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"qq": 1}))
    with pytest.raises(InputError, match="qq"):
        parse_config(["verify-formalism", "--ifs", "cantor", "--config", str(bad)])


def test_files_mapping_used_instead_of_disk():
    text = json.dumps(load_ifs("segment").to_dict())
    cfg = parse_config(["dim", "--ifs", "virtual.json"], files={"virtual.json": text})
    rep = run(cfg)
    assert rep.envelope["results"]["s"] == pytest.approx(1.0)


def test_dim_prints_s(capsys):
    code, out, _ = run_main(["dim", "--ifs", CANTOR_JSON], capsys)
    assert code == 0
    env = json.loads(out)
    assert set(env) == {"command", "inputs", "results", "diagnostics"}
    assert env["results"]["s"] == pytest.approx(math.log(2) / math.log(3), abs=1e-10)
    assert f"{env['results']['s']:.10f}" == "0.6309297536"
    assert env["inputs"]["seed"] == 0


def test_verify_formalism_exit_codes(capsys):
    code, out, _ = run_main(["verify-formalism", "--ifs", CANTOR_JSON, "--tol", "0.05"], capsys)
    assert code == 0 and json.loads(out)["results"]["passed"]
    code, out, _ = run_main(["verify-formalism", "--ifs", CANTOR_JSON, "--tol", "0.0001", "--levels", "2:4"], capsys)
    assert code == 1 and not json.loads(out)["results"]["passed"]


def test_input_error_exit_code(capsys):
    code, _, err = run_main(["tau", "--ifs", "cantor", "--q", "1:0:5"], capsys)
    assert code == 2 and "start < end required" in err
    code, _, err = run_main(["dim"], capsys)
    assert code == 2 and "--ifs" in err
    code, _, _ = run_main(["nonsense"], capsys)
    assert code == 2


def test_determinism_byte_identical(capsys):
    argv = ["verify-formalism", "--ifs", CANTOR_JSON, "--seed", "7"]
    _, a, _ = run_main(argv, capsys)
    _, b, _ = run_main(argv, capsys)
    assert a == b
    assert json.loads(a)["inputs"]["seed"] == 7


def test_out_dir_artifacts(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("SSMF_OUTPUT_DIR", str(tmp_path / "env"))
    code, out, _ = run_main(["tau", "--ifs", "cantor"], capsys)
    assert code == 0
    d = tmp_path / "env"
    assert (d / "tau.json").read_text().strip() == out.strip()
    header = (d / "tau.csv").read_text().splitlines()[0]
    assert header == "q,tau,window_min"
    svg = (d / "tau-tau.svg").read_text()
    assert svg.lstrip().startswith("<?xml") and "<svg" in svg
    code, _, _ = run_main(["tau", "--ifs", "cantor", "--out-dir", str(tmp_path / "flag"), "--no-plot"], capsys)
    assert (tmp_path / "flag" / "tau.csv").exists()
    assert not list((tmp_path / "flag").glob("*.svg"))


def test_svg_deterministic(tmp_path, capsys):
    for sub in ("a", "b"):
        run_main(["holder", "--ifs", "cantor", "--point", "0", "--radii", "geom:3:2:10", "--out-dir", str(tmp_path / sub)], capsys)
    assert (tmp_path / "a" / "holder-holder.svg").read_bytes() == (tmp_path / "b" / "holder-holder.svg").read_bytes()


def test_bl_dist_output(tmp_path, capsys):
    mu = natural_measure(load_ifs("cantor"), 0.2)
    p1 = tmp_path / "mu.csv"
    p1.write_text(measure_to_csv(mu))
    p2 = tmp_path / "nu.json"
    p2.write_text(json.dumps([[0.5, 1.0]]))
    code, out, _ = run_main(["bl-dist", "--mu", str(p1), "--nu", str(p2)], capsys)
    assert code == 0
    res = json.loads(out)
    assert set(res) == {"distance", "witness"}
    # closed form: each atom is within 0.5 of 0.5, so rho = sum m |x - 0.5|
    expected = sum(m * abs(x - 0.5) for (x,), m in zip(mu.points, mu.masses))
    assert res["distance"] == pytest.approx(expected, abs=1e-9)


def test_build_measure_roundtrip(tmp_path, capsys):
    spec = json.dumps({"kind": "typical", "n": 8, "J": 4, "seed": 3})
    code, _, _ = run_main(["build-measure", "--ifs", "cantor", "--measure", spec, "--out-dir", str(tmp_path)], capsys)
    assert code == 0
    mu = measure_from_csv((tmp_path / "build-measure.csv").read_text())
    env = json.loads((tmp_path / "build-measure.json").read_text())
    assert mu.rows() == env["results"]["atoms"]
    saved = save_measure(mu, tmp_path / "again.csv")
    assert measure_from_csv(saved.read_text()) == mu


def test_measure_from_file_for_tau(tmp_path, capsys):
    mu = natural_measure(load_ifs("segment"), 2.0**-10)
    path = tmp_path / "seg.csv"
    path.write_text(measure_to_csv(mu))
    code, out, _ = run_main(["tau", "--measure", str(path), "--q", "0:2:5", "--levels", "3:8", "--format", "csv"], capsys)
    assert code == 0
    rows = [line.split(",") for line in out.strip().splitlines()[1:]]
    tau = np.array([float(r[1]) for r in rows])
    np.testing.assert_allclose(tau, np.linspace(0, 2, 5) - 1, atol=1e-9)


@pytest.mark.parametrize(
    "argv",
    [
        ["cutset", "--ifs", "skewed", "--R", "0.25"],
        ["legendre", "--ifs", "cantor"],
        ["coarse", "--ifs", "segment"],
        ["boxdim", "--ifs", "point"],
        ["cascade", "--ifs", "cantor", "--theta", "1.5"],
        ["cascade-check", "--ifs", "cantor"],
        ["verify-lemma", "--ifs", "cantor"],
    ],
)
def test_other_commands_run(argv, tmp_path, capsys):
    code, out, _ = run_main(argv + ["--out-dir", str(tmp_path)], capsys)
    assert code == 0
    env = json.loads(out)
    assert env["command"] == argv[0]
    assert (tmp_path / f"{argv[0]}.csv").exists()


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "ssmf.cli", "dim", "--ifs", "cantor"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["results"]["p"] == 2


def test_cascade_theta_from_target_h(capsys):
    s = math.log(2) / math.log(3)
    code, out, _ = run_main(["cascade-check", "--ifs", "cantor", "--target-h", str(s / 1.5)], capsys)
    assert code == 0
    env = json.loads(out)
    assert env["results"]["theta"] == pytest.approx(1.5)
    code, _, err = run_main(["cascade", "--ifs", "cantor", "--target-h", "0.9"], capsys)
    assert code == 2 and "--target-h" in err
