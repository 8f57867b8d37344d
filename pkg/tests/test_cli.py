from __future__ import annotations

import csv
import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from ramanpass import cli
from ramanpass.errors import IntegrationError, ValidationError
from ramanpass.schedule import builtin_family, sample_schedule

GOLDEN = json.loads((Path(__file__).parent / "golden" / "schemas.json").read_text())


def _write(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8")
    return path


def _rows(path: Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


# --- protocol files ---------------------------------------------------------------


def test_builtin_protocol_file(tmp_path):
    spec = cli.load_protocol(_write(tmp_path / "p.txt", '# family b\nenvelope = "b"\nnu = 1\n'))
    assert spec == builtin_family("b")


def test_expression_protocol_matches_builtin_schedule(tmp_path):
    path = _write(tmp_path / "p.txt",
                  'name = "sech"\nstokes = "2*nu*sech(nu*t)"\nnu = 1\nt_max = 10\n')
    spec = cli.load_protocol(path)
    a, b = sample_schedule(spec, 301), sample_schedule(builtin_family("b"), 301)
    np.testing.assert_allclose(a.tau, b.tau, atol=1e-12)
    np.testing.assert_allclose(a.omega_p, b.omega_p, rtol=1e-10)
    np.testing.assert_allclose(a.theta, b.theta, atol=1e-12)


@pytest.mark.parametrize("text, fragment", [
    ('envelope = "a"\neta = 0\n', "eta"),
    ('envelope = "a"\nfoo = 1\n', "2: unknown key 'foo'"),
    ('envelope = "a"\nnu = "fast"\n', "'nu'"),
    ('envelope = "a"\nnu 1\n', ":2: expected"),
    ('envelope = "a"\nnu = [1\n', ":2: bad value"),
    ('envelope = "a"\nenvelope = "b"\n', "duplicate"),
    ('nu = 1\n', "exactly one"),
    ('envelope = "g"\n', "'envelope'"),
    ('stokes = "nu*"\nnu = 1\nt_max = 1\n', "'stokes'"),
    ('stokes = "nu"\nnu = 1\n', "'t_max'"),
    ('envelope = "a"\nsamples = 0\n', "'samples'"),
    ('envelope = "a"\nnu = NaN\n', "'nu'"),
])
def test_protocol_errors(tmp_path, text, fragment):
    with pytest.raises(ValidationError, match=fragment):
        cli.load_protocol(_write(tmp_path / "p.txt", text))


def test_missing_protocol_file(tmp_path):
    with pytest.raises(ValidationError):
        cli.load_protocol(tmp_path / "absent.txt")


def test_eta_expression_in_file(tmp_path):
    spec = cli.load_protocol(_write(tmp_path / "p.txt", 'envelope = "b"\neta = "2 + t"\n'))
    assert spec.eta_at(1.0) == 3.0


# --- simulate ----------------------------------------------------------------------


def test_simulate_family_a(tmp_path):
    out = tmp_path / "a.csv"
    assert cli.main(["simulate", "--family", "a", "--out", str(out)]) == 0
    raw = out.read_bytes()
    assert b"\r" not in raw
    assert raw.decode("utf-8").splitlines()[0] == GOLDEN["simulate"]["header"]
    rows = _rows(out)
    assert float(rows[-1]["p3"]) >= 0.9999
    meta = json.loads(out.with_suffix(".json").read_text())
    assert sorted(meta) == GOLDEN["simulate"]["json_keys"]
    assert meta["schema"] == "ramanpass.simulate/1"
    assert meta["protocol"]["rtol"] == 1e-10  # defaults echoed
    assert meta["protocol"]["theta_cap"] == math.pi / 2 - 5e-3


def test_simulate_eta_two_occupancy(tmp_path):
    out = tmp_path / "b.csv"
    assert cli.main(["simulate", "--family", "b", "--eta", "2", "--samples", "2001",
                     "--out", str(out)]) == 0
    p2 = max(float(r["p2"]) for r in _rows(out))
    assert abs(p2 - 1 / 9) <= 1e-4


def test_simulate_zero_duration(tmp_path):
    proto = _write(tmp_path / "p.txt", 'envelope = "a"\nt_max = 0\n')
    out = tmp_path / "z.csv"
    assert cli.main(["simulate", "--protocol", str(proto), "--out", str(out)]) == 0
    rows = _rows(out)
    assert len(rows) == 1 and float(rows[0]["p1"]) == 1.0


def test_simulate_floats_round_trip(tmp_path):
    out = tmp_path / "d.csv"
    cli.main(["simulate", "--family", "d", "--samples", "11", "--out", str(out)])
    for row in _rows(out):
        for value in row.values():
            assert repr(float(value)) == value


def test_simulate_to_stdout(capsys):
    assert cli.main(["simulate", "--family", "f", "--samples", "3"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == GOLDEN["simulate"]["header"] and len(lines) == 4


def test_cli_overrides(tmp_path):
    out = tmp_path / "o.csv"
    cli.main(["simulate", "--family", "a", "--nu", "2", "--rtol", "1e-9", "--atol", "1e-11",
              "--theta-cap", "1.5", "--samples", "5", "--threshold", "0.99", "--out", str(out)])
    proto = json.loads(out.with_suffix(".json").read_text())["protocol"]
    assert (proto["nu"], proto["rtol"], proto["atol"], proto["theta_cap"], proto["samples"],
            proto["threshold"]) == (2.0, 1e-9, 1e-11, 1.5, 5, 0.99)
    assert float(_rows(out)[-1]["theta"]) == pytest.approx(1.5, abs=1e-8)


# --- verify -------------------------------------------------------------------------


def test_verify_family_d(capsys):
    assert cli.main(["verify", "--family", "d"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 5 and "FAIL" not in out


def test_verify_mismatched_pump(tmp_path, capsys):
    proto = _write(tmp_path / "p.txt", 'envelope = "a"\npump = "1.3*nu"\n')
    assert cli.main(["verify", "--protocol", str(proto)]) == 2
    out = capsys.readouterr().out
    assert "invariant_residual" in out.split("failed:")[1]


def test_verify_family_c_notes_cap(capsys):
    assert cli.main(["verify", "--family", "c"]) == 0
    assert "capped" in capsys.readouterr().out


# --- table1 ---------------------------------------------------------------------------


def test_table1(tmp_path):
    out = tmp_path / "t.csv"
    assert cli.main(["table1", "--out", str(out)]) == 0
    assert out.read_text().splitlines()[0] == GOLDEN["table1"]["header"]
    rows = _rows(out)
    assert [r["family"] for r in rows] == list("abcdef")
    assert all(r["within_tolerance"] == "true" for r in rows)
    meta = json.loads(out.with_suffix(".json").read_text())
    assert sorted(meta) == GOLDEN["table1"]["json_keys"]
    assert sorted(meta["rows"][0]) == GOLDEN["table1"]["row_keys"]


def test_table1_threshold_override(tmp_path):
    out = tmp_path / "t.csv"
    assert cli.main(["table1", "--threshold", "0.99", "--out", str(out)]) == 0
    rows = _rows(out)
    assert all(r["within_tolerance"] == "" for r in rows)
    assert all(float(r["deviation"]) < 0 for r in rows)


# --- reconstruct ------------------------------------------------------------------------


def test_reconstruct_columns(tmp_path):
    out = tmp_path / "r.csv"
    assert cli.main(["reconstruct", "--family", "b", "--samples", "9", "--out", str(out)]) == 0
    assert out.read_text().splitlines()[0] == GOLDEN["reconstruct"]["header"]
    for row in _rows(out):
        tau = float(row["tau"])
        assert float(row["omega_p0"]) == pytest.approx(math.tanh(tau), rel=1e-10, abs=1e-15)
        assert float(row["h_cd"]) == pytest.approx(1 / math.cosh(tau), rel=1e-14)
    out2 = tmp_path / "r2.csv"
    assert cli.main(["reconstruct", "--family", "b", "--eta", "3", "--out", str(out2)]) == 0
    assert out2.read_text().splitlines()[0] == GOLDEN["reconstruct"]["header_eta"]
    assert sorted(json.loads(out2.with_suffix(".json").read_text())) == \
        GOLDEN["reconstruct"]["json_keys"]


# --- sweep --------------------------------------------------------------------------------


def _snapshot(directory: Path) -> dict[str, bytes]:
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir())}


def test_sweep_cross_product(tmp_path):
    out = tmp_path / "s"
    assert cli.main(["sweep", "--families", "a,b", "--etas", "1,2,3", "--out", str(out)]) == 0
    files = _snapshot(out)
    assert len(files) == 7 and "index.json" in files
    index = json.loads(files["index.json"])
    assert sorted(index) == GOLDEN["sweep"]["index_keys"]
    assert sorted(index["jobs"][0]) == GOLDEN["sweep"]["job_keys"]
    assert [(j["family"], j["eta"]) for j in index["jobs"]] == \
        [(f, e) for f in "ab" for e in (1.0, 2.0, 3.0)]


def test_sweep_is_deterministic_across_runs_and_workers(tmp_path):
    args = ["sweep", "--families", "a,c,e", "--etas", "1,3", "--fractions", "0.5,1"]
    assert cli.main(args + ["--out", str(tmp_path / "one")]) == 0
    assert cli.main(args + ["--out", str(tmp_path / "again")]) == 0
    assert cli.main(args + ["--out", str(tmp_path / "four"), "--jobs", "4"]) == 0
    one = _snapshot(tmp_path / "one")
    assert one == _snapshot(tmp_path / "again") == _snapshot(tmp_path / "four")


def test_sweep_rejects_unknown_family_before_running(tmp_path, capsys):
    out = tmp_path / "s"
    assert cli.main(["sweep", "--families", "a,g", "--out", str(out)]) == 1
    assert not out.exists()
    assert "'g'" in capsys.readouterr().err


def test_sweep_grid_file(tmp_path):
    grid = _write(tmp_path / "grid.json", json.dumps({"families": ["f"], "etas": [2],
                                                      "thresholds": [0.99], "samples": 11}))
    out = tmp_path / "s"
    assert cli.main(["sweep", "--grid", str(grid), "--out", str(out)]) == 0
    index = json.loads((out / "index.json").read_text())
    assert index["grid"]["samples"] == 11
    assert index["jobs"][0]["effective_duration"] is not None


def test_sweep_partial_failure(tmp_path, monkeypatch, capsys):
    real = cli.evolve

    def flaky(spec, **kwargs):
        if spec.envelope == "b":
            raise IntegrationError("step size underflow", 1.0)
        return real(spec, **kwargs)

    monkeypatch.setattr(cli, "evolve", flaky)
    out = tmp_path / "s"
    assert cli.main(["sweep", "--families", "a,b", "--out", str(out)]) == 2
    index = json.loads((out / "index.json").read_text())
    assert "error" in index["jobs"][1] and "error" not in index["jobs"][0]
    assert "1 of 2 jobs failed" in capsys.readouterr().err


# --- exit codes -------------------------------------------------------------------------------


def test_exit_code_validation(tmp_path):
    assert cli.main(["simulate", "--family", "a", "--eta", "0"]) == 1
    assert cli.main(["simulate", "--family", "z"]) == 1
    assert cli.main(["simulate", "--family", "a", "--eta", "1+"]) == 1
    assert cli.main(["simulate", "--family", "a", "--nu", "-1"]) == 1


def test_exit_code_numerical(tmp_path, capsys):
    # the envelope is undefined at t = 0.5: evaluation fails mid-run
    proto = _write(tmp_path / "p.txt", 'stokes = "1/sqrt(0.5 - t)"\nnu = 1\nt_max = 0.9\n')
    assert cli.main(["simulate", "--protocol", str(proto)]) == 2
    assert "error" in capsys.readouterr().err


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as info:
        cli.main(["simulate"])
    assert info.value.code == 2  # argparse usage errors


def test_module_entry_point(tmp_path):
    out = tmp_path / "m.csv"
    done = subprocess.run([sys.executable, "-m", "ramanpass", "simulate", "--family", "e",
                           "--samples", "3", "--out", str(out)], capture_output=True, text=True)
    assert done.returncode == 0, done.stderr
    assert len(_rows(out)) == 3
