import csv
import io
import json
import subprocess
import sys

import pytest

from selbias.cli import grid, run

REF_ARGS = ["--p", "10", "--gamma2", "0.5", "--eta", "1", "--sigma", "2"]


def invoke(argv):
    out = io.StringIO()
    code = run(argv, stdout=out)
    return code, out.getvalue()


def as_json(argv):
    code, text = invoke(argv)
    assert code == 0
    return json.loads(text)


def as_csv(argv):
    code, text = invoke(argv + ["--format", "csv"])
    assert code == 0
    return list(csv.DictReader(io.StringIO(text)))


class TestBias:
    def test_golden_value(self):
        env = as_json(["bias", *REF_ARGS, "--xp", "3.25"])
        assert list(env) == ["schema_version", "command", "params", "result", "rows", "diagnostics"]
        assert env["result"]["lambda"] == pytest.approx(0.400, abs=0.005)
        assert env["params"]["xp"] == 3.25

    def test_csv_matches_json(self):
        argv = ["bias", *REF_ARGS, "--xp", "1.5"]
        env = as_json(argv)
        (row,) = as_csv(argv)
        for key, value in env["result"].items():
            assert float(row[key]) == value

    def test_csv_line_endings(self):
        _, text = invoke(["bias", *REF_ARGS, "--xp", "1.5", "--format", "csv"])
        assert "\r" not in text
        assert text.count("\n") == 2

    def test_timing_is_opt_in(self):
        assert "runtime_s" not in as_json(["bias", *REF_ARGS, "--xp", "1.5"])["diagnostics"]
        assert "runtime_s" in as_json(["bias", *REF_ARGS, "--xp", "1.5", "--timing"])["diagnostics"]


class TestOtherCommands:
    def test_table_rows(self):
        rows = as_csv(["table", "--sigma", "1", "--p", "3,5,10", "--xp", "0:6:1",
                       "--case", "0.5,1", "--case", "1,0.5"])
        assert len(rows) == 42
        assert {r["case"] for r in rows} == {"1", "2"}

    def test_exceed(self):
        env = as_json(["exceed", *REF_ARGS, "--x", "3.25"])
        assert env["result"]["exceed_probability"] == pytest.approx(0.486, abs=0.002)

    def test_simulate_reproducible(self):
        argv = ["simulate", "--p", "3", "--gamma", "1", "--eta", "0.7", "--sigma", "1",
                "--reps", "200", "--seed", "4"]
        assert invoke(argv) == invoke(argv)
        assert invoke(argv)[1] != invoke(argv[:-1] + ["5"])[1]

    def test_simulate_summary(self):
        env = as_json(["simulate", *REF_ARGS, "--reps", "3000", "--summary", "--with-regression"])
        assert set(env["result"]) == {"intercept", "slope"}
        assert sum(r["count"] for r in env["rows"]) == 3000

    def test_moments_equicorrelated(self):
        env = as_json(["moments", "--theta", "0", "--omega", "1,0", "--upper", "0", "--dim", "1"])
        assert env["result"]["alpha"] == pytest.approx(0.5)
        assert env["rows"][0]["truncated_mean"] == pytest.approx(-0.7978845608, abs=1e-9)

    def test_moments_from_file(self, tmp_path):
        path = tmp_path / "omega.csv"
        path.write_text("1.5,0.5\n0.5,1.5\n")
        from_file = as_json(["moments", "--theta", "0,0", "--omega-file", str(path), "--upper", "1,1"])
        tagged = as_json(["moments", "--theta", "0,0", "--omega", "1,0.5", "--upper", "1,1"])
        assert from_file["diagnostics"]["engine"] == "qmc"
        assert from_file["result"]["alpha"] == pytest.approx(tagged["result"]["alpha"], abs=1e-4)

    @pytest.mark.slow
    def test_validate_quick(self):
        env = as_json(["validate", "--level", "quick"])
        assert env["result"]["passed"] is True


class TestErrors:
    def test_invalid_model_is_numeric_error(self, capsys):
        code, _ = invoke(["bias", "--p", "1", "--gamma", "0.5", "--eta", "0.5", "--sigma", "1", "--xp", "1"])
        assert code == 3
        assert "bias" in capsys.readouterr().err

    def test_missing_flag_is_usage_error(self, capsys):
        code, _ = invoke(["bias", "--p", "3", "--gamma", "0.5", "--sigma", "1", "--xp", "1"])
        assert code == 2
        assert "--eta" in capsys.readouterr().err

    def test_bad_grid(self):
        code, _ = invoke(["table", "--sigma", "1", "--p", "3", "--xp", "0:1", "--case", "0.5,1"])
        assert code == 2

    def test_missing_omega_file(self, tmp_path):
        code, _ = invoke(["moments", "--theta", "0", "--omega-file", str(tmp_path / "nope.csv"),
                          "--upper", "0"])
        assert code == 2


def test_grid_is_inclusive():
    assert grid("0:6:1") == [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0]
    assert grid("0:1:0.1")[-1] == pytest.approx(1.0)
    assert len(grid("0:1:0.1")) == 11


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "selbias", "bias", *REF_ARGS, "--xp", "3.25"],
                          capture_output=True, text=True, check=True)
    assert json.loads(proc.stdout)["result"]["delta"] == pytest.approx(0.2495, abs=1e-3)
