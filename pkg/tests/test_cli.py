import csv
import json
import math
import subprocess
import sys
from pathlib import Path

import pytest

from laguerre_capacity.bounds import PowerConstraints, lower_bound, upper_bound
from laguerre_capacity.channel import ChannelParams
from laguerre_capacity.cli import SWEEP_HEADER, main

DATA = Path(__file__).parent / "data"

VLC_SWEEP = ["sweep", "--variable", "A", "--start", "10", "--stop", "1e5", "--points", "9",
             "--scale", "log", "--avg", "5", "--lambda", "1"]
CDMA_SWEEP = ["sweep", "--mode", "cdma", "--variable", "M", "--start", "2", "--stop", "20",
              "--points", "10", "--scale", "linear", "-A", "1000", "-E", "100", "--N0", "31"]


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def parse_kv(text):
    return dict(line.split(" ", 1) if " " in line else (line, "") for line in text.strip().splitlines())


class TestBounds:
    def test_average_only_example(self, capsys):
        code, out, _ = run(["bounds", "--mode", "vlc", "--avg", "1", "--lambda", "0", "--units", "nats"], capsys)
        kv = parse_kv(out)
        assert code == 0
        assert float(kv["lower"]) == pytest.approx(0.0245, abs=1e-4)
        assert float(kv["upper"]) == 0.0
        assert kv["upper_asymptotic"] == "true"

    def test_bits(self, capsys):
        base = ["bounds", "--peak", "100", "--avg", "10", "--lambda", "1", "--format", "json"]
        _, nats, _ = run(base, capsys)
        _, bits, _ = run(base + ["--units", "bits"], capsys)
        n, b = json.loads(nats), json.loads(bits)
        assert b["lower"] == pytest.approx(n["lower"] / math.log(2), rel=1e-15)
        assert b["upper"] == pytest.approx(n["upper"] / math.log(2), rel=1e-15)
        assert b["mu"] == n["mu"] and b["regime"] == n["regime"]

    def test_cdma_mode_has_no_upper(self, capsys):
        code, out, _ = run(["bounds", "--mode", "cdma", "-A", "1000", "-E", "100", "--M", "10",
                            "--N0", "31", "--format", "json"], capsys)
        res = json.loads(out)
        assert code == 0 and res["upper"] is None and res["mode"] == "cdma"

    @pytest.mark.parametrize("argv", [
        ["bounds", "--avg", "-1", "--lambda", "1"],
        ["bounds", "--avg", "1"],
        ["bounds", "--mode", "cdma", "--avg", "1", "--N0", "31"],
        ["bounds", "--bogus"],
        ["cdma", "-A", "10", "--M", "1", "--N0", "31"],
        ["pmf", "--x", "1", "--lambda", "1", "--tail", "0.5"],
        ["sweep", "--variable", "A", "--start", "10", "--stop", "1", "--points", "3", "--lambda", "1"],
        ["sweep", "--variable", "A", "--start", "0", "--stop", "1", "--points", "3", "--lambda", "1"],
        ["sweep", "--variable", "M", "--start", "2", "--stop", "5", "--points", "3", "--lambda", "1"],
        ["verify", "--suite", "pmf"],
    ])
    def test_argument_errors_exit_2(self, argv, capsys):
        code, _, err = run(argv, capsys)
        assert code == 2
        assert "usage" in err


class TestPmf:
    def test_geometric_column(self, capsys):
        code, out, _ = run(["pmf", "--x", "0", "--lambda", "1", "--tail", "1e-9"], capsys)
        rows = list(csv.reader(out.splitlines()))
        assert code == 0 and rows[0] == ["y", "prob"]
        assert float(rows[1][1]) == 0.5 and float(rows[2][1]) == 0.25

    def test_json(self, capsys):
        _, out, _ = run(["pmf", "--x", "2", "--lambda", "1", "--format", "json"], capsys)
        res = json.loads(out)
        assert res["probs"][0] == pytest.approx(math.exp(-1) / 2, abs=1e-15)
        assert res["tail_mass"] <= 1e-9


class TestCdma:
    def test_report(self, capsys):
        code, out, _ = run(["cdma", "-A", "1000", "-E", "100", "--M", "10", "--N0", "31",
                            "--M-max", "31", "--format", "json"], capsys)
        res = json.loads(out)
        assert code == 0
        assert res["optimal_M"] == 3
        assert res["sum"] == pytest.approx(10 * res["per_user"])
        assert 0 < res["alpha_star"] <= 1 / 3


class TestSweep:
    @pytest.mark.parametrize("argv,golden", [(VLC_SWEEP, "golden_sweep_vlc.csv"),
                                             (CDMA_SWEEP, "golden_sweep_cdma.csv")])
    def test_golden(self, argv, golden, capsys):
        _, first, _ = run(argv, capsys)
        _, second, _ = run(argv, capsys)
        assert first == second
        assert first == (DATA / golden).read_text()

    def test_schema_and_values(self, capsys):
        _, out, _ = run(VLC_SWEEP, capsys)
        rows = list(csv.reader(out.splitlines()))
        assert rows[0] == SWEEP_HEADER
        values = [float(r[1]) for r in rows[1:]]
        assert values == sorted(values)
        for r in rows[1:]:
            cons = PowerConstraints(float(r[1]), 5.0)
            assert float(r[2]) == pytest.approx(lower_bound(cons, ChannelParams(1.0)).value, rel=1e-11)
            assert float(r[3]) == pytest.approx(upper_bound(cons).value, rel=1e-11)

    def test_cdma_columns(self, capsys):
        _, out, _ = run(CDMA_SWEEP, capsys)
        rows = list(csv.reader(out.splitlines()))
        assert rows[0] == SWEEP_HEADER + ["per_user", "sum"]
        for r in rows[1:]:
            assert r[3] == "" and float(r[8]) == pytest.approx(int(r[1]) * float(r[7]), rel=1e-11)

    def test_config_round_trip(self, tmp_path, capsys):
        cfg = tmp_path / "sweep.json"
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(VLC_SWEEP + ["--save-config", str(cfg), "--out", str(out1)]) == 0
        saved = json.loads(cfg.read_text())
        assert saved["command"] == "sweep" and saved["variable"] == "A"
        assert main(["sweep", "--config", str(cfg), "--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_flags_override_config(self, tmp_path, capsys):
        cfg = tmp_path / "sweep.json"
        main(VLC_SWEEP + ["--save-config", str(cfg)])
        capsys.readouterr()
        _, out, _ = run(["sweep", "--config", str(cfg), "--points", "3"], capsys)
        assert len(out.strip().splitlines()) == 4

    def test_config_for_other_command(self, tmp_path, capsys):
        cfg = tmp_path / "sweep.json"
        cfg.write_text(json.dumps({"command": "sweep"}))
        code, _, _ = run(["bounds", "--config", str(cfg), "--avg", "1", "--lambda", "1"], capsys)
        assert code == 2


class TestVerify:
    def test_fast_suite_passes(self, capsys):
        code, out, _ = run(["verify", "--suite", "pmf", "--seed", "42"], capsys)
        assert code == 0
        assert "3/3 checks passed" in out

    def test_failure_exit_code(self, monkeypatch, capsys):
        from laguerre_capacity import cli
        from laguerre_capacity.verify import CheckResult
        monkeypatch.setattr(cli, "run_suite",
                            lambda name, seed: [CheckResult("forced", 1.0, 0.5, False)])
        code, out, _ = run(["verify", "--suite", "pmf", "--seed", "1"], capsys)
        assert code == 1 and "FAIL" in out

    def test_module_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "laguerre_capacity", "pmf", "--x", "0",
                               "--lambda", "1"], capture_output=True, text=True, check=True)
        assert proc.stdout.startswith("y,prob\n0,0.5\n")
