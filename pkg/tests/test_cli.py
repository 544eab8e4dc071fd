import subprocess
import sys

import pytest

from twincast.cli import EXIT_FAIL, EXIT_OK, EXIT_USAGE, execute, format_instance, parse_instance
from twincast.solver import fs_schedule, random_instance

import numpy as np

FS_EXAMPLE = """\
[instance]
M = 8
N = 0
B = 1
omega = 1
delta1 = 1.5
delta2 = 0
delta3 = 0

[group.0]
xi = 1
vartheta = 1
ell = 1
R = 3
O = 0
m_prev = 0
n_prev = 0

[group.1]
xi = 1
vartheta = 1
ell = 1
R = 3
O = 0
m_prev = 0
n_prev = 0
"""


def write(tmp_path, text, name="inst.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


class TestSolve:
    @pytest.mark.parametrize("method", ["fs", "bnb", "oracle"])
    def test_example(self, tmp_path, capsys, method):
        assert execute(["solve", "--instance", write(tmp_path, FS_EXAMPLE), "--method", method]) == EXIT_OK
        out = capsys.readouterr().out
        assert "m=(4,4)" in out and "n=(0,0)" in out

    def test_infeasible(self, tmp_path, capsys):
        text = FS_EXAMPLE.replace("M = 8", "M = 3")
        assert execute(["solve", "--instance", write(tmp_path, text)]) == EXIT_FAIL
        assert "deficit 1" in capsys.readouterr().out

    @pytest.mark.parametrize("text,key", [
        (FS_EXAMPLE.replace("M = 8\n", ""), "M"),
        (FS_EXAMPLE.replace("R = 3", "R = abc", 1), "R"),
        (FS_EXAMPLE.replace("O = 0\n", "O = 0\nbogus = 1\n", 1), "bogus"),
    ])
    def test_bad_instance(self, tmp_path, capsys, text, key):
        assert execute(["solve", "--instance", write(tmp_path, text)]) == EXIT_USAGE
        err = capsys.readouterr().err
        assert key in err and len(err.strip().splitlines()) == 1

    def test_missing_file(self, tmp_path):
        assert execute(["solve", "--instance", str(tmp_path / "none.ini")]) == EXIT_USAGE

    def test_format_round_trip(self):
        inst = random_instance(np.random.default_rng(4))
        back = parse_instance(format_instance(inst))
        assert fs_schedule(back).stats["objective"] == pytest.approx(
            fs_schedule(inst).stats["objective"], abs=1e-9)


class TestUsage:
    @pytest.mark.parametrize("argv", [
        [], ["frobnicate"], ["run", "--scheme", "nope"], ["run", "--windows", "0"],
        ["run", "--bogus"], ["run", "--config", "/nonexistent.cfg"],
        ["bench", "--schemes", "wdt,xyz", "--seeds", "1", "--windows", "1"],
    ])
    def test_exit_one(self, argv, capsys):
        assert execute(argv) == EXIT_USAGE
        assert capsys.readouterr().err.startswith("twincast: error:")


class TestRun:
    def test_csv(self, tmp_path):
        out = tmp_path / "m.csv"
        assert execute(["run", "--scheme", "wdt", "--windows", "3", "--seed", "2", "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0].startswith("window,scheme,lambda_star") and len(lines) == 4

    def test_json(self, tmp_path):
        out = tmp_path / "m.json"
        assert execute(["run", "--scheme", "wdt", "--windows", "2", "--format", "json",
                        "--out", str(out)]) == 0
        assert out.read_text().lstrip().startswith("[")

    def test_byte_identical(self, tmp_path):
        argv = ["run", "--scheme", "proposed", "--windows", "3", "--seed", "5"]
        execute(argv + ["--out", str(tmp_path / "a.csv")])
        execute(argv + ["--out", str(tmp_path / "b.csv")])
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_config_file(self, tmp_path):
        cfg = tmp_path / "sys.cfg"
        assert execute(["gen", "--out", str(cfg)]) == 0
        assert execute(["run", "--config", str(cfg), "--scheme", "wdt", "--windows", "1",
                        "--out", str(tmp_path / "o.csv")]) == 0

    def test_bad_config(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        execute(["gen", "--out", str(cfg)])
        cfg.write_text(cfg.read_text().replace("M = 15", "M = -3"))
        cfg = str(cfg)
        assert execute(["run", "--config", cfg, "--windows", "1"]) == EXIT_USAGE
        assert "M" in capsys.readouterr().err


class TestOtherCommands:
    def test_oracle_check(self, capsys):
        assert execute(["oracle-check", "--instances", "20"]) == EXIT_OK
        assert "20/20" in capsys.readouterr().out

    def test_gen_instance(self, tmp_path):
        inst = tmp_path / "i.ini"
        assert execute(["gen", "--out", str(tmp_path / "c.cfg"), "--instance", str(inst)]) == 0
        assert execute(["solve", "--instance", str(inst), "--method", "bnb"]) in (EXIT_OK, EXIT_FAIL)

    def test_bench(self, tmp_path):
        out = tmp_path / "b.csv"
        assert execute(["bench", "--schemes", "wdt", "--seeds", "1", "--windows", "2",
                        "--no-timing", "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0].startswith("scheme,") and lines[1].startswith("wdt,")

    def test_train_bandit(self, tmp_path):
        w, c = tmp_path / "w.bin", tmp_path / "curve.csv"
        assert execute(["train", "--env", "bandit", "--episodes", "2", "--episode-len", "5",
                        "--out", str(w), "--curve", str(c)]) == 0
        assert w.read_bytes()[:4] == b"TWQN"
        assert c.read_text().splitlines()[0] == "episode,mean_reward"
        assert execute(["run", "--agent-weights", str(tmp_path / "missing.bin"),
                        "--windows", "1"]) == EXIT_USAGE


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "twincast.cli", "oracle-check", "--instances", "3"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "3/3" in proc.stdout
