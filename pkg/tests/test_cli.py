import subprocess
import sys

import numpy as np
import pytest

from splatfield.cli import COMMANDS, build_parser, main
from splatfield.io import read_container


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(path):
    return [l for l in path.read_text().splitlines() if l and not l.startswith("#")][1:]


class TestOracleCommand:
    def test_full_sweep(self, capsys, tmp_path):
        out = tmp_path / "o.csv"
        code, stdout, _ = run(capsys, "oracle-sweep", "--field", "taylor-green", "--kmin", "16",
                              "--kmax", "4096", "--out", str(out))
        assert code == 0
        assert len(rows(out)) == 9
        assert "exponent=" in stdout
        assert (tmp_path / "o.csv.json").exists()

    def test_missing_out(self, capsys):
        code, _, err = run(capsys, "oracle-sweep")
        assert code == 2 and "--out" in err

    def test_smooth_default_identical(self, capsys, tmp_path):
        base = ["oracle-sweep", "--field", "fourier-random", "--ks", "16,32,64", "--resolution", "64"]
        assert run(capsys, *base, "--out", str(tmp_path / "a.csv"))[0] == 0
        assert run(capsys, *base, "--smooth-px", "0", "--out", str(tmp_path / "b.csv"))[0] == 0
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_degenerate_exit(self, capsys, tmp_path):
        code, _, err = run(capsys, "oracle-sweep", "--ks", "4,8,16", "--c-sigma", "0.01",
                           "--out", str(tmp_path / "o.csv"))
        assert code == 3 and "degeneracy" in err

    def test_constant_skips_fit(self, capsys, tmp_path):
        code, stdout, _ = run(capsys, "oracle-sweep", "--field", "constant", "--ks", "16,32,64",
                              "--resolution", "64", "--out", str(tmp_path / "o.csv"))
        assert code == 0 and "skipped" in stdout

    def test_thread_count_invariance(self, capsys, tmp_path):
        base = ["oracle-sweep", "--field", "fourier-random", "--ks", "16,64,256", "--resolution", "64"]
        run(capsys, *base, "--threads", "1", "--out", str(tmp_path / "a.csv"))
        run(capsys, *base, "--threads", "4", "--out", str(tmp_path / "b.csv"))
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


class TestLsCommand:
    def test_noiseless(self, capsys, tmp_path):
        out = tmp_path / "l.csv"
        code, stdout, _ = run(capsys, "ls-sweep", "--sigma-noise", "0", "--trials", "5",
                              "--ks", "4,8,16", "--out", str(out))
        assert code == 0
        var = [float(r.split(",")[6]) for r in rows(out)]
        assert max(var) <= 1e-10

    def test_same_seed_identical(self, capsys, tmp_path):
        base = ["ls-sweep", "--ks", "4,8", "--trials", "10", "--seed", "3"]
        run(capsys, *base, "--out", str(tmp_path / "a.csv"))
        run(capsys, *base, "--out", str(tmp_path / "b.csv"))
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
        assert (tmp_path / "a.csv.json").read_bytes() == (tmp_path / "b.csv.json").read_bytes()

    def test_prints_argmin_and_prediction(self, capsys, tmp_path):
        code, stdout, _ = run(capsys, "ls-sweep", "--ks", "4,8,16", "--trials", "10",
                              "--out", str(tmp_path / "l.csv"))
        assert code == 0 and "argmin_K=" in stdout and "optimal_K=" in stdout

    def test_boundary_warning(self, capsys, tmp_path):
        code, _, err = run(capsys, "ls-sweep", "--n", "8", "--boundary", "--ks", "256",
                           "--trials", "5", "--out", str(tmp_path / "l.csv"))
        assert code == 0
        assert "warning" in err and "K=256" in err


class TestOptkCommand:
    def test_defaults(self, capsys):
        code, stdout, _ = run(capsys, "optk")
        assert code == 0
        lines = stdout.splitlines()
        grid = [[int(v) for v in l.split()[1:]] for l in lines[2:5]]
        assert grid == [[2, 3, 4, 6], [2, 2, 3, 3], [1, 2, 2, 2]]

    def test_d3(self, capsys):
        _, stdout, _ = run(capsys, "optk", "--d", "3")
        grid = [[int(v) for v in l.split()[1:]] for l in stdout.splitlines()[2:5]]
        assert grid == [[2, 3, 8, 18], [2, 2, 4, 8], [2, 2, 3, 5]]

    def test_unit_ratio(self, capsys):
        _, stdout, _ = run(capsys, "optk", "--sigma", "2", "--n", "4", "--s", "1", "--d", "2")
        assert stdout.splitlines()[2].split() == ["s=1", "1"]

    def test_bad_range(self, capsys):
        assert run(capsys, "optk", "--n", "-4")[0] == 2
        assert run(capsys, "optk", "--d", "4")[0] == 2

    def test_csv(self, capsys, tmp_path):
        assert run(capsys, "optk", "--csv", str(tmp_path / "k.csv"))[0] == 0
        assert len((tmp_path / "k.csv").read_text().splitlines()) > 12


class TestSelftest:
    def test_clean(self, capsys):
        code, stdout, _ = run(capsys, "selftest")
        assert code == 0
        assert stdout.count("PASS") == 6

    def test_fault_injection(self, capsys, monkeypatch):
        monkeypatch.setenv("SPLATFIELD_DENOM_FLOOR", "1.0")
        code, stdout, err = run(capsys, "selftest")
        assert code == 1
        assert "FAIL partition-of-unity" in stdout and "partition-of-unity" in err

    def test_repeatable(self, capsys):
        assert run(capsys, "selftest")[1] == run(capsys, "selftest")[1]


class TestFieldDump:
    def test_round_trip(self, capsys, tmp_path):
        code, _, _ = run(capsys, "field-dump", "--field", "lamb-oseen", "--resolution", "16",
                         "--out", str(tmp_path / "f.splf"), "--csv", str(tmp_path / "f.csv"))
        assert code == 0
        g = read_container(tmp_path / "f.splf")
        assert g.resolution == (16, 16) and g.channels == 1
        assert len((tmp_path / "f.csv").read_text().splitlines()) == 257
        assert b"\r\n" not in (tmp_path / "f.csv").read_bytes()

    def test_smoothed(self, capsys, tmp_path):
        run(capsys, "field-dump", "--field", "fourier-random", "--resolution", "32",
            "--out", str(tmp_path / "a"))
        run(capsys, "field-dump", "--field", "fourier-random", "--resolution", "32",
            "--smooth-px", "2", "--out", str(tmp_path / "b"))
        a, b = read_container(tmp_path / "a"), read_container(tmp_path / "b")
        assert np.abs(b.values).max() < np.abs(a.values).max()


class TestConfig:
    def test_file_values(self, capsys, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("# sweep\nfield = fourier-random\nks = 16,32,64\nresolution=64\n"
                       f"out = {tmp_path / 'c.csv'}\n")
        assert run(capsys, "oracle-sweep", "--config", str(cfg))[0] == 0
        assert len(rows(tmp_path / "c.csv")) == 3

    def test_flags_override(self, capsys, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("ks = 16,32,64\nresolution = 64\n")
        run(capsys, "oracle-sweep", "--config", str(cfg), "--ks", "16,32", "--out", str(tmp_path / "c.csv"))
        assert len(rows(tmp_path / "c.csv")) == 2

    def test_unknown_key(self, capsys, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("ks = 16\nflavour = mint\n")
        code, _, err = run(capsys, "oracle-sweep", "--config", str(cfg))
        assert code == 2 and ":2:" in err and "flavour" in err

    def test_bad_value(self, capsys, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("n = many\n")
        code, _, err = run(capsys, "ls-sweep", "--config", str(cfg))
        assert code == 2 and "'n'" in err

    def test_boolean_key(self, capsys, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("boundary = yes\nn = 8\nks = 256\ntrials = 5\n"
                       f"out = {tmp_path / 'l.csv'}\n")
        code, _, err = run(capsys, "ls-sweep", "--config", str(cfg))
        assert code == 0 and "warning" in err

    def test_missing_file(self, capsys, tmp_path):
        assert run(capsys, "optk", "--config", str(tmp_path / "nope"))[0] == 2


class TestParser:
    def test_unknown_flag(self, capsys):
        assert run(capsys, "optk", "--bogus")[0] == 2

    def test_threads_env(self, capsys, monkeypatch):
        monkeypatch.setenv("SPLATFIELD_THREADS", "lots")
        assert run(capsys, "optk")[0] == 2
        monkeypatch.setenv("SPLATFIELD_THREADS", "2")
        assert run(capsys, "optk")[0] == 0

    @pytest.mark.parametrize("command", sorted(COMMANDS))
    def test_help_lists_flags_with_defaults(self, capsys, command):
        assert main([command, "--help"]) == 0
        text = capsys.readouterr().out
        sub = build_parser()._subparsers._group_actions[0].choices[command]
        for action in sub._actions:
            for flag in action.option_strings:
                if flag.startswith("--"):
                    assert flag in text
        assert "default:" in text

    def test_entry_point(self):
        res = subprocess.run([sys.executable, "-m", "splatfield.cli", "optk"], capture_output=True, text=True)
        assert res.returncode == 0 and "s=1" in res.stdout
