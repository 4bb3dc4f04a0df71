import json
import os

import pytest

from dstar.cli import main
from dstar.reporting import CSV_HEADER

CONFIG = """\
N = 5
f = 1
k = 2
T = 12
eta = 0.1
seed = 1
gar = "dstar"
attack = "none"

[dataset]
kind = "blobs"
n = 200
p = 3
classes = 2
"""


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(CONFIG)
    return str(path)


class TestRun:
    def test_writes_outputs(self, config_path, tmp_path, capsys):
        out = str(tmp_path / "out")
        assert main(["run", "--config", config_path, "--out", out]) == 0
        lines = (tmp_path / "out" / "metrics.csv").read_text().splitlines()
        assert lines[0] == CSV_HEADER
        assert len(lines) == 12 + 1
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert manifest["config"]["gar"] == "dstar"
        assert manifest["config"]["attack"]["kind"] == "none"
        assert manifest["output_dir"] == out
        stdout = capsys.readouterr().out
        assert "final loss" in stdout

    def test_byte_identical_reruns(self, config_path, tmp_path):
        out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
        assert main(["run", "--config", config_path, "--out", out1]) == 0
        assert main(["run", "--config", config_path, "--out", out2]) == 0
        csv1 = (tmp_path / "a" / "metrics.csv").read_bytes()
        csv2 = (tmp_path / "b" / "metrics.csv").read_bytes()
        assert csv1 == csv2

    def test_seed_override_changes_metrics(self, config_path, tmp_path):
        out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
        main(["run", "--config", config_path, "--out", out1])
        main(["run", "--config", config_path, "--out", out2, "--set", "seed=2"])
        assert ((tmp_path / "a" / "metrics.csv").read_bytes()
                != (tmp_path / "b" / "metrics.csv").read_bytes())

    def test_config_error_exit_2(self, config_path, tmp_path, capsys):
        code = main(["run", "--config", config_path, "--out", str(tmp_path / "o"),
                     "--set", "f=3"])
        assert code == 2
        assert "config error" in capsys.readouterr().err
        assert not (tmp_path / "o").exists()

    def test_missing_config_exit_2(self, tmp_path, capsys):
        code = main(["run", "--config", str(tmp_path / "nope.toml"),
                     "--out", str(tmp_path / "o")])
        assert code == 2

    def test_unwritable_out_exit_3(self, config_path, tmp_path, capsys):
        blocker = tmp_path / "blocked"
        blocker.write_text("file, not a directory")
        code = main(["run", "--config", config_path, "--out", str(blocker)])
        assert code == 3
        assert "run failed" in capsys.readouterr().err


class TestSweep:
    def test_grid_outputs_and_summary(self, config_path, tmp_path, capsys):
        out = tmp_path / "sweep"
        code = main(["sweep", "--config", config_path, "--out", str(out),
                     "--gars", "average,median", "--attacks", "none,empire"])
        assert code == 0
        cells = ["average__none", "average__empire", "median__none", "median__empire"]
        for cell in cells:
            assert (out / cell / "metrics.csv").exists()
            assert (out / cell / "manifest.json").exists()
        lines = (out / "summary.csv").read_text().splitlines()
        assert lines[0] == "gar,attack,final_accuracy,mean_wait_time,status"
        assert len(lines) == 5
        # row order follows the requested grid, gars outer
        got = [tuple(line.split(",")[:2]) for line in lines[1:]]
        assert got == [("average", "none"), ("average", "empire"),
                       ("median", "none"), ("median", "empire")]
        assert all(line.endswith(",ok") for line in lines[1:])

    def test_bad_cell_isolated(self, config_path, tmp_path, capsys):
        # krum with a trim of 3 is infeasible at N=5; other cells still complete
        out = tmp_path / "sweep"
        code = main(["sweep", "--config", config_path, "--out", str(out),
                     "--set", "gar_params.f=3",
                     "--gars", "krum,average", "--attacks", "none"])
        assert code == 0
        lines = (out / "summary.csv").read_text().splitlines()
        assert lines[1] == "krum,none,,,error"
        assert lines[2].startswith("average,none,") and lines[2].endswith(",ok")
        assert (out / "average__none" / "metrics.csv").exists()
        assert not (out / "krum__none" / "metrics.csv").exists()
        assert "krum__none: failed:" in capsys.readouterr().err

    def test_empty_grid_exit_2(self, config_path, tmp_path):
        code = main(["sweep", "--config", config_path, "--out", str(tmp_path / "s"),
                     "--gars", " , ", "--attacks", "none"])
        assert code == 2


class TestProbe:
    def test_reports_constants(self, config_path, capsys):
        code = main(["probe", "--config", config_path])
        assert code == 0
        out = capsys.readouterr().out
        for name in ("d_sigma2", "V_hat", "Vprime_hat", "L_hat", "grad_norm", "alpha"):
            assert name in out

    def test_alpha_undefined_still_ok(self, config_path, capsys):
        # tiny batches on a noisy task push sin(alpha) past 1
        code = main(["probe", "--config", config_path,
                     "--set", "n_b=1", "--set", "dataset.separation=0.5"])
        assert code == 0
        out = capsys.readouterr().out
        assert ("not defined" in out) or ("alpha" in out)

    def test_config_error_exit_2(self, config_path, capsys):
        assert main(["probe", "--config", config_path, "--set", "gar=bogus"]) == 2


class TestEnvSeed:
    def test_env_seed_wins_over_flag(self, config_path, tmp_path, monkeypatch):
        out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
        main(["run", "--config", config_path, "--out", out1, "--set", "seed=9"])
        monkeypatch.setenv("DSTAR_SEED", "9")
        main(["run", "--config", config_path, "--out", out2, "--set", "seed=4"])
        assert ((tmp_path / "a" / "metrics.csv").read_bytes()
                == (tmp_path / "b" / "metrics.csv").read_bytes())
