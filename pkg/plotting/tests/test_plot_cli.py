"""CLI tests plus the end-to-end acceptance check for the plotting tool."""

import shutil
from pathlib import Path

import matplotlib.pyplot as plt

from dstar_plots.cli import main
from dstar_plots.curves import load_metrics
from dstar_plots.render import build_figure

GOLDEN = Path(__file__).parent / "golden"
PATTERN = str(GOLDEN / "*" / "metrics.csv")

ATTACKS = ("empire", "little", "none")
GARS = ("average", "dstar", "median")


def _mutate_drop_accuracy(src_root, dst_root, cell):
    shutil.copytree(src_root, dst_root)
    csv_path = dst_root / cell / "metrics.csv"
    rows = csv_path.read_text().splitlines()
    out = []
    for row in rows:
        cols = row.split(",")
        del cols[4]
        out.append(",".join(cols))
    csv_path.write_text("\n".join(out) + "\n")
    return csv_path


class TestPlotCli:
    def test_image_per_attack(self, tmp_path, capsys):
        out = tmp_path / "figs"
        assert main(["--in", PATTERN, "--out", str(out)]) == 0
        written = sorted(p.name for p in out.iterdir())
        assert written == [f"accuracy_{a}.png" for a in ATTACKS]
        assert all((out / name).stat().st_size > 0 for name in written)
        stdout = capsys.readouterr().out
        assert stdout.count("wrote ") == 3

    def test_mutated_schema_exit_2(self, tmp_path, capsys):
        mutated = _mutate_drop_accuracy(GOLDEN, tmp_path / "sweep",
                                        "average__none")
        code = main(["--in", str(tmp_path / "sweep" / "*" / "metrics.csv"),
                     "--out", str(tmp_path / "figs")])
        assert code == 2
        err = capsys.readouterr().err
        assert "input error" in err
        assert "missing column 'accuracy'" in err
        assert str(mutated) in err
        assert not (tmp_path / "figs").exists()

    def test_no_match_exit_2(self, tmp_path, capsys):
        code = main(["--in", str(tmp_path / "none" / "*.csv"),
                     "--out", str(tmp_path / "figs")])
        assert code == 2
        assert "no files match" in capsys.readouterr().err

    def test_blocked_out_dir_exit_3(self, tmp_path, capsys):
        blocker = tmp_path / "figs"
        blocker.write_text("in the way")
        code = main(["--in", PATTERN, "--out", str(blocker)])
        assert code == 3
        assert "plot failed" in capsys.readouterr().err

    def test_reruns_byte_identical(self, tmp_path):
        main(["--in", PATTERN, "--out", str(tmp_path / "a")])
        main(["--in", PATTERN, "--out", str(tmp_path / "b")])
        for attack in ATTACKS:
            img_a = (tmp_path / "a" / f"accuracy_{attack}.png").read_bytes()
            img_b = (tmp_path / "b" / f"accuracy_{attack}.png").read_bytes()
            assert img_a == img_b


class TestAcceptance:
    def test_criterion_9_plot_pipeline(self, tmp_path, capsys, report):
        # image per attack from the committed golden sweep
        out = tmp_path / "figs"
        ok = main(["--in", PATTERN, "--out", str(out)]) == 0
        images = sorted(p.name for p in out.iterdir()) if out.exists() else []
        ok = ok and images == [f"accuracy_{a}.png" for a in ATTACKS]

        # legend entry per rule in each figure
        for curves in load_metrics(PATTERN):
            fig = build_figure(curves)
            try:
                legend = fig.axes[0].get_legend()
                labels = sorted(t.get_text() for t in legend.get_texts())
                ok = ok and labels == list(GARS)
            finally:
                plt.close(fig)

        # schema-mutated CSV fails with a named-column error
        _mutate_drop_accuracy(GOLDEN, tmp_path / "sweep", "dstar__little")
        code = main(["--in", str(tmp_path / "sweep" / "*" / "metrics.csv"),
                     "--out", str(tmp_path / "figs2")])
        err = capsys.readouterr().err
        named = code == 2 and "missing column 'accuracy'" in err
        ok = ok and named

        # the simulator tree never mentions this package (runs without it)
        repo_root = Path(__file__).resolve().parents[2]
        independent = True
        for tree in (repo_root / "src", repo_root / "tests"):
            if not tree.is_dir():
                continue
            for path in tree.rglob("*.py"):
                independent = independent and "dstar_plots" not in path.read_text()
        ok = ok and independent

        report("9", ok,
               f"{len(images)} images, named-column error={named}, "
               f"primary tree independent={independent}")
        assert ok
