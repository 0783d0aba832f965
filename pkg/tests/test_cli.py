import subprocess
import sys

import pytest

from boafi.cli import HEADER, main, parse_args, read_csv, write_csv
from boafi.experiments import PAPER_GRID, SweepRow
from boafi.engine import Tournament, Truncation

QUICK = ["--problem", "onemax", "--n", "10", "--runs", "2", "--seed", "3"]


class TestParse:
    def test_paper_sweep(self):
        args = parse_args("sweep --problem trap5 --grid paper --experiments 10 --seed 42 --out s.csv".split())
        assert args.grid == PAPER_GRID and len(args.grid) == 28
        assert args.n == 50 and args.experiments == 10 and args.seed == 42

    def test_paper_flag(self):
        args = parse_args("sweep --paper".split())
        assert args.grid == PAPER_GRID and args.experiments == 30

    @pytest.mark.parametrize("problem, n", [("onemax", 50), ("trap4", 40), ("trap5", 50)])
    def test_default_lengths(self, problem, n):
        assert parse_args(["run", "--problem", problem]).n == n

    def test_selection(self):
        assert parse_args("run --selection tournament:4".split()).selection == Tournament(4)
        assert parse_args("run --selection truncation".split()).selection == Truncation(0.5)

    def test_grid_list(self):
        assert parse_args("sweep --grid 0,0.5,0.99".split()).grid == (0.0, 0.5, 0.99)

    @pytest.mark.parametrize("argv", [
        "run --problem trap4 --n 41",
        "run --proportion 1.0",
        "run --proportion -0.1",
        "sweep --grid 0,1.5",
        "run --bogus",
        "run --metric mdl",
        "run --selection roulette",
        "run --selection tournament:0",
        "frobnicate",
    ])
    def test_usage_errors(self, argv, capsys):
        with pytest.raises(SystemExit) as exc:
            parse_args(argv.split())
        assert exc.value.code != 0

    def test_usage_error_exit_status(self):
        proc = subprocess.run([sys.executable, "-m", "boafi.cli", "run", "--problem", "trap4", "--n", "41"],
                              capture_output=True, text=True)
        assert proc.returncode != 0
        assert "divisible" in proc.stderr


class TestCsv:
    rows = [SweepRow("onemax", 50, 0.0, 0, 123, 64, 1000.5, 1.0),
            SweepRow("onemax", 50, 0.99, 1, 456, 320, 333.3333333333333, 3.0000000000000004),
            SweepRow("trap4", 40, 0.5, 0, 7, 128, 1e6, None)]

    def test_round_trip(self, tmp_path):
        path = tmp_path / "r.csv"
        write_csv(self.rows, path)
        assert read_csv(path) == self.rows

    def test_format(self, tmp_path):
        path = tmp_path / "r.csv"
        write_csv(self.rows, path)
        raw = path.read_bytes()
        assert b"\r" not in raw
        lines = raw.decode().splitlines()
        assert lines[0] == ",".join(HEADER)
        assert HEADER == ["problem", "n", "proportion", "experiment", "seed", "min_population",
                          "mean_actual_evaluations", "speedup"]
        assert all(len(line.split(",")) == 8 for line in lines)
        assert lines[3].endswith(",")

    def test_header_only(self, tmp_path):
        path = tmp_path / "e.csv"
        write_csv([], path)
        assert path.read_text() == ",".join(HEADER) + "\n"

    def test_unwritable(self, tmp_path):
        with pytest.raises(OSError):
            write_csv(self.rows, tmp_path / "missing" / "r.csv")


class TestCommands:
    def test_run_single_population(self, tmp_path, capsys):
        assert main(["run", *QUICK, "--population", "100"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "run,succeeded,actual_evaluations,generations,best_true_fitness"
        assert len(lines) == 3

    def test_run_experiment(self, tmp_path):
        out = tmp_path / "run.csv"
        assert main(["run", *QUICK, "--proportion", "0.5", "--out", str(out)]) == 0
        (row,) = read_csv(out)
        assert row.proportion == 0.5 and row.min_population >= 64

    def test_sweep_writes_csv_and_figures(self, tmp_path):
        out = tmp_path / "sweep.csv"
        argv = ["sweep", *QUICK, "--grid", "0,0.9", "--experiments", "2", "--out", str(out)]
        assert main(argv) == 0
        rows = read_csv(out)
        assert [(r.proportion, r.experiment) for r in rows] == [(0.0, 0), (0.0, 1), (0.9, 0), (0.9, 1)]
        assert rows[0].speedup is not None
        assert out.with_suffix(".svg").exists() and out.with_suffix(".png").exists()
        first = out.read_bytes()
        assert main(argv) == 0
        assert out.read_bytes() == first

    def test_plot(self, tmp_path):
        src = tmp_path / "in.csv"
        write_csv(TestCsv.rows[:2], src)
        svg = tmp_path / "fig.svg"
        assert main(["plot", "--in", str(src), "--out", str(svg)]) == 0
        assert svg.exists() and svg.with_suffix(".png").exists()

    def test_unwritable_output_exit_status(self, tmp_path, capsys):
        bad = tmp_path / "nope" / "x.csv"
        assert main(["run", *QUICK, "--out", str(bad)]) == 1
        assert not bad.exists()
        assert "error" in capsys.readouterr().err
