import json
import os
import subprocess
import sys
from datetime import date
from pathlib import Path

import pytest

from crashcount.ingest import DateRange, grid_to_csv
from crashcount.synth import (
    generate_calibrated_grid,
    synthetic_crash_csv,
    synthetic_weather_csv,
)

SRC = Path(__file__).resolve().parents[1] / "src"
YEAR = DateRange(date(2016, 1, 1), date(2016, 12, 31))


def run_cli(*args, cwd=None):
    env = dict(os.environ, PYTHONPATH=str(SRC))
    return subprocess.run(
        [sys.executable, "-m", "crashcount", *args],
        capture_output=True,
        text=True,
        env=env,
        cwd=cwd,
    )


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("data")
    synthetic_crash_csv(d / "crashes.csv", n_events=4000, seed=5, date_range=YEAR)
    synthetic_weather_csv(d / "weather.csv", seed=5, date_range=YEAR)
    grid, _ = generate_calibrated_grid(seed=5, date_range=YEAR)
    grid_to_csv(grid, d / "grid.csv")
    return d


class TestIngestCommand:
    def test_ingest_produces_grid_and_report(self, data_dir, tmp_path):
        out = tmp_path / "out"
        proc = run_cli(
            "ingest",
            "--crash", str(data_dir / "crashes.csv"),
            "--weather", str(data_dir / "weather.csv"),
            "--from", "2016-01-01", "--to", "2016-12-31",
            "--out", str(out),
        )
        assert proc.returncode == 0, proc.stderr
        report = json.loads((out / "ingest_report.json").read_text())
        assert report["grid_rows"] == 366 * 24
        assert report["grid_total_crashes"] == 4000
        assert (out / "grid.csv").exists()
        assert (out / "config.json").exists()
        assert (out / "input_fingerprints.json").exists()

    def test_rerun_is_byte_identical(self, data_dir, tmp_path):
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            proc = run_cli(
                "ingest",
                "--crash", str(data_dir / "crashes.csv"),
                "--weather", str(data_dir / "weather.csv"),
                "--from", "2016-01-01", "--to", "2016-12-31",
                "--out", str(out),
            )
            assert proc.returncode == 0, proc.stderr
            outs.append((out / "grid.csv").read_bytes())
        assert outs[0] == outs[1]

    def test_missing_input_exits_3(self, tmp_path):
        proc = run_cli(
            "ingest", "--crash", "nope.csv", "--weather", "nada.csv",
            "--out", str(tmp_path / "x"),
        )
        assert proc.returncode == 3
        assert proc.stderr.startswith("crashcount: error: data:")
        assert "\n" not in proc.stderr.strip()

    def test_weather_gap_exits_3_listing_dates(self, data_dir, tmp_path):
        short = tmp_path / "short_weather.csv"
        lines = (data_dir / "weather.csv").read_text().splitlines()
        short.write_text("\n".join(lines[:100]) + "\n")
        proc = run_cli(
            "ingest",
            "--crash", str(data_dir / "crashes.csv"),
            "--weather", str(short),
            "--from", "2016-01-01", "--to", "2016-12-31",
            "--out", str(tmp_path / "x"),
        )
        assert proc.returncode == 3
        assert "2016-" in proc.stderr

    def test_usage_error_exits_2(self):
        proc = run_cli("ingest", "--crash", "a.csv")
        assert proc.returncode == 2


@pytest.fixture(scope="module")
def fit_dir(data_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("fit")
    proc = run_cli(
        "fit", "--grid", str(data_dir / "grid.csv"),
        "--family", "auto", "--out", str(out),
    )
    assert proc.returncode == 0, proc.stderr
    return out


class TestFitCommand:
    def test_dispersion_report_printed_and_escalates(self, fit_dir, data_dir):
        proc = run_cli(
            "fit", "--grid", str(data_dir / "grid.csv"),
            "--family", "auto", "--out", str(fit_dir / "again"),
        )
        assert "dispersion:" in proc.stdout
        assert "overdispersed=True" in proc.stdout
        assert "family auto-selected: negbin" in proc.stdout
        artifact = json.loads((fit_dir / "model.json").read_text())
        assert artifact["payload"]["family"] == "negbin2"

    def test_summary_csv_header_exact(self, fit_dir):
        header = (fit_dir / "summary.csv").read_text().splitlines()[0]
        assert header == (
            "name,coefficient,exp_coef,percent_change,std_err,z,p_value,crash_total,crash_share"
        )

    def test_per_category_csvs_written(self, fit_dir):
        for category, expected_rows in (("hour", 24), ("weekday", 7), ("month", 12)):
            lines = (fit_dir / f"coeffs_{category}.csv").read_text().splitlines()
            assert len(lines) == expected_rows + 1

    def test_forced_poisson(self, data_dir, tmp_path):
        out = tmp_path / "pois"
        proc = run_cli(
            "fit", "--grid", str(data_dir / "grid.csv"),
            "--family", "poisson", "--out", str(out),
        )
        assert proc.returncode == 0, proc.stderr
        artifact = json.loads((out / "model.json").read_text())
        assert artifact["payload"]["family"] == "poisson"
        assert artifact["payload"]["alpha"] == "0.0"

    def test_fit_determinism_byte_identical(self, data_dir, tmp_path):
        blobs = []
        for name in ("d1", "d2"):
            out = tmp_path / name
            proc = run_cli(
                "fit", "--grid", str(data_dir / "grid.csv"),
                "--family", "negbin", "--out", str(out),
            )
            assert proc.returncode == 0, proc.stderr
            blobs.append((out / "model.json").read_bytes())
        assert blobs[0] == blobs[1]


class TestForestCommand:
    def test_forest_with_sweep(self, data_dir, tmp_path):
        out = tmp_path / "forest"
        proc = run_cli(
            "forest", "--grid", str(data_dir / "grid.csv"),
            "--trees", "5", "--sweep", "1,3,5",
            "--max-depth", "8", "--out", str(out),
        )
        assert proc.returncode == 0, proc.stderr
        sweep_lines = (out / "sweep.csv").read_text().splitlines()
        assert sweep_lines[0] == "n_trees,mae,r2"
        assert len(sweep_lines) == 4
        imp_lines = (out / "importance.csv").read_text().splitlines()[1:]
        total = sum(float(line.split(",")[1]) for line in imp_lines)
        assert abs(total - 1.0) <= 1e-9
        assert (out / "forest.json").exists()


class TestRankCommand:
    def test_full_month_rank_168_rows(self, fit_dir):
        proc = run_cli(
            "rank", "--artifact", str(fit_dir / "model.json"),
            "--month", "6", "--precip", "0", "--json",
        )
        assert proc.returncode == 0, proc.stderr
        ranked = json.loads(proc.stdout)
        assert len(ranked) == 168
        assert [r["rank"] for r in ranked] == list(range(1, 169))
        assert ranked[0]["relative_risk"] == 1.0

    def test_explicit_slots_and_table_output(self, fit_dir):
        proc = run_cli(
            "rank", "--artifact", str(fit_dir / "model.json"),
            "--month", "3", "--slots", "MO:8,FR:2,WE:14",
        )
        assert proc.returncode == 0, proc.stderr
        assert "rank" in proc.stdout
        assert proc.stdout.count("\n") >= 4

    def test_rank_deterministic_across_runs(self, fit_dir):
        args = (
            "rank", "--artifact", str(fit_dir / "model.json"),
            "--month", "6", "--precip", "1", "--json",
        )
        assert run_cli(*args).stdout == run_cli(*args).stdout

    def test_bad_month_exits_3(self, fit_dir):
        proc = run_cli(
            "rank", "--artifact", str(fit_dir / "model.json"), "--month", "13", "--json"
        )
        assert proc.returncode == 3

    def test_missing_artifact_exits_3(self, tmp_path):
        proc = run_cli("rank", "--artifact", str(tmp_path / "none.json"), "--month", "6")
        assert proc.returncode == 3
