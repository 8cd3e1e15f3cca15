import csv
import json
from datetime import date
from pathlib import Path

import pytest

from driftkit.cli import main
from driftkit.synthmarket import SynthMarketSpec, generate

FIXTURE = Path(__file__).parent / "fixtures" / "events_1k.csv"
GOLDEN = Path(__file__).parent / "fixtures" / "golden_drift_local"


def run(*argv):
    return main(list(argv))


@pytest.fixture(scope="module")
def static_log(tmp_path_factory):
    """A churn-free market: every month shares one true distribution."""
    out = tmp_path_factory.mktemp("static")
    spec = SynthMarketSpec(
        catalog_size=50,
        zipf_exponent=1.0,
        monthly_churn=0.0,
        seasonal_fraction=0.0,
        stable_head_ranks=0,
        loans_per_bin=2000,
        n_bins=26,
        start=date(2022, 1, 1),
        n_loaners=40,
        seed=7,
    )
    generate(spec, out / "events.csv")
    return out / "events.csv"


class TestDrift:
    def test_local_on_static_market_near_zero(self, static_log, tmp_path):
        code = run(
            "drift", "local", "--input", str(static_log), "--output-dir", str(tmp_path)
        )
        assert code == 0
        with open(tmp_path / "drift_local.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 25
        assert all(0.0 <= float(r["value"]) < 0.05 for r in rows)
        assert (tmp_path / "manifest.json").exists()

    def test_global_missing_baseline_exits_2(self, static_log, tmp_path, capsys):
        code = run(
            "drift",
            "global",
            "--input",
            str(static_log),
            "--output-dir",
            str(tmp_path),
            "--baseline",
            "2031-05-01",
        )
        assert code == 2
        assert "2031-05-01" in capsys.readouterr().err

    def test_matrix_written_square(self, static_log, tmp_path):
        code = run(
            "drift", "matrix", "--input", str(static_log), "--output-dir", str(tmp_path),
            "--window-start", "2022-01-01", "--window-end", "2022-04-30",
        )
        assert code == 0
        with open(tmp_path / "drift_matrix.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert len(rows) == 5 and len(rows[0]) == 5
        assert rows[1][1] == "0.0"

    def test_bootstrap_fills_std_error(self, static_log, tmp_path):
        code = run(
            "drift", "local", "--input", str(static_log), "--output-dir", str(tmp_path),
            "--estimator", "bootstrap", "--resamples", "25", "--seed", "3",
            "--window-start", "2022-01-01", "--window-end", "2022-03-31",
        )
        assert code == 0
        with open(tmp_path / "drift_local.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert all(r["std_error"] for r in rows)


class TestGoldenFixture:
    def test_matches_golden_output(self, tmp_path):
        code = run(
            "drift", "local", "--input", str(FIXTURE), "--output-dir", str(tmp_path),
            "--top-k", "0",
        )
        assert code == 0
        got = (tmp_path / "drift_local.csv").read_bytes()
        assert got == (GOLDEN / "drift_local.csv").read_bytes()

    def test_repeated_runs_byte_identical(self, tmp_path):
        args = (
            "drift", "local", "--input", str(FIXTURE), "--output-dir", str(tmp_path),
            "--top-k", "0", "--estimator", "bootstrap", "--resamples", "20", "--seed", "5",
        )
        assert run(*args) == 0
        first = {p.name: p.read_bytes() for p in tmp_path.iterdir()}
        assert run(*args) == 0
        second = {p.name: p.read_bytes() for p in tmp_path.iterdir()}
        assert first == second


class TestExitCodes:
    def test_unknown_subcommand_is_usage_error(self, capsys):
        assert run("frobnicate") == 1

    def test_conflicting_or_bad_flag(self):
        assert run("drift", "local", "--estimator", "magic") == 1

    def test_missing_input_is_usage_error(self, tmp_path):
        assert run("drift", "local", "--output-dir", str(tmp_path)) == 1

    def test_unreadable_input_is_data_error(self, tmp_path):
        assert (
            run("drift", "local", "--input", str(tmp_path / "nope.csv"), "--output-dir", str(tmp_path))
            == 2
        )

    def test_bad_config_file_value(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("granularity = fortnight\n")
        assert run("drift", "local", "--config", str(cfg)) == 1


class TestConfigFile:
    def test_config_merging_and_flag_override(self, static_log, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text(
            "\n".join(
                [
                    "# analysis window",
                    f"input = {static_log}",
                    "granularity = month",
                    "window_start = 2022-01-01",
                    "window_end = 2022-05-31",
                    "top_k = 0",
                    f"output_dir = {tmp_path / 'out_a'}",
                ]
            )
        )
        assert run("drift", "local", "--config", str(cfg)) == 0
        with open(tmp_path / "out_a" / "drift_local.csv", newline="") as fh:
            assert len(list(csv.DictReader(fh))) == 4
        # flag overrides the file's window
        assert (
            run(
                "drift", "local", "--config", str(cfg),
                "--window-end", "2022-03-31",
                "--output-dir", str(tmp_path / "out_b"),
            )
            == 0
        )
        with open(tmp_path / "out_b" / "drift_local.csv", newline="") as fh:
            assert len(list(csv.DictReader(fh))) == 2

    def test_exclusion_ranges_drop_months(self, static_log, tmp_path):
        assert (
            run(
                "drift", "local", "--input", str(static_log),
                "--output-dir", str(tmp_path),
                "--window-start", "2022-01-01", "--window-end", "2022-06-30",
                "--exclude", "2022-03-01:2022-03-31",
            )
            == 2  # gap in the bin sequence is a data error for local drift
        )


class TestIngestCheckAndCanon:
    def test_ingest_check_reports(self, static_log, capsys):
        assert run("ingest-check", "--input", str(static_log)) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["accepted"] == 52000 and report["malformed"] == 0

    def test_canon_roundtrip(self, tmp_path):
        items = tmp_path / "items.csv"
        with open(items, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["item_key", "title", "creator"])
            writer.writerow(["k1", "Pixel Ninja", "A. Writer"])
            writer.writerow(["k2", "Pixel Ninja 1", "A. Writer"])
            writer.writerow(["k3", "Pixel Ninja 2", "A. Writer"])
        out = tmp_path / "mapping.csv"
        assert run("canon", "--items", str(items), "--out", str(out)) == 0
        with open(out, newline="") as fh:
            mapping = {r["item_key"]: r["canonical_id"] for r in csv.DictReader(fh)}
        assert mapping == {"k1": "k1", "k2": "k1", "k3": "k3"}


class TestAnalysisCommands:
    def test_contrib_shares_sum_to_one(self, static_log, tmp_path):
        code = run(
            "contrib", "--input", str(static_log), "--output-dir", str(tmp_path),
            "--window-start", "2022-01-01", "--window-end", "2022-04-30",
            "--dump-pair", "2022-03-01",
        )
        assert code == 0
        with open(tmp_path / "group_shares_local.csv", newline="") as fh:
            for row in csv.DictReader(fh):
                total = sum(float(row[g]) for g in ("g1", "g2", "g3", "g4", "g5"))
                assert total == pytest.approx(1.0, abs=1e-9)
        assert (tmp_path / "contributions_2022-03-01.csv").exists()

    def test_transitions_rows_stochastic(self, static_log, tmp_path):
        code = run(
            "transitions", "--input", str(static_log), "--output-dir", str(tmp_path),
            "--window-start", "2022-01-01", "--window-end", "2022-05-31",
        )
        assert code == 0
        with open(tmp_path / "transitions.csv", newline="") as fh:
            for row in csv.DictReader(fh):
                total = sum(float(row[g]) for g in ("g1", "g2", "g3", "g4", "g5"))
                assert total == pytest.approx(1.0, abs=1e-9)

    def test_trajectories_sorted_by_peak(self, static_log, tmp_path):
        code = run(
            "trajectories", "--input", str(static_log), "--output-dir", str(tmp_path),
            "--selector", "top_total", "--k", "10",
        )
        assert code == 0
        with open(tmp_path / "trajectories.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 10
        peaks = [r["peak_bin"] for r in rows]
        assert peaks == sorted(peaks)

    def test_predict_round_trip(self, static_log, tmp_path):
        code = run(
            "predict", "--kind", "local", "--input", str(static_log),
            "--output-dir", str(tmp_path),
            "--source-year", "2022", "--target-year", "2023",
        )
        assert code == 0
        summary = json.loads((tmp_path / "forecast_local.json").read_text())
        assert summary["source_year"] == 2022 and summary["target_year"] == 2023
        assert summary["mae"] < 0.05  # static market: drift is all noise
        assert (tmp_path / "forecast_local.csv").exists()

    def test_predict_global_uses_year_baselines(self, static_log, tmp_path):
        code = run(
            "predict", "--kind", "global", "--input", str(static_log),
            "--output-dir", str(tmp_path),
            "--source-year", "2022", "--target-year", "2023",
        )
        assert code == 0
        summary = json.loads((tmp_path / "forecast_global.json").read_text())
        assert summary["baselines"] == ["2022-01-01", "2023-01-01"]


class TestSynthCommand:
    def test_synth_writes_log_and_truth(self, tmp_path):
        code = run(
            "synth", "--out", str(tmp_path), "--catalog-size", "50", "--churn", "0.0",
            "--seasonal-fraction", "0.0", "--loans-per-bin", "100", "--bins", "2",
            "--loaners", "20", "--seed", "1", "--truth",
        )
        assert code == 0
        with open(tmp_path / "events.csv", newline="") as fh:
            assert len(list(csv.DictReader(fh))) == 200
        assert (tmp_path / "truth.csv").exists()
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["subcommand"] == "synth"

    def test_synth_invalid_params_usage_error(self, tmp_path):
        assert run("synth", "--out", str(tmp_path), "--churn", "2.0") == 1
