"""Tests for the experiment runner and the report writer (BDD style)."""

import csv
import json
import os
import tempfile
import unittest
from concurrent.futures import ThreadPoolExecutor

from utils.config import config
from utils.errors import ParameterError
from utils.experiment_config import ExperimentConfig
from utils.report_writer import CSV_FILES, REPORT_FILE, file_sha256, write_report
from utils.runner import CheckResult, _guarded, _Job, run

SMALL_BUDGETS = {"mc_samples": 256, "map_samples": 256, "growth_samples": 64, "dimension_depth": 6}


def _experiment(**extra):
    data = {
        "variant": "A",
        "q1": 2,
        "stages": [[2, 25, 3]],
        "r": 2,
        "only": ["schedule", "genericity"],
        "budgets": SMALL_BUDGETS,
    }
    data.update(extra)
    return ExperimentConfig.from_dict(data)


def _read_csv(path):
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.reader(f))


class TestRun(unittest.TestCase):
    """Test check selection, ordering and verdicts of a run."""

    def test_when_small_variant_a_run_then_selected_checks_pass_in_order(self):
        """
        Given variant A with one stage and the schedule and genericity checks
        When the experiment runs
        Then both checks pass in report order
        """
        # When
        report = run(_experiment(), jobs=1, show_progress=False)

        # Then
        self.assertEqual([c.key for c in report.checks], ["schedule", "genericity@1"])
        self.assertTrue(report.passed)
        self.assertEqual(report.failures, [])
        self.assertEqual(len(report.stages), 1)

    def test_when_pool_size_changes_then_report_is_identical(self):
        """
        Given the same experiment
        When it runs with 1 and with 4 workers
        Then the report dicts are equal
        """
        experiment = _experiment(only=["schedule", "commutation", "area", "genericity"])

        first = run(experiment, jobs=1, show_progress=False).to_dict()
        second = run(experiment, jobs=4, show_progress=False).to_dict()

        self.assertEqual(first, second)

    def test_when_runs_with_different_seeds_overlap_then_each_matches_its_solo_run(self):
        """
        Given two experiments with different seeds and Monte Carlo budgets
        When they run one after the other and then at the same time in two threads
        Then each overlapped report equals its solo report and the shared config is untouched
        """
        # Given
        experiments = [
            _experiment(seed=1, budgets={**SMALL_BUDGETS, "mc_samples": 128}),
            _experiment(seed=7),
        ]
        shared = (config.seed, config.mc_samples, config.full_period_cap)
        solo = [run(e, jobs=1, show_progress=False).to_dict() for e in experiments]

        # When
        with ThreadPoolExecutor(max_workers=2) as pool:
            overlapped = list(pool.map(lambda e: run(e, jobs=2, show_progress=False).to_dict(), experiments))

        # Then
        self.assertEqual(overlapped, solo)
        self.assertNotEqual(solo[0], solo[1])
        self.assertEqual((config.seed, config.mc_samples, config.full_period_cap), shared)

    def test_when_cantor_variant_run_then_exchange_and_dimension_pass(self):
        """
        Given variant C with one stage
        When the exchange and dimension checks run
        Then the exchange tiles exactly and the hard dimension check passes
        """
        # Given
        experiment = _experiment(variant="C", stages=[[1, 5, 3]], r=1, only=["exchange", "dimension"])

        # When
        report = run(experiment, jobs=2, show_progress=False)

        # Then
        by_key = {c.key: c for c in report.checks}
        self.assertTrue(by_key["exchange@1"].passed)
        self.assertEqual(by_key["exchange@1"].details["mismatches"], 0)
        self.assertTrue(by_key["dimension"].hard)
        self.assertTrue(by_key["dimension"].passed)
        self.assertFalse(by_key["dimension@1"].hard)
        self.assertTrue(report.passed)

    def test_when_check_raises_then_it_becomes_a_failed_hard_result(self):
        """
        Given a job that raises ParameterError
        When it runs guarded
        Then a failed hard result carries the message
        """
        # Given
        def boom():
            raise ParameterError("bad input")

        # When
        result = _guarded(_Job("schedule", None, boom))

        # Then
        self.assertIsInstance(result, CheckResult)
        self.assertTrue(result.failed_hard)
        self.assertEqual(result.details["error"], "bad input")
        self.assertIn("schedule: bad input", result.advisories)


class TestReportWriter(unittest.TestCase):
    """Test report.json and the CSV artifacts."""

    def test_when_report_written_then_artifacts_and_hashes_are_listed(self):
        """
        Given a finished variant A run
        When its report is written
        Then every CSV exists, its hash is listed and the row counts match the run
        """
        # Given
        report = run(_experiment(), jobs=1, show_progress=False)

        with tempfile.TemporaryDirectory() as tmp:
            # When
            hashes = write_report(report, tmp)

            # Then
            with open(os.path.join(tmp, REPORT_FILE), encoding="utf-8") as f:
                data = json.load(f)
            for name in CSV_FILES:
                self.assertEqual(data["artifacts"][name], file_sha256(os.path.join(tmp, name)))
                self.assertEqual(hashes[name], data["artifacts"][name])
            self.assertIn(REPORT_FILE, hashes)
            self.assertTrue(data["passed"])
            self.assertEqual(len(_read_csv(os.path.join(tmp, "schedule.csv"))), 3)
            self.assertEqual(len(_read_csv(os.path.join(tmp, "deviations.csv"))), 1 + 7)
            self.assertEqual(len(_read_csv(os.path.join(tmp, "counts_heatmap.csv"))), 1 + 2 * 3)
            self.assertEqual(len(_read_csv(os.path.join(tmp, "boxcount.csv"))), 1)

    def test_when_same_run_written_twice_then_bytes_are_identical(self):
        """
        Given two runs of the same experiment
        When each report is written to its own directory
        Then every file has the same hash
        """
        experiment = _experiment()

        with tempfile.TemporaryDirectory() as a, tempfile.TemporaryDirectory() as b:
            first = write_report(run(experiment, jobs=1, show_progress=False), a)
            second = write_report(run(experiment, jobs=2, show_progress=False), b)

        self.assertEqual(first, second)


if __name__ == "__main__":
    unittest.main(verbosity=2)
