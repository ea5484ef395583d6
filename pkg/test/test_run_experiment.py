"""Tests for run_experiment.py CLI entry point."""

import contextlib
import io
import os
import tempfile
import unittest
from unittest.mock import MagicMock, patch

from run_experiment import EXIT_FAILED, EXIT_OK, EXIT_USAGE, main
from utils.errors import ConstructionError


def _write_config(directory, body):
    path = os.path.join(directory, "experiment.yml")
    with open(path, "w", encoding="utf-8") as f:
        f.write(body)
    return path


SMALL_CONFIG = """\
variant: A
q1: 2
stages:
  - [2, 25, 3]
r: 2
only: [schedule]
budgets:
  mc_samples: 256
"""


class TestRunExperimentMain(unittest.TestCase):
    """Test main() exit statuses and output."""

    def _main(self, argv):
        stderr = io.StringIO()
        with contextlib.redirect_stderr(stderr):
            status = main(argv)
        return status, stderr.getvalue()

    def test_main_writes_report_and_exits_zero(self):
        """Test main() writes report.json and returns 0 when every hard check passes."""
        with tempfile.TemporaryDirectory() as tmp:
            path = _write_config(tmp, SMALL_CONFIG)
            out = os.path.join(tmp, "out")

            status, err = self._main(["--config", path, "--out", out, "--no-progress"])

            self.assertEqual(status, EXIT_OK)
            self.assertTrue(os.path.exists(os.path.join(out, "report.json")))
            self.assertTrue(os.path.exists(os.path.join(out, "schedule.csv")))
            self.assertIn("Report written to", err)

    @patch.dict(os.environ, {}, clear=True)
    def test_main_without_config_exits_with_usage_error(self):
        """Test main() returns 2 when no config is given."""
        status, err = self._main(["--no-progress"])

        self.assertEqual(status, EXIT_USAGE)
        self.assertIn("Error: no config given", err)

    def test_main_with_missing_config_file_exits_with_usage_error(self):
        """Test main() returns 2 for a config path that does not exist."""
        status, err = self._main(["--config", "/nonexistent/experiment.yml"])

        self.assertEqual(status, EXIT_USAGE)
        self.assertIn("not found", err)

    def test_main_with_unknown_check_exits_with_usage_error(self):
        """Test main() returns 2 when --only names an unknown check."""
        with tempfile.TemporaryDirectory() as tmp:
            path = _write_config(tmp, SMALL_CONFIG)
            status, err = self._main(["--config", path, "--only", "schedule,bogus"])

        self.assertEqual(status, EXIT_USAGE)
        self.assertIn("bogus", err)

    def test_main_with_zero_jobs_exits_with_usage_error(self):
        """Test main() returns 2 for --jobs 0."""
        with tempfile.TemporaryDirectory() as tmp:
            path = _write_config(tmp, SMALL_CONFIG)
            status, _ = self._main(["--config", path, "--jobs", "0"])

        self.assertEqual(status, EXIT_USAGE)

    @patch("run_experiment.write_report")
    @patch("run_experiment.run")
    def test_main_exits_one_when_hard_check_fails(self, mock_run, mock_write_report):
        """Test main() returns 1 and names the failures when a hard check fails."""
        mock_report = MagicMock()
        mock_report.passed = False
        mock_report.failures = ["genericity@1"]
        mock_run.return_value = mock_report
        mock_write_report.return_value = {"report.json": "0" * 64}

        with tempfile.TemporaryDirectory() as tmp:
            path = _write_config(tmp, SMALL_CONFIG)
            status, err = self._main(["--config", path, "--out", tmp])

        self.assertEqual(status, EXIT_FAILED)
        self.assertIn("hard check(s) failed: genericity@1", err)
        mock_write_report.assert_called_once_with(mock_report, tmp)

    @patch("run_experiment.run")
    def test_main_exits_one_when_construction_fails(self, mock_run):
        """Test main() returns 1 when a stage cannot be constructed."""
        mock_run.side_effect = ConstructionError("region catalog leaves the column")

        with tempfile.TemporaryDirectory() as tmp:
            path = _write_config(tmp, SMALL_CONFIG)
            status, err = self._main(["--config", path, "--out", tmp])

        self.assertEqual(status, EXIT_FAILED)
        self.assertIn("Error: region catalog leaves the column", err)

    @patch("run_experiment.run")
    def test_main_applies_command_line_overrides(self, mock_run):
        """Test main() passes --seed, --only and --jobs through to the runner."""
        mock_run.side_effect = ConstructionError("stop")

        with tempfile.TemporaryDirectory() as tmp:
            path = _write_config(tmp, SMALL_CONFIG)
            self._main(["--config", path, "--seed", "7", "--only", "genericity", "--jobs", "3", "--verbose"])

        experiment = mock_run.call_args.args[0]
        self.assertEqual(experiment.seed, 7)
        self.assertEqual(experiment.only, ("genericity",))
        self.assertEqual(mock_run.call_args.kwargs["jobs"], 3)
        self.assertTrue(mock_run.call_args.kwargs["verbose"])


if __name__ == "__main__":
    unittest.main(verbosity=2)
