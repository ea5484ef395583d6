"""Tests for dump_structures.py."""

import contextlib
import csv
import io
import os
import tempfile
import unittest
from unittest.mock import patch

from dump_structures import CANTOR_HEADER, dump, main
from utils.errors import ParameterError
from utils.experiment_config import ExperimentConfig
from utils.schedule import ROW_HEADER as SCHEDULE_HEADER

VARIANT_A = {"variant": "A", "q1": 2, "stages": [[2, 25, 3]], "r": 2}
VARIANT_C = {"variant": "C", "q1": 2, "stages": [[1, 5, 3]]}


class TestDump(unittest.TestCase):
    """Test the dumped tables."""

    def test_dump_schedule_has_one_row_per_stage(self):
        """Test the schedule table lists stages 1..n_max + 1."""
        header, rows = dump("schedule", ExperimentConfig.from_dict(VARIANT_A))
        self.assertEqual(header, SCHEDULE_HEADER)
        self.assertEqual(len(rows), 2)

    def test_dump_cantor_stage_lists_kept_intervals(self):
        """Test the middle-third set at depth 3 gives 8 kept intervals in order."""
        header, rows = dump("cantor-stage", ExperimentConfig.from_dict(VARIANT_C), depth=3)
        self.assertEqual(header, CANTOR_HEADER)
        self.assertEqual([row[0] for row in rows], [str(i) for i in range(8)])

    def test_dump_cantor_stage_rejects_variant_a(self):
        """Test variant A has no Cantor set to dump."""
        with self.assertRaises(ParameterError):
            dump("cantor-stage", ExperimentConfig.from_dict(VARIANT_A))

    def test_dump_exchange_table_matches_oracle(self):
        """Test every exchange piece of variant C agrees with the index rules."""
        header, rows = dump("exchange-table", ExperimentConfig.from_dict(VARIANT_C))
        self.assertEqual(header[-1], "oracle_match")
        self.assertGreater(len(rows), 0)
        self.assertTrue(all(row[-1] == "true" for row in rows))
        self.assertTrue(all(len(row) == len(header) for row in rows))

    def test_dump_exchange_table_rejects_variant_a(self):
        """Test variant A has no rectangle exchange."""
        with self.assertRaises(ParameterError):
            dump("exchange-table", ExperimentConfig.from_dict(VARIANT_A))

    def test_dump_regions_rejects_stage_outside_config(self):
        """Test a stage past n_max is refused."""
        with self.assertRaises(ParameterError) as ctx:
            dump("regions", ExperimentConfig.from_dict(VARIANT_A), stage=2)
        self.assertIn("[1, 1]", str(ctx.exception))

    def test_dump_unknown_target_is_refused(self):
        """Test an unknown target raises ParameterError."""
        with self.assertRaises(ParameterError):
            dump("cells", ExperimentConfig.from_dict(VARIANT_A))


class TestDumpMain(unittest.TestCase):
    """Test the dump_structures.py entry point."""

    def test_main_writes_csv_file(self):
        """Test main() writes the requested table to --output and returns 0."""
        with tempfile.TemporaryDirectory() as tmp:
            config_path = os.path.join(tmp, "c.yml")
            with open(config_path, "w", encoding="utf-8") as f:
                f.write("variant: C\nq1: 2\nstages:\n  - [1, 5, 3]\n")
            output = os.path.join(tmp, "cantor.csv")

            status = main(["cantor-stage", "--config", config_path, "--depth", "2", "--output", output])

            with open(output, newline="", encoding="utf-8") as f:
                rows = list(csv.reader(f))
        self.assertEqual(status, 0)
        self.assertEqual(rows[0], CANTOR_HEADER)
        self.assertEqual(len(rows), 1 + 4)

    def test_main_without_config_returns_usage_error(self):
        """Test main() returns 2 when no config is given."""
        stderr = io.StringIO()
        with patch.dict(os.environ, {}, clear=True), contextlib.redirect_stderr(stderr):
            status = main(["schedule"])
        self.assertEqual(status, 2)
        self.assertIn("no config given", stderr.getvalue())


if __name__ == "__main__":
    unittest.main(verbosity=2)
