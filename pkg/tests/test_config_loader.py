#!/usr/bin/env python3
"""
Tests for the configuration loader
"""

import os
import sys
import tempfile
import unittest

# Add src directory to path
sys.path.insert(0, os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "src"))

from config_loader import ConfigLoader


class TestConfigLoader(unittest.TestCase):
    """Test configuration loading and saving"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.path = os.path.join(self.tmp.name, "unaryflow.conf")

    def tearDown(self):
        self.tmp.cleanup()

    def write(self, text):
        with open(self.path, "w") as f:
            f.write(text)

    def test_missing_file_uses_defaults(self):
        with self.assertLogs("config_loader", level="WARNING"):
            config = ConfigLoader(self.path)
        self.assertEqual(config.get_int("General", "workers"), 0)
        self.assertEqual(config.get_int_list("Bench", "n_values"), [4, 6, 8])
        self.assertEqual(config.get_float("Costs", "and"), 1.5)

    def test_file_overlays_defaults(self):
        self.write("[Streams]\nlfsr_polynomial = 0xB8\nsobol_dimensions = 2, 5\n")
        config = ConfigLoader(self.path)
        self.assertEqual(config.get_int("Streams", "lfsr_polynomial"), 0xB8)
        self.assertEqual(config.get_int_list("Streams", "sobol_dimensions"), [2, 5])
        self.assertEqual(config.get_int("Streams", "lfsr_seed_a"), 1)

    def test_invalid_values_fall_back(self):
        self.write("[General]\nworkers = many\n[Bench]\nn_values = 4 x\n")
        config = ConfigLoader(self.path)
        with self.assertLogs("config_loader", level="ERROR"):
            self.assertEqual(config.get_int("General", "workers", 2), 2)
        with self.assertLogs("config_loader", level="ERROR"):
            self.assertEqual(config.get_int_list("Bench", "n_values", [4]), [4])

    def test_malformed_file_keeps_defaults(self):
        self.write("no section header here\n")
        with self.assertLogs("config_loader", level="ERROR"):
            config = ConfigLoader(self.path)
        self.assertEqual(config.get("General", "format"), "csv")

    def test_missing_option_uses_fallback(self):
        config = ConfigLoader(self.path)
        self.assertEqual(config.get("Nowhere", "thing", "x"), "x")
        self.assertEqual(config.get_list("Bench", "missing", ["a"]), ["a"])

    def test_save_and_reload(self):
        config = ConfigLoader(self.path)
        config.set("Bench", "matrix_trials", 5)
        config.set("Extra", "note", "kept")
        self.assertTrue(config.save())
        reloaded = ConfigLoader(self.path)
        self.assertEqual(reloaded.get_int("Bench", "matrix_trials"), 5)
        self.assertEqual(reloaded.get_all()["Extra"]["note"], "kept")

    def test_save_to_other_path(self):
        config = ConfigLoader(self.path)
        config.set("Bench", "domains", "exclusive")
        other = self.path + ".saved"
        self.assertTrue(config.save(other))
        self.assertEqual(ConfigLoader(other).get_list("Bench", "domains"), ["exclusive"])
        self.assertEqual(ConfigLoader(self.path).get_list("Bench", "domains"), ["inclusive", "exclusive"])

    def test_save_to_missing_directory(self):
        config = ConfigLoader(self.path)
        self.assertFalse(config.save(os.path.join(self.path + ".d", "nowhere", "x.conf")))


if __name__ == "__main__":
    unittest.main()
