import io
import json
import os
import tempfile
import unittest
from unittest.mock import patch

from src.cli import (
    EXIT_CONFIG,
    EXIT_FAILED,
    EXIT_OK,
    ScenarioData,
    ScenarioRunner,
    _check_radial_stretch,
    _selftest_row,
    main,
    parse_config_text,
)
from src.errors import ConfigError, ConvergenceError
from src.riemann import CircleShift


class TestConfigParsing(unittest.TestCase):
    def test_comments_and_blank_lines(self):
        config = parse_config_text("# scenario\n\nmu = bump  # inline\ngrid_n=64\n")
        self.assertEqual(config, {"mu": "bump", "grid_n": "64"})

    def test_unknown_key_is_named(self):
        with self.assertRaises(ConfigError) as ctx:
            parse_config_text("mu=bump\nbogus=1\n", source="case.cfg")
        self.assertIn("case.cfg:2", str(ctx.exception))
        self.assertIn("'bogus'", str(ctx.exception))

    def test_line_without_separator(self):
        with self.assertRaises(ConfigError):
            parse_config_text("mu bump\n")

    def test_shift_cases(self):
        base = {"grid_n": "64", "boundary_samples": "256"}
        self.assertIsNone(ScenarioData(base).shift())
        self.assertIsInstance(ScenarioData({**base, "shift": "rotation:0.3"}).shift(), CircleShift)
        for bad in ("rotation:x", "spiral"):
            with self.assertRaises(ConfigError):
                ScenarioData({**base, "shift": bad}).shift()

    def test_bad_grid_is_a_config_error(self):
        with self.assertRaises(ConfigError):
            ScenarioData({"grid_n": "sixty-four"})


class TestScenarioRunner(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def _dir(self, name):
        return os.path.join(self.tmp.name, name)

    def _manifest(self, name):
        with open(os.path.join(self._dir(name), "manifest.json"), encoding="utf-8") as fh:
            return json.load(fh)

    @patch("sys.stdout", new_callable=io.StringIO)
    def test_unknown_key_exits_with_config_code(self, mock_stdout):
        path = os.path.join(self.tmp.name, "bad.cfg")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("lambda=one\nbogus=1\n")
        code = main(["hilbert", "--config", path, "--out-dir", self._dir("bad")])
        self.assertEqual(code, EXIT_CONFIG)
        self.assertIn("unknown key 'bogus'", mock_stdout.getvalue())

    @patch("sys.stdout", new_callable=io.StringIO)
    def test_missing_config_file(self, mock_stdout):
        code = main(["probe", "--config", os.path.join(self.tmp.name, "absent.cfg")])
        self.assertEqual(code, EXIT_CONFIG)

    @patch("sys.stdout", new_callable=io.StringIO)
    def test_missing_required_key(self, mock_stdout):
        runner = ScenarioRunner("hilbert", {"phi": "cos"}, self._dir("hilbert"), grid_n=64)
        self.assertEqual(runner.run(), EXIT_CONFIG)
        manifest = self._manifest("hilbert")
        self.assertEqual(manifest["status"], "config_error")
        self.assertIn("'lambda'", manifest["error"])

    @patch("sys.stdout", new_callable=io.StringIO)
    def test_manifest_is_reproducible(self, mock_stdout):
        config = {"mu": "bump", "half_width": "4.0"}
        for name in ("first", "second"):
            self.assertEqual(ScenarioRunner("convert-a-mu", config, self._dir(name), grid_n=64).run(), EXIT_OK)
        texts = []
        for name in ("first", "second"):
            with open(os.path.join(self._dir(name), "manifest.json"), encoding="utf-8") as fh:
                texts.append(fh.read())
        self.assertEqual(texts[0], texts[1])
        manifest = json.loads(texts[0])
        self.assertTrue(manifest["gates"]["round_trip"])
        self.assertIn("A_a11.bfld", manifest["artifacts"])
        self.assertEqual(manifest["config"]["grid_n"], "64")
        self.assertEqual(manifest["libraries"]["test_bump_library_version"], 1)

    @patch("sys.stdout", new_callable=io.StringIO)
    def test_probe_of_constant_field(self, mock_stdout):
        runner = ScenarioRunner("probe", {"field": "four", "target": "4"}, self._dir("probe"), grid_n=64)
        self.assertEqual(runner.run(), EXIT_OK)
        manifest = self._manifest("probe")
        self.assertEqual(manifest["status"], "ok")
        self.assertIn("probe.csv", manifest["artifacts"])

    @patch("sys.stdout", new_callable=io.StringIO)
    def test_failed_gate_exits_with_failure(self, mock_stdout):
        runner = ScenarioRunner("probe", {"field": "four", "target": "3"}, self._dir("gate"), grid_n=64)
        self.assertEqual(runner.run(), EXIT_FAILED)
        self.assertEqual(self._manifest("gate")["status"], "gate_failed")

    @patch("src.cli.solve_nonhomogeneous_detailed")
    @patch("sys.stdout", new_callable=io.StringIO)
    def test_solver_failure(self, mock_stdout, mock_solve):
        mock_solve.side_effect = ConvergenceError("no contraction", 3, 0.5)
        runner = ScenarioRunner("solve-beltrami", {"mu": "bump", "sigma": "bump"}, self._dir("solve"), grid_n=64)
        self.assertEqual(runner.run(), EXIT_FAILED)
        mock_solve.assert_called_once()
        manifest = self._manifest("solve")
        self.assertEqual(manifest["status"], "solver_error")
        self.assertIn("ConvergenceError", manifest["error"])

    @patch("src.cli.BOUNDARY_CHECKS", (lambda grid, M: [("boundary_value", 0.5, 1.0)],))
    @patch("src.cli.GRID_CHECKS", (lambda grid: [("order", 1.2, 1.0, "min"), ("error", 3e-2, 2e-2)],))
    @patch("sys.stdout", new_callable=io.StringIO)
    def test_selftest_gates_follow_bounds(self, mock_stdout):
        runner = ScenarioRunner("selftest", {}, self._dir("selftest"), grid_n=64)
        self.assertEqual(runner.run(), EXIT_FAILED)
        gates = self._manifest("selftest")["gates"]
        self.assertTrue(gates["order"])
        self.assertFalse(gates["error"])
        self.assertTrue(gates["boundary_value"])
        self.assertIn("error", mock_stdout.getvalue())

    @patch("src.cli._stretch_error", side_effect=[4e-2, 2e-2, 1e-2])
    def test_radial_stretch_order_check(self, mock_error):
        rows = [_selftest_row(*row) for row in _check_radial_stretch(ScenarioData({"grid_n": "64"}).grid)]
        self.assertEqual([call.args[1] for call in mock_error.call_args_list], [128, 256, 512])
        self.assertEqual([row["bound"] for row in rows], ["min", "max"])
        self.assertAlmostEqual(rows[0]["value"], 1.0, places=12)
        self.assertTrue(all(row["passed"] for row in rows))

    def test_unknown_subcommand(self):
        with self.assertRaises(ConfigError):
            ScenarioRunner("plot", {})


if __name__ == '__main__':
    unittest.main()
