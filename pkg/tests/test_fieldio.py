import os
import tempfile
import unittest

import numpy as np
import pandas as pd

from src.beltrami import QCMap
from src.divform import a_from_mu
from src.errors import ConfigError, FieldFormatError
from src.field_core import BoundaryFunction, ComplexField, make_grid, smooth_bump
from src.fieldio import (
    HEADER,
    export_field,
    export_plot_csv,
    export_plot_html,
    field_bytes,
    import_field,
    load_matrix_field,
    load_qcmap,
    parse_field,
    parse_slice,
    plot_frame,
    read_boundary_csv,
    read_report,
    read_sidecar,
    save_matrix_field,
    save_qcmap,
    write_boundary_csv,
    write_report,
    write_sidecar,
)


class TestFieldFiles(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.grid = make_grid(4.0, 64)
        self.field = smooth_bump(self.grid, 0.25, 1.0, 0.5 + 0.25j)

    def tearDown(self):
        self.tmp.cleanup()

    def _path(self, name):
        return os.path.join(self.tmp.name, name)

    def test_header_layout(self):
        self.assertEqual(HEADER.itemsize, 21)
        raw = field_bytes(self.field)
        self.assertEqual(raw[:4], b"BFLD")
        self.assertEqual(len(raw), 21 + 64 * 64 * 16)

    def test_reexport_is_bit_identical(self):
        first = export_field(self.field, self._path("a.bfld"))
        loaded = import_field(first)
        second = export_field(loaded, self._path("b.bfld"))
        with open(first, "rb") as fa, open(second, "rb") as fb:
            self.assertEqual(fa.read(), fb.read())
        self.assertEqual(loaded.grid, self.grid)

    def test_truncated_file(self):
        raw = field_bytes(self.field)
        with self.assertRaises(FieldFormatError) as ctx:
            parse_field(raw[:-8])
        self.assertIn(f"expected {len(raw)} bytes", str(ctx.exception))
        with self.assertRaises(FieldFormatError):
            parse_field(raw[:10])

    def test_unsupported_version(self):
        raw = bytearray(field_bytes(self.field))
        raw[4:8] = (2).to_bytes(4, "little")
        with self.assertRaises(FieldFormatError) as ctx:
            parse_field(bytes(raw))
        self.assertIn("unsupported version 2", str(ctx.exception))

    def test_bad_magic(self):
        raw = bytearray(field_bytes(self.field))
        raw[:4] = b"XXXX"
        with self.assertRaises(FieldFormatError):
            parse_field(bytes(raw))

    def test_invalid_grid_in_header(self):
        raw = bytearray(field_bytes(self.field))
        raw[8:12] = (48).to_bytes(4, "little")
        with self.assertRaises(FieldFormatError):
            parse_field(bytes(raw))


class TestSidecars(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.grid = make_grid(4.0, 64)

    def tearDown(self):
        self.tmp.cleanup()

    def test_sorted_key_value_lines(self):
        path = os.path.join(self.tmp.name, "meta.txt")
        write_sidecar(path, {"b": 1.5, "a": complex(1.0, 2.0), "c": "x"})
        with open(path, encoding="utf-8") as fh:
            self.assertEqual(fh.read(), "a=1.0,2.0\nb=1.5\nc=x\n")
        self.assertEqual(read_sidecar(path), {"a": "1.0,2.0", "b": "1.5", "c": "x"})

    def test_qcmap_round_trip(self):
        f = QCMap.identity(self.grid)
        save_qcmap(f, self.tmp.name, "id")
        loaded = load_qcmap(self.tmp.name, "id")
        self.assertEqual(loaded.kind, "identity")
        self.assertTrue(np.array_equal(loaded.f.values, f.f.values))
        self.assertEqual(loaded.fz.tail, "periodic")
        self.assertEqual(loaded.fzbar.support_radius, 0.0)
        self.assertEqual(loaded.mu.max_abs(), 0.0)

    def test_matrix_field_round_trip(self):
        A = a_from_mu(smooth_bump(self.grid, 0j, 1.0, 0.4))
        save_matrix_field(A, self.tmp.name)
        loaded = load_matrix_field(self.tmp.name)
        self.assertTrue(np.array_equal(loaded.a12, A.a12))
        meta = read_sidecar(os.path.join(self.tmp.name, "A.txt"))
        self.assertAlmostEqual(float(meta["k"]), 0.4)
        self.assertAlmostEqual(float(meta["K_mu_max"]), 1.4 / 0.6)

    def test_boundary_trace(self):
        path = os.path.join(self.tmp.name, "phi.csv")
        write_boundary_csv(BoundaryFunction.from_function(np.cos, n_samples=256), path, M=256)
        bf = read_boundary_csv(path, n_samples=256)
        t = np.linspace(0.0, 6.2, 17)
        self.assertTrue(np.allclose(bf.evaluate(t), np.cos(t), atol=1e-4))
        pd.DataFrame({"t": [0.0, 1.0]}).to_csv(path, index=False)
        with self.assertRaises(FieldFormatError):
            read_boundary_csv(path)

    def test_report_comments(self):
        path = os.path.join(self.tmp.name, "report.csv")
        frame = pd.DataFrame({"t": [0.5, 1.5], "abs_dev": [1e-5, 2e-5]})
        write_report(frame, path, {"passed": True, "tol": 1e-3})
        with open(path, encoding="utf-8") as fh:
            tail = fh.read().splitlines()[-2:]
        self.assertEqual(tail, ["# passed=True", "# tol=0.001"])
        pd.testing.assert_frame_equal(read_report(path), frame)


class TestPlotSlices(unittest.TestCase):
    def setUp(self):
        self.grid = make_grid(4.0, 64)
        self.quadratic = ComplexField(self.grid, self.grid.radius ** 2)

    def test_parse_slice(self):
        self.assertEqual(parse_slice("radial_ray(0.5)"), ("radial_ray", 0.5))
        self.assertEqual(parse_slice("boundary_trace"), ("boundary_trace", None))
        self.assertEqual(parse_slice("full_grid_downsampled"), ("full_grid_downsampled", 4))
        with self.assertRaises(ConfigError):
            parse_slice("spiral(2)")

    def test_radial_ray(self):
        frame = plot_frame(self.quadratic, "radial_ray", 0.0, samples=64)
        self.assertEqual(len(frame), 33)
        self.assertTrue(np.allclose(frame["re"], frame["r"] ** 2, atol=1e-8))

    def test_downsampled_grid(self):
        frame = plot_frame(self.quadratic, "full_grid_downsampled", 4)
        self.assertEqual(len(frame), 16 * 16)
        with self.assertRaises(ConfigError):
            plot_frame(self.quadratic, "full_grid_downsampled", 128)

    def test_csv_and_html_exports(self):
        with tempfile.TemporaryDirectory() as tmp:
            frame = export_plot_csv(self.quadratic, os.path.join(tmp, "trace.csv"), samples=64)
            self.assertTrue(np.allclose(frame["re"], 1.0, atol=1e-6))
            html = export_plot_html(frame, os.path.join(tmp, "trace.html"), title="trace")
            with open(html, encoding="utf-8") as fh:
                self.assertIn("field-plot", fh.read())


if __name__ == '__main__':
    unittest.main()
