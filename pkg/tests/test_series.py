import unittest

import numpy as np

from src.errors import ConfigError
from src.field_core import BoundaryFunction
from src.series import (
    PowerSeries,
    fourier_coefficients,
    plemelj_series,
    poisson_series,
    sample_nodes,
    schwarz_series,
    spectral_filter,
)

M = 256


class TestFourier(unittest.TestCase):
    def test_nodes_avoid_zero(self):
        t = sample_nodes(8)
        self.assertAlmostEqual(t[0], np.pi / 8)
        self.assertTrue(np.all(t > 0))

    def test_filter_weights(self):
        w = spectral_filter(np.array([0, 32, 48, 64, 65, -65]), M)
        self.assertEqual(w[0], 1.0)
        self.assertEqual(w[1], 1.0)
        self.assertAlmostEqual(w[2], np.exp(-36.0 * 0.5 ** 12))
        self.assertAlmostEqual(w[3], np.exp(-36.0))
        self.assertEqual(w[4], 0.0)
        self.assertEqual(w[5], 0.0)

    def test_cos_coefficients(self):
        modes, c = fourier_coefficients(BoundaryFunction.from_function(np.cos), M)
        self.assertAlmostEqual(c[modes == 1][0], 0.5)
        self.assertAlmostEqual(c[modes == -1][0], 0.5)
        self.assertLess(np.max(np.abs(c[np.abs(modes) != 1])), 1e-14)

    def test_too_few_samples(self):
        with self.assertRaises(ConfigError):
            fourier_coefficients(np.ones(4))


class TestExtensions(unittest.TestCase):
    def setUp(self):
        self.z = np.array([0.0, 0.3 + 0.4j, -0.5j, 0.9])

    def test_schwarz_of_cos_is_z(self):
        F = schwarz_series(BoundaryFunction.from_function(np.cos), M)
        self.assertTrue(np.allclose(F(self.z), self.z, atol=1e-12))

    def test_schwarz_ignores_imaginary_part(self):
        F = schwarz_series(BoundaryFunction.from_function(lambda t: np.cos(t) + 5j), M)
        self.assertTrue(np.allclose(F(self.z), self.z, atol=1e-12))

    def test_poisson_of_conj_circle(self):
        H = poisson_series(BoundaryFunction.from_function(lambda t: np.exp(-1j * t)), M)
        self.assertTrue(np.allclose(H(self.z), np.conj(self.z), atol=1e-12))
        self.assertTrue(np.allclose(H.dzbar(self.z), 1.0, atol=1e-12))

    def test_plemelj_of_cos(self):
        plus, minus = plemelj_series(BoundaryFunction.from_function(np.cos), M)
        self.assertTrue(np.allclose(plus(self.z), 0.5 * self.z, atol=1e-12))
        w = np.array([2.0, -1.5j, 3 + 1j])
        self.assertTrue(np.allclose(minus(w), -0.5 / w, atol=1e-12))
        self.assertAlmostEqual(minus.at_infinity(), 0.0)
        t = np.linspace(0.0, 6.0, 9)
        self.assertTrue(np.allclose(plus.boundary_values(t) - minus.boundary_values(t), np.cos(t), atol=1e-12))


class TestPowerSeries(unittest.TestCase):
    def test_exterior_derivative(self):
        s = PowerSeries([1.0, 2.0], "outside")
        w = np.array([2.0, 1j])
        self.assertTrue(np.allclose(s.derivative()(w), -2.0 / w ** 2))

    def test_primitive_and_division(self):
        s = PowerSeries([1.0, 2.0, 3.0])
        primitive = s.antiderivative()
        self.assertTrue(np.allclose(primitive.coeffs, [0.0, 1.0, 1.0, 1.0]))
        self.assertTrue(np.allclose(primitive.divided_by_z().coeffs, [1.0, 1.0, 1.0]))
        with self.assertRaises(ConfigError):
            s.divided_by_z()

    def test_sides_do_not_mix(self):
        with self.assertRaises(ConfigError):
            PowerSeries([1.0]) + PowerSeries([1.0], "outside")
        with self.assertRaises(ConfigError):
            PowerSeries([1.0], "outside").antiderivative()
        with self.assertRaises(ConfigError):
            PowerSeries([1.0]).at_infinity()


if __name__ == '__main__':
    unittest.main()
