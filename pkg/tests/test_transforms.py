import unittest

import numpy as np

from src.errors import ConfigError, SupportError
from src.field_core import (
    ComplexField,
    disk_indicator,
    laplacian,
    make_grid,
    norm_lp,
    smooth_bump,
    wirtinger_dz,
    wirtinger_dzbar,
)
from src.transforms import beurling_transform, cauchy_transform, make_plan, newtonian_potential


class TestCauchyAndBeurling(unittest.TestCase):
    def setUp(self):
        self.grid = make_grid(4.0, 256)
        self.g = smooth_bump(self.grid, 0.25 + 0.125j, 1.0, 0.7)

    def test_cauchy_transform_inverts_dzbar(self):
        omega = cauchy_transform(self.g)
        err = np.max(np.abs(wirtinger_dzbar(omega).values - self.g.values))
        self.assertLess(err, 1e-6 * self.g.max_abs())
        self.assertEqual(omega.value_at_origin(), 0)
        self.assertEqual(omega.tail, "cauchy")

    def test_beurling_is_dz_of_cauchy(self):
        omega = cauchy_transform(self.g)
        T = beurling_transform(self.g)
        err = np.max(np.abs(wirtinger_dz(omega).values - T.values))
        self.assertLess(err, 1e-6 * self.g.max_abs())

    def test_beurling_isometry_on_zero_mass(self):
        g = smooth_bump(self.grid, 0.5, 0.75) - smooth_bump(self.grid, -0.5, 0.75)
        self.assertAlmostEqual(norm_lp(beurling_transform(g), 2) / norm_lp(g, 2), 1.0, places=8)

    def test_disk_cauchy_transform(self):
        omega = cauchy_transform(disk_indicator(self.grid, 1.0))
        Z = self.grid.Z
        with np.errstate(divide="ignore", invalid="ignore"):
            exact = np.where(np.abs(Z) <= 1.0, np.conj(Z), 1.0 / Z)
        trusted = self.grid.radius <= 0.5 * self.grid.L
        self.assertLess(np.max(np.abs(omega.values[trusted] - exact[trusted])), 5 * self.grid.h)

    def test_wide_support_is_rejected(self):
        with self.assertRaises(SupportError):
            cauchy_transform(smooth_bump(self.grid, 0j, 3.0))

    def test_plan_must_match_grid(self):
        with self.assertRaises(ConfigError):
            cauchy_transform(self.g, plan=make_plan(make_grid(4.0, 64)))


class TestPeriodizedPlan(unittest.TestCase):
    def setUp(self):
        self.grid = make_grid(4.0, 256)
        self.plan = make_plan(self.grid, "unit")

    def test_isometry_with_nonzero_mass(self):
        rng = np.random.default_rng(3)
        noise = rng.standard_normal((self.grid.n, self.grid.n)) + 1j * rng.standard_normal((self.grid.n, self.grid.n))
        noisy = ComplexField(self.grid, np.where(self.grid.radius <= 1.5, noise, 0.0), support_radius=1.5)
        for g in (noisy, disk_indicator(self.grid, 1.0)):
            ratio = norm_lp(beurling_transform(g, self.plan), 2) / norm_lp(g, 2)
            self.assertLess(abs(ratio - 1.0), 1e-9)

    def test_free_space_plan_loses_the_outer_tail(self):
        g = disk_indicator(self.grid, 1.0)
        ratio = norm_lp(beurling_transform(g), 2) / norm_lp(g, 2)
        self.assertLess(ratio, 1.0 - 1e-3)

    def test_operator_identities_hold(self):
        g = smooth_bump(self.grid, 0.25 + 0.125j, 1.0, 0.7)
        omega = cauchy_transform(g, self.plan)
        self.assertEqual(omega.tail, "affine")
        self.assertEqual(omega.value_at_origin(), 0)
        scale = g.max_abs()
        self.assertLess(np.max(np.abs(wirtinger_dzbar(omega).values - g.values)), 1e-6 * scale)
        T = beurling_transform(g, self.plan)
        self.assertLess(np.max(np.abs(wirtinger_dz(omega).values - T.values)), 1e-6 * scale)

    def test_unknown_policy(self):
        with self.assertRaises(ConfigError):
            make_plan(self.grid, "free")


class TestNewtonianPotential(unittest.TestCase):
    def setUp(self):
        self.grid = make_grid(4.0, 256)

    def test_laplacian_recovers_source(self):
        G = smooth_bump(self.grid, -0.25j, 1.0, 2.0)
        U0 = newtonian_potential(G)
        self.assertEqual(U0.value_at_origin(), 0)
        err = np.max(np.abs(laplacian(U0).values - G.values))
        self.assertLess(err, 1e-6 * G.max_abs())

    def test_uniform_disk_gives_quadratic(self):
        U0 = newtonian_potential(disk_indicator(self.grid, 1.0).scaled(4.0))
        inner = self.grid.radius <= 0.5
        self.assertLess(np.max(np.abs(U0.values[inner] - self.grid.radius[inner] ** 2)), 5e-2)
        self.assertTrue(np.all(np.isreal(U0.values)))

    def test_imaginary_part_is_ignored(self):
        G = smooth_bump(self.grid, 0j, 1.0)
        U_real = newtonian_potential(G)
        U_mixed = newtonian_potential(G + ComplexField(self.grid, 1j * G.values, support_radius=1.0))
        self.assertTrue(np.allclose(U_real.values, U_mixed.values))


if __name__ == '__main__':
    unittest.main()
