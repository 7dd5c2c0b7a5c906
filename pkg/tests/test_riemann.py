import unittest
from types import SimpleNamespace

import numpy as np

from src.beltrami import QCMap, disk_normalized_map
from src.errors import ConfigError, NonzeroIndexError
from src.field_core import BoundaryFunction, make_grid, smooth_bump
from src.riemann import (
    CircleShift,
    RiemannProblem,
    plemelj_split,
    solve_nonlinear_riemann,
    solve_riemann,
    solve_riemann_shift,
    transport_chain_rule,
    transport_direction,
)

M = 512


def _exp(k):
    return BoundaryFunction.from_function(lambda t: np.exp(1j * k * np.asarray(t)), n_samples=M,
                                          unimodular=True)


class TestProblemData(unittest.TestCase):
    def test_vanishing_coefficient_is_refused(self):
        A = BoundaryFunction.from_function(lambda t: np.where(t < np.pi, 1.0, 0.0), n_samples=M)
        with self.assertRaises(ConfigError):
            RiemannProblem(A, BoundaryFunction.constant(0.0))

    def test_nonzero_index_is_refused(self):
        with self.assertRaises(NonzeroIndexError) as ctx:
            RiemannProblem(_exp(-2), BoundaryFunction.constant(0.0))
        self.assertEqual(ctx.exception.index, -2)

    def test_zero_coefficient_decouples(self):
        self.assertTrue(RiemannProblem(BoundaryFunction.constant(0.0), BoundaryFunction.constant(1.0)).decoupled)

    def test_shift_must_increase(self):
        t = np.linspace(0.0, 6.0, 16)
        with self.assertRaises(ConfigError):
            CircleShift(t, t[::-1])
        with self.assertRaises(ConfigError):
            CircleShift.mobius(1.5)

    def test_shift_tables(self):
        self.assertTrue(CircleShift.rotation(0.0, 64).is_identity)
        shift = CircleShift.mobius(0.3 + 0.2j, 1024)
        t = np.linspace(0.2, 6.0, 13)
        self.assertTrue(np.allclose(shift.inverse(shift.forward(t)), t, atol=1e-9))


class TestRiemann(unittest.TestCase):
    def setUp(self):
        self.grid = make_grid(4.0, 128)
        self.cos = BoundaryFunction.from_function(np.cos, n_samples=M)

    def test_homogeneous_constant_coefficient(self):
        prob = RiemannProblem(BoundaryFunction.constant(2.0), BoundaryFunction.constant(0.0), normalization=1.0)
        solution = solve_riemann(prob, grid=self.grid, M=M)
        inside = self.grid.radius <= 1.0
        outside = (self.grid.radius >= 1.0) & (self.grid.radius <= 2.0)
        self.assertLess(np.max(np.abs(solution.omega_plus.values[inside] - 2.0)), 1e-8)
        self.assertLess(np.max(np.abs(solution.omega_minus.values[outside] - 1.0)), 1e-8)
        self.assertTrue(solution.report.passed)

    def test_jump_problem(self):
        prob = RiemannProblem(BoundaryFunction.constant(1.0), self.cos)
        solution = solve_riemann(prob, grid=self.grid, M=M, tol=1e-6)
        self.assertTrue(solution.report.passed)
        self.assertLessEqual(solution.report.max_deviation, 1e-6)
        w = np.array([1.5, -2j])
        self.assertTrue(np.allclose(solution.minus_eval(w), -0.5 / w, atol=1e-10))

    def test_plemelj_split_on_grid(self):
        split = plemelj_split(self.cos, self.grid, M)
        plus, minus = split
        inside = self.grid.radius <= 1.0
        self.assertTrue(np.allclose(plus.values[inside], 0.5 * self.grid.Z[inside], atol=1e-12))
        self.assertEqual(minus.values[self.grid.origin_index], 0)

    def test_decoupled_problem_prescribes_interior(self):
        prob = RiemannProblem(BoundaryFunction.constant(0.0), self.cos, normalization=3.0)
        solution = solve_riemann(prob, grid=self.grid, M=M)
        inside = self.grid.radius <= 1.0
        self.assertTrue(np.allclose(solution.omega_plus.values[inside], self.grid.Z.real[inside], atol=1e-10))
        self.assertTrue(np.allclose(solution.minus_eval(np.array([1.5, 2j])), 3.0))
        self.assertIsNone(solution.report)

    def test_rotation_shift(self):
        prob = RiemannProblem(BoundaryFunction.constant(1.0), self.cos, shift=CircleShift.rotation(0.3, M))
        solution = solve_riemann_shift(prob, grid=self.grid, M=M, tol=1e-6)
        self.assertTrue(solution.report.passed)

    def test_identity_shift_delegates(self):
        prob = RiemannProblem(BoundaryFunction.constant(1.0), self.cos, shift=CircleShift.rotation(0.0, M))
        plain = solve_riemann(RiemannProblem(BoundaryFunction.constant(1.0), self.cos), grid=self.grid, M=M)
        shifted = solve_riemann_shift(prob, grid=self.grid, M=M)
        self.assertTrue(np.allclose(plain.omega_plus.values, shifted.omega_plus.values))

    def test_smooth_positive_coefficient(self):
        A = BoundaryFunction.from_function(lambda t: np.exp(np.cos(t)), n_samples=M)
        sin = BoundaryFunction.from_function(np.sin, n_samples=M)
        solution = solve_riemann(RiemannProblem(A, sin), grid=self.grid, M=M, tol=1e-4)
        self.assertGreaterEqual(solution.report.pass_fraction, 0.95)
        self.assertTrue(solution.report.passed)

    def test_mobius_shift(self):
        A = BoundaryFunction.from_function(lambda t: 2.0 + np.cos(t), n_samples=M)
        B = BoundaryFunction.from_function(lambda t: np.sin(2.0 * t), n_samples=M)
        prob = RiemannProblem(A, B, shift=CircleShift.mobius(0.3 + 0.2j, M))
        solution = solve_riemann_shift(prob, grid=self.grid, M=M, tol=1e-4)
        self.assertTrue(solution.report.passed)


class TestNonlinearRiemann(unittest.TestCase):
    def setUp(self):
        self.grid = make_grid(4.0, 128)

    def test_square_nonlinearity(self):
        prob = RiemannProblem(BoundaryFunction.constant(1.0), BoundaryFunction.constant(0.0),
                              nonlinearity=lambda t, w: w ** 2)
        solution = solve_nonlinear_riemann(prob, _exp(-1), grid=self.grid, M=M)
        self.assertTrue(solution.report.passed)
        self.assertAlmostEqual(complex(solution.minus_eval(np.array([2.0]))[0]), 0.5)

    def test_affine_nonlinearity(self):
        prob = RiemannProblem(BoundaryFunction.constant(1.0), BoundaryFunction.constant(0.0),
                              nonlinearity=lambda t, w: 2.0 * w + 1.0)
        solution = solve_nonlinear_riemann(prob, _exp(-1), grid=self.grid, M=M)
        z = np.array([0.3 + 0.2j, -0.5j])
        self.assertTrue(np.allclose(solution.plus_eval(z), 1.0 + 2.0 * np.conj(z), atol=1e-8))

    def test_failing_nonlinearity(self):
        def broken(t, w):
            raise ValueError("no branch")

        prob = RiemannProblem(BoundaryFunction.constant(1.0), BoundaryFunction.constant(0.0), nonlinearity=broken)
        with self.assertRaises(ConfigError):
            solve_nonlinear_riemann(prob, _exp(-1), grid=self.grid, M=M)
        with self.assertRaises(ConfigError):
            solve_nonlinear_riemann(RiemannProblem(BoundaryFunction.constant(1.0), BoundaryFunction.constant(0.0)),
                                    _exp(-1), grid=self.grid, M=M)

    def test_linear_nonlinearity_matches_direct_solve(self):
        # omega+ = 2 omega- + cos t with omega-(inf) = 1: omega- = 1 - 1/(4z), omega+ = 2 + z/2
        cos = BoundaryFunction.from_function(np.cos, n_samples=M)
        direct = solve_riemann(RiemannProblem(BoundaryFunction.constant(2.0), cos, normalization=1.0),
                               grid=self.grid, M=M)
        psi = BoundaryFunction.from_function(lambda t: 1.0 - 0.25 * np.exp(-1j * np.asarray(t)), n_samples=M)
        prob = RiemannProblem(BoundaryFunction.constant(0.0), BoundaryFunction.constant(0.0),
                              nonlinearity=lambda t, w: 2.0 * w + np.cos(t))
        recipe = solve_nonlinear_riemann(prob, psi, grid=self.grid, M=M)
        inner, outer = np.array([0.5, 0.3j, -0.2 - 0.4j]), np.array([1.5, -2j, 1.2 + 1.2j])
        self.assertTrue(np.allclose(recipe.plus_eval(inner), direct.plus_eval(inner), atol=1e-8))
        self.assertTrue(np.allclose(recipe.minus_eval(outer), direct.minus_eval(outer), atol=1e-8))
        self.assertTrue(np.allclose(direct.plus_eval(inner), 2.0 + 0.5 * inner, atol=1e-8))


class TestDirectionTransport(unittest.TestCase):
    def test_identity_map(self):
        grid = make_grid(4.0, 64)
        nu = BoundaryFunction.from_function(lambda t: 2.0 * np.exp(1j * t), n_samples=M)
        transport = transport_direction(nu, QCMap.identity(grid), M)
        t = np.linspace(0.0, 6.0, 7)
        self.assertTrue(np.allclose(transport.normalized.evaluate(t), np.exp(1j * t)))
        self.assertTrue(np.allclose(transport.modulus.evaluate(t), 2.0))
        Phi = BoundaryFunction.from_function(np.cos, n_samples=M)
        self.assertTrue(np.allclose(transport.rescale(Phi).evaluate(t), 0.5 * np.cos(t)))

    def _quadratic(self):
        """h(w) = w^2 + |w|^2 / 2, unclamped so the difference stencil may leave the disk."""
        return SimpleNamespace(evaluate=lambda w: w ** 2 + 0.5 * np.abs(w) ** 2,
                               dw=lambda w: 2.0 * w + 0.5 * np.conj(w), dwbar=lambda w: 0.5 * w)

    def test_chain_rule_for_identity_map(self):
        nu = BoundaryFunction.from_function(lambda t: np.exp(1j * (np.asarray(t) + 0.3)), n_samples=M)
        _, relative = transport_chain_rule(self._quadratic(), QCMap.identity(make_grid(4.0, 64)), nu)
        self.assertLess(relative, 1e-7)

    def test_chain_rule_through_disk_map(self):
        grid = make_grid(4.0, 256)
        f = disk_normalized_map(smooth_bump(grid, 0.2j, 0.5, 0.3))
        nu = BoundaryFunction.from_function(lambda t: np.exp(1j * (np.asarray(t) + 0.3)), n_samples=M)
        frame, relative = transport_chain_rule(self._quadratic(), f, nu)
        self.assertEqual(len(frame), 64)
        self.assertLess(relative, 1e-3)


if __name__ == '__main__':
    unittest.main()
