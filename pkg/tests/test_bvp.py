import unittest

import numpy as np

from src.bvp import (
    DiskFunction,
    HilbertProblem,
    ProbeFamily,
    hilbert_kernel_family,
    make_reducer,
    path_limits,
    poisson_extend,
    probe_limits,
    schwarz_extend,
    solve_dirichlet_beltrami,
    solve_exterior_poincare,
    solve_hilbert_beltrami,
    solve_hilbert_generalized,
    solve_poincare_poisson,
)
from src.errors import ConfigError, NonzeroIndexError
from src.field_core import BoundaryFunction, SolverConfig, disk_indicator, make_grid, radial_stretch, smooth_bump
from src.series import PowerSeries

M = 512


def _inner_normal():
    return BoundaryFunction.from_function(lambda t: -np.exp(1j * t), n_samples=M, unimodular=True)


class TestProbeFamily(unittest.TestCase):
    def test_rejects_unknown_approach(self):
        with self.assertRaises(ConfigError):
            ProbeFamily(np.array([0.0]), approach="tangential")

    def test_rejects_wide_stolz_angle(self):
        with self.assertRaises(ConfigError):
            ProbeFamily(np.array([0.0]), approach="stolz", stolz_angle=1.0)

    def test_rejects_increasing_schedule(self):
        with self.assertRaises(ConfigError):
            ProbeFamily(np.array([0.0]), deltas=np.array([0.01, 0.1]))

    def test_custom_arc_must_stay_inside(self):
        with self.assertRaises(ConfigError):
            ProbeFamily(np.array([0.0]), approach="custom", arcs=(np.array([0.5, 1.1]),))

    def test_singular_points_are_skipped(self):
        probes = ProbeFamily.around_circle(64, singular_points=(0.0, np.pi), margin=0.1)
        self.assertTrue(np.all(np.abs(np.sin(probes.t)) > np.sin(0.1) - 1e-12))
        self.assertLess(probes.t.size, 64)

    def test_limits_of_identity(self):
        z = DiskFunction.from_series(PowerSeries([0.0, 1.0]))
        for approach in ("radial", "stolz"):
            probes = ProbeFamily.around_circle(32, approach=approach)
            limits, discrepancy = path_limits(z, probes)
            self.assertTrue(np.allclose(limits, probes.zeta, atol=1e-12))
            self.assertLess(discrepancy, 1e-12)

    def test_stolz_rays_agree_for_continuous_field(self):
        field = DiskFunction(lambda w: w * np.abs(w), lambda w: 1.5 * np.abs(w),
                             lambda w: w ** 2 / (2.0 * np.abs(w)))
        rays = ProbeFamily(np.array([0.0]), approach="stolz")
        report = probe_limits(field, rays, BoundaryFunction.constant(1.0))
        self.assertAlmostEqual(float(report.frame["limit_re"].iloc[0]), 1.0, places=6)
        self.assertLessEqual(report.stolz_discrepancy, 1e-6)
        self.assertTrue(report.passed)

    def test_directional_reducer(self):
        z2 = DiskFunction.from_series(PowerSeries([0.0, 0.0, 1.0]))
        radial = BoundaryFunction.from_function(lambda t: np.exp(1j * t), n_samples=M)
        report = probe_limits(z2, ProbeFamily.around_circle(32), lambda t: 2.0 * np.cos(2.0 * t),
                              make_reducer("directional", radial))
        self.assertTrue(report.passed)
        with self.assertRaises(ConfigError):
            make_reducer("re_conj")


class TestHilbert(unittest.TestCase):
    def setUp(self):
        self.grid = make_grid(4.0, 128)
        self.one = BoundaryFunction.constant(1.0, unimodular=True)
        self.cos = BoundaryFunction.from_function(np.cos, n_samples=M)

    def test_dirichlet_data_gives_z(self):
        problem = HilbertProblem(self.one, self.cos)
        solution = solve_hilbert_generalized(problem, self.grid, M, ProbeFamily.around_circle(64))
        disk = self.grid.radius <= 1.0
        self.assertLess(np.max(np.abs(solution.field.values[disk] - self.grid.Z[disk])), 1e-8)
        self.assertTrue(solution.report.passed)

    def test_nonzero_index_is_refused(self):
        e = BoundaryFunction.from_function(lambda t: np.exp(1j * t), n_samples=M, unimodular=True)
        with self.assertRaises(NonzeroIndexError) as ctx:
            HilbertProblem(e, self.cos)
        self.assertEqual(ctx.exception.index, 1)

    def test_coefficient_must_be_unimodular(self):
        with self.assertRaises(ConfigError):
            HilbertProblem(BoundaryFunction.constant(2.0), self.cos)

    def test_two_jump_coefficient(self):
        lam = BoundaryFunction.from_function(
            lambda t: np.where(t < np.pi, np.exp(0.25j * np.pi), np.exp(-0.25j * np.pi)),
            n_samples=M, breaks=(0.0, np.pi), singular_points=(0.0, np.pi), unimodular=True,
        )
        problem = HilbertProblem(lam, self.cos)
        probes = ProbeFamily.around_circle(64, singular_points=problem.singular_points, margin=0.2)
        solution = solve_hilbert_generalized(problem, self.grid, M, probes, tol=1e-2)
        self.assertTrue(solution.report.passed)

    def test_kernel_family_members_differ(self):
        problem = HilbertProblem(self.one, self.cos)
        psis = [BoundaryFunction.constant(0.0), BoundaryFunction.constant(1.0)]
        first, second = hilbert_kernel_family(problem, psis, self.grid, M)
        z = np.array([0.2 + 0.1j, -0.4j])
        self.assertTrue(np.allclose(first.h(z), z.real, atol=1e-10))
        self.assertTrue(np.allclose(second.h(z), z.real + 1j, atol=1e-10))

    def test_kernel_shift_keeps_real_condition(self):
        solution = solve_hilbert_generalized(HilbertProblem(self.one, self.cos), self.grid, M)
        shifted = solution.kernel_shift(0.5)
        t = np.linspace(0.1, 6.0, 11)
        self.assertTrue(np.allclose(shifted.h.boundary_values(t).real, np.cos(t), atol=1e-10))
        self.assertTrue(np.allclose(shifted.h.boundary_values(t).imag - np.sin(t), 0.5, atol=1e-10))

    def test_extensions(self):
        disk = self.grid.radius <= 1.0
        P = poisson_extend(self.cos, self.grid, M)
        S = schwarz_extend(self.cos, self.grid, M)
        self.assertTrue(np.allclose(P.values[disk], self.grid.Z.real[disk], atol=1e-10))
        self.assertTrue(np.allclose(S.values[disk], self.grid.Z[disk], atol=1e-10))

    def test_beltrami_dirichlet(self):
        mu = smooth_bump(self.grid, 0.125, 0.5, 0.2)
        probes = ProbeFamily.around_circle(32)
        solution = solve_dirichlet_beltrami(mu, None, self.cos, cfg=SolverConfig(k=0.2), M=M,
                                            probes=probes, tol=2e-2)
        self.assertTrue(solution.report.passed)
        self.assertLess(solution.residual, 1e-2)

    def test_radial_stretch_dirichlet_gives_stretch(self):
        grid = make_grid(4.0, 256)
        solution = solve_hilbert_beltrami(radial_stretch(grid), None, self.one, self.cos, M=M)
        half = grid.radius <= 0.5
        exact = grid.Z * grid.radius
        self.assertLess(np.max(np.abs(solution.omega.values[half] - exact[half])), 1e-2)

    def test_kernel_family_through_disk_map(self):
        mu = smooth_bump(self.grid, 0j, 0.8, 0.3)
        psis = (BoundaryFunction.constant(0.0), BoundaryFunction.from_function(np.sin, n_samples=M),
                BoundaryFunction.constant(1.0))
        paths = ProbeFamily.around_circle(32)
        members, f = [], None
        for psi in psis:
            solution = solve_hilbert_beltrami(mu, None, self.one, self.cos, psi, M=M, probes=paths, tol=1e-2, f=f)
            f = solution.f
            self.assertTrue(solution.report.passed)
            self.assertTrue(solution.imag_report.passed)
            members.append(solution.omega.values[self.grid.radius <= 1.0])
        for i in range(3):
            for j in range(i + 1, 3):
                gap = np.sqrt(np.sum(np.abs(members[i] - members[j]) ** 2) * self.grid.cell_area)
                self.assertGreaterEqual(gap, 1e-3)


class TestPoincare(unittest.TestCase):
    def setUp(self):
        self.grid = make_grid(4.0, 128)
        self.nu = _inner_normal()

    def test_compatible_neumann_data(self):
        G = smooth_bump(self.grid, 0.125j, 0.5, 3.0)
        total = float(np.sum(G.values.real) * self.grid.cell_area)
        Phi = BoundaryFunction.constant(-total / (2 * np.pi))
        solution = solve_poincare_poisson(G, self.nu, Phi, M=M, probes=ProbeFamily.around_circle(64))
        self.assertLess(abs(solution.defect), 1e-5)
        self.assertTrue(solution.report.passed)
        self.assertAlmostEqual(abs(solution.U.value_at_origin()), 0.0, places=10)

    def test_uniform_source_gives_quadratic(self):
        G = disk_indicator(self.grid, 1.0).scaled(4.0)
        solution = solve_poincare_poisson(G, self.nu, BoundaryFunction.constant(-2.0), M=M)
        inner = self.grid.radius <= 0.5
        self.assertLess(np.max(np.abs(solution.U.values[inner] - self.grid.radius[inner] ** 2)), 5e-2)

    def test_incompatible_data_reports_defect(self):
        G = smooth_bump(self.grid, 0j, 0.5)
        solution = solve_poincare_poisson(G, self.nu, BoundaryFunction.constant(1.0), M=M)
        self.assertGreater(abs(solution.defect), 1.0)

    def test_tangent_direction_is_refused(self):
        tangent = BoundaryFunction.from_function(lambda t: 1j * np.exp(1j * t), n_samples=M)
        with self.assertRaises(ConfigError):
            solve_poincare_poisson(smooth_bump(self.grid, 0j, 0.5), tangent, BoundaryFunction.constant(0.0), M=M)

    def test_exterior_problem(self):
        radial = BoundaryFunction.from_function(lambda t: np.exp(1j * t), n_samples=M)
        solution = solve_exterior_poincare(radial, BoundaryFunction.from_function(np.cos, n_samples=M), M)
        w = np.array([2.0, 2j, -1.5 + 0.5j])
        self.assertTrue(np.allclose(solution.evaluator(w).real, -np.real(1.0 / w), atol=1e-8))


if __name__ == '__main__':
    unittest.main()
