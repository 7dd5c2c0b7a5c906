"""
Divergence-form equations div(A grad u) = g with symmetric det-1 matrices A.

A and the Beltrami coefficient mu determine each other pointwise; solutions
are built as u = U o f with f the mu-conformal disk map and U a generalized
harmonic function with source G = (g / J) o f^{-1}.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd

from . import settings
from .beltrami import QCMap, derivative_samplers, image_nodes, resolve_config
from .bvp import (
    ComposedField,
    DirectionalReducer,
    PoincareSolution,
    ProbeReport,
    Reducer,
    _disk_map_for,
    path_limits,
    probe_limits,
    solve_poincare_poisson,
)
from .errors import ConfigError, ProbeError
from .field_core import BoundaryFunction, ComplexField, GridSpec, laplacian, wirtinger_dz
from .riemann import transport_direction

logger = logging.getLogger(__name__)

BUMPS_PER_AXIS = 5
BUMP_POWER = 4


@dataclass(frozen=True, eq=False)
class MatrixFieldA:
    """Symmetric [[a11, a12], [a12, a22]] on a grid; det = 1 up to 1e-8."""

    grid: GridSpec
    a11: np.ndarray
    a12: np.ndarray
    a22: np.ndarray

    def __post_init__(self):
        n = self.grid.n
        for name in ("a11", "a12", "a22"):
            values = np.array(getattr(self, name), dtype=float, copy=True).reshape(n, n)
            values.setflags(write=False)
            object.__setattr__(self, name, values)
        dev = self.det_deviation
        if dev > 1e-8:
            raise ConfigError(f"matrix field must have det A = 1 (deviation {dev:.3g})")

    @property
    def det(self):
        return self.a11 * self.a22 - self.a12 ** 2

    @property
    def trace(self):
        return self.a11 + self.a22

    @property
    def det_deviation(self):
        return float(np.max(np.abs(self.det - 1.0)))

    @classmethod
    def identity(cls, grid):
        one = np.ones((grid.n, grid.n))
        return cls(grid, one, np.zeros_like(one), one)

    def max_entry(self):
        return np.maximum(np.maximum(np.abs(self.a11), np.abs(self.a12)), np.abs(self.a22))

    def describe(self):
        return {"det_deviation": self.det_deviation, "max_entry": float(self.max_entry().max())}


def k_mu(mu):
    """K_mu = (1 + |mu|) / (1 - |mu|) as a real array."""
    a = np.abs(mu.values)
    return (1.0 + a) / (1.0 - a)


def _check_mu(mu):
    kmax = mu.max_abs()
    if kmax >= 1.0:
        raise ConfigError(f"|mu| reaches {kmax:.6g}; A is not elliptic")
    return kmax


def a_from_mu(mu):
    _check_mu(mu)
    m = mu.values
    scale = 1.0 - np.abs(m) ** 2
    A = MatrixFieldA(mu.grid, np.abs(1.0 - m) ** 2 / scale, -2.0 * m.imag / scale, np.abs(1.0 + m) ** 2 / scale)
    bound = k_mu(mu)
    excess = float(np.max(A.max_entry() - bound))
    if excess > 1e-8:
        logger.warning("matrix entries exceed K_mu by %.3e", excess)
    return A


def mu_from_a(A):
    det = A.det
    mu = (A.a22 - A.a11 - 2j * A.a12) / (1.0 + A.trace + det)
    kmax = float(np.max(np.abs(mu)))
    if not np.isfinite(kmax) or kmax >= 1.0:
        raise ConfigError(f"matrix field is not uniformly elliptic: |mu| reaches {kmax:.6g}")
    return ComplexField(A.grid, mu)


# ---------------------------------------------------------------------------
# Test-function library and weak residuals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BumpLibrary:
    """5 x 5 tensor bumps (1 - s^2)^4 of half-width radius/4 inside |z| < radius."""

    radius: float

    @property
    def half_width(self):
        return 0.25 * self.radius

    @property
    def centers(self):
        offsets = self.radius * np.linspace(-0.4, 0.4, BUMPS_PER_AXIS)
        cx, cy = np.meshgrid(offsets, offsets, indexing="xy")
        return cx.ravel() + 1j * cy.ravel()

    def _profile(self, s):
        inside = np.abs(s) < 1.0
        base = np.where(inside, 1.0 - s * s, 0.0)
        return base ** BUMP_POWER, np.where(inside, -2 * BUMP_POWER * s * base ** (BUMP_POWER - 1), 0.0)

    def evaluate(self, grid, center):
        """(psi, psi_x, psi_y) on the grid."""
        w = self.half_width
        bx, dbx = self._profile((grid.Z.real - center.real) / w)
        by, dby = self._profile((grid.Z.imag - center.imag) / w)
        return bx * by, dbx * by / w, bx * dby / w

    def describe(self):
        return {"tests": BUMPS_PER_AXIS ** 2, "half_width": self.half_width, "radius": self.radius,
                "version": settings.TEST_BUMP_LIBRARY_VERSION}


@dataclass(frozen=True, eq=False)
class WeakResidualReport:
    frame: pd.DataFrame
    library: BumpLibrary

    @property
    def max_abs(self):
        return float(self.frame["value"].abs().max())

    @property
    def mean_abs(self):
        return float(self.frame["value"].abs().mean())

    def summary(self):
        out = {"tests": int(len(self.frame)), "max_abs": self.max_abs, "mean_abs": self.mean_abs}
        out.update({"library_" + k: v for k, v in self.library.describe().items()})
        return out


def _gradient(u, grid, mask):
    """(u_x, u_y) of a real function at the nodes of mask."""
    if isinstance(u, ComplexField):
        uz = wirtinger_dz(u).values[mask]
    else:
        uz = u.dw(grid.Z[mask])
    return 2.0 * uz.real, -2.0 * uz.imag


def _source_values(g, grid, mask):
    if isinstance(g, ComplexField):
        return np.real(g.values[mask])
    return np.full(int(mask.sum()), float(g))


def weak_residual(A, u, g, radius=None):
    """
    Values of  int <A grad u, grad psi> + g psi  for every bump psi of the
    library on |z| < radius (default L/2). Never thresholded here.

    u is a real grid field or an evaluator with exact dw (e.g. ComposedField);
    g is a real grid field or a constant.
    """
    grid = A.grid
    radius = 0.5 * grid.L if radius is None else float(radius)
    if radius > 0.5 * grid.L + 1e-12:
        raise ProbeError(f"test functions of radius {radius:.4g} leave the trusted region |z| <= L/2")
    library = BumpLibrary(radius)
    mask = grid.radius < radius
    ux, uy = _gradient(u, grid, mask)
    flux_x = A.a11[mask] * ux + A.a12[mask] * uy
    flux_y = A.a12[mask] * ux + A.a22[mask] * uy
    gv = _source_values(g, grid, mask)
    rows = []
    for k, center in enumerate(library.centers):
        psi, psi_x, psi_y = library.evaluate(grid, center)
        integrand = flux_x * psi_x[mask] + flux_y * psi_y[mask] + gv * psi[mask]
        rows.append({"test": k, "center_x": center.real, "center_y": center.imag,
                     "value": float(np.sum(integrand) * grid.cell_area)})
    report = WeakResidualReport(pd.DataFrame(rows), library)
    logger.info("weak residual: max %.3e over %d tests", report.max_abs, len(rows))
    return report


def composition_identity(A, U, f, radius=1.0):
    """
    Both sides of  int <A grad(U o f), grad psi> = - int J (Laplace U) o f psi
    per bump of the library; U is a grid field with spectral derivatives.
    """
    grid = f.grid
    library = BumpLibrary(radius)
    mask = grid.radius < radius
    W = f.f.values[mask]
    _, Uw, Uwbar = derivative_samplers(U)
    fz, fzbar = f.fz.values[mask], f.fzbar.values[mask]
    uz = Uw(W) * fz + Uwbar(W) * np.conj(fzbar)
    ux, uy = 2.0 * uz.real, -2.0 * uz.imag
    flux_x, flux_y = A.a11[mask] * ux + A.a12[mask] * uy, A.a12[mask] * ux + A.a22[mask] * uy
    lap = laplacian(U).evaluate(W).real
    J = f.J.values.real[mask]
    rows = []
    for k, center in enumerate(library.centers):
        psi, psi_x, psi_y = library.evaluate(grid, center)
        lhs = np.sum(flux_x * psi_x[mask] + flux_y * psi_y[mask]) * grid.cell_area
        rhs = -np.sum(J * lap * psi[mask]) * grid.cell_area
        rows.append({"test": k, "lhs": float(lhs), "rhs": float(rhs)})
    frame = pd.DataFrame(rows)
    scale = max(float(frame["rhs"].abs().max()), 1e-300)
    frame["rel_dev"] = (frame["lhs"] - frame["rhs"]).abs() / scale
    return frame


# ---------------------------------------------------------------------------
# Solvers
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DivformSolution:
    u: ComplexField
    evaluator: ComposedField
    potential: PoincareSolution
    f: QCMap
    mu: ComplexField
    weak: WeakResidualReport
    report: Optional[ProbeReport] = None

    @property
    def defect(self):
        return self.potential.defect

    def summary(self):
        out = {"weak_residual": self.weak.summary(), "compatibility_defect": self.defect,
               "normal_convention": "n is the unit inner normal; du/dn = -du/dr on the unit circle"}
        if self.report is not None:
            out["boundary"] = self.report.summary()
        return out


def transported_source(g, f):
    """G = (g / J) o f^{-1} on the image of the unit disk, compactly supported."""
    grid = f.grid
    radius = 1.0 + grid.h
    if f.kind == "identity":
        return ComplexField(grid, np.where(grid.radius <= 1.0, np.real(g.values), 0.0)).with_support(radius)
    J = f.J.values.real
    tiny = 1e-12 * float(np.max(np.abs(J)))
    # g / J on the whole grid: no cut at the circle inside the cubic stencil
    ratio = ComplexField(grid, np.divide(np.real(g.values), J, out=np.zeros_like(J), where=J > tiny))
    mask, pre = image_nodes(f, 1.0)
    values = np.zeros((grid.n, grid.n))
    values[mask] = ratio.evaluate(pre[mask], order=3).real
    return ComplexField(grid, values).with_support(radius)


def solve_poincare_divform(A, g, nu, Phi, cfg=None, M=None, probes=None, tol=1e-3):
    """
    div(A grad u) = g in the unit disk with du/dnu = Phi on the circle, u(0) = 0.

    u = U o f where f is the disk-normalized map of mu_from_a(A) and U solves
    Laplace U = (g / J) o f^{-1} with the transported direction and data.
    """
    M = M or settings.BOUNDARY_SAMPLES
    grid = A.grid
    mu = mu_from_a(A)
    cfg = resolve_config(mu, cfg)
    f = _disk_map_for(mu, cfg, grid)

    G = transported_source(g, f)
    direction = transport_direction(nu, f, M)
    potential = solve_poincare_poisson(G, direction.normalized, direction.rescale(Phi), cfg, M)

    evaluator = ComposedField(potential.evaluator, f)
    u = evaluator.on_grid(grid).real()
    weak = weak_residual(A, evaluator, g, radius=1.0)
    report = None
    if probes is not None:
        report = probe_limits(evaluator, probes, Phi, DirectionalReducer(nu), tol)
    logger.info("divergence-form solve: kind=%s defect=%.3e weak max=%.3e",
                f.kind, potential.defect, weak.max_abs)
    return DivformSolution(u, evaluator, potential, f, mu, weak, report)


def inner_normal(M=None):
    return BoundaryFunction.from_function(lambda t: -np.exp(1j * np.asarray(t)), n_samples=M, unimodular=True)


def solve_neumann_divform(A, g, Phi, cfg=None, M=None, probes=None, tol=1e-3):
    """Neumann problem du/dn = Phi with n the unit inner normal (du/dn = -du/dr)."""
    return solve_poincare_divform(A, g, inner_normal(M), Phi, cfg, M, probes, tol)


# ---------------------------------------------------------------------------
# Directional limits
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DirectionalLimitReport:
    frame: pd.DataFrame
    tol: float

    @property
    def max_consistency_gap(self):
        return float(self.frame["consistency"].max()) if len(self.frame) else 0.0

    def summary(self):
        out = {"points": int(len(self.frame)), "max_consistency_gap": self.max_consistency_gap}
        if "abs_dev" in self.frame:
            out["max_abs_dev"] = float(self.frame["abs_dev"].max())
            out["pass_fraction"] = float(self.frame["pass"].mean())
        return out


def directional_limit_field(u, nu, probes, target=None, tol=1e-3, line_length=0.25, nodes=16):
    """
    Limits of du/dnu along the probe paths and, independently, the boundary
    value of u rebuilt from an interior value plus the integral of du/dnu
    along the straight nu-line ending at the boundary point.
    """
    if probes.side != "inside":
        raise ConfigError("directional limits are taken from inside the disk")
    limits, _ = path_limits(u, probes, DirectionalReducer(nu))
    values, _ = path_limits(u, probes, Reducer())

    t = probes.t
    zeta = np.exp(1j * t)
    direction = nu.evaluate(t)
    sign = np.sign(np.real(direction * np.conj(zeta)))
    if np.any(sign == 0):
        raise ConfigError("direction nu is tangent to the circle at a probe point")
    start = zeta - sign * direction * line_length
    if np.any(np.abs(start) >= 1.0):
        raise ProbeError("nu-line leaves the disk; shorten line_length")
    x, w = np.polynomial.legendre.leggauss(nodes)
    s = 0.5 * line_length * (x + 1.0)
    # q(s) = zeta - sign nu (line_length - s), dq/ds = sign nu
    points = zeta[:, np.newaxis] - (sign * direction)[:, np.newaxis] * (line_length - s[np.newaxis, :])
    value, dw, dwbar = derivative_samplers(u)
    nu_b = direction[:, np.newaxis]
    derivative = np.real(nu_b * dw(points) + np.conj(nu_b) * dwbar(points))
    integral = 0.5 * line_length * np.sum(w[np.newaxis, :] * derivative, axis=1)
    rebuilt = np.real(value(start)) + sign * integral

    frame = pd.DataFrame({"t": t, "limit": limits.real, "u_extrapolated": values.real, "u_line": rebuilt,
                          "consistency": np.abs(values.real - rebuilt)})
    if target is not None:
        expected = target.evaluate(t).real
        frame["target"] = expected
        frame["abs_dev"] = np.abs(limits.real - expected)
        frame["pass"] = frame["abs_dev"] <= tol
    return DirectionalLimitReport(frame, tol)
