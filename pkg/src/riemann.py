"""
Riemann, jump, shift and nonlinear Riemann problems across the unit circle.

Interior and exterior solutions are generalized analytic functions h+ and h-
composed with one circle-preserving map F; outside the disk F carries the
circle reflection of the interior coefficient.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import pandas as pd

from . import settings
from .beltrami import (
    QCMap,
    compose_and_verify,
    compose_on,
    derivative_samplers,
    factorization_source,
    resolve_config,
)
from .bvp import (
    ComposedField,
    DiskFunction,
    HilbertProblem,
    ProbeFamily,
    ProbeReport,
    _disk_map_for,
    path_limits,
    solve_hilbert_generalized,
)
from .errors import ConfigError, NonzeroIndexError, ResolutionError
from .field_core import TWO_PI, BoundaryFunction, ComplexField, _principal
from .series import plemelj_series, sample_nodes
from .transforms import cauchy_transform

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Problem data
# ---------------------------------------------------------------------------

class CircleShift:
    """Increasing circle homeomorphism t -> alpha(t), tabulated on M nodes."""

    def __init__(self, t, s):
        t = np.asarray(t, dtype=float)
        s = np.asarray(s, dtype=float)
        if t.size < 8 or t.size != s.size:
            raise ConfigError("shift needs matching t and s tables with at least 8 samples")
        if np.any(np.diff(s) <= 0) or s[-1] - s[0] >= TWO_PI:
            raise ConfigError("shift samples must be strictly increasing modulo 2 pi")
        self.t = t
        self.s = s

    @classmethod
    def from_function(cls, fn, samples=None):
        samples = samples or settings.BOUNDARY_SAMPLES
        t = TWO_PI * np.arange(samples) / samples
        s = np.unwrap(np.asarray(fn(t), dtype=float))
        s = s - TWO_PI * np.floor(s[0] / TWO_PI)
        return cls(t, s)

    @classmethod
    def rotation(cls, angle, samples=None):
        return cls.from_function(lambda t: t + angle, samples)

    @classmethod
    def mobius(cls, a, samples=None):
        """Circle map z -> (z - a)/(1 - conj(a) z), |a| < 1."""
        if abs(a) >= 1:
            raise ConfigError("Moebius parameter must lie in the unit disk")
        return cls.from_function(lambda t: np.angle((np.exp(1j * t) - a) / (1 - np.conj(a) * np.exp(1j * t))),
                                 samples)

    def _tables(self):
        t_ext = np.concatenate([self.t - TWO_PI, self.t, self.t + TWO_PI])
        s_ext = np.concatenate([self.s - TWO_PI, self.s, self.s + TWO_PI])
        return t_ext, s_ext

    def forward(self, t):
        t_ext, s_ext = self._tables()
        base = self.t[0]
        shifted = base + np.mod(np.asarray(t, dtype=float) - base, TWO_PI)
        return np.interp(shifted, t_ext, s_ext)

    def inverse(self, s):
        t_ext, s_ext = self._tables()
        base = self.s[0]
        shifted = base + np.mod(np.asarray(s, dtype=float) - base, TWO_PI)
        return np.mod(np.interp(shifted, s_ext, t_ext), TWO_PI)

    @property
    def is_identity(self):
        return bool(np.max(np.abs(_principal(self.s - self.t))) < 1e-14)

    def extend_outside(self, z):
        """Radial extension |z| e^{i alpha(arg z)} to the exterior."""
        z = np.asarray(z, dtype=complex)
        return np.abs(z) * np.exp(1j * self.forward(np.angle(z)))


def winding_of(bf):
    """Winding index of a nonvanishing boundary function, jumps excluded."""
    unit = bf.mapped(lambda v: v / np.abs(v), unimodular=True)
    return unit.winding_index()


@dataclass(frozen=True, eq=False)
class RiemannProblem:
    """omega+ = A omega- + B on the circle (omega+ o alpha with a shift)."""

    A: BoundaryFunction
    B: BoundaryFunction
    shift: Optional[CircleShift] = None
    nonlinearity: Optional[Callable] = None
    normalization: complex = 0.0

    @property
    def decoupled(self):
        return bool(np.all(self.A.samples == 0))

    def __post_init__(self):
        if self.decoupled:
            return
        smallest = float(np.min(np.abs(self.A.samples)))
        if smallest <= 1e-12:
            raise ConfigError(f"coefficient A vanishes on the circle (min |A| = {smallest:.3g})")
        index = winding_of(self.A)
        if index != 0:
            raise NonzeroIndexError(index, "A")

    @property
    def singular_points(self):
        return tuple(sorted(set(self.A.singular_points) | set(self.B.singular_points)))


# ---------------------------------------------------------------------------
# Jump problem
# ---------------------------------------------------------------------------

def _grid_field(grid, fn, inside):
    mask = grid.radius <= 1.0 if inside else grid.radius >= 1.0
    values = np.zeros((grid.n, grid.n), dtype=complex)
    values[mask] = fn(grid.Z[mask])
    return ComplexField(grid, values)


@dataclass(frozen=True, eq=False)
class PlemeljSplit:
    plus: ComplexField
    minus: ComplexField
    plus_eval: DiskFunction
    minus_eval: DiskFunction

    def __iter__(self):
        return iter((self.plus, self.minus))


def plemelj_split(B, grid, M=None):
    """F+ - F- = B on the circle, F+ analytic inside, F- analytic outside, F-(inf) = 0."""
    plus, minus = plemelj_series(B, M)
    plus_eval = DiskFunction.from_series(plus)
    minus_eval = DiskFunction.from_series(minus)
    return PlemeljSplit(_grid_field(grid, plus_eval.evaluate, True),
                        _grid_field(grid, minus_eval.evaluate, False), plus_eval, minus_eval)


def _log_boundary(A, M):
    """Arc-wise log A on the sample nodes."""
    unit = A.mapped(lambda v: v / np.abs(v), unimodular=True)
    t = sample_nodes(M)
    return np.log(np.abs(A.evaluate(t))) + 1j * unit.argument().evaluate(t).real


def _canonical_sections(A, B_values, normalization, M):
    """
    X+ = exp(Gamma+), X- = exp(Gamma-) with Gamma+ - Gamma- = log A and
    Phi+- = X+-(Psi+- + C), Psi+ - Psi- = B / X+, C = Phi-(inf).
    """
    t = sample_nodes(M)
    gamma_plus, gamma_minus = plemelj_series(_log_boundary(A, M))
    x_plus_boundary = np.exp(gamma_plus.boundary_values(t))
    psi_plus, psi_minus = plemelj_series(B_values / x_plus_boundary)
    C = complex(normalization)

    def sectional(gamma, psi, side):
        dgamma, dpsi = gamma.derivative(), psi.derivative()

        def value(w):
            return np.exp(gamma.evaluate(w)) * (psi.evaluate(w) + C)

        def dw(w):
            X = np.exp(gamma.evaluate(w))
            return X * (dgamma.evaluate(w) * (psi.evaluate(w) + C) + dpsi.evaluate(w))

        def dwbar(w):
            return np.zeros(np.shape(w), dtype=complex)

        return DiskFunction(value, dw, dwbar, side)

    return sectional(gamma_plus, psi_plus, "inside"), sectional(gamma_minus, psi_minus, "outside")


# ---------------------------------------------------------------------------
# Solutions
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RiemannSolution:
    omega_plus: ComplexField
    omega_minus: ComplexField
    plus_eval: object
    minus_eval: object
    f: QCMap
    residual_plus: float = 0.0
    residual_minus: float = 0.0
    report: Optional[ProbeReport] = None

    def __iter__(self):
        return iter((self.omega_plus, self.omega_minus))

    def summary(self):
        out = {"residual_plus": self.residual_plus, "residual_minus": self.residual_minus}
        if self.report is not None:
            out["boundary"] = self.report.summary()
        return out


def _exterior_masks(f):
    grid = f.grid
    R = grid.radius
    limit = 0.5 * grid.L
    domain = (R >= 1.0) & (R <= limit) & (np.abs(f.f.values) <= limit)
    trusted = domain & (R >= 1.0 / 0.9) & (R <= 0.9 * limit)
    return domain, trusted


def _assemble(h_plus, h_minus, f, mu, sigma, minus_map=None):
    """Compose both sides and measure their equation residuals."""
    omega_plus, res_plus = compose_and_verify(h_plus, f, mu, sigma)
    domain, trusted = _exterior_masks(f)
    outer_map = minus_map or f
    omega_minus, res_minus = compose_on(h_minus, outer_map, mu, sigma, domain, trusted)
    return omega_plus, res_plus, omega_minus, res_minus


def _boundary_report(plus_eval, minus_eval, A, B, t, tol, shift=None):
    """Limits of omega+ (at alpha(t)) and A omega- + B (at t) along radial rays."""
    s = t if shift is None else shift.forward(t)
    inside = ProbeFamily(s, side="inside")
    outside = ProbeFamily(t, side="outside")
    lhs, _ = path_limits(plus_eval, inside)
    minus, _ = path_limits(minus_eval, outside)
    rhs = A.evaluate(t) * minus + B.evaluate(t)
    return ProbeReport.from_values(t, lhs, rhs, tol, labels=("lhs", "rhs"))


def _probe_points(prob, count, margin=0.1):
    family = ProbeFamily.around_circle(count, prob.singular_points, margin)
    return family.t


def _setup(mu, sigma, cfg, grid):
    if mu is None:
        if grid is None:
            raise ConfigError("Riemann solvers need a grid or a coefficient field")
        mu = ComplexField.zeros(grid)
    grid = mu.grid
    sigma = sigma if sigma is not None else ComplexField.zeros(grid)
    cfg = resolve_config(mu, cfg)
    f = _disk_map_for(mu, cfg, grid)
    mu_full = f.mu if f.kind != "identity" else mu
    return grid, mu_full, sigma, cfg, f


def _transport(bf, f, M):
    if f.kind == "identity":
        return bf
    corr = f.boundary_correspondence(M)
    return bf.transported(corr.forward, corr.inverse)


def _prescribed_inside(values_bf, g, grid, M):
    """Generalized analytic h on the disk with h = values on the circle (psi-solution)."""
    one = BoundaryFunction.constant(1.0, unimodular=True)
    prob = HilbertProblem(one, values_bf.mapped(np.real), values_bf.mapped(np.imag), g)
    return solve_hilbert_generalized(prob, grid, M).h


def _prescribed_outside(values_bf, grid, M):
    """h on |w| >= 1 with h = values on the circle: conj(H(1/conj w)) with H = conj(values)."""
    H = _prescribed_inside(values_bf.conj(), None, grid, M)

    def reflect(w):
        return 1.0 / np.conj(np.asarray(w, dtype=complex))

    def value(w):
        return np.conj(H.evaluate(reflect(w)))

    def dw(w):
        w = np.asarray(w, dtype=complex)
        return -np.conj(H.dw(reflect(w))) / w ** 2

    def dwbar(w):
        w = np.asarray(w, dtype=complex)
        return -np.conj(H.dwbar(reflect(w))) / np.conj(w) ** 2

    return DiskFunction(value, dw, dwbar, "outside")


def _constant(c, side):
    return DiskFunction(lambda w: np.full(np.shape(w), c, dtype=complex),
                        lambda w: np.zeros(np.shape(w), dtype=complex),
                        lambda w: np.zeros(np.shape(w), dtype=complex), side)


def _source_part(mu, sigma, f, cfg):
    g = factorization_source(mu, sigma, f, cfg).g
    if not np.any(g.values != 0):
        return g, None
    if g.support_radius is not None and g.support_radius > 1.0 + 1.5 * g.grid.h:
        logger.warning("transported source reaches |w| = %.3g outside the unit disk", g.support_radius)
    return g, cauchy_transform(g)


def solve_riemann(prob, mu=None, sigma=None, cfg=None, grid=None, M=None, tol=1e-4, probe_count=128):
    """
    Riemann problem omega+ = A omega- + B, index 0.

    h+- = P g + Phi+- where Phi solves the reduced problem
    Phi+ = A Phi- + B - P g + A P g by the canonical function of A.
    """
    grid, mu, sigma, cfg, f = _setup(mu, sigma, cfg, grid)
    M = M or settings.BOUNDARY_SAMPLES
    A = _transport(prob.A, f, M)
    B = _transport(prob.B, f, M)
    g, Pg = _source_part(mu, sigma, f, cfg)

    if prob.decoupled:
        h_plus = _prescribed_inside(B, g if Pg is not None else None, grid, M)
        h_minus = _constant(prob.normalization, "outside")
    else:
        t = sample_nodes(M)
        zeta = np.exp(1j * t)
        B_values = B.evaluate(t)
        if Pg is not None:
            pg = derivative_samplers(Pg)[0](zeta)
            B_values = B_values - pg + A.evaluate(t) * pg
        phi_plus, phi_minus = _canonical_sections(A, B_values, prob.normalization, M)
        if Pg is not None:
            h_plus = phi_plus + DiskFunction.from_field(Pg, "inside")
            h_minus = phi_minus + DiskFunction.from_field(Pg, "outside")
        else:
            h_plus, h_minus = phi_plus, phi_minus

    omega_plus, res_plus, omega_minus, res_minus = _assemble(h_plus, h_minus, f, mu, sigma)
    plus_eval, minus_eval = ComposedField(h_plus, f), ComposedField(h_minus, f)
    report = None
    if not prob.decoupled:
        report = _boundary_report(plus_eval, minus_eval, prob.A, prob.B, _probe_points(prob, probe_count), tol)
        logger.info("Riemann problem: pass fraction %.3f, max deviation %.3e",
                    report.pass_fraction, report.max_deviation)
    return RiemannSolution(omega_plus, omega_minus, plus_eval, minus_eval, f, res_plus, res_minus, report)


class _ShiftedExterior:
    """omega-(z) = h^(F(alpha_ext(z))) for the substituted exterior function h^."""

    def __init__(self, base, shift):
        self.base = base
        self.shift = shift

    def _lift(self, z):
        return self.shift.extend_outside(z)

    def evaluate(self, z):
        return self.base.evaluate(self._lift(z))

    def dw(self, z):
        return self._derivatives(z)[0]

    def dwbar(self, z):
        return self._derivatives(z)[1]

    def _derivatives(self, z, eps=1e-6):
        # alpha_ext is only Lipschitz: central differences along x and y
        z = np.asarray(z, dtype=complex)
        dx = (self.evaluate(z + eps) - self.evaluate(z - eps)) / (2 * eps)
        dy = (self.evaluate(z + 1j * eps) - self.evaluate(z - 1j * eps)) / (2 * eps)
        return 0.5 * (dx - 1j * dy), 0.5 * (dx + 1j * dy)


def solve_riemann_shift(prob, mu=None, sigma=None, cfg=None, grid=None, M=None, tol=1e-4, probe_count=128):
    """
    omega+(alpha(zeta)) = A(zeta) omega-(zeta) + B(zeta).

    Substituting omega^- = omega- o alpha^{-1} gives an ordinary Riemann problem
    in the variable s = alpha(t) with data A o alpha^{-1}, B o alpha^{-1}; the
    exterior solution is mapped back through the radial extension of alpha.
    """
    shift = prob.shift
    if shift is None or shift.is_identity:
        return solve_riemann(prob, mu, sigma, cfg, grid, M, tol, probe_count)
    M = M or settings.BOUNDARY_SAMPLES
    substituted = RiemannProblem(prob.A.transported(shift.forward, shift.inverse),
                                 prob.B.transported(shift.forward, shift.inverse),
                                 None, None, prob.normalization)
    base = solve_riemann(substituted, mu, sigma, cfg, grid, M, tol, probe_count)
    minus_eval = _ShiftedExterior(base.minus_eval, shift)
    grid = base.omega_plus.grid
    domain, _ = _exterior_masks(base.f)
    nodes = np.flatnonzero(domain)
    lifted = shift.extend_outside(grid.Z.ravel()[nodes])
    usable = np.abs(base.f.evaluate(lifted)) <= 0.5 * grid.L
    values = np.zeros(grid.n * grid.n, dtype=complex)
    values[nodes[usable]] = base.minus_eval.evaluate(lifted[usable])
    omega_minus = ComplexField(grid, values.reshape(grid.n, grid.n))
    report = _boundary_report(base.plus_eval, minus_eval, prob.A, prob.B,
                              _probe_points(prob, probe_count), tol, shift)
    logger.info("shift problem: pass fraction %.3f, max deviation %.3e", report.pass_fraction, report.max_deviation)
    return RiemannSolution(base.omega_plus, omega_minus, base.plus_eval, minus_eval, base.f,
                           base.residual_plus, base.residual_minus, report)


def solve_nonlinear_riemann(prob, psi, mu=None, sigma=None, cfg=None, grid=None, M=None, tol=1e-4,
                            probe_count=128):
    """
    omega+ = phi(zeta, omega-) on the circle.

    omega- is taken with boundary values psi; omega+ then has prescribed
    boundary values phi(zeta, psi(zeta)).
    """
    if prob.nonlinearity is None:
        raise ConfigError("nonlinear Riemann problem needs a nonlinearity phi(t, w)")
    phi = prob.nonlinearity
    M = M or settings.BOUNDARY_SAMPLES
    try:
        target = BoundaryFunction.from_function(
            lambda t: phi(np.asarray(t), psi.evaluate(t)), n_samples=M,
            singular_points=psi.singular_points,
        )
        target.evaluate(sample_nodes(M))
    except (ArithmeticError, ValueError, TypeError) as exc:
        raise ConfigError(f"nonlinearity failed on the boundary samples: {exc}") from exc

    grid, mu, sigma, cfg, f = _setup(mu, sigma, cfg, grid)
    g, Pg = _source_part(mu, sigma, f, cfg)
    h_plus = _prescribed_inside(_transport(target, f, M), g if Pg is not None else None, grid, M)
    h_minus = _prescribed_outside(_transport(psi, f, M), grid, M)

    omega_plus, res_plus, omega_minus, res_minus = _assemble(h_plus, h_minus, f, mu, sigma)
    plus_eval, minus_eval = ComposedField(h_plus, f), ComposedField(h_minus, f)

    family = ProbeFamily.around_circle(probe_count, psi.singular_points, 0.1)
    t = family.t
    lhs, _ = path_limits(plus_eval, ProbeFamily(t, side="inside"))
    minus, _ = path_limits(minus_eval, ProbeFamily(t, side="outside"))
    rhs = np.asarray(phi(t, minus), dtype=complex)
    report = ProbeReport.from_values(t, lhs, rhs, tol, labels=("lhs", "rhs"))
    logger.info("nonlinear Riemann problem: pass fraction %.3f", report.pass_fraction)
    return RiemannSolution(omega_plus, omega_minus, plus_eval, minus_eval, f, res_plus, res_minus, report)


# ---------------------------------------------------------------------------
# Direction transport
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DirectionTransport:
    """N*(xi) = (df/dnu)(f^{-1}(xi)) on the circle, its modulus and unit direction."""

    raw: BoundaryFunction
    normalized: BoundaryFunction
    modulus: BoundaryFunction
    inverse: Callable

    def rescale(self, Phi):
        """Data for the unit direction: (Phi o f^{-1}) / |N*|."""
        inverse, modulus = self.inverse, self.modulus
        return BoundaryFunction.from_function(
            lambda s: Phi.evaluate(inverse(np.asarray(s, dtype=float))).real / modulus.evaluate(s).real,
            n_samples=self.raw.samples.size,
        )


def transport_direction(nu, f, M=None):
    """N* = (df/dnu) o f^{-1} on the circle, for a circle-preserving f."""
    M = M or settings.BOUNDARY_SAMPLES
    if f.kind == "identity":
        unit = nu.mapped(lambda v: v / np.abs(v), unimodular=True)
        modulus = nu.mapped(lambda v: np.abs(v).astype(complex))
        return DirectionTransport(nu, unit, modulus, lambda s: s)

    corr = f.boundary_correspondence(M)
    t = TWO_PI * np.arange(M) / M
    inner = np.exp(1j * t) * (1.0 - f.grid.h)
    J = f.J.evaluate(inner).real
    if np.any(J <= 0):
        raise ResolutionError("Jacobian is not positive next to the unit circle")

    def raw_at(s):
        tt = corr.inverse(s)
        return f.directional_derivative(np.exp(1j * tt), nu.evaluate(tt))

    raw = BoundaryFunction.from_function(raw_at, n_samples=M)
    unit = BoundaryFunction.from_function(lambda s: raw_at(s) / np.abs(raw_at(s)), n_samples=M, unimodular=True)
    modulus = BoundaryFunction.from_function(lambda s: np.abs(raw_at(s)).astype(complex), n_samples=M)
    return DirectionTransport(raw, unit, modulus, corr.inverse)


def transport_chain_rule(h, f, nu, t=None, step=1e-4):
    """
    Central differences of h o f along nu at boundary points e^{it} against
    (dh/dN*) o f = N* h_w + conj(N*) h_wbar, with N* = df/dnu.

    h is a grid field or an object with evaluate/dw/dwbar. Returns a frame
    with one row per point and the relative deviation max |fd - chain| / max |chain|.
    """
    if t is None:
        t = TWO_PI * (np.arange(64) + 0.5) / 64
    t = np.asarray(t, dtype=float)
    zeta = np.exp(1j * t)
    direction = nu.evaluate(t)
    value, dw, dwbar = derivative_samplers(h)
    forward = value(f.evaluate(zeta + step * direction))
    backward = value(f.evaluate(zeta - step * direction))
    fd = (forward - backward) / (2.0 * step)
    N = f.directional_derivative(zeta, direction)
    W = f.evaluate(zeta)
    chain = N * dw(W) + np.conj(N) * dwbar(W)
    frame = pd.DataFrame({"t": t, "fd_re": fd.real, "fd_im": fd.imag,
                          "chain_re": chain.real, "chain_im": chain.imag, "abs_dev": np.abs(fd - chain)})
    scale = max(float(np.max(np.abs(chain))), 1e-300)
    relative = float(frame["abs_dev"].max()) / scale
    logger.info("direction transport chain rule: relative deviation %.3e over %d points", relative, t.size)
    return frame, relative
