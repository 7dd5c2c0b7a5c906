"""
Boundary value problems on the unit disk.

Solutions are returned together with exact evaluators (truncated series plus
interpolated grid parts) so that boundary limits are probed without ever
interpolating across the unit circle.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd

from . import settings
from .beltrami import (
    QCMap,
    compose_and_verify,
    derivative_samplers,
    disk_normalized_map,
    factorization_source,
    resolve_config,
)
from .errors import ConfigError, NonzeroIndexError, ProbeError
from .field_core import (
    TWO_PI,
    BoundaryFunction,
    ComplexField,
    _principal,
    check_support,
    variation,
)
from .series import PowerSeries, poisson_series, sample_nodes, schwarz_series
from .transforms import cauchy_transform, newtonian_potential

logger = logging.getLogger(__name__)

DEFAULT_DELTAS = 0.25 * 2.0 ** -np.arange(1, 9)
PASS_GATE = 0.95


# ---------------------------------------------------------------------------
# Probes
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ProbeFamily:
    """
    Paths approaching boundary points e^{it}.

    approach: "radial", "stolz" (two rays at +-stolz_angle from the radius) or
    "custom" (arcs[k] is a point sequence ending at e^{i t[k]}).
    side: "inside" probes from the disk, "outside" from the exterior.
    """

    t: np.ndarray
    approach: str = "radial"
    stolz_angle: float = np.pi / 4
    deltas: np.ndarray = field(default_factory=lambda: DEFAULT_DELTAS.copy())
    side: str = "inside"
    arcs: Optional[tuple] = None
    margin: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "t", np.mod(np.asarray(self.t, dtype=float).ravel(), TWO_PI))
        if self.approach not in ("radial", "stolz", "custom"):
            raise ConfigError(f"unknown probe approach {self.approach!r}")
        if self.side not in ("inside", "outside"):
            raise ConfigError(f"unknown probe side {self.side!r}")
        if self.approach == "stolz" and not (0.0 < self.stolz_angle <= np.pi / 4 + 1e-12):
            raise ConfigError("stolz angle must lie in (0, pi/4]")
        deltas = np.asarray(self.deltas, dtype=float)
        if deltas.size < 2 or np.any(deltas <= 0) or np.any(deltas >= 1) or np.any(np.diff(deltas) >= 0):
            raise ConfigError("probe schedule must be decreasing in (0, 1) with at least two radii")
        object.__setattr__(self, "deltas", deltas)
        if self.approach == "custom":
            if self.arcs is None or len(self.arcs) != self.t.size:
                raise ConfigError("custom probes need one arc per boundary point")
            arcs = tuple(np.asarray(a, dtype=complex).ravel() for a in self.arcs)
            for arc, t in zip(arcs, self.t):
                if arc.size < 2:
                    raise ConfigError("custom arcs need at least two points")
                inside = np.abs(arc) < 1.0
                if np.any(inside != (self.side == "inside")):
                    raise ConfigError("custom arc leaves its side of the circle")
            object.__setattr__(self, "arcs", arcs)

    @classmethod
    def around_circle(cls, count=128, singular_points=(), margin=0.1, **kwargs):
        """Equally spaced points, dropping those within margin of a singular point."""
        t = TWO_PI * (np.arange(count) + 0.5) / count
        if singular_points:
            d = np.min([np.abs(_principal(t - s)) for s in singular_points], axis=0)
            t = t[d > margin]
        return cls(t, margin=margin, **kwargs)

    @property
    def zeta(self):
        return np.exp(1j * self.t)

    def paths(self):
        """List of (points, distances) arrays of shape (rays, J) per boundary point."""
        zeta = self.zeta
        sign = -1.0 if self.side == "inside" else 1.0
        out = []
        for k, z in enumerate(zeta):
            if self.approach == "custom":
                arc = self.arcs[k]
                out.append((arc[np.newaxis, :], np.abs(arc - z)[np.newaxis, :]))
                continue
            if self.approach == "radial":
                directions = np.array([1.0 + 0j])
            else:
                directions = np.exp(1j * np.array([self.stolz_angle, -self.stolz_angle]))
            pts = z + sign * self.deltas[np.newaxis, :] * z * directions[:, np.newaxis]
            out.append((pts, np.abs(pts - z)))
        return out

    def describe(self):
        return {"approach": self.approach, "side": self.side, "points": int(self.t.size),
                "stolz_angle": self.stolz_angle, "deltas": self.deltas.tolist(),
                "schedule_version": settings.PROBE_SCHEDULE_VERSION}


class Reducer:
    """Maps sampled field values (and derivatives) at probe points to a number per point."""

    name = "identity"
    needs_derivatives = False

    def reduce(self, values, dw, dwbar, t):
        return values

    def __call__(self, samplers, points, t):
        """samplers: (value, d/dw, d/dwbar) callables, see derivative_samplers."""
        value, dw, dwbar = samplers
        v = value(points)
        if self.needs_derivatives:
            return self.reduce(v, dw(points), dwbar(points), t)
        return self.reduce(v, None, None, t)


class ReConjReducer(Reducer):
    name = "re_conj"

    def __init__(self, lam):
        self.lam = lam

    def reduce(self, values, dw, dwbar, t):
        return np.real(np.conj(self.lam.evaluate(t)) * values)


class ImConjReducer(ReConjReducer):
    name = "im_conj"

    def reduce(self, values, dw, dwbar, t):
        return np.imag(np.conj(self.lam.evaluate(t)) * values)


class DirectionalReducer(Reducer):
    """du/dnu = nu u_w + conj(nu) u_wbar; real for real u."""

    name = "directional"
    needs_derivatives = True

    def __init__(self, nu, real=True):
        self.nu = nu
        self.real = real

    def reduce(self, values, dw, dwbar, t):
        nu = self.nu.evaluate(t)
        out = nu * dw + np.conj(nu) * dwbar
        return out.real if self.real else out


def make_reducer(kind, coefficient=None):
    if kind in (None, "identity"):
        return Reducer()
    if coefficient is None:
        raise ConfigError(f"reducer {kind!r} needs a boundary coefficient")
    if kind == "re_conj":
        return ReConjReducer(coefficient)
    if kind == "im_conj":
        return ImConjReducer(coefficient)
    if kind == "directional":
        return DirectionalReducer(coefficient)
    raise ConfigError(f"unknown reducer {kind!r}")


@dataclass(frozen=True, eq=False)
class ProbeReport:
    frame: pd.DataFrame
    tol: float
    stolz_discrepancy: float = 0.0
    gate: float = PASS_GATE
    labels: tuple = ("limit", "target")

    @property
    def pass_fraction(self):
        return float(self.frame["pass"].mean()) if len(self.frame) else 0.0

    @property
    def passed(self):
        return len(self.frame) > 0 and self.pass_fraction >= self.gate

    @property
    def max_deviation(self):
        return float(self.frame["abs_dev"].max()) if len(self.frame) else 0.0

    def summary(self):
        return {"points": int(len(self.frame)), "pass_fraction": self.pass_fraction,
                "max_abs_dev": self.max_deviation, "tol": self.tol, "gate": self.gate,
                "stolz_discrepancy": self.stolz_discrepancy, "passed": self.passed}

    @classmethod
    def from_values(cls, t, lhs, rhs, tol, stolz_discrepancy=0.0, labels=("limit", "target")):
        lhs = np.asarray(lhs, dtype=complex)
        rhs = np.asarray(rhs, dtype=complex)
        dev = np.abs(lhs - rhs)
        a, b = labels
        frame = pd.DataFrame({
            "t": np.asarray(t, dtype=float),
            f"{a}_re": lhs.real, f"{a}_im": lhs.imag,
            f"{b}_re": rhs.real, f"{b}_im": rhs.imag,
            "abs_dev": dev, "pass": dev <= tol,
        })
        return cls(frame, tol, stolz_discrepancy, labels=labels)


def _extrapolate(values, distances):
    """Value at distance 0 of the polynomial through the last (up to) three samples."""
    count = min(3, values.shape[-1])
    d = distances[..., -count:]
    v = values[..., -count:]
    out = np.zeros(v.shape[:-1], dtype=complex)
    for i in range(count):
        weight = np.ones(d.shape[:-1])
        for j in range(count):
            if j != i:
                weight = weight * d[..., j] / (d[..., j] - d[..., i])
        out = out + weight * v[..., i]
    return out


def path_limits(field, probes, reducer=None):
    """Extrapolated limits per boundary point and the Stolz ray discrepancy."""
    reducer = reducer or Reducer()
    samplers = derivative_samplers(field)
    paths = probes.paths()
    if not paths:
        return np.zeros(0, dtype=complex), 0.0
    if probes.approach == "custom":
        limits = np.empty(probes.t.size, dtype=complex)
        for k, (pts, dist) in enumerate(paths):
            vals = _reduce(reducer, samplers, pts, np.full(pts.shape, probes.t[k]))
            limits[k] = _extrapolate(vals, dist)[0]
        return limits, 0.0
    pts = np.stack([p for p, _ in paths])
    dist = np.stack([d for _, d in paths])
    t = np.broadcast_to(probes.t[:, np.newaxis, np.newaxis], pts.shape)
    ray_limits = _extrapolate(_reduce(reducer, samplers, pts, t), dist)
    discrepancy = 0.0
    if ray_limits.shape[1] > 1:
        spread = np.ptp(ray_limits.real, axis=1) + np.ptp(ray_limits.imag, axis=1)
        discrepancy = float(spread.max())
    return ray_limits.mean(axis=1), discrepancy


def _reduce(reducer, samplers, pts, t):
    try:
        return np.asarray(reducer(samplers, pts, t), dtype=complex)
    except ProbeError as exc:
        raise ProbeError(f"probe path leaves the trusted region: {exc}") from exc


def probe_limits(field, probes, target, reducer=None, tol=1e-3):
    """
    Boundary limits of a field along a probe family compared with target data.

    Points within the family margin of a singular point of the target are
    dropped from the report.
    """
    if isinstance(target, BoundaryFunction) and target.singular_points:
        keep = target.distance_to_singular(probes.t) > max(probes.margin, 1e-12)
        if not np.all(keep):
            logger.debug("dropping %d probes next to declared singular points", int((~keep).sum()))
            probes = _subset(probes, keep)
    limits, discrepancy = path_limits(field, probes, reducer)
    expected = target.evaluate(probes.t) if hasattr(target, "evaluate") else target(probes.t)
    report = ProbeReport.from_values(probes.t, limits, expected, tol, discrepancy)
    logger.info("probe report: %d points, pass fraction %.3f, max deviation %.3e",
                len(report.frame), report.pass_fraction, report.max_deviation)
    return report


def _subset(probes, keep):
    arcs = None if probes.arcs is None else tuple(a for a, k in zip(probes.arcs, keep) if k)
    return ProbeFamily(probes.t[keep], probes.approach, probes.stolz_angle, probes.deltas,
                       probes.side, arcs, probes.margin)


# ---------------------------------------------------------------------------
# Evaluators
# ---------------------------------------------------------------------------

def _clamp(z, side):
    """Radially project points onto the closed side of the unit circle."""
    z = np.asarray(z, dtype=complex)
    r = np.abs(z)
    if side == "inside":
        return np.where(r > 1.0, z / np.where(r > 0, r, 1.0), z)
    return np.where(r < 1.0, np.where(r > 0, z / np.where(r > 0, r, 1.0), 1.0), z)


class DiskFunction:
    """Function on one side of the unit circle given by value and Wirtinger-derivative callables."""

    def __init__(self, value, dw, dwbar, side="inside"):
        self._value = value
        self._dw = dw
        self._dwbar = dwbar
        self.side = side

    def evaluate(self, w):
        return self._value(_clamp(w, self.side))

    __call__ = evaluate

    def dw(self, w):
        return self._dw(_clamp(w, self.side))

    def dwbar(self, w):
        return self._dwbar(_clamp(w, self.side))

    def boundary_values(self, t):
        return self.evaluate(np.exp(1j * np.asarray(t, dtype=float)))

    def mask(self, grid):
        return grid.radius <= 1.0 if self.side == "inside" else grid.radius >= 1.0

    def on_grid(self, grid):
        """Samples on the nodes of this side of the circle, zero elsewhere."""
        mask = self.mask(grid)
        values = np.zeros((grid.n, grid.n), dtype=complex)
        values[mask] = self.evaluate(grid.Z[mask])
        return ComplexField(grid, values)

    def __add__(self, other):
        return DiskFunction(lambda w: self._value(w) + other._value(w),
                            lambda w: self._dw(w) + other._dw(w),
                            lambda w: self._dwbar(w) + other._dwbar(w), self.side)

    def scaled(self, c):
        return DiskFunction(lambda w: c * self._value(w), lambda w: c * self._dw(w),
                            lambda w: c * self._dwbar(w), self.side)

    @classmethod
    def from_series(cls, series):
        d = series.derivative()
        return cls(series.evaluate, d.evaluate, lambda w: np.zeros(np.shape(w), dtype=complex), series.side)

    @classmethod
    def from_field(cls, field_, side="inside"):
        value, dw, dwbar = derivative_samplers(field_)
        return cls(value, dw, dwbar, side)

    @classmethod
    def zero(cls, side="inside"):
        z = lambda w: np.zeros(np.shape(w), dtype=complex)  # noqa: E731
        return cls(z, z, z, side)


class ComposedField:
    """h o f with chain-rule derivatives."""

    def __init__(self, h, f):
        self.h = h
        self.f = f
        self._value, self._hw, self._hwbar = derivative_samplers(h)

    def evaluate(self, z):
        return self._value(self.f.evaluate(z))

    __call__ = evaluate

    def _parts(self, z):
        w = self.f.evaluate(z)
        fz, fzbar = self.f.derivatives_at(z)
        return self._hw(w), self._hwbar(w), fz, fzbar

    def dw(self, z):
        hw, hwbar, fz, fzbar = self._parts(z)
        return hw * fz + hwbar * np.conj(fzbar)

    def dwbar(self, z):
        hw, hwbar, fz, fzbar = self._parts(z)
        return hw * fzbar + hwbar * np.conj(fz)

    def on_grid(self, grid, radius=1.0):
        mask = grid.radius <= radius
        values = np.zeros((grid.n, grid.n), dtype=complex)
        values[mask] = self._value(self.f.f.values[mask])
        return ComplexField(grid, values)


# ---------------------------------------------------------------------------
# Harmonic and analytic extensions
# ---------------------------------------------------------------------------

def _on_disk(grid, fn):
    mask = grid.radius <= 1.0
    values = np.zeros((grid.n, grid.n), dtype=complex)
    values[mask] = fn(grid.Z[mask])
    return ComplexField(grid, values)


def poisson_extend(phi, grid, M=None):
    """Harmonic extension of real boundary data on the disk nodes."""
    if phi is None or not phi.arcs:
        raise ConfigError("poisson_extend needs boundary data")
    series = poisson_series(phi.mapped(np.real), M)
    return _on_disk(grid, lambda z: series.evaluate(z).real)


def schwarz_extend(phi, grid, M=None):
    """Analytic F on the disk nodes with Re F = phi on the circle, Im F(0) = 0."""
    if phi is None or not phi.arcs:
        raise ConfigError("schwarz_extend needs boundary data")
    series = schwarz_series(phi, M)
    return _on_disk(grid, series.evaluate)


# ---------------------------------------------------------------------------
# Hilbert problems
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class HilbertProblem:
    """Re(conj(lam) h) = phi (and Im(conj(lam) h) = psi when given), d h/d zbar = g."""

    lam: BoundaryFunction
    phi: BoundaryFunction
    psi: Optional[BoundaryFunction] = None
    g: Optional[ComplexField] = None
    normalization: float = 0.0

    def __post_init__(self):
        if not self.lam.is_unimodular:
            raise ConfigError("Hilbert coefficient must be unimodular")
        if not self.phi.is_real or (self.psi is not None and not self.psi.is_real):
            raise ConfigError("Hilbert data phi and psi must be real")
        if not np.isfinite(variation(self.lam)):
            raise ConfigError("Hilbert coefficient has unbounded variation")
        index = self.lam.winding_index()
        if index != 0:
            raise NonzeroIndexError(index, "lambda")
        if self.g is not None:
            radius = check_support(self.g, "Hilbert source")
            if radius > 1.0 + self.g.grid.h * 1.5:
                raise ConfigError(f"Hilbert source must live in the unit disk, support {radius:.4g}")

    @property
    def singular_points(self):
        points = set(self.lam.singular_points) | set(self.phi.singular_points)
        if self.psi is not None:
            points |= set(self.psi.singular_points)
        return tuple(sorted(points))


@dataclass(frozen=True, eq=False)
class HilbertSolution:
    h: DiskFunction
    field: ComplexField
    problem: HilbertProblem
    theta: PowerSeries
    h0: Optional[ComplexField] = None
    report: Optional[ProbeReport] = None
    imag_report: Optional[ProbeReport] = None

    def kernel_shift(self, c):
        """Solution plus i c exp(i Theta); the Re-condition is unchanged."""
        theta = self.theta
        dtheta = theta.derivative()
        unit = lambda w: np.exp(1j * theta.evaluate(w))  # noqa: E731
        extra = DiskFunction(lambda w: 1j * c * unit(w),
                             lambda w: 1j * c * 1j * dtheta.evaluate(w) * unit(w),
                             lambda w: np.zeros(np.shape(w), dtype=complex))
        h = self.h + extra
        return HilbertSolution(h, h.on_grid(self.field.grid), self.problem, theta, self.h0)


def solve_hilbert_generalized(prob, grid=None, M=None, probes=None, tol=1e-3):
    """
    h = h0 + exp(i Theta) (S + i c + i P) with h0 = P g, Theta the analytic
    completion of arg lam, S the Schwarz extension of the transported
    Re-data and P the harmonic extension of the Im-data when psi is given.
    """
    grid = grid or (prob.g.grid if prob.g is not None else None)
    if grid is None:
        raise ConfigError("solve_hilbert_generalized needs a grid when no source is given")
    M = M or settings.BOUNDARY_SAMPLES
    t = sample_nodes(M)
    zeta = np.exp(1j * t)

    if prob.g is not None and np.any(prob.g.values != 0):
        h0 = cauchy_transform(prob.g)
        h0_value, h0_dw, h0_dwbar = derivative_samplers(h0)
        h0_boundary = h0_value(zeta)
    else:
        h0 = None
        h0_boundary = np.zeros(M, dtype=complex)

    theta = schwarz_series(prob.lam.argument(), M)
    weight = np.exp(theta.boundary_values(t).imag)
    lam_conj_h0 = np.conj(prob.lam.evaluate(t)) * h0_boundary

    S = schwarz_series((prob.phi.evaluate(t).real - lam_conj_h0.real) * weight)
    c_norm = prob.normalization
    if prob.psi is not None:
        residual_im = (prob.psi.evaluate(t).real - lam_conj_h0.imag) * weight - S.boundary_values(t).imag
        Q = schwarz_series(residual_im)
        c_norm = 0.0
    else:
        Q = PowerSeries.constant(0.0)

    dtheta, dS, dQ = theta.derivative(), S.derivative(), Q.derivative()

    def unit(w):
        return np.exp(1j * theta.evaluate(w))

    def inner(w):
        return S.evaluate(w) + 1j * c_norm + 1j * Q.evaluate(w).real

    def value(w):
        out = unit(w) * inner(w)
        return out + h0_value(w) if h0 is not None else out

    def dw(w):
        out = unit(w) * (1j * dtheta.evaluate(w) * inner(w) + dS.evaluate(w) + 0.5j * dQ.evaluate(w))
        return out + h0_dw(w) if h0 is not None else out

    def dwbar(w):
        out = unit(w) * 0.5j * np.conj(dQ.evaluate(w))
        return out + h0_dwbar(w) if h0 is not None else out

    h = DiskFunction(value, dw, dwbar)
    solution = HilbertSolution(h, h.on_grid(grid), prob, theta, h0)
    logger.info("Hilbert problem solved: %d Fourier modes, psi %s", S.degree, "given" if prob.psi is not None else "absent")
    if probes is None:
        return solution
    report = probe_limits(h, probes, prob.phi, ReConjReducer(prob.lam), tol)
    imag_report = None
    if prob.psi is not None:
        imag_report = probe_limits(h, probes, prob.psi, ImConjReducer(prob.lam), tol)
    return HilbertSolution(h, solution.field, prob, theta, h0, report, imag_report)


def hilbert_kernel_family(prob, psis, grid=None, M=None):
    """Solutions of the same Re-problem for several Im-data psi."""
    out = []
    for psi in psis:
        member = HilbertProblem(prob.lam, prob.phi, psi, prob.g, prob.normalization)
        out.append(solve_hilbert_generalized(member, grid, M))
    return out


@dataclass(frozen=True, eq=False)
class BeltramiBVPSolution:
    """omega = h o f together with the pieces it was built from."""

    omega: ComplexField
    evaluator: ComposedField
    f: QCMap
    hilbert: HilbertSolution
    g: ComplexField
    residual: float
    report: Optional[ProbeReport] = None
    imag_report: Optional[ProbeReport] = None

    def summary(self):
        out = {"equation_residual": self.residual}
        if self.report is not None:
            out["boundary"] = self.report.summary()
        if self.imag_report is not None:
            out["boundary_imag"] = self.imag_report.summary()
        return out


def _disk_map_for(mu, cfg, grid):
    if mu.max_abs() == 0.0:
        return QCMap.identity(grid)
    return disk_normalized_map(mu.restricted(1.0), cfg, grid)


def solve_hilbert_beltrami(mu, sigma, lam, phi, psi=None, cfg=None, M=None, probes=None, tol=1e-3,
                           f=None):
    """
    Hilbert problem for omega_zbar = mu omega_z + sigma on the disk: transplant
    the data through the disk-normalized map, solve for h on the image and
    compose back.
    """
    cfg = resolve_config(mu, cfg)
    grid = mu.grid
    M = M or settings.BOUNDARY_SAMPLES
    f = f or _disk_map_for(mu, cfg, grid)
    sigma = sigma if sigma is not None else ComplexField.zeros(grid)
    if f.kind == "identity":
        lam_t, phi_t, psi_t = lam, phi, psi
    else:
        corr = f.boundary_correspondence(M)
        lam_t = lam.transported(corr.forward, corr.inverse)
        phi_t = phi.transported(corr.forward, corr.inverse)
        psi_t = psi.transported(corr.forward, corr.inverse) if psi is not None else None

    g = factorization_source(mu, sigma, f, cfg).g
    problem = HilbertProblem(lam_t, phi_t, psi_t, g if np.any(g.values != 0) else None)
    hilbert = solve_hilbert_generalized(problem, grid, M)
    mu_full = f.mu if f.kind != "identity" else mu
    omega, residual = compose_and_verify(hilbert.h, f, mu_full, sigma)
    evaluator = ComposedField(hilbert.h, f)

    report = imag_report = None
    if probes is not None:
        report = probe_limits(evaluator, probes, phi, ReConjReducer(lam), tol)
        if psi is not None:
            imag_report = probe_limits(evaluator, probes, psi, ImConjReducer(lam), tol)
    return BeltramiBVPSolution(omega, evaluator, f, hilbert, g, residual, report, imag_report)


def solve_dirichlet_beltrami(mu, sigma, phi, psi=None, cfg=None, M=None, probes=None, tol=1e-3):
    """Re omega = phi on the circle (lam = 1)."""
    one = BoundaryFunction.constant(1.0, unimodular=True)
    return solve_hilbert_beltrami(mu, sigma, one, phi, psi, cfg, M, probes, tol)


# ---------------------------------------------------------------------------
# Poincare problems for generalized harmonic functions
# ---------------------------------------------------------------------------

def _transversal_factor(nu, t):
    """tau = nu conj(zeta); Re tau must keep one strict sign."""
    tau = nu.evaluate(t) * np.exp(-1j * t)
    re = tau.real
    if not (np.all(re > 1e-12) or np.all(re < -1e-12)):
        raise ConfigError("direction nu is tangent to the circle somewhere (Re(n conj(nu)) changes sign)")
    return tau


@dataclass(frozen=True)
class _HarmonicPart:
    primitive: PowerSeries
    derivative: PowerSeries
    defect: float


def _harmonic_poincare(nu, data, M):
    """
    Harmonic H on the disk with Re(nu 2 H_w) = data on the circle, H(0) = 0.

    2 H_w = F analytic; with tau = nu conj(zeta) and F~ = z F the condition
    reads Re(tau F~) = data, an index-0 Hilbert problem for F~ that must also
    satisfy F~(0) = 0. The mismatch is the compatibility defect.
    """
    t = sample_nodes(M)
    tau = _transversal_factor(nu, t)
    size = np.abs(tau)
    tau, data = tau / size, data / size
    # conj(lam) = tau
    theta_data = -np.unwrap(np.angle(tau))
    theta = schwarz_series(theta_data)
    weight = np.exp(theta.boundary_values(t).imag)
    S = schwarz_series(data * weight)
    s0 = float(S.coeffs[0].real)
    defect = TWO_PI * s0
    S = S - s0
    # F~ = exp(i Theta) S; divide out z mode-wise
    unit_coeffs = _exp_series(theta, M)
    F_tilde = _series_product(unit_coeffs, S)
    F = F_tilde.divided_by_z(tol=1e-6)
    return _HarmonicPart(F.antiderivative(), F, defect)


def _exp_series(series, M):
    """exp(i series) as an interior series via its boundary samples."""
    t = sample_nodes(M)
    values = np.exp(1j * series.boundary_values(t))
    return PowerSeries.from_boundary(values, "inside")


def _series_product(a, b):
    return PowerSeries(np.convolve(a.coeffs, b.coeffs), "inside")


@dataclass(frozen=True, eq=False)
class PoincareSolution:
    U: ComplexField
    evaluator: DiskFunction
    U0: Optional[ComplexField]
    defect: float
    harmonic: PowerSeries
    report: Optional[ProbeReport] = None

    def summary(self):
        out = {"compatibility_defect": self.defect,
               "normal_convention": "n is the unit inner normal; dU/dn = -dU/dr"}
        if self.report is not None:
            out["boundary"] = self.report.summary()
        return out


def solve_poincare_poisson(G, nu, Phi, cfg=None, M=None, probes=None, tol=1e-3):
    """
    U with Laplace U = G in the disk and dU/dnu = Phi on the circle, U(0) = 0.

    Incompatible Neumann-type data are projected: the defect is reported and
    absorbed into the constant Fourier mode.
    """
    grid = G.grid
    M = M or settings.BOUNDARY_SAMPLES
    radius = check_support(G, "Poincare source")
    if radius > 1.0 + 1.5 * grid.h:
        raise ConfigError(f"Poincare source must live in the unit disk, support {radius:.4g}")
    t = sample_nodes(M)
    zeta = np.exp(1j * t)

    if np.any(G.values != 0):
        U0 = newtonian_potential(G)
        u0_value, u0_dw, _ = derivative_samplers(U0)
        du0 = 2.0 * np.real(nu.evaluate(t) * u0_dw(zeta))
    else:
        U0 = None
        du0 = np.zeros(M)

    data = Phi.evaluate(t).real - du0
    part = _harmonic_poincare(nu, data, M)
    Q, F = part.primitive, part.derivative
    if abs(part.defect) > 1e-8:
        logger.warning("Poincare data incompatible: defect %.6g absorbed into the constant mode", part.defect)

    def value(z):
        out = Q.evaluate(z).real.astype(complex)
        return out + u0_value(z).real if U0 is not None else out

    def dw(z):
        out = 0.5 * F.evaluate(z)
        return out + u0_dw(z) if U0 is not None else out

    def dwbar(z):
        return np.conj(dw(z))

    evaluator = DiskFunction(value, dw, dwbar)
    U = evaluator.on_grid(grid).real()
    report = None
    if probes is not None:
        report = probe_limits(evaluator, probes, Phi, DirectionalReducer(nu), tol)
    return PoincareSolution(U, evaluator, U0, part.defect, Q, report)


def solve_exterior_poincare(nu, Phi, M=None, normalization=0.0):
    """
    Bounded harmonic u on |z| > 1 with du/dnu = Phi on the circle.

    u(z) = V(1/conj z) where V solves the interior problem for the direction
    -zeta^2 conj(nu); u(inf) = V(0) + normalization.
    """
    M = M or settings.BOUNDARY_SAMPLES
    inner_nu = BoundaryFunction.from_function(
        lambda t: -np.exp(2j * np.asarray(t)) * np.conj(nu.evaluate(t)), n_samples=M,
    )
    t = sample_nodes(M)
    part = _harmonic_poincare(inner_nu, Phi.evaluate(t).real, M)
    Q, F = part.primitive, part.derivative

    def reflect(z):
        z = np.asarray(z, dtype=complex)
        return 1.0 / np.conj(z)

    def value(z):
        return Q.evaluate(reflect(z)).real + normalization + 0j

    def dw(z):
        z = np.asarray(z, dtype=complex)
        # u_z = V_wbar(1/zbar) * (-1/z^2), V_wbar = conj(F)/2
        return -0.5 * np.conj(F.evaluate(reflect(z))) / z ** 2

    def dwbar(z):
        return np.conj(dw(z))

    evaluator = DiskFunction(value, dw, dwbar, side="outside")
    return PoincareSolution(None, evaluator, None, part.defect, Q)
