"""
Nonhomogeneous Beltrami equation  omega_zbar = mu * omega_z + sigma.

    solve_nonhomogeneous      fixed point phi = sigma + mu T(phi), omega = P(phi)
    principal_map             f = z + omega^{mu, mu}
    disk_normalized_map       mu-conformal self-map of the unit disk with F(0) = 0
    invert_map                Newton on the interpolated map, Delaunay fallback
    factorization_source      g = (f_z sigma / J) o f^{-1}
    compose_and_verify        omega = h o f and its equation residual
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import ndimage
from scipy.spatial import Delaunay, cKDTree

from .errors import ConfigError, ConvergenceError, InversionError, ProbeError, ResolutionError
from .field_core import (
    TWO_PI,
    ComplexField,
    GridSpec,
    SolverConfig,
    check_support,
    norm_lp,
    smooth_step,
    wirtinger_dz,
    wirtinger_dzbar,
)
from .transforms import beurling_transform, cauchy_transform, make_plan

logger = logging.getLogger(__name__)

NEWTON_MAX_STEPS = 50
DILATATION_SLACK = 1e-8
# reflected coefficient fades out between these fractions of the annulus 1 < |z| < L/2
REFLECTION_FADE = (0.2, 0.9)


@dataclass(frozen=True, eq=False)
class BeltramiSolution:
    omega: ComplexField
    phi: ComplexField
    iterations: int
    increments: tuple
    residual: float
    source_norm: float
    config: Optional[SolverConfig] = None

    @property
    def ratios(self):
        inc = np.asarray(self.increments)
        with np.errstate(divide="ignore", invalid="ignore"):
            return tuple(np.where(inc[:-1] > 0, inc[1:] / inc[:-1], 0.0))

    @property
    def relative_residual(self):
        return self.residual / self.source_norm if self.source_norm > 0 else self.residual

    def summary(self):
        return {"iterations": self.iterations, "residual": self.residual,
                "relative_residual": self.relative_residual,
                "last_increment": self.increments[-1] if self.increments else 0.0}


def _compact(f, what):
    radius = check_support(f, what)
    return f if f.is_compact else f.with_support(radius)


def _check_dilatation(mu, cfg):
    kmax = mu.max_abs()
    if kmax >= 1.0:
        raise ConfigError(f"|mu| reaches {kmax:.6g}; the equation is degenerate")
    if kmax > cfg.k + 1e-12:
        raise ConfigError(f"sup |mu| = {kmax:.6g} exceeds the configured bound k = {cfg.k}")
    if kmax * cfg.cp_estimate >= 1.0:
        raise ConfigError(f"k * C_p = {kmax * cfg.cp_estimate:.4g} is not below 1")
    return kmax


def equation_residual(omega, mu, sigma):
    """Field omega_zbar - mu omega_z - sigma."""
    return wirtinger_dzbar(omega) - mu * wirtinger_dz(omega) - sigma


def resolve_config(mu, cfg=None):
    """cfg with k bound to the sampled sup |mu|; derived from mu when cfg is None."""
    if cfg is None:
        return SolverConfig.for_mu(mu)
    return cfg.bound_to(mu)


def solve_nonhomogeneous_detailed(mu, sigma, cfg=None, plan=None):
    mu = _compact(mu, "mu")
    sigma = _compact(sigma, "sigma")
    cfg = resolve_config(mu, cfg)
    kmax = _check_dilatation(mu, cfg)
    plan = plan or make_plan(mu.grid)
    logger.info("fixed point: k=%.4g, C_p=%.3g, p=%.3g (contraction run in L2)", kmax, cfg.cp_estimate, cfg.p)

    phi = sigma
    increments = []
    for iteration in range(1, cfg.max_iter + 1):
        new_phi = sigma + mu * beurling_transform(phi, plan)
        increment = norm_lp(new_phi - phi, 2)
        increments.append(increment)
        phi = new_phi
        logger.debug("iteration %d: |phi_n - phi_n-1| = %.3e", iteration, increment)
        if increment <= cfg.eps_fix:
            break
    else:
        raise ConvergenceError(
            f"fixed point did not reach eps_fix={cfg.eps_fix:g} in {cfg.max_iter} iterations "
            f"(last increment {increments[-1]:.3e})",
            iterations=cfg.max_iter, last_increment=increments[-1],
        )

    omega = cauchy_transform(phi, plan)
    residual = norm_lp(equation_residual(omega, mu, sigma), 2)
    logger.info("fixed point converged in %d iterations, residual %.3e", iteration, residual)
    return BeltramiSolution(omega, phi, iteration, tuple(increments), residual, norm_lp(sigma, 2), cfg)


def solve_nonhomogeneous(mu, sigma, cfg=None, plan=None):
    """omega^{mu, sigma} with omega(0) = 0."""
    return solve_nonhomogeneous_detailed(mu, sigma, cfg, plan).omega


# ---------------------------------------------------------------------------
# Quasiconformal maps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundaryCorrespondence:
    """Increasing circle homeomorphism t -> s = arg F(e^{it}), tabulated."""

    t: np.ndarray
    s: np.ndarray

    @property
    def _tables(self):
        t_ext = np.concatenate([self.t - TWO_PI, self.t, self.t + TWO_PI])
        s_ext = np.concatenate([self.s - TWO_PI, self.s, self.s + TWO_PI])
        return t_ext, s_ext

    def forward(self, t):
        t_ext, s_ext = self._tables
        return np.interp(np.mod(t, TWO_PI), t_ext, s_ext)

    def inverse(self, s):
        t_ext, s_ext = self._tables
        base = self.s[0]
        shifted = base + np.mod(np.asarray(s, dtype=float) - base, TWO_PI)
        return np.mod(np.interp(shifted, s_ext, t_ext), TWO_PI)


@dataclass(frozen=True, eq=False)
class QCMap:
    grid: GridSpec
    f: ComplexField
    fz: ComplexField
    fzbar: ComplexField
    J: ComplexField
    mu: ComplexField
    k: float
    residual: float = 0.0
    iterations: int = 0
    kind: str = "principal"
    meta: dict = field(default_factory=dict)

    @property
    def trusted_radius(self):
        return 0.5 * self.grid.L

    @classmethod
    def identity(cls, grid):
        Z = grid.Z
        one = np.ones((grid.n, grid.n))
        return cls(grid, ComplexField(grid, Z), ComplexField(grid, one, tail="periodic"),
                   ComplexField.zeros(grid), ComplexField(grid, one, tail="periodic"),
                   ComplexField.zeros(grid), 0.0, kind="identity")

    def evaluate(self, points, order=3):
        return self.f.evaluate(points, order=order)

    def derivatives_at(self, points, order=3):
        return self.fz.evaluate(points, order=order), self.fzbar.evaluate(points, order=order)

    def directional_derivative(self, points, nu, order=3):
        """df/dnu = nu f_z + conj(nu) f_zbar."""
        fz, fzbar = self.derivatives_at(points, order)
        return nu * fz + np.conj(nu) * fzbar

    def boundary_correspondence(self, samples=2048):
        t = TWO_PI * np.arange(samples) / samples
        images = self.evaluate(np.exp(1j * t))
        s = np.unwrap(np.angle(images))
        s = s - TWO_PI * np.floor(s[0] / TWO_PI + 0.5)
        if not (np.all(np.diff(s) > 0) and s[-1] - s[0] < TWO_PI):
            raise ResolutionError("boundary correspondence is not a strictly increasing circle map")
        return BoundaryCorrespondence(t, s)

    def describe(self):
        out = {"kind": self.kind, "k": self.k, "residual": self.residual, "iterations": self.iterations,
               "L": self.grid.L, "n": self.grid.n}
        out.update({key: value for key, value in self.meta.items() if not key.startswith("_")})
        return out


def _check_jacobian(grid, J, radius):
    inside = grid.radius <= radius
    Jv = J.values.real[inside]
    scale = max(float(np.max(np.abs(Jv))), 1.0)
    if np.any(Jv <= -1e-9 * scale):
        raise ResolutionError(
            f"Jacobian is not positive on |z| <= {radius:.3g} (min {Jv.min():.3e}); refine the grid"
        )
    return float(Jv.min())


def _dilatation_gap(fz, fzbar, k):
    excess = np.abs(fzbar.values) - k * np.abs(fz.values)
    return float(np.max(excess))


def extend_mu_holder(mu, width=None):
    """
    Extend a disk coefficient across the unit circle: boundary values carried
    radially and faded out by a cosine ramp over 1 < |z| < 1 + width.
    """
    grid = mu.grid
    width = 8.0 * grid.h if width is None else width
    R = grid.radius
    ring = (R > 1.0) & (R < 1.0 + width)
    values = np.where(R <= 1.0, mu.values, 0.0)
    if np.any(ring):
        zeta = grid.Z[ring] / R[ring] * (1.0 - grid.h)
        boundary = mu.evaluate(zeta, order=1)
        ramp = 0.5 * (1.0 + np.cos(np.pi * (R[ring] - 1.0) / width))
        values[ring] = ramp * boundary
    return ComplexField(grid, values, support_radius=1.0 + width)


def principal_map(mu, cfg=None, plan=None, boundary_holder=False):
    """
    f = z + omega^{mu, mu}. Derivative fields come from the fixed point:
    f_z = 1 + T(phi) and f_zbar = mu f_z, so |f_zbar| <= k |f_z| on every node.
    """
    if boundary_holder:
        mu = extend_mu_holder(mu)
    grid = mu.grid
    plan = plan or make_plan(grid)
    solution = solve_nonhomogeneous_detailed(mu, mu, cfg, plan)
    omega = solution.omega
    f = ComplexField(grid, grid.Z + omega.values)
    fz = beurling_transform(solution.phi, plan) + 1.0
    fzbar = mu * fz
    J = ComplexField(grid, np.abs(fz.values) ** 2 - np.abs(fzbar.values) ** 2)
    kmax = mu.max_abs()
    min_J = _check_jacobian(grid, J, 0.5 * grid.L)
    gap = _dilatation_gap(fz, fzbar, kmax)
    if gap > DILATATION_SLACK:
        raise ResolutionError(f"|f_zbar| exceeds k|f_z| by {gap:.3e} (allowed {DILATATION_SLACK:g})")
    defect = float(np.max(np.abs(solution.phi.values - fzbar.values)))
    logger.info("principal map: min J %.4g, fixed-point defect %.3e", min_J, defect)
    return QCMap(grid, f, fz, fzbar, J, mu, kmax, solution.residual, solution.iterations,
                 meta={"min_J": min_J, "dilatation_gap": gap, "fixed_point_defect": defect})


def _mu_sampler(mu_on_disk, grid):
    if callable(mu_on_disk) and not isinstance(mu_on_disk, ComplexField):
        return lambda z: np.asarray(mu_on_disk(z), dtype=complex) * np.ones(np.shape(z))
    # keep the cubic stencil clear of a jump at the unit circle
    limit = 1.0 - 4.0 * grid.h

    def sample(z):
        z = np.asarray(z, dtype=complex)
        r = np.abs(z)
        clamped = np.where(r > limit, z / np.maximum(r, 1e-300) * limit, z)
        return mu_on_disk.evaluate(clamped, order=3)

    return sample


def reflection_taper(grid):
    """Smooth fade of the reflected coefficient: 1 up to r0, 0 from r1 on, r0 < r1 < L/2."""
    outer = 0.5 * grid.L
    r0 = 1.0 + REFLECTION_FADE[0] * (outer - 1.0)
    r1 = 1.0 + REFLECTION_FADE[1] * (outer - 1.0)
    return r0, r1, 1.0 - smooth_step((grid.radius - r0) / (r1 - r0))


def reflect_mu(mu_on_disk, grid):
    """
    mu inside the unit disk, conj(mu(1/zbar)) z^2/zbar^2 outside it, faded
    smoothly to zero before L/2 so the periodic solve sees no jump.
    """
    if 0.5 * grid.L <= 1.0:
        raise ConfigError("disk maps need L > 2 so the reflected annulus fits in the trusted region")
    sample = _mu_sampler(mu_on_disk, grid)
    Z, R = grid.Z, grid.radius
    values = np.zeros((grid.n, grid.n), dtype=complex)
    inside = R <= 1.0
    if isinstance(mu_on_disk, ComplexField):
        values[inside] = mu_on_disk.values[inside]
    else:
        values[inside] = sample(Z[inside])
    _, r1, taper = reflection_taper(grid)
    ring = (R > 1.0) & (R < r1)
    zr = Z[ring]
    reflected = np.conj(sample(1.0 / np.conj(zr))) * zr ** 2 / np.conj(zr) ** 2
    # reflection preserves sup |mu|; clip interpolation overshoot
    cap = float(np.max(np.abs(values[inside]))) if np.any(inside) else 0.0
    size = np.abs(reflected)
    reflected = np.where(size > cap, reflected * cap / np.maximum(size, 1e-300), reflected)
    values[ring] = taper[ring] * reflected
    return ComplexField(grid, values, support_radius=r1)


def _kasa_fit(points):
    x, y = points.real, points.imag
    A = np.column_stack([2 * x, 2 * y, np.ones_like(x)])
    (bx, by, c), *_ = np.linalg.lstsq(A, x * x + y * y, rcond=None)
    center = bx + 1j * by
    return center, math.sqrt(c + abs(center) ** 2)


def disk_normalized_map(mu_on_disk, cfg=None, grid=None, plan=None, samples=256):
    """mu-conformal map of the unit disk onto itself with F(0) = 0."""
    grid = grid or mu_on_disk.grid
    mu_ext = reflect_mu(mu_on_disk, grid)
    base = principal_map(mu_ext, cfg, plan)

    t = TWO_PI * np.arange(samples) / samples
    center, rho = _kasa_fit(base.evaluate(np.exp(1j * t)))
    F1 = (base.f.values - center) / rho
    w0 = -center / rho
    denom = 1.0 - np.conj(w0) * F1
    F = (F1 - w0) / denom
    dM = (1.0 - abs(w0) ** 2) / denom ** 2
    fz = ComplexField(grid, dM * base.fz.values / rho)
    fzbar = ComplexField(grid, dM * base.fzbar.values / rho)
    J = ComplexField(grid, np.abs(dM) ** 2 * base.J.values.real / rho ** 2)
    F_field = ComplexField(grid, F)

    images = F_field.evaluate(np.exp(1j * t))
    deviation = float(np.max(np.abs(np.abs(images) - 1.0)))
    if deviation > 10.0 * grid.h:
        raise ResolutionError(
            f"disk map moves the unit circle by {deviation:.3e} > 10h = {10 * grid.h:.3e}"
        )
    logger.info("disk map: circle fit center %.2e, radius %.6f, boundary deviation %.2e",
                abs(center), rho, deviation)
    meta = dict(base.meta)
    meta.update({"fit_center": [center.real, center.imag], "fit_radius": rho,
                 "circle_deviation": deviation})
    return QCMap(grid, F_field, fz, fzbar, J, mu_ext, base.k, base.residual, base.iterations,
                 kind="disk", meta=meta)


# ---------------------------------------------------------------------------
# Inversion
# ---------------------------------------------------------------------------

def _bilinear(field_values, grid, z):
    i, j = grid.fractional_index(z)
    coords = np.vstack([i.ravel(), j.ravel()])
    re = ndimage.map_coordinates(field_values.real, coords, order=1, mode="nearest")
    im = ndimage.map_coordinates(field_values.imag, coords, order=1, mode="nearest")
    return (re + 1j * im).reshape(np.shape(z))


def _sampler(field_, order):
    if order == 1:
        return lambda z: _bilinear(field_.values, field_.grid, z)
    return lambda z: field_.evaluate(z, order=order)


def _newton(f, w, z, tol, order=1):
    grid = f.grid
    value, dz, dzbar = (_sampler(fd, order) for fd in (f.f, f.fz, f.fzbar))
    for _ in range(NEWTON_MAX_STEPS):
        r = w - value(z)
        done = np.abs(r) <= tol
        if np.all(done):
            break
        fz = dz(z)
        fzbar = dzbar(z)
        J = np.abs(fz) ** 2 - np.abs(fzbar) ** 2
        safe = np.where(np.abs(J) > 1e-14, J, 1e-14)
        step = (np.conj(fz) * r - fzbar * np.conj(r)) / safe
        z = np.where(done, z, np.clip(z.real + step.real, -grid.L, grid.L - grid.h)
                     + 1j * np.clip(z.imag + step.imag, -grid.L, grid.L - grid.h))
    r = w - value(z)
    return z, np.abs(r) <= tol


@dataclass
class _InverseIndex:
    nodes: np.ndarray
    images: np.ndarray
    tree: object
    triangulation: Optional[object] = None


def _inverse_index(f):
    cache = f.meta.setdefault("_inverse_index", None)
    if cache is not None:
        return cache
    trusted = f.grid.radius <= f.trusted_radius
    nodes = f.grid.Z[trusted]
    images = f.f.values[trusted]
    index = _InverseIndex(nodes, images, cKDTree(np.column_stack([images.real, images.imag])))
    f.meta["_inverse_index"] = index
    return index


def _barycentric(index, w):
    if index.triangulation is None:
        index.triangulation = Delaunay(np.column_stack([index.images.real, index.images.imag]))
    tri = index.triangulation
    pts = np.column_stack([w.real, w.imag])
    simplex = tri.find_simplex(pts)
    z = np.full(w.shape, np.nan, dtype=complex)
    ok = simplex >= 0
    if np.any(ok):
        T = tri.transform[simplex[ok]]
        b = np.einsum("ijk,ik->ij", T[:, :2, :], pts[ok] - T[:, 2, :])
        bary = np.column_stack([b, 1.0 - b.sum(axis=1)])
        z[ok] = np.einsum("ij,ij->i", bary, index.nodes[tri.simplices[simplex[ok]]])
    return z, ok


def invert_map(f, w, tol=None):
    """z with |f(z) - w| <= tol (default 1e-8 L) for every requested w."""
    w = np.asarray(w, dtype=complex)
    shape = w.shape
    w = w.ravel()
    tol = 1e-8 * f.grid.L if tol is None else tol
    if f.kind == "identity":
        return w.reshape(shape).copy()
    index = _inverse_index(f)
    _, nearest = index.tree.query(np.column_stack([w.real, w.imag]))
    z, ok = _newton(f, w, index.nodes[nearest], tol)

    if not np.all(ok):
        bad = ~ok
        logger.warning("Newton failed for %d of %d points; trying barycentric inversion", bad.sum(), w.size)
        start, located = _barycentric(index, w[bad])
        if not np.all(located):
            raise InversionError("point outside the image of the trusted region", points=w[bad][~located])
        z_bad, ok_bad = _newton(f, w[bad], start, tol)
        if not np.all(ok_bad):
            raise InversionError("Newton and barycentric inversion both failed", points=w[bad][~ok_bad])
        z[bad] = z_bad

    # refine on the cubic interpolant; the bilinear preimage stays where that fails
    z_fine, ok_fine = _newton(f, w, z, tol, order=3)
    if not np.all(ok_fine):
        logger.debug("cubic refinement did not converge for %d points", int((~ok_fine).sum()))
    z = np.where(ok_fine, z_fine, z)

    limit = f.trusted_radius + f.grid.h
    outside = np.abs(z) > limit
    if np.any(outside):
        raise InversionError("preimage lies outside the trusted region", points=w[outside])
    return z.reshape(shape)


def image_nodes(f, radius=1.0, margin=0.0):
    """Grid nodes w lying in f(|z| < radius), with their preimages."""
    t = TWO_PI * np.arange(512) / 512
    reach = float(np.max(np.abs(f.evaluate(radius * np.exp(1j * t))))) + 2.0 * f.grid.h
    grid = f.grid
    candidates = grid.radius <= reach
    W = grid.Z[candidates]
    Z = invert_map(f, W)
    keep = np.abs(Z) < radius - margin
    mask = np.zeros((grid.n, grid.n), dtype=bool)
    mask[candidates] = keep
    pre = np.zeros((grid.n, grid.n), dtype=complex)
    pre[candidates] = np.where(keep, Z, 0.0)
    return mask, pre


def pullback(omega, f, radius=1.0):
    """h = omega o f^{-1} on grid nodes of f(|z| < radius)."""
    mask, pre = image_nodes(f, radius)
    values = np.zeros((omega.grid.n, omega.grid.n), dtype=complex)
    values[mask] = omega.evaluate(pre[mask])
    return ComplexField(omega.grid, values)


# ---------------------------------------------------------------------------
# Factorization
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FactorizationResult:
    f: QCMap
    g: ComplexField
    p_star: float
    q: float

    def describe(self):
        return {"p_star": self.p_star, "q": self.q, "g_support": self.g.support_radius}


def factorization_source(mu, sigma, f, cfg=None):
    """g(w) = (f_z sigma / J)(f^{-1}(w)) on the image of supp sigma."""
    cfg = resolve_config(mu, cfg)
    grid = f.grid
    if not np.any(sigma.values != 0):
        return FactorizationResult(f, ComplexField.zeros(grid), cfg.p_star, cfg.q)
    radius = sigma.support_radius if sigma.is_compact else sigma.effective_support()
    support = grid.radius <= radius
    J = f.J.values.real
    if np.any(J[support] <= 0):
        raise ResolutionError("Jacobian vanishes on the support of sigma")
    # sigma vanishes off its support, so the density is smooth wherever sigma is
    positive = J > 0
    density = np.zeros((grid.n, grid.n), dtype=complex)
    density[positive] = f.fz.values[positive] * sigma.values[positive] / J[positive]
    density = ComplexField(grid, density)

    mask, pre = image_nodes(f, radius + grid.h)
    values = np.zeros((grid.n, grid.n), dtype=complex)
    values[mask] = density.evaluate(pre[mask], order=3)
    nonzero = np.abs(values) > 0
    g_radius = float(grid.radius[nonzero].max()) if np.any(nonzero) else 0.0
    values = np.where(grid.radius <= g_radius, values, 0.0)
    g = ComplexField(grid, values, support_radius=g_radius)
    logger.info("transported source supported in |w| <= %.4g (p*=%.4g, q=%.4g)", g_radius, cfg.p_star, cfg.q)
    return FactorizationResult(f, g, cfg.p_star, cfg.q)


# ---------------------------------------------------------------------------
# Composition
# ---------------------------------------------------------------------------

def derivative_samplers(h):
    """(value, d/dw, d/dwbar) evaluators for a field or an analytic-style object."""
    if isinstance(h, ComplexField):
        hw, hwbar = wirtinger_dz(h), wirtinger_dzbar(h)
        return h.evaluate, hw.evaluate, hwbar.evaluate
    return h.evaluate, h.dw, h.dwbar


def compose_on(h, f, mu, sigma, domain, trusted):
    """
    omega = h o f on the node mask `domain`; L2 residual of
    omega_zbar - mu omega_z - sigma over the mask `trusted`.
    """
    grid = f.grid
    value, dw, dwbar = derivative_samplers(h)
    W = f.f.values[domain]
    try:
        hv = value(W)
        hw = dw(W)
        hwbar = dwbar(W)
    except ProbeError as exc:
        raise ProbeError(f"h does not cover the image of the domain: {exc}") from exc
    fz, fzbar = f.fz.values[domain], f.fzbar.values[domain]
    omega_z = hw * fz + hwbar * np.conj(fzbar)
    omega_zbar = hw * fzbar + hwbar * np.conj(fz)
    residual = omega_zbar - mu.values[domain] * omega_z - sigma.values[domain]

    values = np.zeros((grid.n, grid.n), dtype=complex)
    values[domain] = hv
    keep = trusted[domain]
    res = float(np.sqrt(np.sum(np.abs(residual[keep]) ** 2) * grid.cell_area))
    return ComplexField(grid, values), res


def compose_and_verify(h, f, mu, sigma, trusted_radius=0.9, radius=1.0):
    """omega = h o f on |z| <= radius; L2 residual of the equation on |z| <= trusted_radius * radius."""
    R = f.grid.radius
    omega, res = compose_on(h, f, mu, sigma, R <= radius, R <= trusted_radius * radius)
    logger.info("composition residual %.3e on |z| <= %.3g", res, trusted_radius * radius)
    return omega, res
