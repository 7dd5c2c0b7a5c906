"""
Grids, complex fields, boundary functions and discrete Wirtinger derivatives.

Every solver in the package works on the same substrate:

    GridSpec          uniform square grid on [-L, L)^2 with the origin on a node
    ComplexField      complex samples on a grid, optionally compactly supported
                      or carrying a known far-field tail
    BoundaryFunction  arc-wise samples of a function on the unit circle
    SolverConfig      fixed-point parameters (p, C_p, k, tolerances)

Derivatives are spectral whenever the field is periodic on the box. Fields that
are not periodic but whose tail is known exactly (the Cauchy tail mass/(pi z),
the logarithmic tail mass/(2 pi) log|z| or the affine term mass (z + zbar)) are
split into a periodic remainder and a multiple of that profile; the remainder is
differentiated spectrally and the profile in closed form. Anything else falls back to
4th-order central differences.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import ndimage

from . import settings
from .errors import ConfigError, ProbeError, SupportError

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi

# Reference profile: b(z) = ((m+1)/(pi a^2)) (1 - |z|^2/a^2)^m on |z| < a = L/2.
REFERENCE_ORDER = 6

TAILS = ("general", "periodic", "cauchy", "log", "affine")


@dataclass(frozen=True)
class GridSpec:
    L: float
    n: int

    def __post_init__(self):
        try:
            L, n = float(self.L), int(self.n)
        except (TypeError, ValueError):
            raise ConfigError(f"invalid grid parameters L={self.L!r}, n={self.n!r}")
        if not (L > 0):
            raise ConfigError(f"half width L must be positive, got {self.L}")
        if n != self.n or n < 16 or n & (n - 1):
            raise ConfigError(f"n must be a power of two >= 16, got {self.n}")
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "n", n)

    @property
    def h(self):
        return 2.0 * self.L / self.n

    @property
    def origin_index(self):
        return (self.n // 2, self.n // 2)

    @property
    def cell_area(self):
        return self.h * self.h

    @cached_property
    def x(self):
        return -self.L + self.h * np.arange(self.n)

    @cached_property
    def Z(self):
        """Node coordinates; rows follow y, columns follow x."""
        Z = self.x[np.newaxis, :] + 1j * self.x[:, np.newaxis]
        Z.setflags(write=False)
        return Z

    @cached_property
    def radius(self):
        R = np.abs(self.Z)
        R.setflags(write=False)
        return R

    @cached_property
    def wavenumbers(self):
        """(KX, KY) with Nyquist modes kept."""
        k = TWO_PI * np.fft.fftfreq(self.n, d=self.h)
        return np.meshgrid(k, k, indexing="xy")

    @cached_property
    def dz_symbol(self):
        KX, KY = self._derivative_wavenumbers
        return 0.5 * (1j * KX + KY)

    @cached_property
    def dzbar_symbol(self):
        KX, KY = self._derivative_wavenumbers
        return 0.5 * (1j * KX - KY)

    @cached_property
    def _derivative_wavenumbers(self):
        # Nyquist zeroed so that conj(dz(conj f)) == dzbar(f) holds exactly.
        k = TWO_PI * np.fft.fftfreq(self.n, d=self.h)
        k[self.n // 2] = 0.0
        return np.meshgrid(k, k, indexing="xy")

    def fractional_index(self, points):
        """(row, column) fractional indices of complex points."""
        pts = np.asarray(points, dtype=complex)
        return (pts.imag + self.L) / self.h, (pts.real + self.L) / self.h

    def in_box(self, points, margin=0.0):
        i, j = self.fractional_index(points)
        hi = self.n - 1 - margin
        return (i >= margin) & (i <= hi) & (j >= margin) & (j <= hi)

    def disk_mask(self, radius):
        return self.radius <= radius

    def describe(self):
        return {"L": self.L, "n": self.n, "h": self.h}


def make_grid(L, n):
    """Validated GridSpec; n must be a power of two >= 16."""
    return GridSpec(L, n)


# ---------------------------------------------------------------------------
# Reference profiles for tails
# ---------------------------------------------------------------------------

def _reference_parts(grid):
    a = 0.5 * grid.L
    m = REFERENCE_ORDER
    s = (grid.radius / a) ** 2
    inside = s < 1.0
    one_minus = np.where(inside, 1.0 - s, 0.0)
    bump = (m + 1) / (np.pi * a * a) * one_minus ** m
    mass = np.where(inside, 1.0 - one_minus ** (m + 1), 1.0)
    return a, s, inside, one_minus, bump, mass


def reference_bump(grid):
    """Unit-mass radial bump of radius L/2."""
    return _reference_parts(grid)[4]


def reference_cauchy(grid):
    """Cauchy transform of the reference bump: M(|z|)/(pi z), zero at the origin."""
    _, _, _, _, _, mass = _reference_parts(grid)
    Z = grid.Z
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(Z != 0, mass / (np.pi * Z), 0.0)
    return out


def reference_cauchy_dz(grid):
    _, _, _, _, bump, mass = _reference_parts(grid)
    Z = grid.Z
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(Z != 0, bump * np.conj(Z) / Z - mass / (np.pi * Z * Z), 0.0)
    return out


def reference_log(grid):
    """Newtonian potential N of the reference bump, Delta N = bump, N(0) = 0."""
    a, s, inside, one_minus, _, _ = _reference_parts(grid)
    m = REFERENCE_ORDER
    inner = np.zeros_like(s)
    for j in range(m + 1):
        inner += (1.0 - one_minus ** (j + 1)) / (j + 1)
    inner /= 4.0 * np.pi
    harmonic_number = sum(1.0 / (j + 1) for j in range(m + 1))
    with np.errstate(divide="ignore"):
        outer = harmonic_number / (4.0 * np.pi) + np.log(np.maximum(grid.radius, 1e-300) / a) / TWO_PI
    return np.where(inside, inner, outer)


# ---------------------------------------------------------------------------
# ComplexField
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ComplexField:
    """
    Complex samples on a grid.

    support_radius: if set, samples with |z| > support_radius are exactly zero.
    tail: "periodic" (spectral derivatives apply directly), "cauchy" or "log"
          (values = periodic remainder + mass * reference profile), "affine"
          (periodic remainder + mass * (z + zbar)), or
          "general" (finite differences).
    """

    grid: GridSpec
    values: np.ndarray
    support_radius: Optional[float] = None
    tail: str = "general"
    mass: complex = 0.0
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        n = self.grid.n
        values = np.array(self.values, dtype=np.complex128, copy=True)
        if values.size != n * n:
            raise ConfigError(f"field needs {n * n} samples, got {values.size}")
        values = values.reshape(n, n)
        if self.tail not in TAILS:
            raise ConfigError(f"unknown tail {self.tail!r}")
        if self.support_radius is not None:
            outside = self.grid.radius > self.support_radius
            if np.any(values[outside] != 0):
                raise ConfigError("samples outside support_radius must be exactly zero")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mass", complex(self.mass))

    # construction ---------------------------------------------------------

    @classmethod
    def from_function(cls, grid, fn, support_radius=None, tail="general", mass=0.0):
        values = np.asarray(fn(grid.Z), dtype=complex) * np.ones((grid.n, grid.n))
        if support_radius is not None:
            values = np.where(grid.radius <= support_radius, values, 0.0)
        return cls(grid, values, support_radius=support_radius, tail=tail, mass=mass)

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros((grid.n, grid.n)), support_radius=0.0)

    def with_support(self, radius):
        """Zero everything beyond radius and mark the field compact."""
        values = np.where(self.grid.radius <= radius, self.values, 0.0)
        return ComplexField(self.grid, values, support_radius=radius)

    def restricted(self, radius):
        """Values inside radius, zero outside, without any derivative claim."""
        values = np.where(self.grid.radius <= radius, self.values, 0.0)
        return ComplexField(self.grid, values)

    # properties -----------------------------------------------------------

    @property
    def is_compact(self):
        return self.support_radius is not None

    @property
    def is_spectral(self):
        return self.is_compact or self.tail != "general"

    @property
    def flat(self):
        return self.values.reshape(-1)

    def value_at_origin(self):
        return self.values[self.grid.origin_index]

    def max_abs(self, radius=None):
        vals = self.values if radius is None else self.values[self.grid.radius <= radius]
        return float(np.max(np.abs(vals))) if vals.size else 0.0

    def effective_support(self, tol=0.0):
        """Largest node radius where |value| > tol."""
        nz = np.abs(self.values) > tol
        return float(self.grid.radius[nz].max()) if np.any(nz) else 0.0

    # interpolation --------------------------------------------------------

    def _spline_coefficients(self, order):
        key = ("spline", order)
        if key not in self._cache:
            if order > 1:
                re = ndimage.spline_filter(self.values.real, order=order, mode="mirror")
                im = ndimage.spline_filter(self.values.imag, order=order, mode="mirror")
            else:
                re, im = self.values.real, self.values.imag
            self._cache[key] = (re, im)
        return self._cache[key]

    def evaluate(self, points, order=3):
        """Spline interpolation at arbitrary complex points inside the box."""
        pts = np.asarray(points, dtype=complex)
        i, j = self.grid.fractional_index(pts)
        if not np.all(self.grid.in_box(pts)):
            raise ProbeError("interpolation point outside the grid box")
        coords = np.vstack([i.ravel(), j.ravel()])
        re, im = self._spline_coefficients(order)
        kwargs = dict(order=order, mode="mirror", prefilter=False)
        out = ndimage.map_coordinates(re, coords, **kwargs) + 1j * ndimage.map_coordinates(im, coords, **kwargs)
        return out.reshape(pts.shape)

    # arithmetic -----------------------------------------------------------

    def _kind(self):
        return "compact" if self.is_compact else self.tail

    def _check_grid(self, other):
        if other.grid != self.grid:
            raise ConfigError("fields live on different grids")

    def _combine(self, other, sign):
        if not isinstance(other, ComplexField):
            c = complex(other)
            if c == 0:
                return self
            tail = "periodic" if self.is_compact else self.tail
            return ComplexField(self.grid, self.values + sign * c, tail=tail, mass=self.mass)
        self._check_grid(other)
        values = self.values + sign * other.values
        kinds = {self._kind(), other._kind()}
        if "general" in kinds or len(kinds - {"compact", "periodic"}) > 1:
            return ComplexField(self.grid, values)
        if kinds == {"compact"}:
            return ComplexField(self.grid, values, support_radius=max(self.support_radius, other.support_radius))
        for tail in ("cauchy", "log", "affine"):
            if tail in kinds:
                return ComplexField(self.grid, values, tail=tail, mass=self.mass + sign * other.mass)
        return ComplexField(self.grid, values, tail="periodic")

    def __add__(self, other):
        return self._combine(other, 1.0)

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __rsub__(self, other):
        return (-self)._combine(other, 1.0)

    def __neg__(self):
        return self.scaled(-1.0)

    def scaled(self, c):
        c = complex(c)
        return ComplexField(self.grid, c * self.values, support_radius=self.support_radius,
                            tail=self.tail, mass=c * self.mass)

    def __mul__(self, other):
        if not isinstance(other, ComplexField):
            return self.scaled(other)
        self._check_grid(other)
        values = self.values * other.values
        radii = [f.support_radius for f in (self, other) if f.is_compact]
        if radii:
            radius = min(radii)
            return ComplexField(self.grid, np.where(self.grid.radius <= radius, values, 0.0),
                                support_radius=radius)
        if self.tail == other.tail == "periodic":
            return ComplexField(self.grid, values, tail="periodic")
        return ComplexField(self.grid, values)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self.scaled(1.0 / complex(c))

    def conj(self):
        if self.tail == "cauchy":
            return ComplexField(self.grid, np.conj(self.values))
        return ComplexField(self.grid, np.conj(self.values), support_radius=self.support_radius,
                            tail=self.tail, mass=np.conj(self.mass))

    def real(self):
        if self.tail == "cauchy":
            return ComplexField(self.grid, self.values.real)
        return ComplexField(self.grid, self.values.real, support_radius=self.support_radius,
                            tail=self.tail, mass=self.mass.real)

    def imag(self):
        return (self - self.conj()).scaled(-0.5j)

    def map_values(self, fn):
        """Pointwise function of the samples; the result makes no derivative claim."""
        return ComplexField(self.grid, fn(self.values))

    def periodic_remainder(self):
        if self.tail == "cauchy":
            return self.values - self.mass * reference_cauchy(self.grid)
        if self.tail == "log":
            return self.values - self.mass * reference_log(self.grid)
        if self.tail == "affine":
            return self.values - self.mass * 2.0 * self.grid.Z.real
        return self.values


# ---------------------------------------------------------------------------
# Wirtinger derivatives
# ---------------------------------------------------------------------------

def _spectral_apply(values, symbol):
    return np.fft.ifft2(symbol * np.fft.fft2(values))


def _fd_partial(values, h, axis):
    d = np.gradient(values, h, axis=axis, edge_order=2)
    f = np.moveaxis(values, axis, 0)
    inner = (-f[4:] + 8.0 * f[3:-1] - 8.0 * f[1:-3] + f[:-4]) / (12.0 * h)
    dm = np.moveaxis(d, axis, 0)
    dm[2:-2] = inner
    return d


def _fd_wirtinger(values, h, conjugate):
    dx = _fd_partial(values, h, axis=1)
    dy = _fd_partial(values, h, axis=0)
    return 0.5 * (dx + 1j * dy) if conjugate else 0.5 * (dx - 1j * dy)


def wirtinger_dz(f):
    """d/dz = (d/dx - i d/dy)/2."""
    grid = f.grid
    if not f.is_spectral:
        return ComplexField(grid, _fd_wirtinger(f.values, grid.h, conjugate=False))
    d = _spectral_apply(f.periodic_remainder(), grid.dz_symbol)
    if f.tail == "cauchy":
        return ComplexField(grid, d + f.mass * reference_cauchy_dz(grid))
    if f.tail == "log":
        quarter = 0.25 * f.mass
        return ComplexField(grid, d + quarter * reference_cauchy(grid), tail="cauchy", mass=quarter)
    if f.tail == "affine":
        return ComplexField(grid, d + f.mass, tail="periodic")
    return ComplexField(grid, d, tail="periodic")


def wirtinger_dzbar(f):
    """d/dzbar = (d/dx + i d/dy)/2."""
    grid = f.grid
    if not f.is_spectral:
        return ComplexField(grid, _fd_wirtinger(f.values, grid.h, conjugate=True))
    d = _spectral_apply(f.periodic_remainder(), grid.dzbar_symbol)
    if f.tail == "cauchy":
        return ComplexField(grid, d + f.mass * reference_bump(grid), tail="periodic")
    if f.tail == "log":
        return ComplexField(grid, d + 0.25 * f.mass * np.conj(reference_cauchy(grid)))
    if f.tail == "affine":
        return ComplexField(grid, d + f.mass, tail="periodic")
    return ComplexField(grid, d, tail="periodic")


def laplacian(f):
    return wirtinger_dzbar(wirtinger_dz(f)).scaled(4.0)


def fd_laplacian(f):
    """Five-point Laplacian on interior nodes; boundary rows and columns are zero."""
    v, h = f.values, f.grid.h
    out = np.zeros_like(v)
    out[1:-1, 1:-1] = (v[2:, 1:-1] + v[:-2, 1:-1] + v[1:-1, 2:] + v[1:-1, :-2] - 4.0 * v[1:-1, 1:-1]) / (h * h)
    return ComplexField(f.grid, out)


# ---------------------------------------------------------------------------
# Library fields
# ---------------------------------------------------------------------------

def disk_indicator(grid, radius=1.0, center=0j, supersample=8):
    """Indicator of a disk, cells on the circle weighted by their covered area."""
    offsets = ((np.arange(supersample) + 0.5) / supersample - 0.5) * grid.h
    shifted = grid.Z - center
    frac = np.zeros((grid.n, grid.n))
    for dy in offsets:
        for dx in offsets:
            frac += np.abs(shifted + dx + 1j * dy) <= radius
    frac /= supersample * supersample
    support = abs(center) + radius + grid.h * math.sqrt(0.5)
    return ComplexField(grid, np.where(grid.radius <= support, frac, 0.0), support_radius=support)


def smooth_bump(grid, center=0j, radius=0.5, amplitude=1.0):
    """C-infinity bump exp(1 - 1/(1 - s)), s = |z - center|^2 / radius^2."""
    s = np.abs(grid.Z - center) ** 2 / radius ** 2
    with np.errstate(divide="ignore", over="ignore"):
        vals = np.where(s < 1.0, np.exp(1.0 - 1.0 / np.maximum(1.0 - s, 1e-300)), 0.0)
    support = abs(center) + radius
    vals = np.where(grid.radius <= support, vals, 0.0)
    return ComplexField(grid, amplitude * vals, support_radius=support)


def smooth_step(x):
    """C-infinity step: 0 for x <= 0, 1 for x >= 1."""
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        rise = np.where(x > 0.0, np.exp(-1.0 / np.where(x > 0.0, x, 1.0)), 0.0)
        fall = np.where(x < 1.0, np.exp(-1.0 / np.where(x < 1.0, 1.0 - x, 1.0)), 0.0)
    return rise / (rise + fall)


def _phase(z):
    """z / conj(z), zero at the origin."""
    safe = np.where(z != 0, z, 1.0)
    return np.where(z != 0, safe / np.conj(safe), 0.0)


def radial_stretch(grid, K=2.0, supersample=8):
    """
    Coefficient ((K-1)/(K+1)) z/zbar on the unit disk of the stretch
    f = z |z|^(K-1), as cell averages. Cells cut by the circle and the
    cells around the origin are supersampled; elsewhere the node value is used.
    """
    if K < 1.0:
        raise ConfigError(f"stretch factor K must be >= 1, got {K}")
    Z, R = grid.Z, grid.radius
    values = np.where(R <= 1.0, _phase(Z), 0.0)
    rough = (np.abs(R - 1.0) <= grid.h) | (R <= 1.5 * grid.h)
    offsets = ((np.arange(supersample) + 0.5) / supersample - 0.5) * grid.h
    Zr = Z[rough]
    acc = np.zeros(Zr.shape, dtype=complex)
    for dy in offsets:
        for dx in offsets:
            w = Zr + dx + 1j * dy
            acc += np.where(np.abs(w) <= 1.0, _phase(w), 0.0)
    values[rough] = acc / (supersample * supersample)
    amplitude = (K - 1.0) / (K + 1.0)
    return ComplexField(grid, amplitude * values, support_radius=1.0 + grid.h)


def check_support(f, what="field"):
    """Raise SupportError unless f vanishes beyond L/2 (one cell of slack)."""
    limit = 0.5 * f.grid.L + f.grid.h
    if f.is_compact:
        radius = f.support_radius
    else:
        radius = f.effective_support()
    if radius > limit:
        raise SupportError(f"{what} support radius {radius:.4g} exceeds L/2 = {0.5 * f.grid.L:.4g}")
    return radius


# ---------------------------------------------------------------------------
# Norms
# ---------------------------------------------------------------------------

def norm_lp(f, p):
    if p < 1:
        raise ConfigError(f"norm exponent must be >= 1, got {p}")
    a = np.abs(f.values if isinstance(f, ComplexField) else np.asarray(f))
    area = f.grid.cell_area if isinstance(f, ComplexField) else 1.0
    if np.isinf(p):
        return float(a.max())
    return float((np.sum(a ** p) * area) ** (1.0 / p))


def holder_stride(n):
    """Node subsampling for the pairwise Hölder sup: every node up to n = 256, every fourth node above."""
    return 1 if n <= 256 else 4


def holder_seminorm(f, alpha, stride=None):
    """sup |f(z1) - f(z2)| / |z1 - z2|^alpha over subsampled node pairs."""
    n = f.grid.n
    stride = holder_stride(n) if stride is None else stride
    idx = np.unique(np.append(np.arange(0, n, stride), n - 1))
    Zs = f.grid.Z[np.ix_(idx, idx)].ravel()
    Vs = f.values[np.ix_(idx, idx)].ravel()
    best = 0.0
    chunk = 512
    for start in range(0, Zs.size, chunk):
        dz = np.abs(Zs[start:start + chunk, None] - Zs[None, :])
        dv = np.abs(Vs[start:start + chunk, None] - Vs[None, :])
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(dz > 0, dv / dz ** alpha, 0.0)
        best = max(best, float(ratio.max()))
    return best


def bp_norm(omega, p):
    """Grid B_p norm: Hoelder seminorm of exponent 1 - 2/p plus L^p norms of both derivatives."""
    if p < 1:
        raise ConfigError(f"norm exponent must be >= 1, got {p}")
    alpha = 1.0 - 2.0 / p
    return (holder_seminorm(omega, alpha)
            + norm_lp(wirtinger_dz(omega), p)
            + norm_lp(wirtinger_dzbar(omega), p))


# ---------------------------------------------------------------------------
# Boundary functions
# ---------------------------------------------------------------------------

def wrap_angle(t):
    return np.mod(t, TWO_PI)


def _principal(x):
    """Map angles into (-pi, pi]."""
    return np.pi - np.mod(np.pi - x, TWO_PI)


@dataclass(frozen=True, eq=False)
class Arc:
    t_start: float
    t_end: float
    params: np.ndarray
    samples: np.ndarray

    @property
    def length(self):
        return self.t_end - self.t_start

    def contains(self, t):
        """t already shifted into [t_start, t_start + 2 pi)."""
        return (t >= self.t_start) & (t < self.t_end)


def _midpoints(t0, t1, count):
    return t0 + (np.arange(count) + 0.5) * (t1 - t0) / count


@dataclass(frozen=True, eq=False)
class BoundaryFunction:
    """
    Function on the unit circle, parameterized by t in [0, 2 pi).

    Arcs are contiguous and cover one full turn starting at arcs[0].t_start.
    Samples sit at arc midpoints; `evaluator` (optional) gives exact values.
    """

    arcs: tuple
    singular_points: tuple = ()
    is_unimodular: bool = False
    evaluator: Optional[Callable] = None

    def __post_init__(self):
        if not self.arcs:
            raise ConfigError("boundary function needs at least one arc")
        for a, b in zip(self.arcs, self.arcs[1:]):
            if abs(a.t_end - b.t_start) > 1e-12:
                raise ConfigError("arcs must be contiguous and mutually disjoint")
        total = self.arcs[-1].t_end - self.arcs[0].t_start
        if abs(total - TWO_PI) > 1e-9:
            raise ConfigError(f"arcs must cover the circle once, total length {total}")
        if any(a.length <= 0 or a.samples.size == 0 for a in self.arcs):
            raise ConfigError("every arc needs positive length and at least one sample")
        if self.is_unimodular:
            dev = max(float(np.max(np.abs(np.abs(a.samples) - 1.0))) for a in self.arcs)
            if dev > 1e-12:
                raise ConfigError(f"unimodular boundary function deviates from |.|=1 by {dev:.3g}")
        object.__setattr__(self, "singular_points", tuple(float(wrap_angle(s)) for s in self.singular_points))

    # construction ---------------------------------------------------------

    @classmethod
    def from_function(cls, fn, n_samples=None, breaks=None, singular_points=(), unimodular=False, exact=True):
        """Sample fn(t) arc-wise; breaks are the arc endpoints (default: one full arc)."""
        n_samples = n_samples or settings.BOUNDARY_SAMPLES
        if breaks is None or len(breaks) == 0:
            starts = [0.0]
        else:
            starts = sorted(float(wrap_angle(b)) for b in breaks)
        arcs = []
        for k, t0 in enumerate(starts):
            t1 = starts[k + 1] if k + 1 < len(starts) else starts[0] + TWO_PI
            count = max(8, int(round(n_samples * (t1 - t0) / TWO_PI)))
            params = _midpoints(t0, t1, count)
            samples = np.asarray(fn(params), dtype=complex) * np.ones(count)
            arcs.append(Arc(t0, t1, params, samples))
        return cls(tuple(arcs), tuple(singular_points), unimodular, fn if exact else None)

    @classmethod
    def from_arc_samples(cls, pieces, singular_points=(), unimodular=False):
        """pieces: iterable of (t_start, t_end, samples) with midpoint sampling."""
        arcs = []
        for t0, t1, samples in pieces:
            samples = np.asarray(samples, dtype=complex).ravel()
            arcs.append(Arc(float(t0), float(t1), _midpoints(t0, t1, samples.size), samples))
        return cls(tuple(arcs), tuple(singular_points), unimodular, None)

    @classmethod
    def constant(cls, value, n_samples=64, unimodular=False):
        return cls.from_function(lambda t: np.full(np.shape(t), value, dtype=complex),
                                 n_samples=n_samples, unimodular=unimodular)

    # evaluation -----------------------------------------------------------

    @property
    def breaks(self):
        return tuple(float(wrap_angle(a.t_start)) for a in self.arcs)

    @property
    def is_real(self):
        return all(np.all(a.samples.imag == 0) for a in self.arcs)

    @property
    def params(self):
        return np.concatenate([a.params for a in self.arcs])

    @property
    def samples(self):
        return np.concatenate([a.samples for a in self.arcs])

    def _shift(self, t):
        t0 = self.arcs[0].t_start
        return t0 + np.mod(np.asarray(t, dtype=float) - t0, TWO_PI)

    def arc_index(self, t):
        ts = self._shift(t)
        starts = np.array([a.t_start for a in self.arcs])
        return np.clip(np.searchsorted(starts, ts, side="right") - 1, 0, len(self.arcs) - 1)

    def evaluate(self, t):
        t = np.asarray(t, dtype=float)
        if self.evaluator is not None:
            return np.asarray(self.evaluator(wrap_angle(t)), dtype=complex) * np.ones(t.shape)
        ts = self._shift(t)
        which = self.arc_index(t)
        out = np.empty(ts.shape, dtype=complex)
        for k, arc in enumerate(self.arcs):
            sel = which == k
            if np.any(sel):
                re = np.interp(ts[sel], arc.params, arc.samples.real)
                im = np.interp(ts[sel], arc.params, arc.samples.imag)
                out[sel] = re + 1j * im
        return out

    def __call__(self, t):
        return self.evaluate(t)

    def distance_to_singular(self, t):
        t = np.asarray(t, dtype=float)
        if not self.singular_points:
            return np.full(t.shape, np.inf)
        d = np.stack([np.abs(_principal(t - s)) for s in self.singular_points])
        return d.min(axis=0)

    # derived functions ----------------------------------------------------

    def mapped(self, fn, unimodular=False):
        """Pointwise fn applied to samples and to the exact evaluator."""
        arcs = tuple(Arc(a.t_start, a.t_end, a.params, np.asarray(fn(a.samples), dtype=complex))
                     for a in self.arcs)
        evaluator = None
        if self.evaluator is not None:
            base = self.evaluator

            def evaluator(t):
                return fn(np.asarray(base(t), dtype=complex))

        return BoundaryFunction(arcs, self.singular_points, unimodular, evaluator)

    def conj(self):
        return self.mapped(np.conj, unimodular=self.is_unimodular)

    def arc_arguments(self):
        """Per-arc unwrapped arguments, branches chained across arc breaks."""
        if not self.is_unimodular:
            raise ConfigError("argument is only defined for unimodular boundary functions")
        out = []
        previous = None
        for arc in self.arcs:
            theta = np.unwrap(np.angle(arc.samples))
            if previous is not None:
                theta = theta + TWO_PI * np.round((previous - theta[0]) / TWO_PI)
            out.append(theta)
            previous = theta[-1]
        return out

    def argument(self):
        """Real boundary function theta with exp(i theta) equal to self, arc-wise continuous."""
        args = self.arc_arguments()
        arcs = tuple(Arc(a.t_start, a.t_end, a.params, th.astype(complex)) for a, th in zip(self.arcs, args))
        evaluator = None
        if self.evaluator is not None:
            table = BoundaryFunction(arcs, self.singular_points, False, None)
            base = self.evaluator

            def evaluator(t):
                t = np.asarray(t, dtype=float)
                guess = table.evaluate(t).real
                raw = np.angle(np.asarray(base(t), dtype=complex))
                return raw + TWO_PI * np.round((guess - raw) / TWO_PI)

        return BoundaryFunction(arcs, self.singular_points, False, evaluator)

    def winding_index(self):
        """Argument increment over the arcs / 2 pi; jumps between arcs excluded."""
        args = self.arc_arguments()
        total = sum(float(th[-1] - th[0]) for th in args)
        if len(self.arcs) == 1 and not self.singular_points:
            total += float(_principal(args[0][0] - args[0][-1]))
        return int(round(total / TWO_PI))

    def transported(self, forward, inverse):
        """
        Re-parameterize through an increasing circle homeomorphism s = forward(t):
        the result G satisfies G(forward(t)) = self(t).
        """
        breaks = [float(wrap_angle(forward(np.array([b]))[0])) for b in self.breaks]
        singular = [float(wrap_angle(forward(np.array([s]))[0])) for s in self.singular_points]
        n_samples = sum(a.samples.size for a in self.arcs)
        if len(self.arcs) == 1:
            breaks = None
        source = self

        def evaluator(u):
            v = source.evaluate(inverse(np.asarray(u, dtype=float)))
            return v / np.abs(v) if source.is_unimodular else v

        return BoundaryFunction.from_function(
            evaluator,
            n_samples=n_samples, breaks=breaks, singular_points=singular,
            unimodular=self.is_unimodular,
        )


def variation(bf):
    """Cyclic sum of consecutive sample differences plus inter-arc jumps."""
    if bf is None or not bf.arcs:
        raise ConfigError("variation needs at least one arc")
    samples = bf.samples
    return float(np.sum(np.abs(np.diff(samples))) + abs(samples[0] - samples[-1]))


# ---------------------------------------------------------------------------
# Solver configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SolverConfig:
    p: float = 4.0
    cp_estimate: float = 1.0
    k: float = 0.9
    eps_fix: float = 1e-10
    max_iter: int = 100

    def __post_init__(self):
        if not (0.0 <= self.k < 1.0):
            raise ConfigError(f"dilatation bound k must satisfy 0 <= k < 1, got {self.k}")
        if self.k * self.cp_estimate >= 1.0:
            raise ConfigError(f"k * C_p = {self.k * self.cp_estimate:.4g} must be < 1")
        if not (self.eps_fix > 0):
            raise ConfigError("eps_fix must be positive")
        if not (self.p > 2):
            raise ConfigError(f"integrability exponent p must exceed 2, got {self.p}")
        if int(self.max_iter) < 1:
            raise ConfigError("max_iter must be at least 1")

    @classmethod
    def from_env(cls, **overrides):
        params = dict(eps_fix=settings.EPS_FIX, max_iter=settings.MAX_ITER)
        params.update(overrides)
        return cls(**params)

    @classmethod
    def for_mu(cls, mu, **overrides):
        """Config whose dilatation bound is the sampled sup |mu|."""
        params = dict(k=mu.max_abs())
        params.update(overrides)
        return cls.from_env(**params)

    def bound_to(self, mu):
        """Same config with k lowered to the sampled sup |mu| when the configured bound is looser."""
        kmax = mu.max_abs()
        if kmax >= self.k:
            return self
        logger.debug("dilatation bound tightened from k=%.4g to sup|mu|=%.4g", self.k, kmax)
        return replace(self, k=kmax)

    @property
    def p_star(self):
        return self.p ** 2 / (2.0 * (self.p - 1.0))

    @property
    def q(self):
        ps = self.p_star
        return ps ** 2 / (2.0 * (ps - 1.0))

    def describe(self):
        return {"p": self.p, "cp_estimate": self.cp_estimate, "k": self.k, "eps_fix": self.eps_fix,
                "max_iter": self.max_iter, "p_star": self.p_star, "q": self.q}
