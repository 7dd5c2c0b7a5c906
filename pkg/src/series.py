"""
Truncated Fourier/power series on the unit circle.

Boundary data are sampled on half-offset nodes t_k = 2 pi (k + 1/2) / M, which
never coincide with a break point at t = 0. Modes up to M/8 are kept as is,
modes between M/8 and M/4 are damped by an exponential filter of order 12 and
everything above M/4 is dropped.
"""

import numpy as np

from . import settings
from .errors import ConfigError
from .field_core import TWO_PI

FILTER_ORDER = 12
FILTER_STRENGTH = 36.0


def sample_nodes(M):
    return TWO_PI * (np.arange(M) + 0.5) / M


def spectral_filter(modes, M):
    """Filter weight per signed mode."""
    m = np.abs(np.asarray(modes, dtype=float))
    flat, cut = M / 8.0, M / 4.0
    ramp = np.clip((m - flat) / (cut - flat), 0.0, None)
    weights = np.exp(-FILTER_STRENGTH * ramp ** FILTER_ORDER)
    return np.where(m <= cut, weights, 0.0)


def fourier_coefficients(data, M=None):
    """
    Signed modes m and coefficients c_m with data(t) = sum c_m e^{imt}.

    data: a BoundaryFunction (sampled at the half-offset nodes) or an array of
    M samples already taken there.
    """
    if hasattr(data, "evaluate"):
        M = M or settings.BOUNDARY_SAMPLES
        samples = data.evaluate(sample_nodes(M))
    else:
        samples = np.asarray(data, dtype=complex).ravel()
        M = samples.size
    if M < 8:
        raise ConfigError(f"need at least 8 boundary samples, got {M}")
    modes = np.rint(np.fft.fftfreq(M) * M).astype(int)
    coeffs = np.fft.fft(samples) / M * np.exp(-1j * np.pi * modes / M)
    return modes, coeffs * spectral_filter(modes, M)


class PowerSeries:
    """
    side="inside":  F(z) = sum_m c_m z^m      on |z| <= 1
    side="outside": F(z) = sum_m c_m z^{-m}   on |z| >= 1, F(inf) = c_0
    """

    def __init__(self, coeffs, side="inside"):
        if side not in ("inside", "outside"):
            raise ConfigError(f"unknown series side {side!r}")
        coeffs = np.asarray(coeffs, dtype=complex).ravel()
        if coeffs.size == 0:
            coeffs = np.zeros(1, dtype=complex)
        self.coeffs = coeffs
        self.side = side

    def __repr__(self):
        return f"PowerSeries(side={self.side!r}, degree={self.degree})"

    @property
    def degree(self):
        return self.coeffs.size - 1

    @classmethod
    def constant(cls, value, side="inside"):
        return cls([value], side)

    @classmethod
    def from_boundary(cls, data, side="inside", M=None):
        """Nonnegative (inside) or nonpositive (outside) modes of the data."""
        modes, c = fourier_coefficients(data, M)
        top = int(modes.max())
        out = np.zeros(top + 1, dtype=complex)
        if side == "inside":
            keep = modes >= 0
            out[modes[keep]] = c[keep]
        else:
            keep = modes <= 0
            out[-modes[keep]] = c[keep]
        return cls(out, side).trimmed()

    def trimmed(self, tol=0.0):
        nz = np.nonzero(np.abs(self.coeffs) > tol)[0]
        size = nz[-1] + 1 if nz.size else 1
        return PowerSeries(self.coeffs[:size], self.side)

    # evaluation -------------------------------------------------------------

    def _variable(self, z):
        z = np.asarray(z, dtype=complex)
        if self.side == "inside":
            return z
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(z != 0, 1.0 / np.where(z != 0, z, 1.0), 0.0)

    def evaluate(self, z):
        u = self._variable(z)
        out = np.zeros(u.shape, dtype=complex)
        for c in self.coeffs[::-1]:
            out = out * u + c
        return out

    __call__ = evaluate

    def boundary_values(self, t):
        return self.evaluate(np.exp(1j * np.asarray(t, dtype=float)))

    def at_infinity(self):
        if self.side != "outside":
            raise ConfigError("only exterior series have a value at infinity")
        return complex(self.coeffs[0])

    # calculus ---------------------------------------------------------------

    def derivative(self):
        c = self.coeffs
        if self.side == "inside":
            return PowerSeries(np.arange(1, c.size) * c[1:], "inside")
        # d/dz z^{-m} = -m z^{-(m+1)}
        d = np.zeros(c.size + 1, dtype=complex)
        d[2:] = -np.arange(1, c.size) * c[1:]
        return PowerSeries(d, "outside")

    def antiderivative(self):
        """Primitive vanishing at the origin (interior series only)."""
        if self.side != "inside":
            raise ConfigError("primitive of an exterior series is not single valued")
        c = self.coeffs
        out = np.zeros(c.size + 1, dtype=complex)
        out[1:] = c / np.arange(1, c.size + 1)
        return PowerSeries(out, "inside")

    def divided_by_z(self, tol=1e-8):
        """F(z)/z for an interior series with F(0) = 0."""
        if self.side != "inside":
            raise ConfigError("division by z is defined for interior series")
        if abs(self.coeffs[0]) > tol * max(1.0, float(np.max(np.abs(self.coeffs)))):
            raise ConfigError(f"series does not vanish at the origin (c0 = {self.coeffs[0]:.3g})")
        return PowerSeries(self.coeffs[1:], "inside")

    # arithmetic -------------------------------------------------------------

    def _aligned(self, other):
        if other.side != self.side:
            raise ConfigError("cannot combine interior and exterior series")
        size = max(self.coeffs.size, other.coeffs.size)
        a = np.zeros(size, dtype=complex)
        b = np.zeros(size, dtype=complex)
        a[:self.coeffs.size] = self.coeffs
        b[:other.coeffs.size] = other.coeffs
        return a, b

    def __add__(self, other):
        if isinstance(other, PowerSeries):
            a, b = self._aligned(other)
            return PowerSeries(a + b, self.side)
        c = self.coeffs.copy()
        c[0] += complex(other)
        return PowerSeries(c, self.side)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        return PowerSeries(-self.coeffs, self.side)

    def __mul__(self, scalar):
        return PowerSeries(complex(scalar) * self.coeffs, self.side)

    __rmul__ = __mul__


class HarmonicSeries:
    """u(z) = A(z) + B(conj z) on the closed disk, with B(0) = 0."""

    def __init__(self, analytic, antianalytic):
        self.analytic = analytic
        self.antianalytic = antianalytic

    def evaluate(self, z):
        z = np.asarray(z, dtype=complex)
        return self.analytic.evaluate(z) + self.antianalytic.evaluate(np.conj(z))

    __call__ = evaluate

    def dz(self, z):
        return self.analytic.derivative().evaluate(z)

    def dzbar(self, z):
        return self.antianalytic.derivative().evaluate(np.conj(np.asarray(z, dtype=complex)))

    def boundary_values(self, t):
        return self.evaluate(np.exp(1j * np.asarray(t, dtype=float)))


def schwarz_series(data, M=None):
    """Analytic F on the disk with Re F = Re data on the circle and Im F(0) = 0."""
    modes, c = fourier_coefficients(_real_part(data, M), M)
    top = int(modes.max())
    out = np.zeros(top + 1, dtype=complex)
    pos = modes > 0
    out[modes[pos]] = 2.0 * c[pos]
    out[0] = c[modes == 0][0].real
    return PowerSeries(out, "inside").trimmed()


def poisson_series(data, M=None):
    """Harmonic extension of (possibly complex) boundary data into the disk."""
    modes, c = fourier_coefficients(data, M)
    top = int(modes.max())
    inner = np.zeros(top + 1, dtype=complex)
    outer = np.zeros(top + 1, dtype=complex)
    keep = modes >= 0
    inner[modes[keep]] = c[keep]
    neg = modes < 0
    outer[-modes[neg]] = c[neg]
    return HarmonicSeries(PowerSeries(inner).trimmed(), PowerSeries(outer).trimmed())


def plemelj_series(data, M=None):
    """
    Sectionally analytic (F_plus, F_minus) with F_plus - F_minus = data on the
    circle and F_minus(inf) = 0.
    """
    modes, c = fourier_coefficients(data, M)
    top = int(modes.max())
    plus = np.zeros(top + 1, dtype=complex)
    minus = np.zeros(top + 1, dtype=complex)
    keep = modes >= 0
    plus[modes[keep]] = c[keep]
    neg = modes < 0
    minus[-modes[neg]] = -c[neg]
    return PowerSeries(plus, "inside").trimmed(), PowerSeries(minus, "outside").trimmed()


def _real_part(data, M):
    if hasattr(data, "evaluate"):
        M = M or settings.BOUNDARY_SAMPLES
        return np.real(data.evaluate(sample_nodes(M))).astype(complex)
    return np.real(np.asarray(data, dtype=complex)).astype(complex)
