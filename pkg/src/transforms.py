"""
Cauchy (Pompeiu) transform P, Beurling transform T and the logarithmic potential.

All three are Fourier multipliers on the periodic box. A periodic inverse of
d/dzbar or of the Laplacian only exists for zero-mean data, so the mean of the
input is handled by the plan's dc_policy:

    "zero"  the mass is moved onto the reference bump b of field_core, whose
            transforms are known in closed form (free-space far field):

                P g = P_per(g - c b) + c * M(|z|)/(pi z)
                T g = T_per(g - c b) + c * d/dz[M(|z|)/(pi z)]

            with c = sum(g) / sum(b). Results carry a "cauchy" (resp. "log")
            tail so later derivatives stay spectral.

    "unit"  fully periodized: T has multiplier 1 at zero frequency, so it is
            unitary on every grid field, and P g = P_per(g - m) + m (z + zbar)
            with m the mean of g, so that d/dz P = T and d/dzbar P = g hold
            exactly. The far field is that of the periodic lattice.

Under "zero", T is isometric on zero-mass data only; the deficit for mass c is
the part of the c / z^2 tail that falls outside the box.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigError
from .field_core import (
    ComplexField,
    check_support,
    reference_bump,
    reference_cauchy,
    reference_cauchy_dz,
    reference_log,
)

logger = logging.getLogger(__name__)

DC_POLICIES = ("zero", "unit")


@dataclass(frozen=True, eq=False)
class TransformPlan:
    grid: object
    beurling_symbol: np.ndarray
    inverse_dzbar_symbol: np.ndarray
    inverse_laplacian_symbol: np.ndarray
    dc_policy: str = "zero"

    @classmethod
    def for_grid(cls, grid, dc_policy="zero"):
        if dc_policy not in DC_POLICIES:
            raise ConfigError(f"unknown dc_policy {dc_policy!r}; known: {', '.join(DC_POLICIES)}")
        KX, KY = grid.wavenumbers
        xi = KX + 1j * KY
        nonzero = xi != 0
        beurling = np.zeros_like(xi)
        beurling[nonzero] = np.conj(xi[nonzero]) / xi[nonzero]
        if dc_policy == "unit":
            beurling[~nonzero] = 1.0

        m_zbar = grid.dzbar_symbol
        inv_dzbar = np.zeros_like(m_zbar)
        ok = m_zbar != 0
        inv_dzbar[ok] = 1.0 / m_zbar[ok]

        k2 = KX ** 2 + KY ** 2
        inv_lap = np.zeros_like(k2)
        inv_lap[k2 > 0] = -1.0 / k2[k2 > 0]
        for table in (beurling, inv_dzbar, inv_lap):
            table.setflags(write=False)
        return cls(grid, beurling, inv_dzbar, inv_lap, dc_policy)

    @property
    def periodized(self):
        return self.dc_policy == "unit"


@lru_cache(maxsize=16)
def make_plan(grid, dc_policy="zero"):
    return TransformPlan.for_grid(grid, dc_policy)


def _plan_for(g, plan):
    plan = plan or make_plan(g.grid)
    if plan.grid != g.grid:
        raise ConfigError("transform plan and field use different grids")
    return plan


def _split_mass(g):
    """Mass c and zero-mean remainder g - c b."""
    b = reference_bump(g.grid)
    c = np.sum(g.values) / np.sum(b)
    return c, g.values - c * b


def _apply(values, symbol):
    return np.fft.ifft2(symbol * np.fft.fft2(values))


def cauchy_transform(g, plan=None):
    """omega = P g with d/dzbar omega = g and omega(0) = 0."""
    plan = _plan_for(g, plan)
    check_support(g, "Cauchy transform source")
    grid = g.grid
    if plan.periodized:
        m = complex(np.mean(g.values))
        values = _apply(g.values - m, plan.inverse_dzbar_symbol) + m * (grid.Z + np.conj(grid.Z))
        values = values - values[grid.origin_index]
        return ComplexField(grid, values, tail="affine", mass=m)
    c, remainder = _split_mass(g)
    values = _apply(remainder, plan.inverse_dzbar_symbol) + c * reference_cauchy(grid)
    values = values - values[grid.origin_index]
    logger.debug("cauchy transform: mass %.6g%+.6gj", c.real, c.imag)
    return ComplexField(grid, values, tail="cauchy", mass=c)


def beurling_transform(g, plan=None):
    """T g = d/dz (P g); unit-modulus multiplier on the zero-mass part."""
    plan = _plan_for(g, plan)
    check_support(g, "Beurling transform source")
    grid = g.grid
    if plan.periodized:
        return ComplexField(grid, _apply(g.values, plan.beurling_symbol), tail="periodic")
    c, remainder = _split_mass(g)
    values = _apply(remainder, plan.beurling_symbol) + c * reference_cauchy_dz(grid)
    return ComplexField(grid, values)


def newtonian_potential(G, plan=None):
    """Real U0 with Delta U0 = G and U0(0) = 0; the log far field is kept under either dc_policy."""
    plan = _plan_for(G, plan)
    check_support(G, "Newtonian potential source")
    grid = G.grid
    real_source = ComplexField(grid, G.values.real, support_radius=G.support_radius)
    c, remainder = _split_mass(real_source)
    c = float(np.real(c))
    values = _apply(remainder.real, plan.inverse_laplacian_symbol).real + c * reference_log(grid)
    values = values - values[grid.origin_index]
    return ComplexField(grid, values, tail="log", mass=c)
