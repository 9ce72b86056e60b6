"""Spectral wave packets and their asymptotic moments.

A packet is an amplitude f(k) = M(k) exp(i xi(k, 0)) on a k-grid that spans
both signs of k.  Time enters only through the free phase -E(k) t / hbar, so
every position moment is a polynomial in t whose coefficients are k-space
quadratures (trapezoid rule on the packet grid):

    <x>(t)          = -<xi'_0> + (hbar t / m) <k>
    <(dx)^2>(t)     = sigma - 2 (hbar t / m) chi + (hbar t / m)^2 <(dk)^2>
    sigma           = int (M')^2 / norm + <(d xi'_0)^2>
    chi             = <(d xi'_0)(dk)>

where xi'_0 is the k-derivative of the t = 0 phase.  Channel packets carry
xi'_0 in closed form (built from the tabulated J' and F'), so the phase is
never differentiated numerically.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from enum import Enum
from typing import NamedTuple

import numpy as np

from .units import DEFAULT_UNITS, Units

__all__ = [
    "ChannelEmptyError",
    "MomentSet",
    "MomentumShifts",
    "Role",
    "Side",
    "SpectralPacket",
    "UnknownRoleError",
    "gaussian_packet",
    "gwp_momentum_shifts",
    "k_moment",
    "moments",
    "norm",
    "variance_coeffs",
    "x_mean",
    "x_variance",
]

# Channels whose norm falls below this are treated as unpopulated.
EMPTY_NORM = 1e-12
# Fraction of the grid on which M may vanish identically before x_variance refuses.
MAX_ZERO_FRACTION = 0.95
# Spectral standard deviations a Gaussian packet grid must cover on each side.
GAUSSIAN_COVERAGE = 6.0


class Side(str, Enum):
    LEFT = "left"
    RIGHT = "right"

    @property
    def other(self) -> "Side":
        return Side.RIGHT if self is Side.LEFT else Side.LEFT


class Role(str, Enum):
    IN_TOTAL = "in_total"
    IN_TR = "in_tr"
    IN_REF = "in_ref"
    OUT_TR = "out_tr"
    OUT_REF = "out_ref"
    REVERSE_G1 = "reverse_g1"
    REVERSE_G2 = "reverse_g2"
    REVERSE_COMBINED = "reverse_combined"


class ChannelEmptyError(ValueError):
    pass


class UnknownRoleError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SpectralPacket:
    """Amplitude f(k) at t = 0 on ``kgrid``.

    ``dmod`` is dM/dk for M = |f| and ``phase_slope`` the k-derivative of the
    t = 0 phase; both are filled in closed form by the constructors in this
    package.  ``phase_slope`` is None for packets whose position moments are
    not defined (the reverse-motion solutions).
    """

    kgrid: np.ndarray
    amp: np.ndarray
    role: Role
    side: Side = Side.LEFT
    dmod: np.ndarray | None = None
    phase_slope: np.ndarray | None = None
    units: Units = DEFAULT_UNITS

    @property
    def modulus(self) -> np.ndarray:
        return np.abs(self.amp)

    def at(self, t: float) -> np.ndarray:
        """Amplitude at time t, f(k) exp(-i E(k) t / hbar)."""
        if t == 0:
            return self.amp
        return self.amp * np.exp(-1j * self.units.energy(self.kgrid) * t / self.units.hbar)

    def mirrored(self) -> np.ndarray:
        """f(-k) on the same grid; requires a grid symmetric about zero."""
        return self.amp[::-1]

    def with_role(self, role: Role, **changes) -> "SpectralPacket":
        return replace(self, role=role, **changes)


class MomentSet(NamedTuple):
    norm: float
    k_mean: float
    k2_mean: float
    dk2: float
    x0: float
    v: float
    sigma: float
    chi: float

    def x_mean(self, t: float) -> float:
        return self.x0 + self.v * t

    def x_variance(self, t: float, units: Units = DEFAULT_UNITS) -> float:
        tau = units.hbar_over_m * t
        return self.sigma - 2.0 * tau * self.chi + tau * tau * self.dk2


def _integrate(values, kgrid) -> float:
    return float(np.trapezoid(values, kgrid))


def norm(p: SpectralPacket) -> float:
    return _integrate(np.abs(p.amp) ** 2, p.kgrid)


def _weights(p: SpectralPacket):
    w = np.abs(p.amp) ** 2
    total = _integrate(w, p.kgrid)
    if not total > 0:
        raise ChannelEmptyError(f"{p.role.value} packet has zero norm")
    return w, total


def average(p: SpectralPacket, values) -> float:
    """Conditional expectation of a k-space function over the packet."""
    w, total = _weights(p)
    return _integrate(w * values, p.kgrid) / total


def k_moment(p: SpectralPacket, n: int) -> float:
    if n < 1:
        raise ValueError(f"moment order must be a positive integer, got {n}")
    return average(p, p.kgrid**n)


def _require_phase(p: SpectralPacket) -> np.ndarray:
    if p.phase_slope is None:
        raise UnknownRoleError(f"position moments undefined for role {p.role.value!r}, side {p.side.value!r}")
    return p.phase_slope


def x_mean(p: SpectralPacket, t: float) -> float:
    slope = _require_phase(p)
    return -average(p, slope) + p.units.hbar_over_m * t * k_moment(p, 1)


def _dmod(p: SpectralPacket) -> np.ndarray:
    if p.dmod is not None:
        return p.dmod
    return np.gradient(p.modulus, p.kgrid, edge_order=2)


def variance_coeffs(p: SpectralPacket, max_zero_fraction: float = MAX_ZERO_FRACTION):
    """(sigma, chi, <(dk)^2>) of the position variance.

    The (ln' M)^2 term is integrated as (M')^2 so zeros of M cause no 0/0.
    """
    slope = _require_phase(p)
    m = p.modulus
    zero_fraction = np.count_nonzero(m <= 0) / m.size
    if zero_fraction > max_zero_fraction:
        raise ValueError(f"M vanishes on {zero_fraction:.1%} of the grid; variance not resolvable")
    w, total = _weights(p)
    k = p.kgrid
    k_mean = _integrate(w * k, k) / total
    dk = k - k_mean
    dphi = slope - _integrate(w * slope, k) / total
    spread = _integrate(_dmod(p) ** 2, k) / total
    sigma = spread + _integrate(w * dphi**2, k) / total
    chi = _integrate(w * dphi * dk, k) / total
    dk2 = _integrate(w * dk**2, k) / total
    return sigma, chi, dk2


def x_variance(p: SpectralPacket, t: float) -> float:
    sigma, chi, dk2 = variance_coeffs(p)
    tau = p.units.hbar_over_m * t
    return sigma - 2.0 * tau * chi + tau * tau * dk2


def moments(p: SpectralPacket) -> MomentSet:
    w, total = _weights(p)
    k = p.kgrid
    k_mean = _integrate(w * k, k) / total
    k2_mean = _integrate(w * k * k, k) / total
    sigma, chi, dk2 = variance_coeffs(p)
    x0 = -_integrate(w * _require_phase(p), k) / total
    return MomentSet(total, k_mean, k2_mean, dk2, x0, p.units.hbar_over_m * k_mean, sigma, chi)


def gaussian_packet(k0: float, l0: float, kgrid, units: Units = DEFAULT_UNITS) -> SpectralPacket:
    """Normalized Gaussian amplitude (2 l0^2 / pi)^(1/4) exp(-l0^2 (k - k0)^2).

    The packet starts centred at x = 0 with position spread l0 and spectral
    spread 1/(2 l0).
    """
    if not (k0 > 0 and l0 > 0):
        raise ValueError(f"need k0 > 0 and l0 > 0, got k0={k0}, l0={l0}")
    k = np.asarray(kgrid, dtype=float)
    width = GAUSSIAN_COVERAGE / (2.0 * l0)
    if k[0] > k0 - width or k[-1] < k0 + width:
        raise ValueError(
            f"k-grid [{k[0]:.6g}, {k[-1]:.6g}] does not cover k0 +- {GAUSSIAN_COVERAGE:g} spectral widths "
            f"[{k0 - width:.6g}, {k0 + width:.6g}]"
        )
    u = k - k0
    amp = (2.0 * l0 * l0 / math.pi) ** 0.25 * np.exp(-(l0 * u) ** 2)
    return SpectralPacket(
        kgrid=k,
        amp=amp.astype(complex),
        role=Role.IN_TOTAL,
        side=Side.LEFT,
        dmod=-2.0 * l0 * l0 * u * amp,
        phase_slope=np.zeros_like(k),
        units=units,
    )


class MomentumShifts(NamedTuple):
    dk_tr: float
    dk_ref: float
    direct_tr: float
    direct_ref: float


def gwp_momentum_shifts(scenario, coeffs, strict: bool = False) -> MomentumShifts:
    """Mean-wavenumber shifts of the transmitted and reflected Gaussian packets.

    Returns the shifts <T'>/(4 l0^2 Tbar) and -<T'>/(4 l0^2 Rbar) next to the
    directly integrated <k>_tr - k0 and <-k>_ref - k0.  An unpopulated channel
    (norm below EMPTY_NORM) gets zero shift unless ``strict``.
    """
    packet = scenario.packet
    k = packet.kgrid
    w = np.abs(packet.amp) ** 2
    T = coeffs.full("T")
    R = coeffs.full("R")
    t_bar = _integrate(w * T, k)
    r_bar = _integrate(w * R, k)
    slope = _integrate(w * coeffs.full("Tprime"), k) / (4.0 * scenario.l0**2)
    k0 = scenario.k0

    def shift(bar, numerator, direct_weight, label):
        if bar < EMPTY_NORM:
            if strict:
                raise ChannelEmptyError(f"{label} channel is empty (norm {bar:.3g})")
            warnings.warn(f"{label} channel is empty; reporting zero momentum shift", stacklevel=3)
            return 0.0, 0.0
        direct = _integrate(w * direct_weight * k, k) / bar - k0
        return numerator / bar, direct

    dk_tr, direct_tr = shift(t_bar, slope, T, "transmission")
    dk_ref, direct_ref = shift(r_bar, -slope, R, "reflection")
    return MomentumShifts(dk_tr, dk_ref, direct_tr, direct_ref)
