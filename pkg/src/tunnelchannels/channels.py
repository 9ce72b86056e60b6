"""Scattering matrix, its transmission/reflection channels and the asymptotes.

Packets live on the symmetric grid ``coeffs.full_kgrid``.  A k < 0 entry of a
packet describes a wave travelling to the left, so a left-incident packet
reflects into the negative half of the grid and a right-incident one
transmits into it.  Scattering tables at negative k come from the parity
rules of :class:`~tunnelchannels.potential.ScatterCoeffs`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .packets import Role, Side, SpectralPacket, average, gaussian_packet, k_moment, norm, x_mean
from .potential import ScatterCoeffs

__all__ = [
    "ChannelDecomposition",
    "DecompositionError",
    "GridMismatchError",
    "ReverseMotion",
    "SMatrix",
    "Scenario",
    "assemble_smatrix",
    "decompose",
    "in_asymptotes",
    "incident_asymptote",
    "make_scenario",
    "out_asymptotes",
    "reverse_motion",
    "scatter_packet",
    "sum_rules",
]

DECOMPOSITION_TOL = 1e-8
# l0 must not exceed this fraction of the source-barrier distance
MAX_WIDTH_RATIO = 0.1
# ... and a warning is issued above this fraction
WARN_WIDTH_RATIO = 0.05


class DecompositionError(RuntimeError):
    pass


class GridMismatchError(ValueError):
    pass


def _unitarity_residual(m: np.ndarray) -> float:
    """max |M^dagger M - I| over a stack of 2x2 matrices."""
    prod = np.conj(np.swapaxes(m, -1, -2)) @ m
    return float(np.abs(prod - np.eye(2)).max())


@dataclass(frozen=True, eq=False)
class SMatrix:
    kgrid: np.ndarray
    S11: np.ndarray
    S12: np.ndarray
    S21: np.ndarray
    S22: np.ndarray

    def matrix(self) -> np.ndarray:
        """Stack of shape (n, 2, 2)."""
        return np.stack([np.stack([self.S11, self.S12], -1), np.stack([self.S21, self.S22], -1)], -2)

    def unitarity_residual(self) -> float:
        return _unitarity_residual(self.matrix())


def assemble_smatrix(coeffs: ScatterCoeffs) -> SMatrix:
    k = coeffs.kgrid
    bar = coeffs.barrier
    J, F = coeffs.J, coeffs.F
    diag = coeffs.sqrtT * np.exp(1j * (J - k * bar.d))
    S12 = coeffs.sqrtR * np.exp(1j * (J + F - 0.5 * math.pi - 2 * k * bar.b))
    S21 = coeffs.sqrtR * np.exp(1j * (J - F - 0.5 * math.pi + 2 * k * bar.a))
    return SMatrix(k, diag, S12, S21, diag.copy())


@dataclass(frozen=True, eq=False)
class ChannelDecomposition:
    """S = S_tr P_tr + S_ref P_ref with unitary channel matrices.

    Matrix fields are stacks of shape (n, 2, 2); ``P_tr`` and ``P_ref`` hold
    the scalars sqrt T and sqrt R multiplying the identity.
    """

    kgrid: np.ndarray
    S_tr: np.ndarray
    S_ref: np.ndarray
    P_tr: np.ndarray
    P_ref: np.ndarray
    S0_tr: np.ndarray
    S0_ref: np.ndarray
    Delta_tr: np.ndarray
    Delta_ref: np.ndarray
    residual: float

    @property
    def Pi_tr(self) -> np.ndarray:
        return self.S_tr * self.P_tr[:, None, None]

    @property
    def Pi_ref(self) -> np.ndarray:
        return self.S_ref * self.P_ref[:, None, None]


def decompose(smatrix: SMatrix, coeffs: ScatterCoeffs) -> ChannelDecomposition:
    k = coeffs.kgrid
    if not np.array_equal(k, smatrix.kgrid):
        raise GridMismatchError("S-matrix and coefficient tables use different grids")
    bar = coeffs.barrier
    n = k.size
    eye = np.broadcast_to(np.eye(2, dtype=complex), (n, 2, 2))
    phase = np.exp(1j * (k * bar.d))
    base = np.exp(1j * coeffs.J) / phase

    S0_tr = eye.copy()
    S0_ref = np.zeros((n, 2, 2), dtype=complex)
    S0_ref[:, 0, 1] = -np.exp(-1j * k * bar.s)
    S0_ref[:, 1, 0] = -np.exp(1j * k * bar.s)

    Delta_tr = eye * base[:, None, None]
    Delta_ref = np.zeros((n, 2, 2), dtype=complex)
    common = base * 1j  # exp(i(J + pi/2 - kd))
    Delta_ref[:, 0, 0] = np.exp(1j * coeffs.F) * common
    Delta_ref[:, 1, 1] = np.exp(-1j * coeffs.F) * common

    S_tr = Delta_tr @ S0_tr
    S_ref = Delta_ref @ S0_ref
    P_tr = coeffs.sqrtT
    P_ref = coeffs.sqrtR
    total = S_tr * P_tr[:, None, None] + S_ref * P_ref[:, None, None]
    residual = float(np.abs(total - smatrix.matrix()).max())
    if residual > DECOMPOSITION_TOL:
        raise DecompositionError(f"Pi_tr + Pi_ref differs from S by {residual:.3g}")
    return ChannelDecomposition(k, S_tr, S_ref, P_tr, P_ref, S0_tr, S0_ref, Delta_tr, Delta_ref, residual)


# ---------------------------------------------------------------------------
# scenarios and asymptotes


@dataclass(frozen=True, eq=False)
class Scenario:
    """One incident Gaussian packet, sent from the left or from the right.

    ``packet`` is the amplitude A(k) of the packet centred at x = 0 and moving
    right; the left-side source emits it as is, the right-side source emits
    its mirror image centred at ``x_r``.
    """

    side: Side
    k0: float
    l0: float
    packet: SpectralPacket
    x_r: float | None = None

    @property
    def amplitude(self) -> SpectralPacket:
        """A^(+)_in(k) for the left side, A^(-)_in(k) = A(k) exp(i k x_r) for the right."""
        if self.side is Side.LEFT:
            return self.packet
        k = self.packet.kgrid
        return replace(
            self.packet,
            amp=self.packet.amp * np.exp(1j * k * self.x_r),
            side=Side.RIGHT,
            phase_slope=self.packet.phase_slope + self.x_r,
        )

    def with_side(self, side: Side, x_r: float | None = None) -> "Scenario":
        if side is Side.RIGHT:
            x_r = self.x_r if x_r is None else x_r
            if x_r is None:
                raise ValueError("right-side scenario needs x_r")
        return replace(self, side=side, x_r=x_r)


def _check_width(l0: float, distance: float, label: str):
    if not l0 <= MAX_WIDTH_RATIO * distance:
        raise ValueError(f"l0={l0} is too wide for {label}={distance}: need l0 <= {MAX_WIDTH_RATIO} * {label}")
    if l0 > WARN_WIDTH_RATIO * distance:
        warnings.warn(f"l0={l0} is only {distance / l0:.3g} times smaller than {label}={distance}", stacklevel=3)


def make_scenario(side, k0: float, l0: float, coeffs: ScatterCoeffs, x_r: float | None = None) -> Scenario:
    """Gaussian scenario on the symmetric grid of ``coeffs``."""
    side = Side(side)
    bar = coeffs.barrier
    _check_width(l0, bar.a, "a")
    if side is Side.RIGHT:
        if x_r is None:
            raise ValueError("right-side scenario needs x_r")
        _check_width(l0, x_r - bar.b, "x_r - b")
    packet = gaussian_packet(k0, l0, coeffs.full_kgrid, coeffs.units)
    return Scenario(side, float(k0), float(l0), packet, None if x_r is None else float(x_r))


class _Tables:
    """Scattering tables on the full grid."""

    def __init__(self, coeffs: ScatterCoeffs):
        self.k = coeffs.full_kgrid
        self.bar = coeffs.barrier
        for name in ("J", "F", "Jprime", "Fprime", "sqrtT", "sqrtR", "dsqrtT", "dsqrtR"):
            setattr(self, name, coeffs.full(name))


def _check_grid(scenario: Scenario, coeffs: ScatterCoeffs):
    if not np.array_equal(scenario.packet.kgrid, coeffs.full_kgrid):
        raise GridMismatchError("scenario packet is not on the symmetric grid of the coefficient tables")


def _source(scenario: Scenario):
    """(A, M, M', xi'_0) of the incident amplitude on the full grid."""
    amp = scenario.amplitude
    return amp.amp, amp.modulus, amp.dmod, amp.phase_slope


def _rev(x):
    return x[::-1]


def _make(scenario, role, amp, mod_factor, dmod, slope) -> SpectralPacket:
    base = scenario.packet
    return SpectralPacket(base.kgrid, amp, role, scenario.side, dmod, slope, base.units)


def incident_asymptote(scenario: Scenario) -> SpectralPacket:
    """Total in-asymptote f_in(k) at t = 0."""
    A, M, dM, slope = _source(scenario)
    if scenario.side is Side.LEFT:
        return _make(scenario, Role.IN_TOTAL, A, None, dM, slope)
    return _make(scenario, Role.IN_TOTAL, _rev(A), None, -_rev(dM), -_rev(slope))


def out_asymptotes(scenario: Scenario, coeffs: ScatterCoeffs) -> tuple[SpectralPacket, SpectralPacket]:
    """Transmitted and reflected out-asymptotes at t = 0."""
    _check_grid(scenario, coeffs)
    tb = _Tables(coeffs)
    k, bar = tb.k, tb.bar
    A, M, dM, slope = _source(scenario)
    if scenario.side is Side.LEFT:
        tr = _make(
            scenario, Role.OUT_TR,
            tb.sqrtT * A * np.exp(1j * (tb.J - k * bar.d)), None,
            tb.dsqrtT * M + tb.sqrtT * dM,
            slope + tb.Jprime - bar.d,
        )
        ref = _make(
            scenario, Role.OUT_REF,
            tb.sqrtR * _rev(A) * np.exp(-1j * (tb.J - tb.F - 0.5 * math.pi + 2 * k * bar.a)), None,
            tb.dsqrtR * _rev(M) - tb.sqrtR * _rev(dM),
            -_rev(slope) - tb.Jprime + tb.Fprime - 2 * bar.a,
        )
    else:
        tr = _make(
            scenario, Role.OUT_TR,
            tb.sqrtT * _rev(A) * np.exp(-1j * (tb.J - k * bar.d)), None,
            tb.dsqrtT * _rev(M) - tb.sqrtT * _rev(dM),
            -_rev(slope) - tb.Jprime + bar.d,
        )
        ref = _make(
            scenario, Role.OUT_REF,
            tb.sqrtR * A * np.exp(1j * (tb.J + tb.F - 0.5 * math.pi - 2 * k * bar.b)), None,
            tb.dsqrtR * M + tb.sqrtR * dM,
            slope + tb.Jprime + tb.Fprime - 2 * bar.b,
        )
    return tr, ref


def in_asymptotes(scenario: Scenario, coeffs: ScatterCoeffs) -> tuple[SpectralPacket, SpectralPacket]:
    """In-asymptotes of the to-be-transmitted and to-be-reflected subensembles.

    Closed forms of S_tr^-1 and S_ref^-1 applied to the channel out-asymptotes:
    sqrt(T) and sqrt(R) times the total in-asymptote.
    """
    _check_grid(scenario, coeffs)
    tb = _Tables(coeffs)
    f_in = incident_asymptote(scenario)
    A, M, dM, slope = f_in.amp, f_in.modulus, f_in.dmod, f_in.phase_slope
    tr = _make(scenario, Role.IN_TR, tb.sqrtT * A, None, tb.dsqrtT * M + tb.sqrtT * dM, slope)
    ref = _make(scenario, Role.IN_REF, tb.sqrtR * A, None, tb.dsqrtR * M + tb.sqrtR * dM, slope)
    return tr, ref


def sum_rules(scenario: Scenario, coeffs: ScatterCoeffs, orders=(1, 2, 3), times=(0.0, -10.0)) -> dict[str, float]:
    """Absolute residuals of the probabilistic and moment identities.

    Keys name the identity: ``norm_out`` for T+R = 1 over the out-asymptotes,
    ``norm_in`` for the in-asymptote norms, ``k{n}_in`` / ``k{n}_out`` for the
    n-th moment split over in / out channels, ``Tk{n}`` / ``Rk{n}`` for the
    weighted channel moments, ``x_in(t)`` for the position split,
    ``norm_tr`` / ``norm_ref`` for equal subensemble sizes, and
    ``k_tr`` / ``k_ref`` for average momentum conservation per channel.
    """
    f_in = incident_asymptote(scenario)
    out_tr, out_ref = out_asymptotes(scenario, coeffs)
    in_tr, in_ref = in_asymptotes(scenario, coeffs)
    k = f_in.kgrid
    T_bar = average(f_in, coeffs.full("T"))
    R_bar = average(f_in, coeffs.full("R"))
    N_tr, N_ref = norm(in_tr), norm(in_ref)
    res = {
        "norm_out": abs(norm(out_tr) + norm(out_ref) - norm(f_in)),
        "norm_in": abs(N_tr + N_ref - norm(f_in)),
        "norm_tr": max(abs(N_tr - norm(out_tr)), abs(norm(out_tr) - T_bar)),
        "norm_ref": max(abs(N_ref - norm(out_ref)), abs(norm(out_ref) - R_bar)),
        "k_tr": abs(k_moment(in_tr, 1) - k_moment(out_tr, 1)),
        "k_ref": abs(k_moment(in_ref, 1) + k_moment(out_ref, 1)),
    }
    for n in orders:
        kn = k_moment(f_in, n)
        res[f"k{n}_in"] = abs(kn - N_tr * k_moment(in_tr, n) - N_ref * k_moment(in_ref, n))
        res[f"k{n}_out"] = abs(kn - T_bar * k_moment(out_tr, n) - R_bar * average(out_ref, (-k) ** n))
        res[f"Tk{n}"] = abs(average(f_in, coeffs.full("T") * k**n) - T_bar * k_moment(out_tr, n))
        res[f"Rk{n}"] = abs(average(f_in, coeffs.full("R") * k**n) - (-1) ** n * R_bar * k_moment(out_ref, n))
    for t in times:
        res[f"x_in({t:g})"] = abs(x_mean(f_in, t) - N_tr * x_mean(in_tr, t) - N_ref * x_mean(in_ref, t))
    return res


# ---------------------------------------------------------------------------
# generic scattering of a two-sided amplitude


def _halves(f: np.ndarray):
    """Split a full-grid amplitude into (f(k), f(-k)) for k > 0."""
    n = f.size // 2
    return f[n:], f[:n][::-1]


def _join(pos: np.ndarray, neg: np.ndarray) -> np.ndarray:
    return np.concatenate([neg[::-1], pos])


def scatter_packet(f_in: np.ndarray, smatrix: SMatrix) -> np.ndarray:
    """Out-asymptote of an arbitrary in-asymptote given on the full grid.

    Right-moving components (k > 0) are A_in^+ and left-moving ones A_in^-;
    the result is assembled the same way from A_out^+ and A_out^-.
    """
    a_plus, a_minus = _halves(np.asarray(f_in))
    out_plus = smatrix.S11 * a_plus + smatrix.S12 * a_minus
    out_minus = smatrix.S21 * a_plus + smatrix.S22 * a_minus
    return _join(out_plus, out_minus)


class ReverseMotion(NamedTuple):
    g1: SpectralPacket
    g2: SpectralPacket
    combined: SpectralPacket
    cross: complex


def reverse_motion(out_tr: SpectralPacket, out_ref: SpectralPacket, coeffs: ScatterCoeffs, t: float = 0.0) -> ReverseMotion:
    """Out-asymptote data of the time-reversed transmitted and reflected packets.

    Works from the left-side channel out-asymptotes alone: the incident
    amplitude enters only through sqrt(T) A(k) and sqrt(R) A(-k), recovered
    from the out-packets by removing their scattering phases.  ``g1`` and
    ``g2`` are returned at time t; ``combined`` is [g1(-k, t) + g2(-k, t)]*,
    which must equal [f_in(-k, t)]*.  ``cross`` is <g1|g2>.
    """
    if out_tr.side is not Side.LEFT or out_ref.side is not Side.LEFT:
        raise ValueError("reverse motion is defined for left-side out-asymptotes")
    if not np.array_equal(out_tr.kgrid, coeffs.full_kgrid):
        raise GridMismatchError("out-asymptotes are not on the symmetric grid of the coefficient tables")
    tb = _Tables(coeffs)
    k, bar = tb.k, tb.bar
    v = out_tr.amp * np.exp(-1j * (tb.J - k * bar.d))  # sqrt(T) A(k)
    u = out_ref.amp * np.exp(1j * (tb.J - tb.F - 0.5 * math.pi + 2 * k * bar.a))  # sqrt(R) A(-k)
    theta = 0.5 * math.pi + _rev(tb.F) + k * bar.s  # pi/2 + F(-k) + ks
    turn = np.exp(-1j * theta)
    evolve = np.exp(-1j * out_tr.units.energy(k) * t / out_tr.units.hbar)
    g1 = (tb.sqrtT * v - tb.sqrtT * u * turn) * evolve
    g2 = (tb.sqrtR * _rev(u) + tb.sqrtR * _rev(v) * turn) * evolve
    combined = np.conj(_rev(g1 + g2))
    cross = complex(np.trapezoid(np.conj(g1) * g2, k))

    def packet(amp, role):
        return SpectralPacket(out_tr.kgrid, amp, role, Side.LEFT, None, None, out_tr.units)

    return ReverseMotion(packet(g1, Role.REVERSE_G1), packet(g2, Role.REVERSE_G2), packet(combined, Role.REVERSE_COMBINED), cross)
