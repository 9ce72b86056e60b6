"""Characteristic times of a scattering scenario.

All quantities are built from the channel moments of :mod:`.packets`:
arrival-time differences of the standard wave-packet analysis, channel
delay times, the start/end instants of the scattering event and the
narrow-packet scattering length.

Start and end instants solve a quadratic in tau = hbar t / m of the form

    (tau k - bbar)^2 = sigma - 2 tau chi + tau^2 dk2,

i.e. the instant at which a packet's centre sits one standard deviation
from the nearest barrier edge.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .channels import Scenario, incident_asymptote, out_asymptotes
from .packets import EMPTY_NORM, ChannelEmptyError, Side, SpectralPacket, average, moments, norm
from .potential import ScatterCoeffs

__all__ = [
    "DelayTimes",
    "GeometryError",
    "ScatteringLength",
    "ScatteringTime",
    "TimeReport",
    "UnsupportedSideError",
    "delay_times",
    "end_root",
    "scattering_length",
    "scattering_time",
    "start_root",
    "swpa_times",
    "time_report",
]

# Geometry margins for the arrival-time differences, in units of l0.
MIN_MARGIN = 5.0
WARN_MARGIN = 10.0
# Relative spectral spread <(dk)^2> / k0^2 above which the narrow-packet
# scattering length is flagged as unreliable.
NARROW_THRESHOLD = 1e-2


class GeometryError(ValueError):
    pass


class UnsupportedSideError(ValueError):
    pass


@dataclass
class TimeReport:
    swpa_tr: float | None = None
    swpa_ref: float | None = None
    L1: float | None = None
    L2: float | None = None
    delay_tr: float | None = None
    delay_ref_minus: float | None = None
    delay_ref_plus: float | None = None
    spatial_delay_tr: float | None = None
    spatial_delay_ref: float | None = None
    t_start: float | None = None
    t_end_tr: float | None = None
    t_end_ref: float | None = None
    t_end: float | None = None
    tau_scatt: float | None = None
    completed: tuple[bool, bool, bool] | None = None
    scat_length_tr: float | None = None
    scat_length_ref: float | None = None

    def as_dict(self) -> dict:
        out = asdict(self)
        if self.completed is not None:
            out["completed"] = list(self.completed)
        return out


# ---------------------------------------------------------------------------
# helpers


def _is_empty(p: SpectralPacket) -> bool:
    return norm(p) < EMPTY_NORM


def _empty(label: str, strict: bool):
    if strict:
        raise ChannelEmptyError(f"{label} channel is empty")
    warnings.warn(f"{label} channel is empty; its delay is reported as zero", stacklevel=3)


def _check_coeffs(scenario: Scenario, coeffs: ScatterCoeffs):
    if not np.array_equal(scenario.packet.kgrid, coeffs.full_kgrid):
        raise ValueError("scenario was built on a different k-grid than the coefficient tables")


def _mirror(scenario: Scenario, coeffs: ScatterCoeffs) -> Scenario:
    """The same packet sent from the other side, mirrored about the barrier midpoint."""
    if scenario.side is Side.LEFT:
        return scenario.with_side(Side.RIGHT, x_r=coeffs.barrier.s)
    return scenario.with_side(Side.LEFT)


def _ref_sign(side: Side) -> float:
    """Sign of F' in the reflected-channel averages: - for left incidence, + for right."""
    return -1.0 if side is Side.LEFT else 1.0


def _quadratic(k: float, bbar: float, sigma: float, chi: float, dk2: float):
    """Coefficients (alpha, beta, c, disc) of alpha tau^2 - 2 beta tau + c = 0."""
    alpha = k * k - dk2
    beta = bbar * k - chi
    c = bbar * bbar - sigma
    disc = sigma * k * k + chi * chi - 2.0 * k * bbar * chi + (bbar * bbar - sigma) * dk2
    return alpha, beta, c, disc


def start_root(k: float, bbar: float, sigma: float, chi: float, dk2: float) -> float | None:
    """Smallest root tau, in the rationalized form c / (beta + sqrt(disc)).

    The rationalized form stays finite as k^2 -> dk2.  Returns None when the
    roots are complex.
    """
    alpha, beta, c, disc = _quadratic(k, bbar, sigma, chi, dk2)
    if disc < 0:
        return None
    den = beta + math.sqrt(disc)
    if den == 0:
        return None
    return c / den


def end_root(k: float, bbar: float, sigma: float, chi: float, dk2: float) -> float | None:
    """Biggest root tau = (beta + sqrt(disc)) / alpha; None if complex or alpha = 0."""
    alpha, beta, c, disc = _quadratic(k, bbar, sigma, chi, dk2)
    if disc < 0 or alpha == 0:
        return None
    return (beta + math.sqrt(disc)) / alpha


# ---------------------------------------------------------------------------
# standard wave-packet analysis


def _check_margin(value: float, name: str, l0: float):
    if value < MIN_MARGIN * l0:
        raise GeometryError(f"{name}={value:.6g} must be at least {MIN_MARGIN:g} l0 = {MIN_MARGIN * l0:.6g}")
    if value < WARN_MARGIN * l0:
        warnings.warn(f"{name}={value:.6g} is below {WARN_MARGIN:g} l0; asymptotic arrival times are rough", stacklevel=3)


def swpa_times(scenario: Scenario, coeffs: ScatterCoeffs, L1: float, L2: float, strict: bool = False):
    """Arrival-time differences (dt_tr, dt_ref) of the standard analysis.

    dt_tr is the time between the incident centre passing a - L1 and the
    transmitted centre passing b + L2; dt_ref the time between the incident
    centre and the reflected centre passing a - L1.  Left incidence only.
    An empty channel yields None for its entry (or raises when ``strict``).
    """
    if scenario.side is not Side.LEFT:
        raise UnsupportedSideError("arrival-time differences are defined for left incidence only")
    _check_coeffs(scenario, coeffs)
    bar = coeffs.barrier
    l0, k0 = scenario.l0, scenario.k0
    _check_margin(L1, "L1", l0)
    _check_margin(bar.a - L1, "a - L1", l0)
    _check_margin(L2, "L2", l0)
    m_over_hbar = 1.0 / coeffs.units.hbar_over_m
    Jp, Fp = coeffs.full("Jprime"), coeffs.full("Fprime")
    tr, ref = out_asymptotes(scenario, coeffs)

    def arrival(p, phase, offset, direction):
        if _is_empty(p):
            if strict:
                raise ChannelEmptyError(f"{p.role.value} channel is empty")
            return None
        kn = direction * average(p, p.kgrid)
        return m_over_hbar * ((average(p, phase) + offset) / kn + L1 / k0 + bar.a * (1.0 / kn - 1.0 / k0))

    return arrival(tr, Jp, L2, 1.0), arrival(ref, Jp - Fp, L1, -1.0)


# ---------------------------------------------------------------------------
# delay times


@dataclass(frozen=True)
class DelayTimes:
    tau_tr: float
    tau_ref_minus: float
    tau_ref_plus: float
    spatial_tr: float
    spatial_ref: float


def _channel_delay(p: SpectralPacket, phase, d: float, direction: float, hbar_over_m: float, label: str, strict: bool):
    """(temporal, spatial) delay of one channel packet."""
    if _is_empty(p):
        _empty(label, strict)
        return 0.0, 0.0
    spatial = average(p, phase) - d
    kn = direction * average(p, p.kgrid)
    return spatial / (hbar_over_m * kn), spatial


def delay_times(scenario: Scenario, coeffs: ScatterCoeffs, strict: bool = False) -> DelayTimes:
    """Channel delay times relative to free motion and to an ideal wall.

    tau_ref_minus belongs to left incidence and tau_ref_plus to right
    incidence; the packet mirrored about the barrier midpoint supplies the
    side not described by ``scenario``.  ``spatial_ref`` is the spatial delay
    of the scenario's own side.  Empty channels give zero delays with a
    warning unless ``strict``.
    """
    _check_coeffs(scenario, coeffs)
    d = coeffs.barrier.d
    hm = coeffs.units.hbar_over_m
    Jp, Fp = coeffs.full("Jprime"), coeffs.full("Fprime")
    by_side = {scenario.side: scenario, scenario.side.other: _mirror(scenario, coeffs)}

    tr, _ = out_asymptotes(scenario, coeffs)
    tr_dir = 1.0 if scenario.side is Side.LEFT else -1.0
    tau_tr, spatial_tr = _channel_delay(tr, Jp, d, tr_dir, hm, "transmission", strict)

    ref_delays = {}
    for side, sc in by_side.items():
        _, ref = out_asymptotes(sc, coeffs)
        sign = _ref_sign(side)
        ref_dir = -1.0 if side is Side.LEFT else 1.0
        ref_delays[side] = _channel_delay(ref, Jp + sign * Fp, d, ref_dir, hm, "reflection", strict)

    return DelayTimes(
        tau_tr=tau_tr,
        tau_ref_minus=ref_delays[Side.LEFT][0],
        tau_ref_plus=ref_delays[Side.RIGHT][0],
        spatial_tr=spatial_tr,
        spatial_ref=ref_delays[scenario.side][1],
    )


# ---------------------------------------------------------------------------
# start and end of the scattering event


@dataclass(frozen=True)
class ScatteringTime:
    t_start: float | None
    t_end_tr: float | None
    t_end_ref: float | None
    t_end: float | None
    tau_scatt: float | None
    completed: tuple[bool, bool, bool]


def _channel_end(p: SpectralPacket, bbar_of, units) -> tuple[float | None, bool]:
    """End instant of one channel and its completed-scattering flag.

    An unpopulated channel never ends and never overlaps the other; it gives
    (None, True).
    """
    if _is_empty(p):
        return None, True
    ms = moments(p)
    kn = abs(ms.k_mean)
    flag = kn > math.sqrt(ms.dk2)
    tau = end_root(kn, bbar_of(ms), ms.sigma, ms.chi, ms.dk2)
    if tau is None:
        return None, False
    return tau / units.hbar_over_m, flag


def scattering_time(scenario: Scenario, coeffs: ScatterCoeffs) -> ScatteringTime:
    """Start, end and duration of the scattering event for left incidence.

    Right incidence raises :class:`UnsupportedSideError`.  Incomplete
    scattering is reported through the flags, never raised.
    """
    if scenario.side is not Side.LEFT:
        raise UnsupportedSideError("start/end instants are defined for left incidence only")
    _check_coeffs(scenario, coeffs)
    bar, units = coeffs.barrier, coeffs.units

    inc = moments(incident_asymptote(scenario))
    flag_in = scenario.k0 > math.sqrt(inc.dk2)
    tau0 = start_root(inc.k_mean, bar.a - inc.x0, inc.sigma, inc.chi, inc.dk2)
    t_start = None if tau0 is None else tau0 / units.hbar_over_m

    tr, ref = out_asymptotes(scenario, coeffs)
    # bbar: distance the centre would have to travel back to the exit edge at t = 0
    t_tr, flag_tr = _channel_end(tr, lambda ms: bar.b - ms.x0, units)
    t_ref, flag_ref = _channel_end(ref, lambda ms: ms.x0 - bar.a, units)

    ends = [t for t in (t_tr, t_ref) if t is not None]
    t_end = max(ends) if ends else None
    tau = None if t_end is None or t_start is None else t_end - t_start
    return ScatteringTime(t_start, t_tr, t_ref, t_end, tau, (flag_in, flag_tr, flag_ref))


# ---------------------------------------------------------------------------
# narrow-packet limit


@dataclass(frozen=True)
class ScatteringLength:
    l_tr: float | None
    l_ref: float | None
    tau_scatt: float


def scattering_length(scenario: Scenario, coeffs: ScatterCoeffs) -> ScatteringLength:
    """Scattering lengths of both channels and the narrow-packet scattering time.

    l = l0 + (mean exit-phase slope) + sqrt(sigma); the reflected channel uses
    J' - F' for left incidence and J' + F' for right incidence.
    """
    _check_coeffs(scenario, coeffs)
    k0, l0 = scenario.k0, scenario.l0
    inc = moments(incident_asymptote(scenario))
    if inc.dk2 > NARROW_THRESHOLD * k0 * k0:
        warnings.warn(
            f"spectral spread <(dk)^2>/k0^2 = {inc.dk2 / k0**2:.3g} exceeds {NARROW_THRESHOLD:g}; "
            "narrow-packet scattering length is unreliable",
            stacklevel=2,
        )
    Jp, Fp = coeffs.full("Jprime"), coeffs.full("Fprime")
    tr, ref = out_asymptotes(scenario, coeffs)

    def length(p, phase):
        if _is_empty(p):
            return None
        sigma = moments(p).sigma
        if sigma < 0:
            raise ArithmeticError(f"negative position spread sigma={sigma:.3g} for {p.role.value}")
        return l0 + average(p, phase) + math.sqrt(sigma)

    l_tr = length(tr, Jp)
    l_ref = length(ref, Jp + _ref_sign(scenario.side) * Fp)
    longest = max(v for v in (l_tr, l_ref) if v is not None)
    return ScatteringLength(l_tr, l_ref, longest / (coeffs.units.hbar_over_m * k0))


# ---------------------------------------------------------------------------


def time_report(
    scenario: Scenario,
    coeffs: ScatterCoeffs,
    L1: float | None = None,
    L2: float | None = None,
    narrow: bool = False,
    strict: bool = False,
) -> TimeReport:
    """Every time of one scenario.

    Quantities defined only for left incidence stay None for right incidence,
    and the arrival-time differences are skipped unless L1 and L2 are given.
    """
    rep = TimeReport(L1=L1, L2=L2)
    if scenario.side is Side.LEFT:
        if L1 is not None and L2 is not None:
            rep.swpa_tr, rep.swpa_ref = swpa_times(scenario, coeffs, L1, L2, strict=strict)
        st = scattering_time(scenario, coeffs)
        rep.t_start, rep.t_end_tr, rep.t_end_ref = st.t_start, st.t_end_tr, st.t_end_ref
        rep.t_end, rep.tau_scatt, rep.completed = st.t_end, st.tau_scatt, st.completed
    dl = delay_times(scenario, coeffs, strict=strict)
    rep.delay_tr, rep.delay_ref_minus, rep.delay_ref_plus = dl.tau_tr, dl.tau_ref_minus, dl.tau_ref_plus
    rep.spatial_delay_tr, rep.spatial_delay_ref = dl.spatial_tr, dl.spatial_ref
    if narrow:
        sl = scattering_length(scenario, coeffs)
        rep.scat_length_tr, rep.scat_length_ref = sl.l_tr, sl.l_ref
    return rep
