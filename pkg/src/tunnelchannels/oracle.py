"""Brute-force time-dependent reference: split-step Fourier propagation.

The initial Gaussian is evolved on a periodic uniform grid with symmetric
(Strang) splitting

    psi <- exp(-i V dt / 2 hbar) F^-1 exp(-i hbar k^2 dt / 2m) F exp(-i V dt / 2 hbar) psi

and the probability, centre of mass and spread in the regions x < a,
a <= x <= b and x > b are recorded along the way.  The domain is sized so
that nothing reaches the periodic boundary; no absorbing layer is used, so
every step is exactly unitary.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.fft

from .channels import Scenario, make_scenario, out_asymptotes
from .packets import EMPTY_NORM, Side, moments, norm
from .potential import Barrier, scatter_coeffs
from .timing import end_root
from .units import DEFAULT_UNITS, Units

__all__ = [
    "Domain",
    "DomainError",
    "GridState",
    "StepSizeError",
    "Trajectory",
    "WorkLimitError",
    "ValidationReport",
    "asymptote_overlap",
    "auto_domain",
    "default_dt",
    "fit_line",
    "initial_state",
    "momentum_amplitude",
    "propagate",
    "separation_time",
    "validate",
]

NORM_DRIFT_TOL = 1e-6
EDGE_LEAK_TOL = 1e-8
EDGE_WARN = 1e-10
# Fraction of the domain at each end watched for leakage.
EDGE_FRACTION = 0.05
# Largest phase hbar^-1 (E_hi + max|V|) dt per step for the packet's fastest
# significant component (k0 + 6 spectral widths).
MAX_STEP_PHASE = 0.5
# Default dt keeps the phase per step of the highest grid mode below this;
# tuned so the splitting error stays below the grid error.
NYQUIST_PHASE = 2.5
# Default grid: at least this many points per shortest segment and per
# shortest wavelength of the packet.
POINTS_PER_SEGMENT = 16
POINTS_PER_WAVELENGTH = 8
# Gaussian tail margin, in standard deviations.
TAIL = 8.0
# Distance in standard deviations between a channel packet and the barrier
# after which its centre of mass is taken to move freely.
SEPARATION = 6.0
# Refuse runs above this many grid-point updates (about 4e9 per 100 s on one core).
MAX_WORK = 4e9


class StepSizeError(RuntimeError):
    pass


class WorkLimitError(ValueError):
    """The requested run would take more grid updates than MAX_WORK."""


class DomainError(RuntimeError):
    pass


@dataclass(frozen=True)
class Domain:
    """Cell-centred periodic grid x_j = x_lo + (j + 1/2) dx."""

    x_lo: float
    dx: float
    nx: int
    snap_error: float = 0.0

    @property
    def x(self) -> np.ndarray:
        return self.x_lo + (np.arange(self.nx) + 0.5) * self.dx

    @property
    def x_hi(self) -> float:
        return self.x_lo + self.nx * self.dx

    @property
    def k(self) -> np.ndarray:
        """FFT wavenumbers in numpy ordering."""
        return 2.0 * math.pi * np.fft.fftfreq(self.nx, self.dx)


@dataclass
class GridState:
    x: np.ndarray
    psi: np.ndarray
    t: float

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    def norm(self) -> float:
        return float(np.sum(np.abs(self.psi) ** 2) * self.dx)


@dataclass
class Trajectory:
    t: np.ndarray
    norm_left: np.ndarray
    norm_barrier: np.ndarray
    norm_right: np.ndarray
    cm_left: np.ndarray
    cm_right: np.ndarray
    var_left: np.ndarray
    var_right: np.ndarray
    edge: np.ndarray
    norm_drift: float
    domain: Domain
    dt: float
    final: GridState
    extra: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# set-up


def _spectral_width(l0: float) -> float:
    return 1.0 / (2.0 * l0)


def _k_hi(scenario: Scenario) -> float:
    return scenario.k0 + 6.0 * _spectral_width(scenario.l0)


def _source(scenario: Scenario) -> float:
    return 0.0 if scenario.side is Side.LEFT else scenario.x_r


def auto_domain(barrier: Barrier, scenario: Scenario, t_final: float, dx: float | None = None, units: Units = DEFAULT_UNITS) -> Domain:
    """Grid wide enough to hold every channel packet up to ``t_final``.

    Free centres move at hbar k0 / m; reflected ones are mirrored about the
    entry edge.  Each is padded by TAIL standard deviations of the freely
    spread packet plus the barrier width.  The left edge of the barrier is
    placed on a cell boundary.
    """
    l0, k0 = scenario.l0, scenario.k0
    if dx is None:
        dx = min(
            min(w for w, _ in barrier.segments) / POINTS_PER_SEGMENT,
            2.0 * math.pi / (POINTS_PER_WAVELENGTH * _k_hi(scenario)),
        )
    hm = units.hbar_over_m
    spread = math.hypot(l0, hm * t_final * _spectral_width(l0))
    pad = TAIL * spread + barrier.d
    x0 = _source(scenario)
    travel = hm * k0 * t_final
    if scenario.side is Side.LEFT:
        ahead, mirrored = x0 + travel, 2.0 * barrier.a - (x0 + travel)
        lo = min(x0 - TAIL * l0, mirrored - pad)
        hi = max(x0 + TAIL * l0, ahead + pad, barrier.b + pad)
    else:
        ahead, mirrored = x0 - travel, 2.0 * barrier.b - (x0 - travel)
        lo = min(x0 - TAIL * l0, ahead - pad, barrier.a - pad)
        hi = max(x0 + TAIL * l0, mirrored + pad)
    cells_left = math.ceil((barrier.a - lo) / dx)
    x_lo = barrier.a - cells_left * dx
    nx = scipy.fft.next_fast_len(math.ceil((hi - x_lo) / dx))
    edges = barrier.edges
    offsets = (edges - x_lo) / dx
    snap = float(np.max(np.abs(offsets - np.round(offsets)))) * dx
    return Domain(x_lo, dx, nx, snap)


def default_dt(barrier: Barrier, domain: Domain, units: Units = DEFAULT_UNITS) -> float:
    k_nyq = math.pi / domain.dx
    e_max = units.energy(k_nyq) + float(np.max(np.abs(barrier.heights)))
    return NYQUIST_PHASE * units.hbar / e_max


def initial_state(scenario: Scenario, domain: Domain) -> GridState:
    """psi(x, 0) whose spectral amplitude is the scenario's incident packet."""
    l0, k0 = scenario.l0, scenario.k0
    x = domain.x
    if scenario.side is Side.LEFT:
        u = x
    else:
        u = scenario.x_r - x
    psi = (2.0 * math.pi * l0 * l0) ** -0.25 * np.exp(1j * k0 * u - u * u / (4.0 * l0 * l0))
    return GridState(x, psi, 0.0)


# ---------------------------------------------------------------------------
# propagation


def _region_stats(prob, x, mask):
    w = prob[mask]
    total = float(w.sum())
    if total <= 0:
        return total, math.nan, math.nan
    xs = x[mask]
    cm = float(np.dot(w, xs) / total)
    var = float(np.dot(w, (xs - cm) ** 2) / total)
    return total, cm, var


def propagate(
    barrier: Barrier,
    scenario: Scenario,
    t_final: float,
    dt: float | None = None,
    domain: Domain | None = None,
    n_records: int = 201,
    units: Units = DEFAULT_UNITS,
    windows: dict | None = None,
    max_work: float = MAX_WORK,
) -> Trajectory:
    """Evolve the scenario's initial packet to ``t_final``.

    ``windows`` maps names to (lo, hi) intervals whose occupation probability
    is recorded in ``Trajectory.extra``.  Raises StepSizeError for a step too
    coarse for the packet's energy range or a norm drift above
    NORM_DRIFT_TOL, and DomainError when probability reaches the periodic
    boundary.  WorkLimitError is raised up front when nx times the number
    of steps exceeds ``max_work``.
    """
    if not t_final > 0:
        raise ValueError(f"t_final must be positive, got {t_final}")
    if domain is None:
        domain = auto_domain(barrier, scenario, t_final, units=units)
    if dt is None:
        dt = default_dt(barrier, domain, units)
    v_max = float(np.max(np.abs(barrier.heights)))
    phase = dt * (units.energy(_k_hi(scenario)) + v_max) / units.hbar
    if phase > MAX_STEP_PHASE:
        raise StepSizeError(
            f"dt={dt:g} advances the fastest packet component by {phase:.3g} rad per step (limit {MAX_STEP_PHASE})"
        )
    n_steps = max(1, round(t_final / dt))
    dt = t_final / n_steps
    if n_steps * domain.nx > max_work:
        raise WorkLimitError(
            f"{n_steps} steps on {domain.nx} points exceed the work limit {max_work:.3g}; "
            "use a narrower momentum spread, a shorter t_final or a larger dt"
        )
    n_records = max(2, min(n_records, n_steps + 1))
    record_steps = np.unique(np.round(np.linspace(0, n_steps, n_records)).astype(int))

    state = initial_state(scenario, domain)
    x, dx = domain.x, domain.dx
    V = barrier(x)
    kick = np.exp(-0.5j * dt / units.hbar * V)
    kick_full = kick * kick
    drift = np.exp(-1j * dt / units.hbar * units.energy(domain.k))

    left = x < barrier.a
    right = x > barrier.b
    inside = ~(left | right)
    n_edge = max(1, int(EDGE_FRACTION * domain.nx))
    windows = windows or {}
    masks = {name: (x >= lo) & (x <= hi) for name, (lo, hi) in windows.items()}

    cols = {name: [] for name in ("t", "nl", "nb", "nr", "cl", "cr", "vl", "vr", "edge")}
    extra = {name: [] for name in masks}
    norm0 = state.norm()

    def record(psi, step):
        prob = np.abs(psi) ** 2 * dx
        nl, cl, vl = _region_stats(prob, x, left)
        nr, cr, vr = _region_stats(prob, x, right)
        for key, value in zip(("t", "nl", "nb", "nr", "cl", "cr", "vl", "vr"), (step * dt, nl, float(prob[inside].sum()), nr, cl, cr, vl, vr)):
            cols[key].append(value)
        cols["edge"].append(float(prob[:n_edge].sum() + prob[-n_edge:].sum()))
        for name, mask in masks.items():
            extra[name].append(float(prob[mask].sum()))

    # phi = kick * psi between steps, so consecutive half kicks merge
    phi = kick * state.psi
    step = 0
    for target in record_steps:
        while step < target:
            phi = scipy.fft.ifft(drift * scipy.fft.fft(phi, overwrite_x=True), overwrite_x=True)
            phi *= kick_full
            step += 1
        record(phi, step)  # |phi| = |psi|
    psi = phi / kick

    final = GridState(x, psi, n_steps * dt)
    drift_norm = abs(final.norm() - norm0)
    edge = np.array(cols["edge"])
    traj = Trajectory(
        t=np.array(cols["t"]),
        norm_left=np.array(cols["nl"]),
        norm_barrier=np.array(cols["nb"]),
        norm_right=np.array(cols["nr"]),
        cm_left=np.array(cols["cl"]),
        cm_right=np.array(cols["cr"]),
        var_left=np.array(cols["vl"]),
        var_right=np.array(cols["vr"]),
        edge=edge,
        norm_drift=drift_norm,
        domain=domain,
        dt=dt,
        final=final,
        extra={name: np.array(v) for name, v in extra.items()},
    )
    if drift_norm > NORM_DRIFT_TOL:
        raise StepSizeError(f"norm drifted by {drift_norm:.3g} over the run")
    if edge.max() > EDGE_LEAK_TOL:
        raise DomainError(f"probability {edge.max():.3g} reached the periodic boundary; enlarge the domain")
    if edge.max() > EDGE_WARN:
        warnings.warn(f"boundary occupancy {edge.max():.3g} exceeds {EDGE_WARN:g}", stacklevel=2)
    return traj


# ---------------------------------------------------------------------------
# analysis


def fit_line(t, y) -> tuple[float, float]:
    """Least-squares (slope, intercept)."""
    slope, intercept = np.polyfit(np.asarray(t), np.asarray(y), 1)
    return float(slope), float(intercept)


def momentum_amplitude(state: GridState, domain: Domain) -> tuple[np.ndarray, np.ndarray]:
    """(k, psi_hat(k)) on the FFT grid, sorted by k.

    psi_hat(k) = (2 pi)^-1/2 sum_j psi(x_j) exp(-i k x_j) dx, the discrete
    counterpart of the continuum transform used for the spectral packets.
    """
    k = domain.k
    x0 = domain.x[0]
    amp = domain.dx / math.sqrt(2.0 * math.pi) * np.exp(-1j * k * x0) * scipy.fft.fft(state.psi)
    order = np.argsort(k)
    return k[order], amp[order]


def _asymptote_on_grid(barrier, scenario, k_sorted, units):
    """Combined out-asymptote at t = 0 on the sorted FFT grid (zero at k = 0 and the unpaired Nyquist mode)."""
    kpos = k_sorted[k_sorted > 0]
    n = kpos.size
    coeffs = scatter_coeffs(barrier, kpos, units)
    sc = make_scenario(scenario.side, scenario.k0, scenario.l0, coeffs, scenario.x_r)
    tr, ref = out_asymptotes(sc, coeffs)
    out = np.zeros(k_sorted.size, dtype=complex)
    full = tr.amp + ref.amp
    # full grid is (-kpos[::-1], kpos); map onto the sorted FFT grid
    neg_idx = np.searchsorted(k_sorted, -kpos[::-1])
    pos_idx = np.searchsorted(k_sorted, kpos)
    out[neg_idx] = full[:n]
    out[pos_idx] = full[n:]
    return out, tr, ref


def asymptote_overlap(state: GridState, domain: Domain, barrier: Barrier, scenario: Scenario, units: Units = DEFAULT_UNITS) -> float:
    """|<psi_asym(t)|psi(t)>|^2 for the combined out-asymptote.

    Evaluated on the FFT grid, where by Parseval it equals the x-space
    overlap of the grid functions.
    """
    k, amp = momentum_amplitude(state, domain)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        asym, _, _ = _asymptote_on_grid(barrier, scenario, k, units)
    asym = asym * np.exp(-1j * units.energy(k) * state.t / units.hbar)
    dk = k[1] - k[0]
    inner = np.vdot(asym, amp) * dk
    na = np.vdot(asym, asym).real * dk
    npsi = np.vdot(amp, amp).real * dk
    return float(abs(inner) ** 2 / (na * npsi))


def separation_time(packet, edge: float, outward: float, units: Units = DEFAULT_UNITS, n_sigma: float = SEPARATION) -> float | None:
    """Instant after which the packet's centre is ``n_sigma`` spreads past ``edge``.

    ``outward`` is +1 for packets leaving to the right and -1 to the left.
    """
    ms = moments(packet)
    bbar = outward * (edge - ms.x0)
    s2 = n_sigma * n_sigma
    if ms.k_mean**2 <= s2 * ms.dk2:
        # the spread grows at least as fast as the centre moves
        return None
    tau = end_root(abs(ms.k_mean), bbar, s2 * ms.sigma, s2 * ms.chi, s2 * ms.dk2)
    return None if tau is None else tau / units.hbar_over_m


@dataclass
class ValidationReport:
    """Analytic predictions next to oracle measurements for one scenario."""

    t_final: float
    dt: float
    dx: float
    nx: int
    t_fit: float
    norm_drift: float
    T_bar: float
    norm_tr: float
    dev_norm_tr: float
    slope_tr: float | None = None
    slope_tr_oracle: float | None = None
    intercept_tr: float | None = None
    intercept_tr_oracle: float | None = None
    var_tr: float | None = None
    var_tr_oracle: float | None = None
    slope_ref: float | None = None
    slope_ref_oracle: float | None = None
    intercept_ref: float | None = None
    intercept_ref_oracle: float | None = None
    var_ref: float | None = None
    var_ref_oracle: float | None = None
    overlap: float = math.nan
    deviations: dict = field(default_factory=dict)
    passed: bool = False


def validate(
    barrier: Barrier,
    scenario: Scenario,
    t_final: float | None = None,
    dt: float | None = None,
    units: Units = DEFAULT_UNITS,
    tol: float = 1e-3,
    min_overlap: float = 0.999,
    n_records: int = 41,
) -> ValidationReport:
    """Run the oracle and compare it with the channel asymptotes.

    Centre-of-mass lines are fitted over the records after every populated
    channel sits SEPARATION spreads from the barrier; ``t_final`` defaults
    to that instant plus a quarter of it.  Intercepts are compared relative
    to max(|predicted|, dx), the grid's resolving length.
    """
    kgrid = _analytic_grid(scenario)
    coeffs = scatter_coeffs(barrier, kgrid, units)
    with warnings.catch_warnings():
        # the caller's scenario already reported its geometry
        warnings.simplefilter("ignore")
        sc = make_scenario(scenario.side, scenario.k0, scenario.l0, coeffs, scenario.x_r)
    tr, ref = out_asymptotes(sc, coeffs)
    if sc.side is Side.LEFT:
        tr_region, ref_region = "right", "left"
        tr_edge, tr_dir, ref_edge, ref_dir = barrier.b, 1.0, barrier.a, -1.0
    else:
        tr_region, ref_region = "left", "right"
        tr_edge, tr_dir, ref_edge, ref_dir = barrier.a, -1.0, barrier.b, 1.0

    channels = []
    for label, p, region, edge, outward in (("tr", tr, tr_region, tr_edge, tr_dir), ("ref", ref, ref_region, ref_edge, ref_dir)):
        if norm(p) >= EMPTY_NORM:
            channels.append((label, p, region, separation_time(p, edge, outward, units)))
    if any(c[3] is None for c in channels):
        raise ValueError(
            f"a channel packet never gets {SEPARATION:g} spreads clear of the barrier; "
            "its momentum spread is too large for its mean momentum"
        )
    t_sep = max(c[3] for c in channels)
    if t_final is None:
        t_final = 1.25 * t_sep
    if t_final <= t_sep:
        raise ValueError(f"t_final={t_final:g} ends before the channel packets separate (t={t_sep:.6g})")

    traj = propagate(barrier, scenario, t_final, dt, n_records=n_records, units=units)
    late = traj.t >= t_sep
    if np.count_nonzero(late) < 3:
        late = slice(-3, None)
    t_late = traj.t[late]

    T_bar = norm(tr)
    measured_tr = traj.norm_right[-1] if tr_region == "right" else traj.norm_left[-1]
    rep = ValidationReport(
        t_final=float(traj.t[-1]),
        dt=traj.dt,
        dx=traj.domain.dx,
        nx=traj.domain.nx,
        t_fit=float(t_late[0]),
        norm_drift=traj.norm_drift,
        T_bar=T_bar,
        norm_tr=float(measured_tr),
        dev_norm_tr=abs(float(measured_tr) - T_bar),
    )
    dev = {"norm_tr": rep.dev_norm_tr}
    scale = traj.domain.dx
    for label, p, region, _ in channels:
        ms = moments(p)
        cm = traj.cm_right if region == "right" else traj.cm_left
        var = traj.var_right if region == "right" else traj.var_left
        slope, intercept = fit_line(t_late, cm[late])
        pred_var = ms.x_variance(rep.t_final, units)
        setattr(rep, f"slope_{label}", ms.v)
        setattr(rep, f"slope_{label}_oracle", slope)
        setattr(rep, f"intercept_{label}", ms.x0)
        setattr(rep, f"intercept_{label}_oracle", intercept)
        setattr(rep, f"var_{label}", pred_var)
        setattr(rep, f"var_{label}_oracle", float(var[-1]))
        dev[f"slope_{label}"] = abs(slope - ms.v) / abs(ms.v)
        dev[f"intercept_{label}"] = abs(intercept - ms.x0) / max(abs(ms.x0), scale)
        dev[f"var_{label}"] = abs(float(var[-1]) - pred_var) / pred_var
    rep.overlap = asymptote_overlap(traj.final, traj.domain, barrier, scenario, units)
    rep.deviations = dev
    rep.passed = all(v <= tol for v in dev.values()) and rep.overlap >= min_overlap
    return rep


def _analytic_grid(scenario: Scenario, n: int = 4096) -> np.ndarray:
    width = 8.0 * _spectral_width(scenario.l0)
    lo = max(scenario.k0 - width, 1e-3 * scenario.k0)
    return np.linspace(lo, scenario.k0 + width, n)
