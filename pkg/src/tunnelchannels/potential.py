"""Piecewise-constant barriers, transfer matrices and scattering functions.

A barrier occupies ``[a, b]``; outside it the particle is free.  For a
wavenumber ``k`` the plane-wave amplitudes on the two sides are related by

    (A_in^+, A_out^-) = Y (A_out^+, A_in^-),   Y = [[q, p], [p*, q*]]

with ``q = T^{-1/2} exp(-i(J - kd))`` and
``p = sqrt(R/T) exp(i(pi/2 + F - ks))``.  The real functions T, J and F are
tabulated on a k-grid by :func:`scatter_coeffs`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .units import DEFAULT_UNITS, Units

__all__ = [
    "Barrier",
    "BarrierError",
    "BarrierFileError",
    "PhaseUnwrapError",
    "ScatterCoeffs",
    "TransferMatrix",
    "build_barrier",
    "load_barrier",
    "parse_barrier",
    "scatter_coeffs",
    "transfer_matrix",
]

# Below this |K w|^2 the segment propagator is evaluated from its Taylor series.
_SERIES_CUTOFF = 1e-4
# |p/q| below this ratio means R is zero to working precision and F is undefined.
_F_UNDEFINED_RATIO = 1e-10
# Largest admissible step of a continued phase between neighbouring grid points.
_MAX_J_STEP = 0.5 * math.pi
_MAX_F_STEP = 0.25 * math.pi
_F_CHECK_MIN_R = 1e-8


class BarrierError(ValueError):
    pass


class BarrierFileError(BarrierError):
    pass


class PhaseUnwrapError(ValueError):
    pass


@dataclass(frozen=True)
class Barrier:
    """Piecewise-constant potential on ``[a, b]``.

    ``segments`` is an ordered sequence of ``(width, height)`` pairs starting
    at ``a``.
    """

    a: float
    segments: tuple[tuple[float, float], ...]
    b: float = field(init=False)
    d: float = field(init=False)
    s: float = field(init=False)
    x_midp: float = field(init=False)

    def __post_init__(self):
        segs = tuple((float(w), float(h)) for w, h in self.segments)
        if not self.a > 0:
            raise BarrierError(f"left boundary a must be positive, got {self.a}")
        if not segs:
            raise BarrierError("barrier needs at least one segment")
        for i, (w, h) in enumerate(segs):
            if not w > 0:
                raise BarrierError(f"segment {i}: width must be positive, got {w}")
            if not math.isfinite(h):
                raise BarrierError(f"segment {i}: height must be finite, got {h}")
        d = math.fsum(w for w, _ in segs)
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "segments", segs)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "b", self.a + d)
        object.__setattr__(self, "s", self.a + self.b)
        object.__setattr__(self, "x_midp", 0.5 * (self.a + self.b))

    @property
    def heights(self) -> np.ndarray:
        return np.array([h for _, h in self.segments])

    @property
    def edges(self) -> np.ndarray:
        """Segment boundaries, ``a`` first and ``b`` last."""
        return self.a + np.concatenate([[0.0], np.cumsum([w for w, _ in self.segments])])

    @property
    def is_free(self) -> bool:
        return all(h == 0.0 for _, h in self.segments)

    def shifted(self, a: float) -> "Barrier":
        """The same segment list starting at a new left boundary."""
        return Barrier(a, self.segments)

    def __call__(self, x):
        """Potential energy V(x); zero outside ``[a, b)``."""
        x = np.asarray(x, dtype=float)
        edges = self.edges
        idx = np.searchsorted(edges, x, side="right") - 1
        inside = (idx >= 0) & (idx < len(self.segments))
        v = np.zeros_like(x)
        v[inside] = self.heights[idx[inside]]
        return v


def build_barrier(a: float, segments: Iterable[Sequence[float]]) -> Barrier:
    return Barrier(a, tuple(tuple(s) for s in segments))


def parse_barrier(text: str, source: str = "<string>") -> Barrier:
    """Parse the barrier file format.

    First meaningful line ``a <value>``, then one ``<width> <height>`` line per
    segment.  Blank lines and ``#`` comments are ignored.
    """
    a = None
    segments = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if a is None:
            if len(fields) != 2 or fields[0] != "a":
                raise BarrierFileError(f"{source}:{lineno}: expected header 'a <value>', got {raw.strip()!r}")
            a = _parse_real(fields[1], source, lineno)
            continue
        if len(fields) != 2:
            raise BarrierFileError(f"{source}:{lineno}: expected '<width> <height>', got {raw.strip()!r}")
        segments.append((_parse_real(fields[0], source, lineno), _parse_real(fields[1], source, lineno)))
    if a is None:
        raise BarrierFileError(f"{source}: missing header line 'a <value>'")
    if not segments:
        raise BarrierFileError(f"{source}: no segments after header")
    try:
        return build_barrier(a, segments)
    except BarrierError as exc:
        raise BarrierFileError(f"{source}: {exc}") from None


def _parse_real(token: str, source: str, lineno: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise BarrierFileError(f"{source}:{lineno}: not a real number: {token!r}") from None
    if not math.isfinite(value):
        raise BarrierFileError(f"{source}:{lineno}: not a finite number: {token!r}")
    return value


def load_barrier(path) -> Barrier:
    path = Path(path)
    return parse_barrier(path.read_text(), source=str(path))


# ---------------------------------------------------------------------------
# transfer matrix


@dataclass(frozen=True)
class TransferMatrix:
    q: complex
    p: complex

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.q, self.p], [np.conj(self.p), np.conj(self.q)]])

    @property
    def flux_residual(self) -> float:
        """|q|^2 - |p|^2 - 1, relative to |q|^2 for opaque barriers."""
        q2 = abs(self.q) ** 2
        return (q2 - abs(self.p) ** 2 - 1.0) / max(1.0, q2)


def _cos_sinc(z):
    """cos(sqrt z) and sin(sqrt z)/sqrt z for real z of either sign."""
    z = np.asarray(z, dtype=float)
    c = np.empty_like(z)
    s = np.empty_like(z)
    small = np.abs(z) < _SERIES_CUTOFF
    pos = (z > 0) & ~small
    neg = (z < 0) & ~small
    r = np.sqrt(z[pos])
    c[pos] = np.cos(r)
    s[pos] = np.sin(r) / r
    r = np.sqrt(-z[neg])
    c[neg] = np.cosh(r)
    s[neg] = np.sinh(r) / r
    zs = z[small]
    c[small] = 1 - zs / 2 * (1 - zs / 12 * (1 - zs / 30 * (1 - zs / 56)))
    s[small] = 1 - zs / 6 * (1 - zs / 20 * (1 - zs / 42 * (1 - zs / 72)))
    return c, s


def _reduced_entries(barrier: Barrier, k, units: Units):
    """Entries N11, N12 with q = N11 exp(ikd) and p = N12 exp(-iks).

    The (psi, psi') propagator of a segment of width w is
    [[C, w S], [-K^2 w S, C]] with C = cos(Kw), S = sin(Kw)/(Kw); it stays real
    for evanescent segments and reduces to [[1, w], [0, 1]] when E equals the
    segment height.
    """
    k = np.asarray(k, dtype=float)
    m11 = np.ones_like(k)
    m12 = np.zeros_like(k)
    m21 = np.zeros_like(k)
    m22 = np.ones_like(k)
    for w, h in barrier.segments:
        K2 = k * k - units.wavenumber_sq(h)
        c, s = _cos_sinc(K2 * w * w)
        s12 = w * s
        s21 = -K2 * w * s
        m11, m12, m21, m22 = (
            c * m11 + s12 * m21,
            c * m12 + s12 * m22,
            s21 * m11 + c * m21,
            s21 * m12 + c * m22,
        )
    if not np.all(np.isfinite(m11) & np.isfinite(m12) & np.isfinite(m21) & np.isfinite(m22)):
        raise OverflowError("barrier too opaque: transfer matrix overflowed")
    n11 = 0.5 * ((m11 + m22) + 1j * (m21 / k - k * m12))
    n12 = 0.5 * ((m22 - m11) + 1j * (k * m12 + m21 / k))
    return n11, n12


def transfer_matrix(barrier: Barrier, k: float, units: Units = DEFAULT_UNITS) -> TransferMatrix:
    if not k > 0:
        raise ValueError(f"wavenumber must be positive, got {k}")
    n11, n12 = _reduced_entries(barrier, np.array([k], dtype=float), units)
    q = complex(n11[0] * np.exp(1j * k * barrier.d))
    p = complex(n12[0] * np.exp(-1j * k * barrier.s))
    return TransferMatrix(q, p)


# ---------------------------------------------------------------------------
# tabulated scattering functions


@dataclass(frozen=True, eq=False)
class ScatterCoeffs:
    """T, R, J, F and their k-derivatives tabulated on a positive k-grid.

    Values at negative k follow from the parity rules T(-k) = T(k),
    J(-k) = -J(k), F(-k) = pi - F(k); :meth:`full` returns any table on the
    symmetric grid ``full_kgrid`` built that way.
    """

    barrier: Barrier
    kgrid: np.ndarray
    T: np.ndarray
    R: np.ndarray
    J: np.ndarray
    F: np.ndarray
    Jprime: np.ndarray
    Fprime: np.ndarray
    Tprime: np.ndarray
    units: Units = DEFAULT_UNITS

    _PARITY = {
        "T": "even", "R": "even", "J": "odd", "F": "F",
        "Jprime": "even", "Fprime": "even", "Tprime": "odd",
        "sqrtT": "even", "sqrtR": "even", "dsqrtT": "odd", "dsqrtR": "odd",
    }

    @property
    def full_kgrid(self) -> np.ndarray:
        return np.concatenate([-self.kgrid[::-1], self.kgrid])

    @property
    def sqrtT(self) -> np.ndarray:
        return np.sqrt(self.T)

    @property
    def sqrtR(self) -> np.ndarray:
        return np.sqrt(self.R)

    @property
    def dsqrtT(self) -> np.ndarray:
        return np.gradient(self.sqrtT, self.kgrid, edge_order=2)

    @property
    def dsqrtR(self) -> np.ndarray:
        return np.gradient(self.sqrtR, self.kgrid, edge_order=2)

    def at_negative_k(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(T, J, F) evaluated at -kgrid."""
        return self.T.copy(), -self.J, math.pi - self.F

    def full(self, name: str) -> np.ndarray:
        """Table ``name`` extended to ``full_kgrid`` through its parity."""
        if name not in self._PARITY:
            raise KeyError(f"no parity rule for table {name!r}")
        values = getattr(self, name)
        parity = self._PARITY[name]
        if parity == "even":
            mirrored = values[::-1]
        elif parity == "odd":
            mirrored = -values[::-1]
        else:
            mirrored = (math.pi - values)[::-1]
        return np.concatenate([mirrored, values])

    def energy(self) -> np.ndarray:
        return self.units.energy(self.kgrid)


def _continue_phase(raw, kgrid, period, max_step, label, checked=None):
    """Nearest-branch continuation of a phase along the grid.

    ``checked`` masks the grid intervals whose step is validated.
    """
    cont = np.unwrap(raw, period=period)
    steps = np.abs(np.diff(cont))
    if checked is not None:
        steps = np.where(checked, steps, 0.0)
    if steps.size and steps.max() > max_step:
        i = int(np.argmax(steps))
        raise PhaseUnwrapError(
            f"{label} changes by {steps[i]:.3g} rad between k={kgrid[i]:.6g} and k={kgrid[i + 1]:.6g}; "
            "refine the k-grid"
        )
    return cont


def scatter_coeffs(barrier: Barrier, kgrid, units: Units = DEFAULT_UNITS) -> ScatterCoeffs:
    """Tabulate T, R, J, F and the derivatives T', J', F' on ``kgrid``.

    J is continued from the principal value of J - kd at the first grid point,
    so J = kd exactly for a transparent barrier.  F is continued modulo 2 pi;
    at zeros of R it has a genuine pi jump (sqrt R >= 0 by convention), so F'
    is taken from the phase continued modulo pi, which is smooth there.
    """
    k = np.asarray(kgrid, dtype=float)
    if k.ndim != 1 or k.size < 3:
        raise ValueError("kgrid must be one-dimensional with at least 3 points")
    if not np.all(k > 0):
        raise ValueError("kgrid must contain positive wavenumbers only")
    if not np.all(np.diff(k) > 0):
        raise ValueError("kgrid must be strictly increasing")

    n11, n12 = _reduced_entries(barrier, k, units)
    if barrier.is_free:
        # |N11| = 1 up to rounding of cos^2 + sin^2
        T = np.ones_like(k)
    else:
        T = np.minimum(1.0 / np.abs(n11) ** 2, 1.0)
    R = 1.0 - T

    # q = n11 e^{ikd} so J - kd = -arg q
    reduced = _continue_phase(-np.angle(n11 * np.exp(1j * k * barrier.d)), k, 2 * math.pi, _MAX_J_STEP, "J")
    J = reduced + k * barrier.d
    Jprime = np.gradient(reduced, k, edge_order=2) + barrier.d

    defined = np.abs(n12) > _F_UNDEFINED_RATIO * np.abs(n11)
    if defined.sum() >= 2:
        raw = np.angle(n12[defined]) - 0.5 * math.pi
        kd = k[defined]
        # F swings quickly near (avoided) zeros of R, where it carries no weight
        weighty = R[defined] > _F_CHECK_MIN_R
        checked = weighty[1:] & weighty[:-1]
        F = np.interp(k, kd, np.unwrap(raw, period=2 * math.pi))
        smooth = np.interp(k, kd, _continue_phase(raw, kd, math.pi, _MAX_F_STEP, "F", checked))
    else:
        # reflectionless on the whole grid: F carries no weight anywhere
        F = np.zeros_like(k)
        smooth = F
    Fprime = np.gradient(smooth, k, edge_order=2)
    Tprime = np.gradient(T, k, edge_order=2)
    return ScatterCoeffs(barrier, k, T, R, J, F, Jprime, Fprime, Tprime, units)
