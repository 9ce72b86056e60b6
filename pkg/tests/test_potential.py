import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from conftest import rect_transmission
from tunnelchannels.channels import assemble_smatrix
from tunnelchannels.potential import (
    Barrier,
    BarrierError,
    BarrierFileError,
    PhaseUnwrapError,
    build_barrier,
    load_barrier,
    parse_barrier,
    scatter_coeffs,
    transfer_matrix,
)
from tunnelchannels.units import Units


# ---------------------------------------------------------------------------
# Barrier


def test_barrier_derived_lengths():
    bar = build_barrier(3.0, [(0.5, 1.0), (1.5, -2.0)])
    assert bar.d == 2.0
    assert bar.b == 5.0
    assert bar.s == 8.0
    assert bar.x_midp == 4.0
    np.testing.assert_array_equal(bar.edges, [3.0, 3.5, 5.0])
    np.testing.assert_array_equal(bar.heights, [1.0, -2.0])


@pytest.mark.parametrize(
    "a, segments",
    [(0.0, [(1.0, 1.0)]), (-1.0, [(1.0, 1.0)]), (1.0, []), (1.0, [(0.0, 1.0)]), (1.0, [(-1.0, 1.0)]), (1.0, [(1.0, math.nan)])],
)
def test_barrier_rejects_bad_geometry(a, segments):
    with pytest.raises(BarrierError):
        build_barrier(a, segments)


def test_potential_profile():
    bar = build_barrier(1.0, [(1.0, 2.0), (1.0, -1.0)])
    x = np.array([0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0])
    np.testing.assert_array_equal(bar(x), [0.0, 2.0, 2.0, -1.0, -1.0, 0.0, 0.0])


def test_shifted_keeps_segments():
    bar = build_barrier(1.0, [(1.0, 2.0)]).shifted(7.0)
    assert bar.a == 7.0 and bar.b == 8.0 and bar.segments == ((1.0, 2.0),)


def test_free_barrier_flag():
    assert build_barrier(1.0, [(1.0, 0.0), (2.0, 0.0)]).is_free
    assert not build_barrier(1.0, [(1.0, 0.1)]).is_free


# ---------------------------------------------------------------------------
# barrier files


def test_parse_with_comments_and_blank_lines():
    text = "# two steps\n\na 10.5\n0.5 2   # first\n\n0.5 1\n"
    bar = parse_barrier(text)
    assert bar.a == 10.5
    assert bar.segments == ((0.5, 2.0), (0.5, 1.0))


@pytest.mark.parametrize(
    "text, line",
    [
        ("a 10\n1 2 3\n", 2),
        ("a 10\n1 x\n", 2),
        ("b 10\n1 2\n", 1),
        ("a 10\n1 2\n1 inf\n", 3),
    ],
)
def test_parse_errors_name_the_line(text, line):
    with pytest.raises(BarrierFileError, match=f":{line}:"):
        parse_barrier(text, source="barrier.txt")


def test_parse_requires_segments():
    with pytest.raises(BarrierFileError, match="no segments"):
        parse_barrier("a 1\n")
    with pytest.raises(BarrierFileError, match="missing header"):
        parse_barrier("# nothing\n")


def test_parse_reports_invalid_geometry():
    with pytest.raises(BarrierFileError, match="width must be positive"):
        parse_barrier("a 1\n-1 2\n")


def test_load_barrier(tmp_path):
    path = tmp_path / "b.txt"
    path.write_text("a 2\n1 3\n")
    assert load_barrier(path) == Barrier(2.0, ((1.0, 3.0),))


# ---------------------------------------------------------------------------
# transfer matrix and tables


def test_rectangular_transmission_matches_textbook():
    V0, d = 2.0, 1.0
    k0 = math.sqrt(2 * V0)
    k = np.sort(np.concatenate([np.linspace(0.05, 5.0, 999), [k0]]))
    coeffs = scatter_coeffs(build_barrier(10.0, [(d, V0)]), k)
    np.testing.assert_allclose(coeffs.T, rect_transmission(k, V0, d), rtol=0, atol=1e-12)


def test_transmission_at_barrier_top_and_nearby():
    # the series branch and the closed form meet smoothly at E = V0
    V0, d = 2.0, 1.5
    k0 = math.sqrt(2 * V0)
    k = k0 + np.array([-1e-3, -1e-6, -1e-9, 0.0, 1e-9, 1e-6, 1e-3])
    coeffs = scatter_coeffs(build_barrier(1.0, [(d, V0)]), k)
    np.testing.assert_allclose(coeffs.T, rect_transmission(k, V0, d), rtol=0, atol=1e-12)


def _shoot(barrier, k, units=Units()):
    """Transmission and left reflection amplitudes from integrating the stationary equation.

    The solution e^{ikx} beyond b is integrated back to a segment by segment.
    """
    E = units.energy(k)

    def rhs(x, y, V):
        psi = y[0] + 1j * y[1]
        dpsi = y[2] + 1j * y[3]
        dd = 2 * units.mass * (V - E) / units.hbar**2 * psi
        return [dpsi.real, dpsi.imag, dd.real, dd.imag]

    psi = np.exp(1j * k * barrier.b)
    dpsi = 1j * k * psi
    edges = barrier.edges
    for i in range(len(barrier.segments) - 1, -1, -1):
        V = barrier.segments[i][1]
        sol = solve_ivp(rhs, (edges[i + 1], edges[i]), [psi.real, psi.imag, dpsi.real, dpsi.imag], args=(V,), rtol=1e-12, atol=1e-13, method="DOP853")
        y = sol.y[:, -1]
        psi, dpsi = y[0] + 1j * y[1], y[2] + 1j * y[3]
    a = barrier.a
    A = 0.5 * (psi + dpsi / (1j * k)) * np.exp(-1j * k * a)
    B = 0.5 * (psi - dpsi / (1j * k)) * np.exp(1j * k * a)
    return 1 / A, B / A


@pytest.mark.parametrize(
    "segments",
    [[(0.5, 2.0), (0.5, 1.0)], [(0.7, -1.5), (0.4, 3.0)], [(1.0, 4.0), (0.3, 0.5)]],
)
def test_scattering_amplitudes_match_shooting(segments):
    bar = build_barrier(3.0, segments)
    k = np.linspace(0.3, 3.5, 41)
    S = assemble_smatrix(scatter_coeffs(bar, k))
    for i in range(0, k.size, 8):
        t, r = _shoot(bar, k[i])
        assert abs(S.S11[i] - t) < 1e-6
        assert abs(S.S21[i] - r) < 1e-6


def test_flux_conservation_single_k():
    bar = build_barrier(2.0, [(0.4, 3.0), (0.6, -2.0), (0.2, 5.0)])
    for k in (0.1, 1.0, 2.449, 4.0):
        tm = transfer_matrix(bar, k)
        assert abs(tm.flux_residual) < 1e-12
        assert tm.matrix.shape == (2, 2)


def test_transfer_matrix_rejects_nonpositive_k():
    with pytest.raises(ValueError):
        transfer_matrix(build_barrier(1.0, [(1.0, 1.0)]), 0.0)


def test_free_barrier_tables():
    bar = build_barrier(4.0, [(1.0, 0.0)])
    k = np.linspace(0.2, 3.0, 200)
    c = scatter_coeffs(bar, k)
    np.testing.assert_allclose(c.T, 1.0, atol=1e-15)
    np.testing.assert_allclose(c.R, 0.0, atol=1e-15)
    np.testing.assert_allclose(c.J, k * bar.d, atol=1e-12)
    np.testing.assert_allclose(c.Jprime, bar.d, atol=1e-12)
    np.testing.assert_array_equal(c.F, 0.0)


def test_symmetric_barrier_has_flat_F():
    bar = build_barrier(4.0, [(0.5, 1.0), (0.5, 3.0), (0.5, 1.0)])
    c = scatter_coeffs(bar, np.linspace(0.2, 2.0, 300))
    np.testing.assert_allclose(c.Fprime, 0.0, atol=1e-9)


def test_parity_extension(rect_coeffs):
    c = rect_coeffs
    n = c.kgrid.size
    full_k = c.full_kgrid
    np.testing.assert_array_equal(full_k[:n], -c.kgrid[::-1])
    np.testing.assert_array_equal(c.full("T")[:n], c.T[::-1])
    np.testing.assert_array_equal(c.full("J")[:n], -c.J[::-1])
    np.testing.assert_allclose(c.full("F")[:n], math.pi - c.F[::-1])
    np.testing.assert_array_equal(c.full("Jprime")[:n], c.Jprime[::-1])
    np.testing.assert_array_equal(c.full("Tprime")[:n], -c.Tprime[::-1])
    T_neg, J_neg, F_neg = c.at_negative_k()
    np.testing.assert_array_equal(J_neg, -c.J)
    with pytest.raises(KeyError):
        c.full("nonsense")


def test_T_derivative_against_analytic():
    V0, d = 2.0, 1.0
    k = np.linspace(0.5, 3.0, 4001)
    c = scatter_coeffs(build_barrier(5.0, [(d, V0)]), k)
    h = 1e-6
    ref = (rect_transmission(k + h, V0, d) - rect_transmission(k - h, V0, d)) / (2 * h)
    np.testing.assert_allclose(c.Tprime, ref, atol=1e-5)


def test_J_derivative_against_finite_difference():
    bar = build_barrier(5.0, [(0.5, 2.0), (0.5, 1.0)])
    k = np.linspace(0.5, 3.0, 4001)
    c = scatter_coeffs(bar, k)
    h = 1e-6
    up = scatter_coeffs(bar, k + h).J
    down = scatter_coeffs(bar, k - h).J
    np.testing.assert_allclose(c.Jprime, (up - down) / (2 * h), atol=1e-5)


def test_coarse_grid_is_refused():
    # a thick opaque barrier makes J - kd wind quickly; 3 points cannot follow it
    bar = build_barrier(1.0, [(40.0, 0.5)])
    with pytest.raises(PhaseUnwrapError, match="refine"):
        scatter_coeffs(bar, np.linspace(1.1, 6.0, 3))


@pytest.mark.parametrize("grid", [[1.0, 2.0], [1.0, 3.0, 2.0], [0.0, 1.0, 2.0], [-1.0, 1.0, 2.0]])
def test_grid_validation(grid):
    with pytest.raises(ValueError):
        scatter_coeffs(build_barrier(1.0, [(1.0, 1.0)]), grid)


def test_units_enter_through_reduced_potential():
    # the reduced potential 2 m V / hbar^2 depends on m / hbar^2 only
    bar = build_barrier(1.0, [(1.0, 2.0)])
    k = np.linspace(0.3, 3.0, 50)
    plain = scatter_coeffs(bar, k)
    scaled = scatter_coeffs(bar, k, Units(2.0, 4.0))
    np.testing.assert_allclose(scaled.T, plain.T, atol=1e-14)
    np.testing.assert_allclose(scaled.J, plain.J, atol=1e-12)
    heavy = scatter_coeffs(bar, k, Units(1.0, 2.0))
    np.testing.assert_allclose(heavy.T, rect_transmission(k, 2.0, 1.0, hbar=1.0, m=2.0), atol=1e-12)


# ---------------------------------------------------------------------------
# properties

segment = st.tuples(st.floats(0.05, 2.0), st.floats(-3.0, 5.0))


@settings(max_examples=60, deadline=None)
@given(st.lists(segment, min_size=1, max_size=5), st.floats(0.05, 6.0))
def test_flux_and_probability_invariants(segments, k):
    bar = build_barrier(1.0, segments)
    tm = transfer_matrix(bar, k)
    assert abs(tm.flux_residual) < 1e-9
    c = scatter_coeffs(bar, np.array([k, k * 1.0001, k * 1.0002]))
    assert np.all(c.T > 0) and np.all(c.T <= 1)
    np.testing.assert_allclose(c.T + c.R, 1.0, atol=1e-15)


@settings(max_examples=40, deadline=None)
@given(st.lists(segment, min_size=1, max_size=4), st.integers(0, 3), st.floats(0.05, 6.0))
def test_splitting_a_segment_changes_nothing(segments, which, k):
    which = which % len(segments)
    w, h = segments[which]
    split = segments[:which] + [(0.3 * w, h), (0.7 * w, h)] + segments[which + 1 :]
    one = transfer_matrix(build_barrier(1.0, segments), k)
    two = transfer_matrix(build_barrier(1.0, split), k)
    scale = max(1.0, abs(one.q))
    assert abs(one.q - two.q) < 1e-9 * scale
    assert abs(one.p - two.p) < 1e-9 * scale


@settings(max_examples=40, deadline=None)
@given(st.lists(segment, min_size=1, max_size=4), st.floats(0.1, 5.0), st.floats(0.5, 20.0))
def test_translation_only_moves_phases(segments, k, shift):
    # moving the barrier leaves T and J but rotates the reflection phase by 2k shift
    bar = build_barrier(1.0, segments)
    c1 = assemble_smatrix(scatter_coeffs(bar, np.array([k, 1.001 * k, 1.002 * k])))
    c2 = assemble_smatrix(scatter_coeffs(bar.shifted(1.0 + shift), np.array([k, 1.001 * k, 1.002 * k])))
    assert abs(c1.S11[0] - c2.S11[0]) < 1e-9
    assert abs(c1.S21[0] * np.exp(2j * k * shift) - c2.S21[0]) < 1e-8
