import csv

import numpy as np
import pytest
from hypothesis import given, strategies as st

from omdiss.classical import (ClassicalState, IntegrationControls, initial_state, integrate,
                              mode_energies, rhs, write_trajectory_csv)
from omdiss.errors import ParameterError
from omdiss.linear import find_fixed_points
from omdiss.params import Bath, SystemParams

from conftest import oscillation_point


def reference_rhs(y, p):
    """Mean-field equations written directly in complex form."""
    a = np.array([y[0] + 1j * y[1], y[2] + 1j * y[3]])
    x = np.array([y[4], y[6]])
    mom = np.array([y[5], y[7]])
    w = np.array([p.omega_m1, p.omega_m2])
    da = (1j * (p.delta0 + x) - 0.5) * a + 0.5
    if p.bath is Bath.COMMON:
        diss = p.gamma * (mom.sum()) * np.ones(2)
    else:
        diss = p.gamma * mom
    dp = -w**2 * x + np.array([-1, 1]) * p.kc * (x[0] - x[1]) - diss + p.power * np.abs(a) ** 2
    return np.array([da[0].real, da[0].imag, da[1].real, da[1].imag, mom[0], dp[0], mom[1], dp[1]])


params_st = st.builds(
    SystemParams,
    omega_m1=st.floats(0.2, 5), omega_m2=st.floats(0.2, 5), gamma=st.floats(1e-4, 0.5),
    kc=st.floats(0, 3), delta0=st.floats(-5, 5), power=st.floats(0, 50),
    bath=st.sampled_from(list(Bath)))
state_st = st.lists(st.floats(-3, 3), min_size=8, max_size=8).map(np.array)


@given(state_st, params_st)
def test_rhs_matches_complex_form(y, p):
    np.testing.assert_allclose(rhs(y, p), reference_rhs(y, p), rtol=1e-13, atol=1e-13)


def test_state_roundtrip():
    s = ClassicalState(0.1 + 0.2j, -0.3j, 0.4, 0.5, -0.6, 0.7)
    assert ClassicalState.from_array(s.to_array()) == s
    assert s.swapped().swapped() == s


@pytest.mark.parametrize("bath", list(Bath))
def test_fixed_point_is_stationary(bath):
    p = oscillation_point(bath=bath, delta0=-1.0, kc=0.05)
    for fp in find_fixed_points(p):
        assert np.abs(rhs(fp.state_vector(), p)).max() < 1e-12


def test_undriven_single_unit_is_a_damped_oscillator():
    # power = 0 decouples the mechanics; with momentum damping gamma the
    # position follows the textbook underdamped solution
    w, g = 1.3, 0.05
    p = SystemParams.identical(w, gamma=g, kc=0.0, delta0=0.0, power=0.0)
    traj = integrate(initial_state(0.01), p, 60.0, 0.1, IntegrationControls(1e-11, 1e-14))
    wd = np.sqrt(w * w - g * g / 4)
    t = traj.t
    exact = 0.01 * np.exp(-g * t / 2) * (np.cos(wd * t) + g / (2 * wd) * np.sin(wd * t))
    np.testing.assert_allclose(traj.x1, exact, atol=1e-10)
    np.testing.assert_allclose(traj.x2, exact, atol=1e-10)


@given(st.integers(0, 2**31 - 1), st.sampled_from(list(Bath)))
def test_exchange_symmetry(seed, bath):
    p = oscillation_point(bath=bath, kc=0.03)
    s0 = initial_state(seed=seed, scale=0.2)
    a = integrate(s0, p, 20.0, 0.5)
    b = integrate(s0.swapped(), p, 20.0, 0.5)
    np.testing.assert_allclose(a.y[:, [2, 3, 0, 1, 6, 7, 4, 5]], b.y, atol=1e-8)


def test_common_bath_leaves_relative_mode_undamped():
    p = SystemParams.identical(1.0, gamma=0.05, kc=0.2, delta0=0.0, power=0.0, bath=Bath.COMMON)
    s0 = ClassicalState(0j, 0j, 0.02, 0.0, -0.01, 0.0)
    traj = integrate(s0, p, 200.0, 0.5, IntegrationControls(1e-11, 1e-14))
    e_plus, e_minus = mode_energies(traj, p)
    assert e_plus[-1] < 1e-3 * e_plus[0]
    np.testing.assert_allclose(e_minus, e_minus[0], rtol=1e-7)


def test_separate_baths_damp_both_modes():
    p = SystemParams.identical(1.0, gamma=0.05, kc=0.2, delta0=0.0, power=0.0)
    s0 = ClassicalState(0j, 0j, 0.02, 0.0, -0.01, 0.0)
    e_plus, e_minus = mode_energies(integrate(s0, p, 200.0, 0.5), p)
    assert e_plus[-1] < 1e-3 * e_plus[0] and e_minus[-1] < 1e-3 * e_minus[0]


def test_randomized_initial_state_is_reproducible():
    assert initial_state(seed=7) == initial_state(seed=7)
    assert initial_state(seed=7) != initial_state(seed=8)
    s = initial_state(0.03)
    assert s.x1 == s.x2 == 0.03 and s.a1 == 0


def test_t_record_keeps_the_tail():
    p = oscillation_point()
    full = integrate(initial_state(), p, 10.0, 0.5)
    tail = integrate(initial_state(), p, 10.0, 0.5, t_record=5.0)
    assert tail.t[0] == 5.0
    np.testing.assert_allclose(tail.y, full.y[10:], atol=1e-12)


def test_integrate_argument_checks():
    p = oscillation_point()
    with pytest.raises(ParameterError):
        integrate(initial_state(), p, -1.0, 0.1)
    with pytest.raises(ParameterError):
        integrate(initial_state(), p, 1.0, 0.1, t_record=2.0)
    with pytest.raises(ParameterError):
        IntegrationControls(rtol=0.0)


def test_trajectory_csv(tmp_path):
    traj = integrate(initial_state(), oscillation_point(), 1.0, 0.25)
    path = write_trajectory_csv(traj, tmp_path / "t.csv", digits=8)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["t", "re_a1", "im_a1", "re_a2", "im_a2", "x1", "p1", "x2", "p2"]
    assert len(rows) == 6
    np.testing.assert_allclose(np.array(rows[1:], dtype=float)[:, 1:], traj.y, rtol=1e-7)
