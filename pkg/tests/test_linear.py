import csv
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from omdiss.classical import rhs
from omdiss.errors import NoBracket, ParameterError
from omdiss.linear import (LABELS, cb_normal_mode_matrices, classical_jacobian,
                           dissipation_matrix, drift_matrix, find_fixed_points, hopf_scan,
                           noise_matrix, normal_mode_transform, normalized_system,
                           quadrature_scales, select_fixed_point, stability, write_matrix_csv)
from omdiss.params import Bath, SystemParams

from conftest import oscillation_point, quantum_point

# maps the classical state (Re a, Im a, x, p) onto fluctuation coordinates (Q, P, x, p)
TO_QUADRATURES = np.diag([math.sqrt(2)] * 4 + [1.0] * 4)


def cubic_roots(p):
    """Real roots of w^2 x ((d + x)^2 + 1/4) = P/4 via numpy's companion matrix."""
    w2, d = p.omega_m1**2, p.delta0
    coeffs = w2 * np.array([1.0, 2 * d, d * d + 0.25, 0.0])
    coeffs[-1] -= 0.25 * p.power
    r = np.roots(coeffs)
    return np.sort(r[np.abs(r.imag) < 1e-7 * (1 + np.abs(r.real))].real)


def fd_jacobian(p, y, h=1e-6):
    J = np.empty((8, 8))
    for k in range(8):
        e = np.zeros(8)
        e[k] = h
        J[:, k] = (rhs(y + e, p) - rhs(y - e, p)) / (2 * h)
    return J


params_st = st.builds(
    SystemParams.identical, st.floats(0.3, 5.0), gamma=st.floats(1e-4, 0.2), kc=st.floats(0, 5),
    delta0=st.floats(-6, 3), power=st.floats(0, 200), n_th=st.floats(0, 50),
    bath=st.sampled_from(list(Bath)))


@given(params_st)
def test_fixed_points_match_companion_roots(p):
    xs = [fp.x_st for fp in find_fixed_points(p)]
    ref = cubic_roots(p)
    # nearly tangent double roots may be resolved as one or two by either route
    if len(ref) == len(xs):
        np.testing.assert_allclose(xs, ref, rtol=1e-7, atol=1e-9)
    else:
        assert len(ref) == 3 and len(xs) in (1, 3)
        for x in xs:
            assert np.min(np.abs(ref - x)) < 1e-4


def test_bistable_point_has_three_roots():
    # x((x - 3)^2 + 1/4) = 2 has three positive roots
    p = SystemParams.identical(1.0, gamma=0.01, kc=0.0, delta0=-3.0, power=8.0)
    fps = find_fixed_points(p)
    assert len(fps) == 3
    np.testing.assert_allclose([f.x_st for f in fps], cubic_roots(p), rtol=1e-10)
    # the middle branch is a saddle; the red-detuned lower branch is stable
    assert fps[0].stable and not fps[1].stable
    assert select_fixed_point(fps) is fps[0]


def test_undriven_fixed_point():
    fps = find_fixed_points(quantum_point(power=0.0))
    assert len(fps) == 1 and fps[0].x_st == 0.0 and fps[0].stable


def test_fixed_point_accessors():
    fp = select_fixed_point(find_fixed_points(quantum_point()))
    assert fp.q_st == pytest.approx(math.sqrt(2) * fp.a_st.real)
    assert fp.pq_st == pytest.approx(math.sqrt(2) * fp.a_st.imag)
    assert fp.a_sq == pytest.approx(0.25 / (0.25 + (fp.x_st - 3.0) ** 2))
    assert fp.x_st == pytest.approx(12.0 * fp.a_sq / 9.0, rel=1e-12)


@given(params_st)
def test_drift_without_damping_is_the_mean_field_jacobian(p):
    fp = find_fixed_points(p)[0]
    conservative = drift_matrix(p, fp) - dissipation_matrix(p)
    # vanishing damping in the mean-field rhs isolates its conservative part
    J = TO_QUADRATURES @ fd_jacobian(p.replace(gamma=1e-300), fp.state_vector()) \
        @ np.linalg.inv(TO_QUADRATURES)
    np.testing.assert_allclose(conservative, J, rtol=1e-6, atol=1e-6 * np.abs(J).max())


@given(params_st)
def test_classical_jacobian_includes_momentum_damping(p):
    fp = find_fixed_points(p)[0]
    J = TO_QUADRATURES @ fd_jacobian(p, fp.state_vector()) @ np.linalg.inv(TO_QUADRATURES)
    np.testing.assert_allclose(classical_jacobian(p, fp), J, rtol=1e-6,
                               atol=1e-6 * np.abs(J).max())


def test_dissipation_pattern():
    g = 0.02
    sb = dissipation_matrix(SystemParams.identical(1, gamma=g, kc=0, delta0=0, power=1))
    cb = dissipation_matrix(SystemParams.identical(1, gamma=g, kc=0, delta0=0, power=1,
                                                   bath="cb"))
    assert np.count_nonzero(sb) == 4 and np.count_nonzero(cb) == 8
    for j, k in [(4, 4), (5, 5), (6, 6), (7, 7)]:
        assert sb[j, k] == cb[j, k] == -g
    for j, k in [(4, 6), (5, 7), (6, 4), (7, 5)]:
        assert cb[j, k] == -g and sb[j, k] == 0


@given(params_st.filter(lambda p: p.power > 1e-3))
def test_normalized_system_is_a_similarity_transform(p):
    fp = find_fixed_points(p)[0]
    S = np.diag(quadrature_scales(p))
    M, N = normalized_system(p, fp)
    scale = max(1.0, np.abs(M).max())
    np.testing.assert_allclose(M, S @ drift_matrix(p, fp) @ np.linalg.inv(S), atol=1e-12 * scale)
    np.testing.assert_allclose(N, S @ noise_matrix(p) @ S, rtol=1e-12, atol=1e-15)


def test_noise_matrix_entries():
    p = quantum_point(bath=Bath.COMMON)
    N = noise_matrix(p)
    thermal = p.gamma * (2 * p.n_th + 1)
    assert np.allclose(np.diag(N)[:4], 3.0 / 24.0)
    assert N[4, 4] == N[4, 6] == N[6, 4] == N[6, 6] == pytest.approx(thermal)
    assert N[5, 7] == pytest.approx(9 * thermal)
    with pytest.raises(ParameterError):
        noise_matrix(p.replace(power=0.0))


def test_undriven_normalized_system_is_finite():
    p = quantum_point(power=0.0)
    M, N = normalized_system(p, find_fixed_points(p)[0])
    assert np.all(np.isfinite(M)) and np.all(np.isfinite(N))
    assert np.all(M[:4, 4:] == 0) and np.all(M[4:, :4] == 0)


def test_detuned_units_rejected():
    p = oscillation_point().replace(omega_m2=1.1)
    with pytest.raises(ParameterError):
        find_fixed_points(p)


def test_stability_margin():
    assert stability(-np.eye(2))[1]
    assert not stability(np.diag([-1.0, 0.0]))[1]
    assert not stability(np.diag([-1.0, -1e-12]))[1]


def leading_real(p, d):
    q = p.replace(delta0=d)
    fps = find_fixed_points(q)
    fp = select_fixed_point(fps) or fps[0]
    return np.linalg.eigvals(classical_jacobian(q, fp)).real.max()


def test_hopf_scan_brackets_the_crossing():
    p = oscillation_point()
    d = hopf_scan(p, (-1.0, 1.0), tol=1e-8)
    assert -0.5 < d < -0.25
    assert leading_real(p, d - 1e-6) * leading_real(p, d + 1e-6) < 0
    with pytest.raises(NoBracket):
        hopf_scan(p, (-2.0, -1.0))


def test_self_sustained_regime_is_unstable():
    assert select_fixed_point(find_fixed_points(oscillation_point())) is None


def test_normal_mode_transform_is_orthogonal_involution():
    T = normal_mode_transform()
    np.testing.assert_allclose(T @ T.T, np.eye(8), atol=1e-15)
    np.testing.assert_allclose(T @ T, np.eye(8), atol=1e-15)


@pytest.mark.parametrize("kc_ratio", [0.0, 0.5, 1.0])
def test_cb_normal_mode_matrices_match_rotated_drift(kc_ratio):
    p = quantum_point(kc_ratio, Bath.COMMON)
    fp = select_fixed_point(find_fixed_points(p))
    T = normal_mode_transform()
    M_nm, N_nm = cb_normal_mode_matrices(p, fp)
    np.testing.assert_allclose(M_nm, T @ drift_matrix(p, fp) @ T.T, atol=1e-13)
    np.testing.assert_allclose(N_nm, T @ noise_matrix(p) @ T.T, atol=1e-15)
    assert M_nm[6, 6] == M_nm[7, 7] == 0.0
    assert np.all(N_nm[6:, :] == 0)


def test_cb_normal_mode_matrices_preconditions():
    p = quantum_point()
    fp = select_fixed_point(find_fixed_points(p))
    with pytest.raises(ParameterError):
        cb_normal_mode_matrices(p, fp)


def test_matrix_csv(tmp_path):
    M = np.arange(64.0).reshape(8, 8) / 7
    rows = list(csv.reader(write_matrix_csv(M, tmp_path / "m.csv").open()))
    assert rows[0] == ["row", *LABELS]
    assert [r[0] for r in rows[1:]] == list(LABELS)
    np.testing.assert_array_equal(np.array([r[1:] for r in rows[1:]], dtype=float), M)
