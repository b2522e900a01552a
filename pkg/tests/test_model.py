import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dosplatoon import (
    Gains,
    ParameterError,
    PerformanceSpec,
    PlatoonParams,
    build_closed_loop,
    build_error_matrix,
    check_performance,
    eigenvalues_3x3,
)


def test_params_validation():
    with pytest.raises(ParameterError):
        PlatoonParams(h=0.0, tau_d=0.1, Ts=0.05, m=10)
    with pytest.raises(ParameterError):
        PlatoonParams(h=0.7, tau_d=-0.1, Ts=0.05, m=10)
    with pytest.raises(ParameterError):
        PlatoonParams(h=0.7, tau_d=0.1, Ts=0.0, m=10)
    with pytest.raises(ParameterError):
        PlatoonParams(h=0.7, tau_d=0.1, Ts=0.05, m=0)


def test_spec_validation():
    with pytest.raises(ParameterError):
        PerformanceSpec(lambda_M=0.1, zeta_m=0.7)
    with pytest.raises(ParameterError):
        PerformanceSpec(lambda_M=-0.367, zeta_m=0.0)
    with pytest.raises(ParameterError):
        PerformanceSpec(lambda_M=-0.367, zeta_m=1.2)
    PerformanceSpec(lambda_M=-0.367, zeta_m=1.0)  # critically damped is fine


def test_gains_validation():
    with pytest.raises(ParameterError):
        Gains(kp=0.0, kd=0.7)
    with pytest.raises(ParameterError):
        Gains(kp=0.2, kd=-0.7)


def test_error_matrix_is_companion():
    g = Gains(kp=0.82, kd=2.6)
    A = build_error_matrix(g, 0.1)
    assert A.shape == (3, 3)
    np.testing.assert_allclose(A[0], [0.0, 1.0, 0.0])
    np.testing.assert_allclose(A[1], [0.0, 0.0, 1.0])
    np.testing.assert_allclose(A[2], [-8.2, -26.0, -10.0])
    with pytest.raises(ParameterError):
        build_error_matrix(g, 0.0)


def test_closed_loop_structure(params):
    g = Gains(kp=0.82, kd=2.6)
    clm = build_closed_loop(g, params)
    np.testing.assert_array_equal(clm.A_xx[:3, :3], clm.A_e)
    np.testing.assert_array_equal(clm.A_xx[3, :3], 0.0)
    np.testing.assert_array_equal(clm.A_xx[:3, 3], 0.0)
    assert clm.A_xx[3, 3] == -1.0 / params.h
    np.testing.assert_allclose(clm.A_xeta, [0.0, 0.0, -1.0 / params.tau_d, 0.0])
    np.testing.assert_allclose(clm.A_xomega, [0.0, 0.0, 0.0, 1.0 / params.h])
    np.testing.assert_allclose(clm.A_etax, [0.0, 0.0, 0.0, 1.0 / params.h])
    np.testing.assert_allclose(clm.C_omega, [g.kp, g.kd, 0.0, 1.0])


@settings(max_examples=200, deadline=None)
@given(
    kp=st.floats(0.01, 50.0),
    kd=st.floats(0.01, 50.0),
    tau_d=st.floats(0.02, 1.0),
)
def test_companion_eigenvalues_match_polynomial(kp, kd, tau_d):
    A = build_error_matrix(Gains(kp, kd), tau_d)
    eigs = eigenvalues_3x3(A)
    a, b, c = 1.0 / tau_d, kd / tau_d, kp / tau_d
    # every reported eigenvalue is a root of the characteristic cubic
    resid = np.abs(((eigs + a) * eigs + b) * eigs + c)
    scale = (1.0 + max(a, b, c)) ** 2
    assert np.max(resid) < 1e-7 * scale
    # Vieta cross-checks against the coefficients
    assert np.sum(eigs) == pytest.approx(-a, rel=1e-9, abs=1e-9 * scale)
    assert np.prod(eigs) == pytest.approx(-c, rel=1e-7, abs=1e-7 * scale)


@settings(max_examples=200, deadline=None)
@given(
    kp=st.floats(0.01, 50.0),
    kd=st.floats(0.01, 50.0),
    tau_d=st.floats(0.02, 1.0),
)
def test_eigenvalues_match_lapack(kp, kd, tau_d):
    A = build_error_matrix(Gains(kp, kd), tau_d)
    got = eigenvalues_3x3(A)
    ref = np.linalg.eigvals(A)
    ref = ref[np.lexsort((ref.imag, -ref.real))]
    scale = 1.0 + np.max(np.abs(ref))
    # near-repeated roots are ill-conditioned for both solvers, so the
    # pairing tolerance is loose; the residual comparison below is the
    # conditioning-independent check
    np.testing.assert_allclose(got, ref, atol=1e-3 * scale)
    a, b, c = 1.0 / tau_d, kd / tau_d, kp / tau_d

    def resid(roots):
        return np.max(np.abs(((roots + a) * roots + b) * roots + c))

    assert resid(got) <= 100.0 * resid(ref) + 1e-9 * (1.0 + max(a, b, c)) ** 2


def test_eigenvalues_ordering_and_conjugacy():
    A = build_error_matrix(Gains(0.82, 2.6), 0.1)
    eigs = eigenvalues_3x3(A)
    assert np.all(np.diff(eigs.real) <= 1e-12)
    complex_part = eigs[np.abs(eigs.imag) > 0]
    if complex_part.size:
        assert complex_part.size == 2
        assert complex_part[0] == np.conj(complex_part[1])


def test_eigenvalues_input_validation():
    with pytest.raises(ParameterError):
        eigenvalues_3x3(np.eye(4))


def test_check_performance_known_cases(perf):
    # dominant real eigenvalue pinned exactly at lambda_M, pair well damped
    lam = perf.lambda_M
    A_pass = np.diag([lam, 5 * lam, 6 * lam]).astype(float)
    assert check_performance(A_pass, perf)
    # dominant pole too slow
    A_slow = np.diag([lam + 0.1, 5 * lam, 6 * lam]).astype(float)
    assert not check_performance(A_slow, perf)
    # dominant pole faster than the target is also a failure: the check
    # pins the slowest pole at lambda_M, it does not just bound it
    A_fast = np.diag([2 * lam, 5 * lam, 6 * lam]).astype(float)
    assert not check_performance(A_fast, perf)


def test_check_performance_damping(perf):
    # complex pair with damping 0.5 < zeta_m = 0.7, dominant real at lambda_M
    lam = perf.lambda_M
    zeta, wn = 0.5, 4.0
    pair_re = -zeta * wn
    pair_im = wn * np.sqrt(1 - zeta**2)
    A = np.zeros((3, 3))
    A[0, 0] = lam
    A[1:, 1:] = [[pair_re, pair_im], [-pair_im, pair_re]]
    assert not check_performance(A, perf)
    # damping 0.9 passes
    zeta = 0.9
    A[1:, 1:] = [
        [-zeta * wn, wn * np.sqrt(1 - zeta**2)],
        [-wn * np.sqrt(1 - zeta**2), -zeta * wn],
    ]
    assert check_performance(A, perf)
