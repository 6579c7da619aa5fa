import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dbvp.exceptions import GridError, OutOfRegimeError
from dbvp.greens import (
    EXPONENTIAL,
    OSCILLATORY,
    POLYNOMIAL,
    build_kernel,
    check_maximum_principle,
    classify,
    direct_column,
    homogeneous_factor,
    solve_via_green,
    verify_kernel,
    verify_negativity,
)
from dbvp.linear import LinearProblem, first_eigenvalue, solve_linear

from oracles import literal_kernel, literal_psi


def lambdas(T):
    lam1 = first_eigenvalue(T)
    return [-5.0, -1.0, -1e-6, 0.0, 0.3 * lam1, 0.9 * lam1]


def test_classification():
    assert classify(0.0) == POLYNOMIAL
    assert classify(5e-13) == POLYNOMIAL
    assert classify(0.01) == OSCILLATORY
    assert classify(-1e-6) == EXPONENTIAL


def test_polynomial_kernel_T3():
    # G(t,s) = t(s-4)/4 for t <= s, worked by hand
    K = build_kernel(0.0, 3)
    expected = [[-0.75, -0.5, -0.25], [-0.5, -1.0, -0.5], [-0.25, -0.5, -0.75]]
    np.testing.assert_allclose(K.interior, expected, atol=1e-15)
    assert K.interior.max() == -0.25
    np.testing.assert_array_equal(K.G[0], 0.0)
    np.testing.assert_array_equal(K.G[-1], 0.0)


def test_psi_small_cases():
    np.testing.assert_allclose(homogeneous_factor(0.0, 3).psi.values, [0, 0.25, 0.5, 0.75, 1.0])
    # lambda = -1: alpha, beta roots of r^2 - 3r + 1; hand value 1/21 at t = 1
    psi = homogeneous_factor(-1.0, 3).psi
    assert psi[1] == pytest.approx(1 / 21, abs=1e-12)
    assert psi[0] == 0.0
    assert psi[4] == pytest.approx(1.0, abs=1e-15)


def test_case_parameters():
    K = build_kernel(-1.0, 3)
    assert K.case == EXPONENTIAL
    assert K.alpha == pytest.approx((3 + math.sqrt(5)) / 2)
    assert K.alpha * K.beta == pytest.approx(1.0)
    K = build_kernel(0.05, 10)
    assert K.case == OSCILLATORY
    assert K.theta == pytest.approx(math.acos(1 - 0.05 / 2), rel=1e-12)


@pytest.mark.parametrize("T", [1, 2, 3, 10])
def test_kernel_matches_literal_branch_formulas(T):
    for lam in lambdas(T):
        K = build_kernel(lam, T)
        # the literal t > s branch adds the Cauchy term to a nearly opposite
        # number, so only the t <= s branch is a trustworthy reference
        upper = np.arange(T + 2)[:, None] <= np.arange(1, T + 1)[None, :]
        lit = literal_kernel(lam, T)
        np.testing.assert_allclose(K.G[upper], lit[upper], rtol=1e-10, atol=1e-13)
        np.testing.assert_allclose(K.psi.psi.values, literal_psi(lam, T), atol=1e-10)


def test_kernel_columns_match_direct_solves():
    for T in (1, 5, 50):
        for lam in lambdas(T):
            K = build_kernel(lam, T)
            for s in (1, (T + 1) // 2, T):
                np.testing.assert_allclose(K.G[:, s - 1], direct_column(lam, T, s), atol=1e-9)


def test_out_of_regime_is_rejected():
    lam1 = first_eigenvalue(5)
    for lam in (lam1, 1.5 * lam1, 3.0, math.inf, math.nan):
        with pytest.raises(OutOfRegimeError):
            build_kernel(lam, 5)
    with pytest.raises(GridError):
        build_kernel(0.0, 0)


def test_close_to_first_eigenvalue_still_builds():
    lam1 = first_eigenvalue(10)
    K = build_kernel(lam1 - 1e-6, 10)
    assert all(verify_kernel(K))


def test_extreme_negative_shift_does_not_overflow():
    K = build_kernel(-1e6, 200)
    assert np.all(np.isfinite(K.G))
    # far from the diagonal the entries underflow to -0.0
    assert np.all(K.interior <= 0) and np.all(np.diag(K.interior) < 0)
    _, sym, imp = verify_kernel(K)
    assert sym and imp


def test_certification_reports_violations():
    K = build_kernel(-1.0, 4)
    ok = verify_negativity(K)
    assert ok and ok.value < 0
    G = K.G.copy()
    G[2, 1] = 1e-3
    broken = type(K)(K.T, K.lam, K.case, G, K.psi, K.theta, K.alpha, K.beta)
    bad = verify_negativity(broken)
    assert not bad
    assert (2, 2) in [tuple(v) for v in bad.violations]


def test_solve_via_green_matches_direct():
    rng = np.random.default_rng(11)
    for T in (1, 2, 3, 10, 50):
        for lam in lambdas(T):
            K = build_kernel(lam, T)
            for _ in range(5):
                h, B = rng.uniform(-1, 1, T), rng.uniform(-1, 1)
                yg = solve_via_green(K, h, B)
                yd = solve_linear(LinearProblem(T, lam, h, B))
                assert yg.sup_distance(yd) < 1e-9


def test_maximum_principle_holds_in_regime():
    for T in (1, 3, 20):
        for lam in lambdas(T):
            rep = check_maximum_principle(lam, T, trials=50, seed=1)
            assert rep, rep.as_dict()
            assert rep.details["path_disagreement"] < 1e-9


def test_maximum_principle_fails_beyond_first_eigenvalue():
    # between lambda_1 and lambda_2 a positive forcing can give a sign change
    T = 10
    lam = 0.5 * (first_eigenvalue(T) + 2 - 2 * math.cos(2 * math.pi / (T + 1)))
    h = np.ones(T)
    y = solve_linear(LinearProblem(T, lam, h, 0.0))
    assert y.values.min() < 0


@settings(max_examples=60, deadline=None)
@given(T=st.integers(1, 40), frac=st.floats(-20.0, 0.99))
def test_kernel_properties_random(T, frac):
    lam = frac * first_eigenvalue(T)
    K = build_kernel(lam, T)
    neg, sym, imp = verify_kernel(K)
    assert neg and sym and imp
    assert homogeneous_factor(lam, T).residual() < 1e-10
