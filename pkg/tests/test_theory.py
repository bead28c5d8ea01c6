import math

import numpy as np
import pytest

from randpursuit.metric import PDMatrix
from randpursuit.theory import (
    RheState,
    condition_transfer_bound,
    convex_gap_bound,
    rate_bound_relaxed,
    rate_bound_uniform,
    rate_factor_at,
    rhe_constants,
    rhe_diagonalization,
    rhe_exact_expectation,
    rhe_markov_bound,
    rhe_recurrence_matrix,
)


def two_level_diag(n, ell, i):
    return np.diag(np.r_[np.full(i, float(ell)), np.ones(n - i)])


def test_rhe_constants_n2():
    k = rhe_constants(2)
    assert k.omega == pytest.approx(math.sqrt(17.0), rel=1e-15)
    assert k.lambda2 == pytest.approx((7.0 + math.sqrt(17.0)) / 16.0, rel=1e-15)
    assert k.lambda2 == pytest.approx(0.69519, abs=5e-6)
    assert k.lambda2 <= 1.0 - 2.0 / 8.0
    assert k.eta == pytest.approx(1.0 / 8.0)


def test_rhe_constants_invariants():
    for n in range(2, 101):
        k = rhe_constants(n)
        assert k.omega ** 2 == pytest.approx(4.0 * n * n + 4.0 * n - 7.0, rel=1e-12)
        assert k.lambda1 < k.lambda2 <= 1.0 - 2.0 / (n * (n + 2)) + 1e-15
    # slow mode gap scales like 1/n
    k100 = rhe_constants(100)
    assert 0.005 < 1.0 - k100.lambda1 < 0.05


def test_rhe_constants_rejects_n1():
    with pytest.raises(ValueError):
        rhe_constants(1)


def test_recurrence_eigenvalues_match_constants():
    # lambda1/lambda2 formulas against a plain eigensolve of C(n)
    for n in (2, 3, 7, 25, 64):
        k = rhe_constants(n)
        eigs = np.sort(np.linalg.eigvals(rhe_recurrence_matrix(n)).real)
        assert eigs[0] == pytest.approx(k.lambda1, rel=1e-12)
        assert eigs[1] == pytest.approx(k.lambda2, rel=1e-12)


def test_diagonalization_reconstructs_recurrence():
    for n in range(2, 101):
        p, d, q = rhe_diagonalization(n)
        assert np.allclose(p @ d @ q, rhe_recurrence_matrix(n), atol=1e-12)


def test_exact_expectation_identity_at_zero_steps():
    s = rhe_exact_expectation(RheState(3.0, 1.5), 5, 0)
    assert s.frob_sq == pytest.approx(3.0, rel=1e-15)
    assert s.trace_sq == pytest.approx(1.5, rel=1e-15)
    assert not s.underflow


def test_exact_expectation_one_step_hand_value():
    # n = 2, X0 = diag(1, -1): frob = 2, trace = 0; one update gives
    # frob' = (1 - 2/8)*2 = 1.5 and trace' = (2/8)*2 = 0.5
    s = rhe_exact_expectation(RheState(2.0, 0.0), 2, 1)
    assert s.frob_sq == pytest.approx(1.5, rel=1e-12)
    assert s.trace_sq == pytest.approx(0.5, rel=1e-12)


def test_exact_expectation_matches_recurrence_iteration():
    for n in (2, 5, 10, 50):
        c = rhe_recurrence_matrix(n)
        for big_n in (1, 10, 100, 1000):
            state = np.array([2.7, 1.3])
            for _ in range(big_n):
                state = c @ state
            got = rhe_exact_expectation(RheState(2.7, 1.3), n, big_n)
            assert got.frob_sq == pytest.approx(state[0], rel=1e-10)
            assert got.trace_sq == pytest.approx(state[1], rel=1e-10)


def test_exact_expectation_one_step_rate_envelope():
    # frob never beats the one-step rate, with near-equality for traceless X0
    n = 6
    r = 1.0 - 2.0 / (n * (n + 2))
    for big_n in (1, 5, 20, 100):
        s = rhe_exact_expectation(RheState(1.0, 0.0), n, big_n)
        assert s.frob_sq <= r ** big_n * (1.0 + 1e-12)
    s1 = rhe_exact_expectation(RheState(1.0, 0.0), n, 1)
    assert s1.frob_sq == pytest.approx(r, rel=1e-12)


def test_exact_expectation_underflow_flag():
    s = rhe_exact_expectation(RheState(1.0, 0.5), 3, 10_000_000)
    assert s.underflow
    assert s.frob_sq == 0.0


def test_exact_expectation_rejects_negative():
    with pytest.raises(ValueError):
        RheState(-1.0, 0.0)
    with pytest.raises(ValueError):
        rhe_exact_expectation(RheState(1.0, 0.0), 4, -1)


def test_markov_bound_limits():
    n, frob0 = 10, 4.0
    r = 1.0 - 2.0 / (n * (n + 2))
    bound, prob = rhe_markov_bound(n, 500, 0.999999, frob0)
    # b -> 1 means j -> 0: nearly the full-rate decay is certified
    assert bound == pytest.approx(r ** 500 * frob0, rel=1e-3)
    assert prob == pytest.approx(1e-6, abs=1e-9)
    j = math.log(0.25) / math.log(r)
    bound_j, _ = rhe_markov_bound(n, int(round(j)), 0.25, frob0)
    assert bound_j == pytest.approx(frob0, rel=1e-2)


def test_markov_bound_dominates_expectation():
    for n in (3, 8, 20):
        for big_n in (10, 200, 1500):
            exact = rhe_exact_expectation(RheState(1.0, 0.4), n, big_n)
            bound, _ = rhe_markov_bound(n, big_n, 0.1, 1.0)
            assert bound >= exact.frob_sq


def test_markov_bound_rejects_bad_b():
    with pytest.raises(ValueError):
        rhe_markov_bound(5, 10, 0.0, 1.0)
    with pytest.raises(ValueError):
        rhe_markov_bound(5, 10, 1.0, 1.0)


def test_condition_transfer_examples():
    assert condition_transfer_bound(1.0, 2.0, 0.0, 3.0) == pytest.approx(3.0)
    # c = 1/2 halves the denominator: bound is 2d + 1
    assert condition_transfer_bound(1.0, 2.0, 0.5, 3.0) == pytest.approx(7.0)
    with pytest.raises(ValueError):
        condition_transfer_bound(1.0, 2.0, 1.0, 3.0)
    with pytest.raises(ValueError):
        condition_transfer_bound(2.0, 1.0, 0.5, 3.0)
    with pytest.raises(ValueError):
        condition_transfer_bound(1.0, 2.0, 0.5, 0.5)


def test_condition_transfer_random_audit():
    # premise-satisfying random triples never violate the bound
    rng = np.random.default_rng(0)
    n = 6
    for _ in range(100):
        a, b = 1.0, rng.uniform(2.0, 5.0)
        c = rng.uniform(0.05, 0.9)
        margin = a * a * c / b
        qh, _ = np.linalg.qr(rng.standard_normal((n, n)))
        h = qh @ np.diag(rng.uniform(a, b, n)) @ qh.T
        qx, _ = np.linalg.qr(rng.standard_normal((n, n)))
        x = qx @ np.diag(rng.uniform(a + margin, b - margin, n)) @ qx.T
        e = rng.standard_normal((n, n))
        e = (e + e.T) / 2.0
        e *= margin * rng.uniform(0.5, 1.0) / np.linalg.norm(e)
        bmat = x + e
        hx = np.linalg.eigvals(np.linalg.solve(h, x)).real
        d = hx.max() / hx.min()
        hb = np.linalg.eigvals(np.linalg.solve(h, bmat)).real
        measured = hb.max() / hb.min()
        assert measured <= condition_transfer_bound(a, b, c, max(d, 1.0)) + 1e-12


def test_rate_uniform_matched_metric():
    # Sigma = L^-1 with M = L: kT(I, ...) collapses and the factor is 1 - mu/n
    n = 7
    lmat = PDMatrix(np.diag(np.linspace(1.0, 9.0, n)))
    sigma = PDMatrix(lmat.inv)
    eye = PDMatrix.identity(n)
    got = rate_bound_uniform(lmat, sigma, eye, 1.0)
    assert got == pytest.approx(1.0 - 1.0 / n, rel=1e-12)


def test_rate_uniform_two_level_value():
    # steep-then-flat diagonal Hessian: the gap matches the classic
    # 1/(i*ell + n - i) estimate within a few percent
    n, ell, i = 50, 1000.0, 25
    a = PDMatrix(two_level_diag(n, ell, i))
    eye = PDMatrix.identity(n)
    rho = rate_bound_uniform(a, eye, a, 1.0)
    gap = 1.0 - rho
    assert abs(gap - 1.0 / 25025.0) <= 0.05 / 25025.0
    # and against the trace form directly: gap = (n+2)/(n(Tr + 2))
    assert gap == pytest.approx(52.0 / (50.0 * 25027.0), rel=1e-12)


def test_rate_uniform_trace_bound():
    # with unit smallest eigenvalue (the g-family normalization) the factor
    # never beats 1 - lmin/Tr
    rng = np.random.default_rng(1)
    for _ in range(50):
        n = 5
        q, _ = np.linalg.qr(rng.standard_normal((n, n)))
        eigs = np.r_[1.0, rng.uniform(1.0, 20.0, n - 1)]
        a = PDMatrix(q @ np.diag(eigs) @ q.T)
        rho = rate_bound_uniform(a, PDMatrix.identity(n), a, 1.0)
        w = np.linalg.eigvalsh(a.a)
        assert 0.0 < rho < 1.0
        assert rho <= 1.0 - w[0] / np.trace(a.a) + 1e-12


def test_rate_factor_at_matched_metric():
    n = 6
    lmat = PDMatrix(np.diag(np.linspace(2.0, 4.0, n)))
    sigma = PDMatrix(lmat.inv)
    grad = np.ones(n)
    assert rate_factor_at(lmat, sigma, grad, 0.5) == pytest.approx(
        1.0 - 0.5 / n, rel=1e-12)


def test_rate_factor_never_beats_uniform():
    rng = np.random.default_rng(2)
    n = 4
    eye = PDMatrix.identity(n)
    for _ in range(100):
        q, _ = np.linalg.qr(rng.standard_normal((n, n)))
        lmat = PDMatrix(q @ np.diag(rng.uniform(0.5, 10.0, n)) @ q.T)
        qs, _ = np.linalg.qr(rng.standard_normal((n, n)))
        sigma = PDMatrix(qs @ np.diag(rng.uniform(0.5, 3.0, n)) @ qs.T)
        grad = rng.standard_normal(n)
        exact = rate_factor_at(lmat, sigma, grad, 0.7)
        uniform = rate_bound_uniform(lmat, sigma, eye, 0.7)
        assert exact <= uniform + 1e-12


def test_rate_factor_gradient_alignment():
    # gradients along the flat eigendirection of L see the slower factor
    n = 5
    lmat = PDMatrix(np.diag(np.r_[100.0, np.ones(n - 1)]))
    eye = PDMatrix.identity(n)
    steep = np.r_[1.0, np.zeros(n - 1)]
    flat = np.r_[np.zeros(n - 1), 1.0]
    f_steep = rate_factor_at(lmat, eye, steep, 1.0)
    f_flat = rate_factor_at(lmat, eye, flat, 1.0)
    assert f_flat > f_steep


def test_rate_relaxed_identity_value():
    n = 8
    eye = PDMatrix.identity(n)
    got = rate_bound_relaxed(eye, eye, eye, 1.0)
    assert got == pytest.approx(1.0 - 1.0 / (4.0 * n), rel=1e-12)


def test_rate_relaxed_quarter_slowdown():
    # with the same effective condition factor the relaxed gap is a quarter
    # of the uniform gap
    n = 5
    a = PDMatrix(np.diag(np.linspace(1.0, 6.0, n)))
    eye = PDMatrix.identity(n)
    uniform_gap = 1.0 - rate_bound_uniform(a, eye, eye, 1.0)
    relaxed_gap = 1.0 - rate_bound_relaxed(a, eye, similar_product_identity(a), 1.0)
    assert relaxed_gap == pytest.approx(uniform_gap / 4.0, rel=1e-12)


def similar_product_identity(l):
    # M = L makes M L^-1 = I, aligning the relaxed factor's last argument
    # with the uniform factor's identity rescaling
    return l


def test_rate_relaxed_in_unit_interval():
    rng = np.random.default_rng(3)
    for _ in range(50):
        n = 4
        q, _ = np.linalg.qr(rng.standard_normal((n, n)))
        l = PDMatrix(q @ np.diag(rng.uniform(0.5, 10.0, n)) @ q.T)
        qs, _ = np.linalg.qr(rng.standard_normal((n, n)))
        s = PDMatrix(qs @ np.diag(rng.uniform(0.5, 4.0, n)) @ qs.T)
        qm, _ = np.linalg.qr(rng.standard_normal((n, n)))
        m = PDMatrix(qm @ np.diag(rng.uniform(0.5, 2.0, n)) @ qm.T)
        val = rate_bound_relaxed(l, s, m, 0.9)
        assert 0.0 < val < 1.0


def test_convex_gap_bound_basics():
    n = 10
    eye = PDMatrix.identity(n)
    q0 = convex_gap_bound(1.0, eye, eye, 1.0, n, 0.5, 0)
    assert q0 == pytest.approx(max(2.0 * n * 1.0, 0.5))
    # once the kT term dominates, doubling N halves the bound
    b1 = convex_gap_bound(1.0, eye, eye, 1.0, n, 0.5, 99)
    b2 = convex_gap_bound(1.0, eye, eye, 1.0, n, 0.5, 199)
    assert b1 == pytest.approx(2.0 * b2, rel=1e-12)


def test_convex_gap_bound_validates():
    eye = PDMatrix.identity(3)
    with pytest.raises(ValueError):
        convex_gap_bound(0.0, eye, eye, 1.0, 3, 0.0, 10)
    with pytest.raises(ValueError):
        convex_gap_bound(1.0, eye, eye, 1.0, 3, -0.1, 10)
    with pytest.raises(ValueError):
        convex_gap_bound(1.0, eye, eye, 2.0, 3, 0.0, 10)


def test_factor_functions_validate_mu():
    eye = PDMatrix.identity(3)
    with pytest.raises(ValueError):
        rate_bound_uniform(eye, eye, eye, 0.0)
    with pytest.raises(ValueError):
        rate_factor_at(eye, eye, np.ones(3), 1.5)
    with pytest.raises(ValueError):
        rate_factor_at(eye, eye, np.zeros(3), 0.5)
