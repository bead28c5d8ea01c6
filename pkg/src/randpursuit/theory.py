"""Closed-form convergence rates and the exact error dynamics of the
randomized Hessian estimator.

Two groups of results:

* geometric decay factors and sublinear bounds for the expected optimality
  gap of random pursuit (uniform, per-gradient, and relaxed line-search
  variants, plus the convex O(1/N) bound);
* the exact evolution of E|B_k - H|_F^2 and E Tr[B_k - H]^2 under rank-one
  curvature updates: a 2x2 linear recurrence, its explicit diagonalization,
  the resulting closed form, and a Markov tail bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .metric import (
    PDMatrix,
    condition_exact,
    condition_trace,
    generalized_eig_extremes,
    similar_product,
)


@dataclass
class RheSpectralConstants:
    """Eigen-structure of the estimator-error recurrence in dimension n."""

    n: int
    omega: float
    lambda1: float
    lambda2: float
    eta: float


@dataclass
class RheState:
    """Second moments of the estimation error X = B - H.

    frob_sq = E|X|_F^2, trace_sq = E Tr[X]^2.  underflow flags that a
    closed-form power underflowed to zero (huge N).
    """

    frob_sq: float
    trace_sq: float
    underflow: bool = False

    def __post_init__(self):
        if self.frob_sq < 0.0 or self.trace_sq < 0.0:
            raise ValueError("second moments must be non-negative")


def rhe_constants(n):
    """Spectral constants of the 2x2 error recurrence.

    Requires n >= 2: at n = 1 the estimator learns in a single step and the
    recurrence degenerates, so it is rejected rather than special-cased.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    omega = math.sqrt(4.0 * n * n + 4.0 * n - 7.0)
    denom = 2.0 * n * (n + 2)
    lambda1 = (2.0 * n * n + 2.0 * n - 5.0 - omega) / denom
    lambda2 = (2.0 * n * n + 2.0 * n - 5.0 + omega) / denom
    return RheSpectralConstants(n=int(n), omega=omega, lambda1=lambda1,
                                lambda2=lambda2, eta=1.0 / (n * (n + 2)))


def rhe_recurrence_matrix(n):
    """The 2x2 matrix C(n) mapping (frob_sq, trace_sq) across one update."""
    eta = rhe_constants(n).eta
    return np.array([
        [1.0 - 2.0 * eta, -eta],
        [2.0 * eta, 1.0 - (2.0 * n + 3.0) * eta],
    ])


def rhe_diagonalization(n):
    """Explicit factors (P, D, Q) with P @ D @ Q == rhe_recurrence_matrix(n)."""
    k = rhe_constants(n)
    om = k.omega
    p = np.array([
        [(2.0 * n + 1.0 - om) / (4.0 * om), (2.0 * n + 1.0 + om) / (4.0 * om)],
        [1.0 / om, 1.0 / om],
    ])
    d = np.diag([k.lambda1, k.lambda2])
    q = np.array([
        [-2.0, (om + 2.0 * n + 1.0) / 2.0],
        [2.0, (om - 2.0 * n - 1.0) / 2.0],
    ])
    return p, d, q


def _power(lam, k):
    """lam**k via log-space; underflow reports (0.0, True) instead of raising."""
    if k == 0:
        return 1.0, False
    if lam <= 0.0:
        return 0.0, True
    log_val = k * math.log(lam)
    if log_val < -745.0:          # exp() underflows to 0 below this
        return 0.0, True
    return math.exp(log_val), False


def rhe_exact_expectation(state0, n, big_n):
    """Exact (E|X_N|_F^2, E Tr[X_N]^2) after N rank-one updates.

    Closed form in the recurrence eigenvalues; coincides with iterating
    rhe_recurrence_matrix(n) N times on the initial state.
    """
    if big_n < 0:
        raise ValueError("N must be >= 0")
    k = rhe_constants(n)
    p1, u1 = _power(k.lambda1, big_n)
    p2, u2 = _power(k.lambda2, big_n)
    xi1 = p1 + p2
    xi2 = p1 - p2
    f0, t0 = state0.frob_sq, state0.trace_sq
    om = k.omega
    frob = xi1 * f0 / 2.0 - xi2 * ((2.0 * n + 1.0) * f0 / (2.0 * om) - t0 / om)
    trace = xi1 * t0 / 2.0 - xi2 * (2.0 * f0 / om - (2.0 * n + 1.0) * t0 / (2.0 * om))
    return RheState(frob_sq=max(frob, 0.0), trace_sq=max(trace, 0.0),
                    underflow=u1 and u2)


def rhe_markov_bound(n, big_n, b, frob0):
    """High-probability bound on |X_N|_F^2 via Markov's inequality.

    Spends j steps of the one-step decay rate r = 1 - 2/(n(n+2)) on the
    failure probability (r^j = b) and certifies r^(N-j) * frob0 with
    probability at least 1 - b.
    """
    if not 0.0 < b < 1.0:
        raise ValueError("b must be in (0, 1)")
    r = 1.0 - 2.0 * rhe_constants(n).eta
    j = math.log(b) / math.log(r)
    bound = r ** (big_n - j) * frob0
    return bound, 1.0 - b


def condition_transfer_bound(a, b, c, d):
    """How close B tracks H in condition number, given B is Frobenius-close
    to an X whose pencil condition against H is at most d.

    Premises: spectra of the three matrices lie in [a, b] (0 < a <= b),
    |B - X|_F <= a^2 c / b with 0 <= c < 1, and kappa(H^-1 X) <= d with
    d >= 1.  Then kappa(H^-1 B) <= (d + c)/(1 - c).
    """
    if not 0.0 < a <= b:
        raise ValueError("need 0 < a <= b")
    if not 0.0 <= c < 1.0:
        raise ValueError("need 0 <= c < 1")
    if d < 1.0:
        raise ValueError("need d >= 1")
    return (d + c) / (1.0 - c)


def _as_pd(m):
    return m if isinstance(m, PDMatrix) else PDMatrix(m)


def rate_bound_uniform(l, sigma, m, mu, n=None):
    """Uniform geometric decay factor 1 - mu/(n * kT) of the expected gap.

    kT is the trace condition factor of the (symmetrized) product L*Sigma
    rescaled by the strong-convexity metric M; mu is the line-search relative
    accuracy.
    """
    if not 0.0 < mu <= 1.0:
        raise ValueError("mu must be in (0, 1]")
    l = _as_pd(l)
    if n is None:
        n = l.n
    elif n != l.n:
        raise ValueError("n disagrees with the matrix dimension")
    kt = condition_trace(similar_product(l, sigma), _as_pd(m))
    return 1.0 - mu / (n * kt)


def rate_factor_at(l, sigma, grad, mu, n=None):
    """Per-iterate decay factor 1 - mu/(n * kE) at a specific gradient.

    Uses the exact condition factor with identity rescaling; never larger
    than rate_bound_uniform at M = I.
    """
    grad = np.asarray(grad, dtype=float)
    if not np.any(grad):
        raise ValueError("gradient must be nonzero")
    if not 0.0 < mu <= 1.0:
        raise ValueError("mu must be in (0, 1]")
    l = _as_pd(l)
    if n is None:
        n = l.n
    ke = condition_exact(l, _as_pd(sigma), PDMatrix.identity(l.n), grad)
    return 1.0 - mu / (n * ke)


def rate_bound_relaxed(l, sigma, m, mu, n=None):
    """Decay factor 1 - mu/(4 n kT(L*Sigma, M*L^-1)) under the relaxed
    sufficient-decrease line-search condition (a quarter of the uniform rate).

    Only the smallest eigenvalue of M L^-1 enters; it equals the smallest
    generalized eigenvalue of the pencil (M, L), so no similar form of the
    product is materialized.
    """
    if not 0.0 < mu <= 1.0:
        raise ValueError("mu must be in (0, 1]")
    l = _as_pd(l)
    if n is None:
        n = l.n
    d = similar_product(l, sigma)
    w = np.linalg.eigvalsh(d.a)
    if w[0] <= 0.0:
        raise ValueError("L*Sigma must have a positive definite spectrum")
    lmin_ml = generalized_eig_extremes(_as_pd(m).base, l)[0]
    kt = (float(np.trace(d.a)) / w[0] + 2.0) / (lmin_ml * (n + 2))
    return 1.0 - mu / (4.0 * n * kt)


def convex_gap_bound(r, l, sigma, mu, n, f0_gap, big_n):
    """Sublinear bound Q/(N+1) on the expected gap for smooth convex f.

    Q = max(2 n R^2 kT(L*Sigma) / mu, f0_gap), with R bounding the iterate
    distance to a minimizer.
    """
    if r <= 0.0:
        raise ValueError("R must be positive")
    if f0_gap < 0.0:
        raise ValueError("f0_gap must be non-negative")
    if big_n < 0:
        raise ValueError("N must be >= 0")
    if not 0.0 < mu <= 1.0:
        raise ValueError("mu must be in (0, 1]")
    kt = condition_trace(similar_product(_as_pd(l), sigma))
    q = max(2.0 * n * r * r * kt / mu, f0_gap)
    return q / (big_n + 1.0)
