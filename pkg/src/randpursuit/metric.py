"""Symmetric and positive definite matrix algebra.

Quadratic norms, extreme eigenvalues of matrices and matrix pencils, and the
condition-like factors that govern the per-step progress of random pursuit:
the direction-alignment ratio, its exact per-gradient condition factor, and
the trace-based uniform bound.  Dimensions stay small (n <= a few hundred),
so everything is dense double precision.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular

# Absolute tolerance for the scalar rank-one PD criterion; the relative pivot
# tolerance of pd_check uses the same constant scaled by the largest diagonal
# entry.
PD_TOL = 1e-12


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Raised when a positive definite matrix was required but not supplied."""


def _as_array(a):
    """Accept SymmetricMatrix / PDMatrix / array-like; return an ndarray."""
    if isinstance(a, PDMatrix):
        return a.base.a
    if isinstance(a, SymmetricMatrix):
        return a.a
    return np.asarray(a, dtype=float)


class SymmetricMatrix:
    """Dense symmetric matrix; symmetry enforced exactly at construction."""

    def __init__(self, entries):
        a = np.array(entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        if not np.allclose(a, a.T, rtol=0.0, atol=1e-8 * max(1.0, np.abs(a).max())):
            raise ValueError("matrix is not symmetric within tolerance")
        # (a + a.T)/2 is exactly symmetric in floating point.
        self.a = (a + a.T) / 2.0
        self.a.setflags(write=False)

    @property
    def n(self):
        return self.a.shape[0]

    def __repr__(self):
        return f"SymmetricMatrix(n={self.n})"


class PDMatrix:
    """Symmetric positive definite matrix with eagerly cached factorizations.

    `factor` is the lower Cholesky factor, `inv` the dense inverse.  Both are
    computed at construction so instances are immutable and safe to share.
    """

    def __init__(self, entries):
        self.base = entries if isinstance(entries, SymmetricMatrix) else SymmetricMatrix(entries)
        try:
            self.factor = np.linalg.cholesky(self.base.a)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefiniteError(str(exc)) from exc
        li = solve_triangular(self.factor, np.eye(self.n), lower=True)
        self.inv = li.T @ li
        self.factor.setflags(write=False)
        self.inv.setflags(write=False)

    @classmethod
    def identity(cls, n):
        return cls(np.eye(n))

    @classmethod
    def from_diag(cls, d):
        return cls(np.diag(np.asarray(d, dtype=float)))

    @property
    def a(self):
        return self.base.a

    @property
    def n(self):
        return self.base.n

    def solve(self, y):
        """Return base^-1 y via the cached Cholesky factor."""
        z = solve_triangular(self.factor, y, lower=True)
        return solve_triangular(self.factor.T, z, lower=False)

    def sqrt(self):
        """Symmetric square root via eigendecomposition (n is small)."""
        w, v = np.linalg.eigh(self.a)
        return (v * np.sqrt(np.maximum(w, 0.0))) @ v.T

    def __repr__(self):
        return f"PDMatrix(n={self.n})"


def quad_norm_sq(x, a):
    """The squared quadratic norm x^T A x."""
    x = np.asarray(x, dtype=float)
    m = _as_array(a)
    if x.shape[0] != m.shape[0]:
        raise ValueError(f"dimension mismatch: x has {x.shape[0]}, matrix has {m.shape[0]}")
    return float(x @ (m @ x))


def eig_extremes(a):
    """(smallest, largest) eigenvalue of a symmetric matrix."""
    w = np.linalg.eigvalsh(_as_array(a))
    return float(w[0]), float(w[-1])


def generalized_eig_extremes(a, b):
    """Extreme eigenvalues of B^-1 A for symmetric A and PD B.

    Solved on the symmetric similar form L^-1 A L^-T (with B = L L^T), which
    has the same spectrum; the non-symmetric product is never eigensolved.
    """
    if not isinstance(b, PDMatrix):
        b = PDMatrix(b)
    am = _as_array(a)
    if am.shape[0] != b.n:
        raise ValueError("dimension mismatch between pencil matrices")
    w = solve_triangular(b.factor, am, lower=True)
    s = solve_triangular(b.factor, w.T, lower=True)
    vals = np.linalg.eigvalsh((s + s.T) / 2.0)
    return float(vals[0]), float(vals[-1])


def similar_product(a, b):
    """A^{1/2} B A^{1/2} for PD A and symmetric B: symmetric, similar to AB.

    Use this to hand products like L*Sigma to condition_trace without
    eigensolving the non-symmetric product directly.
    """
    if not isinstance(a, PDMatrix):
        a = PDMatrix(a)
    r = a.sqrt()
    return SymmetricMatrix(r @ _as_array(b) @ r)


def trace_product(a, b):
    """Tr[AB] for symmetric A, B without forming the product."""
    return float(np.sum(_as_array(a) * _as_array(b)))


def alignment_factor(a, b, y):
    """Ratio of |y|^2 in the (ABA)^-1 metric to |y|^2 in the A^-1 metric.

    Measures how well the vector y (a gradient, in the pursuit analysis)
    aligns with the sampling metric; always in (0, 1/lambda_min(AB)].
    Computed as w^T B^-1 w / y^T w with w = A^-1 y, since
    (ABA)^-1 = A^-1 B^-1 A^-1.
    """
    if not isinstance(a, PDMatrix):
        a = PDMatrix(a)
    if not isinstance(b, PDMatrix):
        b = PDMatrix(b)
    y = np.asarray(y, dtype=float)
    if not np.any(y):
        raise ValueError("alignment_factor undefined for the zero vector")
    w = a.solve(y)
    return float(w @ b.solve(w)) / float(y @ w)


def condition_exact(a, b, c, y):
    """Exact per-gradient condition factor (Tr[AB]*align + 2) / (lmin(C)(n+2)).

    The expected single-step progress of random pursuit along directions drawn
    with covariance B on a function with curvature bound A is inversely
    proportional to this factor; C rescales by the strong-convexity metric.
    """
    if not isinstance(a, PDMatrix):
        a = PDMatrix(a)
    n = a.n
    tr = trace_product(a, b)
    lmin_c = eig_extremes(c)[0]
    return (tr * alignment_factor(a, b, y) + 2.0) / (lmin_c * (n + 2))


def condition_trace(d, c=None):
    """Uniform condition factor (Tr[D]/lmin(D) + 2) / (lmin(C)(n+2)).

    Upper bound of condition_exact over all gradients; with C omitted the
    identity is used.  D must have a PD spectrum; pass similar_product(A, B)
    when the product of interest is non-symmetric.
    """
    dm = _as_array(d)
    w = np.linalg.eigvalsh(dm)
    if w[0] <= 0.0:
        raise NotPositiveDefiniteError("condition_trace needs a positive definite spectrum")
    n = dm.shape[0]
    lmin_c = 1.0 if c is None else eig_extremes(c)[0]
    return (np.trace(dm) / w[0] + 2.0) / (lmin_c * (n + 2))


def pd_check(a):
    """True iff a symmetric factorization with strictly positive pivots succeeds.

    Pivot tolerance: PD_TOL times the largest diagonal entry.  Runs an
    explicit Cholesky loop so the pivot test matches the stated contract.
    """
    m = np.array(_as_array(a), dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or not np.isfinite(m).all():
        return False
    n = m.shape[0]
    tol = PD_TOL * max(float(m.diagonal().max()), 0.0)
    low = np.zeros_like(m)
    for k in range(n):
        pivot = m[k, k] - low[k, :k] @ low[k, :k]
        if not pivot > tol:
            return False
        low[k, k] = np.sqrt(pivot)
        if k + 1 < n:
            low[k + 1:, k] = (m[k + 1:, k] - low[k + 1:, :k] @ low[k, :k]) / low[k, k]
    return True


def rank1_pd_criterion(b_inv_quad, t):
    """Scalar test: does B + t*uu^T stay PD given u^T B^-1 u for PD B?

    True iff 1 + t * b_inv_quad > PD_TOL.  Agrees with pd_check on the full
    matrix whenever the margin |1 + t*b_inv_quad| exceeds 1e-8.
    """
    if not b_inv_quad > 0.0:
        raise ValueError("b_inv_quad must be positive (B is PD)")
    return bool(1.0 + t * b_inv_quad > PD_TOL)
