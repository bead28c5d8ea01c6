"""Randomized Hessian estimation by rank-one curvature updates.

The estimate B absorbs measured curvatures q = u^T H u along random unit
directions: B <- B + (q - u^T B u) uu^T, which leaves u^T B u = q exactly and
never increases |B - H|_F when q is a true curvature.  Because a single
update can destroy positive definiteness, the corrected scheme repairs the
proposal along the smallest eigenvector before applying it, and the store
scheme additionally replays remembered (direction, curvature) pairs at zero
evaluation cost.

The maintained inverse uses the rank-one inverse formula with periodic
re-factorization to bound drift.
"""

from __future__ import annotations

import logging

import numpy as np

from . import _kernels
from .metric import PD_TOL, _as_array
from .sampling import _gen, _unit_gaussian

log = logging.getLogger(__name__)

# Accepted rank-one updates require this scalar-criterion margin; marginal
# proposals route to the correction branch, which stays valid and merely
# costs two extra evaluations.  The public rank1_pd_criterion keeps PD_TOL.
ACCEPT_MARGIN = 1e-8
REFACTOR_EVERY = 50


class HessianEstimate:
    """Mutable estimate B with a maintained inverse and update bookkeeping.

    epoch counts rank-one updates ever applied; the inverse is re-derived
    from scratch every REFACTOR_EVERY updates (or immediately after a
    marginal update) so that |B B_inv - I| stays within 1e-8.
    """

    def __init__(self, b):
        arr = np.array(_as_array(b), dtype=float)
        self.b = (arr + arr.T) / 2.0
        self._chol = np.linalg.cholesky(self.b)   # validates PD
        li = np.linalg.inv(self._chol)
        self.b_inv = li.T @ li
        self.epoch = 0
        self._since_refactor = 0
        self._chol_stale = False

    @property
    def n(self):
        return self.b.shape[0]

    @property
    def chol(self):
        """Lower Cholesky factor of the current B (cached between updates)."""
        if self._chol_stale:
            self._chol = np.linalg.cholesky(self.b)
            self._chol_stale = False
        return self._chol

    def refactor(self):
        """Recompute the inverse from scratch; falls back to a dense inverse
        when B is not PD (possible under the plain scheme)."""
        try:
            self._chol = np.linalg.cholesky(self.b)
            self._chol_stale = False
            li = np.linalg.inv(self._chol)
            self.b_inv = li.T @ li
        except np.linalg.LinAlgError:
            self._chol_stale = True
            self.b_inv = np.linalg.inv(self.b)
            self.b_inv = (self.b_inv + self.b_inv.T) / 2.0
        self._since_refactor = 0

    def rank1(self, u, t):
        """Apply B += t uu^T, maintaining the inverse."""
        denom = 1.0 + t * float(u @ self.b_inv @ u)
        self.b += t * np.outer(u, u)
        self.epoch += 1
        self._since_refactor += 1
        self._chol_stale = True
        if abs(denom) > ACCEPT_MARGIN and self._since_refactor < REFACTOR_EVERY:
            w = self.b_inv @ u
            self.b_inv -= (t / denom) * np.outer(w, w)
        else:
            self.refactor()

    def snapshot(self):
        return (self.b.copy(), self.b_inv.copy(), self.epoch,
                self._since_refactor)

    def restore(self, snap):
        self.b, self.b_inv, self.epoch, self._since_refactor = snap
        self.b = self.b.copy()
        self.b_inv = self.b_inv.copy()
        self._chol_stale = True


class CurvatureStore:
    """Fixed-capacity ring buffer of (direction, curvature, stamp) samples."""

    def __init__(self, n, capacity=None):
        self.capacity = 2 * n * n if capacity is None else int(capacity)
        if self.capacity < 1:
            raise ValueError("capacity must be >= 1")
        self._dirs = np.zeros((self.capacity, n))
        self._curvs = np.zeros(self.capacity)
        self._stamps = np.zeros(self.capacity, dtype=np.int64)
        self._next = 0
        self.size = 0

    def add(self, u, q, stamp=0):
        """Insert a pair, evicting the oldest entry once at capacity."""
        i = self._next
        self._dirs[i] = u
        self._curvs[i] = q
        self._stamps[i] = stamp
        self._next = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def content(self):
        """(directions, curvatures) views of the occupied slots."""
        return self._dirs[:self.size], self._curvs[:self.size]

    def stamps(self):
        return self._stamps[:self.size]


def curvature_fd(f, x, u, eps, fx=None):
    """Directional curvature u^T H u by central second difference.

    (f(x + eps*u) - 2 f(x) + f(x - eps*u)) / eps^2; exact for quadratics at
    any eps.  Consumes 2 evaluations when fx is supplied.
    """
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    uv = u.u if hasattr(u, "u") else np.asarray(u, dtype=float)
    if fx is None:
        fx = f.value(x)
    fp = f.value(x + eps * uv)
    fm = f.value(x - eps * uv)
    val = (fp - 2.0 * fx + fm) / (eps * eps)
    if not np.isfinite(val):
        raise ValueError("curvature estimate is not finite")
    return val


def update_plain(est, u, q):
    """Raw interpolation update B += (q - u^T B u) uu^T; no PD guarantee."""
    uv = u.u if hasattr(u, "u") else np.asarray(u, dtype=float)
    if abs(np.linalg.norm(uv) - 1.0) > 1e-12:
        raise ValueError("update direction must have unit Euclidean norm")
    t = q - float(uv @ est.b @ uv)
    est.rank1(uv, t)
    return est


def smallest_eigvec(a):
    """(smallest eigenvalue, unit eigenvector) of a symmetric matrix."""
    w, v = np.linalg.eigh(_as_array(a))
    return float(w[0]), v[:, 0].copy()


def sherman_morrison_inverse(b_inv, u, t):
    """Inverse of B + t uu^T from the inverse of B.

    Requires the PD-criterion denominator 1 + t u^T B^-1 u to exceed PD_TOL;
    below that the caller must reject the update or re-factorize.
    """
    b_inv = np.asarray(b_inv, dtype=float)
    u = np.asarray(u, dtype=float)
    w = b_inv @ u
    denom = 1.0 + t * float(u @ w)
    if not denom > PD_TOL:
        raise ValueError("denominator below tolerance; update not accepted")
    return b_inv - (t / denom) * np.outer(w, w)


def _corr_step(f, x, est, eps, rng, fx=None):
    """One corrected update step.

    Returns (pairs, corrected, rejected): the (direction, curvature) pairs
    measured this step, whether the eigenvector repair ran, and whether the
    whole update had to be abandoned (non-quadratic objectives only).
    """
    gen = _gen(rng)
    u = _unit_gaussian(gen, est.n)
    q_u = curvature_fd(f, x, u, eps, fx=fx)
    t_u = q_u - float(u @ est.b @ u)
    denom_u = 1.0 + t_u * float(u @ est.b_inv @ u)
    if denom_u > ACCEPT_MARGIN:
        est.rank1(u, t_u)
        return [(u, q_u)], False, False

    # Proposal leaves the PD cone: repair along the bottom eigenvector of the
    # proposal T = B + t_u uu^T, then apply both rank-one terms (v first,
    # then u, so each intermediate matrix stays PD on quadratics).
    t_mat = est.b + t_u * np.outer(u, u)
    _, v = smallest_eigvec(t_mat)
    q_v = curvature_fd(f, x, v, eps, fx=fx)
    t_v = q_v - float(v @ t_mat @ v)
    snap = est.snapshot()
    denom_v = 1.0 + t_v * float(v @ est.b_inv @ v)
    if denom_v <= ACCEPT_MARGIN:
        log.warning("corrected update rejected: repair step not PD-acceptable")
        return [(u, q_u), (v, q_v)], True, True
    est.rank1(v, t_v)
    denom_u2 = 1.0 + t_u * float(u @ est.b_inv @ u)
    if denom_u2 <= ACCEPT_MARGIN:
        est.restore(snap)
        log.warning("corrected update rejected: still not PD after repair")
        return [(u, q_u), (v, q_v)], True, True
    est.rank1(u, t_u)
    return [(u, q_u), (v, q_v)], True, False


def update_corr(f, x, est, eps, rng, fx=None):
    """PD-preserving update: plain proposal, repaired along the smallest
    eigenvector when the proposal leaves the PD cone.

    Consumes 2 evaluations (4 when the repair branch runs).  On quadratic
    objectives every output is PD; otherwise an update that stays non-PD
    even after repair is rejected and B kept unchanged.
    """
    _corr_step(f, x, est, eps, rng, fx=fx)
    return est


def update_store(f, x, est, eps, reuse, m, store, rng, fx=None, stamp=0):
    """Corrected update plus memory: measured pairs go into the store, and
    when reuse is on, m randomized passes over the store replay every pair
    whose rank-one update keeps B positive definite.

    Replays cost zero function evaluations.
    """
    if m < 0:
        raise ValueError("m must be >= 0")
    pairs, _, rejected = _corr_step(f, x, est, eps, rng, fx=fx)
    if not rejected:
        for u, q in pairs:
            store.add(u, q, stamp=stamp)
    if reuse and m > 0 and store.size > 0:
        dirs, curvs = store.content()
        gen = _gen(rng)
        order = np.concatenate(
            [gen.permutation(store.size) for _ in range(m)]
        ).astype(np.int64)
        applied, since = _kernels.reuse_sweep(
            est.b, est.b_inv, dirs, curvs, order,
            ACCEPT_MARGIN, est._since_refactor, REFACTOR_EVERY,
        )
        est.epoch += applied
        est._since_refactor = since
        est._chol_stale = True
    return est


class PlainUpdateScheme:
    """Interlace raw interpolation updates (no PD guarantee)."""

    name = "plain"

    def __init__(self, eps):
        self.eps = eps

    def step(self, f, x, est, rng, iteration, fx=None):
        u = _unit_gaussian(_gen(rng), est.n)
        q = curvature_fd(f, x, u, self.eps, fx=fx)
        update_plain(est, u, q)


class CorrUpdateScheme:
    """Interlace corrected updates."""

    name = "corr"

    def __init__(self, eps):
        self.eps = eps

    def step(self, f, x, est, rng, iteration, fx=None):
        update_corr(f, x, est, self.eps, rng, fx=fx)


class StoreUpdateScheme:
    """Corrected updates with sample storage and periodic replay.

    Replay runs every `reuse_every`-th iteration once the iteration count
    exceeds `reuse_start` (defaults: n and n^2).
    """

    name = "store"

    def __init__(self, eps, reuse=True, m=10, capacity=None,
                 reuse_every=None, reuse_start=None):
        self.eps = eps
        self.reuse = reuse
        self.m = m
        self.capacity = capacity
        self.reuse_every = reuse_every
        self.reuse_start = reuse_start
        self.store = None

    def step(self, f, x, est, rng, iteration, fx=None):
        n = est.n
        if self.store is None:
            self.store = CurvatureStore(n, capacity=self.capacity)
        every = self.reuse_every if self.reuse_every is not None else n
        start = self.reuse_start if self.reuse_start is not None else n * n
        due = (self.reuse and iteration > start and iteration % every == 0)
        update_store(f, x, est, self.eps, due, self.m, self.store, rng,
                     fx=fx, stamp=iteration)


def make_update_scheme(name, eps, reuse=True, m=10, capacity=None,
                       reuse_every=None, reuse_start=None):
    """Factory used by the experiment runner; name in {plain, corr, store}."""
    if name == "plain":
        return PlainUpdateScheme(eps)
    if name == "corr":
        return CorrUpdateScheme(eps)
    if name == "store":
        return StoreUpdateScheme(eps, reuse=reuse, m=m, capacity=capacity,
                                 reuse_every=reuse_every, reuse_start=reuse_start)
    raise ValueError(f"unknown update scheme: {name!r}")
