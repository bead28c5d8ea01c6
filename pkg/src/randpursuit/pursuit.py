"""Driver loops: fixed-metric and variable-metric random pursuit.

Both drivers iterate x_k = x_{k-1} + h_k u_k where u_k is a normalized random
direction and h_k comes from a line-search oracle.  The fixed-metric variant
samples u_k from a constant covariance Sigma; the variable-metric variant
samples from the inverse of a Hessian estimate that is refined by one
randomized curvature update per iteration.

A trajectory records, per iteration: the cumulative evaluation count, the
objective value, the optimality gap (when f* is known), and the condition
number of B^-1 H (when the objective exposes an analytic Hessian).

For diagonal-quadratic objectives with the exact line search, run_frp
dispatches to a compiled kernel that performs the whole loop in one call;
the records it emits match the generic loop's.
"""

from __future__ import annotations

import logging
import math

import numpy as np
from scipy.linalg import solve_triangular

from . import _kernels
from .hessian import HessianEstimate, curvature_fd, smallest_eigvec
from .linesearch import ExactLineSearch
from .metric import PDMatrix
from .sampling import _gen, sample_from_precision, sample_normalized

log = logging.getLogger(__name__)


class StopCriteria:
    """Loop termination: iteration cap, evaluation budget, target gap.

    At least one of the three must be set.  The budget is checked between
    iterations, so the final line search may overshoot it by its own
    evaluation count (matching the usual benchmarking convention).
    """

    def __init__(self, max_iterations=None, max_fes=None, target_gap=None):
        if max_iterations is None and max_fes is None and target_gap is None:
            raise ValueError("at least one stop criterion must be set")
        for name, val in (("max_iterations", max_iterations),
                          ("max_fes", max_fes)):
            if val is not None and val < 1:
                raise ValueError(f"{name} must be >= 1")
        if target_gap is not None and target_gap <= 0.0:
            raise ValueError("target_gap must be positive")
        self.max_iterations = max_iterations
        self.max_fes = max_fes
        self.target_gap = target_gap

    @classmethod
    def protocol(cls, n, target_gap=1e-8, budget_factor=200):
        """Benchmark protocol default: 200 n^2 evaluations, gap 1e-8."""
        return cls(max_fes=budget_factor * n * n, target_gap=target_gap)

    def reason(self, gap, fes, iteration):
        """First satisfied criterion, or None; target wins over budget."""
        if self.target_gap is not None and gap is not None \
                and gap <= self.target_gap:
            return "target"
        if self.max_fes is not None and fes >= self.max_fes:
            return "budget"
        if self.max_iterations is not None and iteration >= self.max_iterations:
            return "max_iterations"
        return None

    def __repr__(self):
        return (f"StopCriteria(max_iterations={self.max_iterations}, "
                f"max_fes={self.max_fes}, target_gap={self.target_gap})")


class Trajectory:
    """Per-iteration records plus the terminal point and stop reason.

    Columns: iteration, cumulative FES, f(x_k), gap, kappa(B^-1 H).  The gap
    and kappa columns are NaN when unknown.  Storage is columnar; the kernel
    fast path appends whole blocks at once.
    """

    def __init__(self):
        self._rows = []
        self._chunks = []
        self._cache = None
        self.x_final = None
        self.stop_reason = None

    def append(self, iteration, fes, fval, gap=np.nan, kappa=np.nan):
        self._rows.append((float(iteration), float(fes), float(fval),
                           float(gap), float(kappa)))
        self._cache = None

    def append_block(self, iterations, fes, fval, gap, kappa=None):
        self._flush()
        m = len(fval)
        if kappa is None:
            kappa = np.full(m, np.nan)
        block = [np.asarray(c, dtype=float) for c in
                 (iterations, fes, fval, gap, kappa)]
        if any(c.shape != (m,) for c in block):
            raise ValueError("trajectory block columns must share one length")
        self._chunks.append(block)
        self._cache = None

    def _flush(self):
        if self._rows:
            arr = np.array(self._rows, dtype=float)
            self._chunks.append([arr[:, j] for j in range(5)])
            self._rows = []

    def _data(self):
        if self._cache is None:
            self._flush()
            if self._chunks:
                self._cache = tuple(
                    np.concatenate([c[j] for c in self._chunks])
                    for j in range(5)
                )
            else:
                self._cache = tuple(np.zeros(0) for _ in range(5))
        return self._cache

    @property
    def iterations(self):
        return self._data()[0].astype(int)

    @property
    def fes(self):
        return self._data()[1].astype(int)

    @property
    def fval(self):
        return self._data()[2]

    @property
    def gap(self):
        return self._data()[3]

    @property
    def kappa(self):
        return self._data()[4]

    @property
    def records(self):
        """List of (iteration, fes, fval, gap, kappa) tuples."""
        it, fes, fval, gap, kap = self._data()
        return [(int(k), int(c), v, g, q)
                for k, c, v, g, q in zip(it, fes, fval, gap, kap)]

    def __len__(self):
        return len(self._data()[0])

    def finalize(self, x, stop_reason):
        self.x_final = np.asarray(x, dtype=float).copy()
        self.stop_reason = stop_reason
        return self


class PursuitError(RuntimeError):
    """Driver failure carrying whatever trajectory was recorded."""

    def __init__(self, message, trajectory):
        super().__init__(message)
        self.trajectory = trajectory


def _f_star(f):
    fs = getattr(f, "f_star", None)
    return float(fs) if fs is not None else None


def _gap(fval, f_star):
    return (fval - f_star) if f_star is not None else None


def _gap_or_nan(fval, f_star):
    return (fval - f_star) if f_star is not None else np.nan


def _sigma_factor(sigma):
    if sigma is None:
        return None
    if isinstance(sigma, PDMatrix):
        return sigma.factor
    return PDMatrix(sigma).factor


def run_frp(f, x0, sigma, ls, stop, rng):
    """Fixed-metric random pursuit: u_k ~ N-bar(0, Sigma), x_k = x_{k-1} + h u_k.

    sigma may be a PDMatrix, a raw PD array, or None for the identity.
    Stops at the first satisfied criterion; on oracle failure raises
    PursuitError with the partial trajectory attached.
    """
    x = np.array(x0, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("x0 must be finite")
    factor = _sigma_factor(sigma)
    f_star = _f_star(f)
    traj = Trajectory()

    fx = f.value(x)
    traj.append(0, f.fes, fx, _gap_or_nan(fx, f_star))

    fast = _try_fast_frp(f, x, fx, factor, ls, stop, rng, traj, f_star)
    if fast is not None:
        return fast

    k = 0
    reason = stop.reason(_gap(fx, f_star), f.fes, k)
    while reason is None:
        u = sample_normalized(factor, rng, n=x.size)
        try:
            res = ls(f, x, u, fx, rng)
        except Exception as exc:
            traj.finalize(x, "error")
            raise PursuitError(f"line search failed: {exc}", traj) from exc
        if res.accepted and res.step != 0.0:
            x = x + res.step * u.u
            fx = res.f_new
        k += 1
        traj.append(k, f.fes, fx, _gap_or_nan(fx, f_star))
        reason = stop.reason(_gap(fx, f_star), f.fes, k)
    return traj.finalize(x, reason)


def _try_fast_frp(f, x, fx, factor, ls, stop, rng, traj, f_star):
    """Whole-loop kernel dispatch; returns the finished trajectory or None."""
    if not isinstance(ls, ExactLineSearch):
        return None
    parts = getattr(f, "fast_quadratic_parts", None)
    if parts is None:
        return None
    parts = parts()
    if parts is None or f_star is None:
        return None
    d, rot, shift = parts

    gap0 = fx - f_star
    reason = stop.reason(gap0, f.fes, 0)
    if reason is not None:
        return traj.finalize(x, reason)

    # Iteration budget k such that the pre-iteration check fes < max_fes
    # holds; each exact-line-search iteration costs exactly 2 evaluations.
    fes0 = f.fes
    k_budget = None
    if stop.max_fes is not None:
        k_budget = max(0, math.ceil((stop.max_fes - fes0) / 2.0))
    if stop.max_iterations is not None:
        k_budget = stop.max_iterations if k_budget is None \
            else min(k_budget, stop.max_iterations)
    if k_budget is None or k_budget > 10_000_000:
        return None          # unbounded or absurd; use the generic loop

    y = x - shift if shift is not None else x.copy()
    if rot is not None:
        y = rot @ y
    g = rot if factor is None else (
        factor if rot is None else rot @ factor)
    target = -1.0 if stop.target_gap is None else float(stop.target_gap)

    z = _gen(rng).standard_normal((k_budget, x.size))
    # the compiled kernel wants writable, contiguous buffers; factors from
    # PDMatrix are handed out read-only, so copy
    gaps, y, iters = _kernels.frp_quadratic(
        np.array(d, dtype=float), np.array(y, dtype=float),
        None if g is None else np.array(g, dtype=float), z, target, k_budget)
    f.charge(2 * iters)

    ks = np.arange(1, iters + 1, dtype=float)
    traj.append_block(ks, fes0 + 2.0 * ks, gaps + f_star, gaps)

    x_final = y if rot is None else rot.T @ y
    if shift is not None:
        x_final = x_final + shift
    last_gap = gaps[-1] if iters > 0 else gap0
    reason = stop.reason(last_gap, f.fes, iters)
    return traj.finalize(x_final, reason or "max_iterations")


def _pencil_kappa(h, chol_b):
    """Condition number of B^-1 H from H and B's lower Cholesky factor."""
    w = solve_triangular(chol_b, h, lower=True)
    w = solve_triangular(chol_b, w.T, lower=True)
    vals = np.linalg.eigvalsh((w + w.T) / 2.0)
    lo, hi = float(vals[0]), float(vals[-1])
    if lo <= 0.0:
        return np.nan
    return hi / lo


class _KappaProbe:
    """Evaluates kappa(B^-1 H) when the objective exposes a Hessian."""

    def __init__(self, f, x0):
        self._f = None
        self._const_h = None
        if getattr(f, "has_hessian", False):
            self._f = f
            if getattr(f, "hessian_constant", False):
                self._const_h = f.hessian(x0)

    def __call__(self, est, x):
        if self._f is None:
            return np.nan
        h = self._const_h if self._const_h is not None else self._f.hessian(x)
        try:
            return _pencil_kappa(h, est.chol)
        except np.linalg.LinAlgError:
            return np.nan


def run_vrp(f, x0, b0, ls, update, stop, rng, update_at="interlaced",
            fixed_point_steps=None):
    """Variable-metric random pursuit.

    Interlaced mode (default) performs one Hessian-update step at the current
    iterate, then samples the search direction from N-bar(0, B_k^-1).
    Fixed-point mode instead runs the whole estimation at x0 (default 3 n^2
    update steps), repairs B to positive definite if the plain scheme left it
    indefinite, and then pursues with the frozen metric.

    b0 may be a PDMatrix or raw PD array.  A failed update (possible on
    non-quadratic objectives) skips that iteration's update and is logged by
    the scheme; estimation failure in fixed-point mode raises PursuitError.
    """
    x = np.array(x0, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("x0 must be finite")
    if update_at not in ("interlaced", "fixed_point"):
        raise ValueError("update_at must be 'interlaced' or 'fixed_point'")
    est = HessianEstimate(b0)
    f_star = _f_star(f)
    kappa_of = _KappaProbe(f, x)
    traj = Trajectory()

    fx = f.value(x)
    traj.append(0, f.fes, fx, _gap_or_nan(fx, f_star), kappa_of(est, x))

    if update_at == "fixed_point":
        steps = fixed_point_steps
        if steps is None:
            steps = 3 * x.size * x.size
        try:
            for j in range(steps):
                update.step(f, x, est, rng, j + 1, fx=fx)
            _ensure_pd(f, x, est, update, fx)
        except Exception as exc:
            traj.finalize(x, "error")
            raise PursuitError(f"estimation failed: {exc}", traj) from exc

    k = 0
    reason = stop.reason(_gap(fx, f_star), f.fes, k)
    while reason is None:
        try:
            if update_at == "interlaced":
                update.step(f, x, est, rng, k + 1, fx=fx)
            u = sample_from_precision(est.chol, rng)
            res = ls(f, x, u, fx, rng)
        except Exception as exc:
            traj.finalize(x, "error")
            raise PursuitError(f"iteration failed: {exc}", traj) from exc
        if res.accepted and res.step != 0.0:
            x = x + res.step * u.u
            fx = res.f_new
        k += 1
        traj.append(k, f.fes, fx, _gap_or_nan(fx, f_star), kappa_of(est, x))
        reason = stop.reason(_gap(fx, f_star), f.fes, k)
    return traj.finalize(x, reason)


def _ensure_pd(f, x, est, update, fx):
    """Repair an indefinite estimate in place along its bottom eigenvectors.

    Needed after fixed-point estimation with the plain scheme, whose updates
    carry no positive-definiteness guarantee.  Each repair measures the true
    curvature along the offending eigenvector, which on a quadratic makes
    that direction's quadratic form positive.
    """
    n = est.n
    for _ in range(2 * n):
        lam, v = smallest_eigvec(est.b)
        if lam > 0.0:
            est.refactor()
            return
        q = curvature_fd(f, x, v, getattr(update, "eps", 1.0), fx=fx)
        est.rank1(v, q - float(v @ est.b @ v))
    raise np.linalg.LinAlgError(
        "estimate not positive definite after repair attempts")
