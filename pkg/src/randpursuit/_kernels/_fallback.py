"""Pure numpy implementations of the hot kernels.

Used when the compiled extension is unavailable or explicitly disabled via
RANDPURSUIT_PURE_PYTHON=1.  Semantics match randpursuit._kernels._core; the
compiled module only changes speed.
"""

import numpy as np


def _refactor_inverse(b, b_inv):
    """Recompute b_inv from scratch via Cholesky; overwrites b_inv in place."""
    low = np.linalg.cholesky((b + b.T) / 2.0)
    li = np.linalg.inv(low)
    b_inv[:] = li.T @ li


def rhe_ensemble_steps(x, z, frob_out, trace_out):
    """Advance an ensemble of error matrices through rank-one removal steps.

    x: (runs, n, n) symmetric error matrices, updated in place.
    z: (runs, steps, n) raw standard normal draws; each is sphere-normalized
       and the update X <- X - (u^T X u) uu^T applied.
    frob_out/trace_out: (runs, steps) outputs, |X|_F^2 and Tr[X] after each
       step.
    """
    steps = z.shape[1]
    for t in range(steps):
        zt = z[:, t, :]
        u = zt / np.linalg.norm(zt, axis=1, keepdims=True)
        c = np.einsum("bi,bij,bj->b", u, x, u)
        x -= c[:, None, None] * (u[:, :, None] * u[:, None, :])
        frob_out[:, t] = np.einsum("bij,bij->b", x, x)
        trace_out[:, t] = np.trace(x, axis1=1, axis2=2)


def reuse_sweep(b, b_inv, dirs, curvs, order, margin, since_refactor,
                refactor_every):
    """Apply stored curvature pairs as rank-one updates in the given order.

    Each pair (s, q) proposes B <- B + t ss^T with t = q - s^T B s, accepted
    only when the scalar PD criterion 1 + t s^T B^-1 s > margin holds.  The
    maintained inverse is updated by the rank-one inverse formula and
    re-factorized from scratch every `refactor_every` accepted updates.

    Returns (applied_count, since_refactor).
    """
    applied = 0
    for idx in order:
        s = dirs[idx]
        t = curvs[idx] - s @ b @ s
        w = b_inv @ s
        denom = 1.0 + t * (s @ w)
        if denom > margin:
            b += t * np.outer(s, s)
            b_inv -= (t / denom) * np.outer(w, w)
            applied += 1
            since_refactor += 1
            if since_refactor >= refactor_every:
                _refactor_inverse(b, b_inv)
                since_refactor = 0
    return applied, since_refactor


def frp_quadratic(d, y0, g, z, target_gap, max_iters):
    """Fixed-metric pursuit with exact line search on a diagonal quadratic.

    Works in the canonical coordinates y where f(y) = 0.5 * sum(d * y^2) and
    the optimum value is 0.  Each iteration draws w = G z_k / |z_k| (1/|z_k|
    alone when g is None), takes the exact parabola step along w, and records
    the new gap.  Stops at target_gap or after max_iters iterations.

    Returns (gaps[:iters], y_final, iters).
    """
    y = np.array(y0, dtype=float)
    gaps = np.empty(max_iters)
    iters = 0
    for k in range(max_iters):
        zk = z[k]
        nz = np.linalg.norm(zk)
        if nz == 0.0:
            w = zk
        elif g is None:
            w = zk / nz
        else:
            w = g @ (zk / nz)
        a = d @ (w * w)
        if a > 0.0:
            h = -(d @ (y * w)) / a
            y += h * w
        gap = 0.5 * (d @ (y * y))
        gaps[k] = gap
        iters = k + 1
        if gap <= target_gap:
            break
    return gaps[:iters], y, iters
