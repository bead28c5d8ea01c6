"""One-dimensional minimization oracles along a search direction.

Three implementations with different evaluation budgets per call:

* exact parabola fit (2 evaluations): exact minimizer on quadratic slices;
* adaptive single-probe step (1 evaluation): evolution-strategy style step
  size control targeting a fixed success rate;
* bracketing bisection (variable): certifies a relative-accuracy decrease.

Every oracle receives the already-known value f(x) so no evaluation is ever
repeated; reported fes_used counts only new probes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .sampling import Direction, _gen

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
# Relative spread at which the bisection certificate is treated as converged;
# a strict mu = 1 certificate is unreachable in finitely many probes.
BRACKET_REL_TOL = 1e-3


@dataclass
class LineSearchResult:
    step: float
    fes_used: int
    f_new: float
    accepted: bool
    # Lowered by bisection_relative when the budget ran out before the
    # decrease certificate was established.
    certified: bool = True


@dataclass
class AdaptiveStepState:
    """Mutable step-size scale for the single-probe adaptive search.

    The multiplicative update has zero expected log-drift exactly at success
    rate target_p: p*adapt_factor*(1-p) - (1-p)*adapt_factor*p = 0.
    """

    sigma: float = 1.0
    target_p: float = 0.27
    adapt_factor: float = 1.0 / 3.0

    def __post_init__(self):
        if self.sigma <= 0.0:
            raise ValueError("sigma must be positive")


def _vec(u):
    return u.u if isinstance(u, Direction) else np.asarray(u, dtype=float)


def _parabola_fit(f, x, w, fx):
    """Probe f(x + w), f(x - w) and fit the slice parabola through them
    and fx.  Returns (fp, fm, denom, h) with h the vertex abscissa in
    w-units (nan when the slice is flat or concave, denom <= 0)."""
    fp = f.value(x + w)
    fm = f.value(x - w)
    denom = fp - 2.0 * fx + fm
    h = (fm - fp) / (2.0 * denom) if denom > 0.0 else math.nan
    return fp, fm, denom, h


def exact_quadratic(f, x, u, fx=None):
    """Parabola fit through f(x), f(x+u), f(x-u); returns its vertex.

    Exact minimizer when f is quadratic along u.  On a non-convex slice
    (denominator <= 0) falls back to the better probed point, or stays put if
    both probes are uphill.  fes_used = 2 when fx is supplied.
    """
    uv = _vec(u)
    if not np.any(uv):
        raise ValueError("direction must be nonzero")
    fes = 0
    if fx is None:
        fx = f.value(x)
        fes += 1
    fp, fm, denom, h = _parabola_fit(f, x, uv, fx)
    fes += 2
    if denom > 0.0:
        f_new = fx - (fp - fm) ** 2 / (8.0 * denom)
        if f_new <= fx:
            return LineSearchResult(step=h, fes_used=fes, f_new=f_new, accepted=True)
    # Degenerate or non-convex slice: take the better probe if it improves.
    if min(fp, fm) < fx:
        if fp <= fm:
            return LineSearchResult(step=1.0, fes_used=fes, f_new=fp, accepted=True)
        return LineSearchResult(step=-1.0, fes_used=fes, f_new=fm, accepted=True)
    return LineSearchResult(step=0.0, fes_used=fes, f_new=fx, accepted=True)


def adaptive_es(f, x, u, state, rng, fx=None):
    """Single random-sign probe at distance state.sigma along u.

    Accepts only strict improvement.  The scale grows by
    exp(adapt_factor*(1 - target_p)) on success and shrinks by
    exp(-adapt_factor*target_p) on failure.  fes_used = 1 when fx is supplied.
    """
    uv = _vec(u)
    gen = _gen(rng)
    fes = 0
    if fx is None:
        fx = f.value(x)
        fes += 1
    sign = 1.0 if gen.random() < 0.5 else -1.0
    sigma = state.sigma
    f_probe = f.value(x + sign * sigma * uv)
    fes += 1
    if f_probe < fx:
        state.sigma = sigma * math.exp(state.adapt_factor * (1.0 - state.target_p))
        return LineSearchResult(step=sign * sigma, fes_used=fes, f_new=f_probe, accepted=True)
    state.sigma = sigma * math.exp(-state.adapt_factor * state.target_p)
    return LineSearchResult(step=0.0, fes_used=fes, f_new=fx, accepted=False)


def _bracket_lower_bound(a, fa, b, fb, c, fc):
    """Certified lower bound on the minimum of a convex slice inside (a, c).

    Secant slopes bracket the subgradient at b, giving
    phi(t) >= fb + s_left*(t - b) on the right and
    phi(t) >= fb + s_right*(t - b) on the left.
    """
    s_left = (fb - fa) / (b - a)
    s_right = (fc - fb) / (c - b)
    drop_right = max(-s_left, 0.0) * (c - b)
    drop_left = max(s_right, 0.0) * (b - a)
    return fb - max(drop_right, drop_left)


def bisection_relative(f, x, u, mu, max_fes=60, fx=None):
    """Bracketing line search certifying a mu-relative decrease.

    Doubles the step from 1 until a three-point bracket fa > fb < fc exists,
    then golden-section shrinks the bracket.  Stops once the achieved decrease
    is at least mu times the certified available decrease (a convexity lower
    bound on the bracketed minimum), or once the bracket's value spread is
    below BRACKET_REL_TOL relative.  If the evaluation budget runs out first,
    the best point found is returned with certified = False.
    """
    if not 0.0 < mu <= 1.0:
        raise ValueError("mu must be in (0, 1]")
    uv = _vec(u)
    used = 0

    def phi(t):
        nonlocal used
        used += 1
        return f.value(x + t * uv)

    if fx is None:
        fx = phi(0.0)

    def result(best_t, best_f, certified):
        return LineSearchResult(step=best_t, fes_used=used, f_new=best_f,
                                accepted=True, certified=certified)

    # Bracket the minimizer by doubling.
    f1 = phi(1.0)
    if f1 < fx:
        direction = 1.0
        a, fa, b, fb = 0.0, fx, 1.0, f1
    else:
        if used >= max_fes:
            return result(0.0, fx, False)
        fm1 = phi(-1.0)
        if fm1 < fx:
            direction = -1.0
            a, fa, b, fb = 0.0, fx, -1.0, fm1
        else:
            # Both unit probes uphill: the minimizer is bracketed around 0.
            direction = 0.0
            a, fa, b, fb, c, fc = -1.0, fm1, 0.0, fx, 1.0, f1
    if direction != 0.0:
        t = 2.0 * direction
        while True:
            if used >= max_fes:
                return result(b, fb, False)
            ft = phi(t)
            if ft > fb:
                c, fc = t, ft
                break
            a, fa, b, fb = b, fb, t, ft
            t *= 2.0
        if direction < 0.0:
            a, fa, c, fc = c, fc, a, fa

    # Golden-section shrink with the relative-decrease certificate.
    while True:
        lb = _bracket_lower_bound(a, fa, b, fb, c, fc)
        available = fx - lb
        achieved = fx - fb
        if achieved >= mu * available:
            return result(b, fb, True)
        # Converged: the still-certifiable improvement is negligible next to
        # what was already achieved (or next to the value scale when nothing
        # was achievable, e.g. starting at the slice minimum).
        floor = max(achieved, 1e-12 * max(1.0, abs(fb)))
        if fb - lb <= BRACKET_REL_TOL * floor:
            return result(b, fb, True)
        if used >= max_fes:
            return result(b, fb, False)
        # Probe the larger sub-interval at the golden ratio.
        if c - b > b - a:
            t = b + (1.0 - GOLDEN) * (c - b)
            ft = phi(t)
            if ft < fb:
                a, fa, b, fb = b, fb, t, ft
            else:
                c, fc = t, ft
        else:
            t = b - (1.0 - GOLDEN) * (b - a)
            ft = phi(t)
            if ft < fb:
                c, fc, b, fb = b, fb, t, ft
            else:
                a, fa = t, ft


class ExactLineSearch:
    """Driver adapter around the parabola fit, carrying measured values only.

    Two refinements over calling exact_quadratic in a loop.  The probe
    distance is a multiplier on the sampled direction, tracked across calls
    toward the accepted step (one instance per trial, like the adaptive
    search's sigma), which keeps the fitted second difference well above
    the rounding noise of f.  And the value reported at the vertex is
    measured with a third evaluation instead of read off the fitted
    parabola: the fit's value error feeds back into the next fit through
    the carried f(x), and over long runs that feedback loop is unstable
    whenever a step lands beyond the probes.  Objectives that declare their
    quadratic structure skip this adapter entirely (the drivers use the
    closed-form fast path at two evaluations per step), so the third
    evaluation is only spent where the model actually needs checking.
    """

    kind = "exact"

    def __init__(self):
        self.scale = 1.0

    def __call__(self, f, x, u, fx, rng):
        uv = _vec(u)
        if not np.any(uv):
            raise ValueError("direction must be nonzero")
        s = self.scale
        fp, fm, denom, h = _parabola_fit(f, x, s * uv, fx)
        if denom > 0.0 and h != 0.0:
            f_vertex = f.value(x + (h * s) * uv)
            best, f_best = h, f_vertex
            if min(fp, fm) < f_best:
                best, f_best = (1.0, fp) if fp <= fm else (-1.0, fm)
            if f_best <= fx:
                # clamp to one quadrupling or quartering per call so a
                # single degenerate fit cannot drag the probe length far off
                self.scale = min(max(abs(best) * s, 0.25 * s, 1e-150),
                                 4.0 * s)
                return LineSearchResult(step=best * s, fes_used=3,
                                        f_new=f_best, accepted=True)
            return LineSearchResult(step=0.0, fes_used=3, f_new=fx,
                                    accepted=True)
        # Flat or concave slice: no vertex to verify, take the better probe.
        if min(fp, fm) < fx:
            best, f_best = (1.0, fp) if fp <= fm else (-1.0, fm)
            return LineSearchResult(step=best * s, fes_used=2, f_new=f_best,
                                    accepted=True)
        return LineSearchResult(step=0.0, fes_used=2, f_new=fx, accepted=True)


class AdaptiveLineSearch:
    """Driver adapter owning the mutable step-size state (one per trial)."""

    kind = "es"

    def __init__(self, sigma0=1.0, target_p=0.27, adapt_factor=1.0 / 3.0):
        self.state = AdaptiveStepState(sigma=sigma0, target_p=target_p,
                                       adapt_factor=adapt_factor)

    def __call__(self, f, x, u, fx, rng):
        return adaptive_es(f, x, u, self.state, rng, fx=fx)


class BisectionLineSearch:
    """Driver adapter for the bracketing search with relative accuracy mu."""

    kind = "bisection"

    def __init__(self, mu=0.5, max_fes=60):
        self.mu = mu
        self.max_fes = max_fes

    def __call__(self, f, x, u, fx, rng):
        return bisection_relative(f, x, u, self.mu, max_fes=self.max_fes, fx=fx)


def make_line_search(name, mu=0.5, sigma0=1.0, max_fes=60):
    """Factory used by the experiment runner; name in {exact, es, bisection}."""
    if name == "exact":
        return ExactLineSearch()
    if name == "es":
        return AdaptiveLineSearch(sigma0=sigma0)
    if name == "bisection":
        return BisectionLineSearch(mu=mu, max_fes=max_fes)
    raise ValueError(f"unknown line search: {name!r}")
