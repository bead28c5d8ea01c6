"""Seeded sampling of normalized search directions and rotation matrices.

Directions are drawn from the normalized Gaussian: the image of N(0, Sigma)
under x -> x / |x|_{Sigma^-1}, i.e. vectors of unit quadratic norm in the
inverse metric.  Drawing C z / |z|_2 with C C^T = Sigma realizes this without
ever forming Sigma^-1, because |C z|_{Sigma^-1} = |z|_2.

Also provides Haar-random rotations and the Monte-Carlo moment estimators
used by the verification suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .metric import PDMatrix, _as_array


class SeededRng:
    """Deterministic PCG64 stream; same seed gives a bit-identical sequence."""

    def __init__(self, seed):
        self.seed = int(seed)
        self.generator = np.random.Generator(np.random.PCG64(self.seed))

    @classmethod
    def for_trial(cls, base_seed, trial_index):
        """Independent per-trial stream: seed = base_seed + trial_index."""
        return cls(int(base_seed) + int(trial_index))

    def __repr__(self):
        return f"SeededRng(seed={self.seed})"


def _gen(rng):
    """Accept SeededRng or a numpy Generator."""
    return rng.generator if isinstance(rng, SeededRng) else rng


@dataclass
class Direction:
    """Unit-quadratic-norm search vector together with the metric it was drawn in."""

    u: np.ndarray
    metric_tag: str = "identity"


def _unit_gaussian(gen, n):
    """Standard normal draw scaled to the unit sphere; redraws z = 0."""
    z = gen.standard_normal(n)
    nz = np.linalg.norm(z)
    while nz == 0.0:
        z = gen.standard_normal(n)
        nz = np.linalg.norm(z)
    return z / nz


def sample_normalized(sigma_factor, rng, n=None, metric_tag=None):
    """Draw from the normalized Gaussian for Sigma = C C^T.

    `sigma_factor` is the lower-triangular C (pass None for Sigma = I, in
    which case `n` is required).  The result has unit Sigma^-1 norm.
    """
    gen = _gen(rng)
    if sigma_factor is None:
        if n is None:
            raise ValueError("n is required when sigma_factor is None")
        return Direction(_unit_gaussian(gen, n), metric_tag or "identity")
    c = np.asarray(sigma_factor, dtype=float)
    u = c @ _unit_gaussian(gen, c.shape[0])
    return Direction(u, metric_tag or "sigma")


def sample_from_precision(b_factor, rng, metric_tag=None):
    """Draw from the normalized Gaussian with covariance B^-1, given B = L L^T.

    Computed as solve(L^T, z) / |z|_2: L^-T is a valid square-root factor of
    B^-1, so B^-1 is never formed.
    """
    low = np.asarray(b_factor, dtype=float)
    gen = _gen(rng)
    z = gen.standard_normal(low.shape[0])
    nz = np.linalg.norm(z)
    while nz == 0.0:
        z = gen.standard_normal(low.shape[0])
        nz = np.linalg.norm(z)
    u = solve_triangular(low.T, z, lower=False) / nz
    return Direction(u, metric_tag or "precision")


def haar_rotation(n, rng):
    """Haar-distributed orthogonal matrix.

    QR of a standard Gaussian matrix with the sign of each diagonal entry of R
    absorbed into Q's columns; without the sign correction plain QR is not
    Haar.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    gen = _gen(rng)
    m = gen.standard_normal((n, n))
    q, r = np.linalg.qr(m)
    signs = np.sign(np.diagonal(r))
    signs[signs == 0.0] = 1.0
    return q * signs


@dataclass
class MomentEstimates:
    """Sample means with per-entry standard errors for the five direction moments."""

    outer_mean: np.ndarray      # E[v v^T]
    outer_se: np.ndarray
    quad_mean: float            # E[v^T A v]
    quad_se: float
    quad_sq_mean: float         # E[(v^T A v)^2]
    quad_sq_se: float
    proj_mean: np.ndarray       # E[<x, v> v]
    proj_se: np.ndarray
    proj_normsq_mean: float     # E[ |<x, v> v|^2_A ]
    proj_normsq_se: float
    samples: int
    normalized: bool


@dataclass
class MomentIdentities:
    """Closed-form values of the five moments (normalized or plain Gaussian)."""

    outer: np.ndarray
    quad: float
    quad_sq: float
    proj: np.ndarray
    proj_normsq: float


def moment_identities(sigma, a, x, normalized=True):
    """Closed forms for the five direction moments under N(0, Sigma).

    Normalized variant divides the linear-in-Sigma moments by n and the
    quadratic-squared ones by n(n+2); the plain Gaussian variant has no
    normalizing denominators.
    """
    sig = _as_array(sigma)
    am = _as_array(a)
    x = np.asarray(x, dtype=float)
    n = sig.shape[0]
    asig = am @ sig
    tr = float(np.trace(asig))
    tr2 = float(np.trace(asig @ asig))
    x_sig = float(x @ sig @ x)
    x_sas = float(x @ sig @ am @ sig @ x)
    if normalized:
        d1, d2 = float(n), float(n * (n + 2))
    else:
        d1, d2 = 1.0, 1.0
    return MomentIdentities(
        outer=sig / d1,
        quad=tr / d1,
        quad_sq=(tr * tr + 2.0 * tr2) / d2,
        proj=sig @ x / d1,
        proj_normsq=(tr * x_sig + 2.0 * x_sas) / d2,
    )


def estimate_moments(sigma, a, x, samples, rng, normalized=True, chunk=50000):
    """Monte-Carlo estimates of the five direction moments with standard errors.

    Draws v ~ N-bar(0, Sigma) (or plain N(0, Sigma) with normalized=False) in
    chunks and accumulates first and second moments, so memory stays bounded
    at any sample count.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    sig = _as_array(sigma)
    am = _as_array(a)
    x = np.asarray(x, dtype=float)
    n = sig.shape[0]
    c = sigma.factor if isinstance(sigma, PDMatrix) else np.linalg.cholesky(sig)
    gen = _gen(rng)

    sums = {
        "outer": np.zeros((n, n)), "outer2": np.zeros((n, n)),
        "quad": 0.0, "quad2": 0.0,
        "quad_sq": 0.0, "quad_sq2": 0.0,
        "proj": np.zeros(n), "proj2": np.zeros(n),
        "pn": 0.0, "pn2": 0.0,
    }
    left = int(samples)
    while left > 0:
        m = min(chunk, left)
        left -= m
        z = gen.standard_normal((m, n))
        v = z @ c.T
        if normalized:
            v /= np.linalg.norm(z, axis=1, keepdims=True)
        quad = np.einsum("bi,ij,bj->b", v, am, v)
        proj = (v @ x)[:, None] * v           # <x, v> v per sample
        pn = np.einsum("bi,ij,bj->b", proj, am, proj)
        outer = v[:, :, None] * v[:, None, :]
        sums["outer"] += outer.sum(axis=0)
        sums["outer2"] += (outer * outer).sum(axis=0)
        sums["quad"] += quad.sum()
        sums["quad2"] += (quad * quad).sum()
        sums["quad_sq"] += (quad * quad).sum()
        sums["quad_sq2"] += (quad ** 4).sum()
        sums["proj"] += proj.sum(axis=0)
        sums["proj2"] += (proj * proj).sum(axis=0)
        sums["pn"] += pn.sum()
        sums["pn2"] += (pn * pn).sum()

    ns = float(samples)

    def mean_se(s1, s2):
        mean = s1 / ns
        var = np.maximum(s2 / ns - mean * mean, 0.0)
        return mean, np.sqrt(var / ns)

    outer_mean, outer_se = mean_se(sums["outer"], sums["outer2"])
    quad_mean, quad_se = mean_se(sums["quad"], sums["quad2"])
    qsq_mean, qsq_se = mean_se(sums["quad_sq"], sums["quad_sq2"])
    proj_mean, proj_se = mean_se(sums["proj"], sums["proj2"])
    pn_mean, pn_se = mean_se(sums["pn"], sums["pn2"])
    return MomentEstimates(
        outer_mean=outer_mean, outer_se=outer_se,
        quad_mean=float(quad_mean), quad_se=float(quad_se),
        quad_sq_mean=float(qsq_mean), quad_sq_se=float(qsq_se),
        proj_mean=proj_mean, proj_se=proj_se,
        proj_normsq_mean=float(pn_mean), proj_normsq_se=float(pn_se),
        samples=int(samples), normalized=bool(normalized),
    )
