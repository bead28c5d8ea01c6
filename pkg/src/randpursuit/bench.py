"""Benchmark objectives, instance transformation, and the trial protocol.

Five function families: four quadratics with tunable conditioning and the
Rosenbrock valley.  Every instance counts function evaluations (the cost
unit of gradient-free optimization), knows its optimum, and can be wrapped
in a random rotation plus shift so that optimizers cannot exploit
separability or the origin.

run_experiment executes seeded independent trials of a configured optimizer
and reports, per trial, the first evaluation count at which each accuracy
decade was reached -- the layout used by derivative-free benchmarking tables.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict, fields as dc_fields

import numpy as np

from .hessian import make_update_scheme
from .linesearch import make_line_search
from .metric import PDMatrix
from .pursuit import StopCriteria, run_frp, run_vrp
from .sampling import SeededRng, _gen, haar_rotation

# Accuracy decades tracked by summaries, 10^1 down to 10^-8.
DECADES = tuple(10.0 ** p for p in range(1, -9, -1))

QUADRATIC_FAMILIES = ("f1", "f3", "f4", "g")
FAMILIES = ("f1", "f2", "f3", "f4", "g")


def decade_key(value):
    """Stable string key for a decade boundary: 1e+01 ... 1e-08."""
    return f"{value:.0e}"


class ConfigError(ValueError):
    """Invalid experiment configuration; message names the offending field."""


class ObjectiveInstance:
    """A benchmark objective with evaluation counting and known optimum.

    Evaluating `value` increments `fes` by exactly one.  `gradient` and
    `hessian` are analytic diagnostics and do not count (optimizers never
    see them).  An instance may carry a rotation R and shift s, in which
    case every query x is mapped to canonical coordinates y = R(x - s).
    """

    def __init__(self, family, n, params, diag, x_star_canonical,
                 x0_canonical, f_star=0.0):
        self.family = family
        self.n = int(n)
        self.params = dict(params)
        self._diag = None if diag is None else np.asarray(diag, dtype=float)
        self._x_star_canonical = np.asarray(x_star_canonical, dtype=float)
        self._x0_canonical = np.asarray(x0_canonical, dtype=float)
        self.f_star = float(f_star)
        self.rotation = None
        self.shift = None
        self.fes = 0
        self.has_hessian = True
        self.hessian_constant = family != "f2"
        self.metadata = {"family": family, "n": self.n, **self.params}
        if self._diag is not None:
            lo, hi = float(self._diag.min()), float(self._diag.max())
            self.metadata.update(lambda_min=lo, lambda_max=hi,
                                 condition=hi / lo)

    # -- coordinate maps ---------------------------------------------------

    def _to_canonical(self, x):
        y = np.asarray(x, dtype=float)
        if self.shift is not None:
            y = y - self.shift
        if self.rotation is not None:
            y = self.rotation @ y
        return y

    def transform_point(self, p):
        """Map a canonical-coordinate point into instance coordinates."""
        q = np.asarray(p, dtype=float)
        if self.rotation is not None:
            q = self.rotation.T @ q
        if self.shift is not None:
            q = q + self.shift
        return q

    @property
    def x_star(self):
        return self.transform_point(self._x_star_canonical)

    @property
    def x0(self):
        """The family's default start, in instance coordinates."""
        return self.transform_point(self._x0_canonical)

    # -- queries -----------------------------------------------------------

    def value(self, x):
        self.fes += 1
        return self._raw_value(self._to_canonical(x))

    def charge(self, count):
        """Bulk evaluation accounting for vectorized driver paths."""
        self.fes += int(count)

    def _raw_value(self, y):
        if self._diag is not None:
            return 0.5 * float(self._diag @ (y * y))
        t = y[1:] - y[:-1] ** 2
        return float(100.0 * (t @ t) + ((y[:-1] - 1.0) ** 2).sum())

    def gradient(self, x):
        """Analytic gradient in instance coordinates (not counted as FES)."""
        y = self._to_canonical(x)
        if self._diag is not None:
            g = self._diag * y
        else:
            g = np.zeros_like(y)
            t = y[1:] - y[:-1] ** 2
            g[:-1] = -400.0 * y[:-1] * t + 2.0 * (y[:-1] - 1.0)
            g[1:] += 200.0 * t
        if self.rotation is not None:
            g = self.rotation.T @ g
        return g

    def hessian(self, x=None):
        """Analytic Hessian in instance coordinates (not counted as FES)."""
        if self._diag is not None:
            h = np.diag(self._diag)
        else:
            y = self._to_canonical(x if x is not None else self.x0)
            n = self.n
            h = np.zeros((n, n))
            idx = np.arange(n - 1)
            h[idx, idx] = -400.0 * y[1:] + 1200.0 * y[:-1] ** 2 + 2.0
            h[idx[1:], idx[1:]] += 200.0
            h[n - 1, n - 1] = 200.0
            h[idx, idx + 1] = -400.0 * y[:-1]
            h[idx + 1, idx] = -400.0 * y[:-1]
        if self.rotation is not None:
            h = self.rotation.T @ h @ self.rotation
        return h

    def fast_quadratic_parts(self):
        """(diag, rotation, shift) when f is a diagonal quadratic, else None."""
        if self._diag is None:
            return None
        return self._diag, self.rotation, self.shift

    def __repr__(self):
        tag = "transformed" if self.rotation is not None else "canonical"
        return f"ObjectiveInstance({self.family}, n={self.n}, {tag})"


# -- family constructors ----------------------------------------------------

def make_f1(n, ell):
    """Diagonal quadratic with log-uniform spectrum from e^1 up to ell.

    Coefficient i is exp(1 + (i-1)(ln ell - 1)/(n-1)); the endpoints are e
    and ell, geometrically interpolated in between.
    """
    if n < 2:
        raise ValueError("n: must be >= 2 (exponent formula divides by n-1)")
    if ell < 1.0:
        raise ValueError("ell: must be >= 1")
    expo = 1.0 + np.arange(n) * (math.log(ell) - 1.0) / (n - 1)
    d = np.exp(expo)
    return ObjectiveInstance("f1", n, {"ell": float(ell)}, d,
                             np.zeros(n), np.ones(n))


def make_f2(n):
    """Rosenbrock valley; minimum 0 at the all-ones point, start at 0."""
    if n < 2:
        raise ValueError("n: must be >= 2")
    return ObjectiveInstance("f2", n, {}, None, np.ones(n), np.zeros(n))


def make_f3(n, ell):
    """Two-scale quadratic: ceil(n/2) unit eigenvalues, floor(n/2) at ell."""
    if n < 2:
        raise ValueError("n: must be >= 2")
    if ell <= 0.0:
        raise ValueError("ell: must be positive")
    d = np.concatenate([np.ones(-(-n // 2)), np.full(n // 2, float(ell))])
    return ObjectiveInstance("f3", n, {"ell": float(ell)}, d,
                             np.zeros(n), np.ones(n))


def make_f4(n, ell):
    """Quadratic with spectrum (1, ell/2, ..., ell/2, ell)."""
    if n < 2:
        raise ValueError("n: must be >= 2")
    if ell <= 0.0:
        raise ValueError("ell: must be positive")
    d = np.full(n, ell / 2.0)
    d[0], d[-1] = 1.0, float(ell)
    return ObjectiveInstance("f4", n, {"ell": float(ell)}, d,
                             np.zeros(n), np.ones(n))


def make_gi(n, ell, i):
    """Two-block quadratic: i eigenvalues at ell, the remaining n-i at 1."""
    if not 1 <= i < n:
        raise ValueError("i: must satisfy 1 <= i < n")
    if ell <= 0.0:
        raise ValueError("ell: must be positive")
    d = np.concatenate([np.full(i, float(ell)), np.ones(n - i)])
    return ObjectiveInstance("g", n, {"ell": float(ell), "i": int(i)}, d,
                             np.zeros(n), np.ones(n))


def equal_energy_start(inst):
    """Start where every coordinate contributes equal quadratic energy.

    For a diagonal quadratic with spectrum d this is x_j = sqrt(min(d)/d_j):
    the low-curvature coordinates start at 1 and the stiff ones proportionally
    closer to the optimum, in canonical coordinates.
    """
    parts = inst.fast_quadratic_parts()
    if parts is None:
        raise ValueError("equal-energy start requires a diagonal quadratic")
    d = parts[0]
    return np.sqrt(d.min() / d)


def transform_instance(inst, rng):
    """Wrap an instance in a Haar-random rotation and a Gaussian shift.

    The new instance evaluates f(R(x - s)); its optimum and default start
    move to s + R^T x accordingly, and the evaluation counter carries over.
    """
    if inst.rotation is not None or inst.shift is not None:
        raise ValueError("instance already transformed")
    out = ObjectiveInstance(inst.family, inst.n, inst.params, inst._diag,
                            inst._x_star_canonical, inst._x0_canonical,
                            f_star=inst.f_star)
    out.rotation = haar_rotation(inst.n, rng)
    out.shift = _gen(rng).standard_normal(inst.n)
    out.fes = inst.fes
    return out


# -- experiment protocol ----------------------------------------------------

@dataclass
class ExperimentConfig:
    """Flat knob set for one experiment; validated before any run."""

    function: str = "f3"
    n: int = 10
    ell: float = 100.0
    i: int = 1
    algorithm: str = "frp"
    init: str = "identity"          # identity | scaled:<value> | file:<path>
    linesearch: str = "exact"       # exact | es | bisection
    mu: float = 0.5
    sigma0: float = 1.0
    update: str = "store"           # plain | corr | store
    reuse: bool = True
    m: int = 10
    capacity: int | None = None
    eps: float | None = None        # None: 1.0 on quadratics, 1e-6 otherwise
    update_at: str = "interlaced"   # interlaced | fixed_point
    fixed_point_steps: int | None = None
    budget_fes: int | None = None   # None: 200 n^2
    max_iterations: int | None = None
    target_gap: float = 1e-8
    trials: int = 31
    seed: int = 1
    transform: bool = True
    x0: str = "default"             # default | equal-energy
    workers: int = 1
    output: str = "results"
    format: str = "csv"

    def validate(self):
        if self.function not in FAMILIES:
            raise ConfigError(f"function: unknown family {self.function!r}")
        if self.n < 2:
            raise ConfigError("n: must be >= 2")
        if self.function != "f2" and self.ell <= 0:
            raise ConfigError("ell: must be positive")
        if self.function == "f1" and self.ell < 1:
            raise ConfigError("ell: must be >= 1 for f1")
        if self.function == "g" and not 1 <= self.i < self.n:
            raise ConfigError("i: must satisfy 1 <= i < n")
        if self.algorithm not in ("frp", "vrp"):
            raise ConfigError(f"algorithm: unknown {self.algorithm!r}")
        if not (self.init == "identity"
                or self.init.startswith(("scaled:", "file:"))):
            raise ConfigError(f"init: unknown mode {self.init!r}")
        if self.init.startswith("scaled:"):
            try:
                val = float(self.init.split(":", 1)[1])
            except ValueError:
                raise ConfigError("init: scaled:<value> needs a number") \
                    from None
            if val <= 0:
                raise ConfigError("init: scale must be positive")
        if self.linesearch not in ("exact", "es", "bisection"):
            raise ConfigError(f"linesearch: unknown {self.linesearch!r}")
        if not 0.0 < self.mu <= 1.0:
            raise ConfigError("mu: must be in (0, 1]")
        if self.sigma0 <= 0:
            raise ConfigError("sigma0: must be positive")
        if self.update not in ("plain", "corr", "store"):
            raise ConfigError(f"update: unknown scheme {self.update!r}")
        if self.m < 0:
            raise ConfigError("m: must be >= 0")
        if self.capacity is not None and self.capacity < 1:
            raise ConfigError("capacity: must be >= 1")
        if self.eps is not None and self.eps <= 0:
            raise ConfigError("eps: must be positive")
        if self.update_at not in ("interlaced", "fixed_point"):
            raise ConfigError(f"update_at: unknown mode {self.update_at!r}")
        if self.fixed_point_steps is not None and self.fixed_point_steps < 1:
            raise ConfigError("fixed_point_steps: must be >= 1")
        if self.budget_fes is not None and self.budget_fes < 1:
            raise ConfigError("budget_fes: must be >= 1")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ConfigError("max_iterations: must be >= 1")
        if self.target_gap is not None and self.target_gap <= 0:
            raise ConfigError("target_gap: must be positive")
        if self.trials < 1:
            raise ConfigError("trials: must be >= 1")
        if self.x0 not in ("default", "equal-energy"):
            raise ConfigError(f"x0: unknown preset {self.x0!r}")
        if self.x0 == "equal-energy" and self.function == "f2":
            raise ConfigError("x0: equal-energy needs a quadratic family")
        if self.workers < 1:
            raise ConfigError("workers: must be >= 1")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"format: unknown {self.format!r}")
        return self

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in dc_fields(cls)}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"{sorted(extra)[0]}: unknown configuration key")
        return cls(**data)

    @property
    def effective_budget(self):
        return self.budget_fes if self.budget_fes is not None \
            else 200 * self.n * self.n

    @property
    def effective_eps(self):
        if self.eps is not None:
            return self.eps
        return 1.0 if self.function in QUADRATIC_FAMILIES else 1e-6


@dataclass
class TrialSummary:
    """Per-trial outcome: decade crossings, target status, bookkeeping."""

    trial_index: int
    seed: int
    fes_to_accuracy: dict
    reached_target: bool
    wall_time: float
    final_gap: float
    iterations: int
    fes_total: int
    stop_reason: str
    learning_phase_iterations: int | None = None


def make_instance(config, rng):
    """Build (and optionally transform) the configured objective."""
    fam = config.function
    if fam == "f1":
        inst = make_f1(config.n, config.ell)
    elif fam == "f2":
        inst = make_f2(config.n)
    elif fam == "f3":
        inst = make_f3(config.n, config.ell)
    elif fam == "f4":
        inst = make_f4(config.n, config.ell)
    else:
        inst = make_gi(config.n, config.ell, config.i)
    if config.transform:
        inst = transform_instance(inst, rng)
    return inst


def _init_matrix(mode, n):
    """Resolve an init mode string to a matrix, or None for the identity."""
    if mode == "identity":
        return None
    if mode.startswith("scaled:"):
        return float(mode.split(":", 1)[1]) * np.eye(n)
    path = mode.split(":", 1)[1]
    arr = np.loadtxt(path)
    if arr.shape != (n, n):
        raise ConfigError(f"init: matrix in {path} is not {n}x{n}")
    return arr


def decades_from_trajectory(gap, fes):
    """First FES at which each accuracy decade was reached."""
    out = {}
    gap = np.asarray(gap)
    fes = np.asarray(fes)
    for dec in DECADES:
        hit = gap <= dec
        if hit.any():
            out[decade_key(dec)] = int(fes[int(np.argmax(hit))])
    return out


def estimate_learning_phase(traj, n):
    """Iteration at which sustained fast decay begins, or None.

    Detector: rolling 2n-iteration slope of log10(gap); the phase ends at
    the first window whose slope is steeper than half the final window's
    slope.
    """
    gap = np.clip(traj.gap, 1e-300, None)
    if gap.size == 0 or not np.all(np.isfinite(gap)):
        return None
    w = 2 * n
    if gap.size < 3 * w:
        return None
    lg = np.log10(gap)
    slopes = (lg[w:] - lg[:-w]) / w
    final_slope = slopes[-1]
    if final_slope >= 0.0:
        return None
    hits = np.nonzero(slopes <= final_slope / 2.0)[0]
    if hits.size == 0:
        return None
    return int(traj.iterations[hits[0] + w])


def run_single_trial(config, trial_index, keep_trajectory=False):
    """Execute one seeded trial; returns (TrialSummary, Trajectory | None)."""
    rng = SeededRng.for_trial(config.seed, trial_index)
    inst = make_instance(config, rng)
    if config.x0 == "equal-energy":
        x0 = inst.transform_point(equal_energy_start(inst))
    else:
        x0 = inst.x0
    stop = StopCriteria(max_iterations=config.max_iterations,
                        max_fes=config.effective_budget,
                        target_gap=config.target_gap)
    ls = make_line_search(config.linesearch, mu=config.mu,
                          sigma0=config.sigma0)
    t0 = time.perf_counter()
    if config.algorithm == "frp":
        sigma = _init_matrix(config.init, config.n)
        traj = run_frp(inst, x0, sigma, ls, stop, rng)
        phase = None
    else:
        b0 = _init_matrix(config.init, config.n)
        if b0 is None:
            b0 = np.eye(config.n)
        scheme = make_update_scheme(config.update, config.effective_eps,
                                    reuse=config.reuse, m=config.m,
                                    capacity=config.capacity)
        traj = run_vrp(inst, x0, PDMatrix(b0), ls, scheme, stop, rng,
                       update_at=config.update_at,
                       fixed_point_steps=config.fixed_point_steps)
        phase = estimate_learning_phase(traj, config.n)
    wall = time.perf_counter() - t0
    summary = TrialSummary(
        trial_index=trial_index,
        seed=config.seed + trial_index,
        fes_to_accuracy=decades_from_trajectory(traj.gap, traj.fes),
        reached_target=traj.stop_reason == "target",
        wall_time=wall,
        final_gap=float(traj.gap[-1]) if len(traj) else float("nan"),
        iterations=int(traj.iterations[-1]) if len(traj) else 0,
        fes_total=int(inst.fes),
        stop_reason=traj.stop_reason,
        learning_phase_iterations=phase,
    )
    return summary, (traj if keep_trajectory else None)


def _trial_worker(config, trial_index, keep):
    return run_single_trial(config, trial_index, keep_trajectory=keep)


def run_experiment(config, keep_trajectories=False):
    """Run all configured trials; deterministic for a fixed seed.

    Returns the list of TrialSummary, ordered by trial index, or a
    (summaries, trajectories) pair when keep_trajectories is set.  Trials
    run on a process pool when config.workers > 1; results are merged by
    index, so worker count never affects the output.
    """
    config.validate()
    indices = range(config.trials)
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(
                _trial_worker, [config] * config.trials, indices,
                [keep_trajectories] * config.trials))
    else:
        results = [run_single_trial(config, t, keep_trajectories)
                   for t in indices]
    summaries = [r[0] for r in results]
    if keep_trajectories:
        return summaries, [r[1] for r in results]
    return summaries


def aggregate_decades(summaries):
    """Mean/median FES and reach count per accuracy decade."""
    table = {}
    for dec in DECADES:
        key = decade_key(dec)
        vals = [s.fes_to_accuracy[key] for s in summaries
                if key in s.fes_to_accuracy]
        if vals:
            table[key] = {
                "mean_fes": float(np.mean(vals)),
                "median_fes": float(np.median(vals)),
                "count": len(vals),
            }
    return table


def aggregate_gap_curves(trajectories):
    """Mean and min/max gap per iteration across trials.

    Trials that stopped early are carried forward at their final gap so the
    aggregate is defined out to the longest trial.
    """
    curves = [np.asarray(t.gap, dtype=float) for t in trajectories]
    if not curves:
        return np.zeros(0), np.zeros(0), np.zeros(0), np.zeros(0)
    m = max(c.size for c in curves)
    stack = np.empty((len(curves), m))
    for i, c in enumerate(curves):
        stack[i, :c.size] = c
        stack[i, c.size:] = c[-1] if c.size else np.nan
    its = np.arange(m)
    return its, stack.mean(axis=0), stack.min(axis=0), stack.max(axis=0)
