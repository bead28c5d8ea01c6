"""Command-line front end: experiment runner, verification, table emission.

Subcommands:

* run     -- execute a configured multi-trial experiment and write a per-trial
             trajectory file, a JSON summary, and plot-ready gap curves.
* verify  -- run a named consistency suite and emit a machine-readable report.
* table   -- reformat summary files into an accuracy-decade table.

Exit codes: 0 success, 1 configuration/usage error, 2 runtime failure,
3 verification suite failure.  All outputs are deterministic for a fixed
seed; wall-clock timings go to a separate sidecar file so the main artifacts
stay byte-reproducible.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

from . import verify as verify_suites
from .bench import (ConfigError, DECADES, ExperimentConfig, aggregate_decades,
                    aggregate_gap_curves, decade_key, run_experiment)

SUMMARY_SCHEMA = "randpursuit-summary-v1"
VERIFY_SCHEMA = "randpursuit-verify-v1"

_BOOL_FIELDS = {"reuse", "transform"}
_INT_FIELDS = {"n", "i", "m", "trials", "seed", "workers"}
_FLOAT_FIELDS = {"ell", "mu", "sigma0"}
_OPT_INT_FIELDS = {"capacity", "fixed_point_steps", "budget_fes",
                   "max_iterations"}
_OPT_FLOAT_FIELDS = {"eps", "target_gap"}
_STR_FIELDS = {"function", "algorithm", "init", "linesearch", "update",
               "update_at", "x0", "output", "format"}
_ALL_FIELDS = (_BOOL_FIELDS | _INT_FIELDS | _FLOAT_FIELDS | _OPT_INT_FIELDS
               | _OPT_FLOAT_FIELDS | _STR_FIELDS)


class _Parser(argparse.ArgumentParser):
    """argparse variant that reports usage problems as ConfigError.

    Keeps the exit-code contract (1 for validation) instead of argparse's
    default SystemExit(2).
    """

    def error(self, message):
        raise ConfigError(message)


def _coerce(key, text):
    """Parse a config-file value string into the field's type."""
    text = text.strip()
    if key in _BOOL_FIELDS:
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {text!r}")
    if key in _OPT_INT_FIELDS or key in _OPT_FLOAT_FIELDS:
        if text.lower() == "none":
            return None
    try:
        if key in _INT_FIELDS or key in _OPT_INT_FIELDS:
            return int(text)
        if key in _FLOAT_FIELDS or key in _OPT_FLOAT_FIELDS:
            return float(text)
    except ValueError:
        raise ConfigError(f"{key}: could not parse {text!r}") from None
    if key in _STR_FIELDS:
        return text
    raise ConfigError(f"{key}: unknown configuration key")


def _parse_config_file(path):
    """Flat key = value lines; # starts a comment, blank lines ignored."""
    out = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(
                        f"{path}:{lineno}: expected key = value")
                key, value = (s.strip() for s in line.split("=", 1))
                out[key] = _coerce(key, value)
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from exc
    return out


def build_parser():
    parser = _Parser(prog="randpursuit",
                     description="Gradient-free convex optimization by "
                                 "random pursuit, with verification suites.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a multi-trial experiment")
    run.add_argument("--config", help="flat key=value configuration file "
                                      "(flags override it)")
    run.add_argument("--function", choices=("f1", "f2", "f3", "f4", "g"))
    run.add_argument("--n", type=int, help="problem dimension")
    ell = run.add_mutually_exclusive_group()
    ell.add_argument("--ell", type=float, help="conditioning parameter")
    ell.add_argument("--ellpow", type=float,
                     help="conditioning as a power of ten: p means 10^p")
    run.add_argument("--i", type=int, help="split index of the g family")
    run.add_argument("--algo", dest="algorithm", choices=("frp", "vrp"))
    run.add_argument("--init", help="sampling metric / initial estimate: "
                                    "identity, scaled:<v>, or file:<path>")
    run.add_argument("--ls", dest="linesearch",
                     choices=("exact", "es", "bisection"))
    run.add_argument("--mu", type=float, help="bisection relative accuracy")
    run.add_argument("--sigma0", type=float, help="initial adaptive step")
    run.add_argument("--update", choices=("plain", "corr", "store"))
    run.add_argument("--reuse", action=argparse.BooleanOptionalAction,
                     default=None, help="replay stored curvature pairs")
    run.add_argument("--m", type=int, help="replay passes over the store")
    run.add_argument("--capacity", type=int, help="curvature store capacity")
    run.add_argument("--eps", type=float, help="finite-difference step")
    run.add_argument("--update-at", dest="update_at",
                     choices=("interlaced", "fixed_point"))
    run.add_argument("--fixed-point-steps", dest="fixed_point_steps",
                     type=int)
    run.add_argument("--budget-fes", dest="budget_fes", type=int)
    run.add_argument("--max-iterations", dest="max_iterations", type=int)
    run.add_argument("--target-gap", dest="target_gap", type=float)
    run.add_argument("--trials", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--transform", action=argparse.BooleanOptionalAction,
                     default=None, help="rotate and shift the instance")
    run.add_argument("--x0", choices=("default", "equal-energy"))
    run.add_argument("--workers", type=int)
    run.add_argument("--output", help="output directory")
    run.add_argument("--format", choices=("csv", "json"))
    run.set_defaults(func=cmd_run)

    ver = sub.add_parser("verify", help="run a consistency suite")
    ver.add_argument("suite", choices=verify_suites.SUITES + ("all",))
    ver.add_argument("--seed", type=int, default=None)
    ver.add_argument("--samples", type=float, default=None,
                     help="sampling effort (accepts 1e6 style)")
    ver.add_argument("--output", help="also write the JSON report here")
    ver.set_defaults(func=cmd_verify)

    tab = sub.add_parser("table", help="format summaries as a decade table")
    tab.add_argument("inputs", nargs="+", help="summary JSON files")
    tab.add_argument("--format", choices=("text", "csv"), default="text")
    tab.add_argument("--output", help="write the table here instead of stdout")
    tab.set_defaults(func=cmd_table)
    return parser


def resolve_config(args):
    """Layer precedence: dataclass defaults < config file < explicit flags.

    The seed additionally falls back to the RP_SEED environment variable
    when neither a flag nor the file provides one.
    """
    merged = {}
    if args.config:
        merged.update(_parse_config_file(args.config))
    for key in _ALL_FIELDS:
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    if args.ellpow is not None:
        merged["ell"] = 10.0 ** args.ellpow
    merged.pop("ellpow", None)
    if "seed" not in merged and os.environ.get("RP_SEED"):
        try:
            merged["seed"] = int(os.environ["RP_SEED"])
        except ValueError:
            raise ConfigError("seed: RP_SEED must be an integer") from None
    config = ExperimentConfig.from_dict(merged)
    config.validate()
    return config


def _fmt(value):
    """Shortest round-trip decimal for a float; empty for NaN/None."""
    if value is None:
        return ""
    if isinstance(value, float) and math.isnan(value):
        return ""
    return repr(float(value))


def _write_rows(path, fmt, header, rows):
    if fmt == "json":
        payload = {"columns": list(header), "rows": [list(r) for r in rows]}
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(header) + "\n")
            for row in rows:
                fh.write(",".join(str(c) for c in row) + "\n")


def _trajectory_rows(trajectories):
    for trial, traj in enumerate(trajectories):
        for it, fes, fval, gap, kappa in zip(
                traj.iterations, traj.fes, traj.fval, traj.gap, traj.kappa):
            yield (trial, int(it), int(fes), _fmt(fval), _fmt(gap),
                   _fmt(kappa), "", "")


def write_artifacts(config, summaries, trajectories):
    """Emit trajectory, summary, gap-curve, and timing files; returns paths."""
    outdir = config.output
    os.makedirs(outdir, exist_ok=True)
    ext = "json" if config.format == "json" else "csv"

    traj_path = os.path.join(outdir, f"trajectories.{ext}")
    header = ("trial", "iter", "fes", "fval", "gap", "kappa_BinvH",
              "reserved1", "reserved2")
    _write_rows(traj_path, config.format, header,
                _trajectory_rows(trajectories))

    its, mean_gap, min_gap, max_gap = aggregate_gap_curves(trajectories)
    curve_path = os.path.join(outdir, f"gap_curve.{ext}")
    _write_rows(curve_path, config.format,
                ("iter", "mean_gap", "min_gap", "max_gap"),
                ((int(k), _fmt(a), _fmt(lo), _fmt(hi))
                 for k, a, lo, hi in zip(its, mean_gap, min_gap, max_gap)))

    decade_table = aggregate_decades(summaries)
    n2 = float(config.n * config.n)
    stop_reasons = {}
    for s in summaries:
        stop_reasons[s.stop_reason] = stop_reasons.get(s.stop_reason, 0) + 1
    per_trial = []
    for s in summaries:
        per_trial.append({
            "trial_index": s.trial_index,
            "seed": s.seed,
            "fes_to_accuracy": s.fes_to_accuracy,
            "reached_target": s.reached_target,
            "final_gap": s.final_gap,
            "iterations": s.iterations,
            "fes_total": s.fes_total,
            "stop_reason": s.stop_reason,
            "learning_phase_iterations": s.learning_phase_iterations,
        })
    summary = {
        "schema": SUMMARY_SCHEMA,
        "config": config.to_dict(),
        "decade_table": decade_table,
        "decade_fes_per_n2": {k: v["mean_fes"] / n2
                              for k, v in decade_table.items()},
        "reached_fraction": sum(s.reached_target for s in summaries)
        / len(summaries),
        "stop_reasons": stop_reasons,
        "per_trial": per_trial,
    }
    summary_path = os.path.join(outdir, "summary.json")
    with open(summary_path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")

    timings = {
        "wall_time_per_trial": [s.wall_time for s in summaries],
        "wall_time_total": sum(s.wall_time for s in summaries),
    }
    timings_path = os.path.join(outdir, "timings.json")
    with open(timings_path, "w", encoding="utf-8") as fh:
        json.dump(timings, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return traj_path, summary_path, curve_path, timings_path


def cmd_run(args):
    config = resolve_config(args)
    summaries, trajectories = run_experiment(config, keep_trajectories=True)
    paths = write_artifacts(config, summaries, trajectories)
    print("wrote " + " ".join(paths))
    return 0


def cmd_verify(args):
    samples = None if args.samples is None else int(args.samples)
    checks = verify_suites.run_suite(args.suite, seed=args.seed,
                                     samples=samples)
    report = {
        "schema": VERIFY_SCHEMA,
        "suite": args.suite,
        "checks": checks,
        "passed": all(c["passed"] for c in checks),
    }
    text = json.dumps(report, indent=2, sort_keys=True)
    print(text)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    return 0 if report["passed"] else 3


def _config_label(cfg):
    fam = cfg["function"]
    if fam == "g":
        fam = f"g{cfg['i']}"
    if fam != "f2":
        fam += f"(ell={cfg['ell']:g})"
    label = f"{cfg['algorithm']}/{fam}/{cfg['linesearch']}"
    if cfg["algorithm"] == "vrp":
        label += f"/{cfg['update']}"
    return label


def cmd_table(args):
    rows = []
    dim = None
    for path in args.inputs:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                summary = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"inputs: cannot read {path}: {exc}") from exc
        cfg = summary.get("config", {})
        n = cfg.get("n")
        if dim is None:
            dim = n
        elif n != dim:
            raise ConfigError(
                f"inputs: mixed dimensions (n={dim} vs n={n} in {path})")
        per_n2 = summary.get("decade_fes_per_n2", {})
        cells = []
        for dec in DECADES:
            val = per_n2.get(decade_key(dec))
            cells.append("-" if val is None else f"{val:.1f}")
        rows.append((_config_label(cfg), cells))

    header = ["config"] + [decade_key(d) for d in DECADES]
    if args.format == "csv":
        lines = [",".join(header)]
        lines += [",".join([label] + cells) for label, cells in rows]
    else:
        width0 = max(len(header[0]), *(len(r[0]) for r in rows))
        widths = [max(len(h), 8) for h in header[1:]]
        lines = [header[0].ljust(width0) + "  "
                 + "  ".join(h.rjust(w) for h, w in zip(header[1:], widths))]
        for label, cells in rows:
            lines.append(label.ljust(width0) + "  "
                         + "  ".join(c.rjust(w)
                                     for c, w in zip(cells, widths)))
    text = "\n".join(lines) + "\n"
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:   # noqa: BLE001 -- CLI boundary
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
