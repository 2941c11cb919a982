"""Command-line entry point: ``curvbandit {run,sweep,verify-lemmas,starved-run}``."""

import argparse
import math
import os
import sys
from pathlib import Path

from . import certificates
from .harness import (
    ENVIRONMENTS,
    STRATEGIES,
    ExperimentConfig,
    lp_regret_bound,
    run_experiment,
    sparse_regret_bound,
    sweep,
    write_summary,
)

OUT_ENV = "CURVBANDIT_OUT"

# CLI flag -> (target, parameter name)
_ROUTING = {
    "s": ("env", "s"),
    "Q": ("env", "Q"),
    "p": ("env", "p"),
    "C": ("env", "C"),
    "style": ("env", "style"),
    "base": ("env", "base"),
    "noise": ("env", "noise"),
    "epsilon": ("env", "epsilon"),
    "eta": ("strategy", "eta"),
    "gamma": ("strategy", "gamma"),
    "k": ("strategy", "reservoir_size"),
    "estimator": ("strategy", "estimator"),
}

# sweep names that map onto a differently named parameter
_SWEEP_ALIASES = {"k": "reservoir_size"}


def _add_common(p):
    p.add_argument("--strategy", required=True, choices=sorted(STRATEGIES))
    p.add_argument("--env", required=True, choices=sorted(ENVIRONMENTS))
    p.add_argument("--n", type=int, required=True, help="number of arms / dimension")
    p.add_argument("--T", type=int, required=True, help="horizon")
    p.add_argument("--s", type=int, help="sparsity (sparse env)")
    p.add_argument("--Q", type=float, help="variation budget (low-variation env)")
    p.add_argument("--p", type=float, help="norm exponent of the ball")
    p.add_argument("--C", type=float, help="constant of the Gaussian construction")
    p.add_argument("--style", choices=["hidden-good-arm", "random-support"])
    p.add_argument("--base", choices=["independent", "common"])
    p.add_argument("--noise", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--eta", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--k", type=int, help="reservoir size")
    p.add_argument("--estimator", choices=["unbiased", "norm-gap"])
    p.add_argument("--seeds", type=int, default=10, help="number of seeds (0..seeds-1)")
    p.add_argument("--out", type=Path, default=None, help=f"output directory (default ${OUT_ENV} or ./curvbandit-out)")
    p.add_argument("--debug-audit", action="store_true", help="per-round invariant checks and be-the-leader audit")


def build_parser():
    parser = argparse.ArgumentParser(prog="curvbandit", description="Adversarial bandit simulations and certificates.")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_common(sub.add_parser("run", help="run one configuration over several seeds"))
    sw = sub.add_parser("sweep", help="vary one parameter and fit the log-log regret slope")
    _add_common(sw)
    sw.add_argument("--vary", required=True, help="NAME=v1,v2,... (e.g. s=1,2,4,8)")
    _add_common(sub.add_parser("starved-run", help="run under the starved-feedback protocol"))
    vl = sub.add_parser("verify-lemmas", help="run the randomized certificate suites")
    vl.add_argument("--seed", type=int, default=0)
    vl.add_argument("--suite", action="append", choices=sorted(certificates.SUITES), help="repeatable; default all")
    return parser


def config_from_args(args):
    env_params, strat_params = {}, {}
    for flag, (target, name) in _ROUTING.items():
        value = getattr(args, flag)
        if value is None:
            continue
        (env_params if target == "env" else strat_params)[name] = value
    if args.strategy == "lp-ball" and "p" in env_params and env_params["p"] <= 2.0:
        strat_params.setdefault("p", env_params["p"])
    return ExperimentConfig(
        args.strategy,
        args.env,
        args.n,
        args.T,
        tuple(range(args.seeds)),
        strat_params,
        env_params,
        debug=args.debug_audit,
    )


def _out_dir(args):
    if args.out is not None:
        return args.out
    return Path(os.environ.get(OUT_ENV, "curvbandit-out"))


def _parse_vary(text):
    if "=" not in text:
        raise ValueError(f"--vary expects NAME=v1,v2,..., got {text!r}")
    name, raw = text.split("=", 1)
    values = []
    for item in raw.split(","):
        num = float(item)
        values.append(int(num) if num.is_integer() and name in ("s", "n", "T", "k") else num)
    return _SWEEP_ALIASES.get(name, name), values


def verdicts(summary, config):
    """Bound checks that apply to this configuration, as ``verdict.*`` entries."""
    out = {}
    mean = summary["mean_regret"]
    if config.strategy == "sparse-mab" and config.env == "sparse":
        s = config.env_params.get("s", 2)
        bound = sparse_regret_bound(config.n, config.T, s * config.T)
        out["bound.sparse"] = bound
        out["verdict.sparse_bound"] = "PASS" if mean <= bound else "FAIL"
    if config.strategy == "lp-ball" and config.env == "ball-noisy":
        p = config.strategy_params.get("p", config.env_params.get("p", 1.5))
        bound = lp_regret_bound(config.n, config.T, p)
        out["bound.lp"] = bound
        out["verdict.lp_bound"] = "PASS" if mean <= bound else "FAIL"
    if config.env == "gaussian-lb":
        floor = 0.5 * math.sqrt((config.n) * config.T)
        out["floor.gaussian"] = floor
        out["verdict.gaussian_floor"] = "PASS" if mean >= floor else "FAIL"
    if config.env == "starved-bernoulli" and config.strategy == "explore-commit":
        floor = 0.02 * config.n ** (1 / 3) * config.T ** (2 / 3)
        out["floor.starved"] = floor
        out["verdict.starved_floor"] = "PASS" if mean >= floor else "FAIL"
    return out


def _print_summary(summary):
    for key, value in summary.items():
        print(f"{key}={value}")


def _cmd_run(args, starved=False):
    config = config_from_args(args)
    result = run_experiment(config, starved=starved)
    out = _out_dir(args)
    result.write(out)
    summary = {**result.summary(), **verdicts(result.summary(), config)}
    write_summary(out / "summary.txt", summary)
    _print_summary(summary)
    print(f"wrote {len(result.curves)} curves to {out}")
    return 0


def _cmd_sweep(args):
    config = config_from_args(args)
    name, values = _parse_vary(args.vary)
    res = sweep(config, name, values)
    out = _out_dir(args)
    for v, sub in zip(values, res.results):
        sub.write(out / f"{name}={v}")
    summary = res.summary()
    write_summary(out / "summary.txt", summary)
    _print_summary(summary)
    return 0


def _cmd_verify(args):
    results = certificates.run_all(args.seed, args.suite)
    for r in results:
        print(r.line())
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} suites passed")
    return 0 if failed == 0 else 1


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "starved-run":
            return _cmd_run(args, starved=True)
        if args.command == "sweep":
            return _cmd_sweep(args)
        return _cmd_verify(args)
    except (ValueError, TypeError) as exc:
        print(f"curvbandit: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
