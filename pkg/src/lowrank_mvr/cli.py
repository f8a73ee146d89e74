"""Command line interface: ``lowrank-mvr {generate,fit,experiment,check}``.

Every subcommand accepts ``--config FILE`` with ``key = value`` lines
(``#`` starts a comment). Keys are option names with dashes or underscores;
command-line flags override file values and unknown keys are rejected.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .datagen import NoiseSpec, ShapeKind, SyntheticSpec, make_shape, sample_dataset, split_seed
from .evaluate import CvPlan, coefficient_rmse, prediction_error, tune_lambda
from .io import read_dataset, read_truth, write_dataset, write_truth
from .linalg import Coefficients
from .models import DEFAULT_HUBER_ALPHA, LossKind, LossModel
from .simulation import Experiment, default_workers, make_signal, run_experiment
from .solver import SolverConfig, fit
from .theory import (RATE_SLOPE_RANGE, check_assumptions, check_curvature, check_descent_lemma,
                     rate_experiment)

log = logging.getLogger("lowrank_mvr")

SHAPES = ("square", "t", "cross", "triangle", "circle", "butterfly")
MODELS = tuple(k.value for k in LossKind)
CHECKS = ("assumptions", "curvature", "descent", "rate")
MAX_FAILURE_FRACTION = 0.2


class CliError(Exception):
    pass


def _floats(text):
    return tuple(float(v) for v in str(text).replace(",", " ").split())


def _ints(text):
    return tuple(int(v) for v in str(text).replace(",", " ").split())


def _synthetic(text):
    """``m=64,q=64,r=5,s=0.05[,p=5]`` -> SyntheticSpec."""
    fields = {}
    for item in str(text).split(","):
        if not item.strip():
            continue
        key, _, val = item.partition("=")
        fields[key.strip()] = val.strip()
    unknown = set(fields) - {"m", "q", "r", "s", "p"}
    if unknown:
        raise argparse.ArgumentTypeError(f"unknown synthetic keys: {sorted(unknown)}")
    try:
        return SyntheticSpec(m=int(fields.get("m", 64)), q=int(fields.get("q", 64)),
                             p_dim=int(fields.get("p", 5)), r=int(fields.get("r", 1)),
                             s=float(fields.get("s", 0.01)))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _noise(text):
    try:
        return NoiseSpec.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def read_config(path):
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            if not sep or not key.strip():
                raise CliError(f"{path}:{lineno}: expected 'key = value'")
            values[key.strip().replace("-", "_")] = val.strip()
    return values


# ---------------------------------------------------------------------------
# parser


def _add_solver_args(p):
    p.add_argument("--rank", type=int, default=1)
    p.add_argument("--lam", type=float, default=0.0, help="l1 penalty weight")
    p.add_argument("--alpha", type=float, default=None,
                   help=f"Huber threshold for the robust model (default {DEFAULT_HUBER_ALPHA})")
    p.add_argument("--beta", type=float, default=0.5, help="line-search shrink factor")
    p.add_argument("--eps-n", type=float, default=1e-6, help="stopping tolerance on |F_k - F_k-1|")
    p.add_argument("--n-max", type=int, default=500, help="iteration cap")
    p.add_argument("--alpha-init", type=float, default=1.0)
    p.add_argument("--max-backtracks", type=int, default=60)


def _add_signal_args(p, g_default=64):
    group = p.add_mutually_exclusive_group()
    group.add_argument("--shape", choices=SHAPES, default=None)
    group.add_argument("--synthetic", type=_synthetic, default=None,
                       help="low-rank sparse signal, e.g. m=64,q=64,r=5,s=0.05")
    p.add_argument("--g", type=int, default=g_default, help="grid size of shape signals")
    p.add_argument("--p", type=int, default=5, help="length of gamma for shape signals")
    p.add_argument("--noise", type=_noise, default=NoiseSpec.gaussian(1.0),
                   help="gaussian[:sigma] | contaminated:p[:sigma[:sigma_out]] | cauchy")
    p.add_argument("--model", choices=MODELS, default="ordinary")


def build_parser():
    parser = argparse.ArgumentParser(prog="lowrank-mvr", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    subs = parser.add_subparsers(dest="command", required=True)

    def sub(name, help_):
        p = subs.add_parser(name, help=help_)
        p.add_argument("--config", default=None, help="key = value settings file")
        return p

    p = sub("generate", "write a simulated dataset and its truth sidecar")
    _add_signal_args(p)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="data.txt")
    p.add_argument("--truth-out", default=None, help="default: <out>.truth")

    p = sub("fit", "fit a dataset file and report metrics as JSON")
    p.add_argument("--data", required=False, default=None)
    _add_solver_args(p)
    p.add_argument("--truth", default=None, help="truth sidecar for coefficient RMSEs")
    p.add_argument("--test", default=None, help="dataset file for prediction error")
    p.add_argument("--lambda-grid", type=_floats, default=None,
                   help="tune lam by k-fold CV over these values")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--trace", action="store_true", help="emit the full objective trace")
    p.add_argument("--dump-coef", default=None, help="write estimates in truth-file layout")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="JSON output path (default stdout)")

    p = sub("experiment", "replicated generate / tune / fit / evaluate study")
    _add_signal_args(p)
    _add_solver_args(p)
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--n-val", type=int, default=None)
    p.add_argument("--n-test", type=int, default=None)
    p.add_argument("--lambda-grid", type=_floats, default=(0.0,))
    p.add_argument("--tuning", choices=("validation", "cv", "none"), default="validation")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=None,
                   help="parallel replicates (default from $LOWRANK_MVR_WORKERS or 1)")
    p.add_argument("--out", default=None)

    p = sub("check", "numerical checks of the theory")
    p.add_argument("which", choices=CHECKS)
    p.add_argument("--m", type=int, default=20)
    p.add_argument("--q", type=int, default=15)
    p.add_argument("--p", type=int, default=3)
    p.add_argument("--r", type=int, default=3)
    p.add_argument("--n", type=int, default=None, help="samples (default 20 (mq + p))")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--c0", type=float, default=None, help="radius (default sigma_r / 2)")
    p.add_argument("--n-probe", type=int, default=20)
    p.add_argument("--model", choices=MODELS, default="ordinary")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--noise", type=_noise, default=NoiseSpec.gaussian(1.0))
    p.add_argument("--shape", choices=SHAPES, default="square")
    p.add_argument("--g", type=int, default=32)
    p.add_argument("--n-list", type=_ints, default=(250, 500, 1000, 2000))
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    return parser, subs


def parse_args(argv=None):
    parser, subs = build_parser()
    args = parser.parse_args(argv)
    if args.config is None:
        return args
    values = read_config(args.config)
    sp = subs.choices[args.command]
    actions = {a.dest: a for a in sp._actions}
    defaults = {}
    for key, val in values.items():
        if key in ("config", "help", "which") or key not in actions:
            raise CliError(f"{args.config}: unknown key {key!r} for '{args.command}'")
        action = actions[key]
        if isinstance(action, argparse._StoreTrueAction):
            if val.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise CliError(f"{args.config}: {key} must be true or false")
            defaults[key] = val.lower() in ("true", "1", "yes")
        else:
            defaults[key] = val
    sp.set_defaults(**defaults)
    return parser.parse_args(argv)


# ---------------------------------------------------------------------------
# helpers


def _loss_model(kind, alpha):
    kind = LossKind(kind)
    if kind is LossKind.ROBUST:
        return LossModel.robust(DEFAULT_HUBER_ALPHA if alpha is None else alpha)
    return LossModel(kind)


def _solver_config(args, rank=None):
    return SolverConfig(rank=args.rank if rank is None else rank, lam=args.lam, beta=args.beta,
                        eps_n=args.eps_n, n_max=args.n_max, alpha_init=args.alpha_init,
                        max_backtracks=args.max_backtracks)


def _signal(args):
    if args.synthetic is not None:
        return args.synthetic
    return ShapeKind(args.shape or "square", args.g)


def _gamma_star(args, signal):
    if isinstance(signal, SyntheticSpec):
        return None
    return tuple([1.0] * args.p)


def _emit(payload, out):
    text = json.dumps(payload, indent=2) + "\n"
    if out is None:
        sys.stdout.write(text)
        return
    path = Path(out)
    tmp = path.with_name(path.name + ".part")
    tmp.write_text(text)
    tmp.replace(path)


# ---------------------------------------------------------------------------
# commands


def cmd_generate(args):
    signal = _signal(args)
    model = _loss_model(args.model, args.alpha)
    s_signal, s_data = split_seed(args.seed, 2)
    truth = make_signal(signal, s_signal, _gamma_star(args, signal))
    noise = None if model.kind is LossKind.LOGISTIC else args.noise
    data = sample_dataset(truth.C, truth.gamma, args.n, noise, model, seed=s_data)
    out = Path(args.out)
    truth_out = Path(args.truth_out) if args.truth_out else out.with_name(out.name + ".truth")
    write_dataset(out, data)
    write_truth(truth_out, truth)
    rank = int(np.linalg.matrix_rank(truth.C)) if np.any(truth.C) else 0
    print(f"wrote {data.n} samples (m={data.m}, q={data.q}, p={data.p}, {model.kind.value}) "
          f"to {out}; truth rank {rank} in {truth_out}")
    return 0


def cmd_fit(args):
    if args.data is None:
        raise CliError("fit needs --data")
    model_alpha = args.alpha
    data = read_dataset(args.data, alpha=model_alpha)
    if data.model.kind is LossKind.ROBUST and model_alpha is None:
        data = data.with_model(LossModel.robust())
    truth = read_truth(args.truth) if args.truth else None
    test = read_dataset(args.test, alpha=model_alpha) if args.test else data
    if test.model != data.model:
        test = test.with_model(data.model)
    config = _solver_config(args)
    cv_table = None
    if args.lambda_grid:
        plan = CvPlan(folds=args.folds, lambda_grid=args.lambda_grid, seed=args.seed)
        lam, cv_table = tune_lambda(data, config, plan)
        config = config.replace(lam=lam)
    res = fit(data, config)
    coef = res.coefficients
    rc = rg = None
    if truth is not None:
        rc, rg = coefficient_rmse(coef, truth)
    trace = list(res.objective_trace) if args.trace else [res.objective_trace[0], res.objective]
    payload = {
        "rmse_C": rc,
        "rmse_gamma": rg,
        "prediction_error": prediction_error(data.model, coef, test),
        "objective_trace": trace,
        "iterations": res.iterations,
        "termination": res.termination.value,
        "lambda": config.lam,
        "rank": config.rank,
        "seed": args.seed,
    }
    if cv_table is not None:
        payload["cv_table"] = [{k: row[k] for k in ("lambda", "mean_error", "stalls", "valid")}
                               for row in cv_table]
    if args.dump_coef:
        write_truth(args.dump_coef, coef)
    _emit(payload, args.out)
    return 0


def cmd_experiment(args):
    signal = _signal(args)
    model = _loss_model(args.model, args.alpha)
    rank = args.rank
    exp = Experiment(signal=signal, n=args.n, n_val=args.n_val, n_test=args.n_test,
                     noise=args.noise, model=model, gamma_star=_gamma_star(args, signal),
                     solver=_solver_config(args, rank), lambda_grid=args.lambda_grid,
                     tuning=args.tuning, folds=args.folds, reps=args.reps, seed=args.seed)
    result = run_experiment(exp, workers=args.workers if args.workers else default_workers())
    _emit(result, args.out)
    if result["failures"]:
        log.warning("%d of %d replications failed", result["failures"], result["reps"])
    return 1 if result["failures"] > MAX_FAILURE_FRACTION * result["reps"] else 0


def _random_lowrank(m, q, r, rng):
    return rng.standard_normal((m, r)) @ rng.standard_normal((r, q))


def cmd_check(args):
    rng = np.random.default_rng(args.seed)
    if args.which == "rate":
        shape = ShapeKind(args.shape, args.g)
        rank = int(np.linalg.matrix_rank(make_shape(shape)))
        fit_ = rate_experiment(shape, args.n_list, args.reps, SolverConfig(rank=rank),
                               seed=args.seed, noise=args.noise,
                               model=_loss_model(args.model, args.alpha))
        lo, hi = RATE_SLOPE_RANGE
        report = fit_.as_dict()
        report["slope_range"] = [lo, hi]
        report["pass"] = bool(not fit_.degenerate and lo <= fit_.slope <= hi)
        passed = report["pass"]
    elif args.which == "curvature":
        Cstar = _random_lowrank(args.m, args.q, args.r, rng)
        rep = check_curvature(Cstar, np.zeros(args.p), args.r, args.trials, seed=args.seed)
        report, passed = rep.as_dict(), rep.passed
    else:
        Cstar = _random_lowrank(args.m, args.q, args.r, rng)
        gamma = rng.standard_normal(args.p)
        model = _loss_model(args.model, args.alpha)
        n = args.n or 20 * (args.m * args.q + args.p)
        noise = None if model.kind is LossKind.LOGISTIC else args.noise
        data = sample_dataset(Cstar, gamma, n, noise, model, seed=args.seed + 1)
        truth = Coefficients(Cstar, gamma)
        sigma_r = np.linalg.svd(Cstar, compute_uv=False)[args.r - 1]
        c0 = args.c0 if args.c0 is not None else sigma_r / 2.0
        if args.which == "assumptions":
            rep = check_assumptions(data, truth, c0, args.n_probe, seed=args.seed)
            report = rep.as_dict()
            passed = all(rep.passes.values())
        else:
            rep = check_descent_lemma(data, truth, c0, trials=args.trials, seed=args.seed,
                                      rank=args.r, n_probe=args.n_probe)
            report, passed = rep.as_dict(), rep.passed
    payload = {"check": args.which, **report}
    _emit(payload, args.out)
    return 0 if passed else 1


COMMANDS = {"generate": cmd_generate, "fit": cmd_fit, "experiment": cmd_experiment,
            "check": cmd_check}


def main(argv=None):
    try:
        args = parse_args(argv)
    except CliError as exc:
        print(f"lowrank-mvr: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"lowrank-mvr: error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except (CliError, OSError, ValueError, ArithmeticError, RuntimeError) as exc:
        print(f"lowrank-mvr: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
