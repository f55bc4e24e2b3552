"""Command-line front end.

Arms are numbered from 1 in every file and table this module writes.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass

import numpy as np

from .errors import BFAIError, InvalidInstance, UnknownId
from .experiments import EXPERIMENT_IDS, build
from .harness import resolve_beta, run_macro, run_once
from .posterior import PosteriorState
from .problem import load_instance
from .rates import optimal_beta, solve_allocation
from .sampler import ALGORITHMS, SamplerConfig, phi_estimate

SUBCOMMANDS = ("run", "rates", "allocate", "phi-check", "trace", "export")


class UsageError(Exception):
    """Bad command-line input; reported with exit code 2."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass(frozen=True)
class CliConfig:
    subcommand: str
    experiment: str | None = None
    instance: str | None = None
    algorithm: str = "bfai-ts"
    beta: float | str = 0.5
    budgets: tuple[int, ...] = ()
    reps: int = 100
    seed: int = 0
    n0: int = 6
    parallelism: int = 1
    output: str | None = None
    format: str = "csv"
    draws: int = 100_000
    every: int = 100


def _beta(text: str):
    if text == "star":
        return "star"
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid beta {text!r}: expected a number in (0, 1] or 'star'") from None
    if not 0.0 < value <= 1.0:
        raise argparse.ArgumentTypeError(f"invalid beta {text!r}: must lie in (0, 1]")
    return value


def _budgets(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid budget list {text!r}") from None
    if not values or any(v < 1 for v in values) or list(values) != sorted(set(values)):
        raise argparse.ArgumentTypeError(f"invalid budget list {text!r}: need strictly increasing positive integers")
    return values


def _positive(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bfaits", description="Best feasible arm identification with top-two Thompson sampling.")
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    def common(p, fmt_default="csv"):
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--experiment", choices=EXPERIMENT_IDS, help="built-in benchmark instance")
        src.add_argument("--instance", metavar="PATH", help="instance file (JSON)")
        p.add_argument("--output", "-o", metavar="PATH", help="write here instead of standard output")
        p.add_argument("--format", choices=("csv", "json"), default=fmt_default)

    p = sub.add_parser("run", help="macro-replications at one or more budgets")
    common(p)
    p.add_argument("--algo", dest="algorithm", choices=ALGORITHMS, default="bfai-ts")
    p.add_argument("--beta", type=_beta, default=0.5, help="leader share, or 'star' for the rate-optimal value")
    p.add_argument("--budgets", type=_budgets, required=True, help="comma-separated, e.g. 200,400,800")
    p.add_argument("--reps", type=_positive, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n0", type=_positive, default=6)
    p.add_argument("--parallelism", type=_positive, default=1)

    p = sub.add_parser("rates", help="optimal beta, its allocation and per-arm rate terms")
    common(p)

    p = sub.add_parser("allocate", help="optimal allocation and rate at a given beta")
    common(p)
    p.add_argument("--beta", type=_beta, required=True)

    p = sub.add_parser("phi-check", help="closed-form vs empirical selection probabilities at a warm-started state")
    common(p)
    p.add_argument("--beta", type=_beta, default=0.5)
    p.add_argument("--n0", type=_positive, default=6, help="warm-up samples per arm")
    p.add_argument("--draws", type=_positive, default=100_000)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("trace", help="sampling rates and recommendation along one run")
    common(p)
    p.add_argument("--algo", dest="algorithm", choices=ALGORITHMS, default="bfai-ts")
    p.add_argument("--beta", type=_beta, default=0.5)
    p.add_argument("--budgets", type=_budgets, required=True, help="the last entry is the run length")
    p.add_argument("--every", type=_positive, default=100, help="record every this many pulls")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n0", type=_positive, default=6)

    p = sub.add_parser("export", help="write the instance file of a built-in experiment")
    common(p, fmt_default="json")
    return parser


def parse_config(argv) -> CliConfig:
    ns = build_parser().parse_args(argv)
    fields = {name: getattr(ns, name) for name in CliConfig.__dataclass_fields__ if hasattr(ns, name)}
    return CliConfig(**fields)


def _load(cfg: CliConfig):
    if cfg.experiment is not None:
        return cfg.experiment, build(cfg.experiment).instance
    try:
        return cfg.instance, load_instance(cfg.instance)
    except OSError as exc:
        raise UsageError(f"cannot read instance file {cfg.instance!r}: {exc.strerror}") from None
    except InvalidInstance as exc:
        raise UsageError(f"malformed instance file {cfg.instance!r}: {exc}") from None


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _table(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _dump(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _cmd_rates(cfg: CliConfig, instance, beta_key: str, profile) -> str:
    cls = instance.classification
    if cfg.format == "json":
        return _dump({
            beta_key: profile.beta,
            "gamma_rate": profile.gamma_rate,
            "best": cls.best + 1,
            "alpha": profile.alpha.tolist(),
            "rate": profile.r.tolist(),
            "group": [cls.group_of(i) for i in range(instance.k)],
        })
    rows = [
        [i + 1, cls.group_of(i), _fmt(profile.alpha[i]), _fmt(profile.r[i]), _fmt(profile.beta), _fmt(profile.gamma_rate)]
        for i in range(instance.k)
    ]
    return _table(["arm", "group", "alpha", "rate", beta_key, "gamma_rate"], rows)


def _cmd_phi(cfg: CliConfig, instance) -> str:
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed]))
    state = PosteriorState.for_instance(instance)
    sd = np.sqrt(instance.sigma2)
    for i in range(instance.k):
        for _ in range(cfg.n0):
            state.update(i, instance.mu[i] + sd[i] * rng.standard_normal(instance.m + 1))
    beta = resolve_beta(instance, "bfai-ts", cfg.beta)
    phi, emp = phi_estimate(state, SamplerConfig(beta=beta), instance.gamma, cfg.draws, rng)
    if cfg.format == "json":
        return _dump({"beta": beta, "draws": cfg.draws, "phi": phi.tolist(), "empirical": emp.tolist(),
                      "max_abs_diff": float(np.max(np.abs(phi - emp)))})
    rows = [[i + 1, _fmt(phi[i]), _fmt(emp[i]), _fmt(abs(phi[i] - emp[i]))] for i in range(instance.k)]
    return _table(["arm", "phi", "empirical", "abs_diff"], rows)


def _cmd_trace(cfg: CliConfig, instance) -> str:
    budget = cfg.budgets[-1]
    start = instance.k * cfg.n0
    marks = sorted(set(range(start, budget + 1, cfg.every)) | {start, budget} | set(cfg.budgets))
    marks = [t for t in marks if t >= start]
    result = run_once(instance, cfg.algorithm, cfg.beta, budget, cfg.seed, n0=cfg.n0, checkpoints=marks)
    if cfg.format == "json":
        return _dump({"seed": cfg.seed, "checkpoints": [
            {"round": c.round, "recommendation": c.recommendation + 1, "counts": list(c.counts)} for c in result.checkpoints
        ]})
    rows = [[c.round, c.recommendation + 1, *(_fmt(x / c.round) for x in c.counts)] for c in result.checkpoints]
    return _table(["round", "recommendation", *(f"rate_{i + 1}" for i in range(instance.k))], rows)


def execute(cfg: CliConfig) -> str:
    name, instance = _load(cfg)
    if cfg.subcommand == "run":
        for b in cfg.budgets:
            if b < instance.k * cfg.n0:
                raise UsageError(f"budget {b} is below the warm-up size k*n0 = {instance.k * cfg.n0}")
        spec = build(cfg.experiment) if cfg.experiment else instance
        report = run_macro(spec, cfg.algorithm, cfg.beta, cfg.budgets, cfg.reps, cfg.seed, cfg.parallelism,
                           n0=cfg.n0, log=sys.stderr)
        if cfg.experiment is None:
            report.experiment = name
        return report.to_json() if cfg.format == "json" else report.to_csv()
    if cfg.subcommand == "rates":
        _, profile = optimal_beta(instance)
        return _cmd_rates(cfg, instance, "beta_star", profile)
    if cfg.subcommand == "allocate":
        beta = resolve_beta(instance, "bfai-ts", cfg.beta)
        if beta >= 1.0:
            raise UsageError("allocate needs beta strictly below 1")
        return _cmd_rates(cfg, instance, "beta", solve_allocation(instance, beta))
    if cfg.subcommand == "phi-check":
        return _cmd_phi(cfg, instance)
    if cfg.subcommand == "trace":
        return _cmd_trace(cfg, instance)
    if cfg.subcommand == "export":
        return _dump(instance.to_dict())
    raise UsageError(f"unknown subcommand {cfg.subcommand!r}")


def main(argv=None) -> int:
    try:
        cfg = parse_config(sys.argv[1:] if argv is None else argv)
        text = execute(cfg)
        if cfg.output:
            with open(cfg.output, "w", newline="") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    except UsageError as exc:
        print(f"bfaits: error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except (BFAIError, UnknownId, ValueError, OSError) as exc:
        print(f"bfaits: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
