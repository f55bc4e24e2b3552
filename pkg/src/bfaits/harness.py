"""Macro-replication runner, report assembly and posterior-PFS curves."""
from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import BudgetTooSmall
from .experiments import ExperimentSpec, build
from .posterior import PosteriorState, estimate_p
from .problem import ProblemInstance
from .rates import fe_log_rate, optimal_beta
from .sampler import ALGORITHMS, SamplerConfig, adapt_beta, recommend, select_arm

_ALGO_CODE = {"bfai-ts": _kernels.ALGO_TS, "bfai-ts-1": _kernels.ALGO_TS, "uniform": _kernels.ALGO_UNIFORM}


@dataclass(frozen=True)
class Checkpoint:
    round: int
    recommendation: int
    counts: tuple[int, ...]
    posterior_pfs: float | None = None


@dataclass(frozen=True)
class RunResult:
    seed: tuple[int, ...]
    recommendation: int
    counts: tuple[int, ...]
    checkpoints: tuple[Checkpoint, ...]
    exact_fallbacks: int = 0


def _resolve(spec) -> tuple[str, ProblemInstance, int]:
    if isinstance(spec, str):
        spec = build(spec)
    if isinstance(spec, ExperimentSpec):
        return spec.id, spec.instance, spec.n0
    if isinstance(spec, ProblemInstance):
        return "custom", spec, 6
    raise TypeError(f"expected an experiment id, ExperimentSpec or ProblemInstance, got {type(spec).__name__}")


def resolve_beta(instance: ProblemInstance, algorithm: str, beta) -> float | None:
    """Numeric leader share for ``algorithm``; ``"star"`` means the rate-optimal value."""
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}; expected one of {', '.join(ALGORITHMS)}")
    if algorithm == "uniform":
        return None
    if algorithm == "bfai-ts-1":
        return 1.0
    if beta == "star":
        return optimal_beta(instance)[0]
    beta = float(beta)
    if not 0.0 < beta <= 1.0:
        raise ValueError(f"beta must lie in (0, 1], got {beta}")
    return beta


def _seed_tuple(seed) -> tuple[int, ...]:
    if isinstance(seed, (int, np.integer)):
        return (int(seed),)
    return tuple(int(s) for s in seed)


def run_once(spec, algorithm: str, beta, budget: int, seed, n0: int | None = None,
             checkpoints=None, resample_cap: int = 100, adaptive_beta: bool = False,
             adapt_period: int = 100) -> RunResult:
    """One end-to-end run: ``n0`` warm-up pulls per arm, then sampling to ``budget`` pulls.

    Warm-up pulls count toward the budget.  ``seed`` is an int or a tuple of
    ints fed to ``numpy.random.SeedSequence``.  The recommendation at each
    checkpoint (default: the budget only) is the posterior-mean plug-in best
    feasible arm.
    """
    _, instance, default_n0 = _resolve(spec)
    n0 = default_n0 if n0 is None else int(n0)
    k = instance.k
    if budget < k * n0:
        raise BudgetTooSmall(f"budget {budget} is below the warm-up size k*n0 = {k * n0}")
    beta_value = resolve_beta(instance, algorithm, beta)
    ck = np.array(sorted({int(budget)} if checkpoints is None else set(int(c) for c in checkpoints)), dtype=np.int64)
    if ck.size and (ck[0] < 1 or ck[-1] > budget):
        raise ValueError("checkpoints must lie in [1, budget]")
    seed = _seed_tuple(seed)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    if adaptive_beta and algorithm == "bfai-ts":
        return _run_adaptive(instance, beta_value, budget, n0, ck, rng, seed, resample_cap, adapt_period)
    count, _, _, ck_rec, ck_counts, _, _, exact = _kernels.run_path(
        instance.mu, instance.sigma2, instance.gamma, _ALGO_CODE[algorithm],
        1.0 if beta_value is None else beta_value, n0, int(budget), int(resample_cap), ck, rng, False,
    )
    points = tuple(Checkpoint(int(r), int(rec), tuple(int(c) for c in cnt)) for r, rec, cnt in zip(ck, ck_rec, ck_counts))
    final = points[-1].recommendation if points and points[-1].round == budget else None
    if final is None:
        raise ValueError("the budget must be among the checkpoints")
    return RunResult(seed, final, tuple(int(c) for c in count), points, int(exact))


def _run_adaptive(instance, beta, budget, n0, ck, rng, seed, cap, period) -> RunResult:
    """Python-level loop that re-tunes beta every ``period`` rounds."""
    state = PosteriorState.for_instance(instance)
    sd = np.sqrt(instance.sigma2)
    k = instance.k
    points = []
    exact = 0
    ck_list = list(ck)

    def pull(arm, t):
        state.update(arm, instance.mu[arm] + sd[arm] * rng.standard_normal(instance.m + 1))
        while ck_list and ck_list[0] == t:
            rec = recommend(state, instance.gamma) if not state.uninformed.any() else -1
            points.append(Checkpoint(int(ck_list.pop(0)), int(rec), tuple(int(c) for c in state.count)))

    t = 0
    for arm in range(k):
        for _ in range(n0):
            t += 1
            pull(arm, t)
    while t < budget:
        if (t - k * n0) % period == 0 and t > k * n0:
            beta = adapt_beta(state, beta, instance.gamma)
        trace = select_arm(state, SamplerConfig(beta=beta, resample_cap=cap), instance.gamma, rng, t)
        exact += trace.exact_fallback
        t += 1
        pull(trace.played, t)
    return RunResult(seed, points[-1].recommendation, tuple(int(c) for c in state.count), tuple(points), exact)


@dataclass(eq=False)
class ExperimentReport:
    experiment: str
    algorithm: str
    beta: float | None
    budgets: tuple[int, ...]
    reps: int
    base_seed: int
    pfs: np.ndarray
    pfs_stderr: np.ndarray
    rates: np.ndarray
    n0: int = 6
    best: int = 0
    posterior_pfs: list | None = None
    wall_clock: dict = field(default_factory=dict, compare=False)

    def rows(self):
        """One flat record per budget (arms 1-based in column names)."""
        k = self.rates.shape[1]
        for b, budget in enumerate(self.budgets):
            row = {
                "experiment": self.experiment,
                "algorithm": self.algorithm,
                "beta": "" if self.beta is None else _fmt(self.beta),
                "budget": str(budget),
                "reps": str(self.reps),
                "base_seed": str(self.base_seed),
                "n0": str(self.n0),
                "best": str(self.best + 1),
                "pfs": _fmt(self.pfs[b]),
                "stderr": _fmt(self.pfs_stderr[b]),
            }
            for i in range(k):
                row[f"rate_{i + 1}"] = _fmt(self.rates[b, i])
            yield row

    def to_csv(self) -> str:
        buf = io.StringIO()
        rows = list(self.rows())
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        return buf.getvalue()

    def to_dict(self) -> dict:
        # wall-clock timings are left out so that output bytes are reproducible
        return {
            "experiment": self.experiment,
            "algorithm": self.algorithm,
            "beta": self.beta,
            "budgets": list(self.budgets),
            "reps": self.reps,
            "base_seed": self.base_seed,
            "n0": self.n0,
            "best": self.best + 1,
            "pfs": [float(x) for x in self.pfs],
            "pfs_stderr": [float(x) for x in self.pfs_stderr],
            "rates": [[float(x) for x in row] for row in self.rates],
            "posterior_pfs": self.posterior_pfs,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def _fmt(x) -> str:
    return format(float(x), ".17g")


def read_report_csv(text: str) -> ExperimentReport:
    """Parse the output of :meth:`ExperimentReport.to_csv`."""
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows:
        raise ValueError("empty report")
    first = rows[0]
    k = sum(1 for name in first if name.startswith("rate_"))
    return ExperimentReport(
        experiment=first["experiment"],
        algorithm=first["algorithm"],
        beta=None if first["beta"] == "" else float(first["beta"]),
        budgets=tuple(int(r["budget"]) for r in rows),
        reps=int(first["reps"]),
        base_seed=int(first["base_seed"]),
        pfs=np.array([float(r["pfs"]) for r in rows]),
        pfs_stderr=np.array([float(r["stderr"]) for r in rows]),
        rates=np.array([[float(r[f"rate_{i + 1}"]) for i in range(k)] for r in rows]),
        n0=int(first["n0"]),
        best=int(first["best"]) - 1,
    )


def read_report_json(text: str) -> ExperimentReport:
    d = json.loads(text)
    return ExperimentReport(
        experiment=d["experiment"], algorithm=d["algorithm"], beta=d["beta"], budgets=tuple(d["budgets"]),
        reps=d["reps"], base_seed=d["base_seed"], pfs=np.array(d["pfs"], dtype=float),
        pfs_stderr=np.array(d["pfs_stderr"], dtype=float), rates=np.array(d["rates"], dtype=float),
        n0=d["n0"], best=d["best"] - 1, posterior_pfs=d.get("posterior_pfs"),
    )


def _task(args):
    spec, algorithm, beta, budget, seed, n0, cap = args
    r = run_once(spec, algorithm, beta, budget, seed, n0=n0, resample_cap=cap)
    return r.recommendation, r.counts


def run_macro(spec, algorithm: str, beta, budgets, reps: int, base_seed: int = 0, parallelism: int = 1,
              n0: int | None = None, resample_cap: int = 100, log=None) -> ExperimentReport:
    """``reps`` independent runs per budget, aggregated into PFS and mean sampling rates.

    The run for replication ``r`` at the ``b``-th budget is seeded with
    ``SeedSequence([base_seed, r, b])``, so the report does not depend on
    ``parallelism`` or on the order in which runs finish.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    exp_id, instance, default_n0 = _resolve(spec)
    n0 = default_n0 if n0 is None else int(n0)
    budgets = tuple(int(b) for b in budgets)
    if not budgets:
        raise ValueError("at least one budget is required")
    for b in budgets:
        if b < instance.k * n0:
            raise BudgetTooSmall(f"budget {b} is below the warm-up size k*n0 = {instance.k * n0}")
    beta_value = resolve_beta(instance, algorithm, beta)
    # workers receive the resolved numeric beta so that "star" is solved once
    task_beta = 1.0 if beta_value is None else beta_value
    k = instance.k
    best = instance.best
    wrong = np.zeros(len(budgets), dtype=np.int64)
    count_sum = np.zeros((len(budgets), k), dtype=np.int64)
    timings = {}
    pool = ProcessPoolExecutor(max_workers=parallelism) if parallelism > 1 else None
    try:
        for b, budget in enumerate(budgets):
            start = time.perf_counter()
            tasks = [(instance, algorithm, task_beta, budget, (int(base_seed), r, b), n0, resample_cap) for r in range(reps)]
            results = pool.map(_task, tasks, chunksize=max(1, reps // (4 * parallelism))) if pool else map(_task, tasks)
            for rec, counts in results:
                wrong[b] += rec != best
                count_sum[b] += counts
            timings[budget] = time.perf_counter() - start
            if log is not None:
                print(f"{exp_id} {algorithm} budget={budget} pfs={wrong[b] / reps:.4f} ({timings[budget]:.1f}s)", file=log)
    finally:
        if pool:
            pool.shutdown()
    pfs = wrong / reps
    stderr = np.sqrt(pfs * (1.0 - pfs) / reps)
    rates = count_sum / (np.array(budgets, dtype=float)[:, None] * reps)
    return ExperimentReport(exp_id, algorithm, beta_value, budgets, int(reps), int(base_seed), pfs, stderr, rates,
                            n0=n0, best=best, wall_clock=timings)


def largest_remainder(alpha, n: int) -> np.ndarray:
    """Integer counts summing to ``n`` closest to ``alpha * n`` (ties to the lower index)."""
    raw = np.asarray(alpha, dtype=float) * n
    counts = np.floor(raw).astype(np.int64)
    short = int(n - counts.sum())
    order = np.argsort(-(raw - counts), kind="stable")
    counts[order[:short]] += 1
    return counts


@dataclass(frozen=True)
class CurvePoint:
    n: int
    counts: tuple[int, ...]
    posterior_pfs: float | None
    fe_rate: float | None
    fe_rate_truth: float | None


def posterior_pfs_curve(spec, alpha, max_n: int, checkpoints, draws: int = 100_000, seed=0) -> list[CurvePoint]:
    """Posterior PFS along a fixed-allocation sample path.

    At each checkpoint ``n`` the counts are the largest-remainder rounding of
    ``alpha * n``; arm ``i`` has seen the first ``counts[i]`` entries of its
    own reward stream, so the paths at different checkpoints are nested
    whenever the counts are.  Reported per checkpoint: ``1 - P_hat`` for the
    true best arm (Monte-Carlo with ``draws`` posterior draws), the combined
    false-evaluation exponent with the path's posterior means, and the same
    exponent with the true means.  Entries are ``None`` while some arm is
    still unsampled.
    """
    _, instance, _ = _resolve(spec)
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (instance.k,) or np.any(alpha <= 0) or abs(alpha.sum() - 1.0) > 1e-9:
        raise ValueError("alpha must be a strictly positive probability vector of length k")
    ck = sorted(int(c) for c in checkpoints)
    if ck and (ck[0] < 1 or ck[-1] > max_n):
        raise ValueError("checkpoints must lie in [1, max_n]")
    rng = np.random.default_rng(np.random.SeedSequence(_seed_tuple(seed)))
    all_counts = [largest_remainder(alpha, n) for n in ck]
    depth = int(max(c.max() for c in all_counts)) if ck else 0
    sd = np.sqrt(instance.sigma2)
    streams = instance.mu[:, None, :] + sd[:, None, :] * rng.standard_normal((instance.k, depth, instance.m + 1))
    csum = np.concatenate([np.zeros((instance.k, 1, instance.m + 1)), np.cumsum(streams, axis=1)], axis=1)
    best = instance.best
    out = []
    for n, counts in zip(ck, all_counts):
        if np.any(counts == 0):
            out.append(CurvePoint(n, tuple(int(c) for c in counts), None, None, None))
            continue
        state = PosteriorState(instance.sigma2)
        state.count[:] = counts
        state.sum[:] = csum[np.arange(instance.k), counts]
        state.post_mean[:] = state.sum / counts[:, None]
        p, _ = estimate_p(state, instance.gamma, draws, rng)
        _, fe = fe_log_rate(state.post_mean, instance.sigma2, instance.gamma, counts)
        _, fe_truth = fe_log_rate(instance.mu, instance.sigma2, instance.gamma, counts)
        out.append(CurvePoint(n, tuple(int(c) for c in counts), float(1.0 - p[best]), fe, fe_truth))
    return out


def fit_decay_slope(curve) -> float:
    """Least-squares slope of ``-log(1 - P_hat)`` against ``n`` (skips zero estimates)."""
    pts = [(c.n, -math.log(c.posterior_pfs)) for c in curve if c.posterior_pfs]
    if len(pts) < 2:
        raise ValueError("need at least two checkpoints with a positive estimate")
    n, y = np.array(pts).T
    return float(np.polyfit(n, y, 1)[0])

