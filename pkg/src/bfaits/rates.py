"""Large-deviations rates of posterior convergence and the optimal allocation.

Terms follow one scale throughout: the per-arm rate ``R_i`` omits the factor
1/2 and the posterior convergence rate is ``Gamma = min_i R_i / 2`` once the
best arm's own feasibility term is included in the minimum.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BadArm, Degenerate
from .problem import ArmClassification, classify_arms_lenient

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True, eq=False)
class PlugIn:
    """Unvalidated stand-in for a problem instance (e.g. posterior means)."""

    mu: np.ndarray
    sigma2: np.ndarray
    gamma: np.ndarray
    classification: ArmClassification

    @property
    def k(self) -> int:
        return self.mu.shape[0]

    @property
    def best(self) -> int:
        return self.classification.best


def plug_in(mu, sigma2, gamma) -> PlugIn:
    mu = np.asarray(mu, dtype=float)
    sigma2 = np.broadcast_to(np.asarray(sigma2, dtype=float), mu.shape)
    gamma = np.asarray(gamma, dtype=float).reshape(-1)
    return PlugIn(mu, sigma2, gamma, classify_arms_lenient(mu, gamma, sigma2))


@dataclass(frozen=True, eq=False)
class AllocationProfile:
    beta: float
    best: int
    alpha: np.ndarray
    r: np.ndarray
    gamma_rate: float
    level: float


class _Coefficients:
    """R_i(a) = gap_i / (var_i / a + var_best / beta) + a * viol_i for i != best."""

    def __init__(self, instance):
        cls = instance.classification
        mu, s2, gamma = instance.mu, instance.sigma2, instance.gamma
        b = cls.best
        self.best = b
        self.others = np.array([i for i in range(mu.shape[0]) if i != b], dtype=int)
        if self.others.size == 0:
            raise Degenerate("no competitor arms")
        objective_arms = set(cls.feasible_suboptimal) | set(cls.infeasible_worse)
        constraint_arms = set(cls.infeasible_better) | set(cls.infeasible_worse)
        gap, viol = [], []
        for i in self.others:
            gap.append((mu[i, 0] - mu[b, 0]) ** 2 if i in objective_arms else 0.0)
            cols = list(cls.violated[i]) if i in constraint_arms else []
            viol.append(float(np.sum((mu[i, cols] - gamma[np.array(cols, dtype=int) - 1]) ** 2 / s2[i, cols])))
        self.gap = np.array(gap)
        self.var = s2[self.others, 0].copy()
        self.viol = np.array(viol)
        self.var_best = s2[b, 0]
        sat = list(cls.satisfied[b])
        if sat:
            cols = np.array(sat)
            self.best_feas = float(np.min((mu[b, cols] - gamma[cols - 1]) ** 2 / s2[b, cols]))
        else:
            self.best_feas = math.inf
        self.pure_obj = self.viol == 0
        self.pure_con = self.gap == 0
        if np.any(self.pure_obj & self.pure_con):
            # only reachable from lenient plug-in classifications
            raise Degenerate("a competitor arm contributes no rate at any allocation")

    def rate(self, alpha, beta):
        alpha = np.asarray(alpha, dtype=float)
        with np.errstate(divide="ignore"):
            obj = np.where(self.gap > 0, self.gap / (self.var / alpha + self.var_best / beta), 0.0)
        return obj + alpha * self.viol

    def alpha_at(self, level, beta):
        """Unique allocation of each competitor whose rate equals ``level``."""
        s = self.var_best / beta
        out = np.empty(self.gap.shape)
        po, pc = self.pure_obj, self.pure_con
        both = ~po & ~pc
        with np.errstate(divide="ignore", invalid="ignore"):
            out[po] = self.var[po] / (self.gap[po] / level - s)
        out[pc] = level / self.viol[pc]
        if both.any():
            a, v, c = self.gap[both], self.var[both], self.viol[both]
            # c s x^2 + (a + c v - level s) x - level v = 0, positive root
            lin = a + c * v - level * s
            disc = np.sqrt(lin * lin + 4.0 * c * s * level * v)
            out[both] = np.where(lin > 0, 2.0 * level * v / (lin + disc), (disc - lin) / (2.0 * c * s))
        return out

    def level_cap(self, beta):
        po = self.pure_obj
        if po.any():
            return float(np.min(self.gap[po] * beta / self.var_best))
        return math.inf


def rate_term(instance, classification, i: int, alpha_i: float, beta: float) -> float:
    """Rate term R_i of competitor ``i`` at allocation ``alpha_i`` (best arm share ``beta``)."""
    if i == classification.best:
        raise BadArm("the rate term is defined for competitor arms only")
    if alpha_i <= 0 or beta <= 0:
        raise ValueError("allocations must be positive")
    b = classification.best
    mu, s2, gamma = instance.mu, instance.sigma2, instance.gamma
    value = 0.0
    if i in classification.feasible_suboptimal or i in classification.infeasible_worse:
        value += (mu[i, 0] - mu[b, 0]) ** 2 / (s2[i, 0] / alpha_i + s2[b, 0] / beta)
    if i in classification.infeasible_better or i in classification.infeasible_worse:
        for j in classification.violated[i]:
            value += alpha_i * (mu[i, j] - gamma[j - 1]) ** 2 / s2[i, j]
    return value


def solve_allocation(instance, beta: float) -> AllocationProfile:
    """Allocation of the competitors that equalizes their rate terms.

    Each R_i is strictly increasing in its own share, so the shares at a
    common level are unique; the level is found by root-finding on the total
    share ``1 - beta``.
    """
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    co = _Coefficients(instance)
    target = 1.0 - beta

    def total(level):
        return float(np.sum(co.alpha_at(level, beta)))

    lo, hi = 0.0, co.level_cap(beta)
    if math.isinf(hi):
        hi = 1.0
        while total(hi) < target:
            lo, hi = hi, 2.0 * hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if total(mid) < target:
            lo = mid
        else:
            hi = mid
    level = lo
    shares = co.alpha_at(level, beta)
    shares *= target / shares.sum()
    alpha = np.empty(co.others.size + 1)
    alpha[co.others] = shares
    alpha[co.best] = beta
    r = np.empty_like(alpha)
    r[co.others] = co.rate(shares, beta)
    r[co.best] = beta * co.best_feas
    return AllocationProfile(float(beta), co.best, alpha, r, float(np.min(r) / 2.0), float(level))


def gamma_beta(instance, beta: float) -> float:
    """Posterior convergence rate at best-arm share ``beta`` and its optimal allocation."""
    return solve_allocation(instance, beta).gamma_rate


def optimal_beta(instance, lo: float = 0.01, hi: float = 0.99, tol: float = 1e-4, grid_step: float = 0.01):
    """Maximize ``gamma_beta`` over beta: guard grid, then golden-section refinement.

    Returns ``(beta_star, profile)``.
    """
    grid = np.round(np.arange(lo, hi + grid_step / 2, grid_step), 12)
    values = np.array([gamma_beta(instance, b) for b in grid])
    g = int(np.argmax(values))
    a, c = grid[max(g - 1, 0)], grid[min(g + 1, grid.size - 1)]

    def f(b):
        return gamma_beta(instance, b)

    x1 = c - GOLDEN * (c - a)
    x2 = a + GOLDEN * (c - a)
    f1, f2 = f(x1), f(x2)
    while c - a > tol:
        if f1 >= f2:
            c, x2, f2 = x2, x1, f1
            x1 = c - GOLDEN * (c - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + GOLDEN * (c - a)
            f2 = f(x2)
    candidates = [(values[g], grid[g]), (f1, x1), (f2, x2), (f(0.5 * (a + c)), 0.5 * (a + c))]
    best_value = max(v for v, _ in candidates)
    beta_star = min(b for v, b in candidates if v == best_value)
    return float(beta_star), solve_allocation(instance, float(beta_star))


def min_competitor_rate(instance, beta: float) -> float:
    """min_{i != best} R_i at the optimal allocation for ``beta``."""
    prof = solve_allocation(instance, beta)
    mask = np.ones(prof.alpha.size, dtype=bool)
    mask[instance.classification.best] = False
    return float(np.min(prof.r[mask]))


def fe_log_rate(mu, sigma2, gamma, counts, n=None):
    """Per-arm exponents of the false-evaluation probabilities, divided by ``n``.

    ``mu`` are the (plug-in) means, ``counts`` the per-arm sample counts (may
    be fractional).  Returns ``(per_arm, combined)`` where ``per_arm[i]`` is
    ``-(1/n) log`` of the logarithmic equivalent of P{FE_i} and ``combined``
    is their minimum, the exponent of the posterior probability of false
    selection.
    """
    inst = plug_in(mu, sigma2, gamma)
    cls = inst.classification
    counts = np.asarray(counts, dtype=float)
    if np.any(counts <= 0):
        raise ValueError("all counts must be positive")
    n = float(np.sum(counts) if n is None else n)
    mu, s2, gamma = inst.mu, inst.sigma2, inst.gamma
    b = cls.best
    out = np.zeros(inst.k)
    if cls.violated[b]:
        out[b] = 0.0
    elif cls.satisfied[b]:
        cols = np.array(cls.satisfied[b])
        out[b] = np.min((gamma[cols - 1] - mu[b, cols]) ** 2 / (2.0 * s2[b, cols] / counts[b]))
    else:
        out[b] = math.inf
    objective_arms = set(cls.feasible_suboptimal) | set(cls.infeasible_worse)
    constraint_arms = set(cls.infeasible_better) | set(cls.infeasible_worse)
    for i in range(inst.k):
        if i == b:
            continue
        value = 0.0
        if i in objective_arms:
            value += (mu[i, 0] - mu[b, 0]) ** 2 / (2.0 * (s2[i, 0] / counts[i] + s2[b, 0] / counts[b]))
        if i in constraint_arms:
            for j in cls.violated[i]:
                value += (gamma[j - 1] - mu[i, j]) ** 2 / (2.0 * s2[i, j] / counts[i])
        out[i] = value
    out /= n
    return out, float(np.min(out))


def hitting_time(history_means, history_counts, instance, beta: float, epsilon: float, horizon: int | None = None):
    """First round after which means and sampling rates stay within ``epsilon``.

    ``history_means[t]``/``history_counts[t]`` describe the state after
    ``t + 1`` rounds.  Returns a 1-based round index or ``None`` if the
    accuracy condition does not hold through ``horizon``.
    """
    means = np.asarray(history_means, dtype=float)
    counts = np.asarray(history_counts, dtype=float)
    horizon = means.shape[0] if horizon is None else int(horizon)
    means, counts = means[:horizon], counts[:horizon]
    if math.isinf(epsilon):
        return 1
    alpha = solve_allocation(instance, beta).alpha
    n = np.arange(1, horizon + 1, dtype=float)
    with np.errstate(invalid="ignore"):
        mean_ok = np.all(np.abs(means - instance.mu) <= epsilon, axis=(1, 2))
        rate_ok = np.all(np.abs(counts / n[:, None] - alpha) <= epsilon, axis=1)
    ok = mean_ok & rate_ok
    bad = np.flatnonzero(~ok)
    if bad.size == 0:
        return 1
    t = int(bad[-1]) + 2
    return t if t <= horizon else None
