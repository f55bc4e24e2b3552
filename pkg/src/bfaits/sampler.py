"""Top-two Thompson sampling for best feasible arm identification."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .posterior import DEFAULT_DRAWS, PosteriorState, estimate_p
from .problem import classify_arms_lenient
from .rates import min_competitor_rate, plug_in

ALGORITHMS = ("bfai-ts", "bfai-ts-1", "uniform")

BETA_STEP = 0.02
BETA_MIN = 0.05
BETA_MAX = 0.95


@dataclass(frozen=True)
class SamplerConfig:
    beta: float = 0.5
    n0: int = 6
    resample_cap: int = 100
    adaptive_beta: bool = False
    adapt_period: int = 100

    def __post_init__(self):
        if not 0.0 < self.beta <= 1.0:
            raise ValueError(f"beta must lie in (0, 1], got {self.beta}")
        if self.n0 < 1:
            raise ValueError("n0 must be >= 1")
        if self.resample_cap < 1:
            raise ValueError("resample_cap must be >= 1")
        if self.adapt_period < 1:
            raise ValueError("adapt_period must be >= 1")


@dataclass(frozen=True)
class RoundTrace:
    round: int
    leader: int
    played: int
    challenger: int | None
    coin: bool
    attempts: int
    exact_fallback: bool = False


def select_arm(state: PosteriorState, cfg: SamplerConfig, gamma, rng, round_index: int = 0) -> RoundTrace:
    """Choose the arm to play for one round.

    A posterior draw names the leader (uniform if no arm is feasible in the
    draw).  With probability ``cfg.beta`` the leader is played; otherwise
    draws are repeated until one names a different arm.  After
    ``cfg.resample_cap`` failed redraws the challenger is sampled directly from
    the law of the first successful redraw, so the cap bounds the work
    without changing the distribution.
    """
    sd = state.post_sd()
    theta = np.empty_like(state.post_mean)
    gamma = np.asarray(gamma, dtype=float).reshape(-1)
    played, lead, ch, coin, attempts, exact = _kernels.select_round(
        state.post_mean, sd, gamma, float(cfg.beta), int(cfg.resample_cap), rng, theta
    )
    return RoundTrace(round_index, int(lead), int(played), None if ch < 0 else int(ch), bool(coin), int(attempts), bool(exact))


def recommend(state: PosteriorState, gamma) -> int:
    """Plug-in best feasible arm of the posterior means."""
    state.require_informed()
    return classify_arms_lenient(state.post_mean, gamma, state.post_var).best


def selection_probabilities(p, c, beta):
    """Per-arm probability of being played in one round, given the posterior.

    ``p[i]`` is the posterior probability that arm i is best feasible and
    ``c`` the probability that a draw has no feasible arm.  The leader is
    arm i with probability ``p[i] + c/k``; given leader i, the challenger is
    j with probability ``(p[j] + c/(k-1)) / (1 - p[i])``.  With ``c = 0``
    this is ``beta p_j + (1 - beta) p_j sum_{i != j} p_i / (1 - p_i)``.
    A leader with ``p[i] = 1`` contributes no challenger mass (0/0 read as 0).
    """
    p = np.asarray(p, dtype=float)
    k = p.size
    lead = p + c / k
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(p < 1.0, lead / (1.0 - p), 0.0)
    return beta * lead + (1.0 - beta) * (p + c / (k - 1)) * (w.sum() - w)


def phi_estimate(state: PosteriorState, cfg: SamplerConfig, gamma, draws: int = DEFAULT_DRAWS, rng=None):
    """Selection probabilities two ways at a frozen posterior.

    Returns ``(phi, empirical)``: ``phi`` plugs Monte-Carlo estimates of the
    posterior probabilities into :func:`selection_probabilities`, and
    ``empirical`` is the play frequency over ``draws`` independent rounds.
    """
    rng = np.random.default_rng(rng)
    gamma = np.asarray(gamma, dtype=float).reshape(-1)
    p, c = estimate_p(state, gamma, draws, rng)
    phi = selection_probabilities(p, c, cfg.beta)
    hist, _ = _kernels.play_counts(state.post_mean, state.post_sd(), gamma, float(cfg.beta), int(cfg.resample_cap), int(draws), rng)
    return phi, hist / draws


def adapt_beta(state: PosteriorState, beta: float, gamma, step: float = BETA_STEP, lo: float = BETA_MIN, hi: float = BETA_MAX) -> float:
    """One hill-climbing step of beta on the plug-in minimum competitor rate.

    Rates are evaluated at the plug-in optimal allocation for each candidate
    (``beta - step``, ``beta``, ``beta + step``, clamped to ``[lo, hi]``); the
    current value wins ties.
    """
    state.require_informed()
    inst = plug_in(state.post_mean, state.sampling_var, gamma)
    current = min(max(beta, lo), hi)
    candidates = [current, min(max(beta - step, lo), hi), min(max(beta + step, lo), hi)]
    try:
        scores = [min_competitor_rate(inst, b) for b in candidates]
    except Exception:
        # plug-in means can be degenerate early on (e.g. nothing feasible)
        return current
    best = int(np.argmax(scores))
    return float(candidates[best])


def uniform_arm(t: int, k: int, offset: int) -> int:
    """Round-robin arm for pull ``t`` with a random starting offset."""
    return (offset + t) % k
