"""Conjugate Gaussian beliefs over every arm and measure."""
from __future__ import annotations

import numpy as np

from . import _kernels
from .errors import UninformedArm

DEFAULT_DRAWS = 10_000


class PosteriorState:
    """Per-arm, per-measure Gaussian posterior with known sampling variances.

    By default the prior is non-informative: an arm is *uninformed* until its
    first sample, after which the posterior mean is the running sample mean
    and the posterior variance is ``sampling_var / count``.  Passing
    ``prior_mean``/``prior_var`` switches to the general conjugate update with
    a finite prior.
    """

    def __init__(self, sampling_var, prior_mean=None, prior_var=None):
        self.sampling_var = np.array(sampling_var, dtype=float)
        if self.sampling_var.ndim != 2:
            raise ValueError("sampling_var must be a k x (m+1) matrix")
        k = self.sampling_var.shape[0]
        self.count = np.zeros(k, dtype=np.int64)
        self.sum = np.zeros_like(self.sampling_var)
        if prior_var is None:
            self.prior_mean = None
            self.prior_var = None
            self.post_mean = np.zeros_like(self.sampling_var)
        else:
            self.prior_mean = np.broadcast_to(np.asarray(prior_mean, dtype=float), self.sampling_var.shape).copy()
            self.prior_var = np.broadcast_to(np.asarray(prior_var, dtype=float), self.sampling_var.shape).copy()
            self.post_mean = self.prior_mean.copy()

    @classmethod
    def for_instance(cls, instance) -> "PosteriorState":
        return cls(instance.sigma2)

    @property
    def k(self) -> int:
        return self.sampling_var.shape[0]

    @property
    def m(self) -> int:
        return self.sampling_var.shape[1] - 1

    @property
    def informative(self) -> bool:
        return self.prior_var is not None

    @property
    def post_var(self) -> np.ndarray:
        """Posterior variances; ``inf`` for uninformed arms under the flat prior."""
        n = self.count[:, None].astype(float)
        if self.informative:
            return 1.0 / (1.0 / self.prior_var + n / self.sampling_var)
        with np.errstate(divide="ignore"):
            return np.where(n > 0, self.sampling_var / np.maximum(n, 1), np.inf)

    @property
    def uninformed(self) -> np.ndarray:
        if self.informative:
            return np.zeros(self.k, dtype=bool)
        return self.count == 0

    def require_informed(self) -> None:
        if self.uninformed.any():
            arms = (np.flatnonzero(self.uninformed) + 1).tolist()
            raise UninformedArm(f"arms {arms} have no samples yet")

    def update(self, arm: int, reward) -> "PosteriorState":
        """Absorb one reward vector for ``arm`` (in place) and return the state."""
        x = np.asarray(reward, dtype=float)
        if x.shape != self.sampling_var.shape[1:]:
            raise ValueError(f"reward must have length {self.m + 1}")
        if not np.isfinite(x).all():
            raise ValueError("reward contains NaN or infinite entries")
        mean = self.post_mean[arm]
        if self.informative:
            old_prec = 1.0 / self.post_var[arm]
            new_prec = old_prec + 1.0 / self.sampling_var[arm]
            mean[:] = (old_prec * mean + x / self.sampling_var[arm]) / new_prec
        n = self.count[arm] + 1
        self.count[arm] = n
        self.sum[arm] += x
        if not self.informative:
            mean += (x - mean) / n
        return self

    def copy(self) -> "PosteriorState":
        new = PosteriorState.__new__(PosteriorState)
        for name, value in vars(self).items():
            setattr(new, name, None if value is None else value.copy())
        return new

    def post_sd(self) -> np.ndarray:
        self.require_informed()
        return np.sqrt(self.post_var)


def update(state: PosteriorState, arm: int, reward) -> PosteriorState:
    return state.update(arm, reward)


def draw(state: PosteriorState, rng: np.random.Generator) -> np.ndarray:
    """One joint draw from the product posterior, shape k x (m+1)."""
    sd = state.post_sd()
    theta = np.empty_like(state.post_mean)
    _kernels.draw_into(state.post_mean, sd, rng, theta)
    return theta


def best_feasible_of_draw(theta, gamma) -> int | None:
    """Best feasible arm of a draw, or ``None`` when no row is feasible."""
    theta = np.asarray(theta, dtype=float)
    b = _kernels.best_feasible(theta, np.asarray(gamma, dtype=float).reshape(-1))
    return None if b < 0 else int(b)


def estimate_p(state: PosteriorState, gamma, draws: int = DEFAULT_DRAWS, rng=None, chunk: int = 65_536):
    """Monte-Carlo estimate of each arm's posterior probability of being best feasible.

    Returns ``(p, c)``: ``p[i]`` is the fraction of ``draws`` joint posterior
    draws whose best feasible arm is ``i`` and ``c`` is the fraction with an
    empty feasible set, so that ``p.sum() + c == 1``.
    """
    if draws < 1:
        raise ValueError("draws must be >= 1")
    rng = np.random.default_rng(rng)
    gamma = np.asarray(gamma, dtype=float).reshape(-1)
    mean = state.post_mean
    sd = state.post_sd()
    k = state.k
    tally = np.zeros(k + 1, dtype=np.int64)
    left = draws
    while left:
        n = min(chunk, left)
        theta = mean + sd * rng.standard_normal((n, *mean.shape))
        feasible = np.all(theta[:, :, 1:] <= gamma, axis=2)
        obj = np.where(feasible, theta[:, :, 0], -np.inf)
        winner = np.argmax(obj, axis=1)
        winner[~feasible.any(axis=1)] = k
        tally += np.bincount(winner, minlength=k + 1)
        left -= n
    return tally[:k] / draws, tally[k] / draws
