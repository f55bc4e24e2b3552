"""Problem instances and the arm/constraint classification.

Column 0 of every mean matrix is the objective (maximised); columns 1..m are
constraint measures, feasible when ``mean <= threshold``.  Arms are 0-indexed
in the Python API and 1-indexed in every file and CLI surface.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidInstance, NoFeasibleArm, TiedBest


@dataclass(frozen=True)
class ArmClassification:
    best: int
    feasible_suboptimal: tuple[int, ...]
    infeasible_better: tuple[int, ...]
    infeasible_worse: tuple[int, ...]
    satisfied: tuple[tuple[int, ...], ...]
    violated: tuple[tuple[int, ...], ...]

    @property
    def k(self) -> int:
        return len(self.satisfied)

    def group_of(self, arm: int) -> str:
        """Return one of ``"best"``, ``"Fw"``, ``"Ib"``, ``"Iw"``."""
        if arm == self.best:
            return "best"
        if arm in self.feasible_suboptimal:
            return "Fw"
        if arm in self.infeasible_better:
            return "Ib"
        if arm in self.infeasible_worse:
            return "Iw"
        raise IndexError(arm)


def _check_shapes(mu: np.ndarray, gamma: np.ndarray) -> None:
    if mu.ndim != 2 or mu.shape[1] < 1:
        raise InvalidInstance(f"mean matrix must be k x (m+1), got shape {mu.shape}")
    if gamma.shape != (mu.shape[1] - 1,):
        raise InvalidInstance(
            f"threshold vector has length {gamma.size}, expected {mu.shape[1] - 1}"
        )


def _partition(mu: np.ndarray, gamma: np.ndarray, best: int) -> ArmClassification:
    viol = mu[:, 1:] > gamma
    satisfied = tuple(tuple(int(j) + 1 for j in np.flatnonzero(~row)) for row in viol)
    violated = tuple(tuple(int(j) + 1 for j in np.flatnonzero(row)) for row in viol)
    infeasible = viol.any(axis=1)
    top = mu[best, 0]
    fw, ib, iw = [], [], []
    for i in range(mu.shape[0]):
        if i == best:
            continue
        if not infeasible[i]:
            fw.append(i)
        elif mu[i, 0] >= top:
            ib.append(i)
        else:
            iw.append(i)
    return ArmClassification(best, tuple(fw), tuple(ib), tuple(iw), satisfied, violated)


def classify_arms(mu, gamma) -> ArmClassification:
    """Partition arms into the best feasible arm, F_w, I_b and I_w.

    Constraint indices in ``satisfied``/``violated`` are measure columns
    (1..m), so they index ``mu`` directly.

    Raises:
        NoFeasibleArm: every arm violates at least one constraint.
        TiedBest: the objective maximum over feasible arms is not unique.
    """
    mu = np.asarray(mu, dtype=float)
    gamma = np.asarray(gamma, dtype=float).reshape(-1)
    _check_shapes(mu, gamma)
    feasible = np.all(mu[:, 1:] <= gamma, axis=1)
    if not feasible.any():
        raise NoFeasibleArm("no arm satisfies every constraint")
    obj = np.where(feasible, mu[:, 0], -np.inf)
    top = obj.max()
    winners = np.flatnonzero(obj == top)
    if winners.size > 1:
        raise TiedBest(f"arms {(winners + 1).tolist()} tie for best feasible")
    return _partition(mu, gamma, int(winners[0]))


def classify_arms_lenient(mu, gamma, sigma2=None) -> ArmClassification:
    """Like :func:`classify_arms` but never raises on ties or emptiness.

    Ties go to the lowest index.  When no arm is feasible the arm with the
    smallest worst standardized violation ``max_j (mu_ij - gamma_j)/sd_ij`` is
    treated as best; ``sigma2`` supplies the variances (unit if omitted).
    """
    mu = np.asarray(mu, dtype=float)
    gamma = np.asarray(gamma, dtype=float).reshape(-1)
    _check_shapes(mu, gamma)
    feasible = np.all(mu[:, 1:] <= gamma, axis=1)
    if feasible.any():
        obj = np.where(feasible, mu[:, 0], -np.inf)
        best = int(np.argmax(obj))
    else:
        if sigma2 is None:
            sd = np.ones_like(mu[:, 1:])
        else:
            sd = np.sqrt(np.asarray(sigma2, dtype=float)[:, 1:])
        worst = np.max((mu[:, 1:] - gamma) / sd, axis=1)
        best = int(np.argmin(worst))
    return _partition(mu, gamma, best)


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """Ground truth for one constrained best-arm problem.

    ``mu`` and ``sigma2`` are k x (m+1) arrays (objective first); ``gamma``
    holds the m thresholds.  Validation runs at construction.
    """

    mu: np.ndarray
    sigma2: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        mu = np.array(self.mu, dtype=float)
        gamma = np.array(self.gamma, dtype=float).reshape(-1)
        sigma2 = np.array(self.sigma2, dtype=float)
        if sigma2.ndim == 0:
            sigma2 = np.full(mu.shape, float(sigma2))
        _check_shapes(mu, gamma)
        if sigma2.shape != mu.shape:
            raise InvalidInstance(f"sigma2 shape {sigma2.shape} != mu shape {mu.shape}")
        if mu.shape[0] < 2:
            raise InvalidInstance("need at least two arms")
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(sigma2))):
            raise InvalidInstance("means and variances must be finite")
        if np.any(sigma2 <= 0):
            raise InvalidInstance("all variances must be strictly positive")
        if np.any(mu[:, 1:] == gamma):
            i, j = np.argwhere(mu[:, 1:] == gamma)[0]
            raise InvalidInstance(f"arm {i + 1} lies on the boundary of constraint {j + 1}")
        for a in (mu, sigma2, gamma):
            a.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma2", sigma2)
        object.__setattr__(self, "gamma", gamma)
        # raises NoFeasibleArm / TiedBest for ill-posed truth
        object.__setattr__(self, "_classification", classify_arms(mu, gamma))

    @property
    def k(self) -> int:
        return self.mu.shape[0]

    @property
    def m(self) -> int:
        return self.mu.shape[1] - 1

    @property
    def classification(self) -> ArmClassification:
        return self._classification

    @property
    def best(self) -> int:
        return self._classification.best

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "m": self.m,
            "mu": self.mu.tolist(),
            "sigma2": self.sigma2.tolist(),
            "gamma": self.gamma.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ProblemInstance":
        try:
            k, m = int(data["k"]), int(data["m"])
            mu = np.asarray(data["mu"], dtype=float).reshape(k, m + 1)
            sigma2 = np.asarray(data["sigma2"], dtype=float).reshape(k, m + 1)
            gamma = np.asarray(data.get("gamma", []), dtype=float).reshape(m)
        except KeyError as exc:
            raise InvalidInstance(f"instance document is missing field {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            raise InvalidInstance(f"malformed instance document: {exc}") from None
        return cls(mu, sigma2, gamma)


def load_instance(path) -> ProblemInstance:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidInstance(f"{path}: not valid JSON ({exc})") from None
    return ProblemInstance.from_dict(data)


def save_instance(instance: ProblemInstance, path) -> None:
    Path(path).write_text(json.dumps(instance.to_dict(), indent=2) + "\n")
