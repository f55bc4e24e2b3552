"""The synthetic benchmark instances and the clinical dose-finding instance."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import UnknownId
from .problem import ProblemInstance

EXPERIMENT_IDS = ("exp1", "exp2", "exp3", "exp4", "exp5", "dose")

_X = np.arange(1, 51, dtype=float)


def y1(x):
    return 0.08 * (1.0 - x)


def y2(x):
    return np.where(x <= 25, 0.08 * (26.0 - x), 0.08 * (25.0 - x))


def y3(x):
    return np.where(x <= 20, 0.01 * (21.0 - x) ** 2, -0.01 * (20.0 - x) ** 2)


def y3_shifted(x):
    return np.where(x <= 20, 0.01 * (21.0 - x) ** 2 + 0.1, -0.01 * (20.0 - x) ** 2 - 0.1)


def y4(x):
    return np.where(x <= 40, -0.1 * (41.0 - x), -0.1 * (40.0 - x))


def y5(x):
    return np.where(x <= 40, -0.03 * (41.0 - x), -0.03 * (40.0 - x))


EXP5_OBJECTIVE = (-1.8455, 0.2556, -1.7275, 0.0219, -1.0574, 1.7303, 1.6237, 1.8268, -1.6826, 1.8150)
EXP5_CONSTRAINT = (-1.8441, -0.0028, 0.4682, -1.0172, 0.6831, -1.5495, 0.1442, 1.2425, 1.3175, -0.6513)

# (efficacy, infection probability) for placebo, 25mg, 75mg, 150mg, 300mg
DOSE_MEANS = ((0.34, 0.259), (0.469, 0.184), (0.465, 0.209), (0.537, 0.293), (0.36, 0.16))

BUDGETS = {
    "exp1": (2100, 2500, 3400),
    "exp2": (1000, 2500, 3500),
    "exp3": (2000, 2400, 3700),
    "exp4": (2600, 3300, 3700),
    "exp5": (200, 400, 800),
    "dose": (3500, 6000, 8000),
}

BETA_STAR_PUBLISHED = {
    "exp1": 0.3218,
    "exp2": 0.2449,
    "exp3": 0.2709,
    "exp4": 0.2615,
    "exp5": 0.4831,
    "dose": 0.4986,
}

# best feasible arm as stated for each instance, 0-based
STATED_BEST = {"exp1": 25, "exp2": 25, "exp3": 25, "exp4": 25, "exp5": 9, "dose": 1}

# (algorithm, beta) -> PFS per budget; "star" marks the optimal beta
_TABLE = {
    ("bfai-ts-1", 1.0): {
        "exp1": (0.20, 0.17, 0.13), "exp2": (0.38, 0.14, 0.10), "exp3": (0.24, 0.19, 0.12),
        "exp4": (0.13, 0.06, 0.04), "exp5": (0.37, 0.25, 0.22), "dose": (0.18, 0.09, 0.06),
    },
    ("uniform", None): {
        "exp1": (0.61, 0.51, 0.46), "exp2": (0.71, 0.59, 0.50), "exp3": (0.46, 0.48, 0.39),
        "exp4": (0.54, 0.49, 0.51), "exp5": (0.37, 0.41, 0.34), "dose": (0.27, 0.19, 0.13),
    },
    ("bfai-ts", 0.5): {
        "exp1": (0.11, 0.06, 0.02), "exp2": (0.24, 0.09, 0.03), "exp3": (0.12, 0.07, 0.05),
        "exp4": (0.04, 0.02, 0.02), "exp5": (0.25, 0.18, 0.15), "dose": (0.13, 0.07, 0.05),
    },
    ("bfai-ts", "star"): {
        "exp1": (0.07, 0.02, 0.01), "exp2": (0.19, 0.02, 0.01), "exp3": (0.09, 0.05, 0.01),
        "exp4": (0.02, 0.01, 0.00), "exp5": (0.11, 0.03, 0.00), "dose": (0.11, 0.05, 0.01),
    },
}


class ReferenceRow(NamedTuple):
    algorithm: str
    beta: float | str | None
    budget: int
    pfs: float


@dataclass(frozen=True, eq=False)
class ExperimentSpec:
    id: str
    instance: ProblemInstance
    budgets: tuple[int, ...]
    n0: int
    beta_star_published: float


def _check(exp_id: str) -> None:
    if exp_id not in EXPERIMENT_IDS:
        raise UnknownId(f"unknown experiment {exp_id!r}; expected one of {', '.join(EXPERIMENT_IDS)}")


def build_instance(exp_id: str) -> ProblemInstance:
    _check(exp_id)
    x = _X
    if exp_id == "exp1":
        return ProblemInstance(np.column_stack([y1(x), y2(x)]), 0.49, [0.0])
    if exp_id in ("exp2", "exp3", "exp4"):
        third = y3_shifted(x) if exp_id == "exp4" else y3(x)
        mu = np.column_stack([y1(x), y2(x), third, y4(x), y5(x)])
        if exp_id == "exp2":
            sigma2 = np.full(mu.shape, 0.49)
        else:
            sigma2 = np.tile([0.36, 0.81, 0.64, 0.49, 1.0], (50, 1))
        return ProblemInstance(mu, sigma2, np.zeros(4))
    if exp_id == "exp5":
        mu = np.column_stack([EXP5_OBJECTIVE, EXP5_CONSTRAINT])
        return ProblemInstance(mu, 1.0, [0.0])
    return ProblemInstance(np.array(DOSE_MEANS), 0.01, [0.25])


def build(exp_id: str) -> ExperimentSpec:
    """Instance, budgets and warm-up size for one of the benchmark problems."""
    return ExperimentSpec(exp_id, build_instance(exp_id), BUDGETS[exp_id], 6, BETA_STAR_PUBLISHED[exp_id])


def published_reference(exp_id: str) -> list[ReferenceRow]:
    """Published false-selection probabilities for the algorithms implemented here."""
    _check(exp_id)
    rows = []
    for (algo, beta), table in _TABLE.items():
        for budget, pfs in zip(BUDGETS[exp_id], table[exp_id]):
            rows.append(ReferenceRow(algo, beta, budget, pfs))
    return rows


def reference_pfs(exp_id: str, algorithm: str, beta, budget: int) -> float:
    for row in published_reference(exp_id):
        if row.algorithm == algorithm and row.beta == beta and row.budget == budget:
            return row.pfs
    raise KeyError((exp_id, algorithm, beta, budget))
