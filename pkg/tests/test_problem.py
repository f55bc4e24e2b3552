import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bfaits.errors import InvalidInstance, NoFeasibleArm, TiedBest
from bfaits.experiments import EXP5_CONSTRAINT, EXP5_OBJECTIVE, build
from bfaits.problem import (
    ProblemInstance,
    classify_arms,
    classify_arms_lenient,
    load_instance,
    save_instance,
)

from conftest import random_instance

EXP5_MU = np.column_stack([EXP5_OBJECTIVE, EXP5_CONSTRAINT])


def one_based(arms):
    return {a + 1 for a in arms}


def test_exp5_classification():
    cls = classify_arms(EXP5_MU, [0.0])
    assert cls.best + 1 == 10
    assert one_based(cls.feasible_suboptimal) == {1, 2, 4, 6}
    assert one_based(cls.infeasible_better) == {8}
    assert one_based(cls.infeasible_worse) == {3, 5, 7, 9}


def test_exp1_classification():
    cls = build("exp1").instance.classification
    assert cls.best + 1 == 26
    assert one_based(cls.feasible_suboptimal) == set(range(27, 51))
    assert one_based(cls.infeasible_better) == set(range(1, 26))
    assert cls.infeasible_worse == ()


def test_single_unconstrained_arm():
    cls = classify_arms([[0.3]], [])
    assert cls.best == 0
    assert cls.feasible_suboptimal == cls.infeasible_better == cls.infeasible_worse == ()


def test_no_feasible_arm_raises():
    with pytest.raises(NoFeasibleArm):
        classify_arms([[1.0, 1.0], [2.0, 0.5]], [0.0])


def test_tie_raises_and_lenient_breaks_to_lower_index():
    mu = [[0.0, 1.0], [1.0, -1.0], [1.0, -1.0]]
    with pytest.raises(TiedBest):
        classify_arms(mu, [0.0])
    assert classify_arms_lenient(mu, [0.0]).best == 1


def test_lenient_standardized_violation_fallback():
    mu = np.array([[0.0, 2.0], [0.0, 1.0], [0.0, 0.3], [0.0, 0.9]])
    sigma2 = np.array([[1.0, 1.0], [1.0, 1.0], [1.0, 1.0], [1.0, 0.01]])
    assert classify_arms_lenient(mu, [0.0], sigma2).best == 2
    # arm 4's violation is small in raw units but large in standard deviations
    mu[3, 1] = 0.05
    assert classify_arms_lenient(mu, [0.0], sigma2).best == 2
    assert classify_arms_lenient(mu, [0.0]).best == 3


def test_lenient_matches_strict_on_exp5():
    assert classify_arms_lenient(EXP5_MU, [0.0]) == classify_arms(EXP5_MU, [0.0])


@pytest.mark.parametrize("bad", [
    dict(mu=[[1.0, 0.0], [0.0, -1.0]], sigma2=1.0, gamma=[0.0]),  # on the boundary
    dict(mu=[[1.0, -1.0], [0.0, -1.0]], sigma2=0.0, gamma=[0.0]),
    dict(mu=[[1.0, -1.0]], sigma2=1.0, gamma=[0.0]),
    dict(mu=[[1.0, -1.0], [np.nan, -1.0]], sigma2=1.0, gamma=[0.0]),
    dict(mu=[[1.0, -1.0], [0.0, -1.0]], sigma2=1.0, gamma=[0.0, 1.0]),
])
def test_invalid_instances(bad):
    with pytest.raises(InvalidInstance):
        ProblemInstance(**bad)


def test_instance_arrays_are_read_only():
    inst = build("dose").instance
    with pytest.raises(ValueError):
        inst.mu[0, 0] = 1.0


def test_instance_file_round_trip(tmp_path):
    inst = build("exp3").instance
    path = tmp_path / "exp3.json"
    save_instance(inst, path)
    doc = json.loads(path.read_text())
    assert doc["k"] == 50 and doc["m"] == 4
    back = load_instance(path)
    np.testing.assert_array_equal(back.mu, inst.mu)
    np.testing.assert_array_equal(back.sigma2, inst.sigma2)
    np.testing.assert_array_equal(back.gamma, inst.gamma)


def test_instance_file_accepts_flat_row_major():
    doc = {"k": 2, "m": 1, "mu": [1.0, -1.0, 0.0, -1.0], "sigma2": [1, 1, 1, 1], "gamma": [0.0]}
    inst = ProblemInstance.from_dict(doc)
    assert inst.mu.tolist() == [[1.0, -1.0], [0.0, -1.0]]


def test_malformed_instance_file(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(InvalidInstance):
        load_instance(path)
    path.write_text(json.dumps({"k": 2, "m": 1, "mu": [1, 2, 3]}))
    with pytest.raises(InvalidInstance):
        load_instance(path)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_classification_invariants(seed):
    inst = random_instance(np.random.default_rng(seed))
    cls = inst.classification
    groups = [(cls.best,), cls.feasible_suboptimal, cls.infeasible_better, cls.infeasible_worse]
    flat = [a for g in groups for a in g]
    assert sorted(flat) == list(range(inst.k))
    for i in range(inst.k):
        sat, vio = set(cls.satisfied[i]), set(cls.violated[i])
        assert sat | vio == set(range(1, inst.m + 1)) and not sat & vio
        assert (i in cls.infeasible_better or i in cls.infeasible_worse) == bool(vio)
    assert cls.violated[cls.best] == ()
    assert classify_arms(inst.mu, inst.gamma) == cls


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_classification_permutes_with_arms(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng)
    perm = rng.permutation(inst.k)
    cls = inst.classification
    pcls = classify_arms(inst.mu[perm], inst.gamma)
    inv = np.argsort(perm)
    assert pcls.best == inv[cls.best]
    assert {int(inv[a]) for a in cls.infeasible_better} == set(pcls.infeasible_better)
    assert {int(inv[a]) for a in cls.feasible_suboptimal} == set(pcls.feasible_suboptimal)
    for i in range(inst.k):
        assert pcls.violated[inv[i]] == cls.violated[i]
