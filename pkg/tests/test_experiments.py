import numpy as np
import pytest

from bfaits.errors import UnknownId
from bfaits.experiments import (
    BUDGETS,
    EXPERIMENT_IDS,
    STATED_BEST,
    build,
    published_reference,
    reference_pfs,
    y1,
    y2,
    y3,
    y3_shifted,
    y4,
    y5,
)


def test_hand_evaluated_values():
    x = np.array([1, 20, 21, 25, 26, 40, 41, 50], dtype=float)
    np.testing.assert_allclose(y1(x), [0.0, -1.52, -1.6, -1.92, -2.0, -3.12, -3.2, -3.92])
    np.testing.assert_allclose(y2(x), [2.0, 0.48, 0.4, 0.08, -0.08, -1.2, -1.28, -2.0])
    np.testing.assert_allclose(y3(x), [4.0, 0.01, -0.01, -0.25, -0.36, -4.0, -4.41, -9.0])
    np.testing.assert_allclose(y3_shifted(x)[1:3], [0.11, -0.11])
    np.testing.assert_allclose(y4(x), [-4.0, -2.1, -2.0, -1.6, -1.5, -0.1, 0.1, 1.0])
    np.testing.assert_allclose(y5(x), [-1.2, -0.63, -0.6, -0.48, -0.45, -0.03, 0.03, 0.3])


@pytest.mark.parametrize("exp_id", EXPERIMENT_IDS)
def test_stated_best_arm(exp_id):
    spec = build(exp_id)
    assert spec.instance.best == STATED_BEST[exp_id]
    assert spec.n0 == 6
    assert list(spec.budgets) == sorted(set(spec.budgets)) == list(BUDGETS[exp_id])


def test_dose_instance():
    inst = build("dose").instance
    assert inst.mu[1].tolist() == [0.469, 0.184]
    assert inst.gamma.tolist() == [0.25]
    assert np.all(inst.sigma2 == 0.01)


def test_variances_per_measure():
    assert np.all(build("exp2").instance.sigma2 == 0.49)
    s2 = build("exp4").instance.sigma2
    assert s2.shape == (50, 5)
    assert np.all(s2 == [0.36, 0.81, 0.64, 0.49, 1.0])


def test_reference_table():
    assert reference_pfs("exp5", "bfai-ts", "star", 800) == 0.00
    assert reference_pfs("exp1", "bfai-ts", 0.5, 3400) == 0.02
    assert reference_pfs("dose", "uniform", None, 8000) == 0.13
    assert len(published_reference("exp2")) == 12


def test_unknown_id():
    with pytest.raises(UnknownId):
        build("exp6")
    with pytest.raises(UnknownId):
        published_reference("nope")
