import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn import metrics as skm

from dncshap.metrics import (
    MetricsError, accuracy, cohen_kappa, confusion_matrix, macro_f1, per_class_f1, report,
)

FIXTURE = np.array([[3, 1], [1, 3]])


def test_fixture_values():
    assert accuracy(FIXTURE) == 0.75
    assert per_class_f1(FIXTURE).tolist() == [0.75, 0.75]
    assert macro_f1(FIXTURE) == 0.75
    assert cohen_kappa(FIXTURE) == pytest.approx(0.5, abs=1e-15)
    assert report(FIXTURE) == {"accuracy": 0.75, "macro_f1": 0.75, "cohen_kappa": 0.5, "confusion": [[3, 1], [1, 3]]}


def test_trivial_cases():
    diag = np.diag([2, 3, 4])
    assert accuracy(diag) == 1.0 and macro_f1(diag) == 1.0 and cohen_kappa(diag) == 1.0
    off = np.zeros((3, 3), int)
    off[0, 2] = 5
    assert accuracy(off) == 0.0
    empty_class = np.array([[2, 0, 0], [0, 2, 0], [0, 0, 0]])
    assert macro_f1(empty_class) == pytest.approx(2 / 3)
    assert cohen_kappa(np.array([[5, 0], [0, 0]])) == 0.0


def test_independent_prediction_zero_kappa():
    cm = np.outer([2, 3, 5], [4, 1, 5])
    assert abs(cohen_kappa(cm)) < 1e-9


@pytest.mark.parametrize("bad", [np.zeros((2, 2)), np.zeros((2, 3)), np.array([[1, -1], [0, 1]]), np.zeros((0, 0))])
def test_errors(bad):
    with pytest.raises(MetricsError):
        accuracy(bad)


def test_confusion_matrix_validation():
    assert confusion_matrix([0, 1, 1], [0, 0, 1]).tolist() == [[1, 0], [1, 1]]
    with pytest.raises(MetricsError):
        confusion_matrix([0, 1], [0])
    with pytest.raises(MetricsError):
        confusion_matrix([0, -1], [0, 0], n_classes=2)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(2, 6))
def test_against_sklearn(seed, k):
    rng = np.random.default_rng(seed)
    y, p = rng.integers(0, k, 50), rng.integers(0, k, 50)
    cm = confusion_matrix(y, p, k)
    np.testing.assert_array_equal(cm, skm.confusion_matrix(y, p, labels=range(k)))
    assert accuracy(cm) == pytest.approx(skm.accuracy_score(y, p))
    assert macro_f1(cm) == pytest.approx(skm.f1_score(y, p, labels=range(k), average="macro", zero_division=0))
    assert cohen_kappa(cm) == pytest.approx(skm.cohen_kappa_score(y, p, labels=range(k)), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(2, 6))
def test_permutation_invariance(seed, k):
    rng = np.random.default_rng(seed)
    cm = rng.integers(0, 10, (k, k))
    cm[0, 0] += 1
    perm = rng.permutation(k)
    pc = cm[np.ix_(perm, perm)]
    assert accuracy(pc) == pytest.approx(accuracy(cm), abs=1e-12)
    assert macro_f1(pc) == pytest.approx(macro_f1(cm), abs=1e-12)
    assert cohen_kappa(pc) == pytest.approx(cohen_kappa(cm), abs=1e-12)


@given(st.integers(0, 2 ** 32 - 1))
def test_kappa_one_iff_no_off_diagonal(seed):
    rng = np.random.default_rng(seed)
    cm = np.diag(rng.integers(1, 9, 3))
    assert cohen_kappa(cm) == pytest.approx(1.0)
    cm[0, 1] += 1
    assert cohen_kappa(cm) < 1.0
