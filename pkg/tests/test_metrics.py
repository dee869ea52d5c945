import numpy as np
import pytest
from hypothesis import given, strategies as st

from caspsim.metrics import (AccuracyMatrix, average_end_accuracy, average_end_forgetting,
                             pearson, per_class_forgetting)


def two_task(a11=0.9, a21=0.6, a22=0.8):
    return AccuracyMatrix.from_rows([[a11], [a21, a22]])


def test_end_accuracy_two_tasks():
    assert average_end_accuracy(two_task()) == pytest.approx(0.7, abs=1e-12)


def test_end_accuracy_one_task():
    assert average_end_accuracy(AccuracyMatrix.from_rows([[0.9]])) == 0.9


@given(st.integers(1, 6), st.floats(0.0, 1.0))
def test_constant_matrix(T, c):
    m = AccuracyMatrix.from_rows([[c] * (i + 1) for i in range(T)])
    assert average_end_accuracy(m) == pytest.approx(c, abs=1e-12)
    if T >= 2:
        assert average_end_forgetting(m) == pytest.approx(0.0, abs=1e-12)


def test_forgetting_two_tasks():
    # 0.9 - 0.6 is 0.30000000000000004 in binary floating point
    assert average_end_forgetting(two_task()) == pytest.approx(0.3, abs=1e-12)


def test_backward_transfer_is_negative():
    assert average_end_forgetting(two_task(0.6, 0.9, 0.8)) == pytest.approx(-0.3, abs=1e-12)


def test_forgetting_ignores_final_row_in_max():
    m = AccuracyMatrix.from_rows([[0.5], [0.7, 0.9], [0.6, 0.4, 1.0]])
    # task 0: best of rows 0..1 is 0.7; task 1: best of row 1 is 0.9
    assert average_end_forgetting(m) == pytest.approx(((0.7 - 0.6) + (0.9 - 0.4)) / 2)


def test_forgetting_needs_two_tasks():
    with pytest.raises(ValueError):
        average_end_forgetting(AccuracyMatrix.from_rows([[0.5]]))


def test_undefined_cells():
    m = AccuracyMatrix(2)
    with pytest.raises(ValueError):
        m.set(0, 1, 0.5)
    with pytest.raises(ValueError):
        m.get(1, 0)
    with pytest.raises(ValueError):
        m.set(0, 0, 1.5)
    m.set(0, 0, 0.5)
    with pytest.raises(ValueError):
        average_end_accuracy(m)


@pytest.mark.parametrize("hist, expected", [([1.0, 0.4], 0.6), ([0.3, 0.3], 0.0),
                                            ([0.2, 0.8, 0.5], 0.3)])
def test_per_class_forgetting(hist, expected):
    assert per_class_forgetting({4: hist})[4] == pytest.approx(expected, abs=1e-12)


def test_pearson_examples():
    x = np.array([0.0, 1.0, 2.5, 4.0])
    assert pearson(x, 2 * x + 1) == pytest.approx(1.0)
    assert pearson(x, -x) == pytest.approx(-1.0)
    assert pearson([1, 2, 3], [1, 3, 2]) == pytest.approx(0.5, abs=1e-15)


def test_pearson_zero_variance():
    with pytest.raises(ValueError):
        pearson([1, 1, 1], [1, 2, 3])


@given(st.lists(st.tuples(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3)), min_size=3, max_size=20))
def test_pearson_matches_numpy(pairs):
    x, y = np.array(pairs).T
    if np.ptp(x) < 1e-6 or np.ptp(y) < 1e-6:
        return
    assert pearson(x, y) == pytest.approx(np.corrcoef(x, y)[0, 1], abs=1e-9)
