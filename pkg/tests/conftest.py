import numpy as np
import pytest

from caspsim.stream import SampleSet


def make_set(features, labels, ids=None, task=0):
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n = len(labels)
    ids = np.arange(n) if ids is None else np.asarray(ids, dtype=np.int64)
    features = features.reshape(n, -1) if n else features.reshape(0, features.shape[-1])
    return SampleSet(ids, features, labels, np.full(n, task, dtype=np.int64))


@pytest.fixture
def two_clusters():
    """Two well separated 2-d clusters, 40 points each."""
    rng = np.random.default_rng(7)
    a = rng.normal([-4.0, 0.0], 0.3, size=(40, 2))
    b = rng.normal([4.0, 0.0], 0.3, size=(40, 2))
    return make_set(np.vstack([a, b]), [0] * 40 + [1] * 40)
