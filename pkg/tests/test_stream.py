import numpy as np
import pytest

from caspsim.model import SgdConfig, evaluate_accuracy, init_params, train
from caspsim.stream import (DatasetSchema, FormatError, SampleSet, StreamConfig,
                            apply_class_permutation, check_disjoint, class_permutation,
                            corrupt_features, inverse_permutation, load_delimited_dataset,
                            make_gaussian_stream, shuffle_class_order, streams_equal,
                            write_delimited_dataset)


def offline_accuracy(task, seed=0, epochs=15):
    p = init_params(task.train.dim, 16, max(task.classes) + 1, np.random.default_rng(seed))
    p = train(p, task.train, SgdConfig(learning_rate=0.1, epochs=epochs), 16, seed)
    return evaluate_accuracy(p, task.test)


class TestGaussianStream:
    def test_shapes_and_disjointness(self):
        cfg = StreamConfig(tasks=3, classes_per_task=2, train_per_class=5, test_per_class=4,
                           feature_dim=3)
        tasks = make_gaussian_stream(cfg)
        assert [t.classes for t in tasks] == [(0, 1), (2, 3), (4, 5)]
        check_disjoint(tasks)
        ids = np.concatenate([np.r_[t.train.ids, t.test.ids] for t in tasks])
        assert len(set(ids.tolist())) == len(ids) == 3 * 2 * 9
        for t in tasks:
            assert len(t.train) == 10 and len(t.test) == 8
            assert np.all(t.train.tasks == t.index)
            assert not set(t.train.ids.tolist()) & set(t.test.ids.tolist())

    def test_separated_clusters_are_learnable(self):
        cfg = StreamConfig(tasks=1, classes_per_task=2, train_per_class=100, test_per_class=100,
                           feature_dim=4, spreads=0.1, radius=3.0, seed=1)
        assert offline_accuracy(make_gaussian_stream(cfg)[0]) >= 0.99

    def test_identical_centers_are_chance(self):
        centers = ((1.0, 1.0, 0.0, 0.0),) * 2
        cfg = StreamConfig(tasks=1, classes_per_task=2, train_per_class=400, test_per_class=1000,
                           feature_dim=4, spreads=1.0, centers=centers, seed=2)
        acc = offline_accuracy(make_gaussian_stream(cfg)[0])
        assert abs(acc - 0.5) <= 0.05

    def test_seed_determinism(self):
        cfg = StreamConfig(tasks=2, train_per_class=7, test_per_class=3, seed=9)
        a, b = make_gaussian_stream(cfg), make_gaussian_stream(cfg)
        assert all(x.train.tobytes() == y.train.tobytes() and x.test.tobytes() == y.test.tobytes()
                   for x, y in zip(a, b))
        c = make_gaussian_stream(StreamConfig(tasks=2, train_per_class=7, test_per_class=3, seed=10))
        assert a[0].train.tobytes() != c[0].train.tobytes()

    def test_bad_config(self):
        with pytest.raises(ValueError):
            StreamConfig(tasks=0)
        with pytest.raises(ValueError):
            StreamConfig(spreads=0.0)
        with pytest.raises(ValueError):
            StreamConfig(tasks=2, classes_per_task=2, spreads=(1.0, 2.0, 3.0))

    def test_larger_spread_lowers_accuracy(self):
        centers = ((2.0, 0.0, 0.0, 0.0), (-2.0, 0.0, 0.0, 0.0))
        means = []
        for sigma in (0.5, 1.5, 3.0):
            accs = [offline_accuracy(make_gaussian_stream(StreamConfig(
                tasks=1, classes_per_task=2, train_per_class=100, test_per_class=200,
                feature_dim=4, spreads=sigma, centers=centers, seed=s))[0], seed=s, epochs=5)
                for s in range(10)]
            means.append(np.mean(accs))
        assert means[0] > means[1] > means[2]


class TestClassOrder:
    cfg = StreamConfig(tasks=5, classes_per_task=2, train_per_class=3, test_per_class=2,
                       feature_dim=2)

    def test_identity(self):
        tasks = make_gaussian_stream(self.cfg)
        assert streams_equal(shuffle_class_order(tasks, None), tasks)

    def test_inverse_restores(self):
        tasks = make_gaussian_stream(self.cfg)
        perm = class_permutation(10, 3)
        shuffled = apply_class_permutation(tasks, perm)
        assert [t.classes for t in shuffled] != [t.classes for t in tasks]
        back = apply_class_permutation(shuffled, inverse_permutation(perm))
        assert streams_equal(back, tasks)

    def test_shuffle_keeps_ids_and_disjointness(self):
        tasks = make_gaussian_stream(self.cfg)
        shuffled = shuffle_class_order(tasks, 5)
        check_disjoint(shuffled)
        before = {int(i): int(c) for t in tasks for i, c in zip(t.train.ids, t.train.labels)}
        after = {int(i): int(c) for t in shuffled for i, c in zip(t.train.ids, t.train.labels)}
        assert before == after
        for t in shuffled:
            assert set(t.train.labels.tolist()) == set(t.classes)
            assert np.all(t.train.tasks == t.index)

    def test_seeds_give_distinct_permutations(self):
        perms = {tuple(class_permutation(10, s)) for s in range(100)}
        assert len(perms) >= 95


class TestCorruption:
    def test_zero_sigma(self):
        s = make_gaussian_stream(StreamConfig(tasks=1, train_per_class=5))[0].train
        assert np.array_equal(corrupt_features(s, 0.0, 1).features, s.features)

    def test_same_seed_same_noise(self):
        s = make_gaussian_stream(StreamConfig(tasks=1, train_per_class=5))[0].train
        a, b = corrupt_features(s, 0.5, 3), corrupt_features(s, 0.5, 3)
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.ids, s.ids) and np.array_equal(a.labels, s.labels)
        assert not np.array_equal(a.features, s.features)

    def test_heavy_noise_drops_to_chance(self):
        cfg = StreamConfig(tasks=1, classes_per_task=2, train_per_class=100, test_per_class=300,
                           feature_dim=4, spreads=0.1, radius=1.0, seed=4)
        task = make_gaussian_stream(cfg)[0]
        p = init_params(4, 16, 2, np.random.default_rng(0))
        p = train(p, task.train, SgdConfig(learning_rate=0.1, epochs=15), 16, 0)
        assert evaluate_accuracy(p, task.test) >= 0.99
        noisy = corrupt_features(task.test, 10.0, 0)
        assert evaluate_accuracy(p, noisy) <= 0.6

    def test_negative_sigma(self):
        s = make_gaussian_stream(StreamConfig(tasks=1, train_per_class=2))[0].train
        with pytest.raises(ValueError):
            corrupt_features(s, -1.0, 0)


class TestDelimited:
    def test_four_rows(self, tmp_path):
        f = tmp_path / "d.csv"
        f.write_text("# dim=2 classes=2\n0.1,0.2,0\n1.0,2.0,1\n0.3,0.1,0\n2.0,1.5,1\n")
        tasks = load_delimited_dataset(f)
        assert len(tasks) == 1
        assert len(tasks[0].train) == 4
        assert tasks[0].classes == (0, 1)
        assert tasks[0].train.ids.tolist() == [0, 1, 2, 3]

    def test_malformed_row_is_named(self, tmp_path):
        f = tmp_path / "d.csv"
        f.write_text("0.1,0.2,0\n1.0,2.0,1\n0.3,oops,0\n2.0,1.5,1\n")
        with pytest.raises(FormatError, match="row 3") as err:
            load_delimited_dataset(f)
        assert err.value.row == 3

    def test_wrong_column_count(self, tmp_path):
        f = tmp_path / "d.csv"
        f.write_text("# dim=2 classes=2\n0.1,0.2,0\n1.0,1\n")
        with pytest.raises(FormatError, match="row 3"):
            load_delimited_dataset(f)

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            load_delimited_dataset(tmp_path / "absent.csv")

    def test_task_column_and_grouping(self, tmp_path):
        f = tmp_path / "d.csv"
        f.write_text("0.0,1,2\n0.5,0,0\n1.0,1,3\n1.5,0,1\n")
        tasks = load_delimited_dataset(f, DatasetSchema(task_column=True))
        assert [t.classes for t in tasks] == [(0, 1), (2, 3)]
        assert tasks[1].train.ids.tolist() == [0, 2]

        g = tmp_path / "g.csv"
        g.write_text("0.0,2\n0.5,0\n1.0,3\n1.5,1\n")
        tasks = load_delimited_dataset(g, DatasetSchema(classes_per_task=2))
        assert [t.classes for t in tasks] == [(0, 1), (2, 3)]

    def test_round_trip(self, tmp_path):
        cfg = StreamConfig(tasks=3, classes_per_task=2, train_per_class=6, test_per_class=4,
                           feature_dim=5, spreads=(0.3, 0.5, 1.0, 1.2, 2.0, 0.7), seed=12)
        stream = make_gaussian_stream(cfg)
        write_delimited_dataset(stream, tmp_path / "train.csv", "train")
        write_delimited_dataset(stream, tmp_path / "test.csv", "test")
        back = load_delimited_dataset(tmp_path / "train.csv", DatasetSchema(classes_per_task=2),
                                      test_path=tmp_path / "test.csv")
        assert streams_equal(back, stream)

    def test_round_trip_with_task_column(self, tmp_path):
        stream = make_gaussian_stream(StreamConfig(tasks=2, train_per_class=3, test_per_class=2,
                                                   feature_dim=2, seed=1))
        write_delimited_dataset(stream, tmp_path / "t.csv", task_column=True)
        back = load_delimited_dataset(tmp_path / "t.csv", DatasetSchema(task_column=True))
        for a, b in zip(back, stream):
            assert a.train.equals(b.train)


def test_sampleset_iteration_and_indexing():
    s = SampleSet(np.array([5, 6]), np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([0, 1]),
                  np.array([0, 0]))
    rows = list(s)
    assert rows[1].id == 6 and rows[1].label == 1
    assert s[1].ids.tolist() == [6]
    assert SampleSet.from_samples(rows).equals(s)
