from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from caspsim.analytics import SampleScore
from caspsim.buffer import (AllocationPlan, ReplayBuffer, SampleStrategy, allocate_quota,
                            largest_remainder, select_samples)

from conftest import make_set


def stream(n, task=0, start=0, dim=1):
    ids = np.arange(start, start + n)
    return make_set(ids.reshape(-1, 1).repeat(dim, 1).astype(float), ids % 2, ids, task)


def inclusion_frequencies(capacity, n, trials, seed):
    rng = np.random.default_rng(seed)
    data = stream(n)
    hits = np.zeros(n)
    for _ in range(trials):
        buf = ReplayBuffer(capacity, 1).reservoir_update(data, rng)
        hits[buf.slots.ids] += 1
    return hits / trials


class TestReservoir:
    def test_keeps_everything_when_it_fits(self):
        buf = ReplayBuffer(10, 1).reservoir_update(stream(10), np.random.default_rng(0))
        assert sorted(buf.slots.ids.tolist()) == list(range(10))

    def test_capacity_one_stream_two(self):
        f = inclusion_frequencies(1, 2, 20000, seed=1)
        assert abs(f[1] - 0.5) <= 0.02

    def test_uniform_inclusion(self):
        f = inclusion_frequencies(10, 100, 20000, seed=0)
        sd = np.sqrt(0.1 * 0.9 / 20000)
        assert np.all(np.abs(f - 0.1) <= 3 * sd)

    def test_batching_does_not_matter_for_size(self):
        rng = np.random.default_rng(3)
        buf = ReplayBuffer(7, 1)
        for k in range(0, 50, 4):
            buf.reservoir_update(stream(4, start=k), rng)
            assert len(buf) == min(7, buf.stream_count)
        assert buf.stream_count == 52

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 20), st.lists(st.integers(0, 15), max_size=12), st.integers(0, 999))
    def test_capacity_never_exceeded(self, cap, sizes, seed):
        rng = np.random.default_rng(seed)
        buf, start = ReplayBuffer(cap, 1), 0
        for n in sizes:
            buf.reservoir_update(stream(n, start=start), rng)
            start += n
            assert len(buf) == min(cap, start)
        assert len(set(buf.slots.ids.tolist())) == len(buf)

    def test_two_task_share_expectation(self):
        rng = np.random.default_rng(5)
        shares = []
        for _ in range(1000):
            buf = ReplayBuffer(100, 1)
            buf.reservoir_update(stream(200, task=0), rng)
            buf.reservoir_update(stream(200, task=1, start=200), rng)
            shares.append(buf.task_share(1))
        assert abs(np.mean(shares) - 50) <= 3


class TestRetrieval:
    def test_whole_buffer(self):
        buf = ReplayBuffer(5, 1).reservoir_update(stream(5), np.random.default_rng(0))
        got = buf.random_retrieval(8, np.random.default_rng(1))
        assert sorted(got.ids.tolist()) == list(range(5))

    def test_empty(self):
        assert len(ReplayBuffer(5, 3).random_retrieval(4, np.random.default_rng(0))) == 0

    def test_uniform(self):
        buf = ReplayBuffer(10, 1).reservoir_update(stream(10), np.random.default_rng(0))
        rng = np.random.default_rng(2)
        counts = np.zeros(10)
        for _ in range(20000):
            counts[buf.random_retrieval(1, rng).ids[0]] += 1
        assert np.all(np.abs(counts / 20000 - 0.1) <= 0.02)

    def test_no_repeats(self):
        buf = ReplayBuffer(10, 1).reservoir_update(stream(10), np.random.default_rng(0))
        got = buf.random_retrieval(6, np.random.default_rng(4))
        assert len(set(got.ids.tolist())) == 6


class TestTaskShare:
    def test_single_task(self):
        buf = ReplayBuffer(50, 1).reservoir_update(stream(80), np.random.default_rng(0))
        assert buf.task_share(0) == 50
        assert buf.task_share(3) == 0


class TestLargestRemainder:
    @pytest.mark.parametrize("w, total, expected", [
        ([1, 1], 10, [5, 5]),
        ([3, 1], 8, [6, 2]),
        ([1, 1, 1], 10, [4, 3, 3]),
        ([0, 0, 0], 4, [2, 1, 1]),
        ([0.2, 0.1], 0, [0, 0]),
    ])
    def test_examples(self, w, total, expected):
        assert largest_remainder(w, total) == expected

    def test_negative_weight(self):
        with pytest.raises(ValueError):
            largest_remainder([1, -1], 3)


weights_st = st.lists(st.floats(0.0, 1.0, allow_subnormal=False), min_size=1, max_size=8)


class TestAllocateQuota:
    def test_capping_redistributes(self):
        plan = allocate_quota({0: 9.0, 1: 1.0, 2: 1.0}, 10, {0: 3, 1: 10, 2: 10})
        assert plan.quotas == {0: 3, 1: 4, 2: 3}
        assert plan.total == 10

    def test_not_enough_samples(self):
        with pytest.raises(ValueError):
            allocate_quota({0: 1.0, 1: 1.0}, 10, {0: 3, 1: 3})

    def test_zero_weights_split_equally(self):
        assert allocate_quota({4: 0.0, 5: 0.0}, 7, {4: 9, 5: 9}).quotas == {4: 4, 5: 3}

    @settings(max_examples=200, deadline=None)
    @given(weights_st, st.integers(0, 60), st.integers(1, 1000))
    def test_sum_scale_and_monotonicity(self, w, total, scale):
        classes = {c: v for c, v in enumerate(w)}
        counts = {c: 1000 for c in classes}
        plan = allocate_quota(classes, total, counts)
        assert plan.total == total
        scaled = allocate_quota({c: v * scale for c, v in classes.items()}, total, counts)
        assert scaled.quotas == plan.quotas
        for a in classes:
            for b in classes:
                if Fraction(w[a]) > Fraction(w[b]):
                    assert plan.quotas[a] >= plan.quotas[b]

    @settings(max_examples=100, deadline=None)
    @given(weights_st, st.data())
    def test_caps_respected(self, w, data):
        counts = {c: data.draw(st.integers(0, 12)) for c in range(len(w))}
        total = data.draw(st.integers(0, sum(counts.values())))
        plan = allocate_quota(dict(enumerate(w)), total, counts)
        assert plan.total == total
        assert all(plan.quotas[c] <= counts[c] for c in counts)


class TestSelectSamples:
    def scored(self):
        s = make_set([[0.0], [1.0], [2.0], [3.0]], [0, 0, 1, 1], ids=[10, 11, 12, 13])
        scores = [SampleScore(10, 0.9, 0.4), SampleScore(11, 0.1, 0.1),
                  SampleScore(12, 0.5, 0.2), SampleScore(13, 0.5, 0.2)]
        return s, scores

    def test_challenging(self):
        s, scores = self.scored()
        got = select_samples(s, scores, AllocationPlan(0, {0: 1}), SampleStrategy.CHALLENGING,
                             np.random.default_rng(0))
        assert got.ids.tolist() == [10]

    def test_hard_and_simple(self):
        s, scores = self.scored()
        plan = AllocationPlan(0, {0: 1})
        rng = np.random.default_rng(0)
        assert select_samples(s, scores, plan, SampleStrategy.HARD, rng).ids.tolist() == [11]
        assert select_samples(s, scores, plan, SampleStrategy.SIMPLE, rng).ids.tolist() == [10]

    def test_tie_goes_to_smaller_id(self):
        s, scores = self.scored()
        got = select_samples(s, scores, AllocationPlan(0, {1: 1}), SampleStrategy.CHALLENGING,
                             np.random.default_rng(0))
        assert got.ids.tolist() == [12]

    def test_random_whole_class(self):
        s, _ = self.scored()
        got = select_samples(s, None, AllocationPlan(0, {0: 2, 1: 0}), SampleStrategy.RANDOM,
                             np.random.default_rng(0))
        assert sorted(got.ids.tolist()) == [10, 11]

    def test_quota_too_large(self):
        s, scores = self.scored()
        with pytest.raises(ValueError):
            select_samples(s, scores, AllocationPlan(0, {0: 3}), SampleStrategy.HARD,
                           np.random.default_rng(0))

    def test_ranked_needs_scores(self):
        s, _ = self.scored()
        with pytest.raises(ValueError):
            select_samples(s, None, AllocationPlan(0, {0: 1}), SampleStrategy.SIMPLE,
                           np.random.default_rng(0))


class TestCaspRewrite:
    def filled(self):
        rng = np.random.default_rng(0)
        buf = ReplayBuffer(20, 1)
        buf.reservoir_update(stream(30, task=0), rng)
        buf.reservoir_update(stream(30, task=1, start=30), rng)
        return buf

    def test_same_content_is_a_noop(self):
        buf = self.filled()
        before = sorted(buf.slots.ids.tolist())
        current = buf.slots
        buf.casp_rewrite(1, current[np.flatnonzero(current.tasks == 1)])
        assert sorted(buf.slots.ids.tolist()) == before

    def test_empty_share_is_a_noop(self):
        buf = ReplayBuffer(4, 1).reservoir_update(stream(4), np.random.default_rng(0))
        before = buf.slots.tobytes()
        buf.casp_rewrite(3, stream(0, task=3))
        assert buf.slots.tobytes() == before

    def test_post_state(self):
        buf = self.filled()
        before = buf.slots
        share = buf.task_share(1)
        chosen = stream(share, task=1, start=100)
        buf.casp_rewrite(1, chosen)
        after = buf.slots
        assert buf.task_share(1) == share and len(buf) == len(before)
        assert set(after.ids[after.tasks == 1].tolist()) == set(chosen.ids.tolist())
        keep = before.tasks == 0
        assert np.array_equal(after.ids[keep], before.ids[keep])

    def test_size_mismatch(self):
        buf = self.filled()
        with pytest.raises(ValueError):
            buf.casp_rewrite(1, stream(buf.task_share(1) + 1, task=1, start=100))

    def test_wrong_task(self):
        buf = self.filled()
        with pytest.raises(ValueError):
            buf.casp_rewrite(1, stream(buf.task_share(1), task=0, start=100))


def test_dump(tmp_path):
    buf = ReplayBuffer(3, 1).reservoir_update(stream(2, task=4), np.random.default_rng(0))
    buf.dump(tmp_path / "b.csv")
    assert (tmp_path / "b.csv").read_text() == "slot,sample_id,task,class\n0,0,4,0\n1,1,4,1\n"


def test_strategy_parse():
    assert SampleStrategy.parse("challenging") is SampleStrategy.CHALLENGING
    with pytest.raises(ValueError):
        SampleStrategy.parse("typical")
