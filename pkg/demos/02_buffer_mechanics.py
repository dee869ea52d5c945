"""Reservoir sampling, task shares and quota apportionment.

Two tasks of 200 samples stream into a 100-slot buffer.  Reservoir sampling
keeps a uniform subset, so the second task ends up with about half the
slots.  The replay policy then splits a task's share across its classes in
proportion to per-class weights, with exact largest-remainder rounding.
"""

import numpy as np

from caspsim import ReplayBuffer, SampleSet, allocate_quota, largest_remainder


def block(task, start, n=200):
    ids = np.arange(start, start + n)
    return SampleSet(ids, np.zeros((n, 2)), ids % 2 + 2 * task, np.full(n, task))


rng = np.random.default_rng(0)
shares = []
for _ in range(500):
    buf = ReplayBuffer(100, 2)
    buf.reservoir_update(block(0, 0), rng)
    buf.reservoir_update(block(1, 200), rng)
    shares.append(buf.task_share(1))
print(f"second task's share over 500 runs: mean {np.mean(shares):.1f} of 100 slots")
print("class counts of the last buffer:", buf.class_counts())

print("\nlargest remainder, weights [3, 1] over 8 slots ->", largest_remainder([3, 1], 8))
print("largest remainder, weights [1, 1, 1] over 10 slots ->", largest_remainder([1, 1, 1], 10))

plan = allocate_quota({2: 0.30, 3: 0.05, 4: 0.01}, 40, {2: 12, 3: 50, 4: 50}, task=1)
print("\nclass 2 wants most of 40 slots but only has 12 samples:")
print("quotas after capping and redistribution:", plan.quotas, "total", plan.total)
