"""Score one task's samples by how a fresh model's confidence in them moves.

A small surrogate network is trained from scratch on the last task of the
default stream, whose two clusters are the widest and overlap the most.  After every epoch the softmax probability of each sample's
own label is recorded; the mean and spread of those numbers are what the
replay policy later ranks on.
"""

import numpy as np

from caspsim import CaspConfig, build_trace, categorize_samples, make_gaussian_stream
from caspsim.runner import default_stream

task = make_gaussian_stream(default_stream())[-1]
trace = build_trace(task, CaspConfig(seed=1))
print(f"task {task.index} holds classes {task.classes}, {len(task.train)} training samples")
print(f"trace: {trace.values.shape[0]} samples x {trace.epochs} epochs\n")

print("class  mean conf  vulnerability")
for s in trace.class_scores():
    print(f"{s.class_id:5d}  {s.mean_confidence:9.3f}  {s.vulnerability:13.4f}")

cats = categorize_samples(trace.sample_scores(), 0.05)
scores = {s.sample_id: s for s in trace.sample_scores()}
for name in ("simple", "hard", "challenging"):
    ids = getattr(cats, name)
    m = np.mean([scores[i].mean_confidence for i in ids])
    v = np.mean([scores[i].vulnerability for i in ids])
    print(f"\n{name:12s} {len(ids)} samples, mean conf {m:.3f}, mean vulnerability {v:.4f}")

trace.dump("trace.csv")
print("\nfull trace written to trace.csv")
