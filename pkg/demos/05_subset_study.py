"""Train on a tenth of the data, chosen four different ways.

The whole stream is pooled and scored once by a surrogate.  A fresh model is
then trained on 10% of each class, picked as the most confident (simple),
least confident (hard), most variable (challenging) or at random.
"""

import numpy as np

from caspsim import ExperimentConfig, run_subset_study

cfg = ExperimentConfig()
full = np.mean([run_subset_study(cfg, 1.0, "random", s).avg_end_acc for s in range(3)])
print(f"all data          test accuracy {full:.3f}")
for category in ("simple", "challenging", "random", "hard"):
    accs = [run_subset_study(cfg, 0.1, category, s).avg_end_acc for s in range(5)]
    print(f"10% {category:12s}  test accuracy {np.mean(accs):.3f}")
