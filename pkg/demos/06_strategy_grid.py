"""Sweep class and sample strategies and save the table.

Runs a 3 x 2 slice of the strategy grid over two seeds, writes the rows as
CSV and reads them back.  The same sweep from a shell would be
``caspsim grid --config demos/small.cfg --seeds 0..1 --out grid.csv``.
"""

from collections import defaultdict

import numpy as np

from caspsim import ClassStrategy, ExperimentConfig, SampleStrategy, read_results, run_grid
from caspsim.runner import emit_results

cfg = ExperimentConfig()
rows = run_grid(cfg, [ClassStrategy.CHALLENGING, ClassStrategy.BALANCED, ClassStrategy.NO_POLICY],
                [SampleStrategy.CHALLENGING, SampleStrategy.RANDOM], seeds=[0, 1])
emit_results(rows, "grid.csv")
by_method = defaultdict(list)
for row in read_results("grid.csv"):
    by_method[row.method].append(row.avg_end_acc)
for method, accs in sorted(by_method.items(), key=lambda kv: -np.mean(kv[1])):
    print(f"{method:32s} {np.mean(accs):.3f}")
print("\nrows written to grid.csv")
