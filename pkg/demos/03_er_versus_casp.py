"""Experience replay with and without the class-adaptive buffer rewrite.

Both learners see the same stream, initial weights and batch order for a
given seed; only the buffer contents after each task differ.  The last two
lines show the rewrite switched to its identity setting, which must
reproduce plain replay exactly.
"""

from dataclasses import replace

import numpy as np

from caspsim import ClassStrategy, ExperimentConfig, SampleStrategy, run_er, run_er_casp

cfg = ExperimentConfig()
seeds = range(5)
print("seed   ER acc  CASP acc   ER forget  CASP forget")
rows = []
for s in seeds:
    _, er = run_er(cfg, s)
    _, casp = run_er_casp(cfg, s)
    rows.append((er.avg_end_acc, casp.avg_end_acc))
    print(f"{s:4d}  {er.avg_end_acc:7.3f}  {casp.avg_end_acc:8.3f}  "
          f"{er.avg_end_forget:10.3f}  {casp.avg_end_forget:11.3f}")
er_mean, casp_mean = np.mean(rows, axis=0)
print(f"mean  {er_mean:7.3f}  {casp_mean:8.3f}")

identity = replace(cfg, casp=replace(cfg.casp, class_strategy=ClassStrategy.NO_POLICY,
                                     sample_strategy=SampleStrategy.RANDOM))
m_er, _ = run_er(cfg, 0)
m_id, _ = run_er_casp(identity, 0)
print("\nNoPolicy + Random leaves replay untouched:", m_er.tobytes() == m_id.tobytes())
