"""Do classes with jumpy confidence get forgotten more?

Each task has ten classes whose clusters range from tight to wide.  After
plain replay over five tasks, the first task's per-class forgetting is set
against per-class vulnerability measured by a surrogate on that task alone.
"""

import numpy as np

from caspsim import correlation_profile, vulnerability_forgetting

cfg = correlation_profile()
r, vul, forget = vulnerability_forgetting(cfg, seed=0)
print("class  vulnerability  forgetting")
for c in sorted(vul):
    print(f"{c:5d}  {vul[c]:13.4f}  {forget[c]:10.3f}")
print(f"\nPearson r for seed 0: {r:.3f}")

rs = [vulnerability_forgetting(cfg, s)[0] for s in range(1, 6)]
print("seeds 1-5:", np.round(rs, 3))
