"""How close does the greedy search get to exhaustive search?

Small random instances, so ES can enumerate all M^N layouts.
"""

import numpy as np

from toclayout import dot_optimize, exhaustive_search
from toclayout.profiling import random_instance

slas = (0.125, 0.25, 0.5)
ratios, examined = [], []
for seed in range(100):
    n = int(np.random.default_rng(seed).integers(2, 9))
    inst = random_instance(seed, n_objects=n, n_classes=3, max_group_size=2)
    sla = slas[seed % 3]
    dot = dot_optimize(inst.objects, inst.classes, inst.workload, inst.profile, sla)
    es = exhaustive_search(inst.objects, inst.classes, inst.workload, inst.profile, sla)
    if dot.feasible and es.feasible:
        ratios.append(dot.toc / es.toc)
        examined.append((dot.layouts_examined, es.layouts_examined))

r = np.array(ratios)
print(f"{r.size} instances feasible for both")
print(f"TOC ratio: median {np.median(r):.4f}  p90 {np.percentile(r, 90):.4f}  max {r.max():.3f}")
print(f"exact optimum found in {np.mean(r == 1.0):.0%}, within 1.25 in {np.mean(r <= 1.25):.0%}")

e = np.array(examined)
print(f"layouts examined: DOT mean {e[:, 0].mean():.1f}, ES mean {e[:, 1].mean():.1f}")

# The worst few, for a closer look
worst = np.argsort(r)[-3:][::-1]
print("largest ratios", np.round(r[worst], 3))
