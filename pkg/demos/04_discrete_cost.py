"""Linear versus discrete layout cost.

With the discrete model a class costs alpha * price * capacity as soon as it
holds anything, plus (1 - alpha) * price * used. Alpha = 0 is the linear model.
"""

from toclayout import CostModelConfig, dot_optimize, exhaustive_search
from toclayout.cost import layout_cost
from toclayout.profiling import random_instance

inst = random_instance(21, n_objects=6)
classes = [c.with_capacity(60.0) for c in inst.classes]
for c in classes:
    print(c.id, f"{c.price:.4g} c/GB/h", "cap", c.capacity)

print()
print("alpha   classes used      C_linear   C_model    TOC (cents)")
for alpha in (0.0, 0.25, 0.5, 0.75, 1.0):
    cfg = CostModelConfig.discrete(alpha)
    res = dot_optimize(inst.objects, classes, inst.workload, inst.profile, 0.25, cfg)
    es = exhaustive_search(inst.objects, classes, inst.workload, inst.profile, 0.25, cfg)
    used = sorted(set(res.layout.assignment.values()))
    lin = layout_cost(res.layout, classes, inst.objects)
    model = layout_cost(res.layout, classes, inst.objects, cfg)
    print(f"{alpha:<7} {str(used):17} {lin:<10.4g} {model:<10.4g} {res.toc:.4e}  (ES {es.toc:.4e})")

# With alpha > 0 the greedy search can stall on the priciest class: the first
# group to enter an empty class pays that class's fixed term, so the move's
# saving is negative and it is never tried. ES has no such blind spot.

# Charging the fixed term for unused classes as well makes that first move
# free again.
cfg = CostModelConfig.discrete(0.5, count_empty=True)
res = dot_optimize(inst.objects, classes, inst.workload, inst.profile, 0.25, cfg)
print("\ncount empty classes:", sorted(set(res.layout.assignment.values())), f"{res.toc:.4e}")
