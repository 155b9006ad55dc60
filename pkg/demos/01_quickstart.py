"""Recommend a layout for a small star schema.

Run with ``python3 demos/01_quickstart.py``.
"""

import numpy as np

from toclayout import DataObject, ObjectKind, WorkloadSpec, dot_optimize, grouping
from toclayout.cost import layout_cost
from toclayout.domain import Layout
from toclayout.estimator import estimate_toc
from toclayout.formats import fixture_classes
from toclayout.profiling import SynthSpec, synthesize_profile

# Storage classes
#
# The bundled fixture has five devices with price in cents/GB/hour and
# per-I/O latency in ms at two concurrency levels. We keep three of them.

devices = fixture_classes()
classes = [devices[c] for c in ("HDD", "L-SSD", "H-SSD")]
for c in classes:
    print(f"{c.id:8} {c.price:.3g} c/GB/h  RR {c.latency('RR', 1)} ms  SR {c.latency('SR', 1)} ms")

# Data objects
#
# Indexes travel with their table, so each table and its indexes form one
# group and the search moves whole groups.

objects = [
    DataObject("lineitem", 18.0),
    DataObject("lineitem_pk", 3.0, ObjectKind.INDEX, "lineitem"),
    DataObject("orders", 4.0),
    DataObject("orders_pk", 1.0, ObjectKind.INDEX, "orders"),
    DataObject("customer", 0.6),
    DataObject("customer_pk", 0.1, ObjectKind.INDEX, "customer"),
]
groups = grouping(objects)
print([g.members for g in groups])

# Workload and profile
#
# One stream runs five queries in order. A real deployment profiles the
# DBMS under each baseline placement; here we synthesize the I/O counts.

queries = tuple(f"q{i}" for i in range(1, 6))
workload = WorkloadSpec((queries,), {q: 30.0 for q in queries})
profile = synthesize_profile(objects, groups, classes, SynthSpec("random", seed=7, queries=queries))
print(len(profile.entries), "profile rows")

# Optimize
#
# A relative SLA of 0.25 lets every query run up to four times slower than
# with everything on the most expensive class.

res = dot_optimize(objects, classes, workload, profile, 0.25)
print(res.status.value, "after", res.layouts_examined, "layouts")
for obj, cid in sorted(res.layout.assignment.items()):
    print(f"  {obj:12} -> {cid}")

# Compare with the all-H-SSD layout

everything_fast = Layout.uniform(objects, "H-SSD")
toc_fast, est_fast = estimate_toc(workload, everything_fast, profile, classes, objects, groups)
print(f"TOC {res.toc:.4g} cents vs {toc_fast:.4g} on H-SSD ({toc_fast / res.toc:.1f}x)")
print(f"layout cost {layout_cost(res.layout, classes, objects):.4g} vs "
      f"{layout_cost(everything_fast, classes, objects):.4g} cents/hour")
slowdown = np.array([res.estimate.per_query[q] / est_fast.per_query[q] for q in queries])
print("per-query slowdown", np.round(slowdown, 2))
