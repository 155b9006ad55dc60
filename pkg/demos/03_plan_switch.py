"""When the layout changes the query plan.

In the ``plan-switch`` profile an index scan is chosen only when the table
and its index both sit on the class with the fastest random reads. Any
other placement falls back to a much longer sequential scan. Tightening
the SLA keeps the group on the fast class.
"""

from toclayout import DataObject, ObjectKind, WorkloadSpec, dot_optimize, exhaustive_search, grouping
from toclayout.formats import fixture_classes
from toclayout.profiling import SynthSpec, synthesize_profile

devices = fixture_classes()
classes = [devices["HDD"], devices["H-SSD"]]
objects = [DataObject("orders", 10.0), DataObject("orders_pk", 1.0, ObjectKind.INDEX, "orders")]
queries = ("q1", "q2", "q3")
workload = WorkloadSpec((queries,), {q: 10.0 for q in queries})
profile = synthesize_profile(objects, grouping(objects), classes, SynthSpec("plan-switch", 0, queries))

for p in [("H-SSD", "H-SSD"), ("H-SSD", "HDD"), ("HDD", "HDD")]:
    rows = {f"{k[1]}:{k[2].value}": v for k, v in profile.entries.items() if k[0] == "q1" and k[3] == p}
    print(p, rows)

print()
print("  SLA     layout              TOC (cents)   ES agrees")
for sla in (1.0, 0.5, 0.1, 0.05, 0.01, 0.005, 0.001):
    dot = dot_optimize(objects, classes, workload, profile, sla)
    es = exhaustive_search(objects, classes, workload, profile, sla)
    placement = (dot.layout["orders"], dot.layout["orders_pk"])
    print(f"  {sla:<7} {str(placement):20} {dot.toc:.4e}    {es.layout == dot.layout}")
