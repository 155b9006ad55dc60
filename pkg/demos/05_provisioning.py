"""Choose between two storage boxes.

Each box is a set of storage classes with its own profile. The advisor
optimizes each one and keeps the box with the lowest TOC.
"""

from toclayout import DataObject, ObjectKind, WorkloadSpec, grouping, provision_configurations
from toclayout.domain import StorageConfiguration
from toclayout.formats import fixture_classes
from toclayout.optimizer import dot_optimize, exhaustive_search
from toclayout.profiling import SynthSpec, synthesize_profile

devices = fixture_classes()
boxes = [
    StorageConfiguration("box1", tuple(devices[c] for c in ("HDD-RAID0", "L-SSD", "H-SSD"))),
    StorageConfiguration("box2", tuple(devices[c] for c in ("HDD", "L-SSD-RAID0", "H-SSD"))),
]
objects = [
    DataObject("lineitem", 18.0), DataObject("lineitem_pk", 3.0, ObjectKind.INDEX, "lineitem"),
    DataObject("orders", 4.0), DataObject("orders_pk", 1.0, ObjectKind.INDEX, "orders"),
    DataObject("part", 1.5), DataObject("part_pk", 0.3, ObjectKind.INDEX, "part"),
]
queries = ("q1", "q2", "q3", "q4")
workload = WorkloadSpec((queries,), {q: 10.0 for q in queries})
groups = grouping(objects)
profiles = {
    b.id: synthesize_profile(objects, groups, b.classes, SynthSpec("seq-scan-only", 3, queries)) for b in boxes
}

for sla in (0.5, 0.25, 0.125):
    chosen, best = provision_configurations(boxes, objects, workload, profiles, sla)
    row = []
    for b in boxes:
        dot = dot_optimize(objects, b.classes, workload, profiles[b.id], sla)
        es = exhaustive_search(objects, b.classes, workload, profiles[b.id], sla)
        row.append(f"{b.id}: DOT {dot.toc:.3e} ES {es.toc:.3e}")
    print(f"SLA {sla}: pick {chosen}   " + "   ".join(row))

# DOT can land well above ES here. Every feasible move replaces the group's
# current placement, so a late move such as orders -> (HDD-RAID0, H-SSD)
# undoes an earlier all-HDD-RAID0 placement; only the best layout seen is
# kept. Print the trace to watch it happen.
r = dot_optimize(objects, boxes[0].classes, workload, profiles["box1"], 0.25, trace=True)
for t in r.trace[-8:]:
    print(f"  {t.move.group:9} {str(t.move.placement):28} score {t.move.score:9.1f}  TOC {t.toc:.3e}")

# Capacity limits change the answer: halve the big HDD-RAID0 volume
capped = StorageConfiguration("box1-capped", (devices["HDD-RAID0"].with_capacity(12.0),) + boxes[0].classes[1:])
profiles[capped.id] = profiles["box1"]
chosen, best = provision_configurations([capped, boxes[1]], objects, workload, profiles, 0.25)
print("with a 12 GB cap on HDD-RAID0:", chosen, f"{best.toc:.3e}")
