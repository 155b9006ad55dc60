import itertools
import math

import pytest

from toclayout.cost import LINEAR
from toclayout.domain import IoType, Layout, StorageClass, grouping
from toclayout.estimator import (
    baseline_layout,
    estimate_toc,
    estimate_workload_time,
    feasible,
    resolve_constraints,
)
from toclayout.formats import dump_json, dump_profile, fixture_classes, parse_config
from toclayout.profiling import SynthSpec, synthesize_profile


@pytest.fixture(scope="session")
def devices():
    return fixture_classes()


def flat_class(cid, price, capacity=math.inf, sr=1.0, rr=1.0, sw=1.0, rw=1.0, levels=(1,)):
    row = {IoType.SR: sr, IoType.RR: rr, IoType.SW: sw, IoType.RW: rw}
    return StorageClass(cid, price, capacity, {lvl: row for lvl in levels})


def brute_force(objects, classes, workload, profile, sla, cost_config=LINEAR):
    """Reference optimum: every layout through the dict-based estimator.

    Returns (toc, layout) of the cheapest feasible layout, first in
    lexicographic order on ties, or (inf, None).
    """
    groups = grouping(objects)
    order = [m for g in groups for m in g.members]
    base = estimate_workload_time(baseline_layout(objects, classes), workload, profile, classes, groups)
    cons = resolve_constraints(sla, base, workload.metric_mode)
    best = (math.inf, None)
    for combo in itertools.product([c.id for c in classes], repeat=len(order)):
        layout = Layout(dict(zip(order, combo)))
        toc, est = estimate_toc(workload, layout, profile, classes, objects, groups, cost_config)
        if feasible(layout, classes, objects, est, cons) and toc < best[0]:
            best = (toc, layout)
    return best


def write_problem(tmp_path, n_tables=2, classes=("HDD", "L-SSD", "H-SSD"), scenario="random", seed=0, **extra):
    objects = []
    for i in range(n_tables):
        objects.append({"id": f"t{i}", "size_gb": 2.0 + i})
        objects.append({"id": f"t{i}_pk", "size_gb": 0.5, "kind": "index", "parent": f"t{i}"})
    doc = {
        "schema": "toclayout.config/1",
        "objects": objects,
        "classes": [{"id": c, "from_fixture": True} for c in classes],
        "workload": {"streams": [["q1", "q2", "q3"]], "cpu_time_ms": {"q1": 50, "q2": 20, "q3": 5}},
        "profile": {"path": "profile.csv"},
    }
    doc.update(extra)
    cfg = tmp_path / "config.json"
    cfg.write_text(dump_json(doc))
    p = parse_config(doc)
    prof = synthesize_profile(p.objects, grouping(p.objects), p.classes, SynthSpec(scenario, seed, ("q1", "q2", "q3")))
    (tmp_path / "profile.csv").write_text(dump_profile(prof))
    return str(cfg)
