import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from toclayout.cost import CostModelConfig, layout_cost
from toclayout.domain import (
    DataObject,
    IoType,
    Layout,
    MetricMode,
    ObjectGroup,
    ObjectKind,
    ValidationError,
    WorkloadProfile,
    WorkloadSpec,
    grouping,
)
from toclayout.estimator import (
    Evaluator,
    TimeEstimate,
    baseline_layout,
    cost_saving,
    estimate_toc,
    estimate_workload_time,
    feasible,
    io_time_share,
    performance_penalty,
    priority_score,
    resolve_constraints,
)
from toclayout.profiling import random_instance

from conftest import flat_class

G = ObjectGroup(("A", "A_pk"))
OBJS = [DataObject("A", 10.0), DataObject("A_pk", 1.0, ObjectKind.INDEX, "A")]


@pytest.fixture
def two(devices):
    return [devices["HDD"], devices["H-SSD"]]


def sr_profile(classes, count=1000.0, query="q1"):
    ids = [c.id for c in classes]
    return WorkloadProfile(
        {(query, "A", IoType.SR, (a, b)): count for a in ids for b in ids}
    )


def test_io_time_share_hdd(two):
    assert io_time_share(G, ("HDD", "HDD"), sr_profile(two), two, 1) == pytest.approx(72.0, rel=1e-9)


def test_io_time_share_empty_profile(two):
    assert io_time_share(G, ("HDD", "HDD"), WorkloadProfile(), two, 1) == 0.0


def test_io_time_share_uses_member_class(two):
    assert io_time_share(G, ("H-SSD", "HDD"), sr_profile(two), two, 1) == pytest.approx(16.0, rel=1e-9)


def test_io_time_share_missing_level(two):
    with pytest.raises(ValidationError, match="concurrency 7"):
        io_time_share(G, ("HDD", "HDD"), sr_profile(two), two, 7)


def test_io_time_share_bad_placement(two):
    with pytest.raises(ValidationError):
        io_time_share(G, ("HDD",), sr_profile(two), two, 1)


def test_io_time_share_additive_over_members(devices):
    classes = [devices["HDD"], devices["L-SSD"], devices["H-SSD"]]
    rng = np.random.default_rng(3)
    for _ in range(20):
        p = tuple(rng.choice([c.id for c in classes], size=2))
        counts = {(o, r): float(rng.integers(0, 500)) for o in G.members for r in IoType}
        grouped = WorkloadProfile({("q", o, r, p): n for (o, r), n in counts.items()})
        single = WorkloadProfile({("q", o, r, (p[i],)): counts[(o, r)] for i, o in enumerate(G.members) for r in IoType})
        parts = sum(
            io_time_share(ObjectGroup((o,)), (p[i],), single, classes, 1) for i, o in enumerate(G.members)
        )
        assert io_time_share(G, p, grouped, classes, 1) == pytest.approx(parts, rel=1e-12)


def test_workload_time_cpu_plus_io(two):
    w = WorkloadSpec((("q1",),), {"q1": 8.0})
    est = estimate_workload_time(Layout.uniform(OBJS, "HDD"), w, sr_profile(two), two, [G])
    assert est.per_query["q1"] == pytest.approx(80.0, rel=1e-9)
    assert est.total_ms == pytest.approx(80.0, rel=1e-9)


def test_workload_time_parallel_streams():
    classes = [flat_class("d", 1.0, sr=0.5, levels=(1, 2))]
    prof = WorkloadProfile({("q1", "A", IoType.SR, ("d", "d")): 10.0, ("q2", "A", IoType.SR, ("d", "d")): 4.0})
    w1 = WorkloadSpec((("q1", "q2"),), {"q1": 1.0, "q2": 2.0})
    w2 = WorkloadSpec((("q1", "q2"), ("q1", "q2")), {"q1": 1.0, "q2": 2.0})
    layout = Layout.uniform(OBJS, "d")
    one = estimate_workload_time(layout, w1, prof, classes, [G])
    both = estimate_workload_time(layout, w2, prof, classes, [G])
    assert both.total_ms == one.total_ms == (1.0 + 10 * 0.5) + (2.0 + 4 * 0.5)
    assert both.throughput == pytest.approx(2 * one.throughput)


def test_workload_time_no_io_rows(two):
    w = WorkloadSpec((("q9",),), {"q9": 12.5})
    est = estimate_workload_time(Layout.uniform(OBJS, "HDD"), w, sr_profile(two), two, [G])
    assert est.per_query["q9"] == 12.5


def test_estimate_toc_half_hour(devices):
    hssd = devices["H-SSD"]
    objs = [DataObject("a", 10.0), DataObject("b", 20.0)]
    w = WorkloadSpec((("q",),), {"q": 0.5 * 3_600_000})
    toc, est = estimate_toc(w, Layout.uniform(objs, "H-SSD"), WorkloadProfile(), [hssd], objs, grouping(objs))
    assert est.total == pytest.approx(0.5, rel=1e-12)
    assert toc == pytest.approx(2.535, rel=1e-9)


def test_estimate_toc_vanishes_with_price():
    cls = [flat_class("d", 1e-9)]
    w = WorkloadSpec((("q",),), {"q": 1000.0})
    toc, _ = estimate_toc(w, Layout.uniform(OBJS, "d"), WorkloadProfile(), cls, OBJS, [G])
    assert 0 < toc < 1e-9


def test_estimate_toc_linear_in_counts(two):
    w = WorkloadSpec((("q1",),), {"q1": 0.0})
    layout = Layout.uniform(OBJS, "HDD")
    p = sr_profile(two)
    t1, _ = estimate_toc(w, layout, p, two, OBJS, [G])
    t2, _ = estimate_toc(w, layout, p.scaled(2.0), two, OBJS, [G])
    assert t2 == pytest.approx(2 * t1, rel=1e-12)


def test_resolve_constraints_per_query():
    base = TimeEstimate({"q": 80.0}, (80.0,), 1)
    assert resolve_constraints(0.5, base, MetricMode.PER_QUERY).caps == {"q": 160.0}
    assert resolve_constraints(1.0, base, MetricMode.PER_QUERY).caps == {"q": 80.0}


def test_resolve_constraints_throughput():
    base = TimeEstimate({"q": 3600.0}, (3600.0,), 1)  # 1 task per 1/1000 h
    assert base.throughput == pytest.approx(1000.0)
    c = resolve_constraints(0.25, base, MetricMode.THROUGHPUT)
    assert c.throughput_floor == pytest.approx(250.0)


@pytest.mark.parametrize("sla", [0.0, -0.5, 1.5])
def test_resolve_constraints_bounds(sla):
    with pytest.raises(ValidationError, match=r"\(0,1\]"):
        resolve_constraints(sla, TimeEstimate({"q": 1.0}, (1.0,), 1), MetricMode.PER_QUERY)


def test_feasible_verdicts():
    cls = [flat_class("raid", 1.0, capacity=24), flat_class("ssd", 2.0)]
    objs = [DataObject("a", 20.0), DataObject("b", 7.0)]
    cons = resolve_constraints(0.5, TimeEstimate({"q1": 80.0, "q2": 10.0}, (90.0,), 2), MetricMode.PER_QUERY)
    ok = TimeEstimate({"q1": 150.0, "q2": 20.0}, (170.0,), 2)
    slow = TimeEstimate({"q1": 170.0, "q2": 20.0}, (190.0,), 2)
    spread = Layout({"a": "raid", "b": "ssd"})
    v = feasible(spread, cls, objs, ok, cons)
    assert v.ok and v.violations == ()
    v = feasible(spread, cls, objs, slow, cons)
    assert not v and len(v.violations) == 1 and "q1" in v.violations[0]
    v = feasible(Layout.uniform(objs, "raid"), cls, objs, ok, cons)
    assert not v and "raid" in v.violations[0]


def test_feasible_throughput_mode():
    cls = [flat_class("d", 1.0)]
    objs = [DataObject("a", 1.0)]
    cons = resolve_constraints(0.5, TimeEstimate({"q": 3600.0}, (3600.0,), 1), MetricMode.THROUGHPUT)
    assert feasible(Layout.uniform(objs, "d"), cls, objs, TimeEstimate({"q": 7000.0}, (7000.0,), 1), cons)
    assert not feasible(Layout.uniform(objs, "d"), cls, objs, TimeEstimate({"q": 7300.0}, (7300.0,), 1), cons)


def test_performance_penalty(two):
    prof = sr_profile(two)
    assert performance_penalty(G, ("HDD", "HDD"), prof, two, 1) == pytest.approx(56.0, rel=1e-9)
    assert performance_penalty(G, ("H-SSD", "H-SSD"), prof, two, 1) == 0.0


def test_performance_penalty_can_be_negative(two):
    # a plan that is cheaper in I/O when the index leaves the fast class
    prof = WorkloadProfile({
        ("q", "A", IoType.RR, ("H-SSD", "H-SSD")): 1000.0,
        ("q", "A", IoType.SR, ("H-SSD", "HDD")): 100.0,
    })
    assert performance_penalty(G, ("H-SSD", "HDD"), prof, two, 1) < 0


def test_cost_saving_hssd_to_hdd(devices):
    classes = [devices["HDD"], devices["H-SSD"]]
    objs = [DataObject("A", 10.0)]
    g = ObjectGroup(("A",))
    assert cost_saving(g, ("HDD",), objs, classes) == pytest.approx(10 * (0.169 - 0.000347), rel=1e-9)
    assert cost_saving(g, ("HDD",), objs, classes) == pytest.approx(1.6865, abs=1e-4)
    assert cost_saving(g, ("H-SSD",), objs, classes) == 0.0


def test_cost_saving_discrete_vacates_class():
    classes = [flat_class("cheap", 0.01, capacity=100), flat_class("exp", 0.1, capacity=50)]
    cfg = CostModelConfig.discrete(0.5)
    g = ObjectGroup(("A",))
    sole = [DataObject("A", 5.0)]
    shared = [DataObject("A", 5.0), DataObject("B", 5.0)]
    for objs in (sole, shared):
        l0 = Layout.uniform(objs, "exp")
        expected = layout_cost(l0, classes, objs, cfg) - layout_cost(l0.moved(g, ("cheap",)), classes, objs, cfg)
        assert cost_saving(g, ("cheap",), objs, classes, cfg) == pytest.approx(expected, rel=1e-12)
    # sole occupant: 0.5*0.1*50 (fixed, vacated) + 0.5*0.1*5 - (0.5*0.01*100 + 0.5*0.01*5)
    assert cost_saving(g, ("cheap",), sole, classes, cfg) == pytest.approx(2.225, rel=1e-12)
    assert cost_saving(g, ("cheap",), shared, classes, cfg) == pytest.approx(-0.275, rel=1e-12)


def test_priority_score():
    assert priority_score(56.0, 10 * (0.169 - 0.000347)) == pytest.approx(33.2042, rel=1e-5)
    assert priority_score(0.0, 1.0) == 0.0
    assert priority_score(-3.0, 1.0) < 0
    assert priority_score(5.0, 0.0) is None
    assert priority_score(5.0, -1.0) is None


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([0.125, 0.5, 1.0]))
def test_evaluator_matches_reference(seed, sla):
    inst = random_instance(seed, n_objects=5, n_classes=3, max_group_size=2)
    groups = inst.groups
    ev = Evaluator(inst.objects, groups, inst.classes, inst.workload, inst.profile)
    rng = np.random.default_rng(seed)
    codes = np.stack([rng.integers(0, len(d), size=8) for d in ev.digits], axis=1)
    batch = ev.evaluate(codes)
    for row, code in enumerate(codes):
        layout = ev.decode(code)
        toc, est = estimate_toc(inst.workload, layout, inst.profile, inst.classes, inst.objects, groups)
        assert batch.toc[row] == pytest.approx(toc, rel=1e-12)
        for qi, q in enumerate(ev.queries):
            assert batch.per_query[row, qi] == pytest.approx(est.per_query[q], rel=1e-12)
        assert (ev.encode(layout) == code).all()


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.data())
def test_toc_monotone_in_counts(seed, data):
    inst = random_instance(seed, n_objects=4, n_classes=3)
    groups = inst.groups
    layout = Layout({o.id: data.draw(st.sampled_from([c.id for c in inst.classes])) for o in inst.objects})
    keys = sorted(inst.profile.entries, key=repr)
    key = data.draw(st.sampled_from(keys))
    bumped = dict(inst.profile.entries)
    bumped[key] += data.draw(st.floats(1, 1000))
    toc0, est0 = estimate_toc(inst.workload, layout, inst.profile, inst.classes, inst.objects, groups)
    toc1, est1 = estimate_toc(inst.workload, layout, WorkloadProfile(bumped), inst.classes, inst.objects, groups)
    assert est1.total >= est0.total
    assert toc1 >= toc0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_baseline_feasible_at_full_sla(seed):
    inst = random_instance(seed, n_objects=5)
    groups = inst.groups
    l0 = baseline_layout(inst.objects, inst.classes)
    est = estimate_workload_time(l0, inst.workload, inst.profile, inst.classes, groups)
    cons = resolve_constraints(1.0, est, MetricMode.PER_QUERY)
    assert feasible(l0, inst.classes, inst.objects, est, cons)
