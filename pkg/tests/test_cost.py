import math

import pytest
from hypothesis import given, strategies as st

from toclayout.cost import CostModelConfig, layout_cost, workload_toc
from toclayout.domain import DataObject, Layout, ValidationError

from conftest import flat_class


def test_linear_all_on_hssd(devices):
    hssd = devices["H-SSD"]
    objs = [DataObject("a", 10.0), DataObject("b", 20.0)]
    cost = layout_cost(Layout.uniform(objs, "H-SSD"), [hssd], objs)
    # 30 GB * 0.169 cents/GB/h
    assert cost == pytest.approx(5.07, rel=1e-9)


def test_discrete_alpha_zero_is_linear_exactly(devices):
    classes = [devices[c] for c in ("HDD", "L-SSD", "H-SSD")]
    objs = [DataObject("a", 10.0), DataObject("b", 3.3), DataObject("c", 0.7)]
    layout = Layout({"a": "HDD", "b": "H-SSD", "c": "H-SSD"})
    assert layout_cost(layout, classes, objs, CostModelConfig.discrete(0.0)) == layout_cost(layout, classes, objs)


def test_discrete_alpha_one_pays_whole_unit():
    cls = [flat_class("d", 0.001, capacity=100)]
    for size in (10.0, 55.0):
        objs = [DataObject("a", size)]
        cost = layout_cost(Layout.uniform(objs, "d"), cls, objs, CostModelConfig.discrete(1.0))
        assert cost == pytest.approx(0.1, rel=1e-12)


def test_discrete_empty_class_flag():
    cls = [flat_class("a", 0.01, capacity=100), flat_class("b", 0.5, capacity=10)]
    objs = [DataObject("x", 10.0)]
    layout = Layout.uniform(objs, "a")
    skip = layout_cost(layout, cls, objs, CostModelConfig.discrete(0.5))
    count = layout_cost(layout, cls, objs, CostModelConfig.discrete(0.5, count_empty=True))
    # a: 0.5*0.01*100 + 0.5*0.01*10 = 0.55; b's fixed term 0.5*0.5*10 = 2.5
    assert skip == pytest.approx(0.55, rel=1e-12)
    assert count == pytest.approx(3.05, rel=1e-12)


def test_discrete_over_unit_refused():
    cls = [flat_class("d", 0.01, capacity=5)]
    objs = [DataObject("x", 10.0)]
    with pytest.raises(ValidationError):
        layout_cost(Layout.uniform(objs, "d"), cls, objs, CostModelConfig.discrete(0.3))


@pytest.mark.parametrize("alpha", [-0.1, 1.1])
def test_alpha_bounds(alpha):
    with pytest.raises(ValidationError):
        CostModelConfig.discrete(alpha)


def test_alpha_only_for_discrete():
    with pytest.raises(ValidationError):
        CostModelConfig("linear", 0.5)
    with pytest.raises(ValidationError):
        CostModelConfig("discrete")


def test_workload_toc_examples():
    assert workload_toc(5.07, 0.5) == pytest.approx(2.535, rel=1e-12)
    assert workload_toc(5.07, 0.0) == 0.0
    # throughput form: C(L) / T with T = 2 tasks/hour
    assert workload_toc(5.07, 1 / 2) == pytest.approx(5.07 / 2, rel=1e-12)


@pytest.mark.parametrize("args", [(-1.0, 1.0), (1.0, -1.0), (math.inf, 1.0), (1.0, math.nan)])
def test_workload_toc_rejects_bad_input(args):
    with pytest.raises(ValidationError):
        workload_toc(*args)


sizes = st.lists(st.floats(0.01, 100), min_size=1, max_size=6)
prices = st.lists(st.floats(1e-5, 1.0), min_size=3, max_size=3)


def _setup(sizes, prices, assign):
    classes = [flat_class(f"d{j}", p, capacity=1e4) for j, p in enumerate(prices)]
    objs = [DataObject(f"o{i}", s) for i, s in enumerate(sizes)]
    layout = Layout({o.id: f"d{assign[i % len(assign)]}" for i, o in enumerate(objs)})
    return classes, objs, layout


@given(sizes, prices, st.lists(st.integers(0, 2), min_size=1), st.floats(0.01, 100))
def test_price_scaling_homogeneity(sizes, prices, assign, k):
    classes, objs, layout = _setup(sizes, prices, assign)
    scaled = [c.with_price(c.price * k) for c in classes]
    for cfg in (CostModelConfig(), CostModelConfig.discrete(0.4)):
        assert layout_cost(layout, scaled, objs, cfg) == pytest.approx(k * layout_cost(layout, classes, objs, cfg), rel=1e-12)


@given(sizes, prices, st.lists(st.integers(0, 2), min_size=1), st.floats(0.1, 10))
def test_linear_size_scaling(sizes, prices, assign, k):
    classes, objs, layout = _setup(sizes, prices, assign)
    big = [DataObject(o.id, o.size * k) for o in objs]
    assert layout_cost(layout, classes, big) == pytest.approx(k * layout_cost(layout, classes, objs), rel=1e-12)


@given(sizes, prices, st.lists(st.integers(0, 2), min_size=1), st.data())
def test_linear_monotone_in_price(sizes, prices, assign, data):
    classes, objs, layout = _setup(sizes, prices, assign)
    o = data.draw(st.sampled_from(objs))
    src = layout[o.id]
    dst = data.draw(st.sampled_from([c.id for c in classes]))
    price = {c.id: c.price for c in classes}
    moved = Layout({**layout.assignment, o.id: dst})
    before, after = layout_cost(layout, classes, objs), layout_cost(moved, classes, objs)
    if price[dst] >= price[src]:
        assert after >= before - 1e-12 * before
    assert layout_cost(Layout(layout.assignment), classes, objs) == before
