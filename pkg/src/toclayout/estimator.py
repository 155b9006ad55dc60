"""Profile-driven time and TOC estimation, constraints and move scoring.

Two routes compute the same quantities:

* the module-level functions work directly on dicts and are easy to audit;
* :class:`Evaluator` precomputes per-group I/O time tables with numpy and
  evaluates whole batches of layouts at once. The optimizers use it.

The test suite checks the two routes against each other.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .cost import LINEAR, CostModelConfig, CostVariant, layout_cost, workload_toc
from .domain import (
    IO_TYPES,
    DataObject,
    Layout,
    MetricMode,
    Move,
    ObjectGroup,
    PerformanceConstraint,
    Placement,
    StorageClass,
    ValidationError,
    WorkloadProfile,
    WorkloadSpec,
    check_classes,
    most_expensive,
    validate_layout,
)

MS_PER_HOUR = 3_600_000.0


@dataclass(frozen=True)
class TimeEstimate:
    per_query: Mapping[str, float]  # ms, I/O + CPU
    stream_ms: tuple[float, ...]
    tasks: int

    @property
    def total_ms(self) -> float:
        return max(self.stream_ms)

    @property
    def total(self) -> float:
        """Workload time in hours."""
        return self.total_ms / MS_PER_HOUR

    @property
    def throughput(self) -> float:
        """Tasks per hour."""
        hours = self.total
        return self.tasks / hours if hours > 0 else math.inf


def io_time_share(
    group: ObjectGroup,
    placement: Placement,
    profile: WorkloadProfile,
    classes: Sequence[StorageClass],
    concurrency: int,
    query_weights: Mapping[str, float] | None = None,
    queries: Sequence[str] | None = None,
) -> float:
    """Accumulated I/O time (ms) of ``group`` when placed at ``placement``.

    Sums count x latency over members and I/O types, using the latency of
    the class each member is assigned to. Queries default to every query in
    the profile; ``query_weights`` scales each query (e.g. by how often it
    runs in the workload).
    """
    placement = tuple(placement)
    if len(placement) != len(group):
        raise ValidationError(f"placement {placement} does not fit group {group.id!r}")
    by_id = {c.id: c for c in classes}
    if queries is None:
        queries = profile.queries
    total = 0.0
    for q in queries:
        w = 1.0 if query_weights is None else query_weights.get(q, 0.0)
        if w == 0:
            continue
        share = 0.0
        for obj, cid in zip(group.members, placement):
            try:
                cls = by_id[cid]
            except KeyError:
                raise ValidationError(f"unknown storage class {cid!r}") from None
            for r in IO_TYPES:
                n = profile.count(q, obj, r, placement)
                if n:
                    share += n * cls.latency(r, concurrency)
        total += w * share
    return total


def estimate_workload_time(
    layout: Layout,
    workload: WorkloadSpec,
    profile: WorkloadProfile,
    classes: Sequence[StorageClass],
    groups: Sequence[ObjectGroup],
) -> TimeEstimate:
    """Per-query time = CPU + I/O; streams run concurrently (max of sums)."""
    level = workload.latency_level
    per_query = {}
    for q in workload.query_ids:
        t = workload.cpu_time[q]
        for g in groups:
            t += io_time_share(g, layout.placement_of(g), profile, classes, level, queries=[q])
        per_query[q] = t
    stream_ms = []
    for s in workload.streams:
        st = 0.0
        for q in s:
            st += per_query[q]
        stream_ms.append(st)
    return TimeEstimate(per_query, tuple(stream_ms), workload.task_count)


def estimate_toc(
    workload: WorkloadSpec,
    layout: Layout,
    profile: WorkloadProfile,
    classes: Sequence[StorageClass],
    objects: Sequence[DataObject],
    groups: Sequence[ObjectGroup],
    cost_config: CostModelConfig = LINEAR,
) -> tuple[float, TimeEstimate]:
    est = estimate_workload_time(layout, workload, profile, classes, groups)
    cost = layout_cost(layout, classes, objects, cost_config, check=False)
    return workload_toc(cost, est.total), est


def resolve_constraints(
    relative_sla: float, baseline: TimeEstimate, metric_mode: MetricMode
) -> PerformanceConstraint:
    """Turn a relative SLA into absolute caps (or a throughput floor)."""
    if not 0 < relative_sla <= 1:
        raise ValidationError("relative SLA must be in (0,1]")
    mode = MetricMode(metric_mode)
    if mode is MetricMode.PER_QUERY:
        caps = {q: t / relative_sla for q, t in baseline.per_query.items()}
        return PerformanceConstraint(relative_sla, mode, caps=caps)
    return PerformanceConstraint(relative_sla, mode, throughput_floor=baseline.throughput * relative_sla)


@dataclass(frozen=True)
class Verdict:
    ok: bool
    violations: tuple[str, ...] = field(default_factory=tuple)

    def __bool__(self):
        return self.ok


def feasible(
    layout: Layout,
    classes: Sequence[StorageClass],
    objects: Sequence[DataObject],
    estimate: TimeEstimate,
    constraints: PerformanceConstraint,
) -> Verdict:
    """Capacity and SLA check with a list of what was violated."""
    problems = []
    cap = validate_layout(layout, classes, objects)
    for cid in cap.violated:
        c = next(c for c in classes if c.id == cid)
        problems.append(f"capacity: class {cid} holds {cap.usage[cid]:g} GB, limit {c.capacity:g} GB")
    if constraints.metric_mode is MetricMode.PER_QUERY:
        for q, t in estimate.per_query.items():
            limit = constraints.caps.get(q)
            if limit is not None and t > limit:
                problems.append(f"sla: query {q} takes {t:g} ms, cap {limit:g} ms")
    elif estimate.throughput < constraints.throughput_floor:
        problems.append(
            f"sla: throughput {estimate.throughput:g} tasks/h below floor "
            f"{constraints.throughput_floor:g}"
        )
    return Verdict(not problems, tuple(problems))


def baseline_layout(objects: Sequence[DataObject], classes: Sequence[StorageClass]) -> Layout:
    """L0: every object on the most expensive class."""
    return Layout.uniform(objects, most_expensive(classes).id)


def performance_penalty(
    group: ObjectGroup,
    placement: Placement,
    profile: WorkloadProfile,
    classes: Sequence[StorageClass],
    concurrency: int,
    query_weights: Mapping[str, float] | None = None,
) -> float:
    """I/O time share at ``placement`` minus the share with the whole group on L0's class."""
    home = (most_expensive(classes).id,) * len(group)
    return io_time_share(group, placement, profile, classes, concurrency, query_weights) - io_time_share(
        group, home, profile, classes, concurrency, query_weights
    )


def cost_saving(
    group: ObjectGroup,
    placement: Placement,
    objects: Sequence[DataObject],
    classes: Sequence[StorageClass],
    cost_config: CostModelConfig = LINEAR,
) -> float:
    """C(L0) - C(L0 with only ``group`` relocated to ``placement``), cents/hour."""
    l0 = baseline_layout(objects, classes)
    before = layout_cost(l0, classes, objects, cost_config, check=False)
    after = layout_cost(l0.moved(group, placement), classes, objects, cost_config, check=False)
    return before - after


def priority_score(time_penalty: float, saving: float) -> float | None:
    """time penalty / cost saving; ``None`` when the move saves nothing."""
    if not saving > 0:
        return None
    return time_penalty / saving


def score_move(
    group: ObjectGroup,
    placement: Placement,
    objects: Sequence[DataObject],
    classes: Sequence[StorageClass],
    profile: WorkloadProfile,
    cost_config: CostModelConfig,
    concurrency: int,
    query_weights: Mapping[str, float] | None = None,
) -> Move:
    penalty = performance_penalty(group, placement, profile, classes, concurrency, query_weights)
    saving = cost_saving(group, placement, objects, classes, cost_config)
    return Move(group.id, tuple(placement), priority_score(penalty, saving), penalty, saving)


@dataclass
class Batch:
    """Estimates for a batch of layouts (one row per layout)."""

    per_query: np.ndarray  # (B, Q) ms
    total_ms: np.ndarray  # (B,)
    usage: np.ndarray  # (B, M) GB
    cost: np.ndarray  # (B,) cents/hour
    tasks: int

    @property
    def hours(self) -> np.ndarray:
        return self.total_ms / MS_PER_HOUR

    @property
    def toc(self) -> np.ndarray:
        return self.cost * self.hours

    @property
    def throughput(self) -> np.ndarray:
        hours = self.hours
        with np.errstate(divide="ignore"):
            return np.where(hours > 0, self.tasks / np.where(hours > 0, hours, 1.0), np.inf)


class Evaluator:
    """Vectorized estimator for one problem instance.

    A layout is encoded as one integer per group: the index of the group's
    placement in ``itertools.product(range(M), repeat=K)`` order. That order
    is lexicographic in class position, so enumerating codes with the last
    group varying fastest enumerates layouts lexicographically.
    """

    def __init__(
        self,
        objects: Sequence[DataObject],
        groups: Sequence[ObjectGroup],
        classes: Sequence[StorageClass],
        workload: WorkloadSpec,
        profile: WorkloadProfile,
        cost_config: CostModelConfig = LINEAR,
    ):
        check_classes(classes)
        self.objects = list(objects)
        self.groups = list(groups)
        self.classes = list(classes)
        self.workload = workload
        self.profile = profile
        self.cost_config = cost_config
        self.M = len(classes)
        self.class_ids = [c.id for c in classes]
        self.queries = workload.query_ids
        qpos = {q: i for i, q in enumerate(self.queries)}
        self.cpu = np.array([workload.cpu_time[q] for q in self.queries], dtype=float)
        self.streams = [np.array([qpos[q] for q in s], dtype=np.intp) for s in workload.streams]
        self.prices = np.array([c.price for c in classes], dtype=float)
        self.capacities = np.array([c.capacity for c in classes], dtype=float)
        if cost_config.variant is CostVariant.DISCRETE and not np.all(np.isfinite(self.capacities)):
            raise ValidationError("discrete cost model needs finite capacities for every class")

        level = workload.latency_level
        # latency[j, r]
        self.latency = np.array(
            [[c.latency(r, level) for r in IO_TYPES] for c in classes], dtype=float
        )
        by_id = {o.id: o for o in objects}
        self.sizes = [np.array([by_id[m].size for m in g.members]) for g in groups]
        self.digits = []
        self.tables = []
        for g in self.groups:
            placements = list(itertools.product(range(self.M), repeat=len(g)))
            self.digits.append(np.array(placements, dtype=np.intp).reshape(len(placements), len(g)))
            self.tables.append(self._group_table(g, placements))
        self.home = self.class_ids.index(most_expensive(classes).id)

    def _group_table(self, group: ObjectGroup, placements) -> np.ndarray:
        table = np.zeros((len(placements), len(self.queries)))
        for pi, p in enumerate(placements):
            pid = tuple(self.class_ids[j] for j in p)
            for qi, q in enumerate(self.queries):
                share = 0.0
                for k, obj in enumerate(group.members):
                    for ri, r in enumerate(IO_TYPES):
                        n = self.profile.count(q, obj, r, pid)
                        if n:
                            share += n * self.latency[p[k], ri]
                table[pi, qi] = share
        return table

    @property
    def layout_count(self) -> int:
        return self.M ** len(self.objects)

    def encode(self, layout: Layout) -> np.ndarray:
        code = []
        for g in self.groups:
            c = 0
            for m in g.members:
                c = c * self.M + self.class_ids.index(layout[m])
            code.append(c)
        return np.array(code, dtype=np.intp)

    def decode(self, code: Sequence[int]) -> Layout:
        assignment = {}
        for g, d, c in zip(self.groups, self.digits, code):
            for m, j in zip(g.members, d[int(c)]):
                assignment[m] = self.class_ids[j]
        return Layout(assignment)

    def evaluate(self, codes: np.ndarray) -> Batch:
        codes = np.atleast_2d(np.asarray(codes, dtype=np.intp))
        B = codes.shape[0]
        per_query = np.broadcast_to(self.cpu, (B, len(self.queries))).copy()
        usage = np.zeros((B, self.M))
        rows = np.arange(B)
        for gi, (table, digits, sizes) in enumerate(zip(self.tables, self.digits, self.sizes)):
            c = codes[:, gi]
            per_query += table[c]
            d = digits[c]
            for k, s in enumerate(sizes):
                usage[rows, d[:, k]] += s
        total = np.zeros(B)
        for stream in self.streams:
            st = np.zeros(B)
            for qi in stream:
                st += per_query[:, qi]
            total = np.maximum(total, st)
        cost = np.zeros(B)
        cfg = self.cost_config
        for j, cls in enumerate(self.classes):
            used = usage[:, j]
            if cfg.variant is CostVariant.LINEAR:
                cost += cls.price * used
            else:
                fixed = cfg.alpha * (cls.price * cls.capacity)
                if not cfg.discrete_counts_empty_classes:
                    fixed = np.where(used > 0, fixed, 0.0)
                cost += fixed + (1.0 - cfg.alpha) * (cls.price * used)
        return Batch(per_query, total, usage, cost, self.workload.task_count)

    def estimate(self, layout: Layout) -> tuple[float, TimeEstimate]:
        b = self.evaluate(self.encode(layout)[None, :])
        return float(b.toc[0]), self.time_estimate(b, 0)

    def time_estimate(self, batch: Batch, row: int) -> TimeEstimate:
        per_query = {q: float(batch.per_query[row, i]) for i, q in enumerate(self.queries)}
        stream_ms = []
        for stream in self.streams:
            st = 0.0
            for qi in stream:
                st += per_query[self.queries[qi]]
            stream_ms.append(st)
        return TimeEstimate(per_query, tuple(stream_ms), self.workload.task_count)

    def feasible_mask(self, batch: Batch, constraints: PerformanceConstraint) -> np.ndarray:
        ok = np.all(batch.usage < self.capacities, axis=1)
        if constraints.metric_mode is MetricMode.PER_QUERY:
            caps = np.array([constraints.caps.get(q, np.inf) for q in self.queries])
            ok &= np.all(batch.per_query <= caps, axis=1)
        else:
            ok &= batch.throughput >= constraints.throughput_floor
        return ok

    def baseline_code(self) -> np.ndarray:
        """Code of L0 (every member of every group on the most expensive class)."""
        code = []
        for g in self.groups:
            c = 0
            for _ in g.members:
                c = c * self.M + self.home
            code.append(c)
        return np.array(code, dtype=np.intp)
