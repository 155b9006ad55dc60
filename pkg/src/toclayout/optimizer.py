"""Layout search: greedy DOT pass, exhaustive oracle and configuration choice."""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .cost import LINEAR, CostModelConfig
from .domain import (
    DataObject,
    Layout,
    Move,
    ObjectGroup,
    StorageClass,
    StorageConfiguration,
    ValidationError,
    WorkloadProfile,
    WorkloadSpec,
    check_objects,
    grouping,
)
from .estimator import (
    Evaluator,
    TimeEstimate,
    Verdict,
    feasible,
    resolve_constraints,
    score_move,
)

DEFAULT_ES_BUDGET = 1_000_000
ES_CHUNK = 1 << 16


class SearchBudgetExceeded(RuntimeError):
    """Exhaustive search refused: too many layouts."""

    def __init__(self, layouts: int, budget: int):
        super().__init__(
            f"exhaustive search would examine {layouts:,} layouts, over the budget of {budget:,}"
        )
        self.layouts = layouts
        self.budget = budget


class Status(str, enum.Enum):
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class TraceEntry:
    move: Move
    accepted: bool
    toc: float


@dataclass(frozen=True)
class OptimizationResult:
    status: Status
    layout: Layout | None
    toc: float
    estimate: TimeEstimate | None
    layouts_examined: int
    constraints: object = None
    trace: tuple[TraceEntry, ...] = field(default_factory=tuple)

    @property
    def feasible(self) -> bool:
        return self.status is Status.FEASIBLE


def enumerate_moves(
    objects: Sequence[DataObject],
    groups: Sequence[ObjectGroup],
    classes: Sequence[StorageClass],
    profile: WorkloadProfile,
    cost_config: CostModelConfig = LINEAR,
    concurrency: int = 1,
    query_weights: Mapping[str, float] | None = None,
    keep_unscored: bool = False,
) -> list[Move]:
    """Score every placement of every group and sort ascending by score.

    Moves that save no cost relative to L0 get no score and are dropped
    (unless ``keep_unscored``, which is only useful for counting). Ties go to
    the larger saving, then group order, then placement order.
    """
    class_pos = {c.id: i for i, c in enumerate(classes)}
    group_pos = {g.id: i for i, g in enumerate(groups)}
    moves = []
    for g in groups:
        for p in itertools.product([c.id for c in classes], repeat=len(g)):
            m = score_move(g, p, objects, classes, profile, cost_config, concurrency, query_weights)
            if m.score is not None or keep_unscored:
                moves.append(m)
    if keep_unscored:
        return moves
    return sorted(
        moves,
        key=lambda m: (
            m.score,
            -m.cost_saving,
            group_pos[m.group],
            tuple(class_pos[c] for c in m.placement),
        ),
    )


def _prepare(objects, classes, workload, profile, cost_config, groups=None):
    if not classes:
        raise ValidationError("at least one storage class is required")
    if not objects:
        raise ValidationError("at least one data object is required")
    check_objects(objects)
    groups = grouping(objects) if groups is None else list(groups)
    ev = Evaluator(objects, groups, classes, workload, profile, cost_config)
    base = ev.evaluate(ev.baseline_code()[None, :])
    return groups, ev, base


def _constraints(relative_sla, ev, base):
    return resolve_constraints(relative_sla, ev.time_estimate(base, 0), ev.workload.metric_mode)


def dot_optimize(
    objects: Sequence[DataObject],
    classes: Sequence[StorageClass],
    workload: WorkloadSpec,
    profile: WorkloadProfile,
    relative_sla: float,
    cost_config: CostModelConfig = LINEAR,
    trace: bool = False,
) -> OptimizationResult:
    """Greedy layout search.

    Starts from L0 (everything on the most expensive class), applies the
    sorted moves one at a time to the evolving layout, keeps each move whose
    result is feasible, and returns the cheapest feasible layout seen.
    """
    groups, ev, base = _prepare(objects, classes, workload, profile, cost_config)
    constraints = _constraints(relative_sla, ev, base)
    weights = workload.multiplicity()
    moves = enumerate_moves(
        objects, groups, classes, profile, cost_config, workload.latency_level, weights
    )
    group_pos = {g.id: i for i, g in enumerate(groups)}

    code = ev.baseline_code()
    best_code, best_toc, best_row = None, math.inf, None
    if ev.feasible_mask(base, constraints)[0]:
        best_code, best_toc, best_row = code.copy(), float(base.toc[0]), base
    log = []
    for m in moves:
        cand = code.copy()
        gi = group_pos[m.group]
        c = 0
        for cid in m.placement:
            c = c * ev.M + ev.class_ids.index(cid)
        cand[gi] = c
        b = ev.evaluate(cand[None, :])
        toc = float(b.toc[0])
        ok = bool(ev.feasible_mask(b, constraints)[0])
        if ok:
            code = cand
            if toc < best_toc:
                best_code, best_toc, best_row = cand, toc, b
        if trace:
            log.append(TraceEntry(m, ok, toc))

    examined = len(moves) + 1
    if best_code is None:
        return OptimizationResult(Status.INFEASIBLE, None, math.inf, None, examined, constraints, tuple(log))
    return OptimizationResult(
        Status.FEASIBLE,
        ev.decode(best_code),
        best_toc,
        ev.time_estimate(best_row, 0),
        examined,
        constraints,
        tuple(log),
    )


def _all_codes(ev: Evaluator):
    """Yield chunks of layout codes in lexicographic layout order."""
    sizes = [len(d) for d in ev.digits]
    total = math.prod(sizes)
    for start in range(0, total, ES_CHUNK):
        flat = np.arange(start, min(start + ES_CHUNK, total), dtype=np.int64)
        yield np.stack(np.unravel_index(flat, sizes), axis=1).astype(np.intp)


def exhaustive_search(
    objects: Sequence[DataObject],
    classes: Sequence[StorageClass],
    workload: WorkloadSpec,
    profile: WorkloadProfile,
    relative_sla: float,
    cost_config: CostModelConfig = LINEAR,
    budget: int = DEFAULT_ES_BUDGET,
) -> OptimizationResult:
    """Evaluate all M^N layouts with the same estimator and return the best feasible one.

    Ties on TOC go to the lexicographically first layout (objects in group
    order, classes in declared order).
    """
    if not classes:
        raise ValidationError("at least one storage class is required")
    count = len(classes) ** len(objects)
    if count > budget:
        raise SearchBudgetExceeded(count, budget)
    groups, ev, base = _prepare(objects, classes, workload, profile, cost_config)
    constraints = _constraints(relative_sla, ev, base)

    best_code, best_toc, best_row = None, math.inf, None
    for codes in _all_codes(ev):
        b = ev.evaluate(codes)
        toc = np.where(ev.feasible_mask(b, constraints), b.toc, np.inf)
        i = int(np.argmin(toc))
        if toc[i] < best_toc:
            best_toc = float(toc[i])
            best_code = codes[i]
            best_row = ev.evaluate(best_code[None, :])
    if best_code is None:
        return OptimizationResult(Status.INFEASIBLE, None, math.inf, None, count, constraints)
    return OptimizationResult(
        Status.FEASIBLE, ev.decode(best_code), best_toc, ev.time_estimate(best_row, 0), count, constraints
    )


def es_sweep(
    objects: Sequence[DataObject],
    classes: Sequence[StorageClass],
    workload: WorkloadSpec,
    profile: WorkloadProfile,
    relative_slas: Sequence[float],
    cost_config: CostModelConfig = LINEAR,
    budget: int = DEFAULT_ES_BUDGET,
) -> list[OptimizationResult]:
    """``exhaustive_search`` at several SLA levels, sharing one evaluation pass."""
    count = len(classes) ** len(objects)
    if count > budget:
        raise SearchBudgetExceeded(count, budget)
    groups, ev, base = _prepare(objects, classes, workload, profile, cost_config)
    all_cons = [_constraints(s, ev, base) for s in relative_slas]
    best = [(None, math.inf) for _ in relative_slas]
    for codes in _all_codes(ev):
        b = ev.evaluate(codes)
        for k, cons in enumerate(all_cons):
            toc = np.where(ev.feasible_mask(b, cons), b.toc, np.inf)
            i = int(np.argmin(toc))
            if toc[i] < best[k][1]:
                best[k] = (codes[i], float(toc[i]))
    out = []
    for (code, toc), cons in zip(best, all_cons):
        if code is None:
            out.append(OptimizationResult(Status.INFEASIBLE, None, math.inf, None, count, cons))
        else:
            row = ev.evaluate(code[None, :])
            out.append(
                OptimizationResult(Status.FEASIBLE, ev.decode(code), toc, ev.time_estimate(row, 0), count, cons)
            )
    return out


def provision_configurations(
    configurations: Sequence[StorageConfiguration],
    objects: Sequence[DataObject],
    workload: WorkloadSpec,
    profiles: Mapping[str, WorkloadProfile],
    relative_sla: float,
    cost_config: CostModelConfig = LINEAR,
) -> tuple[str | None, OptimizationResult]:
    """Run DOT on each configuration and pick the cheapest feasible one.

    Ties keep the earlier configuration. Returns ``(None, result)`` with an
    infeasible result when no configuration admits a layout.
    """
    if not configurations:
        raise ValidationError("no storage configurations given")
    chosen, chosen_result, last = None, None, None
    for conf in configurations:
        try:
            profile = profiles[conf.id]
        except KeyError:
            raise ValidationError(f"no workload profile for configuration {conf.id!r}") from None
        res = dot_optimize(objects, conf.classes, workload, profile, relative_sla, cost_config)
        last = res
        if res.feasible and (chosen_result is None or res.toc < chosen_result.toc):
            chosen, chosen_result = conf.id, res
    if chosen_result is None:
        return None, last
    return chosen, chosen_result


def validate_recommendation(
    layout: Layout,
    classes: Sequence[StorageClass],
    objects: Sequence[DataObject],
    measured: TimeEstimate,
    constraints,
) -> Verdict:
    """Check a recommended layout against times measured in a test run."""
    return feasible(layout, classes, objects, measured, constraints)


def refine(
    objects: Sequence[DataObject],
    classes: Sequence[StorageClass],
    workload: WorkloadSpec,
    measured_profile: WorkloadProfile,
    relative_sla: float,
    cost_config: CostModelConfig = LINEAR,
) -> OptimizationResult:
    """Re-run the search with I/O counts observed in a test run."""
    return dot_optimize(objects, classes, workload, measured_profile, relative_sla, cost_config)
