"""Domain types for storage layout advice, plus object grouping.

Units used throughout the package:

* object sizes and class capacities in GB
* storage prices in cents per GB per hour
* I/O latencies in milliseconds per I/O (per row for writes)
* layout cost in cents per hour, workload cost (TOC) in cents
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence


class ValidationError(ValueError):
    """Raised when domain data is malformed or inconsistent."""


class IoType(str, enum.Enum):
    SR = "SR"  # sequential read
    RR = "RR"  # random read
    SW = "SW"  # sequential write
    RW = "RW"  # random write


IO_TYPES: tuple[IoType, ...] = (IoType.SR, IoType.RR, IoType.SW, IoType.RW)


class ObjectKind(str, enum.Enum):
    TABLE = "table"
    INDEX = "index"
    OTHER = "other"


class MetricMode(str, enum.Enum):
    PER_QUERY = "per_query_response_time"
    THROUGHPUT = "throughput"


@dataclass(frozen=True)
class StorageClass:
    """A purchasable storage tier.

    ``io_profile`` maps a concurrency level to per-I/O-type latencies.
    """

    id: str
    price: float
    capacity: float
    io_profile: Mapping[int, Mapping[IoType, float]]

    def __post_init__(self):
        if not (self.price > 0 and math.isfinite(self.price)):
            raise ValidationError(f"class {self.id!r}: price must be > 0, got {self.price}")
        if not self.capacity > 0:
            raise ValidationError(f"class {self.id!r}: capacity must be > 0, got {self.capacity}")
        if not self.io_profile:
            raise ValidationError(f"class {self.id!r}: empty io profile")
        profile = {}
        for level, row in self.io_profile.items():
            if int(level) != level or level < 1:
                raise ValidationError(f"class {self.id!r}: bad concurrency level {level!r}")
            row = {IoType(k): float(v) for k, v in row.items()}
            missing = [r.value for r in IO_TYPES if r not in row]
            if missing:
                raise ValidationError(
                    f"class {self.id!r}: concurrency {level} lacks latencies for {missing}"
                )
            for r, v in row.items():
                if not (v > 0 and math.isfinite(v)):
                    raise ValidationError(
                        f"class {self.id!r}: latency {r.value}@{level} must be positive and finite"
                    )
            profile[int(level)] = row
        object.__setattr__(self, "io_profile", profile)

    def latency(self, io_type: IoType, concurrency: int) -> float:
        try:
            return self.io_profile[concurrency][io_type]
        except KeyError:
            raise ValidationError(
                f"class {self.id!r} has no {IoType(io_type).value} latency at concurrency "
                f"{concurrency} (declared levels: {sorted(self.io_profile)})"
            ) from None

    def with_price(self, price: float) -> "StorageClass":
        return StorageClass(self.id, price, self.capacity, self.io_profile)

    def with_capacity(self, capacity: float) -> "StorageClass":
        return StorageClass(self.id, self.price, capacity, self.io_profile)


@dataclass(frozen=True)
class DataObject:
    id: str
    size: float
    kind: ObjectKind = ObjectKind.TABLE
    parent: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ObjectKind(self.kind))
        if not (self.size > 0 and math.isfinite(self.size)):
            raise ValidationError(f"object {self.id!r}: size must be > 0, got {self.size}")
        if (self.kind is ObjectKind.INDEX) != (self.parent is not None):
            raise ValidationError(f"object {self.id!r}: parent is required for indexes only")


@dataclass(frozen=True)
class ObjectGroup:
    """A table and its indexes (table first, indexes sorted by id)."""

    members: tuple[str, ...]

    def __post_init__(self):
        if not self.members:
            raise ValidationError("empty object group")
        object.__setattr__(self, "members", tuple(self.members))

    @property
    def id(self) -> str:
        return self.members[0]

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)


# A placement is the vector of class ids assigned to a group's members.
Placement = tuple


@dataclass(frozen=True)
class Layout:
    """Mapping from object id to storage-class id."""

    assignment: Mapping[str, str]

    def __post_init__(self):
        object.__setattr__(self, "assignment", dict(self.assignment))

    def __getitem__(self, object_id: str) -> str:
        return self.assignment[object_id]

    def __eq__(self, other):
        return isinstance(other, Layout) and self.assignment == other.assignment

    def __hash__(self):
        return hash(tuple(sorted(self.assignment.items())))

    @classmethod
    def uniform(cls, objects: Iterable[DataObject], class_id: str) -> "Layout":
        return cls({o.id: class_id for o in objects})

    def placement_of(self, group: ObjectGroup) -> Placement:
        return tuple(self.assignment[o] for o in group.members)

    def moved(self, group: ObjectGroup, placement: Sequence[str]) -> "Layout":
        if len(placement) != len(group):
            raise ValidationError(
                f"placement of length {len(placement)} for group {group.id!r} of size {len(group)}"
            )
        new = dict(self.assignment)
        new.update(zip(group.members, placement))
        return Layout(new)

    def usage(self, objects: Iterable[DataObject], classes: Sequence[StorageClass]) -> dict[str, float]:
        """Per-class space usage S_j in GB (objects summed in the given order)."""
        used = {c.id: 0.0 for c in classes}
        for o in objects:
            try:
                cid = self.assignment[o.id]
            except KeyError:
                raise ValidationError(f"layout does not place object {o.id!r}") from None
            if cid not in used:
                raise ValidationError(f"object {o.id!r} mapped to unknown class {cid!r}")
            used[cid] += o.size
        return used


@dataclass(frozen=True)
class Move:
    group: str
    placement: Placement
    score: float | None
    time_penalty: float
    cost_saving: float


@dataclass(frozen=True)
class WorkloadSpec:
    """Concurrent query streams.

    ``io_concurrency`` selects the latency level used for estimation and
    defaults to the number of streams.
    """

    streams: tuple[tuple[str, ...], ...]
    cpu_time: Mapping[str, float]
    metric_mode: MetricMode = MetricMode.PER_QUERY
    io_concurrency: int | None = None

    def __post_init__(self):
        streams = tuple(tuple(s) for s in self.streams)
        object.__setattr__(self, "streams", streams)
        object.__setattr__(self, "metric_mode", MetricMode(self.metric_mode))
        object.__setattr__(self, "cpu_time", dict(self.cpu_time))
        if not streams or not any(streams):
            raise ValidationError("workload has no queries")
        for q in self.query_ids:
            if q not in self.cpu_time:
                raise ValidationError(f"query {q!r} has no cpu_time entry")
        for q, t in self.cpu_time.items():
            if not (t >= 0 and math.isfinite(t)):
                raise ValidationError(f"query {q!r}: cpu_time must be finite and >= 0")
        if self.io_concurrency is not None and self.io_concurrency < 1:
            raise ValidationError("io_concurrency must be a positive integer")

    @property
    def concurrency(self) -> int:
        return len(self.streams)

    @property
    def latency_level(self) -> int:
        return self.io_concurrency or self.concurrency

    @property
    def query_ids(self) -> list[str]:
        """Distinct query ids in first-appearance order."""
        seen = {}
        for s in self.streams:
            for q in s:
                seen.setdefault(q, None)
        return list(seen)

    @property
    def task_count(self) -> int:
        return sum(len(s) for s in self.streams)

    def multiplicity(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for s in self.streams:
            for q in s:
                counts[q] = counts.get(q, 0) + 1
        return counts


@dataclass(frozen=True)
class PerformanceConstraint:
    relative_sla: float
    metric_mode: MetricMode
    caps: Mapping[str, float] | None = None  # ms per query
    throughput_floor: float | None = None  # tasks per hour

    def __post_init__(self):
        if not 0 < self.relative_sla <= 1:
            raise ValidationError("relative SLA must be in (0,1]")
        if self.caps is not None and any(not v > 0 for v in self.caps.values()):
            raise ValidationError("resolved caps must be strictly positive")
        if self.throughput_floor is not None and not self.throughput_floor > 0:
            raise ValidationError("throughput floor must be strictly positive")


ProfileKey = tuple  # (query id, object id, IoType, placement)


@dataclass(frozen=True)
class WorkloadProfile:
    """I/O counts per (query, object, I/O type, group placement).

    Missing entries read as zero. With ``plan_invariant`` set, counts are
    stored under one placement per group and reused for every placement.
    """

    entries: Mapping[ProfileKey, float] = field(default_factory=dict)
    plan_invariant: bool = False

    def __post_init__(self):
        clean = {}
        for (q, o, r, p), n in self.entries.items():
            n = float(n)
            if not (n >= 0 and math.isfinite(n)):
                raise ValidationError(f"profile count for {(q, o, r, p)} must be finite and >= 0")
            key = (q, o, IoType(r), () if self.plan_invariant else tuple(p))
            clean[key] = clean.get(key, 0.0) + n
        object.__setattr__(self, "entries", clean)

    def count(self, query: str, obj: str, io_type: IoType, placement: Placement) -> float:
        p = () if self.plan_invariant else tuple(placement)
        return self.entries.get((query, obj, io_type, p), 0.0)

    @property
    def queries(self) -> list[str]:
        return sorted({k[0] for k in self.entries})

    def by_object(self) -> dict[str, list[tuple[ProfileKey, float]]]:
        out: dict[str, list] = {}
        for k, v in self.entries.items():
            out.setdefault(k[1], []).append((k, v))
        return out

    def scaled(self, factor: float) -> "WorkloadProfile":
        return WorkloadProfile({k: v * factor for k, v in self.entries.items()}, self.plan_invariant)


@dataclass(frozen=True)
class StorageConfiguration:
    id: str
    classes: tuple[StorageClass, ...]

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        if not self.classes:
            raise ValidationError(f"configuration {self.id!r} has no storage classes")
        check_classes(self.classes)


def check_classes(classes: Sequence[StorageClass]) -> None:
    ids = [c.id for c in classes]
    if len(set(ids)) != len(ids):
        raise ValidationError(f"duplicate storage class ids in {ids}")


def check_objects(objects: Sequence[DataObject]) -> None:
    by_id: dict[str, DataObject] = {}
    for o in objects:
        if o.id in by_id:
            raise ValidationError(f"duplicate object id {o.id!r}")
        by_id[o.id] = o
    for o in objects:
        if o.kind is ObjectKind.INDEX:
            parent = by_id.get(o.parent)
            if parent is None or parent.kind is not ObjectKind.TABLE:
                raise ValidationError(
                    f"index {o.id!r} references missing table {o.parent!r}"
                )


def grouping(objects: Sequence[DataObject]) -> list[ObjectGroup]:
    """Partition objects into groups of one table plus its indexes.

    Objects of kind ``other`` become singleton groups. Groups are ordered by
    their lead object id; indexes inside a group are sorted by id.
    """
    check_objects(objects)
    indexes: dict[str, list[str]] = {}
    for o in objects:
        if o.kind is ObjectKind.INDEX:
            indexes.setdefault(o.parent, []).append(o.id)
    groups = [
        ObjectGroup((o.id, *sorted(indexes.get(o.id, ()))))
        for o in objects
        if o.kind is not ObjectKind.INDEX
    ]
    return sorted(groups, key=lambda g: g.id)


@dataclass(frozen=True)
class CapacityVerdict:
    usage: Mapping[str, float]
    violated: tuple[str, ...]

    @property
    def valid(self) -> bool:
        return not self.violated

    def __bool__(self):
        return self.valid


def validate_layout(
    layout: Layout, classes: Sequence[StorageClass], objects: Sequence[DataObject]
) -> CapacityVerdict:
    """Check the strict capacity constraint S_j < c_j for every class."""
    usage = layout.usage(objects, classes)
    violated = tuple(c.id for c in classes if not usage[c.id] < c.capacity)
    return CapacityVerdict(usage, violated)


def most_expensive(classes: Sequence[StorageClass]) -> StorageClass:
    """Highest price per GB-hour; ties go to the smallest class id."""
    if not classes:
        raise ValidationError("no storage classes")
    return min(classes, key=lambda c: (-c.price, c.id))


def canonical_objects(objects: Sequence[DataObject], groups: Sequence[ObjectGroup]) -> list[DataObject]:
    by_id = {o.id: o for o in objects}
    return [by_id[m] for g in groups for m in g.members]
