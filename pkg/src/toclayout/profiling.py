"""Workload profiles: baseline plans, ingestion, synthesis, and a storage microbenchmark."""

from __future__ import annotations

import contextlib
import errno
import fcntl
import itertools
import math
import mmap
import os
import random
import threading
import time
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .domain import (
    IO_TYPES,
    DataObject,
    IoType,
    MetricMode,
    ObjectGroup,
    ObjectKind,
    StorageClass,
    ValidationError,
    WorkloadProfile,
    WorkloadSpec,
    grouping,
)


class ProfileError(ValidationError):
    pass


@dataclass(frozen=True)
class BaselinePlan:
    placements: tuple[tuple[str, ...], ...]

    @property
    def count(self) -> int:
        return len(self.placements)


def baseline_plan(classes: Sequence[StorageClass], max_group_size: int) -> BaselinePlan:
    """All M^K placement vectors to profile, lexicographic in class order.

    Placement ``(d_i, d_j, ...)`` stands for the baseline layout that puts
    every table on ``d_i``, every first index on ``d_j`` and so on.
    """
    if max_group_size < 1 or not classes:
        raise ValidationError("baseline plan needs K >= 1 and at least one class")
    ids = [c.id for c in classes]
    return BaselinePlan(tuple(itertools.product(ids, repeat=max_group_size)))


def ingest_profile(
    records: Iterable[Mapping],
    objects: Sequence[DataObject],
    classes: Sequence[StorageClass],
    plan_invariant: bool = False,
    queries: Iterable[str] | None = None,
) -> WorkloadProfile:
    """Validate raw profile records and accumulate them into a profile.

    Each record has ``query``, ``object``, ``io_type``, ``placement`` (the
    placement of the object's whole group, as a sequence or a ``|``-joined
    string) and ``count``; an optional ``line`` is used in error messages.
    Repeated keys are summed.

    With ``plan_invariant`` the records must all come from one uniform
    placement, and their counts are reused for every placement.
    """
    groups = grouping(objects)
    group_of = {m: g for g in groups for m in g.members}
    class_ids = {c.id for c in classes}
    known_queries = None if queries is None else set(queries)
    entries: dict = {}
    source = None
    for i, rec in enumerate(records, 1):
        where = f"line {rec.get('line', i)}"
        try:
            q = str(rec["query"])
            obj = str(rec["object"])
            raw_io = rec["io_type"]
            placement = rec["placement"]
            count = float(rec["count"])
        except KeyError as e:
            raise ProfileError(f"{where}: missing field {e.args[0]!r}") from None
        except (TypeError, ValueError):
            raise ProfileError(f"{where}: count is not a number: {rec.get('count')!r}") from None
        if obj not in group_of:
            raise ProfileError(f"{where}: unknown object {obj!r}")
        if known_queries is not None and q not in known_queries:
            raise ProfileError(f"{where}: unknown query {q!r}")
        try:
            io = raw_io if isinstance(raw_io, IoType) else IoType(str(raw_io).upper())
        except ValueError:
            raise ProfileError(f"{where}: unknown I/O type {raw_io!r}") from None
        if isinstance(placement, str):
            placement = tuple(placement.split("|")) if placement else ()
        placement = tuple(placement)
        for cid in placement:
            if cid not in class_ids:
                raise ProfileError(f"{where}: unknown storage class {cid!r}")
        if not (count >= 0 and math.isfinite(count)):
            raise ProfileError(f"{where}: count must be finite and >= 0, got {count}")
        group = group_of[obj]
        if plan_invariant:
            if len(set(placement)) > 1:
                raise ProfileError(f"{where}: plan-invariant profile needs a uniform placement")
            if placement:
                if source is not None and placement[0] != source:
                    raise ProfileError(f"{where}: plan-invariant profile mixes placements")
                source = placement[0]
            placement = ()
        elif len(placement) != len(group):
            raise ProfileError(
                f"{where}: placement has {len(placement)} entries, group {group.id!r} has {len(group)}"
            )
        key = (q, obj, io, placement)
        entries[key] = entries.get(key, 0.0) + count
    return WorkloadProfile(entries, plan_invariant=plan_invariant)


SCENARIOS = ("seq-scan-only", "plan-switch", "random")


@dataclass(frozen=True)
class SynthSpec:
    """How to generate a synthetic profile.

    ``queries`` lists the query ids; each query touches a seeded random
    subset of groups (at least one) unless ``touch_all`` is set.
    """

    scenario: str
    seed: int = 0
    queries: tuple[str, ...] = ("q1",)
    concurrency: int = 1
    touch_all: bool = False

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValidationError(f"unknown scenario {self.scenario!r}; choose from {SCENARIOS}")
        object.__setattr__(self, "queries", tuple(self.queries))


def _touched(rng, groups, spec):
    if spec.touch_all or len(groups) == 1:
        return list(groups)
    mask = rng.random(len(groups)) < 0.6
    if not mask.any():
        mask[rng.integers(len(groups))] = True
    return [g for g, keep in zip(groups, mask) if keep]


def synthesize_profile(
    objects: Sequence[DataObject],
    groups: Sequence[ObjectGroup],
    classes: Sequence[StorageClass],
    spec: SynthSpec,
) -> WorkloadProfile:
    """Deterministic synthetic profile for desk-scale experiments.

    ``seq-scan-only``
        tables and other objects see sequential reads only; indexes are idle.
    ``plan-switch``
        a table with indexes is read through an index scan (random reads on
        the table and its first index) only when both sit on the class with
        the fastest random reads; any other placement makes the planner fall
        back to a sequential scan of the table.
    ``random``
        mixed counts of all four I/O types, perturbed per placement so that
        plan choice depends on where the group lives.
    """
    rng = np.random.default_rng(spec.seed)
    by_id = {o.id: o for o in objects}
    ids = [c.id for c in classes]
    entries: dict = {}

    if spec.scenario == "seq-scan-only":
        for q in spec.queries:
            for g in _touched(rng, groups, spec):
                for m in g.members:
                    if by_id[m].kind is not ObjectKind.INDEX:
                        pages = by_id[m].size * 131072  # 8 KB pages per GB
                        entries[(q, m, IoType.SR, ())] = float(round(pages * rng.uniform(0.01, 0.1)))
        return WorkloadProfile(entries, plan_invariant=True)

    if spec.scenario == "plan-switch":
        fast = min(classes, key=lambda c: (c.latency(IoType.RR, spec.concurrency), c.id)).id
        for q in spec.queries:
            for g in _touched(rng, groups, spec):
                table = g.members[0]
                scan = float(rng.integers(20_000, 50_000))
                rows = float(rng.integers(100, 400))
                probes = float(rng.integers(50, 200))
                for p in itertools.product(ids, repeat=len(g)):
                    if len(g) > 1 and p[0] == fast and p[1] == fast:
                        entries[(q, table, IoType.RR, p)] = rows
                        entries[(q, g.members[1], IoType.RR, p)] = probes
                    else:
                        entries[(q, table, IoType.SR, p)] = scan
        return WorkloadProfile(entries)

    for q in spec.queries:
        for g in _touched(rng, groups, spec):
            base = {}
            for m in g.members:
                for r in IO_TYPES:
                    if rng.random() < 0.5:
                        hi = 20_000 if r is IoType.SR else 800
                        base[(m, r)] = float(rng.integers(1, hi))
            for p in itertools.product(ids, repeat=len(g)):
                sr_factor, other_factor = rng.uniform(0.5, 1.5, size=2)
                for (m, r), n in base.items():
                    f = sr_factor if r is IoType.SR else other_factor
                    entries[(q, m, r, p)] = float(round(n * f))
    return WorkloadProfile(entries)


@dataclass(frozen=True)
class Instance:
    objects: tuple[DataObject, ...]
    classes: tuple[StorageClass, ...]
    workload: WorkloadSpec
    profile: WorkloadProfile

    @property
    def groups(self) -> list[ObjectGroup]:
        return grouping(self.objects)


# Rough per-I/O latency ranges (ms) for a slow and a fast device.
_SLOW = {IoType.SR: 0.08, IoType.RR: 14.0, IoType.SW: 0.03, IoType.RW: 40.0}
_FAST = {IoType.SR: 0.015, IoType.RR: 0.09, IoType.SW: 0.009, IoType.RW: 0.9}


def random_classes(rng: np.random.Generator, n: int, capacity: float = math.inf) -> list[StorageClass]:
    """Storage classes whose speed loosely tracks price, with noise."""
    prices = np.sort(10 ** rng.uniform(-3.5, -0.7, size=n))
    out = []
    for j, price in enumerate(prices):
        speed = (j + rng.uniform(-0.4, 0.4)) / max(n - 1, 1)
        row = {}
        for r in IO_TYPES:
            lo, hi = math.log(_FAST[r]), math.log(_SLOW[r])
            t = min(max(speed + rng.uniform(-0.25, 0.25), 0.0), 1.0)
            row[r] = round(math.exp(hi + (lo - hi) * t), 6)
        out.append(StorageClass(f"d{j + 1}", float(price), capacity, {1: row}))
    return out


def random_objects(rng: np.random.Generator, n_objects: int, max_group_size: int) -> list[DataObject]:
    objs = []
    t = 0
    while len(objs) < n_objects:
        t += 1
        name = f"t{t}"
        objs.append(DataObject(name, round(float(rng.uniform(0.5, 20.0)), 3), ObjectKind.TABLE))
        room = min(max_group_size - 1, n_objects - len(objs))
        for i in range(int(rng.integers(0, room + 1)) if room > 0 else 0):
            objs.append(
                DataObject(f"{name}_i{i}", round(float(rng.uniform(0.1, 5.0)), 3), ObjectKind.INDEX, name)
            )
    return objs


def random_instance(
    seed: int,
    n_objects: int = 6,
    n_classes: int = 3,
    max_group_size: int = 2,
    n_queries: int = 4,
    scenario: str = "random",
    single_group: bool = False,
) -> Instance:
    """Seeded random problem instance with a single sequential stream."""
    rng = np.random.default_rng(seed)
    classes = random_classes(rng, n_classes)
    if single_group:
        k = max(1, min(n_objects, max_group_size))
        objects = [DataObject("t1", round(float(rng.uniform(0.5, 20.0)), 3))]
        objects += [
            DataObject(f"t1_i{i}", round(float(rng.uniform(0.1, 5.0)), 3), ObjectKind.INDEX, "t1")
            for i in range(k - 1)
        ]
    else:
        objects = random_objects(rng, n_objects, max_group_size)
    queries = tuple(f"q{i + 1}" for i in range(n_queries))
    stream = []
    for q in queries:
        stream += [q] * int(rng.integers(1, 4))
    order = rng.permutation(len(stream))
    stream = tuple(stream[i] for i in order)
    cpu = {q: round(float(rng.uniform(0.0, 20.0)), 3) for q in queries}
    workload = WorkloadSpec((stream,), cpu, MetricMode.PER_QUERY)
    spec = SynthSpec(scenario, seed=int(rng.integers(2**31)), queries=queries)
    profile = synthesize_profile(objects, grouping(objects), classes, spec)
    return Instance(tuple(objects), tuple(classes), workload, profile)


# ---------------------------------------------------------------------------
# Storage microbenchmark


class BenchError(RuntimeError):
    pass


class BenchBusyError(BenchError):
    pass


@dataclass(frozen=True)
class BenchResult:
    io_type: IoType
    concurrency: int
    operations: int
    elapsed: float  # ms; for RW, already net of the random-read component
    worker_ops: tuple[int, ...] = ()
    raw_elapsed: float | None = None
    anomaly: bool = False
    direct: bool = False

    def __post_init__(self):
        if self.operations <= 0:
            raise BenchError("benchmark completed zero operations")

    @property
    def per_io(self) -> float:
        """ms per I/O (per record for writes)."""
        return self.elapsed / self.operations


@contextlib.contextmanager
def _exclusive(target: str):
    path = os.path.join(target, ".toclayout-bench.lock")
    fd = os.open(path, os.O_CREAT | os.O_RDWR, 0o644)
    try:
        try:
            fcntl.flock(fd, fcntl.LOCK_EX | fcntl.LOCK_NB)
        except OSError as e:
            if e.errno in (errno.EAGAIN, errno.EACCES):
                raise BenchBusyError(f"another benchmark is running on {target}") from None
            raise
        yield
    finally:
        os.close(fd)


def _open(path: str, flags: int, direct: bool) -> tuple[int, bool]:
    if direct and hasattr(os, "O_DIRECT"):
        try:
            return os.open(path, flags | os.O_DIRECT, 0o644), True
        except OSError as e:
            if e.errno != errno.EINVAL:
                raise
    return os.open(path, flags, 0o644), False


def _prepare_file(path: str, size: int, block: int) -> None:
    chunk = os.urandom(block) * max(1, (1 << 20) // block)
    with open(path, "wb") as f:
        left = size
        while left > 0:
            n = min(left, len(chunk))
            f.write(chunk[:n])
            left -= n


def bench_storage(
    target: str,
    io_type: IoType | str,
    concurrency: int = 1,
    working_set: int = 8 << 20,
    ops: int = 1000,
    block_size: int = 8192,
    record_size: int = 256,
    direct: bool = False,
    sync: bool = False,
    rr_per_io: float | None = None,
    rw_floor: float = 1e-6,
    seed: int = 0,
) -> BenchResult:
    """Measure effective per-I/O latency on the device holding ``target``.

    ``concurrency`` workers each drive their own file of ``working_set``
    bytes for ``ops`` operations: SR reads blocks in order, RR reads blocks
    at uniform random offsets, SW appends ``record_size`` records, RW does a
    random read-modify-write of one record. The RW time is reported net of
    the random read, using ``rr_per_io`` or a fresh RR run. A negative net
    time is clamped to ``rw_floor`` ms and flagged as an anomaly.
    """
    io = io_type if isinstance(io_type, IoType) else IoType(str(io_type).upper())
    if concurrency < 1 or ops < 1 or block_size < 512 or working_set < block_size:
        raise BenchError("bad benchmark parameters")
    target = os.fspath(target)
    if not os.path.isdir(target) or not os.access(target, os.W_OK):
        raise BenchError(f"target {target!r} is not a writable directory")

    if io is IoType.RW and rr_per_io is None:
        rr_per_io = bench_storage(
            target, IoType.RR, concurrency, working_set, ops, block_size, record_size, direct, sync, seed=seed
        ).per_io

    try:
        with _exclusive(target):
            return _run(target, io, concurrency, working_set, ops, block_size, record_size,
                        direct, sync, rr_per_io, rw_floor, seed)
    except PermissionError as e:
        raise BenchError(f"target {target!r} is not writable: {e}") from None


def _run(target, io, k, working_set, ops, block, record, direct, sync, rr_per_io, rw_floor, seed):
    blocks = working_set // block
    paths = [os.path.join(target, f"toclayout-bench-{i}.dat") for i in range(k)]
    counts = [0] * k
    errors: list[BaseException] = []
    used_direct = [False] * k
    barrier = threading.Barrier(k + 1)

    for p in paths:
        if io is IoType.SW:
            open(p, "wb").close()
        else:
            _prepare_file(p, blocks * block, block)

    def worker(i: int) -> None:
        rnd = random.Random(seed * 1_000_003 + i)
        fd = None
        try:
            flags = os.O_RDWR | (os.O_APPEND if io is IoType.SW else 0)
            fd, used_direct[i] = _open(paths[i], flags, direct and io is not IoType.SW)
            buf = mmap.mmap(-1, block)
            rec = os.urandom(record)
            barrier.wait()
            for n in range(ops):
                if io is IoType.SR:
                    os.preadv(fd, [buf], (n % blocks) * block)
                elif io is IoType.RR:
                    os.preadv(fd, [buf], rnd.randrange(blocks) * block)
                elif io is IoType.SW:
                    os.write(fd, rec)
                    if sync:
                        os.fsync(fd)
                else:
                    off = rnd.randrange(blocks) * block
                    os.preadv(fd, [buf], off)
                    buf[:record] = rec
                    os.pwritev(fd, [buf], off)
                    if sync:
                        os.fsync(fd)
                counts[i] += 1
        except threading.BrokenBarrierError:
            pass
        except BaseException as e:  # surfaced to the caller below
            errors.append(e)
            barrier.abort()
        finally:
            if fd is not None:
                os.close(fd)

    threads = [threading.Thread(target=worker, args=(i,), daemon=True) for i in range(k)]
    for t in threads:
        t.start()
    try:
        barrier.wait()
    except threading.BrokenBarrierError:
        pass
    start = time.perf_counter()
    for t in threads:
        t.join()
    elapsed = (time.perf_counter() - start) * 1000.0
    for p in paths:
        with contextlib.suppress(FileNotFoundError):
            os.remove(p)
    if errors:
        raise BenchError(f"benchmark worker failed: {errors[0]}") from errors[0]

    total = sum(counts)
    if total == 0:
        raise BenchError("benchmark completed zero operations")
    raw = elapsed
    anomaly = False
    if io is IoType.RW:
        net = raw / total - rr_per_io
        if net <= 0:
            net, anomaly = rw_floor, True
        elapsed = net * total
    return BenchResult(io, k, total, elapsed, tuple(counts), raw, anomaly, all(used_direct))
