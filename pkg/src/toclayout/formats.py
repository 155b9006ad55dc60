"""File formats: latency fixtures, problem configs, profile CSV and reports.

All formats are versioned through a ``schema`` field (CSV profiles through
their header). Numeric fields carry units in their names.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass
from importlib import resources
from typing import Any, Iterable, Mapping, Sequence

from .domain import (
    IO_TYPES,
    DataObject,
    MetricMode,
    StorageClass,
    StorageConfiguration,
    ValidationError,
    WorkloadProfile,
    WorkloadSpec,
    check_classes,
    check_objects,
)
from .profiling import BenchResult, ingest_profile

LATENCY_SCHEMA = "toclayout.latency/1"
CONFIG_SCHEMA = "toclayout.config/1"
REPORT_SCHEMA = "toclayout.report/1"
PROFILE_HEADER = ["query", "object", "io_type", "placement", "count"]
FIXTURE_ENV = "TOCLAYOUT_LATENCY_FIXTURE"


class FormatError(ValidationError):
    """Malformed input file; the message names the file and location."""


def _num(value, where):
    if value is None:
        return math.inf
    try:
        return float(value)
    except (TypeError, ValueError):
        raise FormatError(f"{where}: expected a number, got {value!r}") from None


# -- latency fixture ---------------------------------------------------------


def fixture_path() -> str:
    override = os.environ.get(FIXTURE_ENV)
    if override:
        return override
    return str(resources.files("toclayout") / "data" / "devices.json")


def load_fixture(path: str | None = None) -> dict:
    path = path or fixture_path()
    try:
        with open(path) as f:
            doc = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise FormatError(f"{path}: cannot read latency fixture: {e}") from None
    if doc.get("schema") != LATENCY_SCHEMA:
        raise FormatError(f"{path}: schema must be {LATENCY_SCHEMA!r}")
    return doc


def class_from_dict(d: Mapping, where: str) -> StorageClass:
    try:
        cid = d["id"]
        latency = d["latency_ms"]
        price = _num(d["price_cents_per_gb_hour"], f"{where}.price_cents_per_gb_hour")
    except KeyError as e:
        raise FormatError(f"{where}: missing field {e.args[0]!r}") from None
    capacity = _num(d.get("capacity_gb"), f"{where}.capacity_gb")
    try:
        profile = {int(level): dict(row) for level, row in latency.items()}
        return StorageClass(str(cid), price, capacity, profile)
    except (ValueError, TypeError, AttributeError) as e:
        raise FormatError(f"{where}: {e}") from None


def class_to_dict(c: StorageClass) -> dict:
    return {
        "id": c.id,
        "price_cents_per_gb_hour": c.price,
        "capacity_gb": None if math.isinf(c.capacity) else c.capacity,
        "latency_ms": {
            str(level): {r.value: row[r] for r in IO_TYPES} for level, row in sorted(c.io_profile.items())
        },
    }


def fixture_classes(path: str | None = None) -> dict[str, StorageClass]:
    path = path or fixture_path()
    doc = load_fixture(path)
    out = {}
    for i, d in enumerate(doc.get("classes", [])):
        c = class_from_dict(d, f"{path}: classes[{i}]")
        out[c.id] = c
    return out


def merge_bench_results(
    fixture: Mapping,
    class_id: str,
    results: Iterable[BenchResult],
    price: float | None = None,
    capacity: float | None = None,
) -> dict:
    """Fold benchmark rows into a latency fixture document.

    Existing latencies for the measured (level, I/O type) pairs are
    replaced. A class not yet in the fixture needs ``price`` and
    ``capacity``; its levels must end up with all four I/O types.
    """
    doc = json.loads(json.dumps(fixture))
    doc.setdefault("schema", LATENCY_SCHEMA)
    classes = doc.setdefault("classes", [])
    entry = next((c for c in classes if c["id"] == class_id), None)
    if entry is None:
        if price is None:
            raise FormatError(f"class {class_id!r} is new to the fixture; a price is required")
        entry = {
            "id": class_id,
            "price_cents_per_gb_hour": price,
            "capacity_gb": capacity,
            "latency_ms": {},
        }
        classes.append(entry)
    for r in results:
        entry["latency_ms"].setdefault(str(r.concurrency), {})[r.io_type.value] = r.per_io
    class_from_dict(entry, f"classes[{class_id}]")
    return doc


def dump_json(doc: Any) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


# -- problem config ----------------------------------------------------------


@dataclass(frozen=True)
class Problem:
    objects: tuple[DataObject, ...]
    workload: WorkloadSpec
    configurations: tuple[StorageConfiguration, ...]
    profile_paths: Mapping[str, str]
    plan_invariant: bool = False

    @property
    def classes(self) -> tuple[StorageClass, ...]:
        return self.configurations[0].classes


def _classes(items, where, fixture):
    out = []
    for i, d in enumerate(items):
        loc = f"{where}[{i}]"
        if not isinstance(d, Mapping) or "id" not in d:
            raise FormatError(f"{loc}: storage class needs an 'id'")
        if d.get("from_fixture"):
            base = fixture().get(d["id"])
            if base is None:
                raise FormatError(f"{loc}: class {d['id']!r} is not in the latency fixture")
            c = base
            if "capacity_gb" in d:
                c = c.with_capacity(_num(d["capacity_gb"], f"{loc}.capacity_gb"))
            if "price_cents_per_gb_hour" in d:
                c = c.with_price(_num(d["price_cents_per_gb_hour"], f"{loc}.price_cents_per_gb_hour"))
        else:
            c = class_from_dict(d, loc)
        out.append(c)
    try:
        check_classes(out)
    except ValidationError as e:
        raise FormatError(f"{where}: {e}") from None
    return tuple(out)


def parse_config(doc: Mapping, path: str = "<config>") -> Problem:
    if doc.get("schema") != CONFIG_SCHEMA:
        raise FormatError(f"{path}: schema must be {CONFIG_SCHEMA!r}")
    base = os.path.dirname(os.path.abspath(path)) if os.path.exists(path) else os.getcwd()
    cache = {}

    def fixture():
        if "classes" not in cache:
            cache["classes"] = fixture_classes(doc.get("latency_fixture") and os.path.join(base, doc["latency_fixture"]))
        return cache["classes"]

    objects = []
    for i, d in enumerate(doc.get("objects") or []):
        loc = f"{path}: objects[{i}]"
        try:
            objects.append(DataObject(str(d["id"]), _num(d["size_gb"], f"{loc}.size_gb"), d.get("kind", "table"), d.get("parent")))
        except KeyError as e:
            raise FormatError(f"{loc}: missing field {e.args[0]!r}") from None
        except ValueError as e:
            raise FormatError(f"{loc}: {e}") from None
    if not objects:
        raise FormatError(f"{path}: objects: at least one data object is required")
    try:
        check_objects(objects)
    except ValidationError as e:
        raise FormatError(f"{path}: objects: {e}") from None

    w = doc.get("workload")
    if not isinstance(w, Mapping):
        raise FormatError(f"{path}: workload: missing section")
    try:
        workload = WorkloadSpec(
            tuple(tuple(str(q) for q in s) for s in w["streams"]),
            {str(k): _num(v, f"{path}: workload.cpu_time_ms.{k}") for k, v in w.get("cpu_time_ms", {}).items()},
            w.get("metric", MetricMode.PER_QUERY.value),
            w.get("io_concurrency"),
        )
    except KeyError as e:
        raise FormatError(f"{path}: workload: missing field {e.args[0]!r}") from None
    except ValueError as e:
        raise FormatError(f"{path}: workload: {e}") from None

    prof = doc.get("profile") or {}
    plan_invariant = bool(prof.get("plan_invariant", False))
    configurations = []
    paths = {}
    if "configurations" in doc:
        for i, cd in enumerate(doc["configurations"]):
            loc = f"{path}: configurations[{i}]"
            if "id" not in cd:
                raise FormatError(f"{loc}: missing field 'id'")
            classes = _classes(cd.get("classes") or [], f"{loc}.classes", fixture)
            if not classes:
                raise FormatError(f"{loc}.classes: at least one storage class is required")
            configurations.append(StorageConfiguration(str(cd["id"]), classes))
            if cd.get("profile"):
                paths[str(cd["id"])] = os.path.join(base, cd["profile"])
        if not configurations:
            raise FormatError(f"{path}: configurations: empty list")
    else:
        classes = _classes(doc.get("classes") or [], f"{path}: classes", fixture)
        if not classes:
            raise FormatError(f"{path}: classes: at least one storage class is required")
        configurations.append(StorageConfiguration("default", classes))
        if prof.get("path"):
            paths["default"] = os.path.join(base, prof["path"])
    return Problem(tuple(objects), workload, tuple(configurations), paths, plan_invariant)


def load_config(path: str) -> Problem:
    try:
        with open(path) as f:
            doc = json.load(f)
    except OSError as e:
        raise FormatError(f"{path}: cannot read config: {e.strerror}") from None
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: line {e.lineno}: invalid JSON: {e.msg}") from None
    return parse_config(doc, path)


def problem_to_dict(problem: Problem) -> dict:
    w = problem.workload
    doc = {
        "schema": CONFIG_SCHEMA,
        "objects": [
            {"id": o.id, "size_gb": o.size, "kind": o.kind.value, "parent": o.parent} for o in problem.objects
        ],
        "workload": {
            "streams": [list(s) for s in w.streams],
            "cpu_time_ms": dict(w.cpu_time),
            "metric": w.metric_mode.value,
            "io_concurrency": w.io_concurrency,
        },
        "profile": {"plan_invariant": problem.plan_invariant},
    }
    if len(problem.configurations) == 1 and problem.configurations[0].id == "default":
        doc["classes"] = [class_to_dict(c) for c in problem.classes]
        if "default" in problem.profile_paths:
            doc["profile"]["path"] = problem.profile_paths["default"]
    else:
        doc["configurations"] = [
            {
                "id": conf.id,
                "classes": [class_to_dict(c) for c in conf.classes],
                **({"profile": problem.profile_paths[conf.id]} if conf.id in problem.profile_paths else {}),
            }
            for conf in problem.configurations
        ]
    return doc


# -- profile CSV -------------------------------------------------------------


def read_profile_records(path: str) -> list[dict]:
    try:
        f = open(path, newline="")
    except OSError as e:
        raise FormatError(f"{path}: cannot read profile: {e.strerror}") from None
    with f:
        reader = csv.DictReader(f)
        if reader.fieldnames != PROFILE_HEADER:
            raise FormatError(f"{path}: line 1: header must be {','.join(PROFILE_HEADER)}")
        records = []
        for row in reader:
            if None in row or any(v is None for v in row.values()):
                raise FormatError(f"{path}: line {reader.line_num}: expected {len(PROFILE_HEADER)} fields")
            placement = row["placement"]
            row["placement"] = "" if placement == "*" else placement
            row["line"] = reader.line_num
            records.append(row)
    return records


def load_profile(
    path: str,
    objects: Sequence[DataObject],
    classes: Sequence[StorageClass],
    plan_invariant: bool = False,
    queries: Iterable[str] | None = None,
) -> WorkloadProfile:
    records = read_profile_records(path)
    try:
        return ingest_profile(records, objects, classes, plan_invariant, queries)
    except ValidationError as e:
        raise FormatError(f"{path}: {e}") from None


def _fmt(x: float) -> str:
    return format(x, ".17g")


def dump_profile(profile: WorkloadProfile) -> str:
    """Canonical CSV: rows sorted by query, object, I/O type, placement; zero counts dropped."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PROFILE_HEADER)
    order = {r: i for i, r in enumerate(IO_TYPES)}
    rows = sorted(
        ((q, o, r, p, n) for (q, o, r, p), n in profile.entries.items() if n),
        key=lambda t: (t[0], t[1], order[t[2]], t[3]),
    )
    for q, o, r, p, n in rows:
        w.writerow([q, o, r.value, "|".join(p) if p else "*", _fmt(n)])
    return buf.getvalue()
