"""Cost-aware placement of database objects on heterogeneous storage."""

__version__ = "0.1.0"

from .cost import CostModelConfig, CostVariant, layout_cost, workload_toc
from .domain import (
    DataObject,
    IoType,
    Layout,
    MetricMode,
    ObjectGroup,
    ObjectKind,
    PerformanceConstraint,
    StorageClass,
    StorageConfiguration,
    ValidationError,
    WorkloadProfile,
    WorkloadSpec,
    grouping,
    validate_layout,
)
from .estimator import (
    TimeEstimate,
    cost_saving,
    estimate_toc,
    estimate_workload_time,
    feasible,
    io_time_share,
    performance_penalty,
    priority_score,
    resolve_constraints,
)
from .optimizer import (
    OptimizationResult,
    SearchBudgetExceeded,
    dot_optimize,
    enumerate_moves,
    exhaustive_search,
    provision_configurations,
)
from .profiling import baseline_plan, bench_storage, ingest_profile, synthesize_profile

__all__ = [
    "CostModelConfig",
    "CostVariant",
    "DataObject",
    "IoType",
    "Layout",
    "MetricMode",
    "ObjectGroup",
    "ObjectKind",
    "OptimizationResult",
    "PerformanceConstraint",
    "SearchBudgetExceeded",
    "StorageClass",
    "StorageConfiguration",
    "TimeEstimate",
    "ValidationError",
    "WorkloadProfile",
    "WorkloadSpec",
    "__version__",
    "baseline_plan",
    "bench_storage",
    "cost_saving",
    "dot_optimize",
    "enumerate_moves",
    "estimate_toc",
    "estimate_workload_time",
    "exhaustive_search",
    "feasible",
    "grouping",
    "ingest_profile",
    "io_time_share",
    "layout_cost",
    "performance_penalty",
    "priority_score",
    "provision_configurations",
    "resolve_constraints",
    "synthesize_profile",
    "validate_layout",
    "workload_toc",
]
