"""Layout cost (linear and discrete-sized) and workload TOC."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

from .domain import DataObject, Layout, StorageClass, ValidationError


class CostVariant(str, enum.Enum):
    LINEAR = "linear"
    DISCRETE = "discrete"


@dataclass(frozen=True)
class CostModelConfig:
    variant: CostVariant = CostVariant.LINEAR
    alpha: float | None = None
    discrete_counts_empty_classes: bool = False

    def __post_init__(self):
        object.__setattr__(self, "variant", CostVariant(self.variant))
        if self.variant is CostVariant.DISCRETE:
            if self.alpha is None:
                raise ValidationError("discrete cost model requires alpha")
            if not 0.0 <= self.alpha <= 1.0:
                raise ValidationError(f"alpha must be in [0,1], got {self.alpha}")
        elif self.alpha is not None:
            raise ValidationError("alpha only applies to the discrete cost model")

    @classmethod
    def discrete(cls, alpha: float, count_empty: bool = False) -> "CostModelConfig":
        return cls(CostVariant.DISCRETE, alpha, count_empty)


LINEAR = CostModelConfig()


def class_cost(cls: StorageClass, used: float, config: CostModelConfig) -> float:
    """Hourly cost contributed by one class holding ``used`` GB."""
    if config.variant is CostVariant.LINEAR:
        return cls.price * used
    # alpha*p*c + (1-alpha)*(S/c)*(p*c), with the second term reduced to p*S so
    # that alpha = 0 reproduces the linear model exactly.
    fixed = 0.0
    if used > 0 or config.discrete_counts_empty_classes:
        if not math.isfinite(cls.capacity):
            raise ValidationError(f"discrete cost model needs a finite capacity for {cls.id!r}")
        fixed = config.alpha * (cls.price * cls.capacity)
    return fixed + (1.0 - config.alpha) * (cls.price * used)


def layout_cost(
    layout: Layout,
    classes: Sequence[StorageClass],
    objects: Sequence[DataObject],
    config: CostModelConfig = LINEAR,
    check: bool = True,
) -> float:
    """Cost of holding ``layout`` for one hour, in cents.

    With ``check`` set, the discrete model refuses classes filled past their
    capacity. The optimizers pass ``check=False`` because they also price
    over-capacity candidates before rejecting them.
    """
    usage = layout.usage(objects, classes)
    total = 0.0
    for c in classes:
        used = usage[c.id]
        if check and config.variant is CostVariant.DISCRETE and used > c.capacity:
            raise ValidationError(
                f"class {c.id!r} holds {used} GB over its {c.capacity} GB unit"
            )
        total += class_cost(c, used, config)
    return total


def workload_toc(layout_cost_per_hour: float, workload_hours: float) -> float:
    """C(L,W) = C(L) * t(L,W), in cents per workload execution."""
    for name, v in (("layout cost", layout_cost_per_hour), ("workload time", workload_hours)):
        if not (v >= 0 and math.isfinite(v)):
            raise ValidationError(f"{name} must be finite and >= 0, got {v}")
    return layout_cost_per_hour * workload_hours
