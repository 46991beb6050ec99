"""One entry point for every allocation policy.

Strategy identifiers are stable strings usable in configs and on the
command line: ``zebra-additive``, ``zebra-mult-offset``,
``zebra-prop-offset``, ``uniform``, ``fixed-ratio`` and ``external``.
The ``zebra-*`` policies solve the water-filling problem for the matching
objective; the others split the budget without looking at the curves.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .curves import PhaseCurve
from .errors import ValidationError
from .estimator import ExternalAllocationDocument, external_allocation
from .objectives import Objective, ObjectiveKind, evaluate
from .solver import Allocation, SolveConfig, solve

__all__ = [
    "StrategyKind",
    "StrategySpec",
    "UNIFORM_4",
    "FIXED_AVERAGE_4",
    "allocate",
    "budget_from_alpha",
    "objective_for",
    "parse_strategy",
    "strategy_kind",
]

UNIFORM_4 = (0.25, 0.25, 0.25, 0.25)
# mean per-phase share of zebra-additive over the 150-task benchmark at alpha = 0.5
# (plan / decompose / implement / refine)
FIXED_AVERAGE_4 = (0.113, 0.140, 0.241, 0.506)


class StrategyKind(str, enum.Enum):
    ZEBRA_ADDITIVE = "zebra-additive"
    ZEBRA_MULT_OFFSET = "zebra-mult-offset"
    ZEBRA_PROP_OFFSET = "zebra-prop-offset"
    UNIFORM = "uniform"
    FIXED_RATIO = "fixed-ratio"
    EXTERNAL = "external"

    @property
    def solves(self) -> bool:
        return self.value.startswith("zebra-")


_OBJECTIVE_OF = {
    StrategyKind.ZEBRA_ADDITIVE: ObjectiveKind.ADDITIVE,
    StrategyKind.ZEBRA_MULT_OFFSET: ObjectiveKind.MULT_OFFSET,
    StrategyKind.ZEBRA_PROP_OFFSET: ObjectiveKind.PROP_OFFSET,
}


@dataclass(frozen=True)
class StrategySpec:
    kind: StrategyKind
    ratio: Optional[tuple[float, ...]] = None
    external: Optional[ExternalAllocationDocument] = None
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "kind", StrategyKind(self.kind))
        if self.kind is StrategyKind.FIXED_RATIO:
            if self.ratio is None:
                raise ValidationError("fixed-ratio needs a ratio", field="ratio")
            ratio = tuple(float(r) for r in self.ratio)
            if any(r < 0 for r in ratio) or abs(math.fsum(ratio) - 1.0) > 1e-9:
                raise ValidationError(
                    f"ratio must be non-negative and sum to 1, got {ratio}", field="ratio"
                )
            object.__setattr__(self, "ratio", ratio)
        if self.kind is StrategyKind.EXTERNAL and self.external is None:
            raise ValidationError("external strategy needs an allocation document", field="external")
        if not self.name:
            object.__setattr__(self, "name", self.kind.value)

    @classmethod
    def uniform(cls) -> "StrategySpec":
        return cls(StrategyKind.UNIFORM)

    @classmethod
    def fixed_ratio(cls, ratio: Sequence[float], name: str = "") -> "StrategySpec":
        return cls(StrategyKind.FIXED_RATIO, ratio=tuple(ratio), name=name)


def strategy_kind(name: str) -> StrategyKind:
    try:
        return StrategyKind(name)
    except ValueError:
        known = ", ".join(k.value for k in StrategyKind)
        raise ValidationError(
            f"unknown strategy {name!r}; expected one of {known}", field="strategy"
        ) from None


def parse_strategy(name: str) -> StrategySpec:
    """Build a spec from its identifier; ``fixed-ratio`` defaults to the average preset."""
    kind = strategy_kind(name)
    if kind is StrategyKind.FIXED_RATIO:
        return StrategySpec.fixed_ratio(FIXED_AVERAGE_4)
    return StrategySpec(kind)


def objective_for(kind: StrategyKind, curves: Sequence[PhaseCurve]) -> Objective:
    """Objective a ``zebra-*`` strategy optimizes; prop-offset weights are the ceilings."""
    kind = StrategyKind(kind)
    if not kind.solves:
        raise ValidationError(f"{kind.value} does not optimize an objective", field="strategy")
    objective_kind = _OBJECTIVE_OF[kind]
    if objective_kind is ObjectiveKind.PROP_OFFSET:
        return Objective.ceiling_weighted(curves)
    return Objective(objective_kind)


def budget_from_alpha(alpha: float, reference_cost: float) -> float:
    """Budget as a fraction ``alpha`` of the unconstrained mean cost."""
    if not 0 < alpha <= 1:
        raise ValidationError(f"alpha must lie in (0, 1], got {alpha!r}", field="alpha")
    if not reference_cost > 0:
        raise ValidationError(
            f"reference_cost must be > 0, got {reference_cost!r}", field="reference_cost"
        )
    return alpha * reference_cost


def allocate(
    spec: StrategySpec,
    curves: Optional[Sequence[PhaseCurve]],
    budget_B: float,
    solve_config: Optional[SolveConfig] = None,
    evaluation: Optional[Objective] = None,
    n_phases: Optional[int] = None,
) -> Allocation:
    """Produce an allocation of ``budget_B`` under ``spec``.

    ``evaluation`` is the objective used to fill ``objective_value``; it
    defaults to the strategy's own objective for ``zebra-*`` kinds and to
    the additive objective otherwise.  Without curves, non-solving
    strategies still work when ``n_phases`` is given, but the returned
    value is left unset.  ``solve_config`` supplies tolerance and caps; its
    budget is replaced by ``budget_B``.
    """
    if not budget_B > 0:
        raise ValidationError(f"budget_B must be > 0, got {budget_B!r}", field="budget_B")
    if curves is not None and len(curves) == 0:
        raise ValidationError("at least one phase is required", field="curves")
    n = len(curves) if curves is not None else n_phases
    labels = tuple(c.label for c in curves) if curves is not None else ()
    if not any(labels):
        labels = ()

    if spec.kind.solves:
        if curves is None:
            raise ValidationError(f"{spec.kind.value} needs curves", field="curves")
        objective = objective_for(spec.kind, curves)
        if solve_config is None:
            config = SolveConfig(budget_B)
        else:
            config = replace(solve_config, budget_B=budget_B)
        result = solve(curves, objective, config)
        evaluation = evaluation or objective
    else:
        if n is None and spec.kind is not StrategyKind.EXTERNAL:
            raise ValidationError("phase count unknown: pass curves or n_phases", field="curves")
        if spec.kind is StrategyKind.UNIFORM:
            x = np.full(n, budget_B / n)
        elif spec.kind is StrategyKind.FIXED_RATIO:
            if len(spec.ratio) != n:
                raise ValidationError(
                    f"ratio has {len(spec.ratio)} entries for {n} phases", field="ratio"
                )
            x = np.asarray(spec.ratio) * budget_B
        else:
            x = _external_amounts(spec.external, budget_B, labels, n)
        result = Allocation(x, labels=labels)
        evaluation = evaluation or Objective.additive()

    if curves is None:
        return result
    return replace(result, objective_value=evaluate(curves, result.amounts, evaluation))


def _external_amounts(document, budget_B, labels, n):
    alloc = external_allocation(document, budget_B)
    if labels:
        by_label = dict(zip(alloc.labels, alloc.amounts))
        missing = [label for label in labels if label not in by_label]
        if missing:
            raise ValidationError(f"external allocation lacks phases {missing}", field="external")
        extra = set(by_label) - set(labels)
        if extra:
            raise ValidationError(f"external allocation has unknown phases {sorted(extra)}", field="external")
        return np.array([by_label[label] for label in labels])
    if n is not None and len(alloc.amounts) != n:
        raise ValidationError(
            f"external allocation has {len(alloc.amounts)} phases, expected {n}", field="external"
        )
    return np.array(alloc.amounts)
