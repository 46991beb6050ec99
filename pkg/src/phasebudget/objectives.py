"""Pipeline-level objectives and their closed-form per-phase responses.

Three ways of aggregating per-phase curves are supported:

``ADDITIVE``
    ``sum_i f_i(x_i)``; a phase is starved once the price ``lam`` reaches
    its marginal at zero, ``a b``.
``MULT_OFFSET``
    ``prod_i g_i(x_i)`` with ``g = 1 - a exp(-b x)``; solved as
    ``sum_i log g_i(x_i)``, starving a phase once ``lam`` reaches its
    log-marginal at zero ``a b / (1 - a)``.
``PROP_OFFSET``
    ``prod_i g_i(x_i) ** w_i``; the weighted log-sum, threshold
    ``a w b / (1 - a)``.

Given a dual price ``lam`` every objective has a closed-form response
``x_i(lam)``. Internally responses are computed from ``log(lam)`` so the
solver can search prices spanning hundreds of orders of magnitude.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .curves import PhaseCurve
from .errors import DomainError, ValidationError

__all__ = [
    "ObjectiveKind",
    "Objective",
    "phase_response",
    "starvation_threshold",
    "marginal",
    "evaluate",
    "evaluate_log",
    "curve_arrays",
]


class ObjectiveKind(str, enum.Enum):
    ADDITIVE = "additive"
    MULT_OFFSET = "mult-offset"
    PROP_OFFSET = "prop-offset"


@dataclass(frozen=True)
class Objective:
    """An aggregation law plus, for ``PROP_OFFSET``, its per-phase weights."""

    kind: ObjectiveKind
    weights: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ObjectiveKind(self.kind))
        if self.weights is not None:
            weights = tuple(float(w) for w in self.weights)
            object.__setattr__(self, "weights", weights)
            if self.kind is ObjectiveKind.ADDITIVE:
                raise ValidationError("the additive objective takes no weights", field="weights")
            if not all(w > 0 and math.isfinite(w) for w in weights):
                raise ValidationError("weights must be finite and > 0", field="weights")
        elif self.kind is ObjectiveKind.PROP_OFFSET:
            raise ValidationError("prop-offset requires per-phase weights", field="weights")

    @classmethod
    def additive(cls) -> "Objective":
        return cls(ObjectiveKind.ADDITIVE)

    @classmethod
    def mult_offset(cls) -> "Objective":
        return cls(ObjectiveKind.MULT_OFFSET)

    @classmethod
    def prop_offset(cls, weights: Sequence[float]) -> "Objective":
        return cls(ObjectiveKind.PROP_OFFSET, tuple(weights))

    @classmethod
    def ceiling_weighted(cls, curves: Sequence[PhaseCurve]) -> "Objective":
        """Prop-offset with each weight set to the phase's own ceiling."""
        return cls.prop_offset([c.ceiling_a for c in curves])

    @property
    def is_product(self) -> bool:
        return self.kind is not ObjectiveKind.ADDITIVE

    def weight_vector(self, n: int) -> np.ndarray:
        if self.weights is None:
            return np.ones(n)
        if len(self.weights) != n:
            raise ValidationError(
                f"objective has {len(self.weights)} weights for {n} phases", field="weights"
            )
        return np.asarray(self.weights, dtype=float)


def curve_arrays(curves: Sequence[PhaseCurve]) -> tuple[np.ndarray, np.ndarray]:
    a = np.fromiter((c.ceiling_a for c in curves), dtype=float, count=len(curves))
    b = np.fromiter((c.rate_b for c in curves), dtype=float, count=len(curves))
    return a, b


def _log_thresholds(kind, a, b, w):
    """log of the starvation price of each phase (+inf where never starved)."""
    if kind is ObjectiveKind.ADDITIVE:
        return np.log(a * b)
    with np.errstate(divide="ignore"):
        return np.log(a * w * b) - np.log1p(-a)


class _ResponseTable:
    """Closed-form responses with the per-phase logs precomputed.

    Calling the table with ``log_lam`` returns the vector of responses at
    price ``exp(log_lam)``; the dual search calls it dozens of times per solve.
    """

    __slots__ = ("additive", "b", "log_num", "log_a", "log_wb", "log_thr", "caps")

    def __init__(self, kind, a, b, w, caps=None):
        self.additive = kind is ObjectiveKind.ADDITIVE
        self.b = b
        self.log_a = np.log(a)
        self.log_wb = np.log(w * b)
        self.log_num = np.log(a * b) if self.additive else None
        self.log_thr = _log_thresholds(kind, a, b, w)
        self.caps = caps

    def __call__(self, log_lam):
        if self.additive:
            x = (self.log_num - log_lam) / self.b
        else:
            # log(a (w b + lam) / lam) with lam = exp(log_lam), overflow-safe
            x = (self.log_a + np.logaddexp(self.log_wb, log_lam) - log_lam) / self.b
        x = np.where(log_lam >= self.log_thr, 0.0, np.maximum(x, 0.0))
        if self.caps is not None:
            x = np.minimum(x, self.caps)
        return x


def _responses(kind, a, b, w, log_lam, caps=None):
    """Vectorized closed-form responses at price ``exp(log_lam)``."""
    return _ResponseTable(kind, a, b, w, caps)(log_lam)


def _marginals(kind, a, b, w, x):
    """Objective marginal at ``x``: f' for additive, w g'/g for the products."""
    decay = a * np.exp(-b * x)
    if kind is ObjectiveKind.ADDITIVE:
        return b * decay
    with np.errstate(divide="ignore"):
        return w * b * decay / (1.0 - decay)


def _weight_for(objective: Objective, weight: float) -> float:
    if not weight > 0:
        raise ValidationError(f"weight must be > 0, got {weight!r}", field="weight")
    if objective.kind is not ObjectiveKind.PROP_OFFSET and weight != 1.0:
        raise ValidationError(
            f"weight is fixed at 1 for {objective.kind.value}, got {weight!r}", field="weight"
        )
    return float(weight)


def phase_response(
    curve: PhaseCurve,
    lam: float,
    objective: Objective,
    weight: float = 1.0,
    cap: Optional[float] = None,
) -> float:
    """Budget a phase would take at dual price ``lam``.

    The result is clamped to ``[0, cap]``; it is exactly 0 whenever ``lam``
    is at or above the phase's :func:`starvation_threshold`.
    """
    if not lam > 0:
        raise DomainError(f"dual price must be > 0, got {lam!r}")
    w = _weight_for(objective, weight)
    if lam >= starvation_threshold(curve, objective, w):
        return 0.0
    x = _responses(
        objective.kind,
        np.array([curve.ceiling_a]),
        np.array([curve.rate_b]),
        np.array([w]),
        math.log(lam),
        None if cap is None else np.array([cap], dtype=float),
    )
    return float(x[0])


def starvation_threshold(curve: PhaseCurve, objective: Objective, weight: float = 1.0) -> float:
    """Smallest price at which the phase receives nothing (``inf`` if never)."""
    w = _weight_for(objective, weight)
    a, b = curve.ceiling_a, curve.rate_b
    if objective.kind is ObjectiveKind.ADDITIVE:
        return a * b
    if a == 1.0:
        return math.inf
    return a * w * b / (1.0 - a)


def marginal(curve: PhaseCurve, x: float, objective: Objective, weight: float = 1.0) -> float:
    """Marginal objective gain per currency unit at amount ``x``."""
    if x < 0:
        raise DomainError(f"budget amount must be >= 0, got {x!r}")
    w = _weight_for(objective, weight)
    m = _marginals(
        objective.kind, np.array([curve.ceiling_a]), np.array([curve.rate_b]), np.array([w]), x
    )
    return float(m[0])


def _check_allocation(curves, allocation):
    x = np.asarray(allocation, dtype=float)
    if x.ndim != 1 or len(x) != len(curves):
        raise ValidationError(
            f"allocation has {x.size} entries for {len(curves)} phases", field="allocation"
        )
    if np.any(x < 0) or np.any(np.isnan(x)):
        raise ValidationError("allocation entries must be >= 0", field="allocation")
    return x


def evaluate_log(curves: Sequence[PhaseCurve], allocation, objective: Objective) -> float:
    """Log of the objective value.

    For the product objectives this is ``sum_i w_i log g_i(x_i)``, computed
    term by term so it stays finite for long pipelines; ``-inf`` when a phase
    with ceiling 1 is left unfunded.
    """
    x = _check_allocation(curves, allocation)
    a, b = curve_arrays(curves)
    if objective.kind is ObjectiveKind.ADDITIVE:
        total = float(np.sum(a * -np.expm1(-b * x)))
        return math.log(total) if total > 0 else -math.inf
    w = objective.weight_vector(len(curves))
    with np.errstate(divide="ignore"):
        terms = np.log1p(-a * np.exp(-b * x))
    return float(np.sum(w * terms))


def evaluate(curves: Sequence[PhaseCurve], allocation, objective: Objective) -> float:
    """Objective value of ``allocation`` on ``curves``.

    Additive returns the plain sum; the product objectives return
    ``exp(evaluate_log(...))``.
    """
    if objective.kind is ObjectiveKind.ADDITIVE:
        x = _check_allocation(curves, allocation)
        a, b = curve_arrays(curves)
        return float(np.sum(a * -np.expm1(-b * x)))
    return math.exp(evaluate_log(curves, allocation, objective))
