"""Saturating-exponential phase utility curves and two-point fitting.

A phase's quality as a function of the budget ``x`` spent on it is

    f(x) = a * (1 - exp(-b * x))

with ceiling ``a`` in (0, 1] and rate ``b`` > 0 in inverse budget-currency
units.  The pass-through form used by the product objectives is
``g(x) = 1 - a * exp(-b * x) = (1 - a) + f(x)``.

Curves are fitted from two elicited token counts: ``tokens_basic`` (about
50% of the phase's potential quality) and ``tokens_great`` (about 90%).
Each count implies its own rate; the fitted rate is their geometric mean,
converted from tokens to currency with the phase's output-token price.
"""

from __future__ import annotations

import math
import numbers
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError, ValidationError

__all__ = [
    "TOKENS_BASIC_MIN",
    "TOKENS_BASIC_MAX",
    "TOKENS_GREAT_MAX",
    "OperatingPoints",
    "PhasePricing",
    "PhaseCurve",
    "fit_two_point",
    "token_rates",
    "eval_f",
    "eval_f_prime",
    "eval_g",
    "eval_g_prime",
]

TOKENS_BASIC_MIN = 100
TOKENS_BASIC_MAX = 10_000
TOKENS_GREAT_MAX = 20_000

# f(n_basic) = 0.5 a  ->  b = ln 2 / n_basic;  f(n_great) = 0.9 a  ->  b = ln 10 / n_great
_LN2 = math.log(2.0)
_LN10 = math.log(10.0)


def _check_ceiling(value, field):
    if isinstance(value, bool) or not (isinstance(value, numbers.Real) and 0.0 < value <= 1.0):
        raise ValidationError(f"{field} must lie in (0, 1], got {value!r}", field=field)


@dataclass(frozen=True)
class OperatingPoints:
    """Two-point token estimate for one phase, as produced by a controller."""

    tokens_basic: int
    tokens_great: int
    ceiling: float

    def __post_init__(self):
        for name in ("tokens_basic", "tokens_great"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise ValidationError(f"{name} must be an integer, got {value!r}", field=name)
        if not TOKENS_BASIC_MIN <= self.tokens_basic <= TOKENS_BASIC_MAX:
            raise ValidationError(
                f"tokens_basic must lie in [{TOKENS_BASIC_MIN}, {TOKENS_BASIC_MAX}], "
                f"got {self.tokens_basic}",
                field="tokens_basic",
            )
        if not self.tokens_basic <= self.tokens_great <= TOKENS_GREAT_MAX:
            raise ValidationError(
                f"tokens_great must lie in [tokens_basic={self.tokens_basic}, "
                f"{TOKENS_GREAT_MAX}], got {self.tokens_great}",
                field="tokens_great",
            )
        _check_ceiling(self.ceiling, "ceiling")


@dataclass(frozen=True)
class PhasePricing:
    """Per-phase price of output tokens.

    ``output_price`` is in currency units per output token.  ``cost_ratio``
    optionally expresses the phase's model as a multiple of that price; the
    effective price is ``output_price * cost_ratio``.  ``input_price`` is
    carried for bookkeeping only and never enters the fit (see
    :attr:`warnings`).
    """

    output_price: float
    cost_ratio: float = 1.0
    input_price: Optional[float] = None

    def __post_init__(self):
        if not (self.output_price > 0 and math.isfinite(self.output_price)):
            raise ValidationError(
                f"output_price must be a finite positive number, got {self.output_price!r}",
                field="output_price",
            )
        if not (self.cost_ratio >= 1 and math.isfinite(self.cost_ratio)):
            raise ValidationError(
                f"cost_ratio must be >= 1, got {self.cost_ratio!r}", field="cost_ratio"
            )
        if self.input_price is not None and not self.input_price >= 0:
            raise ValidationError(
                f"input_price must be >= 0, got {self.input_price!r}", field="input_price"
            )

    @property
    def effective_price(self) -> float:
        return self.output_price * self.cost_ratio

    @property
    def warnings(self) -> tuple[str, ...]:
        if self.input_price is not None:
            return ("input_price is recorded but ignored: rates use output-token price only",)
        return ()


@dataclass(frozen=True)
class PhaseCurve:
    """Fitted curve ``f(x) = a (1 - exp(-b x))`` for one phase, x in currency."""

    ceiling_a: float
    rate_b: float
    label: str = ""

    def __post_init__(self):
        _check_ceiling(self.ceiling_a, "ceiling_a")
        if not (self.rate_b > 0 and math.isfinite(self.rate_b)):
            raise ValidationError(
                f"rate_b must be a finite positive number, got {self.rate_b!r}", field="rate_b"
            )

    @property
    def a(self) -> float:
        return self.ceiling_a

    @property
    def b(self) -> float:
        return self.rate_b

    def f(self, x):
        return eval_f(self, x)

    def f_prime(self, x):
        return eval_f_prime(self, x)

    def g(self, x):
        return eval_g(self, x)

    def g_prime(self, x):
        return eval_g_prime(self, x)


def token_rates(points: OperatingPoints) -> tuple[float, float]:
    """Return the per-token rates implied by the basic and great points."""
    return _LN2 / points.tokens_basic, _LN10 / points.tokens_great


def fit_two_point(
    points: OperatingPoints, pricing: PhasePricing, label: str = ""
) -> PhaseCurve:
    """Fit a :class:`PhaseCurve` from two operating points.

    The token-space rate is the geometric mean of the two implied rates; it
    is converted to currency space by dividing by the effective output-token
    price.

    Examples
    --------
    >>> c = fit_two_point(OperatingPoints(300, 600, 0.8), PhasePricing(0.6e-6))
    >>> round(c.rate_b)
    4963
    """
    b_basic, b_great = token_rates(points)
    rate = math.sqrt(b_basic * b_great) / pricing.effective_price
    return PhaseCurve(ceiling_a=float(points.ceiling), rate_b=rate, label=label)


def _as_budget(x):
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise DomainError(f"budget amount must be >= 0, got {x!r}")
    return arr


def _scalar_budget(x) -> Optional[float]:
    """``float(x)`` for a valid real scalar, ``None`` for anything array-like."""
    if isinstance(x, bool) or not isinstance(x, (float, int, np.floating, np.integer)):
        return None
    if not x >= 0:
        raise DomainError(f"budget amount must be >= 0, got {x!r}")
    return float(x)


def _out(value):
    return float(value) if np.ndim(value) == 0 else value


# Scalars take a plain-math path: the numeric solvers call these in tight loops.


def eval_f(curve: PhaseCurve, x):
    """Quality ``a (1 - exp(-b x))``; accepts scalars or arrays."""
    v = _scalar_budget(x)
    if v is not None:
        return curve.ceiling_a * -math.expm1(-curve.rate_b * v)
    x = _as_budget(x)
    return _out(curve.ceiling_a * -np.expm1(-curve.rate_b * x))


def eval_f_prime(curve: PhaseCurve, x):
    """Marginal quality per currency unit, ``a b exp(-b x)``."""
    v = _scalar_budget(x)
    if v is not None:
        return curve.ceiling_a * curve.rate_b * math.exp(-curve.rate_b * v)
    x = _as_budget(x)
    return _out(curve.ceiling_a * curve.rate_b * np.exp(-curve.rate_b * x))


def eval_g(curve: PhaseCurve, x):
    """Pass-through quality ``1 - a exp(-b x)``, from ``1 - a`` at zero toward 1."""
    v = _scalar_budget(x)
    if v is not None:
        return 1.0 - curve.ceiling_a * math.exp(-curve.rate_b * v)
    x = _as_budget(x)
    return _out(1.0 - curve.ceiling_a * np.exp(-curve.rate_b * x))


def eval_g_prime(curve: PhaseCurve, x):
    # g' == f'
    return eval_f_prime(curve, x)
