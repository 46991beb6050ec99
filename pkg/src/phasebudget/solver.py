"""Water-filling solver for the budget-constrained allocation problem.

The optimum of a separable concave objective under ``sum(x) <= B`` is found
by searching for the dual price ``lam`` at which the per-phase responses
``x_i(lam)`` add up to ``B``.  The total response is non-increasing in
``lam``, so plain bisection works.  The search runs over ``log(lam)``:
realistic instances put ``lam`` anywhere from 1e-300 to 1e+6, and bisecting
the exponent keeps the iteration count bounded by the bracket width in
decades rather than in absolute units.

Besides :func:`solve`, this module has

* :func:`grid_oracle` -- exhaustive simplex-grid search, for tests only;
* :func:`solve_log_transformed` -- the same dual search over generic
  ``w log g`` terms whose responses are found by numeric root finding
  instead of closed forms;
* :func:`reallocate` -- re-solve on the budget left after some phases ran.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .curves import PhaseCurve, eval_g, eval_g_prime
from .errors import DomainError, ResourceLimitError, SolverError, ValidationError
from .objectives import (
    Objective,
    ObjectiveKind,
    _ResponseTable,
    _marginals,
    _responses,
    curve_arrays,
    evaluate,
)

__all__ = [
    "Allocation",
    "SolveConfig",
    "total_response",
    "solve",
    "grid_oracle",
    "grid_gap_bound",
    "reallocate",
    "solve_log_transformed",
]

_INFINITE_THRESHOLD_FACTOR = math.log(1e6)
_MAX_BRACKET_EXPANSIONS = 60
_POLISH_STEPS = 8


def _readonly(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Allocation:
    """Per-phase budget vector and the dual price that produced it.

    ``lambda_star`` is ``None`` for allocations that do not come from a dual
    search (uniform, fixed-ratio, external) and ``0.0`` when every phase is
    at its cap with budget to spare.
    """

    amounts: np.ndarray
    lambda_star: Optional[float] = None
    objective_value: Optional[float] = None
    budget_used: float = field(default=float("nan"))
    labels: tuple[str, ...] = ()
    iterations: int = 0

    def __post_init__(self):
        amounts = _readonly(self.amounts)
        object.__setattr__(self, "amounts", amounts)
        object.__setattr__(self, "labels", tuple(self.labels))
        if math.isnan(self.budget_used):
            object.__setattr__(self, "budget_used", float(amounts.sum()))
        if self.labels and len(self.labels) != len(amounts):
            raise ValidationError("labels and amounts differ in length", field="labels")

    def __len__(self):
        return len(self.amounts)

    def fractions(self) -> np.ndarray:
        """Share of the spent budget per phase (all zeros if nothing was spent)."""
        if self.budget_used > 0:
            return self.amounts / self.budget_used
        return np.zeros_like(self.amounts)

    def scored(self, curves: Sequence[PhaseCurve], objective: Objective) -> "Allocation":
        """Copy with ``objective_value`` recomputed under ``objective``."""
        return replace(self, objective_value=evaluate(curves, self.amounts, objective))

    def as_dict(self) -> dict:
        labels = self.labels or tuple(str(i) for i in range(len(self.amounts)))
        return {
            "amounts": dict(zip(labels, (float(x) for x in self.amounts))),
            "lambda_star": self.lambda_star,
            "objective_value": self.objective_value,
            "budget_used": self.budget_used,
        }


@dataclass(frozen=True)
class SolveConfig:
    """Budget and stopping rule for :func:`solve`.

    ``tolerance`` bounds the budget residual ``B - sum(x)`` at convergence;
    it defaults to ``1e-9 * budget_B``.
    """

    budget_B: float
    tolerance: Optional[float] = None
    max_iterations: int = 200
    caps: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        if not (self.budget_B > 0 and math.isfinite(self.budget_B)):
            raise ValidationError(f"budget_B must be > 0, got {self.budget_B!r}", field="budget_B")
        if self.tolerance is not None and not self.tolerance > 0:
            raise ValidationError(
                f"tolerance must be > 0, got {self.tolerance!r}", field="tolerance"
            )
        if not (isinstance(self.max_iterations, int) and self.max_iterations > 0):
            raise ValidationError("max_iterations must be a positive integer", field="max_iterations")
        if self.caps is not None:
            caps = tuple(float(c) for c in self.caps)
            if not all(c > 0 for c in caps):
                raise ValidationError("caps must all be > 0", field="caps")
            object.__setattr__(self, "caps", caps)

    @property
    def budget_tolerance(self) -> float:
        return 1e-9 * self.budget_B if self.tolerance is None else self.tolerance

    def cap_vector(self, n: int) -> Optional[np.ndarray]:
        if self.caps is None:
            return None
        if len(self.caps) != n:
            raise ValidationError(f"{len(self.caps)} caps for {n} phases", field="caps")
        return np.asarray(self.caps, dtype=float)


def _labels(curves):
    return tuple(c.label for c in curves) if any(c.label for c in curves) else ()


def _prepare(curves, objective):
    if len(curves) == 0:
        raise ValidationError("at least one phase is required", field="curves")
    a, b = curve_arrays(curves)
    w = objective.weight_vector(len(curves))
    return a, b, w


def total_response(
    curves: Sequence[PhaseCurve],
    lam: float,
    objective: Objective,
    caps: Optional[Sequence[float]] = None,
) -> float:
    """Sum of the per-phase responses at dual price ``lam``."""
    if not lam > 0:
        raise DomainError(f"dual price must be > 0, got {lam!r}")
    a, b, w = _prepare(curves, objective)
    cap_arr = None if caps is None else np.asarray(caps, dtype=float)
    return float(np.sum(_responses(objective.kind, a, b, w, math.log(lam), cap_arr)))


def _bisect_log_price(total, budget, log_lo, log_hi, tolerance, max_iterations):
    """Bisect on ``t = log(lam)`` keeping ``total(lo) >= budget >= total(hi)``.

    Returns ``(t_hi, iterations)`` once ``budget - total(t_hi) <= tolerance``.
    A bracket that has shrunk to adjacent floats also counts as converged:
    the total is continuous, so what is left is rounding noise.

    Once the tolerance is met a few regula falsi steps inside the final
    bracket shrink the residual further.  The residual is handed to a single
    phase afterwards, and on steep curves even ``1e-9 * B`` of extra spend
    visibly moves that phase's marginal away from the common price.
    """
    s_hi = total(log_hi)
    s_lo = None
    for it in range(max_iterations + 1):
        if budget - s_hi <= tolerance:
            return _polish(total, budget, log_lo, s_lo, log_hi, s_hi), it
        if it == max_iterations:
            break
        mid = 0.5 * (log_lo + log_hi)
        if mid <= log_lo or mid >= log_hi:
            return log_hi, it
        s_mid = total(mid)
        if s_mid <= budget:
            log_hi, s_hi = mid, s_mid
        else:
            log_lo, s_lo = mid, s_mid
    raise SolverError(
        f"dual search did not converge in {max_iterations} iterations "
        f"(budget residual {budget - s_hi:.3e} > tolerance {tolerance:.3e})",
        bracket=(math.exp(log_lo), math.exp(log_hi)),
    )


def _polish(total, budget, log_lo, s_lo, log_hi, s_hi):
    """Illinois regula falsi on the bracket, never leaving the feasible side."""
    target = 8 * np.finfo(float).eps * budget
    if budget - s_hi <= target:
        return log_hi
    if s_lo is None:
        s_lo = total(log_lo)
    f_lo, f_hi = s_lo - budget, s_hi - budget
    side = 0
    for _ in range(_POLISH_STEPS):
        if f_lo <= f_hi:
            break
        t = log_hi - f_hi * (log_hi - log_lo) / (f_hi - f_lo)
        if not log_lo < t < log_hi:
            break
        f_t = total(t) - budget
        if f_t <= 0:
            log_hi, f_hi = t, f_t
            if -f_hi <= target:
                break
            if side == -1:
                f_lo *= 0.5
            side = -1
        else:
            log_lo, f_lo = t, f_t
            if side == 1:
                f_hi *= 0.5
            side = 1
    return log_hi


def _expand_upper(total, budget, log_hi):
    """Raise ``log_hi`` until the total response no longer exceeds the budget."""
    for _ in range(_MAX_BRACKET_EXPANSIONS):
        if total(log_hi) <= budget:
            return log_hi
        log_hi += max(1.0, abs(log_hi))
    raise SolverError("could not bracket the dual price from above", bracket=(None, math.exp(log_hi)))


def _fill_residual(x, budget, caps, marginals):
    """Hand the leftover budget to the phase(s) with the highest marginal.

    The receiving phase's amount is recomputed as ``budget - sum(others)`` so
    the total matches the budget to rounding.
    """
    x = x.copy()
    n = len(x)
    for _ in range(n):
        residual = budget - x.sum()
        if residual <= 0:
            break
        room = np.full(n, np.inf) if caps is None else caps - x
        m = np.where(room > 0, marginals(x), -np.inf)
        j = int(np.argmax(m))
        if not np.isfinite(m[j]) and m[j] < 0:
            break
        target = budget - (x.sum() - x[j])
        x[j] = target if caps is None else min(caps[j], target)
    return x


def solve(
    curves: Sequence[PhaseCurve], objective: Objective, config: SolveConfig
) -> Allocation:
    """Maximize ``objective`` over allocations summing to ``config.budget_B``.

    Returns the water-filling allocation with ``|sum(x) - B| <= tolerance``.
    If the caps add up to no more than the budget every phase simply gets its
    cap and ``lambda_star`` is reported as ``0.0``.

    Raises
    ------
    ValidationError
        No phases, or caps/weights that do not match the phase count.
    SolverError
        No convergence within ``config.max_iterations``; carries the bracket.
    """
    a, b, w = _prepare(curves, objective)
    kind = objective.kind
    budget = config.budget_B
    caps = config.cap_vector(len(curves))
    labels = _labels(curves)

    if caps is not None and caps.sum() <= budget:
        x = caps.copy()
        return Allocation(
            x,
            lambda_star=0.0,
            objective_value=evaluate(curves, x, objective),
            budget_used=float(x.sum()),
            labels=labels,
        )

    responses = _ResponseTable(kind, a, b, w, caps)

    def total(t):
        return float(responses(t).sum())

    log_thr = responses.log_thr
    finite = np.isfinite(log_thr)
    if finite.all():
        log_hi = float(log_thr.max())
    else:
        base = log_thr[finite].max() if finite.any() else np.log(a * w * b).max()
        log_hi = _expand_upper(total, budget, float(base) + _INFINITE_THRESHOLD_FACTOR)

    # At log(a w b) - b m each phase wants at least m (for every objective),
    # so m = min(cap, B) per phase guarantees total >= B.
    reach = np.full_like(b, budget) if caps is None else np.minimum(caps, budget)
    log_lo = float(np.min(np.log(a * w * b) - b * reach))
    log_lo = min(log_lo, log_hi)

    t_star, iterations = _bisect_log_price(
        total, budget, log_lo, log_hi, config.budget_tolerance, config.max_iterations
    )
    x = responses(t_star)
    x = _fill_residual(x, budget, caps, lambda v: _marginals(kind, a, b, w, v))
    return Allocation(
        x,
        lambda_star=math.exp(t_star),
        objective_value=evaluate(curves, x, objective),
        budget_used=float(x.sum()),
        labels=labels,
        iterations=iterations,
    )


def reallocate(
    curves_remaining: Sequence[PhaseCurve],
    objective: Objective,
    spent: float,
    total_B: float,
    tolerance: Optional[float] = None,
    caps: Optional[Sequence[float]] = None,
) -> Allocation:
    """Re-solve over the phases not yet executed with budget ``total_B - spent``."""
    if not 0 <= spent <= total_B:
        raise ValidationError(
            f"spent must lie in [0, total_B={total_B}], got {spent!r}", field="spent"
        )
    remaining = total_B - spent
    if remaining <= 0:
        x = np.zeros(len(curves_remaining))
        return Allocation(
            x,
            lambda_star=None,
            objective_value=evaluate(curves_remaining, x, objective),
            budget_used=0.0,
            labels=_labels(curves_remaining),
        )
    config = SolveConfig(
        remaining, tolerance=tolerance, caps=None if caps is None else tuple(caps)
    )
    return solve(curves_remaining, objective, config)


# -- independent routes used for verification ---------------------------------


def _compositions(total: int, parts: int) -> np.ndarray:
    """All non-negative integer vectors of length ``parts`` summing to ``total``."""
    rows = np.zeros((1, 0), dtype=np.int64)
    for _ in range(parts - 1):
        room = total - rows.sum(axis=1)
        counts = room + 1
        rep = np.repeat(rows, counts, axis=0)
        starts = np.repeat(np.cumsum(counts) - counts, counts)
        new = np.arange(counts.sum()) - starts
        rows = np.column_stack([rep, new])
    last = total - rows.sum(axis=1)
    return np.column_stack([rows, last])


def _grid_values(a, b, w, kind, x):
    decay = a * np.exp(-b * x)
    if kind is ObjectiveKind.ADDITIVE:
        return np.sum(a - decay, axis=1)
    with np.errstate(divide="ignore"):
        return np.exp(np.sum(w * np.log1p(-decay), axis=1))


def grid_oracle(
    curves: Sequence[PhaseCurve],
    objective: Objective,
    config: SolveConfig,
    grid_points: int,
    max_grid_size: int = 5_000_000,
) -> Allocation:
    """Best allocation on the simplex grid with ``grid_points`` values per axis.

    Every candidate spends exactly ``B`` in steps of ``B / (grid_points - 1)``.
    Intended as a test oracle for small phase counts: the number of candidates
    grows like ``grid_points ** (n - 1)``.
    """
    if grid_points < 2:
        raise ValidationError("grid_points must be >= 2", field="grid_points")
    a, b, w = _prepare(curves, objective)
    n = len(curves)
    steps = grid_points - 1
    size = math.comb(steps + n - 1, n - 1)
    if size > max_grid_size:
        raise ResourceLimitError(
            f"grid of {size} candidates exceeds the limit of {max_grid_size}"
        )
    x = _compositions(steps, n) * (config.budget_B / steps)
    caps = config.cap_vector(n)
    if caps is not None:
        x = x[np.all(x <= caps, axis=1)]
        if len(x) == 0:
            raise ValidationError("no grid point satisfies the caps", field="caps")
    values = _grid_values(a, b, w, objective.kind, x)
    best = int(np.argmax(values))
    return Allocation(
        x[best],
        lambda_star=None,
        objective_value=float(values[best]),
        labels=_labels(curves),
    )


def grid_gap_bound(
    curves: Sequence[PhaseCurve], objective: Objective, budget_B: float, grid_points: int
) -> float:
    """Upper bound on ``optimum - grid_oracle`` for an uncapped instance.

    Rounding the optimum down onto the grid moves each of the first ``n - 1``
    coordinates by less than one step ``h`` and the last by less than
    ``(n - 1) h``.  Each coordinate's effect is bounded by the largest
    partial derivative of the objective, reached at zero spend.
    """
    a, b, w = _prepare(curves, objective)
    n = len(curves)
    h = budget_B / (grid_points - 1)
    if objective.kind is ObjectiveKind.ADDITIVE:
        lipschitz = a * b
    else:
        # d/dx_i prod g^w = (w_i g_i'/g_i) * prod g^w <= w_i a_i b_i / (1 - a_i)
        with np.errstate(divide="ignore"):
            lipschitz = w * a * b / (1.0 - a)
    return float(h * (n - 1) * lipschitz.sum())


def solve_log_transformed(
    curves: Sequence[PhaseCurve],
    config: SolveConfig,
    weights: Optional[Sequence[float]] = None,
) -> Allocation:
    """Maximize ``sum_i w_i log g_i(x_i)`` with numerically inverted responses.

    This runs the same log-price bisection as :func:`solve` but treats each
    term as an opaque concave function: the response at price ``lam`` is the
    root of ``w g'(x) / g(x) = lam``, found with Brent's method on the curve
    evaluators.  No closed form is used, so agreement with :func:`solve`
    under the product objectives checks the log transformation end to end.
    """
    if len(curves) == 0:
        raise ValidationError("at least one phase is required", field="curves")
    n = len(curves)
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    if len(w) != n:
        raise ValidationError(f"{len(w)} weights for {n} phases", field="weights")
    budget = config.budget_B
    caps = config.cap_vector(n)
    reach = np.full(n, budget) if caps is None else np.minimum(caps, budget)

    def log_marginal(i: int) -> Callable[[float], float]:
        c, wi = curves[i], w[i]

        log_scale = math.log(wi * c.ceiling_a * c.rate_b)

        def fn(x):
            g = eval_g(c, x)
            if not g > 0:
                return math.inf
            slope = eval_g_prime(c, x)
            # far out on the curve g' underflows; its log is still exact
            log_slope = math.log(wi * slope) if slope > 0 else log_scale - c.rate_b * x
            return log_slope - math.log(g)

        return fn

    log_m = [log_marginal(i) for i in range(n)]
    x_tol = 1e-6 * config.budget_tolerance

    def response(i, t):
        phi = log_m[i]
        if phi(0.0) <= t:
            return 0.0
        hi = reach[i]
        if phi(hi) >= t:
            return hi if caps is not None and hi == caps[i] else _expand_root(phi, t, hi, x_tol)
        return brentq(lambda v: phi(v) - t, 0.0, hi, xtol=x_tol, rtol=4 * np.finfo(float).eps)

    def total(t):
        return sum(response(i, t) for i in range(n))

    starts = np.array([m(0.0) for m in log_m])
    finite = np.isfinite(starts)
    if finite.all():
        log_hi = float(starts.max())
    else:
        log_hi = _expand_upper(total, budget, float(starts[finite].max() if finite.any() else 0.0))
    # log g <= 0, so log(w a b) - b x bounds every log-marginal from below
    log_lo = min(float(min(log_m[i](reach[i]) for i in range(n))), log_hi)

    t_star, iterations = _bisect_log_price(
        total, budget, log_lo, log_hi, config.budget_tolerance, config.max_iterations
    )
    x = np.array([response(i, t_star) for i in range(n)])

    def marginals(v):
        return np.array([math.exp(log_m[i](v[i])) for i in range(n)])

    x = _fill_residual(x, budget, caps, marginals)
    objective = Objective.prop_offset(w)
    return Allocation(
        x,
        lambda_star=math.exp(t_star),
        objective_value=evaluate(curves, x, objective),
        budget_used=float(x.sum()),
        labels=_labels(curves),
        iterations=iterations,
    )


def _expand_root(phi, t, start, x_tol):
    hi = start
    while phi(hi) >= t:
        hi *= 2.0
    return brentq(lambda v: phi(v) - t, 0.0, hi, xtol=x_tol, rtol=4 * np.finfo(float).eps)
