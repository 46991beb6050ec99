"""Synthetic-pipeline experiments.

A :class:`SyntheticPipeline` holds ground-truth curves and the law that
turns per-phase spend into pipeline quality.  Strategies only ever see a
noisy copy of the curves; their allocations are scored against the clean
ones.  There is no other source of randomness, so run-to-run variation
isolates the effect of curve-estimation error on the allocation.

Retention is reported against the no-budget reference: the optimum of the
pipeline's own aggregation at ``B = reference_cost``.  Two definitions are
kept apart:

* ``ratio_of_means`` -- ``mean(quality) / mean(reference)`` over all runs;
* ``mean_of_ratios`` -- mean over tasks of ``mean(quality_task) /
  reference_task``, skipping tasks whose reference is below 0.01.

Seeds
-----
Run seeds come from :func:`derive_seed`, which feeds the experiment seed
and the cell coordinates ``(alpha, strategy, task, run)`` (as indices) into
``numpy.random.SeedSequence`` and takes one 64-bit word of its state.  Adding
a strategy or an alpha therefore never changes the streams of other cells.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import _io
from .curves import PhaseCurve
from .errors import ValidationError
from .estimator import NoiseSpec, inject_noise, make_rng
from .objectives import Objective, evaluate
from .solver import SolveConfig, reallocate, solve
from .strategies import StrategySpec, allocate, budget_from_alpha, objective_for

__all__ = [
    "SyntheticPipeline",
    "ExperimentConfig",
    "RunRecord",
    "CellSummary",
    "SweepReport",
    "HybridRecord",
    "derive_seed",
    "simulate_run",
    "nb_reference",
    "sweep",
    "hybrid_run",
    "random_pipeline",
    "RETENTION_FLOOR",
]

# tasks whose reference quality is below this are left out of mean-of-ratios
RETENTION_FLOOR = 0.01

SpendModel = Union[str, float, Callable[[np.ndarray], np.ndarray]]


@dataclass(frozen=True)
class SyntheticPipeline:
    phases: tuple[PhaseCurve, ...]
    aggregation: Objective
    reference_cost: float
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "phases", tuple(self.phases))
        if not self.phases:
            raise ValidationError("a pipeline needs at least one phase", field="phases")
        if not (self.reference_cost > 0 and math.isfinite(self.reference_cost)):
            raise ValidationError(
                f"reference_cost must be > 0, got {self.reference_cost!r}", field="reference_cost"
            )
        self.aggregation.weight_vector(len(self.phases))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(c.label for c in self.phases)


@dataclass(frozen=True)
class ExperimentConfig:
    """Grid of an experiment: budget levels x strategies x repeated runs.

    ``noise.sigma`` is applied to the curves strategies see; ``noise.seed``
    is mixed into every run seed together with ``seed``.
    """

    strategies: tuple[StrategySpec, ...]
    alphas: tuple[float, ...] = (0.3, 0.5, 0.8)
    runs: int = 15
    noise: NoiseSpec = NoiseSpec(0.0, 0)
    seed: int = 0
    tolerance: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "strategies", tuple(self.strategies))
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        if not self.strategies:
            raise ValidationError("at least one strategy is required", field="strategies")
        if not self.alphas or not all(0 < a <= 1 for a in self.alphas):
            raise ValidationError("alphas must be non-empty and lie in (0, 1]", field="alphas")
        if not (isinstance(self.runs, int) and self.runs >= 1):
            raise ValidationError("runs must be a positive integer", field="runs")
        make_rng(self.seed)
        names = [s.name for s in self.strategies]
        if len(set(names)) != len(names):
            raise ValidationError(f"strategy names must be unique: {names}", field="strategies")

    def as_dict(self) -> dict:
        return {
            "alphas": list(self.alphas),
            "runs": self.runs,
            "sigma": self.noise.sigma,
            "noise_seed": self.noise.seed,
            "seed": self.seed,
            "tolerance": self.tolerance,
            "strategies": [
                {"name": s.name, "kind": s.kind.value, "ratio": list(s.ratio) if s.ratio else None}
                for s in self.strategies
            ],
        }


@dataclass(frozen=True)
class RunRecord:
    task: str
    alpha: float
    strategy: str
    run: int
    seed: int
    budget: float
    amounts: np.ndarray
    quality: float
    nb_quality: float
    perceived_value: Optional[float] = None

    @property
    def budget_used(self) -> float:
        return float(np.sum(self.amounts))

    @property
    def fractions(self) -> np.ndarray:
        used = self.budget_used
        return self.amounts / used if used > 0 else np.zeros_like(self.amounts)

    @property
    def retention(self) -> float:
        return self.quality / self.nb_quality


@dataclass(frozen=True)
class CellSummary:
    alpha: float
    strategy: str
    n_runs: int
    mean_quality: float
    retention_ratio_of_means: float
    retention_mean_of_ratios: float
    mean_fractions: np.ndarray


@dataclass
class SweepReport:
    config: dict
    labels: tuple[str, ...]
    cells: list[CellSummary]
    runs: list[RunRecord] = field(repr=False)

    def cell(self, alpha: float, strategy: str) -> CellSummary:
        for c in self.cells:
            if c.alpha == alpha and c.strategy == strategy:
                return c
        raise KeyError((alpha, strategy))

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "phases": list(self.labels),
            "cells": [
                {
                    "alpha": c.alpha,
                    "strategy": c.strategy,
                    "n_runs": c.n_runs,
                    "mean_quality": c.mean_quality,
                    "retention": {
                        "ratio_of_means": c.retention_ratio_of_means,
                        "mean_of_ratios": c.retention_mean_of_ratios,
                    },
                    "mean_fractions": dict(zip(self.labels, c.mean_fractions.tolist())),
                }
                for c in self.cells
            ],
            "runs": [
                {
                    "task": r.task,
                    "alpha": r.alpha,
                    "strategy": r.strategy,
                    "run": r.run,
                    "seed": r.seed,
                    "budget": r.budget,
                    "quality": r.quality,
                    "nb_quality": r.nb_quality,
                    "amounts": dict(zip(self.labels, r.amounts.tolist())),
                }
                for r in self.runs
            ],
        }

    def to_json(self) -> str:
        return _io.dumps(self.to_dict())

    def to_csv(self) -> str:
        header = ["task", "alpha", "strategy", "run", "seed", "budget", "budget_used",
                  "quality", "nb_quality"]
        header += [f"fraction_{label}" for label in self.labels]
        rows = (
            [r.task, r.alpha, r.strategy, r.run, r.seed, r.budget, r.budget_used,
             r.quality, r.nb_quality, *r.fractions.tolist()]
            for r in self.runs
        )
        return _io.csv_text(header, rows)

    def write(self, prefix: Union[str, Path]) -> tuple[Path, Path]:
        """Write ``<prefix>.json`` and ``<prefix>.csv``; returns both paths."""
        prefix = Path(prefix)
        json_path = prefix.with_name(prefix.name + ".json")
        csv_path = prefix.with_name(prefix.name + ".csv")
        json_path.write_text(self.to_json(), encoding="utf-8")
        with open(csv_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv())
        return json_path, csv_path


def derive_seed(base_seed: int, *coordinates: int) -> int:
    """64-bit seed for the cell at ``coordinates`` of an experiment seeded by ``base_seed``."""
    entropy = base_seed if isinstance(base_seed, int) else [int(s) for s in base_seed]
    seq = np.random.SeedSequence(entropy, spawn_key=tuple(int(c) for c in coordinates))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def nb_reference(pipeline: SyntheticPipeline, tolerance: Optional[float] = None) -> float:
    """Quality of the optimal allocation at ``B = reference_cost``."""
    config = SolveConfig(pipeline.reference_cost, tolerance=tolerance)
    return solve(pipeline.phases, pipeline.aggregation, config).objective_value


def simulate_run(
    pipeline: SyntheticPipeline,
    strategy: StrategySpec,
    alpha: float,
    sigma: float = 0.0,
    seed: int = 0,
    *,
    tolerance: Optional[float] = None,
    nb_quality: Optional[float] = None,
    task: str = "",
    run: int = 0,
) -> RunRecord:
    """Allocate on perceived curves, score on the true ones.

    The perceived curves are the truth with noise of relative size
    ``sigma`` drawn from ``seed``.  ``nb_quality`` may be passed in to
    avoid recomputing the reference for every run.
    """
    perceived = inject_noise(pipeline.phases, NoiseSpec(sigma, seed))
    budget = budget_from_alpha(alpha, pipeline.reference_cost)
    alloc = allocate(strategy, perceived, budget, SolveConfig(budget, tolerance=tolerance))
    quality = evaluate(pipeline.phases, alloc.amounts, pipeline.aggregation)
    if nb_quality is None:
        nb_quality = nb_reference(pipeline, tolerance)
    return RunRecord(
        task=task or pipeline.name,
        alpha=alpha,
        strategy=strategy.name,
        run=run,
        seed=seed,
        budget=budget,
        amounts=np.array(alloc.amounts),
        quality=quality,
        nb_quality=nb_quality,
        perceived_value=alloc.objective_value,
    )


def _run_cell(args):
    pipeline, spec, alpha, sigma, seed, tolerance, nb, task, run = args
    return simulate_run(
        pipeline, spec, alpha, sigma, seed, tolerance=tolerance, nb_quality=nb, task=task, run=run
    )


def _summarize(alpha, strategy, records, n_phases) -> CellSummary:
    quality = np.array([r.quality for r in records])
    nb = np.array([r.nb_quality for r in records])
    per_task: dict[str, list[RunRecord]] = {}
    for r in records:
        per_task.setdefault(r.task, []).append(r)
    ratios = [
        np.mean([r.quality for r in rs]) / rs[0].nb_quality
        for rs in per_task.values()
        if rs[0].nb_quality >= RETENTION_FLOOR
    ]
    fractions = np.mean([r.fractions for r in records], axis=0) if records else np.zeros(n_phases)
    return CellSummary(
        alpha=alpha,
        strategy=strategy,
        n_runs=len(records),
        mean_quality=float(quality.mean()),
        retention_ratio_of_means=float(quality.mean() / nb.mean()),
        retention_mean_of_ratios=float(np.mean(ratios)) if ratios else math.nan,
        mean_fractions=fractions,
    )


def sweep(
    pipelines: Union[SyntheticPipeline, Sequence[SyntheticPipeline]],
    config: ExperimentConfig,
    jobs: int = 1,
) -> SweepReport:
    """Run every (alpha, strategy, task, run) cell and summarize per (alpha, strategy).

    ``pipelines`` is one pipeline or a list of tasks sharing the same phase
    labels.  With ``jobs > 1`` runs are spread over worker processes; the
    report is identical either way.
    """
    tasks = [pipelines] if isinstance(pipelines, SyntheticPipeline) else list(pipelines)
    if not tasks:
        raise ValidationError("no pipelines to sweep", field="pipelines")
    labels = tasks[0].labels
    if any(t.labels != labels for t in tasks):
        raise ValidationError("all pipelines must share the same phase labels", field="pipelines")
    names = [t.name or f"task{i}" for i, t in enumerate(tasks)]
    references = [nb_reference(t, config.tolerance) for t in tasks]
    entropy = [config.seed, config.noise.seed]

    jobs_list = []
    for ai, alpha in enumerate(config.alphas):
        for si, spec in enumerate(config.strategies):
            for ti, task in enumerate(tasks):
                for ri in range(config.runs):
                    seed = derive_seed(entropy, ai, si, ti, ri)
                    jobs_list.append(
                        (task, spec, alpha, config.noise.sigma, seed, config.tolerance,
                         references[ti], names[ti], ri)
                    )

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_run_cell, jobs_list, chunksize=64))
    else:
        records = [_run_cell(j) for j in jobs_list]

    cells = []
    for alpha in config.alphas:
        for spec in config.strategies:
            rs = [r for r in records if r.alpha == alpha and r.strategy == spec.name]
            cells.append(_summarize(alpha, spec.name, rs, len(labels)))
    return SweepReport(config=config.as_dict(), labels=labels, cells=cells, runs=records)


@dataclass(frozen=True)
class HybridRecord:
    alpha: float
    strategy: str
    split_after: int
    seed: int
    budget: float
    spent: float
    one_shot: np.ndarray
    amounts: np.ndarray
    quality: float
    one_shot_quality: float


def _realize(spend_model: SpendModel, planned: np.ndarray) -> np.ndarray:
    if isinstance(spend_model, str):
        if spend_model != "exact":
            raise ValidationError(f"unknown spend model {spend_model!r}", field="spend_model")
        return planned.copy()
    if callable(spend_model):
        realized = np.asarray(spend_model(planned.copy()), dtype=float)
    else:
        realized = planned * float(spend_model)
    if realized.shape != planned.shape or np.any(realized < 0):
        raise ValidationError("spend model must return non-negative amounts per phase", field="spend_model")
    return realized


def hybrid_run(
    pipeline: SyntheticPipeline,
    strategy: StrategySpec,
    alpha: float,
    split_after: int,
    spend_model: SpendModel = "exact",
    seed: int = 0,
    *,
    sigma: float = 0.0,
    renoise: bool = False,
    tolerance: Optional[float] = None,
) -> HybridRecord:
    """Allocate up front, run ``split_after`` phases, then re-solve the rest.

    ``spend_model`` turns the planned amounts of the executed phases into
    realized spend: ``"exact"``, a multiplicative factor, or a callable.
    With ``renoise`` the remaining phases' perceived curves are re-drawn
    from an independent stream, standing in for a fresh estimate.
    """
    n = len(pipeline.phases)
    if not 0 < split_after < n:
        raise ValidationError(f"split_after must lie in (0, {n}), got {split_after}", field="split_after")
    if not strategy.kind.solves:
        raise ValidationError("hybrid re-allocation needs a solving strategy", field="strategy")
    budget = budget_from_alpha(alpha, pipeline.reference_cost)
    perceived = inject_noise(pipeline.phases, NoiseSpec(sigma, seed))
    one_shot = allocate(strategy, perceived, budget, SolveConfig(budget, tolerance=tolerance))

    realized = _realize(spend_model, np.array(one_shot.amounts[:split_after]))
    spent = float(realized.sum())
    if spent > budget and math.isclose(spent, budget, rel_tol=1e-12):
        spent = budget  # rounding in the partial sum
    remaining = list(perceived[split_after:])
    if renoise and sigma > 0:
        remaining = inject_noise(pipeline.phases[split_after:], NoiseSpec(sigma, derive_seed(seed, 1)))
    objective = objective_for(strategy.kind, remaining)
    tail = reallocate(remaining, objective, spent, budget, tolerance=tolerance)
    amounts = np.concatenate([realized, tail.amounts])
    return HybridRecord(
        alpha=alpha,
        strategy=strategy.name,
        split_after=split_after,
        seed=seed,
        budget=budget,
        spent=spent,
        one_shot=np.array(one_shot.amounts),
        amounts=amounts,
        quality=evaluate(pipeline.phases, amounts, pipeline.aggregation),
        one_shot_quality=evaluate(pipeline.phases, one_shot.amounts, pipeline.aggregation),
    )


def random_pipeline(
    rng: np.random.Generator,
    n_phases: int = 4,
    aggregation: str = "additive",
    labels: Optional[Sequence[str]] = None,
) -> SyntheticPipeline:
    """Heterogeneous pipeline with ceilings in [0.3, 0.95] and rates spanning 1e2..1e4.

    ``reference_cost`` is drawn so the unconstrained spend saturates most
    phases (``b * cost`` of order 1 to 20).
    """
    a = rng.uniform(0.3, 0.95, size=n_phases)
    b = 10 ** rng.uniform(2.0, 4.0, size=n_phases)
    cost = float(rng.uniform(1.0, 20.0) * n_phases / np.median(b))
    labels = list(labels) if labels is not None else [f"phase{i}" for i in range(n_phases)]
    curves = tuple(PhaseCurve(float(ai), float(bi), label) for ai, bi, label in zip(a, b, labels))
    if aggregation == "prop-offset":
        objective = Objective.ceiling_weighted(curves)
    else:
        objective = Objective(aggregation)
    return SyntheticPipeline(curves, objective, cost)
