"""Command-line front end.

::

    phasebudget fit --estimates est.json --pricing pricing.json --out curves.json
    phasebudget solve --curves curves.json --budget 0.017951 --objective zebra-additive --out alloc.json
    phasebudget sweep --pipeline pipeline.json --config experiment.json --out-prefix out/run
    phasebudget noise --curves curves.json --sigma 0.5 --seed 7 --out noisy.json
    phasebudget reallocate --curves rest.json --spent 0.00257 --budget 0.017951 \\
        --objective zebra-additive --out alloc.json

Every output document carries the tool version and the effective
configuration.  Failures exit with status 1 and print a JSON error record
on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from . import __version__, _io
from .curves import PhaseCurve, PhasePricing
from .errors import ParseError, PhaseBudgetError, ValidationError
from .estimator import (
    NoiseSpec,
    fit_estimate,
    inject_noise,
    parse_estimate,
    parse_external_document,
)
from .objectives import Objective, ObjectiveKind
from .simulator import ExperimentConfig, SyntheticPipeline, sweep
from .solver import Allocation, SolveConfig, reallocate, solve
from .strategies import (
    FIXED_AVERAGE_4,
    StrategyKind,
    StrategySpec,
    budget_from_alpha,
    parse_strategy,
    strategy_kind,
)

__all__ = ["CommandConfig", "run_fit", "run_solve", "run_sweep", "run_noise", "run_reallocate", "main"]

TOOL = "phasebudget"
COMMANDS = ("fit", "solve", "sweep", "noise", "reallocate")


@dataclass
class CommandConfig:
    command: str
    out: Optional[str] = None
    estimates: Optional[str] = None
    pricing: Optional[str] = None
    order: Optional[list[str]] = None
    curves: Optional[str] = None
    objective: Optional[str] = None
    budget: Optional[float] = None
    alpha: Optional[float] = None
    reference_cost: Optional[float] = None
    caps: Optional[str] = None
    tolerance: Optional[float] = None
    pipeline: Optional[str] = None
    config: Optional[str] = None
    out_prefix: Optional[str] = None
    jobs: int = 1
    sigma: Optional[float] = None
    seed: Optional[int] = None
    spent: Optional[float] = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValidationError(f"unknown command {self.command!r}", field="command")
        if self.command == "solve":
            has_budget = self.budget is not None
            has_alpha = self.alpha is not None or self.reference_cost is not None
            if has_budget == has_alpha:
                raise ValidationError(
                    "give exactly one of --budget or --alpha with --reference-cost", field="budget"
                )
            if has_alpha and (self.alpha is None or self.reference_cost is None):
                raise ValidationError("--alpha and --reference-cost go together", field="alpha")

    def resolved_budget(self) -> float:
        if self.budget is not None:
            return float(self.budget)
        return budget_from_alpha(self.alpha, self.reference_cost)

    def provenance(self) -> dict:
        effective = {k: v for k, v in asdict(self).items() if v is not None and k != "extra"}
        if self.command != "sweep":
            effective.pop("jobs", None)
        effective.update(self.extra)
        return {"tool": {"name": TOOL, "version": __version__}, "config": effective}


# -- documents ----------------------------------------------------------------


def _read_json(path) -> dict:
    text = Path(path).read_bytes()
    try:
        return json.loads(text.decode("utf-8"))
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path}: not valid UTF-8", offset=exc.start) from exc
    except json.JSONDecodeError as exc:
        offset = len(text.decode("utf-8")[: exc.pos].encode("utf-8"))
        raise ParseError(f"{path}: {exc.msg} at byte {offset}", offset=offset) from exc


def _write(path, document: dict) -> None:
    Path(path).write_text(_io.dumps(document), encoding="utf-8")


def _pricing_from(doc: dict) -> tuple[dict, Optional[PhasePricing], str]:
    """Pricing table: ``{"currency", "default": {...}, "phases": {label: {...}}}``."""

    def one(body):
        if not isinstance(body, dict) or "output_price" not in body:
            raise ValidationError("pricing entries need an output_price", field="output_price")
        return PhasePricing(
            float(body["output_price"]),
            float(body.get("cost_ratio", 1.0)),
            None if body.get("input_price") is None else float(body["input_price"]),
        )

    default = one(doc["default"]) if "default" in doc else None
    phases = {label: one(body) for label, body in doc.get("phases", {}).items()}
    return phases, default, str(doc.get("currency", "USD"))


def _curves_from(doc: dict) -> list[PhaseCurve]:
    phases = doc.get("phases")
    if not isinstance(phases, list) or not phases:
        raise ValidationError("curves document lists no phases", field="phases")
    out = []
    for entry in phases:
        try:
            out.append(PhaseCurve(float(entry["ceiling_a"]), float(entry["rate_b"]), str(entry["label"])))
        except KeyError as exc:
            raise ValidationError(f"curve entry lacks {exc.args[0]!r}", field=exc.args[0]) from None
    return out


def _curves_document(curves, currency, warnings=()) -> dict:
    return {
        "currency": currency,
        "units": {"ceiling_a": "quality", "rate_b": f"1/{currency}"},
        "phases": [{"label": c.label, "ceiling_a": c.ceiling_a, "rate_b": c.rate_b} for c in curves],
        "warnings": list(warnings),
    }


def _objective(name: str, curves) -> Objective:
    key = name[len("zebra-"):] if name.startswith("zebra-") else name
    try:
        kind = ObjectiveKind(key)
    except ValueError:
        known = ", ".join(f"zebra-{k.value}" for k in ObjectiveKind)
        raise ValidationError(f"unknown objective {name!r}; expected one of {known}", field="objective") from None
    if kind is ObjectiveKind.PROP_OFFSET:
        return Objective.ceiling_weighted(curves)
    return Objective(kind)


def _allocation_document(alloc: Allocation, budget: float, currency: str) -> dict:
    body = alloc.as_dict()
    body["budget"] = budget
    body["currency"] = currency
    return body


def _strategy_from(entry) -> StrategySpec:
    if isinstance(entry, str):
        return parse_strategy(entry)
    if not isinstance(entry, dict) or "kind" not in entry:
        raise ValidationError(f"bad strategy entry {entry!r}", field="strategies")
    kind = strategy_kind(entry["kind"])
    name = entry.get("name", "")
    if kind is StrategyKind.FIXED_RATIO:
        return StrategySpec.fixed_ratio(entry.get("ratio", FIXED_AVERAGE_4), name=name)
    if kind is StrategyKind.EXTERNAL:
        document = parse_external_document(json.dumps(entry["allocation"]))
        return StrategySpec(kind, external=document, name=name)
    return StrategySpec(kind, name=name)


def _pipelines_from(doc: dict) -> list[SyntheticPipeline]:
    tasks = doc["tasks"] if "tasks" in doc else [doc]
    out = []
    for i, task in enumerate(tasks):
        curves = _curves_from(task)
        aggregation = _objective(task.get("aggregation", "additive"), curves)
        if "reference_cost" not in task:
            raise ValidationError("pipeline needs a reference_cost", field="reference_cost")
        out.append(SyntheticPipeline(tuple(curves), aggregation, float(task["reference_cost"]),
                                     name=str(task.get("name", f"task{i}"))))
    return out


# -- commands -----------------------------------------------------------------


def run_fit(config: CommandConfig) -> dict:
    text = Path(config.estimates).read_bytes()
    estimate = parse_estimate(text, config.order, source=str(config.estimates))
    table, default, currency = _pricing_from(_read_json(config.pricing))
    pricing = {label: table.get(label, default) for label in estimate.labels}
    missing = [label for label, p in pricing.items() if p is None]
    if missing:
        raise ValidationError(f"no pricing for phases {missing}", field="pricing")
    curves = fit_estimate(estimate, pricing)
    warnings = list(estimate.warnings)
    for p in {id(p): p for p in pricing.values()}.values():
        warnings.extend(w for w in p.warnings if w not in warnings)
    document = {**config.provenance(), **_curves_document(curves, currency, warnings)}
    _write(config.out, document)
    return document


def run_solve(config: CommandConfig) -> dict:
    doc = _read_json(config.curves)
    curves = _curves_from(doc)
    currency = str(doc.get("currency", "USD"))
    budget = config.resolved_budget()
    caps = None
    if config.caps:
        cap_doc = _read_json(config.caps)
        caps = tuple(float(cap_doc.get(c.label, float("inf"))) for c in curves)
    objective = _objective(config.objective, curves)
    alloc = solve(curves, objective, SolveConfig(budget, tolerance=config.tolerance, caps=caps))
    document = {**config.provenance(), "objective": config.objective,
                **_allocation_document(alloc, budget, currency)}
    _write(config.out, document)
    return document


def run_sweep(config: CommandConfig) -> dict:
    pipelines = _pipelines_from(_read_json(config.pipeline))
    exp = _read_json(config.config)
    strategies = tuple(_strategy_from(s) for s in exp.get("strategies", []))
    if not strategies:
        raise ValidationError("experiment config lists no strategies", field="strategies")
    experiment = ExperimentConfig(
        strategies=strategies,
        alphas=tuple(exp.get("alphas", (0.3, 0.5, 0.8))),
        runs=int(exp.get("runs", 15)),
        noise=NoiseSpec(float(exp.get("sigma", 0.0)), int(exp.get("noise_seed", 0))),
        seed=int(exp.get("seed", 0)),
        tolerance=exp.get("tolerance"),
    )
    report = sweep(pipelines, experiment, jobs=config.jobs)
    config.extra["experiment"] = experiment.as_dict()
    document = {**report.to_dict(), **config.provenance()}
    prefix = Path(config.out_prefix)
    _write(prefix.with_name(prefix.name + ".json"), document)
    with open(prefix.with_name(prefix.name + ".csv"), "w", encoding="utf-8", newline="") as fh:
        fh.write(report.to_csv())
    return document


def run_noise(config: CommandConfig) -> dict:
    doc = _read_json(config.curves)
    curves = _curves_from(doc)
    noisy = inject_noise(curves, NoiseSpec(float(config.sigma), int(config.seed)))
    document = {**config.provenance(), "seed": config.seed,
                **_curves_document(noisy, str(doc.get("currency", "USD")))}
    _write(config.out, document)
    return document


def run_reallocate(config: CommandConfig) -> dict:
    doc = _read_json(config.curves)
    curves = _curves_from(doc)
    objective = _objective(config.objective, curves)
    alloc = reallocate(curves, objective, float(config.spent), float(config.budget), config.tolerance)
    remaining = float(config.budget) - float(config.spent)
    document = {**config.provenance(), "objective": config.objective, "spent": config.spent,
                **_allocation_document(alloc, remaining, str(doc.get("currency", "USD")))}
    _write(config.out, document)
    return document


_RUNNERS = {
    "fit": run_fit,
    "solve": run_solve,
    "sweep": run_sweep,
    "noise": run_noise,
    "reallocate": run_reallocate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=TOOL, description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"{TOOL} {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit phase curves from a controller estimate")
    p.add_argument("--estimates", required=True)
    p.add_argument("--pricing", required=True)
    p.add_argument("--order", type=lambda s: s.split(","), help="comma-separated phase order")
    p.add_argument("--out", required=True)

    p = sub.add_parser("solve", help="solve the budget allocation")
    p.add_argument("--curves", required=True)
    p.add_argument("--budget", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--reference-cost", type=float)
    p.add_argument("--objective", required=True)
    p.add_argument("--caps")
    p.add_argument("--tolerance", type=float)
    p.add_argument("--out", required=True)

    p = sub.add_parser("sweep", help="run a synthetic strategy sweep")
    p.add_argument("--pipeline", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out-prefix", required=True)
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("noise", help="perturb curves with multiplicative noise")
    p.add_argument("--curves", required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("reallocate", help="re-solve remaining phases on leftover budget")
    p.add_argument("--curves", required=True)
    p.add_argument("--spent", type=float, required=True)
    p.add_argument("--budget", type=float, required=True)
    p.add_argument("--objective", required=True)
    p.add_argument("--tolerance", type=float)
    p.add_argument("--out", required=True)
    return parser


def _error_record(exc: Exception) -> dict:
    record = {"error": type(exc).__name__, "message": str(exc)}
    for attr in ("field", "offset", "bracket"):
        value = getattr(exc, attr, None)
        if value is not None:
            record[attr] = list(value) if isinstance(value, tuple) else value
    return record


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = CommandConfig(**vars(args))
        _RUNNERS[config.command](config)
    except (PhaseBudgetError, OSError, KeyError, TypeError, ValueError) as exc:
        sys.stderr.write(_io.dumps(_error_record(exc)))
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
