"""Ingestion and perturbation of controller curve estimates.

A controller describes each phase with two token counts and a ceiling::

    {"plan": {"tokens_basic": 300, "tokens_great": 600, "a": 0.8}, ...}

This module parses such documents (clamping near-miss values into the
schema range with a recorded warning), fits and averages curves, injects
multiplicative noise for sensitivity studies, and reads externally produced
allocations of the form ``{"plan": 0.002, ...}``.

Randomness
----------
Every randomized function takes an explicit 64-bit seed and draws from
``numpy.random.Generator(PCG64(seed))``.  PCG64 and numpy's normal sampler
produce the same stream on every platform.
"""

from __future__ import annotations

import json
import math
import numbers
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .curves import (
    TOKENS_BASIC_MAX,
    TOKENS_BASIC_MIN,
    TOKENS_GREAT_MAX,
    OperatingPoints,
    PhaseCurve,
    PhasePricing,
    fit_two_point,
)
from .errors import ParseError, ValidationError
from .solver import Allocation

__all__ = [
    "CEILING_MIN",
    "RATE_MIN",
    "EstimateDocument",
    "ExternalAllocationDocument",
    "NoiseSpec",
    "parse_estimate",
    "serialize_estimate",
    "fit_estimate",
    "inject_noise",
    "average_estimates",
    "parse_external_document",
    "external_allocation",
    "parse_external_allocation",
    "stub_estimate",
    "make_rng",
]

CEILING_MIN = 0.01
RATE_MIN = 0.01
_SEED_LIMIT = 2**64

Text = Union[str, bytes]
PricingTable = Union[PhasePricing, Mapping[str, PhasePricing]]


def make_rng(seed: int) -> np.random.Generator:
    if isinstance(seed, bool) or not isinstance(seed, numbers.Integral):
        raise ValidationError(f"seed must be an integer, got {seed!r}", field="seed")
    if not 0 <= seed < _SEED_LIMIT:
        raise ValidationError("seed must be a 64-bit unsigned integer", field="seed")
    return np.random.Generator(np.random.PCG64(int(seed)))


@dataclass(frozen=True)
class EstimateDocument:
    """Ordered per-phase operating points plus provenance.

    ``warnings`` lists every value that was clamped or rounded while parsing.
    """

    phases: tuple[tuple[str, OperatingPoints], ...]
    source: str = field(default="", compare=False)
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        phases = tuple((str(label), pts) for label, pts in self.phases)
        object.__setattr__(self, "phases", phases)
        labels = [label for label, _ in phases]
        if any(not label for label in labels):
            raise ValidationError("phase labels must be non-empty", field="phases")
        if len(set(labels)) != len(labels):
            raise ValidationError("phase labels must be unique", field="phases")

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.phases)

    def __len__(self):
        return len(self.phases)


@dataclass(frozen=True)
class ExternalAllocationDocument:
    phases: tuple[tuple[str, float], ...]

    def __post_init__(self):
        phases = tuple((str(label), float(x)) for label, x in self.phases)
        object.__setattr__(self, "phases", phases)
        if not phases:
            raise ValidationError("external allocation lists no phases", field="phases")
        for label, x in phases:
            if not (x >= 0 and math.isfinite(x)):
                raise ValidationError(
                    f"phase {label!r}: amount must be finite and >= 0, got {x!r}", field=label
                )
        if not any(x > 0 for _, x in phases):
            raise ValidationError("external allocation is all zero", field="phases")

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.phases)


@dataclass(frozen=True)
class NoiseSpec:
    """Relative standard deviation ``sigma`` and the seed of the noise stream."""

    sigma: float
    seed: int = 0

    def __post_init__(self):
        if not (self.sigma >= 0 and math.isfinite(self.sigma)):
            raise ValidationError(f"sigma must be >= 0, got {self.sigma!r}", field="sigma")
        make_rng(self.seed)


def _load_json_object(text: Text, what: str) -> dict:
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"{what} is not valid UTF-8", offset=exc.start) from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        offset = len(text[: exc.pos].encode("utf-8"))
        raise ParseError(f"malformed {what}: {exc.msg} at byte {offset}", offset=offset) from exc
    if not isinstance(doc, dict):
        raise ParseError(f"{what} must be a JSON object", offset=0)
    return doc


def _ordered_labels(doc: dict, phase_order: Optional[Sequence[str]], warnings: list) -> list:
    if phase_order is None:
        return list(doc)
    order = list(phase_order)
    for label in order:
        if label not in doc:
            raise ValidationError(f"phase {label!r} is missing from the document", field=label)
    for extra in doc.keys() - set(order):
        warnings.append(f"phase {extra!r} is not in the phase order and was ignored")
    return order


def _number(value, label, name):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ValidationError(
            f"phase {label!r}: field {name!r} must be a finite number, got {value!r}",
            field=f"{label}.{name}",
        )
    return value


def _clamp(value, lo, hi, label, name, warnings):
    clamped = min(max(value, lo), hi)
    if clamped != value:
        warnings.append(f"phase {label!r}: {name}={value} clamped to {clamped}")
    return clamped


def _points_from_fields(label, body, warnings) -> OperatingPoints:
    if not isinstance(body, dict):
        raise ValidationError(f"phase {label!r} must map to an object", field=label)
    raw = {}
    for name in ("tokens_basic", "tokens_great", "a"):
        if name not in body:
            raise ValidationError(
                f"phase {label!r}: missing field {name!r}", field=f"{label}.{name}"
            )
        raw[name] = _number(body[name], label, name)
    for name in ("tokens_basic", "tokens_great"):
        if raw[name] != int(raw[name]):
            warnings.append(f"phase {label!r}: {name}={raw[name]} rounded to an integer")
        raw[name] = int(round(raw[name]))
    if raw["tokens_great"] < raw["tokens_basic"]:
        raise ValidationError(
            f"phase {label!r}: tokens_great={raw['tokens_great']} is below "
            f"tokens_basic={raw['tokens_basic']}",
            field=f"{label}.tokens_great",
        )
    basic = _clamp(raw["tokens_basic"], TOKENS_BASIC_MIN, TOKENS_BASIC_MAX, label, "tokens_basic", warnings)
    great = _clamp(raw["tokens_great"], TOKENS_BASIC_MIN, TOKENS_GREAT_MAX, label, "tokens_great", warnings)
    ceiling = _clamp(float(raw["a"]), CEILING_MIN, 1.0, label, "a", warnings)
    return OperatingPoints(basic, max(great, basic), ceiling)


def parse_estimate(
    text: Text, phase_order: Optional[Sequence[str]] = None, source: str = ""
) -> EstimateDocument:
    """Parse a controller estimate document.

    Parameters
    ----------
    text : str or bytes
        UTF-8 JSON object mapping phase label to
        ``{"tokens_basic": int, "tokens_great": int, "a": number}``.
    phase_order : sequence of str, optional
        Explicit phase order.  Without it the document's key order is used.
    source : str
        Free-form provenance stored on the result.

    Out-of-range values are clamped into ``[100, 10000]`` (basic),
    ``[100, 20000]`` (great) and ``[0.01, 1]`` (ceiling), each with a
    warning.  Missing or non-numeric fields, and ``tokens_great`` below
    ``tokens_basic``, raise :class:`ValidationError`.  Unknown fields are
    ignored.
    """
    doc = _load_json_object(text, "estimate document")
    warnings: list[str] = []
    labels = _ordered_labels(doc, phase_order, warnings)
    if not labels:
        raise ValidationError("estimate document lists no phases", field="phases")
    phases = tuple((label, _points_from_fields(label, doc[label], warnings)) for label in labels)
    return EstimateDocument(phases, source=source, warnings=tuple(warnings))


def serialize_estimate(document: EstimateDocument) -> str:
    body = {
        label: {"tokens_basic": p.tokens_basic, "tokens_great": p.tokens_great, "a": p.ceiling}
        for label, p in document.phases
    }
    return json.dumps(body, indent=2)


def _pricing_for(pricing: PricingTable, label: str) -> PhasePricing:
    if isinstance(pricing, PhasePricing):
        return pricing
    try:
        return pricing[label]
    except KeyError:
        raise ValidationError(f"no pricing for phase {label!r}", field=label) from None


def fit_estimate(document: EstimateDocument, pricing: PricingTable) -> list[PhaseCurve]:
    """Fit one curve per phase, in document order."""
    return [
        fit_two_point(points, _pricing_for(pricing, label), label=label)
        for label, points in document.phases
    ]


def inject_noise(curves: Sequence[PhaseCurve], spec: NoiseSpec) -> list[PhaseCurve]:
    """Perturb each curve's ``a`` and ``b`` by independent factors ``1 + N(0, sigma)``.

    Draws are taken in phase order, ``a`` before ``b``.  Results are clipped
    to ``a`` in [0.01, 1] and ``b`` >= 0.01.  ``sigma == 0`` returns the
    input curves untouched.
    """
    if spec.sigma == 0:
        return list(curves)
    z = make_rng(spec.seed).normal(0.0, spec.sigma, size=(len(curves), 2))
    out = []
    for c, (za, zb) in zip(curves, z):
        a = min(max(c.ceiling_a * (1.0 + za), CEILING_MIN), 1.0)
        b = max(c.rate_b * (1.0 + zb), RATE_MIN)
        out.append(PhaseCurve(a, b, c.label))
    return out


def average_estimates(
    documents: Sequence[EstimateDocument], pricing: PricingTable
) -> list[PhaseCurve]:
    """Fit every document and average ``a`` and ``b`` per phase (arithmetic mean)."""
    if not documents:
        raise ValidationError("no estimate documents to average", field="documents")
    labels = documents[0].labels
    for doc in documents[1:]:
        if set(doc.labels) != set(labels):
            raise ValidationError(
                f"phase labels differ: {sorted(labels)} vs {sorted(doc.labels)}", field="phases"
            )
    fitted = [{c.label: c for c in fit_estimate(doc, pricing)} for doc in documents]
    out = []
    for label in labels:
        a = np.mean([f[label].ceiling_a for f in fitted])
        b = np.mean([f[label].rate_b for f in fitted])
        out.append(PhaseCurve(float(min(a, 1.0)), float(b), label))
    return out


def parse_external_document(
    text: Text, phase_order: Optional[Sequence[str]] = None
) -> ExternalAllocationDocument:
    doc = _load_json_object(text, "external allocation")
    labels = _ordered_labels(doc, phase_order, [])
    phases = []
    for label in labels:
        value = doc[label]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValidationError(
                f"phase {label!r}: amount must be a number, got {value!r}", field=label
            )
        phases.append((label, value))
    return ExternalAllocationDocument(tuple(phases))


def external_allocation(document: ExternalAllocationDocument, budget_B: float) -> Allocation:
    """Rescale an external allocation so it spends exactly ``budget_B``."""
    if not budget_B > 0:
        raise ValidationError(f"budget_B must be > 0, got {budget_B!r}", field="budget_B")
    x = np.array([amount for _, amount in document.phases])
    total = x.sum()
    if total != budget_B:
        x = x * (budget_B / total)
    return Allocation(x, lambda_star=None, objective_value=None, labels=document.labels)


def parse_external_allocation(
    text: Text, budget_B: float, phase_order: Optional[Sequence[str]] = None
) -> Allocation:
    """Parse ``{"phase": amount, ...}`` and rescale it to the budget."""
    return external_allocation(parse_external_document(text, phase_order), budget_B)


def stub_estimate(phase_descriptors: Sequence[str], seed: int) -> EstimateDocument:
    """Deterministic stand-in for a live controller.

    ``tokens_basic`` is drawn from [100, 2000], ``tokens_great`` is 1.5x to 4x
    that (capped at 20000), and the ceiling from [0.3, 0.95] rounded to two
    decimals.
    """
    labels = list(phase_descriptors)
    if not labels:
        raise ValidationError("at least one phase descriptor is required", field="phases")
    rng = make_rng(seed)
    phases = []
    for label in labels:
        basic = int(rng.integers(TOKENS_BASIC_MIN, 2001))
        great = min(TOKENS_GREAT_MAX, int(round(basic * rng.uniform(1.5, 4.0))))
        ceiling = round(float(rng.uniform(0.3, 0.95)), 2)
        phases.append((label, OperatingPoints(basic, great, ceiling)))
    return EstimateDocument(tuple(phases), source=f"stub(seed={seed})")
