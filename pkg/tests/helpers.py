import math

import numpy as np

from phasebudget import OperatingPoints, PhaseCurve, PhasePricing, fit_two_point

BASE_PRICE = 0.6e-6
REFINE_RATIO = 16.7
WALKTHROUGH_BUDGET = 0.017951
WALKTHROUGH_REFERENCE_COST = 0.0359

# controller response for the four-phase worked example
WALKTHROUGH_ESTIMATE = """{
  "plan": {"tokens_basic": 300, "tokens_great": 600, "a": 0.8},
  "decompose": {"tokens_basic": 400, "tokens_great": 800, "a": 0.7},
  "implement": {"tokens_basic": 800, "tokens_great": 1500, "a": 0.9},
  "refine": {"tokens_basic": 600, "tokens_great": 1200, "a": 0.6}
}"""

WALKTHROUGH_POINTS = [
    ("plan", 300, 600, 0.8),
    ("decompose", 400, 800, 0.7),
    ("implement", 800, 1500, 0.9),
    ("refine", 600, 1200, 0.6),
]


def walkthrough_pricing(label):
    return PhasePricing(BASE_PRICE, REFINE_RATIO if label == "refine" else 1.0)


def walkthrough_curves_list():
    return [
        fit_two_point(OperatingPoints(nb, ng, a), walkthrough_pricing(label), label)
        for label, nb, ng, a in WALKTHROUGH_POINTS
    ]


def random_curves(rng, n, a_range=(0.05, 0.95), log_b_range=(1.0, 3.7)):
    a = rng.uniform(*a_range, size=n)
    b = 10 ** rng.uniform(*log_b_range, size=n)
    return [PhaseCurve(float(ai), float(bi), f"p{i}") for i, (ai, bi) in enumerate(zip(a, b))]


def random_budget(rng, curves):
    # b * B spans ~0.1 .. 50 so both starved and saturated phases occur
    median_b = float(np.median([c.rate_b for c in curves]))
    return float(10 ** rng.uniform(-1.0, math.log10(50.0)) / median_b)
