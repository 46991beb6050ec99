"""
Fitting phase curves and splitting a budget
===========================================

A controller names, for every phase of a coding pipeline, how many output
tokens buy a basic answer and how many buy a great one, plus the best
quality the phase can reach.  Two points pin down a saturating curve per
phase; the solver then splits a dollar budget so that every funded phase
ends at the same marginal quality per dollar.
"""

from phasebudget import Objective, PhasePricing, SolveConfig, solve
from phasebudget.estimator import fit_estimate, parse_estimate

estimate = """{
  "plan": {"tokens_basic": 300, "tokens_great": 600, "a": 0.8},
  "decompose": {"tokens_basic": 400, "tokens_great": 800, "a": 0.7},
  "implement": {"tokens_basic": 800, "tokens_great": 1500, "a": 0.9},
  "refine": {"tokens_basic": 600, "tokens_great": 1200, "a": 0.6}
}"""

# Refinement runs on a model 16.7x pricier per output token.
base = PhasePricing(0.6e-6)
pricing = {"plan": base, "decompose": base, "implement": base,
           "refine": PhasePricing(0.6e-6, cost_ratio=16.7)}

curves = fit_estimate(parse_estimate(estimate), pricing)
for c in curves:
    print(f"{c.label:>10}: a = {c.ceiling_a:.2f}  b = {c.rate_b:8.1f} per USD")

###############################################################################
# Half of the unconstrained cost is available.

budget = 0.017951
for objective in (Objective.additive(), Objective.mult_offset()):
    alloc = solve(curves, objective, SolveConfig(budget))
    print(f"\n{objective.kind.value}: lambda* = {alloc.lambda_star:.3f}, value = {alloc.objective_value:.4f}")
    for label, x, share in zip(alloc.labels, alloc.amounts, alloc.fractions()):
        print(f"  {label:>10}: ${x:.6f}  ({100 * share:4.1f}%)")

###############################################################################
# The product objective treats a weak phase as a bottleneck, so it pushes a
# little more money into refinement, the phase with the lowest ceiling.
