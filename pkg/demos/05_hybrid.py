"""
Re-solving after partial execution
==================================

Run the first phases, see what they really cost, then re-solve the rest on
what is left.  If spend matches the plan and the curves have not changed,
re-solving reproduces the original plan exactly: the tail of an optimal
allocation is optimal for the leftover budget.  Only surprises move money.
"""

import numpy as np

from phasebudget import Objective
from phasebudget.curves import PhasePricing
from phasebudget.estimator import fit_estimate, stub_estimate
from phasebudget.simulator import SyntheticPipeline, hybrid_run
from phasebudget.strategies import parse_strategy

labels = ["plan", "decompose", "implement", "refine"]
pricing = {label: PhasePricing(0.6e-6, 16.7 if label == "refine" else 1.0) for label in labels}
pipeline = SyntheticPipeline(tuple(fit_estimate(stub_estimate(labels, 7), pricing)),
                             Objective.additive(), reference_cost=0.04)
zebra = parse_strategy("zebra-additive")

np.set_printoptions(precision=6, suppress=True)
for spend in ("exact", 0.8, 1.2):
    record = hybrid_run(pipeline, zebra, alpha=0.5, split_after=2, spend_model=spend)
    print(f"spend={spend!s:>5}: one-shot {record.one_shot}  hybrid {record.amounts}  "
          f"quality {record.one_shot_quality:.4f} -> {record.quality:.4f}")

###############################################################################
# A fresh, independently noisy estimate of the remaining phases changes the
# tail even when spend was exact.

record = hybrid_run(pipeline, zebra, 0.5, 2, sigma=0.3, seed=11, renoise=True)
print(f"re-estimated: {record.amounts}  quality {record.quality:.4f}")
