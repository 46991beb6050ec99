"""
How much do estimation errors cost?
===================================

Strategies only see noisy copies of the true curves: each ``a`` and ``b``
is scaled by ``1 + N(0, sigma)``.  Quality is always scored on the truth.
On a refine-heavy pipeline the optimal split is far from uniform, so even
badly estimated curves point the money in roughly the right direction.
"""

from phasebudget import Objective
from phasebudget.estimator import NoiseSpec, fit_estimate, stub_estimate
from phasebudget.curves import PhasePricing
from phasebudget.simulator import ExperimentConfig, SyntheticPipeline, nb_reference, sweep
from phasebudget.strategies import FIXED_AVERAGE_4, StrategySpec, parse_strategy

labels = ["plan", "decompose", "implement", "refine"]
pricing = {label: PhasePricing(0.6e-6, 16.7 if label == "refine" else 1.0) for label in labels}
curves = fit_estimate(stub_estimate(labels, seed=3), pricing)
pipeline = SyntheticPipeline(tuple(curves), Objective.additive(), reference_cost=0.04, name="stub")
print(f"no-budget reference quality: {nb_reference(pipeline):.4f}")

strategies = (parse_strategy("zebra-additive"), StrategySpec.uniform(),
              StrategySpec.fixed_ratio(FIXED_AVERAGE_4, "fixed-average"))

for sigma in (0.0, 0.1, 0.3, 0.5):
    report = sweep(pipeline, ExperimentConfig(strategies, alphas=(0.5,), runs=100,
                                              noise=NoiseSpec(sigma, 1)))
    row = "  ".join(f"{c.strategy}={c.retention_ratio_of_means:.3f}" for c in report.cells)
    print(f"sigma={sigma:.1f}: {row}")
