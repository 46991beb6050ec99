"""
When a phase gets nothing
=========================

Under the additive objective a phase is starved once the shadow price
exceeds its opening slope ``a * b``.  The product objective divides that
slope by the pass-through quality ``1 - a``, so the same phase survives to
higher prices, and a phase with ceiling 1 is never starved at all.
"""

import numpy as np

from phasebudget import Objective, PhaseCurve, SolveConfig, solve, starvation_threshold

steep = PhaseCurve(0.9, 500.0, "steep")
flat = PhaseCurve(0.3, 40.0, "flat")
curves = [steep, flat]

for objective in (Objective.additive(), Objective.mult_offset()):
    print(f"{objective.kind.value}: flat phase starves above lambda = "
          f"{starvation_threshold(flat, objective):.2f}")

###############################################################################
# Sweep the budget and watch the flat phase come online.

print("\n  budget    additive(flat)  mult-offset(flat)")
for budget in np.geomspace(1e-3, 0.2, 8):
    add = solve(curves, Objective.additive(), SolveConfig(budget)).amounts[1]
    mult = solve(curves, Objective.mult_offset(), SolveConfig(budget)).amounts[1]
    print(f"  {budget:.4f}  {add:14.6f}  {mult:17.6f}")
