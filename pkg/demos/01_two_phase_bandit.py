"""Polynomial-bonus UCB on a bandit whose arms lead to random successor cells.

Run with ``python3 demos/01_two_phase_bandit.py``.
"""

import numpy as np

from polyuct import APPENDIX_PARAMS, MABInstance, convergence_curve, exact_arm_means, exploration_bonus, run_ucb

# The bonus 2*sqrt(sqrt(t)/s): grows slowly with time, shrinks with pulls.
for t in (1, 16, 256, 4096):
    print(f"t={t:5d}", "  ".join(f"s={s}: {exploration_bonus(t, s, APPENDIX_PARAMS):.3f}" for s in (1, 4, 16)))

# Two arms. Pulling an arm first flips a fair coin for the successor cell,
# then that cell pays a reward. Arm 0 averages 0.9, arm 1 averages 0.1.
inst = MABInstance.load("demos/two_arm.json")
means = exact_arm_means(inst)
print("\nlimit means", means.means, "gap", means.delta_min)

trace = run_ucb(inst, 5000, APPENDIX_PARAMS, seed=0)
print("pulls per arm", trace.arm_pulls)
print("pulls per cell", trace.cell_pulls)
print("root mean X_n = %.4f" % trace.mean)
print("bookkeeping problems:", trace.check(inst.R) or "none")

# The root mean creeps up towards 0.9 and its spread narrows.
curve = convergence_curve(inst, APPENDIX_PARAMS, [100, 1000, 10000], trials=40, seed=1)
for pt in curve:
    print(f"n={pt.n:6d}  mean={pt.mean:.4f}  std={pt.std:.4f}  gap={means.best_mean - pt.mean:.4f}")

# Cell frequencies approach the transition probabilities.
freq = np.array(trace.cell_pulls[0]) / trace.arm_pulls[0]
print("arm 0 cell frequencies", freq.round(3))
