"""From leaf concentration constants to root constants, and where the chain breaks.

Run with ``python3 demos/02_bound_constants.py``.
"""

from polyuct import (
    InfeasibleError,
    LayerConstants,
    LayerPropagationError,
    ProblemShape,
    leaf_beta,
    pick_alpha,
    propagate_layers,
    root_constants,
)

xi, eta = 16.0, 0.5
leaf = LayerConstants(leaf_beta(1.0, xi), xi, eta)
print("leaf triple", leaf)

# two arms, one successor each, gap 0.8
shape = ProblemShape(R=1.0, branch=(1, 1), delta_min=0.8)
d = root_constants(leaf, shape, alpha=4.0)
for k, v in d.to_dict().items():
    print(f"  {k:10s} {v:.6g}")

# The bound P(n X_n - n mu >= n**eta'' z) <= beta''/z**xi'' only says
# something once z passes beta''**(1/xi'').
print("informative for z >", d.beta_dd ** (1 / d.xi_dd))

# Branching makes everything larger; sometimes no N_p exists below the cap.
for branch in [(2, 2), (3, 2)]:
    try:
        dd = root_constants(leaf, ProblemShape(1.0, branch, 0.8), 4.0)
        print(branch, "N_p =", dd.Np, "beta'' = %.3g" % dd.beta_dd)
    except LookupError as exc:
        print(branch, "->", exc)

# xi'' = alpha - 1 < xi, so the admissible alpha interval closes after one step.
try:
    propagate_layers(leaf, [shape, shape], [4.0, 4.0])
except LayerPropagationError as exc:
    print("two steps:", exc)
try:
    pick_alpha(d.xi_dd, d.eta_dd)
except InfeasibleError as exc:
    print("next alpha:", exc)
