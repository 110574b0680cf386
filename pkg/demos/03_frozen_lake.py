"""Planning on the slippery 4x4 FrozenLake with per-step tree search.

Run with ``python3 demos/03_frozen_lake.py`` (about a minute).
"""

import numpy as np

from polyuct import SearchConfig, derive_seed, enumerate_transitions, frozen_lake_4x4, run_episode, search, value_iteration

lake = frozen_lake_4x4()
print("\n".join(lake.grid.rows))

# Ground truth from value iteration
vi = value_iteration(enumerate_transitions(lake), lake.gamma)
V = np.array([vi.V[s] for s in lake.states]).reshape(4, 4)
print("\nV*:\n", V.round(3))
q14 = vi.Q[14]
print("Q*(14, .) =", {a: round(v, 4) for a, v in q14.items()})

# One search from state 14 (left of the goal): the root means sit below Q*
# because the tree still explores below the root.
res = search(lake, 14, SearchConfig(2**12, lake.horizon), seed=0)
print("\nrecommended", res.action, "root means", np.round(res.root.means(), 4))
best = max(q14, key=q14.get)
print("regret of action", best, "=", round(q14[best] - res.root.means()[best], 4))

# Whole episodes: more simulations per step, better returns.
for n in (2**8, 2**10):
    cfg = SearchConfig(n, lake.horizon)
    rets = [run_episode(lake, cfg, derive_seed(0, k)).ret for k in range(10)]
    print(f"n={n:5d}  mean discounted return over 10 episodes = {np.mean(rets):.3f}")
