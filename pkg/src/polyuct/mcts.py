"""Closed-loop Monte Carlo tree search with the polynomial UCB bonus at every node.

Each node is a bandit over the actions available in its state. Choosing an
action samples the environment; the realised next state selects (or
creates) the child, so chance outcomes are represented by distinct children
rather than by explicit chance nodes.

Conventions:

* A node's creation counts as one visit with no action pulled, so
  ``visits == 1 + sum(pulls)`` and the bonus time is ``t = visits``.
* The first arrival at a new child expands it and runs one uniform-random
  rollout from it; the child starts with empty action statistics.
* Returns are discounted per step from the node that records them, so the
  root sees every reward discounted by ``gamma**depth``.
"""

import math
from dataclasses import dataclass, field
from typing import NamedTuple

from ._seeding import as_rng, make_rng
from .bandit_core import ArmStats
from .ucb_policy import APPENDIX_PARAMS, ExplorationParams, _argmax_ucb, validate_params

__all__ = [
    "SearchConfig",
    "TreeNode",
    "SearchResult",
    "EpisodeResult",
    "new_tree",
    "simulate_once",
    "rollout",
    "search",
    "run_episode",
]


@dataclass(frozen=True)
class SearchConfig:
    """Planner settings.

    ``simulations`` is the number of root-to-leaf passes per decision,
    ``max_depth`` the planning horizon counted in environment steps from the
    root. ``rollout_depth`` optionally caps rollouts below the remaining
    horizon. ``recommend`` is ``"mean"`` (highest empirical mean) or
    ``"visits"`` (most pulls). ``check_bounds`` asserts that every backed-up
    return respects the discounted reward bound.
    """

    simulations: int
    max_depth: int
    params: ExplorationParams = field(default=APPENDIX_PARAMS)
    rollout_depth: int = None
    recommend: str = "mean"
    check_bounds: bool = False

    def __post_init__(self):
        if self.simulations < 1:
            raise ValueError("simulations must be >= 1")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.recommend not in ("mean", "visits"):
            raise ValueError("recommend must be 'mean' or 'visits'")
        problems = validate_params(self.params, "practical")
        if problems:
            raise ValueError("exploration parameters unusable: " + ", ".join(problems))


class TreeNode:
    """One state in the search tree with per-action pull counts and return sums."""

    __slots__ = ("state", "actions", "visits", "pulls", "sums", "children")

    def __init__(self, state, actions):
        self.state = state
        self.actions = tuple(actions)
        self.visits = 1
        self.pulls = [0] * len(self.actions)
        self.sums = [0.0] * len(self.actions)
        # children[k] maps a sampled next state to its node, for action k
        self.children = [{} for _ in self.actions]

    @property
    def stats(self):
        return [ArmStats(p, s) for p, s in zip(self.pulls, self.sums)]

    def means(self):
        return [s / p if p else math.nan for p, s in zip(self.pulls, self.sums)]

    def iter_nodes(self):
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            for kids in node.children:
                stack.extend(kids.values())

    def __repr__(self):
        return f"TreeNode(state={self.state!r}, visits={self.visits}, pulls={self.pulls})"


def new_tree(mdp, state):
    actions = mdp.actions(state)
    if not actions:
        raise ValueError(f"state {state!r} is terminal or has no actions")
    return TreeNode(state, actions)


def rollout(mdp, state, depth_budget, rng):
    """Discounted return of uniformly random actions for at most ``depth_budget`` steps."""
    gamma = mdp.gamma
    step = mdp.sample_step
    actions_of = mdp.actions
    ret = 0.0
    disc = 1.0
    for _ in range(depth_budget):
        acts = actions_of(state)
        if not acts:
            break
        state, r, done = step(state, acts[int(rng.random() * len(acts))], rng)
        ret += disc * r
        disc *= gamma
        if done:
            break
    return ret


def _return_bound(R, gamma, H):
    return R * H if gamma == 1 else R * (1.0 - gamma**H) / (1.0 - gamma)


def simulate_once(tree, mdp, config, rng, max_depth=None):
    """One selection / expansion / rollout / backup pass from ``tree``; returns the root return."""
    H = config.max_depth if max_depth is None else max_depth
    params = config.params
    scale = params.scale
    rate = params.rate
    eta_m1 = params.eta - 1.0
    gamma = mdp.gamma
    step = mdp.sample_step

    node = tree
    path = []
    leaf_value = 0.0
    depth = 0
    while depth < H and node.actions:
        k = _argmax_ucb(node.pulls, node.sums, scale * node.visits**rate, eta_m1, rng)
        nxt, r, done = step(node.state, node.actions[k], rng)
        path.append((node, k, r))
        depth += 1
        if done:
            break
        kids = node.children[k]
        child = kids.get(nxt)
        if child is None:
            kids[nxt] = TreeNode(nxt, mdp.actions(nxt))
            budget = H - depth
            if config.rollout_depth is not None:
                budget = min(budget, config.rollout_depth)
            leaf_value = rollout(mdp, nxt, budget, rng)
            break
        node = child

    g = leaf_value
    for node, k, r in reversed(path):
        g = r + gamma * g
        node.pulls[k] += 1
        node.sums[k] += g
        node.visits += 1
    if config.check_bounds:
        bound = _return_bound(mdp.reward_bound, gamma, H)
        assert abs(g) <= bound + 1e-9, f"backed-up return {g} exceeds {bound}"
    return g


class SearchResult(NamedTuple):
    action: object
    stats: list
    root: TreeNode

    @property
    def value(self):
        """Empirical mean of the recommended action."""
        k = self.root.actions.index(self.action)
        return self.stats[k].empirical_mean


def _recommend(root, rule, rng):
    if rule == "visits":
        scores = [float(p) for p in root.pulls]
    else:
        scores = [m if p else -math.inf for m, p in zip(root.means(), root.pulls)]
    best = max(scores)
    tied = [k for k, v in enumerate(scores) if v >= best - 1e-12]
    k = tied[0] if len(tied) == 1 else tied[int(rng.random() * len(tied))]
    return root.actions[k]


def search(mdp, root_state, config, seed, max_depth=None):
    """Run ``config.simulations`` passes from ``root_state`` on a fresh tree.

    ``seed`` is an integer or a ``random.Random``. Returns the recommended
    action, the root's per-action :class:`~polyuct.bandit_core.ArmStats` and
    the tree itself.
    """
    rng = as_rng(seed)
    root = new_tree(mdp, root_state)
    for _ in range(config.simulations):
        simulate_once(root, mdp, config, rng, max_depth)
    return SearchResult(_recommend(root, config.recommend, rng), root.stats, root)


class EpisodeResult(NamedTuple):
    ret: float
    steps: int


def run_episode(mdp, config, episode_seed):
    """Plan with a fresh tree before every real step; stop at a terminal state or ``mdp.horizon``.

    The planning horizon at step ``k`` is ``min(config.max_depth, horizon - k)``.
    Hitting the step allowance ends the episode without any extra reward.
    """
    plan_rng = make_rng(episode_seed, 0)
    env_rng = make_rng(episode_seed, 1)
    T = mdp.horizon
    state = mdp.start_state
    ret = 0.0
    disc = 1.0
    steps = 0
    while steps < T and mdp.actions(state):
        H = min(config.max_depth, T - steps)
        action = search(mdp, state, config, plan_rng, max_depth=H).action
        state, r, done = mdp.sample_step(state, action, env_rng)
        ret += disc * r
        disc *= mdp.gamma
        steps += 1
        if done:
            break
    return EpisodeResult(ret, steps)
