"""Small MDPs for the planner: slippery FrozenLake, a deterministic chain, explicit tables.

Every environment here exposes the interface the planner relies on::

    start_state, gamma, horizon, reward_bound
    actions(state)                 -> tuple of actions, empty for terminal states
    sample_step(state, action, rng) -> (next_state, reward, terminal)

and additionally ``states`` and ``transitions(state, action)``, which is what
:func:`enumerate_transitions` and :func:`value_iteration` need.
"""

import bisect
import itertools
from dataclasses import dataclass
from typing import NamedTuple, Protocol

__all__ = [
    "LEFT",
    "DOWN",
    "RIGHT",
    "UP",
    "MDP",
    "UnsupportedEnvironment",
    "GridSpec",
    "FROZEN_LAKE_4X4",
    "FrozenLake",
    "ChainMDP",
    "TabularMDP",
    "frozen_lake_4x4",
    "enumerate_transitions",
    "value_iteration",
    "ValueIterationResult",
]

LEFT, DOWN, RIGHT, UP = 0, 1, 2, 3
_DELTAS = {LEFT: (0, -1), DOWN: (1, 0), RIGHT: (0, 1), UP: (-1, 0)}


class MDP(Protocol):
    start_state: object
    gamma: float
    horizon: int
    reward_bound: float

    def actions(self, state): ...

    def sample_step(self, state, action, rng): ...


class UnsupportedEnvironment(TypeError):
    """The environment cannot enumerate its transitions."""


@dataclass(frozen=True)
class GridSpec:
    """Rectangular map over ``S`` (start), ``F`` (frozen), ``H`` (hole), ``G`` (goal)."""

    rows: tuple

    def __post_init__(self):
        rows = tuple(str(r) for r in self.rows)
        object.__setattr__(self, "rows", rows)
        if not rows or len({len(r) for r in rows}) != 1 or not rows[0]:
            raise ValueError("grid must be a non-empty rectangle")
        text = "".join(rows)
        if set(text) - set("SFHG"):
            raise ValueError(f"unexpected characters {sorted(set(text) - set('SFHG'))}")
        if text.count("S") != 1:
            raise ValueError("grid needs exactly one S")
        if "G" not in text:
            raise ValueError("grid needs at least one G")

    @classmethod
    def from_text(cls, text):
        return cls(tuple(line.strip() for line in text.splitlines() if line.strip()))

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_text(fh.read())

    @property
    def nrow(self):
        return len(self.rows)

    @property
    def ncol(self):
        return len(self.rows[0])

    def cell(self, s):
        r, c = divmod(s, self.ncol)
        return self.rows[r][c]


# start top-left, goal bottom-right, holes at row-major cells 5, 7, 11, 12
FROZEN_LAKE_4X4 = GridSpec(("SFFF", "FHFH", "FFFH", "HFFG"))


class _Explicit:
    """Shared pieces of environments with enumerable transitions."""

    def transitions(self, state, action):
        merged = {}
        for p, nxt, r, term in self._raw_transitions(state, action):
            key = (nxt, r, term)
            merged[key] = merged.get(key, 0.0) + p
        return [(p, nxt, r, term) for (nxt, r, term), p in merged.items()]


class FrozenLake(_Explicit):
    """Slippery gridworld: the intended move and both perpendicular moves, each w.p. 1/3.

    Moves off the grid leave the agent in place. Entering ``G`` pays 1 and
    ends the episode; entering ``H`` ends it with 0. States are row-major
    cell indices and actions are ``LEFT, DOWN, RIGHT, UP = 0, 1, 2, 3``.
    """

    def __init__(self, grid=FROZEN_LAKE_4X4, gamma=0.99, horizon=400, slippery=True):
        self.grid = grid
        self.gamma = gamma
        self.horizon = horizon
        self.reward_bound = 1.0
        self.slippery = slippery
        n = grid.nrow * grid.ncol
        self.states = tuple(range(n))
        self.start_state = "".join(grid.rows).index("S")
        self._terminal = tuple(grid.cell(s) in "HG" for s in self.states)
        self._all_actions = (LEFT, DOWN, RIGHT, UP)
        # _outcomes[s][a]: equally likely (next, reward, terminal) triples
        self._outcomes = tuple(
            tuple(tuple(self._move_result(s, d) for d in self._directions(a)) for a in self._all_actions)
            for s in self.states
        )

    def _directions(self, a):
        return ((a - 1) % 4, a, (a + 1) % 4) if self.slippery else (a,)

    def _move_result(self, s, direction):
        r, c = divmod(s, self.grid.ncol)
        dr, dc = _DELTAS[direction]
        r = min(max(r + dr, 0), self.grid.nrow - 1)
        c = min(max(c + dc, 0), self.grid.ncol - 1)
        nxt = r * self.grid.ncol + c
        kind = self.grid.cell(nxt)
        return nxt, 1.0 if kind == "G" else 0.0, kind in "HG"

    def is_terminal(self, s):
        return self._terminal[s]

    def actions(self, s):
        return () if self._terminal[s] else self._all_actions

    def sample_step(self, s, a, rng):
        outs = self._outcomes[s][a]
        return outs[int(rng.random() * len(outs))]

    def _raw_transitions(self, s, a):
        outs = self._outcomes[s][a]
        return [(1.0 / len(outs), *o) for o in outs]


def frozen_lake_4x4(gamma=0.99, horizon=400):
    """The slippery 4x4 map with a 400-step allowance and discount 0.99."""
    return FrozenLake(FROZEN_LAKE_4X4, gamma=gamma, horizon=horizon)


class ChainMDP(_Explicit):
    """``L`` states in a line, start at 0; ``right`` (1) advances, ``left`` (0) retreats.

    Entering the last state pays 1 and terminates, so the optimal value of
    the start is ``gamma**(L-2)``. ``left`` at state 0 stays put.
    """

    def __init__(self, length=5, gamma=0.99, horizon=50):
        if length < 2:
            raise ValueError("chain needs at least two states")
        self.length = length
        self.gamma = gamma
        self.horizon = horizon
        self.reward_bound = 1.0
        self.states = tuple(range(length))
        self.start_state = 0

    def is_terminal(self, s):
        return s == self.length - 1

    def actions(self, s):
        return () if s == self.length - 1 else (0, 1)

    def sample_step(self, s, a, rng=None):
        nxt = s + 1 if a == 1 else max(s - 1, 0)
        done = nxt == self.length - 1
        return nxt, 1.0 if done else 0.0, done

    def _raw_transitions(self, s, a):
        return [(1.0, *self.sample_step(s, a))]


class TabularMDP(_Explicit):
    """An MDP given as ``{state: {action: [(prob, next, reward, terminal), ...]}}``.

    States missing from the mapping, or mapped to no actions, are terminal.
    """

    def __init__(self, table, start_state, gamma=0.99, horizon=100, reward_bound=None):
        self.table = {s: {a: list(outs) for a, outs in acts.items()} for s, acts in table.items()}
        self.start_state = start_state
        self.gamma = gamma
        self.horizon = horizon
        reached = {o[1] for acts in self.table.values() for outs in acts.values() for o in outs}
        self.states = tuple(dict.fromkeys([*self.table, *reached]))
        rewards = [abs(o[2]) for acts in self.table.values() for outs in acts.values() for o in outs]
        self.reward_bound = reward_bound if reward_bound is not None else max(rewards, default=0.0)
        self._cdf = {
            (s, a): list(itertools.accumulate(o[0] for o in outs))
            for s, acts in self.table.items()
            for a, outs in acts.items()
        }

    def is_terminal(self, s):
        return not self.table.get(s)

    def actions(self, s):
        return tuple(self.table.get(s, ()))

    def sample_step(self, s, a, rng):
        outs = self.table[s][a]
        cdf = self._cdf[(s, a)]
        j = min(bisect.bisect_right(cdf, rng.random() * cdf[-1]), len(outs) - 1)
        _, nxt, r, term = outs[j]
        return nxt, r, term

    def _raw_transitions(self, s, a):
        return list(self.table[s][a])


def enumerate_transitions(mdp):
    """``{state: {action: [(prob, next, reward, terminal), ...]}}`` for every state.

    Terminal states map to an empty action dict. Identical outcomes (for
    example two slips into the same wall) are merged with summed probability.
    """
    if not hasattr(mdp, "transitions") or not hasattr(mdp, "states"):
        raise UnsupportedEnvironment(f"{type(mdp).__name__} cannot enumerate its transitions")
    return {s: {a: mdp.transitions(s, a) for a in mdp.actions(s)} for s in mdp.states}


class ValueIterationResult(NamedTuple):
    V: dict
    Q: dict
    residual: float
    iterations: int


def value_iteration(table, gamma, tol=1e-12, max_iter=1_000_000):
    """Optimal values of an enumerated MDP by repeated Bellman optimality backups.

    Stops once the sup-norm change between sweeps is at most ``tol``; the
    returned ``V`` is the last sweep, so its Bellman residual is at most
    ``gamma * tol``. ``Q[s][a] = sum p (r + gamma V[next] [not terminal])``.
    """
    if not 0 < gamma < 1:
        raise ValueError("value iteration needs 0 < gamma < 1")
    if not tol > 0:
        raise ValueError("tol must be positive")
    states = list(table)
    V = {s: 0.0 for s in states}

    def backup(V):
        Q = {
            s: {
                a: sum(p * (r + (0.0 if term else gamma * V.get(nxt, 0.0))) for p, nxt, r, term in outs)
                for a, outs in acts.items()
            }
            for s, acts in table.items()
        }
        return {s: max(Q[s].values()) if Q[s] else 0.0 for s in states}, Q

    for it in range(1, max_iter + 1):
        new_V, Q = backup(V)
        delta = max((abs(new_V[s] - V[s]) for s in states), default=0.0)
        V = new_V
        if delta <= tol:
            break
    else:
        raise RuntimeError(f"value iteration did not converge in {max_iter} sweeps")
    residual_V, Q = backup(V)
    residual = max((abs(residual_V[s] - V[s]) for s in states), default=0.0)
    return ValueIterationResult(V, Q, residual, it)
