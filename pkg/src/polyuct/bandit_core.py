"""Arm statistics, transition tables, reward processes and assumption constants.

These are the value types every other module builds on. A bandit arm ``i``
leads to one of ``K_i`` successor states drawn from a fixed probability row;
each successor ``j`` emits rewards from its own bounded (possibly
non-stationary) :class:`RewardProcess`.
"""

import bisect
import itertools
import json
import math
from dataclasses import dataclass

ROW_SUM_TOL = 1e-9

__all__ = [
    "BoundViolation",
    "ArmStats",
    "TransitionTable",
    "AssumptionParams",
    "RewardProcess",
    "update_stats",
    "validate_transition_table",
    "limit_mean",
    "reward_process_from_dict",
    "transition_table_from_json",
]


class BoundViolation(ValueError):
    """A reward fell outside the declared interval ``[-R, R]``."""


@dataclass(slots=True)
class ArmStats:
    """Pull count and reward sum of one arm.

    The mean is derived from ``(reward_sum, pulls)`` on demand so that
    ``pulls * empirical_mean`` reconstructs the sum up to one rounding.
    ``bound`` is the reward bound ``R`` checked on every update.
    """

    pulls: int = 0
    reward_sum: float = 0.0
    bound: float = math.inf

    @property
    def empirical_mean(self):
        """``reward_sum / pulls``; NaN while the arm is unpulled."""
        if self.pulls == 0:
            return math.nan
        return self.reward_sum / self.pulls

    @property
    def is_defined(self):
        return self.pulls > 0

    def update(self, reward):
        if not -self.bound <= reward <= self.bound:
            raise BoundViolation(f"reward {reward!r} outside [-{self.bound}, {self.bound}]")
        self.pulls += 1
        self.reward_sum += reward
        return self


def update_stats(stats, reward):
    """Record one reward in ``stats`` and return it."""
    return stats.update(reward)


@dataclass(frozen=True)
class TransitionTable:
    """Per-arm successor distributions ``rows[i] = (p^i_1, ..., p^i_{K_i})``.

    Construction does not validate; call :func:`validate_transition_table`
    or :meth:`check` before sampling.
    """

    rows: tuple

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(tuple(float(p) for p in row) for row in self.rows))
        cdfs = tuple(tuple(itertools.accumulate(row)) for row in self.rows)
        object.__setattr__(self, "_cdfs", cdfs)

    @property
    def branching(self):
        """``(K_1, ..., K_K)``."""
        return tuple(len(r) for r in self.rows)

    def __len__(self):
        return len(self.rows)

    def check(self):
        errors = validate_transition_table(self)
        if errors:
            raise ValueError("invalid transition table: " + "; ".join(errors))
        return self

    def sample(self, arm, u):
        """Successor index for arm ``arm`` given a uniform draw ``u`` in [0, 1).

        Inverse CDF over the row; the final cell absorbs rounding slack.
        """
        cdf = self._cdfs[arm]
        j = bisect.bisect_right(cdf, u * cdf[-1])
        return min(j, len(cdf) - 1)


def validate_transition_table(table):
    """Return a list of violations, empty when every row is a probability vector."""
    rows = table.rows if isinstance(table, TransitionTable) else table
    errors = []
    if len(rows) == 0:
        errors.append("table has no rows")
    for i, row in enumerate(rows):
        if len(row) == 0:
            errors.append(f"row {i} is empty")
            continue
        bad = [j for j, p in enumerate(row) if not (0.0 <= p <= 1.0)]
        if bad:
            errors.append(f"row {i} has entries outside [0, 1] at {bad}")
        total = math.fsum(row)
        if abs(total - 1.0) > ROW_SUM_TOL:
            errors.append(f"row {i} sums to {total:.12g}")
    return errors


@dataclass(frozen=True)
class AssumptionParams:
    """Concentration constants ``(beta, xi, eta)`` and reward bound ``R``."""

    beta: float
    xi: float
    eta: float
    reward_bound: float = 1.0

    def __post_init__(self):
        problems = []
        if not self.beta > 1:
            problems.append("beta > 1")
        if not self.xi > 0:
            problems.append("xi > 0")
        if not 0.5 <= self.eta < 1:
            problems.append("1/2 <= eta < 1")
        if not self.reward_bound > 0:
            problems.append("R > 0")
        if problems:
            raise ValueError("violated: " + ", ".join(problems))


_KINDS = ("bernoulli", "uniform", "constant", "drift")


@dataclass(frozen=True)
class RewardProcess:
    """A bounded reward sequence attached to one (arm, successor) cell.

    kinds
        ``bernoulli``  ``hi`` with probability ``p``, else ``lo``
        ``uniform``    uniform on ``[lo, hi]``
        ``constant``   always ``c``
        ``drift``      ``c + (start - c) * decay**(s-1) + U(-noise, noise)``
                       at the cell's ``s``-th draw; converges to ``c``

    Every sample is clamped to ``[-R, R]``.
    """

    kind: str
    p: float = 0.5
    lo: float = 0.0
    hi: float = 1.0
    c: float = 0.0
    decay: float = 0.5
    start: float = 0.0
    noise: float = 0.0
    R: float = 1.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown reward process kind {self.kind!r}")
        if not self.R > 0:
            raise ValueError("R must be positive")
        R = self.R
        if self.kind == "bernoulli":
            if not 0 <= self.p <= 1:
                raise ValueError("p must lie in [0, 1]")
            if not -R <= self.lo <= self.hi <= R:
                raise ValueError("need -R <= lo <= hi <= R")
        elif self.kind == "uniform":
            if not -R <= self.lo <= self.hi <= R:
                raise ValueError("need -R <= lo <= hi <= R")
        elif self.kind == "constant":
            if not -R <= self.c <= R:
                raise ValueError("constant outside [-R, R]")
        else:
            if not 0 <= self.decay < 1:
                raise ValueError("decay must lie in [0, 1)")
            if self.noise < 0 or abs(self.c) + self.noise > R:
                raise ValueError("need |c| + noise <= R so the limit is unaffected by clamping")
            if not -R <= self.start <= R:
                raise ValueError("start outside [-R, R]")

    @classmethod
    def constant(cls, c, R=1.0):
        return cls("constant", c=c, R=R)

    @classmethod
    def bernoulli(cls, p, lo=0.0, hi=1.0, R=1.0):
        return cls("bernoulli", p=p, lo=lo, hi=hi, R=R)

    @classmethod
    def uniform(cls, lo, hi, R=1.0):
        return cls("uniform", lo=lo, hi=hi, R=R)

    @classmethod
    def drift(cls, c_limit, decay, start=0.0, noise=0.0, R=1.0):
        return cls("drift", c=c_limit, decay=decay, start=start, noise=noise, R=R)

    def sample(self, count, rng):
        """The ``count``-th draw (1-based) of this cell, using ``rng.random()``."""
        kind = self.kind
        if kind == "constant":
            x = self.c
        elif kind == "bernoulli":
            x = self.hi if rng.random() < self.p else self.lo
        elif kind == "uniform":
            x = self.lo + (self.hi - self.lo) * rng.random()
        else:
            x = self.c + (self.start - self.c) * self.decay ** (count - 1)
            if self.noise:
                x += self.noise * (2.0 * rng.random() - 1.0)
        return min(max(x, -self.R), self.R)

    def to_dict(self):
        keys = {
            "constant": ("c",),
            "bernoulli": ("p", "lo", "hi"),
            "uniform": ("lo", "hi"),
            "drift": ("c", "decay", "start", "noise"),
        }[self.kind]
        return {"kind": self.kind, **{k: getattr(self, k) for k in keys}}


def limit_mean(process):
    """Closed-form limit of the expected empirical mean of ``process``."""
    kind = process.kind
    if kind == "constant":
        return process.c
    if kind == "bernoulli":
        return process.lo + process.p * (process.hi - process.lo)
    if kind == "uniform":
        return 0.5 * (process.lo + process.hi)
    return process.c


def reward_process_from_dict(d, R=1.0):
    """Build a :class:`RewardProcess` from its JSON form.

    ``{"kind": "drift", "c_limit": 0.7, "decay": 0.9}`` and ``{"kind":
    "constant", "c": 0.3}`` are both accepted; ``c_limit`` is an alias of ``c``.
    """
    d = dict(d)
    kind = d.pop("kind")
    if kind == "bernoulli-scaled":
        kind = "bernoulli"
    if "c_limit" in d:
        d["c"] = d.pop("c_limit")
    d.setdefault("R", R)
    return RewardProcess(kind, **d)


def transition_table_from_json(text):
    """Parse ``{"rows": [[...], ...]}`` or a bare list of rows."""
    doc = json.loads(text)
    rows = doc["rows"] if isinstance(doc, dict) else doc
    return TransitionTable(rows)
