"""Two-phase stochastic bandit: UCB picks an arm, then a random transition picks the leaf.

The simulator keeps exact counting records so that the identities
``sum_i T_i(n) = n`` and ``sum_j T^i_j = T_i`` can be audited, and offers
Monte Carlo estimators for the tail probabilities of the root mean.
"""

import functools
import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ._seeding import derive_seed, make_rng, trial_map
from .bandit_core import TransitionTable, limit_mean, reward_process_from_dict
from .constants import lemma_beta_T
from .ucb_policy import TIE_TOL, _argmax_ucb, _time_term

__all__ = [
    "NonUniqueOptimum",
    "MABInstance",
    "ArmMeans",
    "RunTrace",
    "TailEstimate",
    "HoeffdingCheck",
    "CurvePoint",
    "exact_arm_means",
    "run_ucb",
    "estimate_tail",
    "estimate_tails",
    "hoeffding_tail_check",
    "hoeffding_tail_checks",
    "convergence_curve",
    "tail_bound",
]

SELECTION_LOG_CAP = 100_000


class NonUniqueOptimum(ValueError):
    """Two or more arms share the largest limit mean."""


@dataclass(frozen=True)
class MABInstance:
    """``K`` arms; arm ``i`` moves to leaf ``j`` w.p. ``transitions.rows[i][j]``.

    ``leaves[i][j]`` is the reward process of that leaf.
    """

    transitions: TransitionTable
    leaves: tuple
    R: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "leaves", tuple(tuple(row) for row in self.leaves))
        self.transitions.check()
        if len(self.leaves) != len(self.transitions):
            raise ValueError("need one row of leaf processes per arm")
        for i, (probs, procs) in enumerate(zip(self.transitions.rows, self.leaves)):
            if len(probs) != len(procs):
                raise ValueError(f"arm {i}: {len(probs)} transitions but {len(procs)} leaf processes")
            for proc in procs:
                if proc.R > self.R:
                    raise ValueError(f"arm {i}: process bound {proc.R} exceeds instance bound {self.R}")

    @property
    def K(self):
        return len(self.leaves)

    @property
    def branching(self):
        return self.transitions.branching

    @classmethod
    def from_dict(cls, doc):
        R = float(doc.get("R", 1.0))
        arms = doc["arms"]
        table = TransitionTable([arm["transitions"] for arm in arms])
        leaves = [[reward_process_from_dict(p, R) for p in arm["leaves"]] for arm in arms]
        return cls(table, leaves, R)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())

    def to_dict(self):
        return {
            "R": self.R,
            "arms": [
                {"transitions": list(p), "leaves": [proc.to_dict() for proc in procs]}
                for p, procs in zip(self.transitions.rows, self.leaves)
            ],
        }


class ArmMeans(NamedTuple):
    means: tuple
    best: int
    delta_min: float
    best_mean: float


def exact_arm_means(instance):
    """Limit mean of every arm, the optimal arm, its gap to the runner-up, and its mean.

    ``delta_min`` is ``inf`` for a single-arm instance.
    """
    means = tuple(
        math.fsum(p * limit_mean(proc) for p, proc in zip(probs, procs))
        for probs, procs in zip(instance.transitions.rows, instance.leaves)
    )
    best = max(range(len(means)), key=means.__getitem__)
    top = means[best]
    rivals = [m for i, m in enumerate(means) if i != best]
    if any(m >= top - TIE_TOL for m in rivals):
        raise NonUniqueOptimum(f"optimal arm is not unique: means {means}")
    delta = top - max(rivals) if rivals else math.inf
    return ArmMeans(means, best, delta, top)


@dataclass(frozen=True)
class RunTrace:
    """Counting record of one UCB run of ``n`` steps.

    ``cell_pulls[i][j]`` is ``T^i_j(T_i(n))`` and ``cell_sums[i][j]`` the
    reward collected there; ``total`` is the reward sum accumulated in time
    order, independently of the per-cell sums.
    """

    n: int
    arm_pulls: tuple
    cell_pulls: tuple
    cell_sums: tuple
    total: float
    selections: tuple = field(default=None, repr=False)

    @property
    def mean(self):
        """Root empirical mean ``X_n``."""
        return self.total / self.n

    @property
    def cell_means(self):
        return tuple(
            tuple(s / c if c else math.nan for s, c in zip(sums, counts))
            for sums, counts in zip(self.cell_sums, self.cell_pulls)
        )

    def check(self, R=1.0):
        """Violated counting identities (empty when the trace is consistent).

        The sum-form reconstruction ``n * X_n == sum T^i_j * Xbar^i_j`` is
        held to the worst-case rounding of the two summation orders,
        ``2 * n * eps * n * R``.
        """
        out = []
        if sum(self.arm_pulls) != self.n:
            out.append(f"sum of arm pulls {sum(self.arm_pulls)} != n = {self.n}")
        for i, (Ti, cells) in enumerate(zip(self.arm_pulls, self.cell_pulls)):
            if sum(cells) != Ti:
                out.append(f"arm {i}: sum of transition counts {sum(cells)} != T_i = {Ti}")
        recon = math.fsum(
            c * m
            for counts, means in zip(self.cell_pulls, self.cell_means)
            for c, m in zip(counts, means)
            if c
        )
        tol = 2.0 * self.n * np.finfo(float).eps * self.n * R + 1e-300
        if abs(self.n * self.mean - recon) > tol:
            out.append(f"sum-form reconstruction off by {abs(self.n * self.mean - recon):.3g}")
        return out


def _run(instance, n, params, seed, checkpoints=(), log_selections=False):
    """Core loop; returns the trace and the running reward totals at ``checkpoints``."""
    sel_rng = make_rng(seed, 0)
    trans_rng = make_rng(seed, 1)
    reward_rng = make_rng(seed, 2)
    table = instance.transitions
    leaves = instance.leaves
    K = instance.K
    pulls = [0] * K
    sums = [0.0] * K
    cell_pulls = [[0] * len(row) for row in leaves]
    cell_sums = [[0.0] * len(row) for row in leaves]
    eta_m1 = params.eta - 1.0
    total = 0.0
    marks = sorted(set(checkpoints))
    k = 0
    at_marks = []
    log = [] if log_selections else None
    for t in range(1, n + 1):
        i = _argmax_ucb(pulls, sums, _time_term(params, t), eta_m1, sel_rng)
        j = table.sample(i, trans_rng.random())
        cp = cell_pulls[i]
        cp[j] += 1
        x = leaves[i][j].sample(cp[j], reward_rng)
        cell_sums[i][j] += x
        pulls[i] += 1
        sums[i] += x
        total += x
        if log is not None and len(log) < SELECTION_LOG_CAP:
            log.append((i, j))
        while k < len(marks) and marks[k] == t:
            at_marks.append(total)
            k += 1
    trace = RunTrace(
        n=n,
        arm_pulls=tuple(pulls),
        cell_pulls=tuple(map(tuple, cell_pulls)),
        cell_sums=tuple(map(tuple, cell_sums)),
        total=total,
        selections=tuple(log) if log is not None else None,
    )
    return trace, at_marks


def run_ucb(instance, n, params, seed, log_selections=False):
    """Run polynomial-bonus UCB for ``n`` steps and return its :class:`RunTrace`.

    Selection ties, transitions and leaf rewards each draw from their own
    stream derived from ``seed``, so the same seed replays the run exactly.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    return _run(instance, n, params, seed, log_selections=log_selections)[0]


def _totals_at(seed, instance, params, ns):
    return _run(instance, max(ns), params, seed, checkpoints=ns)[1]


def _trial_totals(instance, params, ns, trials, seed, workers):
    """Array of shape ``(trials, len(ns))`` with the reward total after ``ns[k]`` steps.

    A run's first ``n`` steps do not depend on its length, so one run per
    trial serves every ``n`` in the grid.
    """
    ns = sorted(set(int(n) for n in ns))
    seeds = [derive_seed(seed, k) for k in range(trials)]
    fn = functools.partial(_totals_at, instance=instance, params=params, ns=ns)
    return ns, np.array(trial_map(fn, seeds, workers), dtype=float).reshape(trials, len(ns))


def tail_bound(root, z):
    """``(min(1, beta''/z**xi''), vacuous)`` for root constants ``root``."""
    log_b = math.log(root.beta_dd) - root.xi_dd * math.log(z)
    return (1.0, True) if log_b >= 0 else (math.exp(log_b), False)


def _binomial_slack(freq, trials, k=3.0):
    return k * math.sqrt(freq * (1.0 - freq) / trials)


@dataclass(frozen=True)
class TailEstimate:
    """Empirical frequencies of both deviation events at one ``(n, z)`` cell."""

    z: float
    n: int
    trials: int
    upper_freq: float
    lower_freq: float
    bound: float
    vacuous: bool

    def slack(self, freq, k=3.0):
        return _binomial_slack(freq, self.trials, k)

    def within_bound(self, k=3.0):
        """Both frequencies lie below ``bound`` plus ``k`` binomial standard errors."""
        return all(f <= self.bound + self.slack(f, k) for f in (self.upper_freq, self.lower_freq))

    def interval(self, freq, level=0.95):
        """Wilson score interval for a frequency observed over ``trials`` runs."""
        return _wilson(freq, self.trials, level)


def _wilson(freq, trials, level=0.95):
    from scipy.stats import norm

    q = norm.ppf(0.5 + level / 2)
    denom = 1 + q * q / trials
    centre = (freq + q * q / (2 * trials)) / denom
    half = q * math.sqrt(freq * (1 - freq) / trials + q * q / (4 * trials * trials)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def estimate_tails(instance, ns, zs, root, params, trials, seed, workers=1):
    """Tail frequencies of ``n X_n - n mu*`` beyond ``+-n**eta'' z`` over an ``(n, z)`` grid.

    ``mu*`` is the exact optimal arm mean. All cells share the same seeded
    runs, so frequencies are nonincreasing in ``z`` by construction of the
    events.
    """
    if any(z < 1 for z in zs):
        raise ValueError("z must be >= 1")
    mu = exact_arm_means(instance).best_mean
    ns, totals = _trial_totals(instance, params, ns, trials, seed, workers)
    out = []
    for col, n in enumerate(ns):
        dev = totals[:, col] - n * mu
        scale = n**root.eta_dd
        for z in zs:
            bound, vacuous = tail_bound(root, z)
            out.append(
                TailEstimate(
                    z=float(z),
                    n=n,
                    trials=trials,
                    upper_freq=float(np.mean(dev >= scale * z)),
                    lower_freq=float(np.mean(dev <= -scale * z)),
                    bound=bound,
                    vacuous=vacuous,
                )
            )
    return out


def estimate_tail(instance, n, z, root, params, trials, seed, workers=1):
    """Single-cell version of :func:`estimate_tails`."""
    return estimate_tails(instance, [n], [z], root, params, trials, seed, workers)[0]


class HoeffdingCheck(NamedTuple):
    z: float
    upper_freq: float
    lower_freq: float
    bound: float
    vacuous: bool

    @property
    def empirical_freq(self):
        return self.upper_freq


def hoeffding_tail_checks(p, n, zs, eta, xi, trials, seed):
    """Transition-count deviations ``T_j(n) - n p`` against ``beta_T / z**xi``.

    ``T_j(n)`` is simulated as the number of successes among ``n`` seeded
    Bernoulli(``p``) draws; all ``z`` share the same draws.
    """
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    if any(z < 1 for z in zs):
        raise ValueError("z must be >= 1")
    rng = np.random.default_rng(derive_seed(seed, 0))
    counts = np.empty(trials, dtype=np.int64)
    chunk = max(1, 4_000_000 // max(n, 1))
    for start in range(0, trials, chunk):
        stop = min(trials, start + chunk)
        counts[start:stop] = (rng.random((stop - start, n)) < p).sum(axis=1)
    dev = counts - n * p
    beta_T = lemma_beta_T(xi)
    out = []
    for z in zs:
        thresh = n**eta * z
        raw = beta_T / z**xi
        out.append(
            HoeffdingCheck(
                z=float(z),
                upper_freq=float(np.mean(dev >= thresh)),
                lower_freq=float(np.mean(dev <= -thresh)),
                bound=min(1.0, raw),
                vacuous=raw >= 1.0,
            )
        )
    return out


def hoeffding_tail_check(p, n, z, eta, xi, trials, seed):
    return hoeffding_tail_checks(p, n, [z], eta, xi, trials, seed)[0]


class CurvePoint(NamedTuple):
    n: int
    mean: float
    std: float


def convergence_curve(instance, params, n_grid, trials, seed, workers=1):
    """Monte Carlo mean and spread of the root mean ``X_n`` at each ``n`` in ``n_grid``."""
    if list(n_grid) != sorted(set(n_grid)):
        raise ValueError("n_grid must be strictly increasing")
    ns, totals = _trial_totals(instance, params, n_grid, trials, seed, workers)
    means = totals / np.asarray(ns, dtype=float)
    ddof = 1 if trials > 1 else 0
    return [
        CurvePoint(n, float(np.mean(means[:, k])), float(np.std(means[:, k], ddof=ddof)))
        for k, n in enumerate(ns)
    ]
