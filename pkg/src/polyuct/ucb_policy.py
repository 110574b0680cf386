"""Polynomial-bonus UCB selection.

An arm pulled ``s`` times at time ``t`` scores its empirical mean plus

    B(t, s) = beta**(1/xi) * t**(alpha/xi) * s**(eta - 1),

with ``B(t, 0) = inf`` so that every arm is tried once before any is
repeated. Time is counted from ``t = 1`` at the very first selection, i.e.
``t = 1 + total pulls``.
"""

import math
from dataclasses import dataclass

__all__ = [
    "TIE_TOL",
    "ExplorationParams",
    "InvalidParameters",
    "exploration_bonus",
    "select_arm",
    "validate_params",
    "APPENDIX_PARAMS",
]

TIE_TOL = 1e-12


class InvalidParameters(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("violated: " + ", ".join(self.violations))


@dataclass(frozen=True)
class ExplorationParams:
    """The four constants of the polynomial bonus.

    Only ``scale = beta**(1/xi)``, ``rate = alpha/xi`` and ``eta`` enter the
    bonus itself; :meth:`from_ratios` builds parameters from those directly.
    """

    alpha: float
    beta: float
    xi: float
    eta: float

    @classmethod
    def from_ratios(cls, scale, rate, eta, xi=4.0):
        """Parameters with ``beta**(1/xi) == scale`` and ``alpha/xi == rate``."""
        return cls(alpha=rate * xi, beta=scale**xi, xi=xi, eta=eta)

    @property
    def scale(self):
        return self.beta ** (1.0 / self.xi)

    @property
    def rate(self):
        return self.alpha / self.xi

    def validate(self, mode="strict"):
        violations = validate_params(self, mode)
        if violations:
            raise InvalidParameters(violations)
        return self


# eta = 1/2, alpha/xi = 1/4 and beta**(1/xi) = 2, so B(t, s) = 2 * sqrt(sqrt(t) / s)
APPENDIX_PARAMS = ExplorationParams(alpha=1.0, beta=16.0, xi=4.0, eta=0.5)


def validate_params(params, mode="strict"):
    """Names of the violated constraints; an empty list means the parameters are usable.

    ``strict`` enforces the admissible range under which the concentration
    guarantee holds. ``practical`` only asks for a finite positive bonus
    scale and growth rate, which is what the planner needs to run.
    """
    a, b, x, e = params.alpha, params.beta, params.xi, params.eta
    out = []
    if mode == "strict":
        if not x > 0:
            out.append("xi > 0")
        if not b > 1:
            out.append("beta > 1")
        if not 0.5 <= e < 1:
            out.append("1/2 <= eta < 1")
        if not a > 2:
            out.append("alpha > 2")
        if not x * e * (1 - e) <= a:
            out.append("xi*eta*(1-eta) <= alpha")
        if not a < x * (1 - e):
            out.append("alpha < xi*(1-eta)")
    elif mode == "practical":
        if not (x > 0 and b > 0):
            out.append("beta**(1/xi) finite and positive")
        else:
            scale = math.exp(math.log(b) / x)
            if not (0 < scale < math.inf):
                out.append("beta**(1/xi) finite and positive")
        if not (x > 0 and 0 < a / x < math.inf):
            out.append("alpha/xi finite and positive")
        if not (math.isfinite(e) and e < 1):
            out.append("eta < 1")
    else:
        raise ValueError(f"unknown validation mode {mode!r}")
    return out


def _time_term(params, t):
    """``beta**(1/xi) * t**(alpha/xi)``, evaluated in log space when it would overflow."""
    try:
        v = params.beta ** (1.0 / params.xi) * t**params.rate
    except OverflowError:
        v = math.inf
    if v == math.inf:
        log_v = math.log(params.beta) / params.xi + params.rate * math.log(t)
        return math.exp(log_v) if log_v < 709.0 else math.inf
    return v


def exploration_bonus(t, s, params):
    """``beta**(1/xi) * t**(alpha/xi) * s**(eta-1)``; ``inf`` for ``s == 0``."""
    if t < 1:
        raise ValueError("t must be >= 1")
    if s < 0:
        raise ValueError("s must be >= 0")
    if s == 0:
        return math.inf
    return _time_term(params, t) * s ** (params.eta - 1.0)


def _argmax_ucb(pulls, sums, time_term, eta_m1, rng):
    """Index maximising ``sums[i]/pulls[i] + time_term * pulls[i]**eta_m1``.

    Unpulled arms score ``inf``. Scores within ``TIE_TOL`` of the best are
    tied and one is drawn uniformly with ``rng.random()``.
    """
    scores = [
        math.inf if s == 0 else sums[i] / s + time_term * s**eta_m1
        for i, s in enumerate(pulls)
    ]
    best = max(scores)
    tied = [i for i, v in enumerate(scores) if v >= best - TIE_TOL]
    if len(tied) == 1:
        return tied[0]
    return tied[int(rng.random() * len(tied))]


def select_arm(stats, t, params, rng):
    """Pick the arm with the largest upper confidence bound at time ``t``.

    ``stats`` is a sequence of :class:`~polyuct.bandit_core.ArmStats`; ``rng``
    is any object with a ``random()`` method (``random.Random`` is used
    throughout the package).
    """
    if len(stats) == 0:
        raise ValueError("select_arm needs at least one arm")
    if t < 1:
        raise ValueError("t must be >= 1")
    time_term = _time_term(params, t)
    pulls = [a.pulls for a in stats]
    sums = [a.reward_sum for a in stats]
    return _argmax_ucb(pulls, sums, time_term, params.eta - 1.0, rng)
