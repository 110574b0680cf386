"""Concentration constants propagated from the leaves of a search tree to its root.

A layer whose successor rewards concentrate with constants ``(beta, xi, eta)``
produces, after random transitions, arm rewards that concentrate with

    beta' = beta * 2**(xi+2) * R**xi * max_i(K_i)**(xi+1),   xi' = xi, eta' = eta,

and UCB selection over those arms yields a root mean concentrating with

    eta'' = alpha / (xi (1 - eta)),   xi'' = alpha - 1,
    beta'' = max(c2, 2 c1**(alpha-1) * max(beta', 2(K-1) / ((alpha-1)(1 + A(Np))**(alpha-1)))).

All functions are pure. Quantities too large for a double raise
:class:`VacuousBoundError` rather than saturating, since a tail bound that large
carries no information.
"""

import math
from dataclasses import dataclass

from .ucb_policy import ExplorationParams, InvalidParameters, validate_params

__all__ = [
    "ABOVE_ONE",
    "DEFAULT_SCAN_CAP",
    "VacuousBoundError",
    "InfeasibleError",
    "NpNotFoundError",
    "LayerPropagationError",
    "LayerConstants",
    "ProblemShape",
    "DerivedConstants",
    "beta_prime",
    "A_of_t",
    "compute_Np",
    "root_constants",
    "leaf_beta",
    "lemma_beta_T",
    "propagate_layers",
    "pick_alpha",
]

ABOVE_ONE = 1.0 + 1e-9
DEFAULT_SCAN_CAP = 10**7
_LOG_MAX = math.log(1.7976931348623157e308)


class VacuousBoundError(ArithmeticError):
    """A constant exceeded floating-point range; the resulting bound is uninformative."""


class InfeasibleError(ValueError):
    """No admissible exploration exponent exists for the given layer."""


class NpNotFoundError(LookupError):
    """No ``t`` below the scan cap satisfies the ``N_p`` constraints."""


class LayerPropagationError(ValueError):
    def __init__(self, step, cause):
        self.step = step
        self.cause = cause
        super().__init__(f"induction step {step} failed: {cause}")


@dataclass(frozen=True)
class LayerConstants:
    beta: float
    xi: float
    eta: float

    def __post_init__(self):
        if not self.beta > 1:
            raise ValueError(f"beta must exceed 1, got {self.beta!r}")
        if not self.xi > 0:
            raise ValueError(f"xi must be positive, got {self.xi!r}")
        if not 0.5 <= self.eta < 1:
            raise ValueError(f"eta must lie in [1/2, 1), got {self.eta!r}")


@dataclass(frozen=True)
class ProblemShape:
    """Reward bound, per-arm branching ``(K_1, ..., K_K)`` and optimality gap."""

    R: float
    branch: tuple
    delta_min: float

    def __post_init__(self):
        object.__setattr__(self, "branch", tuple(int(k) for k in self.branch))
        if not self.R > 0:
            raise ValueError("R must be positive")
        if len(self.branch) < 1 or min(self.branch) < 1:
            raise ValueError("need at least one arm and K_i >= 1 for every arm")
        if not 0 < self.delta_min <= 2 * self.R:
            raise ValueError("delta_min must lie in (0, 2R]")

    @property
    def K(self):
        return len(self.branch)

    @property
    def max_branch(self):
        return max(self.branch)


@dataclass(frozen=True)
class DerivedConstants:
    """Everything computed for one selection-plus-transition step."""

    alpha: float
    beta_prime: float
    eta_dd: float
    xi_dd: float
    beta_dd: float
    c1: float
    c2: float
    Np: int
    A_Np: int

    @property
    def layer(self):
        """The root triple as a :class:`LayerConstants`, ready for the next step up."""
        return LayerConstants(self.beta_dd, self.xi_dd, self.eta_dd)

    def to_dict(self):
        return {
            "alpha": self.alpha,
            "beta_prime": self.beta_prime,
            "eta_dd": self.eta_dd,
            "xi_dd": self.xi_dd,
            "beta_dd": self.beta_dd,
            "c1": self.c1,
            "c2": self.c2,
            "Np": self.Np,
            "A_Np": self.A_Np,
        }


def _exp_checked(log_value, what):
    if log_value > _LOG_MAX:
        raise VacuousBoundError(f"{what} overflows (log value {log_value:.6g})")
    return math.exp(log_value)


def beta_prime(layer, shape):
    """``beta * 2**(xi+2) * R**xi * max_i(K_i)**(xi+1)``."""
    b, x = layer.beta, layer.xi
    try:
        value = b * 2.0 ** (x + 2) * shape.R**x * float(shape.max_branch) ** (x + 1)
    except OverflowError:
        value = math.inf
    if not math.isfinite(value):
        raise VacuousBoundError("beta' overflows")
    return value


def _log_base(mid, delta_min):
    """``log((2/delta_min * beta'**(1/xi))**(1/(1-eta)))`` for the intermediate triple ``mid``."""
    return (math.log(2.0 / delta_min) + math.log(mid.beta) / mid.xi) / (1.0 - mid.eta)


def _base(mid, delta_min):
    return _exp_checked(_log_base(mid, delta_min), "A(t) prefactor")


def _A_float(t, base, expo):
    return math.ceil(base * t**expo)


def A_of_t(t, layer, delta_min, alpha):
    """``ceil((2/delta_min * beta'**(1/xi))**(1/(1-eta)) * t**(alpha/(xi(1-eta))))``.

    ``layer`` carries the intermediate-layer triple ``(beta', xi, eta)``, i.e.
    ``beta`` here is already ``beta'``.
    """
    if t < 1:
        raise ValueError("t must be >= 1")
    expo = alpha / (layer.xi * (1.0 - layer.eta))
    log_v = _log_base(layer, delta_min) + expo * math.log(t)
    if log_v > _LOG_MAX:
        raise VacuousBoundError("A(t) overflows")
    return int(_A_float(t, _base(layer, delta_min), expo))


def compute_Np(layer, shape, alpha, scan_cap=DEFAULT_SCAN_CAP):
    """Smallest ``t`` in ``[1, scan_cap]`` with

        t >= max(1, A(t))   and   t <= (2R(3 + A(t) - 4K))**(1/eta),

    or ``None`` when there is none. ``layer`` is the intermediate triple, as
    for :func:`A_of_t`. A negative ``3 + A(t) - 4K`` makes the second
    constraint unsatisfiable.
    """
    if scan_cap < 1:
        raise ValueError("scan_cap must be >= 1")
    expo = alpha / (layer.xi * (1.0 - layer.eta))
    log_base = _log_base(layer, delta_min=shape.delta_min)
    if log_base > _LOG_MAX:
        return None
    base = math.exp(log_base)
    R, K, inv_eta = shape.R, shape.K, 1.0 / layer.eta

    # t >= A(t) >= base * t**expo; below t_lo = base**(1/(1-expo)) nothing qualifies
    t = 1
    if expo < 1:
        log_lo = log_base / (1.0 - expo)
        if log_lo > math.log(scan_cap) + 1:
            return None
        t = max(1, int(math.exp(log_lo)) - 1)

    while t <= scan_cap:
        try:
            A = _A_float(t, base, expo)
        except OverflowError:
            # A is nondecreasing, so t >= A(t) can no longer hold
            return None
        if t >= A:
            inner = 2.0 * R * (3 + A - 4 * K)
            if inner >= 0 and t <= inner**inv_eta:
                return t
        t += 1
    return None


def root_constants(layer, shape, alpha, scan_cap=DEFAULT_SCAN_CAP):
    """Root triple ``(beta'', xi'', eta'')`` and helper constants for one step.

    ``layer`` is the successor-reward triple ``(beta, xi, eta)``; ``beta'`` is
    derived from it and ``shape``. Requires ``(alpha, beta, xi, eta)`` to pass
    strict validation. ``delta_min`` is the gap of the layer being reduced.
    """
    violations = validate_params(ExplorationParams(alpha, layer.beta, layer.xi, layer.eta), "strict")
    if violations:
        raise InvalidParameters(violations)

    bp = beta_prime(layer, shape)
    mid = LayerConstants(bp, layer.xi, layer.eta)
    eta_dd = alpha / (layer.xi * (1.0 - layer.eta))
    xi_dd = alpha - 1.0

    log_base = _log_base(mid, shape.delta_min)
    log_c1 = math.log(2.0 * shape.R * shape.K) + log_base
    c1 = _exp_checked(log_c1, "c1")

    Np = compute_Np(mid, shape, alpha, scan_cap)
    if Np is None:
        raise NpNotFoundError(f"no N_p below scan cap {scan_cap}")
    A_Np = A_of_t(Np, mid, shape.delta_min, alpha)
    c2 = 2.0 * shape.R * (Np - 1) ** (1.0 - eta_dd)

    log_tail = -math.inf
    if shape.K > 1:
        log_tail = (
            math.log(2.0 * (shape.K - 1))
            - math.log(alpha - 1.0)
            - (alpha - 1.0) * math.log1p(A_Np)
        )
    log_inner = max(math.log(bp), log_tail)
    log_branch = math.log(2.0) + (alpha - 1.0) * log_c1 + log_inner
    beta_dd = max(c2, _exp_checked(log_branch, "beta''"), ABOVE_ONE)

    return DerivedConstants(
        alpha=alpha,
        beta_prime=bp,
        eta_dd=eta_dd,
        xi_dd=xi_dd,
        beta_dd=beta_dd,
        c1=c1,
        c2=c2,
        Np=Np,
        A_Np=A_Np,
    )


def leaf_beta(R, xi):
    """Leaf concentration constant for i.i.d. rewards in ``[-R, R]``.

    ``max(R**xi * xi**(xi/2) * exp(-xi/2), 1 + 1e-9)``.
    """
    if not (R > 0 and xi > 0):
        raise ValueError("need R > 0 and xi > 0")
    log_v = xi * math.log(R) + 0.5 * xi * math.log(xi) - 0.5 * xi
    return max(_exp_checked(log_v, "leaf beta"), ABOVE_ONE)


def lemma_beta_T(xi):
    """Constant for the transition-count tail: ``max(xi**(xi/2) 2**-xi e**(-xi/2), 1 + 1e-9)``."""
    if not xi > 0:
        raise ValueError("xi must be positive")
    log_v = 0.5 * xi * math.log(xi) - xi * math.log(2.0) - 0.5 * xi
    return max(_exp_checked(log_v, "beta_T"), ABOVE_ONE)


def propagate_layers(leaf, shapes, alphas, scan_cap=DEFAULT_SCAN_CAP):
    """Apply :func:`root_constants` step by step from the leaf layer to the root.

    ``shapes[h]`` and ``alphas[h]`` describe step ``h`` (``h = 0`` reduces the
    leaf layer). Returns the chain of triples, leaf first, of length
    ``len(shapes) + 1``. Any failing step raises :class:`LayerPropagationError`
    carrying the step index.
    """
    if len(shapes) != len(alphas):
        raise ValueError("need one shape and one alpha per induction step")
    chain = [leaf]
    for h, (shape, alpha) in enumerate(zip(shapes, alphas)):
        try:
            derived = root_constants(chain[-1], shape, alpha, scan_cap)
            chain.append(derived.layer)
        except (ValueError, ArithmeticError, LookupError) as exc:
            raise LayerPropagationError(h, exc) from exc
    return chain


def pick_alpha(xi, eta):
    """Midpoint of the admissible interval ``[max(2 + 1e-6, xi eta (1-eta)), xi (1-eta))``."""
    lo = max(2.0 + 1e-6, xi * eta * (1.0 - eta))
    hi = xi * (1.0 - eta)
    if not hi > lo:
        raise InfeasibleError(f"no alpha with {lo:.9g} <= alpha < {hi:.9g} (need xi > 2/(1-eta))")
    return 0.5 * (lo + hi)
