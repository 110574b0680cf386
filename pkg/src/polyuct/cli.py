"""Command-line front end: figure data as CSV, constants and oracle fixtures as JSON.

    polyuct return-curve   discounted return of per-step MCTS on FrozenLake vs n
    polyuct regret-curve   regret of the optimal root action at one state vs n
    polyuct constants      root concentration constants for a problem shape
    polyuct concentration  empirical tail frequencies against the bounds
    polyuct oracle         value-iteration fixture (V*, Q*)

Options come from ``--config FILE`` (a JSON object) and flags; flags win.
Every subcommand is deterministic in ``(seed, config)``.
"""

import argparse
import csv
import functools
import io
import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from ._seeding import derive_seed, trial_map
from .constants import (
    DEFAULT_SCAN_CAP,
    InfeasibleError,
    LayerConstants,
    LayerPropagationError,
    NpNotFoundError,
    ProblemShape,
    VacuousBoundError,
    beta_prime,
    leaf_beta,
    pick_alpha,
    propagate_layers,
    root_constants,
)
from .env import ChainMDP, enumerate_transitions, frozen_lake_4x4, value_iteration
from .mab_sim import MABInstance, estimate_tails, exact_arm_means, hoeffding_tail_checks
from .mcts import SearchConfig, run_episode, search
from .ucb_policy import ExplorationParams, InvalidParameters

__all__ = ["ExperimentConfig", "main", "cmd_return_curve", "cmd_regret_curve",
           "cmd_constants", "cmd_concentration", "cmd_oracle"]

PAPER_RETURN_GRID = [2**k for k in range(10, 15)]
PAPER_REGRET_GRID = [2**k for k in range(10, 21)]

DEFAULTS = {
    "return-curve": {
        "env": "frozenlake", "n_grid": PAPER_RETURN_GRID, "trials": 300,
        "scale": 2.0, "rate": 0.25, "eta": 0.5,
    },
    "regret-curve": {
        "env": "frozenlake", "n_grid": PAPER_REGRET_GRID, "trials": 10, "state": 14,
        "fixture": "oracle_frozenlake.json", "scale": 2.0, "rate": 0.25, "eta": 0.5,
    },
    "constants": {
        "R": 1.0, "branch": [1, 1], "delta_min": 0.8, "beta": None, "xi": 16.0,
        "eta": 0.5, "alpha": 4.0, "scan_cap": DEFAULT_SCAN_CAP, "horizon": None,
    },
    "concentration": {
        "instance": None, "n_grid": [64, 256, 1024], "trials": 2000,
        "z_grid": [1.0, 2.0, 4.0, 8.0, 1e3, 1e6, 1e9, 1e12],
        "alpha": 4.0, "xi": 16.0, "eta": 0.5, "beta": None, "bonus_beta": None,
        "scan_cap": DEFAULT_SCAN_CAP,
        "p": 1.0 / 3.0, "hoeffding_n": 400, "hoeffding_trials": 10_000,
        "hoeffding_eta": 0.5, "hoeffding_xi": 2.0, "hoeffding_z_grid": [1.0, 2.0, 4.0, 8.0],
    },
    "oracle": {"env": "frozenlake", "gamma": 0.99, "tol": 1e-12, "length": 5},
}


class CommandError(Exception):
    pass


@dataclass
class ExperimentConfig:
    subcommand: str
    seed: int = 0
    n_grid: list = None
    trials: int = 1
    env: str = None
    out: str = None
    workers: int = 1
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n_grid is not None:
            if not self.n_grid:
                raise CommandError("n_grid must not be empty")
            if any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
                raise CommandError("n_grid must be strictly increasing")
        if self.trials is not None and self.trials < 1:
            raise CommandError("trials must be >= 1")

    def __getitem__(self, key):
        return self.options[key]

    def exploration(self):
        o = self.options
        return ExplorationParams.from_ratios(o["scale"], o["rate"], o["eta"])


def _fmt(x):
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % x


def _write_csv(header, rows, out):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    _emit(buf.getvalue(), out)


def _write_json(doc, out):
    _emit(json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n", out)


def _emit(text, out):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _make_env(name, **kw):
    if name == "frozenlake":
        return frozen_lake_4x4(**{k: v for k, v in kw.items() if k == "gamma"})
    if name == "chain":
        return ChainMDP(length=int(kw.get("length", 5)), **{k: v for k, v in kw.items() if k == "gamma"})
    raise CommandError(f"unknown environment {name!r}")


def _summary(values, trials):
    values = np.asarray(values, dtype=float)
    std = float(np.std(values))
    return float(np.mean(values)), std, std / math.sqrt(trials)


def _episode_return(episode_seed, mdp, config):
    return run_episode(mdp, config, episode_seed).ret


def cmd_return_curve(cfg):
    """Mean discounted episode return for each ``n``; CSV ``n,trials,mean_return,std,stderr``."""
    mdp = _make_env(cfg.env)
    rows = []
    for n in cfg.n_grid:
        config = SearchConfig(n, mdp.horizon, cfg.exploration())
        seeds = [derive_seed(cfg.seed, k) for k in range(cfg.trials)]
        rets = trial_map(functools.partial(_episode_return, mdp=mdp, config=config), seeds, cfg.workers)
        rows.append((n, cfg.trials, *_summary(rets, cfg.trials)))
    _write_csv(["n", "trials", "mean_return", "std", "stderr"], rows, cfg.out)
    return 0


def _root_mean(search_seed, mdp, state, config, action):
    res = search(mdp, state, config, search_seed)
    return res.stats[res.root.actions.index(action)].empirical_mean


def load_fixture(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise CommandError(
            f"oracle fixture {path!r} not found; create it with `polyuct oracle --out {path}`"
        ) from None


def cmd_regret_curve(cfg):
    """Regret ``mu* - Xbar_{i*,n}`` of fresh searches from one state; CSV ``n,trials,mean_regret,std,stderr``."""
    fixture = load_fixture(cfg["fixture"])
    if fixture.get("env") != cfg.env:
        raise CommandError(f"fixture is for env {fixture.get('env')!r}, not {cfg.env!r}")
    mdp = _make_env(cfg.env, gamma=fixture["gamma"])
    state = cfg["state"]
    q = {int(a): v for a, v in fixture["Q"][str(state)].items()}
    if not q:
        raise CommandError(f"state {state} is terminal in the fixture")
    best = max(q, key=q.get)
    mu = q[best]
    rows = []
    for n in cfg.n_grid:
        config = SearchConfig(n, mdp.horizon, cfg.exploration())
        seeds = [derive_seed(cfg.seed, k) for k in range(cfg.trials)]
        fn = functools.partial(_root_mean, mdp=mdp, state=state, config=config, action=best)
        regrets = [mu - m for m in trial_map(fn, seeds, cfg.workers)]
        rows.append((n, cfg.trials, *_summary(regrets, cfg.trials)))
    _write_csv(["n", "trials", "mean_regret", "std", "stderr"], rows, cfg.out)
    return 0


def _diag(level, code, message):
    return {"level": level, "code": code, "message": message}


def cmd_constants(cfg):
    """All derived constants for one shape as a JSON document with diagnostics."""
    o = cfg.options
    shape = ProblemShape(o["R"], o["branch"], o["delta_min"])
    xi, eta = float(o["xi"]), float(o["eta"])
    diags = []
    doc = {"inputs": {k: o[k] for k in ("R", "branch", "delta_min", "xi", "eta", "alpha", "scan_cap")}}
    try:
        beta = float(o["beta"]) if o["beta"] is not None else leaf_beta(shape.R, xi)
    except VacuousBoundError as exc:
        diags.append(_diag("warning", "vacuous", str(exc)))
        doc["diagnostics"] = diags
        _write_json(doc, cfg.out)
        return 0
    doc["inputs"]["beta"] = beta
    alpha = o["alpha"]
    if alpha in (None, "auto"):
        try:
            alpha = pick_alpha(xi, eta)
        except InfeasibleError as exc:
            diags.append(_diag("error", "infeasible_alpha", str(exc)))
            alpha = None
    doc["alpha"] = alpha
    doc["eta_dd"] = alpha / (xi * (1 - eta)) if alpha is not None else None
    doc["xi_dd"] = alpha - 1 if alpha is not None else None
    layer = LayerConstants(beta, xi, eta)
    try:
        doc["beta_prime"] = beta_prime(layer, shape)
    except VacuousBoundError as exc:
        diags.append(_diag("warning", "vacuous", str(exc)))
    if alpha is not None and "beta_prime" in doc:
        try:
            d = root_constants(layer, shape, alpha, int(o["scan_cap"]))
            doc.update(d.to_dict())
        except InvalidParameters as exc:
            diags.append(_diag("error", "invalid_parameters", str(exc)))
        except NpNotFoundError as exc:
            diags.append(_diag("error", "np_not_found", str(exc)))
        except VacuousBoundError as exc:
            diags.append(_diag("warning", "vacuous", str(exc)))
    if o["horizon"] and alpha is not None and "beta_dd" in doc:
        # same shape at every depth; alpha re-picked for each layer after the first
        chain = [layer]
        a = alpha
        for h in range(int(o["horizon"]) - 1):
            try:
                if h:
                    a = pick_alpha(chain[-1].xi, chain[-1].eta)
                chain.extend(propagate_layers(chain[-1], [shape], [a], int(o["scan_cap"]))[1:])
            except (LayerPropagationError, InfeasibleError) as exc:
                diags.append(_diag("error", "layer_chain", f"layer step {h}: {exc}"))
                break
        doc["chain"] = [{"beta": c.beta, "xi": c.xi, "eta": c.eta} for c in chain]
    doc["diagnostics"] = diags
    _write_json(doc, cfg.out)
    return 1 if any(d["level"] == "error" for d in diags) else 0


def cmd_concentration(cfg):
    """Tail-frequency rows for the root mean (``theorem``) and transition counts (``lemma``)."""
    o = cfg.options
    if not o["instance"]:
        raise CommandError("concentration needs --instance FILE")
    inst = MABInstance.load(o["instance"])
    means = exact_arm_means(inst)
    shape = ProblemShape(inst.R, inst.branching, means.delta_min)
    xi, eta, alpha = float(o["xi"]), float(o["eta"]), float(o["alpha"])
    beta = float(o["beta"]) if o["beta"] is not None else leaf_beta(inst.R, xi)
    layer = LayerConstants(beta, xi, eta)
    try:
        root = root_constants(layer, shape, alpha, int(o["scan_cap"]))
    except (InvalidParameters, NpNotFoundError, VacuousBoundError) as exc:
        raise CommandError(f"cannot compute root constants: {exc}") from exc
    bonus_beta = float(o["bonus_beta"]) if o["bonus_beta"] is not None else root.beta_prime
    params = ExplorationParams(alpha, bonus_beta, xi, eta)

    rows = []
    failures = 0
    for est in estimate_tails(inst, cfg.n_grid, o["z_grid"], root, params, cfg.trials, cfg.seed, cfg.workers):
        ok = est.vacuous or est.within_bound()
        failures += not ok
        rows.append(("theorem", est.n, est.z, est.trials, est.upper_freq, est.lower_freq,
                     est.bound, est.vacuous, ok))
    h_trials = int(o["hoeffding_trials"])
    for chk in hoeffding_tail_checks(o["p"], int(o["hoeffding_n"]), o["hoeffding_z_grid"],
                                     o["hoeffding_eta"], o["hoeffding_xi"], h_trials, cfg.seed):
        slack = max(3 * math.sqrt(f * (1 - f) / h_trials) for f in (chk.upper_freq, chk.lower_freq))
        ok = chk.vacuous or max(chk.upper_freq, chk.lower_freq) <= chk.bound + slack
        failures += not ok
        rows.append(("lemma", int(o["hoeffding_n"]), chk.z, h_trials, chk.upper_freq,
                     chk.lower_freq, chk.bound, chk.vacuous, ok))
    _write_csv(["check", "n", "z", "trials", "upper_freq", "lower_freq", "bound",
                "vacuous_flag", "within_bound"], rows, cfg.out)
    return 1 if failures else 0


def cmd_oracle(cfg):
    """Value-iteration fixture with ``V``, ``Q``, discount, tolerance and final residual."""
    o = cfg.options
    mdp = _make_env(cfg.env, gamma=o["gamma"], length=o["length"])
    vi = value_iteration(enumerate_transitions(mdp), o["gamma"], o["tol"])
    doc = {
        "env": cfg.env,
        "gamma": o["gamma"],
        "tol": o["tol"],
        "residual": vi.residual,
        "iterations": vi.iterations,
        "V": {str(s): v for s, v in vi.V.items()},
        "Q": {str(s): {str(a): q for a, q in acts.items()} for s, acts in vi.Q.items()},
    }
    if cfg.env == "chain":
        doc["length"] = o["length"]
    _write_json(doc, cfg.out)
    return 0


COMMANDS = {
    "return-curve": cmd_return_curve,
    "regret-curve": cmd_regret_curve,
    "constants": cmd_constants,
    "concentration": cmd_concentration,
    "oracle": cmd_oracle,
}


def _int_list(text):
    return [int(float(x)) for x in text.split(",") if x.strip()]


def _float_list(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _alpha(text):
    return text if text == "auto" else float(text)


def build_parser():
    parser = argparse.ArgumentParser(prog="polyuct", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p):
        p.add_argument("--seed", type=int)
        p.add_argument("--trials", type=int)
        p.add_argument("--out", help="output file (default: stdout)")
        p.add_argument("--config", help="JSON file with default options")
        p.add_argument("--workers", type=int, help="worker processes for independent trials")
        return p

    def bonus(p):
        p.add_argument("--scale", type=float, help="bonus scale beta**(1/xi)")
        p.add_argument("--rate", type=float, help="time exponent alpha/xi")
        p.add_argument("--eta", type=float)

    p = common(sub.add_parser("return-curve", help="FrozenLake return vs simulations"))
    p.add_argument("--env", choices=["frozenlake", "chain"])
    p.add_argument("--n-grid", type=_int_list)
    bonus(p)

    p = common(sub.add_parser("regret-curve", help="root regret at a fixed state vs simulations"))
    p.add_argument("--env", choices=["frozenlake", "chain"])
    p.add_argument("--n-grid", type=_int_list)
    p.add_argument("--state", type=int)
    p.add_argument("--fixture", help="JSON written by `polyuct oracle`")
    bonus(p)

    p = common(sub.add_parser("constants", help="root concentration constants"))
    p.add_argument("--R", type=float)
    p.add_argument("--branch", type=_int_list, help="K_1,...,K_K")
    p.add_argument("--delta-min", type=float)
    p.add_argument("--beta", type=float, help="leaf beta (default: Hoeffding-derived)")
    p.add_argument("--xi", type=float)
    p.add_argument("--eta", type=float)
    p.add_argument("--alpha", type=_alpha, help="number or 'auto'")
    p.add_argument("--scan-cap", type=int)
    p.add_argument("--horizon", type=int, help="also propagate through H-1 layers")

    p = common(sub.add_parser("concentration", help="empirical tails vs bounds"))
    p.add_argument("--instance", help="bandit instance JSON")
    p.add_argument("--n-grid", type=_int_list)
    p.add_argument("--z-grid", type=_float_list)
    p.add_argument("--alpha", type=float)
    p.add_argument("--xi", type=float)
    p.add_argument("--eta", type=float)
    p.add_argument("--beta", type=float, help="leaf beta (default: Hoeffding-derived)")
    p.add_argument("--bonus-beta", type=float, help="beta used in the UCB bonus (default: beta')")
    p.add_argument("--scan-cap", type=int)
    p.add_argument("--p", type=float, help="transition probability for the count check")
    p.add_argument("--hoeffding-n", type=int)
    p.add_argument("--hoeffding-trials", type=int)
    p.add_argument("--hoeffding-eta", type=float)
    p.add_argument("--hoeffding-xi", type=float)
    p.add_argument("--hoeffding-z-grid", type=_float_list)

    p = common(sub.add_parser("oracle", help="value-iteration fixture"))
    p.add_argument("--env", choices=["frozenlake", "chain"])
    p.add_argument("--gamma", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--length", type=int, help="chain length")
    return parser


def resolve_config(args):
    """Merge subcommand defaults, the ``--config`` file, then explicit flags."""
    name = args.subcommand
    merged = {"seed": 0, "trials": 1, "out": None, "workers": 1, **DEFAULTS[name]}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            merged.update({k.replace("-", "_"): v for k, v in json.load(fh).items()})
    merged.update({k: v for k, v in vars(args).items() if v is not None and k not in ("subcommand", "config")})
    top = {k: merged.pop(k) for k in ("seed", "trials", "out", "workers")}
    n_grid = merged.pop("n_grid", None)
    env = merged.pop("env", None)
    return ExperimentConfig(name, n_grid=n_grid, env=env, options=merged, **top)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        return COMMANDS[cfg.subcommand](cfg)
    except CommandError as exc:
        print(f"polyuct {args.subcommand}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
