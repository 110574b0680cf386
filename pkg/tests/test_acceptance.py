"""End-to-end acceptance checks, one test per criterion.

Each test records a ``[PASS]``/``[FAIL]`` line (printed in the pytest summary
and when this file is run directly with ``python3 tests/test_acceptance.py``).
The FrozenLake curves take several minutes on a single core.
"""

import functools
import math
import random
import sys
from pathlib import Path

import numpy as np
from scipy.stats import binom

sys.path.insert(0, str(Path(__file__).resolve().parent))
from acceptance_report import report  # noqa: E402

from polyuct import derive_seed  # noqa: E402
from polyuct.bandit_core import RewardProcess as RP  # noqa: E402
from polyuct.bandit_core import TransitionTable  # noqa: E402
from polyuct.cli import main  # noqa: E402
from polyuct.constants import (  # noqa: E402
    LayerConstants,
    ProblemShape,
    beta_prime,
    leaf_beta,
    lemma_beta_T,
    root_constants,
)
from polyuct.env import ChainMDP, enumerate_transitions, frozen_lake_4x4, value_iteration  # noqa: E402
from polyuct.mab_sim import MABInstance, estimate_tails, exact_arm_means, hoeffding_tail_checks, run_ucb  # noqa: E402
from polyuct.mcts import SearchConfig, run_episode, search  # noqa: E402
from polyuct.ucb_policy import APPENDIX_PARAMS, ExplorationParams, exploration_bonus  # noqa: E402

# tolerances and sizes
EXACT_TOL = 1e-12
SIGMA_SLACK = 3.0
CHAIN_N, CHAIN_SEEDS, CHAIN_TOL, CHAIN_RATE = 10**5, 100, 0.05, 0.95
CHAIN_PARAMS = ExplorationParams.from_ratios(0.5, 0.25, 0.5)
LAKE_GRID, LAKE_SEEDS = (2**10, 2**12, 2**14), 50
LAKE_BAND_LO, LAKE_BAND_HI = (0.02, 0.18), (0.15, 0.45)
REGRET_GRID, REGRET_SEEDS, REGRET_STATE = (2**10, 2**12, 2**14, 2**16), 10, 14


# 1 -------------------------------------------------------------------------

def test_criterion_1_constant_formulas():
    shape = ProblemShape(1.0, (1, 1), 0.8)
    d = root_constants(LayerConstants(leaf_beta(1.0, 16.0), 16.0, 0.5), shape, 4.0)
    bp = beta_prime(LayerConstants(2.0, 1.0, 0.5), ProblemShape(1.0, (1,), 1.0))
    ok = abs(d.eta_dd - 0.5) <= EXACT_TOL and abs(d.xi_dd - 3.0) <= EXACT_TOL and bp == 16.0
    report(1, ok, f"eta''={d.eta_dd!r} xi''={d.xi_dd!r} beta'={bp!r} (want 0.5, 3, 16)")
    assert ok


# 2 -------------------------------------------------------------------------

def test_criterion_2_bonus_formula():
    rng = random.Random(2)
    grid = [(rng.randint(1, 10**6), rng.randint(1, 10**4)) for _ in range(20)]
    err = max(abs(exploration_bonus(t, s, APPENDIX_PARAMS) - 2 * math.sqrt(math.sqrt(t) / s)) for t, s in grid)
    inf_ok = all(exploration_bonus(t, 0, APPENDIX_PARAMS) == math.inf for t, _ in grid)
    ok = err <= EXACT_TOL and inf_ok
    report(2, ok, f"max |B - 2 sqrt(sqrt(t)/s)| = {err:.3g} on 20 points; B(t,0)=inf: {inf_ok}")
    assert ok


# 3 -------------------------------------------------------------------------

def _fuzz_instance(rng):
    K = rng.randint(1, 5)
    rows, leaves = [], []
    for _ in range(K):
        w = [rng.random() + 0.01 for _ in range(rng.randint(1, 5))]
        rows.append([x / sum(w) for x in w])
        procs = []
        for _ in w:
            lo, hi = sorted((rng.uniform(-1, 1), rng.uniform(-1, 1)))
            kind = rng.randrange(4)
            if kind == 0:
                procs.append(RP.constant(lo))
            elif kind == 1:
                procs.append(RP.bernoulli(rng.random(), lo, hi))
            elif kind == 2:
                procs.append(RP.uniform(lo, hi))
            else:
                procs.append(RP.drift(lo / 2, rng.uniform(0, 0.99), start=hi, noise=0.3))
        leaves.append(procs)
    return MABInstance(TransitionTable(rows), leaves)


def test_criterion_3_counting_invariants():
    rng = random.Random(3)
    bad = []
    for k in range(1000):
        inst = _fuzz_instance(rng)
        trace = run_ucb(inst, rng.randint(1, 400), APPENDIX_PARAMS, derive_seed(3, k))
        problems = trace.check(inst.R)
        if problems:
            bad.append((k, problems))
    ok = not bad
    report(3, ok, f"{1000 - len(bad)}/1000 fuzzed runs satisfy all counting identities")
    assert ok, bad[:3]


# 4 -------------------------------------------------------------------------

def test_criterion_4_transition_count_tail():
    p, n, eta, xi, trials = 1 / 3, 400, 0.5, 2.0, 10**4
    zs = (1.0, 2.0, 4.0)
    rows = hoeffding_tail_checks(p, n, zs, eta, xi, trials, seed=4)
    details, ok = [], True
    for chk in rows:
        bound = min(1.0, lemma_beta_T(xi) / chk.z**xi)
        thresh = n**eta * chk.z
        # exact P(T - np >= thresh) and P(T - np <= -thresh)
        exact_up = binom.sf(math.ceil(n * p + thresh) - 1, n, p)
        exact_lo = binom.cdf(math.floor(n * p - thresh), n, p)
        for freq, exact in ((chk.upper_freq, exact_up), (chk.lower_freq, exact_lo)):
            slack = SIGMA_SLACK * math.sqrt(freq * (1 - freq) / trials)
            within = freq <= bound + slack
            agrees = abs(freq - exact) <= 4 * math.sqrt(exact * (1 - exact) / trials) + 1.0 / trials
            ok &= within and agrees and exact <= bound
        details.append(f"z={chk.z:g}: freq=({chk.upper_freq:.4f},{chk.lower_freq:.4f}) exact=({exact_up:.4f},{exact_lo:.4f}) bound={bound:.4f}")
    report(4, ok, "; ".join(details))
    assert ok


# 5 -------------------------------------------------------------------------

def test_criterion_5_root_concentration():
    inst = MABInstance(
        TransitionTable([[0.5, 0.5], [0.5, 0.5]]),
        [[RP.bernoulli(0.8), RP.constant(1.0)], [RP.bernoulli(0.2), RP.constant(0.0)]],
    )
    means = exact_arm_means(inst)
    shape = ProblemShape(inst.R, inst.branching, means.delta_min)
    root = root_constants(LayerConstants(leaf_beta(inst.R, 16.0), 16.0, 0.5), shape, 4.0)
    params = ExplorationParams(4.0, root.beta_prime, 16.0, 0.5).validate("strict")
    ns = (64, 256, 1024)
    # the bound only drops below 1 once z exceeds beta''**(1/xi'')
    z_min = root.beta_dd ** (1 / root.xi_dd)
    zs = (1.0, 2.0, 4.0, 8.0, 1e3, 1e6, 10 ** math.ceil(math.log10(z_min)), 1e12, 1e15)
    est = estimate_tails(inst, ns, zs, root, params, trials=2000, seed=5)
    live = [e for e in est if not e.vacuous]
    failures = [e for e in live if not e.within_bound(SIGMA_SLACK)]
    monotone = True
    for n in ns:
        col = [e for e in est if e.n == n]
        for key in ("upper_freq", "lower_freq"):
            seq = [getattr(e, key) for e in col]
            monotone &= all(a >= b for a, b in zip(seq, seq[1:]))
    ok = bool(live) and not failures and monotone
    report(
        5,
        ok,
        f"{len(live)} non-vacuous cells of {len(est)} (bound < 1 needs z > {z_min:.3g}), "
        f"{len(failures)} over bound+3sigma, monotone in z: {monotone}",
    )
    assert ok


# 6 -------------------------------------------------------------------------

@functools.lru_cache(maxsize=None)
def _chain_runs():
    mdp = ChainMDP(5)
    vi = value_iteration(enumerate_transitions(mdp), mdp.gamma)
    cfg = SearchConfig(CHAIN_N, mdp.horizon, CHAIN_PARAMS)
    out = []
    for k in range(CHAIN_SEEDS):
        res = search(mdp, 0, cfg, derive_seed(6, k))
        means = dict(zip(res.root.actions, res.root.means()))
        out.append((res.action, res.value, max(abs(means[a] - q) for a, q in vi.Q[0].items())))
    return vi, out


def test_criterion_6_chain_oracle():
    vi, runs = _chain_runs()
    v_star = vi.V[0]
    best = max(vi.Q[0], key=vi.Q[0].get)
    good = sum(a == best and abs(v - v_star) <= CHAIN_TOL for a, v, _ in runs)
    ok = good >= CHAIN_RATE * CHAIN_SEEDS and abs(v_star - 0.970299) <= 1e-12
    mean_v = np.mean([v for _, v, _ in runs])
    report(6, ok, f"{good}/{CHAIN_SEEDS} seeds recommend 'right' with |value - {v_star:.6f}| <= {CHAIN_TOL} (mean value {mean_v:.4f})")
    assert ok


def test_chain_action_means_near_q_star():
    _, runs = _chain_runs()
    good = sum(err <= CHAIN_TOL for _, _, err in runs)
    assert good >= CHAIN_RATE * CHAIN_SEEDS, good


# 7 -------------------------------------------------------------------------

def test_criterion_7_return_curve():
    mdp = frozen_lake_4x4()
    means = []
    for n in LAKE_GRID:
        cfg = SearchConfig(n, mdp.horizon, APPENDIX_PARAMS)
        rets = [run_episode(mdp, cfg, derive_seed(0, k)).ret for k in range(LAKE_SEEDS)]
        means.append(float(np.mean(rets)))
    increasing = all(a < b for a, b in zip(means, means[1:]))
    lo_ok = LAKE_BAND_LO[0] <= means[0] <= LAKE_BAND_LO[1]
    hi_ok = LAKE_BAND_HI[0] <= means[-1] <= LAKE_BAND_HI[1]
    ok = increasing and lo_ok and hi_ok
    curve = ", ".join(f"n={n}: {m:.4f}" for n, m in zip(LAKE_GRID, means))
    report(7, ok, f"mean return {curve}; increasing: {increasing}; bands: {lo_ok}, {hi_ok}")
    assert ok


# 8 -------------------------------------------------------------------------

def test_criterion_8_regret_curve():
    mdp = frozen_lake_4x4()
    q = value_iteration(enumerate_transitions(mdp), mdp.gamma).Q[REGRET_STATE]
    best = max(q, key=q.get)
    stats = []
    for n in REGRET_GRID:
        cfg = SearchConfig(n, mdp.horizon, APPENDIX_PARAMS)
        regrets = []
        for k in range(REGRET_SEEDS):
            res = search(mdp, REGRET_STATE, cfg, derive_seed(0, k))
            regrets.append(q[best] - res.root.means()[res.root.actions.index(best)])
        stats.append((float(np.mean(regrets)), float(np.std(regrets))))
    ok = stats[-1][0] <= stats[0][0] and stats[-1][1] < stats[0][1]
    curve = ", ".join(f"n={n}: {m:.4f}+-{s:.4f}" for n, (m, s) in zip(REGRET_GRID, stats))
    report(8, ok, f"regret of action {best} at state {REGRET_STATE}: {curve}")
    assert ok


# 9 -------------------------------------------------------------------------

def test_criterion_9_cli_determinism(tmp_path):
    inst = tmp_path / "inst.json"
    inst.write_text(
        '{"R": 1, "arms": ['
        '{"transitions": [0.5, 0.5], "leaves": [{"kind": "bernoulli", "p": 0.8}, {"kind": "constant", "c": 1}]},'
        '{"transitions": [0.5, 0.5], "leaves": [{"kind": "bernoulli", "p": 0.2}, {"kind": "constant", "c": 0}]}]}'
    )
    fixture = tmp_path / "lake.json"
    commands = {
        "oracle": ["oracle"],
        "constants": ["constants", "--alpha", "4"],
        "concentration": ["concentration", "--instance", str(inst), "--n-grid", "32,64", "--trials", "50",
                          "--hoeffding-trials", "1000"],
        "return-curve": ["return-curve", "--n-grid", "16,32", "--trials", "4", "--seed", "9"],
        "regret-curve": ["regret-curve", "--fixture", str(fixture), "--n-grid", "64,128", "--trials", "3"],
    }
    main(["oracle", "--out", str(fixture)])
    same = {}
    for name, argv in commands.items():
        outs = []
        for rep, workers in enumerate(("1", "1", "2")):
            out = tmp_path / f"{name}-{rep}.out"
            code = main(argv + ["--out", str(out), "--workers", workers])
            outs.append((code, out.read_bytes()))
        same[name] = outs[0] == outs[1] == outs[2] and outs[0][0] == 0
    ok = all(same.values())
    report(9, ok, ", ".join(f"{k}: {'identical' if v else 'DIFFERS'}" for k, v in same.items()))
    assert ok


if __name__ == "__main__":
    import tempfile

    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                if "tmp_path" in fn.__code__.co_varnames[: fn.__code__.co_argcount]:
                    with tempfile.TemporaryDirectory() as d:
                        fn(Path(d))
                else:
                    fn()
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)
