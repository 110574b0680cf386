import math
import random

import pytest
from scipy.stats import binom

from polyuct.bandit_core import RewardProcess as RP
from polyuct.bandit_core import TransitionTable
from polyuct.constants import LayerConstants, ProblemShape, leaf_beta, lemma_beta_T, root_constants
from polyuct.mab_sim import (
    MABInstance,
    NonUniqueOptimum,
    convergence_curve,
    estimate_tail,
    estimate_tails,
    exact_arm_means,
    hoeffding_tail_check,
    hoeffding_tail_checks,
    run_ucb,
    tail_bound,
)
from polyuct.ucb_policy import APPENDIX_PARAMS, ExplorationParams


def two_constants(a=0.9, b=0.1):
    return MABInstance(TransitionTable([[1.0], [1.0]]), [[RP.constant(a)], [RP.constant(b)]])


def two_bernoulli(a=0.9, b=0.1):
    return MABInstance(TransitionTable([[1.0], [1.0]]), [[RP.bernoulli(a)], [RP.bernoulli(b)]])


def random_instance(rng):
    K = rng.randint(1, 4)
    rows, leaves = [], []
    for _ in range(K):
        w = [rng.random() + 0.05 for _ in range(rng.randint(1, 4))]
        rows.append([x / sum(w) for x in w])
        procs = []
        for _ in w:
            kind = rng.choice(["constant", "bernoulli", "uniform", "drift"])
            lo, hi = sorted((rng.uniform(-1, 1), rng.uniform(-1, 1)))
            procs.append(
                {
                    "constant": lambda: RP.constant(lo),
                    "bernoulli": lambda: RP.bernoulli(rng.random(), lo, hi),
                    "uniform": lambda: RP.uniform(lo, hi),
                    "drift": lambda: RP.drift(lo / 2, rng.uniform(0, 0.99), start=hi, noise=0.4),
                }[kind]()
            )
        leaves.append(procs)
    return MABInstance(TransitionTable(rows), leaves)


@pytest.fixture(scope="module")
def tail_setup():
    inst = MABInstance.from_dict(
        {
            "R": 1.0,
            "arms": [
                {"transitions": [0.5, 0.5], "leaves": [{"kind": "bernoulli", "p": 0.8}, {"kind": "constant", "c": 1.0}]},
                {"transitions": [0.5, 0.5], "leaves": [{"kind": "bernoulli", "p": 0.2}, {"kind": "constant", "c": 0.0}]},
            ],
        }
    )
    means = exact_arm_means(inst)
    shape = ProblemShape(inst.R, inst.branching, means.delta_min)
    root = root_constants(LayerConstants(leaf_beta(1.0, 16.0), 16.0, 0.5), shape, 4.0)
    params = ExplorationParams(4.0, root.beta_prime, 16.0, 0.5)
    return inst, root, params


def test_exact_means():
    m = exact_arm_means(two_constants())
    assert m.means == (0.9, 0.1) and m.best == 0
    assert m.delta_min == pytest.approx(0.8) and m.best_mean == 0.9
    inst = MABInstance(TransitionTable([[1 / 3] * 3]), [[RP.constant(0.0), RP.constant(0.3), RP.constant(0.6)]])
    assert exact_arm_means(inst).means[0] == pytest.approx(0.3, abs=1e-15)
    assert exact_arm_means(inst).delta_min == math.inf
    with pytest.raises(NonUniqueOptimum):
        exact_arm_means(two_constants(0.5, 0.5))


def test_instance_validation():
    with pytest.raises(ValueError):
        MABInstance(TransitionTable([[0.5, 0.5]]), [[RP.constant(0.1)]])
    with pytest.raises(ValueError):
        MABInstance(TransitionTable([[1.0]]), [[RP.constant(1.5, R=2.0)]], R=1.0)
    with pytest.raises(ValueError):
        MABInstance(TransitionTable([[0.5, 0.4]]), [[RP.constant(0.1), RP.constant(0.2)]])


def test_json_roundtrip(tail_setup):
    inst = tail_setup[0]
    assert MABInstance.from_dict(inst.to_dict()) == inst


def test_each_arm_once_at_n_equals_K():
    inst = random_instance(random.Random(4))
    trace = run_ucb(inst, inst.K, APPENDIX_PARAMS, 0)
    assert trace.arm_pulls == (1,) * inst.K


def test_best_arm_dominates():
    trace = run_ucb(two_constants(), 10**4, APPENDIX_PARAMS, 1)
    assert trace.arm_pulls[0] / trace.n >= 0.9


def test_seeded_replay():
    inst = random_instance(random.Random(8))
    a = run_ucb(inst, 500, APPENDIX_PARAMS, 3, log_selections=True)
    b = run_ucb(inst, 500, APPENDIX_PARAMS, 3, log_selections=True)
    assert a == b and repr(a) == repr(b)
    assert len(a.selections) == 500


def test_counting_identities_fuzz():
    rng = random.Random(12)
    for k in range(300):
        inst = random_instance(rng)
        trace = run_ucb(inst, rng.randint(1, 300), APPENDIX_PARAMS, k)
        assert trace.check(inst.R) == []


def test_transition_frequencies_converge():
    inst = MABInstance(TransitionTable([[0.2, 0.3, 0.5], [1.0]]), [[RP.uniform(0, 1)] * 3, [RP.constant(0.0)]])
    p = inst.transitions.rows[0]
    ok = 0
    runs = 100
    for seed in range(runs):
        tr = run_ucb(inst, 3000, APPENDIX_PARAMS, seed)
        Ti = tr.arm_pulls[0]
        assert Ti >= 1000
        dev = max(abs(c / Ti - q) for c, q in zip(tr.cell_pulls[0], p))
        ok += dev <= 5 * math.sqrt(1 / Ti)
    assert ok >= 0.99 * runs


def test_tail_far_out(tail_setup):
    inst, root, params = tail_setup
    est = estimate_tail(inst, 64, 1e12, root, params, 50, 0)
    assert est.upper_freq == est.lower_freq == 0.0
    assert est.bound < 1 and not est.vacuous and est.within_bound()


def test_vacuous_cells_flagged(tail_setup):
    inst, root, params = tail_setup
    est = estimate_tail(inst, 64, 1.0, root, params, 20, 0)
    assert est.vacuous and est.bound == 1.0
    assert tail_bound(root, 1.0) == (1.0, True)


def test_tails_nonincreasing_in_z():
    inst = two_bernoulli(0.7, 0.3)
    shape = ProblemShape(1.0, (1, 1), 0.4)
    root = root_constants(LayerConstants(leaf_beta(1.0, 16.0), 16.0, 0.5), shape, 4.0)
    # the tail events are only interesting on a scale where deviations of order sqrt(n) register
    params = ExplorationParams.from_ratios(1.0, 0.25, 0.5)
    est = estimate_tails(inst, [256], [1, 2, 4, 8], root, params, 2000, 5)
    for freq in ("upper_freq", "lower_freq"):
        seq = [getattr(e, freq) for e in est]
        assert all(a >= b for a, b in zip(seq, seq[1:]))
    assert est[0].lower_freq > 0


def test_wilson_interval(tail_setup):
    inst, root, params = tail_setup
    est = estimate_tail(inst, 64, 2.0, root, params, 100, 1)
    lo, hi = est.interval(0.3)
    assert 0.2 < lo < 0.3 < hi < 0.41


def test_hoeffding_degenerate():
    for p in (0.0, 1.0):
        for chk in hoeffding_tail_checks(p, 50, [1, 2], 0.5, 2.0, 500, 0):
            assert chk.upper_freq == chk.lower_freq == 0.0


def test_hoeffding_against_exact_binomial():
    n, p, trials = 400, 1 / 3, 10**4
    chk = hoeffding_tail_check(p, n, 2.0, 0.5, 2.0, trials, 0)
    # P(T - np >= 2 sqrt(n)) exactly
    exact = binom.sf(math.ceil(n * p + 2 * math.sqrt(n)) - 1, n, p)
    assert abs(chk.upper_freq - exact) <= 4 * math.sqrt(exact * (1 - exact) / trials) + 1e-4
    assert chk.bound == pytest.approx(lemma_beta_T(2.0) / 4)
    assert chk.upper_freq <= chk.bound and exact <= chk.bound


def test_hoeffding_nonincreasing():
    rows = hoeffding_tail_checks(0.3, 200, [1, 1.5, 2, 3, 4], 0.5, 2.0, 4000, 9)
    ups = [r.upper_freq for r in rows]
    assert all(a >= b for a, b in zip(ups, ups[1:]))


def test_convergence_constant_single_arm():
    inst = MABInstance(TransitionTable([[1.0]]), [[RP.constant(0.4)]])
    for pt in convergence_curve(inst, APPENDIX_PARAMS, [10, 100], 5, 0):
        assert pt.mean == pytest.approx(0.4, abs=1e-15) and pt.std <= 1e-15


def test_convergence_trend():
    grid = [100, 1000, 10000]
    curve = convergence_curve(two_constants(), APPENDIX_PARAMS, grid, 20, 0)
    gaps = [abs(pt.mean - 0.9) for pt in curve]
    assert gaps[0] > gaps[1] > gaps[2]
    # constant leaves make every run identical; the spread needs random rewards
    curve = convergence_curve(two_bernoulli(), APPENDIX_PARAMS, grid, 200, 0)
    stds = [pt.std for pt in curve]
    assert stds[0] > stds[1] > stds[2]
    assert abs(curve[0].mean - 0.9) > abs(curve[2].mean - 0.9)


def test_worker_count_does_not_change_results(tail_setup):
    inst, root, params = tail_setup
    a = estimate_tails(inst, [32, 64], [1, 2], root, params, 12, 3, workers=1)
    b = estimate_tails(inst, [32, 64], [1, 2], root, params, 12, 3, workers=2)
    assert a == b
