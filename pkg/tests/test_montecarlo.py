import math

import numpy as np
import pytest

from esr_bell import microstates as ms
from esr_bell import montecarlo as mc
from esr_bell.esr_core import generalized_correlation, quantum_expectations
from esr_bell.microstates import Ensemble, Microstate
from esr_bell.qtheory import product_state
from esr_bell.synthesis import FeasibilityProblem, solve_problem

SETTINGS = (0.0, math.pi / 2, math.pi / 4, 3 * math.pi / 4)
ALL_ON = (1, 1, 1, 1)


def within(x, expected, se, k=4.0):
    return abs(x - expected) <= k * se + 1e-12


def test_sample_single_entry(rng):
    m = Microstate((1, -1, 1, -1), (1, 0, 1, 1))
    e = Ensemble(((m, 1.0),), SETTINGS)
    assert all(mc.sample_microstate(e, rng) == m for _ in range(50))


def test_sample_zero_weight_never_drawn(rng):
    m1, m2 = Microstate((1, 1, 1, 1), ALL_ON), Microstate((-1, 1, 1, 1), ALL_ON)
    e = Ensemble(((m1, 1.0), (m2, 0.0)), SETTINGS)
    assert all(mc.sample_microstate(e, rng) == m1 for _ in range(500))


def test_sample_equal_weights_binomial(rng):
    m1, m2 = Microstate((1, 1, 1, 1), ALL_ON), Microstate((-1, 1, 1, 1), ALL_ON)
    e = Ensemble(((m1, 0.5), (m2, 0.5)), SETTINGS)
    n = 100_000
    idx = rng.choice(2, size=n, p=e.weights)  # same categorical law, vectorized
    hits = sum(mc.sample_microstate(e, rng) == m1 for _ in range(2000))
    assert within(hits / 2000, 0.5, math.sqrt(0.25 / 2000))
    assert within(np.mean(idx == 0), 0.5, math.sqrt(0.25 / n))


def test_sample_chunk_path_binomial():
    m1, m2 = Microstate((1, 1, 1, 1), ALL_ON), Microstate((-1, 1, 1, 1), ALL_ON)
    e = Ensemble(((m1, 0.5), (m2, 0.5)), SETTINGS)
    t = mc.run(mc.RunConfig(seed=3, trials_per_pair=100_000, ensemble=e))
    frac = t.counts[0, 2].sum() / 100_000
    assert within(frac, 0.5, math.sqrt(0.25 / 100_000))


def test_measure_pair():
    m = Microstate((1, -1, -1, 1), ALL_ON)
    assert mc.measure_pair(m, 0) == (1, -1)
    assert mc.measure_pair(m, 3) == (-1, 1)
    m = Microstate((1, -1, -1, 1), (0, 1, 1, 1))
    assert mc.measure_pair(m, 0) == (0, -1)
    rng = np.random.default_rng(0)
    assert all(mc.measure_pair(m, 3, 0.0, rng) == (0, 0) for _ in range(20))
    with pytest.raises(ValueError):
        mc.measure_pair(m, 0, 0.5)


def test_run_config_validation():
    e = Ensemble(((Microstate((1, 1, 1, 1), ALL_ON), 1.0),), SETTINGS)
    with pytest.raises(ValueError):
        mc.RunConfig(seed=1, trials_per_pair=0, ensemble=e)
    with pytest.raises(ValueError):
        mc.RunConfig(seed=1, trials_per_pair=5, ensemble=e, instrument_k=1.5)
    with pytest.raises(ValueError):
        mc.RunConfig(seed=-1, trials_per_pair=5, ensemble=e)


def test_deterministic_ensemble_zero_variance():
    e = Ensemble(((Microstate((1, -1, -1, 1), ALL_ON), 1.0),), SETTINGS)
    t = mc.run(mc.RunConfig(seed=9, trials_per_pair=1000, ensemble=e))
    for k, (ia, ib) in enumerate(ms.PAIRS):
        m = e.entries[0][0]
        oa, ob = m.macro_value("A", ia), m.macro_value("B", ib)
        assert t.counts[k, oa + 1, ob + 1] == 1000
    est = mc.estimate(t)
    assert all(p.cond_corr_se == 0 for p in est.pairs)


def test_seed_reproducibility_and_workers(solved):
    _, res = solved(0.8)
    cfg = mc.RunConfig(seed=123, trials_per_pair=300_000, ensemble=res.ensemble)
    a = mc.run(cfg)
    assert a == mc.run(cfg)
    assert a == mc.run(cfg, workers=4)
    assert a.counts.sum(axis=(1, 2)).tolist() == [300_000] * 4
    assert a != mc.run(mc.RunConfig(seed=124, trials_per_pair=300_000, ensemble=res.ensemble))


def test_tally_merge_and_csv():
    e = Ensemble(((Microstate((1, 1, 1, 1), ALL_ON), 1.0),), SETTINGS)
    t1 = mc.run(mc.RunConfig(seed=1, trials_per_pair=10, ensemble=e))
    t2 = mc.run(mc.RunConfig(seed=2, trials_per_pair=5, ensemble=e))
    assert (t1 + t2).trials_per_pair == 15
    assert mc.Tally.from_dict(t1.to_dict()) == t1
    lines = t1.to_csv().splitlines()
    assert lines[0] == "pair,oA,oB,count"
    assert len(lines) == 1 + 36
    with pytest.raises(ValueError):
        mc.Tally(np.zeros((4, 3, 3)), 5)


def test_estimate_all_zero_tally():
    counts = np.zeros((4, 3, 3), dtype=int)
    counts[:, 1, 1] = 100
    est = mc.estimate(mc.Tally(counts, 100))
    for p in est.pairs:
        assert p.gen_corr == 0 and p.p_detect_a == 0 and p.p_detect_b == 0
        assert p.cond_corr is None and p.cond_corr_se is None
    stats = mc.bchsh_statistics(est)
    assert stats["chsh_conditional"] is None
    assert stats["bchsh_modified"] == 0


def test_quantum_reproducing_ensemble_at_eta_one():
    angles = (0.3, 1.2, 2.2, 0.7)
    state = product_state()
    res = solve_problem(FeasibilityProblem.uniform(state, angles, 1.0))
    est = mc.estimate(mc.run(mc.RunConfig(seed=5, trials_per_pair=200_000, ensemble=res.ensemble)))
    for p, e in zip(est.pairs, quantum_expectations(state, angles)):
        assert within(p.cond_corr, e, p.cond_corr_se)


def test_eta_point_eight_generalized_correlation(solved, singlet, canonical):
    _, res = solved(0.8)
    est = mc.estimate(mc.run(mc.RunConfig(seed=11, trials_per_pair=400_000, ensemble=res.ensemble)))
    for p, e in zip(est.pairs, quantum_expectations(singlet, canonical)):
        assert within(p.gen_corr, generalized_correlation(0.8, 0.8, e), p.gen_corr_se)
        assert within(p.cond_corr, e, p.cond_corr_se)
    stats = mc.bchsh_statistics(est)
    assert stats["bchsh_modified"] <= 2 + 3 * stats["bchsh_modified_se"]
    assert within(stats["bchsh_modified"], 0.64 * 2 * math.sqrt(2), stats["bchsh_modified_se"])
    assert within(stats["chsh_conditional"], 2 * math.sqrt(2), stats["chsh_conditional_se"])


def test_instrument_efficiency_composes(solved):
    _, res = solved(0.8)
    k = 0.6
    est = mc.estimate(mc.run(mc.RunConfig(seed=2, trials_per_pair=200_000,
                                          ensemble=res.ensemble, instrument_k=k)))
    for p, (ia, ib) in zip(est.pairs, ms.PAIRS):
        exact_a = k * ms.detection_probability(res.ensemble, "A", ia)
        exact_b = k * ms.detection_probability(res.ensemble, "B", ib)
        assert within(p.p_detect_a, exact_a, p.p_detect_a_se)
        assert within(p.p_detect_b, exact_b, p.p_detect_b_se)


def test_trials_one_is_valid(solved):
    _, res = solved(0.8)
    cfg = mc.RunConfig(seed=0, trials_per_pair=1, ensemble=res.ensemble)
    doc = mc.report(cfg, mc.run(cfg))
    mc.dumps(doc)
    assert doc["tally"]["trials_per_pair"] == 1
