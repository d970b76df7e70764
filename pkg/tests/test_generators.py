import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from layered_paging.errors import ConfigError
from layered_paging.generators import (
    ZipfParams,
    coupon_cover_time,
    cover_time_lower_bound,
    gen_adaptive_adversary,
    gen_fixed_partition_adversary,
    gen_lru_nemesis,
    gen_yao_random,
    gen_zipf,
    harmonic,
    zipf_probabilities,
)
from layered_paging.model import ModelShape, PageId, validate_trace
from layered_paging.offline import belady_simulate
from layered_paging.policies import LLRU, LRU, Marking
from layered_paging.registry import run_policy

from coverage_exact import expected_cover_time, expected_single


def test_harmonic():
    assert harmonic(1) == 1.0
    assert harmonic(4) == pytest.approx(25 / 12)


# -- Zipf ------------------------------------------------------------------------

def test_zipf_probabilities():
    assert zipf_probabilities(2, 1.0) == pytest.approx([2 / 3, 1 / 3])
    p = zipf_probabilities(5, 1.3, 2.0)
    w = 1 / (np.arange(1, 6) + 2.0) ** 1.3
    assert p == pytest.approx(w / w.sum())
    assert zipf_probabilities(16, 50.0)[0] == pytest.approx(1.0)


def test_zipf_params_validation():
    with pytest.raises(ConfigError):
        ZipfParams(a=0)
    with pytest.raises(ConfigError):
        ZipfParams(b=-1)


def test_zipf_frequency_of_top_expert():
    tr = gen_zipf(ModelShape(2, 1), ZipfParams(1.0), 100_000, seed=8)
    assert abs(np.mean(tr.experts == 1) - 2 / 3) <= 0.01


@given(st.integers(1, 8), st.integers(1, 8), st.integers(0, 30), st.floats(0.05, 5), st.booleans(), st.integers(0, 99))
def test_zipf_traces_validate(n, ell, rounds, a, perm, seed):
    tr = gen_zipf(ModelShape(n, ell), ZipfParams(a, 0.0, perm), rounds, seed)
    assert validate_trace(tr).ok and len(tr) == rounds * ell


def test_zipf_seed_determinism_and_permutation():
    shape = ModelShape(8, 4)
    a = gen_zipf(shape, ZipfParams(1.2), 200, 3)
    assert a == gen_zipf(shape, ZipfParams(1.2), 200, 3)
    assert a != gen_zipf(shape, ZipfParams(1.2), 200, 4)
    p = gen_zipf(shape, ZipfParams(1.2, per_layer_permutation=True), 200, 3)
    # same ranks, relabelled per layer: per-layer frequency profiles coincide up to order
    for j in range(1, 5):
        fa = np.sort(np.bincount(a.experts[a.layers == j], minlength=9))
        fp = np.sort(np.bincount(p.experts[p.layers == j], minlength=9))
        assert fa.tolist() == fp.tolist()


def test_zipf_huge_exponent_is_degenerate():
    tr = gen_zipf(ModelShape(16, 8), ZipfParams(50.0), 500, 1)
    assert np.all(tr.experts == 1)
    assert run_policy("lru", tr, 8).faults_after(8) == 0


# -- nemesis -------------------------------------------------------------------

def test_nemesis_shape_and_cycle():
    nem = gen_lru_nemesis(5, 2)
    assert nem.shape == ModelShape(3, 2)
    tr = nem.trace(4)
    assert tr.experts.tolist() == [1, 1, 2, 2, 3, 3, 1, 1]
    it = iter(nem)
    assert [next(it) for _ in range(4)] == [PageId(1, 1), PageId(2, 1), PageId(1, 2), PageId(2, 2)]
    small = gen_lru_nemesis(3, 2)
    assert small.shape.num_pages == 4 and validate_trace(small.trace(10)).ok


def test_nemesis_rejects_non_divisor():
    with pytest.raises(ConfigError):
        gen_lru_nemesis(4, 2)
    with pytest.raises(ConfigError):
        gen_lru_nemesis(5, 2).requests(7)


def test_nemesis_lru_misses_everything():
    tr = gen_lru_nemesis(5, 2).requests(6000)
    assert run_policy("lru", tr, 5).faults == 6000


@given(st.integers(1, 6), st.integers(1, 5))
def test_nemesis_lru_fault_rate_one(n, ell):
    k = n * ell - 1
    if k < 1:
        return
    tr = gen_lru_nemesis(k, ell).trace(6 * n)
    assert run_policy("lru", tr, k).faults == len(tr)


# -- fixed partition -------------------------------------------------------------

def test_fixed_partition_construction():
    tr = gen_fixed_partition_adversary(2, 2, 2, 4, 3)
    assert [(p.layer, p.expert) for p in tr] == [(1, 1), (2, 2), (1, 1), (2, 1), (1, 1), (2, 2), (1, 1), (2, 1)]
    assert tr.distinct_pages() == 3


@pytest.mark.parametrize("args", [(1, 2, 1, 5, 3), (2, 1, 1, 5, 3), (2, 2, 3, 5, 3), (2, 2, 2, 5, 2), (2, 2, 2, 5, 4)])
def test_fixed_partition_rejects(args):
    with pytest.raises(ConfigError):
        gen_fixed_partition_adversary(*args)


# -- adaptive adversary ------------------------------------------------------------

@pytest.mark.parametrize("policy", [LRU(), LLRU(), LLRU(current_layer_first=False)])
def test_adaptive_adversary_forces_a_fault_every_round(policy):
    run = gen_adaptive_adversary(policy, 2, 2, 500)
    trace, result = run
    assert validate_trace(trace).ok
    assert len(trace) == (2 + 500) * 2
    per_round = result.faults_per_round[2:]
    assert np.all(per_round >= 1)
    assert result.faults_after(run.warmup) >= 500
    # replaying the trace reproduces the driven policy's outcomes
    assert run_policy(policy.name, trace, 3).hits.tolist() == result.hits.tolist()
    assert belady_simulate(trace, 3).faults_after(run.warmup) <= 500 / 2 + run.warmup


def test_adaptive_adversary_rounds_differ_in_one_request():
    trace = gen_adaptive_adversary(LRU(), 3, 2, 100).trace
    grid = trace.experts.reshape(-1, 3)
    diffs = (grid[3:] != grid[2:-1]).sum(axis=1)
    assert np.all(diffs <= 1)


def test_adaptive_adversary_rejects_randomised_policy():
    with pytest.raises(ConfigError):
        gen_adaptive_adversary(Marking(1), 2, 2, 10)


# -- Yao ------------------------------------------------------------------------

def test_yao_single_expert():
    tr = gen_yao_random(1, 5, 40, seed=1)
    assert np.all(tr.experts == 1)
    assert run_policy("lru", tr, 5).faults == 5


def test_yao_fault_rate():
    n, ell, rounds = 2, 4, 20_000
    tr = gen_yao_random(n, ell, rounds, seed=2)
    assert validate_trace(tr).ok
    assert run_policy("lru", tr, n * ell - 1).faults >= rounds / n


# -- coupon collector ------------------------------------------------------------

def test_single_collector_exact_mean_is_n_harmonic():
    for N in (1, 2, 4, 8):
        assert float(expected_single(N)) == pytest.approx(N * harmonic(N))
        assert expected_cover_time(N, 1) == pytest.approx(N * harmonic(N), rel=1e-9)
    assert expected_single(4) == pytest.approx(25 / 3)


def test_cover_time_one_coupon():
    est = coupon_cover_time(1, 7, 50, seed=3)
    assert est.mean == 1 and est.stderr == 0


def test_cover_time_classic_mean():
    est = coupon_cover_time(4, 1, 100_000, seed=0)
    assert abs(est.mean - 25 / 3) / (25 / 3) <= 0.02


@pytest.mark.parametrize("C", [2, 8, 64])
def test_cover_time_two_coupons_dominates_bound(C):
    est = coupon_cover_time(2, C, 20_000, seed=C)
    assert est.mean >= cover_time_lower_bound(2, C)
    assert abs(est.mean - expected_cover_time(2, C)) <= 4 * est.stderr


@pytest.mark.parametrize("N", [2, 4, 8])
@pytest.mark.parametrize("C", [1, 4, 16, 64])
def test_exact_cover_time_dominates_bound(N, C):
    assert expected_cover_time(N, C) >= cover_time_lower_bound(N, C) - 1e-9


def test_bound_uses_natural_log():
    assert cover_time_lower_bound(1, 10**6) == pytest.approx(math.log(10**6) / 6)
    assert cover_time_lower_bound(4, 4) == pytest.approx(25 / 3)


def test_cover_time_monotone_on_small_grid():
    means = {(N, C): coupon_cover_time(N, C, 5000, seed=[N, C]) for N in (2, 3, 4) for C in (1, 2, 4)}
    for (N, C), est in means.items():
        for dN, dC in ((1, 0), (0, 1)):
            nxt = means.get((N + dN, C if dC == 0 else C * 2))
            if nxt is not None:
                assert nxt.mean + 3 * (nxt.stderr + est.stderr) >= est.mean


def test_cover_time_seed_determinism():
    a = coupon_cover_time(4, 4, 1000, seed=9)
    assert a == coupon_cover_time(4, 4, 1000, seed=9)
    with pytest.raises(ConfigError):
        coupon_cover_time(0, 1, 10)
