import math
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats
from scipy.special import comb

from pgsim.bridges import SimpleBridge
from pgsim.errors import ConsistencyError, ParameterError
from pgsim.mass_partition import MassPartition, first_size_biased_pick
from pgsim.partitions import (
    MergeOutcome, SetPartition, aldous_kernel, beta_splitting_check, canonical_labels,
    coag_mass, discrete_base_project, epg_coag_batch, epg_coag_partition, frag_mass,
    merge_size_pmf, partition_keys, sample_block_counts, sample_partition, sample_partitions,
    set_partitions,
)
from pgsim.rand_core import ZetaSpec, sample_beta
from pgsim.sticks import EPG, PD, PG, largest_weight, stick_stream_to_partition
from pgsim.verify import empirical_partition_law, eppf_oracle, tv_distance

BELL = {1: 1, 2: 2, 3: 5, 4: 15, 5: 52, 6: 203}


def label_arrays(max_n=12):
    return st.lists(st.integers(0, 5), min_size=1, max_size=max_n)


@given(label_arrays())
def test_set_partition_round_trip(labels):
    p = SetPartition.from_labels(labels)
    flat = sorted(x for b in p.blocks for x in b)
    assert flat == list(range(1, len(labels) + 1))
    assert SetPartition.from_labels(p.labels()) == p
    assert sum(p.sizes()) == p.n and p.block_count == len(set(labels))


def test_set_partition_validation():
    with pytest.raises(ConsistencyError):
        SetPartition(3, ((1, 2), (2, 3)))
    with pytest.raises(ConsistencyError):
        SetPartition(3, ((1,), (3,)))
    p = SetPartition(4, ((4, 2), (1,), (3,)))
    assert p.blocks == ((1,), (2, 4), (3,))
    assert p.to_json() == "[[1], [2, 4], [3]]"
    assert p.csv_row() == "4,3,2,1,1"


def test_merge_outcome_counts():
    out = SetPartition(4, ((1, 2, 3), (4,)))
    MergeOutcome(3, 2, out)
    MergeOutcome(2, 0, out)
    with pytest.raises(ConsistencyError):
        MergeOutcome(3, 0, out)


def test_canonical_labels_and_keys():
    lab = canonical_labels(np.array([[5, 5, 2, -1], [0, 1, 0, 1]]))
    assert lab.tolist() == [[0, 0, 1, 2], [0, 1, 0, 1]]
    keys = partition_keys(lab)
    assert keys[0] != keys[1] and len(keys[0]) == 4


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6])
def test_set_partitions_count(n):
    parts = list(set_partitions(n))
    assert len(parts) == BELL[n] == len(set(parts))


@pytest.mark.parametrize("kind", [PD(0.5, 1.0), PG(0.4, ZetaSpec.gamma(2.0)),
                                  EPG(0.5, ZetaSpec.const(1.0))])
def test_single_customer(kind, rng):
    assert sample_partition(kind, 1, rng).blocks == ((1,),)


def test_dirichlet_two_customers(rng):
    theta, N = 2.0, 100_000
    lab = sample_partitions(PD(0.0, theta), 2, N, rng)
    freq = np.mean(lab[:, 1] == 0)
    p = 1 / (1 + theta)
    assert abs(freq - p) < 3 * math.sqrt(p * (1 - p) / N)


@pytest.mark.parametrize("a,theta", [(0.5, 1.0), (0.3, 0.0), (0.7, -0.4)])
def test_eppf_oracle_normalised(a, theta):
    assert sum(eppf_oracle(a, theta, 5).values()) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("name,make", [
    ("crp", lambda a, th: (PD(a, th), None)),
    ("pd-sticks", lambda a, th: (PD(a, th), "sticks")),
    ("pg", lambda a, th: (PG(a, ZetaSpec.gamma(th / a)), None)),
    ("epg", lambda a, th: (EPG(a, ZetaSpec.gamma((th + a) / a)), None)),
])
def test_partition_samplers_match_eppf(name, make, rng):
    a, theta, n = 0.5, 1.0, 5
    kind, method = make(a, theta)
    lab = sample_partitions(kind, n, 50_000, rng, method=method)
    assert tv_distance(empirical_partition_law(lab), eppf_oracle(a, theta, n)) < 0.02


def test_coag_matches_eppf(rng):
    a, theta = 0.3, 0.5
    c = epg_coag_batch(a, ZetaSpec.gamma((theta + a) / a), 5, 50_000, rng)
    assert tv_distance(empirical_partition_law(c.output_labels), eppf_oracle(a, theta, 5)) < 0.02


def test_coag_matches_epg_sampler(rng):
    a, z = 0.5, ZetaSpec.const(0.8)
    coag = epg_coag_batch(a, z, 4, 50_000, rng).output_labels
    direct = sample_partitions(EPG(a, z), 4, 50_000, rng)
    assert tv_distance(empirical_partition_law(coag), empirical_partition_law(direct)) < 0.02


def test_coag_zero_zeta_single_block(rng):
    out, merge = epg_coag_partition(0.5, ZetaSpec.zero(), 7, rng)
    assert out.blocks == (tuple(range(1, 8)),)
    assert merge.merged_count == merge.input_blocks


def test_coag_merge_counts_follow_pmf(rng):
    a, theta = 0.5, 0.5
    c = epg_coag_batch(a, ZetaSpec.gamma((theta + a) / a), 6, 60_000, rng)
    b = 3
    obs = np.bincount(c.merged_count[c.input_blocks == b], minlength=b + 1)
    exp = merge_size_pmf(a, theta, b) * obs.sum()
    assert stats.chisquare(obs, exp).pvalue > 1e-3


@pytest.mark.parametrize("b", [0, 1, 3, 7])
def test_merge_pmf_uniform_at_half_zero(b):
    np.testing.assert_allclose(merge_size_pmf(0.5, 0.0, b), np.full(b + 1, 1 / (b + 1)),
                               rtol=1e-12)


@pytest.mark.parametrize("b", [1, 4, 9])
def test_merge_pmf_linear_at_half_half(b):
    j = np.arange(b + 1)
    np.testing.assert_allclose(merge_size_pmf(0.5, 0.5, b),
                               2 * (b + 1 - j) / ((b + 1) * (b + 2)), rtol=1e-12)


def test_merge_pmf_dirichlet_limit():
    b = 6
    j = np.arange(b + 1)
    np.testing.assert_allclose(merge_size_pmf(0.0, 1.0, b), comb(b, j) * 0.5 ** b, rtol=1e-12)
    # the small-alpha pmf approaches the binomial
    assert np.max(np.abs(merge_size_pmf(1e-5, 1.0, b) - merge_size_pmf(0.0, 1.0, b))) < 1e-3


@settings(max_examples=50, deadline=None)
@given(st.floats(0.02, 0.98), st.floats(0.0, 5.0), st.integers(0, 200))
def test_merge_pmf_normalised(a, shift, b):
    theta = -a + 0.01 + shift
    p = merge_size_pmf(a, theta, b)
    assert np.all(p >= 0) and abs(p.sum() - 1) < 1e-12


def test_merge_pmf_rejects_bad_theta():
    with pytest.raises(ParameterError):
        merge_size_pmf(0.5, -0.5, 3)


def test_aldous_kernel_cases():
    np.testing.assert_allclose(aldous_kernel(0.0, 8), np.full(7, 1 / 7), rtol=1e-12)
    j = np.arange(1, 8)
    np.testing.assert_allclose(aldous_kernel(math.inf, 8), comb(8, j) / (2 ** 8 - 2), rtol=1e-12)


def test_beta_splitting_proportionality():
    assert beta_splitting_check(0.3, 10) < 1e-10
    assert beta_splitting_check(0.5, 12) < 1e-10
    assert beta_splitting_check(0.8, 25) < 1e-10
    # half gives the uniform split
    p = merge_size_pmf(0.5, 0.0, 9)[1:9]
    np.testing.assert_allclose(p / p.sum(), np.full(8, 1 / 8), rtol=1e-12)
    # small alpha approaches the binomial split
    j = np.arange(1, 8)
    p = merge_size_pmf(1e-4, 1 - 2e-4, 8)[1:8]
    np.testing.assert_allclose(p / p.sum(), comb(8, j) / (2 ** 8 - 2), rtol=1e-2)


def test_coag_mass_degenerate(rng):
    mp = MassPartition(np.array([0.5, 0.3, 0.2]), 0.0)
    assert np.allclose(coag_mass(mp, SimpleBridge(1.0, 0.5), rng).weights, mp.weights)
    assert np.allclose(coag_mass(mp, SimpleBridge(0.0, 0.5), rng).weights, [1.0])


def test_coag_mass_lowers_theta(rng):
    a, theta, N = 0.5, 0.5, 2000
    out = []
    for _ in range(N):
        mp = stick_stream_to_partition(PD(a, theta + 1), 1e-3, rng)
        q = sample_beta((theta + a) / a, (1 - a) / a, rng)
        out.append(coag_mass(mp, SimpleBridge(float(q), 0.5), rng).weights[0])
    direct = [largest_weight(PD(a, theta), rng) for _ in range(N)]
    assert stats.ks_2samp(out, direct).pvalue > 1e-3


def test_frag_mass_identity_and_conservation(rng):
    mp = MassPartition(np.array([0.5, 0.3, 0.2]), 0.0)
    same = frag_mass(mp, 1, MassPartition(np.array([1.0]), 0.0))
    np.testing.assert_allclose(same.weights, mp.weights)
    split = frag_mass(mp, None, MassPartition(np.array([0.6, 0.25, 0.15]), 0.0), rng)
    assert abs(split.total - mp.total) < 1e-12 and split.weights.size == 5
    with pytest.raises(ParameterError):
        frag_mass(mp, 3, MassPartition(np.array([1.0]), 0.0))


def test_frag_mass_raises_theta(rng):
    a, theta, N = 0.5, 0.5, 2000
    picks = []
    for _ in range(N):
        mp = stick_stream_to_partition(PD(a, theta), 1e-3, rng)
        frag = stick_stream_to_partition(PD(a, 1 - a), 1e-3, rng)
        out = frag_mass(MassPartition(mp.weights, 0.0, mp.eps_trunc), None,
                        MassPartition(frag.weights, 0.0, frag.eps_trunc), rng)
        picks.append(first_size_biased_pick(out, rng))
    assert stats.kstest(picks, stats.beta(1 - a, theta + 1 + a).cdf).pvalue > 1e-3


def test_coag_then_frag_returns_class(rng):
    a, theta, N = 0.5, 0.5, 2000
    out = []
    for _ in range(N):
        mp = stick_stream_to_partition(PD(a, theta + 1), 1e-3, rng)
        q = float(sample_beta((theta + a) / a, (1 - a) / a, rng))
        mid = coag_mass(mp, SimpleBridge(q, 0.5), rng)
        frag = stick_stream_to_partition(PD(a, 1 - a), 1e-3, rng)
        back = frag_mass(MassPartition(mid.weights, 0.0, mid.eps_trunc), None,
                         MassPartition(frag.weights, 0.0, frag.eps_trunc), rng)
        out.append(back.weights[0])
    direct = [largest_weight(PD(a, theta + 1), rng) for _ in range(N)]
    assert stats.ks_2samp(out, direct).pvalue > 1e-3


def test_discrete_base_project_cases():
    p = SetPartition(5, ((1, 3), (2,), (4, 5)))
    assert discrete_base_project(p, [0, 1, 2]) == p
    assert discrete_base_project(p, [7, 7, 7]).blocks == ((1, 2, 3, 4, 5),)
    assert discrete_base_project(p, [0, 1, 0]).blocks == ((1, 3, 4, 5), (2,))
    with pytest.raises(ParameterError):
        discrete_base_project(p, [0, 1])


def test_two_atom_base_single_block_frequency(rng):
    # P(K=1,2,3) = 1/3, 1/2, 1/6 for PD(0,1) on three customers; all blocks
    # share one of two equal atoms w.p. 2 (1/2)^K, so the total is 5/8
    oracle = eppf_oracle(0.0, 1.0, 3)
    exact = sum(p * 2 * 0.5 ** (max(lab) + 1) for lab, p in oracle.items())
    assert exact == pytest.approx(5 / 8, abs=1e-14)
    N = 20_000
    hits = 0
    for _ in range(N):
        p = sample_partition(PD(0.0, 1.0), 3, rng)
        labels = (rng.uniform(p.block_count) < 0.5).astype(int)
        hits += discrete_base_project(p, labels).block_count == 1
    assert abs(hits / N - exact) < 3 * math.sqrt(exact * (1 - exact) / N)


def test_block_counts_match_crp(rng):
    a, theta, n = 0.5, 1.0, 30
    fast = sample_block_counts(a, theta, n, 20_000, rng)
    crp = sample_partitions(PD(a, theta), n, 20_000, rng).max(axis=1) + 1
    assert stats.ks_2samp(fast, crp).pvalue > 1e-3
