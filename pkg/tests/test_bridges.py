import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from pgsim.bridges import (Bridge, SimpleBridge, bridge_eval, bridge_quantile, build_bridge,
                           compose, compose_flow, epg_parts, flow_bridge, ntr_fragmenter,
                           pitman_frag_bridge, pitman_frag_largest, posterior_bridge)
from pgsim.errors import ParameterError
from pgsim.rand_core import RngStream, ZetaSpec
from pgsim.sticks import EPG, PD, PG, largest_weight

GRID = np.linspace(0, 1, 1001)


def grid_with_atoms(*bridges):
    pts = [GRID] + [b.locations for b in bridges if isinstance(b, Bridge)]
    return np.unique(np.concatenate(pts))


def test_simple_bridge_values():
    s = SimpleBridge(0.6, 0.5)
    assert bridge_eval(s, 0.25) == pytest.approx(0.15)
    assert bridge_eval(s, 0.5) == pytest.approx(0.7)
    assert bridge_eval(s, 1.0) == pytest.approx(1.0)
    # flat piece of the quantile over the jump (0.3, 0.7]
    assert np.allclose(bridge_quantile(s, [0.1, 0.3, 0.35, 0.69, 0.9]),
                       [1 / 6, 0.5, 0.5, 0.5, 5 / 6])


def test_identity_and_total_coagulation():
    s = SimpleBridge(1.0, 0.3)
    assert np.allclose(bridge_eval(s, GRID), GRID)
    t = SimpleBridge(0.0, 0.3)
    assert np.array_equal(bridge_eval(t, GRID), (GRID >= 0.3).astype(float))


def test_eval_domain():
    with pytest.raises(ParameterError):
        bridge_eval(SimpleBridge(0.5, 0.5), 1.5)
    with pytest.raises(ParameterError):
        bridge_quantile(SimpleBridge(0.5, 0.5), -0.1)


def test_compose_with_identity(rng):
    b = build_bridge(PD(0.5, 1.0), 1e-6, rng)
    ident = SimpleBridge(1.0, 0.5)
    y = grid_with_atoms(b)
    assert np.allclose(bridge_eval(compose(b, ident), y), bridge_eval(b, y), atol=1e-12)
    assert np.allclose(bridge_eval(compose(ident, b), y), bridge_eval(b, y), atol=1e-12)


def test_compose_is_pointwise_composition(rng):
    outer = build_bridge(PD(0.3, 0.5), 1e-6, rng)
    inner = SimpleBridge(0.4, 0.7)
    y = grid_with_atoms(outer)
    want = bridge_eval(outer, bridge_eval(inner, y))
    assert np.max(np.abs(bridge_eval(compose(outer, inner), y) - want)) < 1e-12


def test_compose_associative(rng):
    a = build_bridge(PD(0.5, 1.0), 1e-6, rng)
    b = SimpleBridge(0.4, 0.3)
    c = build_bridge(PD(0.3, 0.5), 1e-6, rng)
    y = grid_with_atoms(a, c)
    left = bridge_eval(compose(compose(a, b), c), y)
    right = bridge_eval(compose(a, compose(b, c)), y)
    assert np.max(np.abs(left - right)) < 1e-12


def test_epg_two_term_split(rng):
    parts = epg_parts(0.5, ZetaSpec.gamma(2.0), 1e-5, rng)
    y = grid_with_atoms(parts.stream_bridge)
    assert np.max(np.abs(parts.eval_composed(y) - parts.eval_two_term(y))) < 1e-12


def test_epg_zero_zeta_is_single_atom(rng):
    b = build_bridge(EPG(0.5, ZetaSpec.zero()), 1e-4, rng)
    assert b.weights.size == 1
    assert b.weights[0] == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("kind", [PD(0.5, 1.0), PG(0.5, ZetaSpec.gamma(2.0)),
                                  EPG(0.5, ZetaSpec.const(1.0))])
def test_bridge_mean_is_uniform_cdf(rng, kind):
    vals = np.array([bridge_eval(build_bridge(kind, 1e-4, rng), [0.3, 0.8])
                     for _ in range(400)])
    se = vals.std(axis=0) / np.sqrt(len(vals))
    assert np.all(np.abs(vals.mean(axis=0) - [0.3, 0.8]) < 4 * se)


def test_json_layout(rng):
    b = build_bridge(PD(0.5, 0.0), 1e-3, rng)
    d = json.loads(b.to_json())
    assert set(d) == {"atoms", "dust"}
    assert sum(p for _, p in d["atoms"]) + d["dust"] == pytest.approx(1.0, abs=1e-12)


def test_compose_flow_order():
    s1, s2 = SimpleBridge(0.5, 0.2), SimpleBridge(0.7, 0.9)
    f = compose_flow([s1, s2])
    y = np.linspace(0, 1, 101)
    assert np.allclose(bridge_eval(f, y), bridge_eval(s2, bridge_eval(s1, y)), atol=1e-14)


def test_flow_bridge_is_cdf(rng):
    f = flow_bridge(0.5, ZetaSpec.gamma(2.0), 20, rng)
    assert f.total == pytest.approx(1.0, abs=1e-12)
    v = bridge_eval(f, GRID)
    assert np.all(np.diff(v) >= 0)


def test_posterior_bridge_masses(rng):
    b = posterior_bridge(0.5, 1.0, [3, 1], rng)
    assert b.weights.size == 2
    assert b.total == pytest.approx(1.0, abs=1e-12)


def test_pitman_frag_largest_matches_bridge(rng):
    exact = [pitman_frag_largest(0.5, 0.5, 0.3, rng) for _ in range(2000)]
    trunc = [pitman_frag_bridge(0.5, 0.5, 0.3, 1e-3, rng).largest_atom() for _ in range(1000)]
    assert stats.ks_2samp(exact, trunc).pvalue > 1e-3


def test_pitman_frag_recovers_pd_largest(rng):
    # PD(1/4, 0) fragmented by PD(1/2, -1/4) is PD(1/2, 0)
    frag = [pitman_frag_largest(0.5, 0.0, 0.5, rng) for _ in range(10_000)]
    direct = [largest_weight(PD(0.5, 0.0), rng) for _ in range(10_000)]
    assert stats.ks_2samp(frag, direct).pvalue > 1e-3


def first_pick(b: Bridge, rng):
    mp = b.masses()
    w = np.append(mp.weights, mp.dust)
    return w[min(np.searchsorted(np.cumsum(w), rng.uniform() * w.sum(), side="right"),
                 w.size - 1)]


def test_pitman_frag_delta_one_first_pick(rng):
    a, theta = 0.5, 1.0
    picks = [first_pick(pitman_frag_bridge(a, theta, 1.0, 1e-3, rng), rng) for _ in range(2000)]
    assert stats.kstest(picks, stats.beta(1 - a, theta + a).cdf).pvalue > 1e-3


def test_epg_first_pick_is_pd(rng):
    a, theta = 0.5, 0.5
    kind = EPG(a, ZetaSpec.gamma(1 + theta / a))
    picks = [first_pick(build_bridge(kind, 1e-3, rng), rng) for _ in range(2000)]
    assert stats.kstest(picks, stats.beta(1 - a, theta + a).cdf).pvalue > 1e-3


def test_epg_atom_mass_law(rng):
    from pgsim.rand_core import sample_gamma, sample_tau
    a, z = 0.5, ZetaSpec.const(1.5)
    atom = [epg_parts(a, z, 1e-3, rng).atom_mass for _ in range(2000)]
    g = sample_gamma(1 - a, rng, 20_000)
    ref = g / (g + sample_tau(a, 1.5, rng, 20_000))
    assert stats.ks_2samp(atom, ref).pvalue > 1e-3


def test_flow_dust_is_product_of_q():
    from pgsim.chains import simulate_q_chain
    f = flow_bridge(0.5, ZetaSpec.gamma(3.0), 7, RngStream(5, 1))
    q = simulate_q_chain(0.5, ZetaSpec.gamma(3.0), 7, 1, RngStream(5, 1)).factors[0]
    assert f.dust == pytest.approx(np.prod(q), rel=1e-14)


def test_flow_single_step_law(rng):
    a, theta = 0.5, 0.5
    w = [flow_bridge(a, ZetaSpec.gamma((theta + a) / a), 1, rng).weights[0]
         for _ in range(5000)]
    assert stats.kstest(w, stats.beta((1 - a) / a, (theta + a) / a).cdf).pvalue > 1e-3


def test_posterior_single_block_dust(rng):
    a, theta, n = 0.5, 1.0, 6
    d = [posterior_bridge(a, theta, [n], rng).dust for _ in range(5000)]
    assert stats.kstest(d, stats.beta(theta / a + 1, n / a - 1).cdf).pvalue > 1e-3


def test_posterior_dust_matches_q_product(rng):
    from pgsim.chains import simulate_q_chain
    from pgsim.partitions import sample_block_counts
    from pgsim.rand_core import sample_beta
    a, theta, n, N = 0.5, 1.0, 5, 20_000
    K = sample_block_counts(a, theta, n, N, rng)
    dust = sample_beta(theta / a + K, n / a - K, rng, N)
    q = simulate_q_chain(a, ZetaSpec.gamma((theta + a) / a), n, N, rng).factors
    assert stats.ks_2samp(dust, q.prod(axis=1)).pvalue > 1e-3


def test_posterior_rejects_empty_block(rng):
    with pytest.raises(ParameterError):
        posterior_bridge(0.5, 1.0, [2, 0], rng)


def test_ntr_levels_and_jumps(rng):
    paths = [ntr_fragmenter(0.5, ZetaSpec.const(1.0), 5.0, rng) for _ in range(2000)]
    p = next(p for p in paths if p.levels.size > 2)
    assert np.all(np.diff(p.levels) < 0)
    assert np.all(np.diff([p.value(t) for t in np.linspace(0, 5, 50)]) >= 0)
    counts = np.array([p.times.size for p in paths])
    assert abs(counts.mean() - 5.0) < 3 * np.sqrt(5.0 / counts.size)


# dyadic inputs keep the reference q*y + (1-q)[y >= u] free of rounding at the jumps
unit = st.integers(0, 64).map(lambda k: k / 64)


@settings(max_examples=40, deadline=None)
@given(unit, unit, unit, unit)
def test_simple_bridges_compose_to_simple_cdf(q1, u1, q2, u2):
    a, b = SimpleBridge(q1, u1), SimpleBridge(q2, u2)
    c = compose(a, b)
    y = np.arange(257) / 256
    assert np.allclose(bridge_eval(c, y), bridge_eval(a, bridge_eval(b, y)), atol=1e-12)
    assert c.total == pytest.approx(1.0, abs=1e-12)


def test_outer_atom_at_zero_stays_at_zero():
    # inner is flat at 0 until y = 1, yet level 0 is already reached at y = 0
    c = compose(SimpleBridge(0.0, 0.0), SimpleBridge(0.0, 1.0))
    assert c.locations.tolist() == [0.0]
    assert bridge_eval(c, 0.0) == 1.0


def test_tiny_dust_before_heavy_atom_keeps_resolution():
    c = compose(SimpleBridge(0.0, 1e-300), SimpleBridge(1e-77, 1.0))
    assert c.locations[0] == pytest.approx(1e-223, rel=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 1), st.floats(0, 1), st.floats(0, 1))
def test_quantile_inverts_eval(q, u, r):
    s = SimpleBridge(q, u)
    y = bridge_quantile(s, r)
    assert bridge_eval(s, y) >= r - 1e-12
