import math
from fractions import Fraction

import numpy as np
import pytest
from scipy import integrate, stats as sps

from coreperiphery.graph import Graph
from coreperiphery.sbm import (
    BlockStats,
    ChainState,
    ModelKind,
    block_stats,
    check_densities,
    coreness,
    expand_densities,
    init_state,
    log_acceptance,
    log_likelihood,
    log_prior_p,
    log_prior_theta,
    run_gibbs,
    sample_densities,
    sample_truncated_beta,
)
from coreperiphery.sbm import _kernels
from coreperiphery.synth import PlantedConfig, layered_matrix, sbm_generate

from conftest import random_graph

TRIANGLE = Graph.from_edges(3, [(0, 1), (1, 2), (0, 2)])


def test_model_kind():
    assert ModelKind.hub_and_spoke().n_densities == 3
    assert ModelKind.layered(5).n_densities == 5
    with pytest.raises(ValueError, match="layers must be ≥ 2"):
        ModelKind.layered(1)
    assert ModelKind.parse("layered", 3) == ModelKind.layered(3)


def test_block_stats_triangle():
    s = block_stats(TRIANGLE, [0, 0, 1], 2)
    assert s.sizes.tolist() == [2, 1]
    assert (s.edges[0, 0], s.edges[0, 1], s.edges[1, 1]) == (1, 2, 0)
    assert (s.capacity[0, 0], s.capacity[0, 1], s.capacity[1, 1]) == (1, 2, 0)


def test_block_stats_single_block():
    g = random_graph(12, 0.3, 1)
    s = block_stats(g, np.zeros(12, dtype=int), 1)
    assert s.edges[0, 0] == g.n_edges
    assert s.capacity[0, 0] == 12 * 11 // 2


def test_block_stats_empty_block():
    with pytest.raises(ValueError):
        block_stats(TRIANGLE, [0, 0, 0], 2)


def _double_loop_stats(g, theta, n_blocks):
    adj = g.adjacency()
    m = np.zeros((n_blocks, n_blocks), dtype=int)
    cap = np.zeros((n_blocks, n_blocks), dtype=int)
    for i in range(g.n_nodes):
        for j in range(i + 1, g.n_nodes):
            r, s = sorted((theta[i], theta[j]))
            cap[r, s] += 1
            m[r, s] += adj[i, j]
    return m, cap


def test_block_stats_double_loop_oracle():
    rng = np.random.default_rng(5)
    g = random_graph(30, 0.2, 2)
    theta = rng.integers(0, 4, size=30)
    s = block_stats(g, theta, 4)
    m, cap = _double_loop_stats(g, theta, 4)
    assert np.array_equal(np.triu(s.edges), m)
    assert np.array_equal(np.triu(s.capacity), cap)
    assert np.array_equal(s.layer_alpha, [m[: k + 1, k].sum() for k in range(4)])
    assert np.array_equal(s.layer_beta, [(cap - m)[: k + 1, k].sum() for k in range(4)])


def test_log_likelihood_two_nodes():
    kind = ModelKind.layered(2)
    edge = Graph.from_edges(2, [(0, 1)])
    s = block_stats(edge, [0, 1], 2)
    assert log_likelihood(s, [0.9, 0.5], kind) / math.log(2) == pytest.approx(-1.0)
    empty = Graph.from_edges(2, [])
    s = block_stats(empty, [0, 1], 2)
    assert log_likelihood(s, [0.5, 0.25], kind) == pytest.approx(math.log(0.75))


def _generic_ll(g, theta, pmat):
    adj = g.adjacency()
    tot = 0.0
    for i in range(g.n_nodes):
        for j in range(i + 1, g.n_nodes):
            p = pmat[theta[i], theta[j]]
            tot += math.log(p) if adj[i, j] else math.log1p(-p)
    return tot


@pytest.mark.parametrize("seed", range(5))
def test_log_likelihood_generic_oracle(seed):
    g, theta = sbm_generate(PlantedConfig((4, 4, 4), layered_matrix([0.8, 0.4, 0.1])), seed)
    p = [0.7, 0.3, 0.05]
    kind = ModelKind.layered(3)
    s = block_stats(g, theta, 3)
    assert log_likelihood(s, p, kind) == pytest.approx(_generic_ll(g, theta, expand_densities(p, kind)), abs=1e-10)
    hs = ModelKind.hub_and_spoke()
    t2 = np.minimum(theta, 1)
    s2 = block_stats(g, t2, 2)
    q = [0.6, 0.3, 0.1]
    assert log_likelihood(s2, q, hs) == pytest.approx(_generic_ll(g, t2, expand_densities(q, hs)), abs=1e-10)


def test_log_prior_theta_small():
    assert log_prior_theta([2, 1]) == pytest.approx(math.log(1 / 18))
    assert log_prior_theta([1, 1]) == pytest.approx(math.log(1 / 4))
    with pytest.raises(ValueError):
        log_prior_theta([3, 0])


def test_log_prior_theta_rational_oracle():
    sizes = [5, 5, 5, 5]
    N, L = 20, 4
    prob = Fraction(math.prod(math.factorial(n) for n in sizes), math.factorial(N))
    prob /= math.comb(N - 1, L - 1) * N
    assert log_prior_theta(sizes) == pytest.approx(math.log(prob), abs=1e-10)
    assert log_prior_theta(sizes, 20, 4) == log_prior_theta(sizes)


def test_log_prior_p():
    assert log_prior_p([0.5, 0.3, 0.1], ModelKind.hub_and_spoke()) == pytest.approx(math.log(6))
    assert log_prior_p([0.5, 0.3, 0.2, 0.1], ModelKind.layered(4)) == pytest.approx(math.log(24))
    assert log_prior_p([0.5, 0.3], ModelKind.layered(2)) == pytest.approx(math.log(2))
    with pytest.raises(ValueError):
        log_prior_p([0.3, 0.5], ModelKind.layered(2))
    with pytest.raises(ValueError):
        check_densities([0.5, 0.3], ModelKind.hub_and_spoke())


# ---------------------------------------------------------------- truncated beta


def _quad_cdf(a, b, lo, hi):
    """CDF of the truncated kernel by adaptive quadrature, normalized in log space."""
    mode = a / (a + b) if a + b > 0 else 0.5
    peak = min(max(mode, lo), hi)
    logc = a * math.log(peak) + b * math.log1p(-peak) if 0 < peak < 1 else 0.0

    def f(x):
        return math.exp(a * math.log(x) + b * math.log1p(-x) - logc) if 0 < x < 1 else (1.0 if a == b == 0 else 0.0)

    pts = [p for p in (peak,) if lo < p < hi]
    total = integrate.quad(f, lo, hi, points=pts or None, limit=200, epsabs=0, epsrel=1e-12)[0]

    def cdf(x):
        x = np.atleast_1d(x)
        out = np.empty(x.size)
        for k, v in enumerate(x):
            inner = [p for p in pts if p < v]
            out[k] = integrate.quad(f, lo, v, points=inner or None, limit=200, epsabs=0, epsrel=1e-10)[0] / total
        return out

    return cdf


def test_truncbeta_flat_is_uniform():
    rng = np.random.default_rng(0)
    x = np.array([sample_truncated_beta(0, 0, 0.2, 0.8, rng) for _ in range(5000)])
    assert x.min() > 0.2 and x.max() < 0.8
    assert sps.kstest(x, sps.uniform(0.2, 0.6).cdf).pvalue > 0.01


def test_truncbeta_mean():
    rng = np.random.default_rng(1)
    x = np.array([sample_truncated_beta(50, 50, 0.0, 1.0, rng) for _ in range(20000)])
    sd = math.sqrt(51 * 51 / (102 ** 2 * 103))
    assert abs(x.mean() - 51 / 102) < 4 * sd / math.sqrt(x.size)


def test_truncbeta_mode_outside():
    rng = np.random.default_rng(2)
    x = np.array([sample_truncated_beta(50, 5, 0.0, 0.5, rng) for _ in range(5000)])
    assert x.max() < 0.5
    assert sps.kstest(x, _quad_cdf(50, 5, 0.0, 0.5)).pvalue > 0.01


def test_truncbeta_errors():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        sample_truncated_beta(1, 1, 0.5, 0.5, rng)
    with pytest.raises(ValueError):
        sample_truncated_beta(1, 1, 0.6, 0.5, rng)


def test_truncbeta_extreme_intervals_stay_open():
    rng = np.random.default_rng(3)
    for a, b, lo, hi in [(5000, 10, 0.0, 0.2), (0, 10**6, 0.5, 0.50001), (10**5, 10**5, 0.9, 0.95)]:
        for _ in range(20):
            x = sample_truncated_beta(a, b, lo, hi, rng)
            assert lo < x < hi


# ---------------------------------------------------------------- densities


def test_sample_densities_order_and_concentration():
    rng = np.random.default_rng(4)
    g, theta = sbm_generate(PlantedConfig((30, 30, 30), layered_matrix([0.9, 0.3, 0.05])), 7)
    kind = ModelKind.layered(3)
    s = block_stats(g, theta, 3)
    p = np.array([0.6, 0.5, 0.4])
    for _ in range(200):
        p = sample_densities(s, p, kind, rng)
        assert 1 > p[0] > p[1] > p[2] > 0
    assert p[0] > 0.8


def test_sample_densities_single_layer():
    rng = np.random.default_rng(5)
    s = BlockStats(np.array([10]), np.array([[30]]), np.array([[45]]))

    class One:
        is_layered = True
        n_blocks = 1
        n_densities = 1

    draws = np.array([sample_densities(s, [0.5], One, rng)[0] for _ in range(4000)])
    assert sps.kstest(draws, sps.beta(31, 16).cdf).pvalue > 0.01


# ---------------------------------------------------------------- label moves


def _posterior(g, theta, p, kind):
    s = block_stats(g, theta, kind.n_blocks)
    return log_likelihood(s, p, kind) + log_prior_theta(s.sizes)


def _nbr_prob(g, theta, stats, i, r, eps):
    """Neighborhood proposal probability from the formula, by brute force."""
    L = stats.n_blocks
    nb = g.neighbors(i)
    m_sym = stats.edges + np.diag(np.diag(stats.edges))  # internal edges counted twice
    m_s = m_sym.sum(axis=1)
    return sum((m_sym[theta[j], r] + eps) / (m_s[theta[j]] + eps * L) for j in nb) / nb.size


@pytest.mark.parametrize("proposal", ["uniform", "neighborhood"])
def test_log_acceptance_matches_recompute(proposal):
    rng = np.random.default_rng(6)
    g = random_graph(25, 0.25, 3)
    kind = ModelKind.layered(3)
    st = init_state(g, kind, rng)
    for _ in range(40):
        i = int(rng.integers(g.n_nodes))
        s = int(rng.integers(3))
        got = log_acceptance(st, i, s, proposal=proposal, eps=0.1)
        r = st.theta[i]
        if s == r:
            assert got == 0.0
            continue
        new = st.theta.copy()
        new[i] = s
        if np.bincount(new, minlength=3).min() == 0:
            assert got == -np.inf
            continue
        want = _posterior(g, new, st.p, kind) - _posterior(g, st.theta, st.p, kind)
        if proposal == "neighborhood" and g.degrees[i] > 0:
            fwd = _nbr_prob(g, st.theta, st.stats(), i, s, 0.1)
            rev = _nbr_prob(g, new, block_stats(g, new, 3), i, r, 0.1)
            want += math.log(rev) - math.log(fwd)
        assert got == pytest.approx(want, abs=1e-9)
        assert st.is_consistent()


@pytest.mark.parametrize("proposal", ["uniform", "neighborhood"])
def test_incremental_stats_match_recount(proposal):
    rng = np.random.default_rng(7)
    g = random_graph(60, 0.1, 4)
    st = init_state(g, ModelKind.layered(4), rng)
    st.p = np.array([0.2, 0.15, 0.1, 0.05])
    st.label_steps(50_000, proposal=proposal)
    assert st.counters[_kernels.ACCEPTED] >= 1000
    assert st.is_consistent()
    assert st.tau == 50_000


def test_operation_counters_bound():
    rng = np.random.default_rng(8)
    g = random_graph(80, 0.1, 5)
    L = 3
    st = init_state(g, ModelKind.layered(L), rng)
    n = 20_000
    st.label_steps(n)
    c = st.counters
    assert c[_kernels.PROPOSED] == n
    genuine = c[_kernels.PROPOSED] - c[_kernels.NOOP] - c[_kernels.EMPTY]
    # each genuine move costs its degree plus O(L) block-pair terms
    assert c[_kernels.OPS] <= genuine * (g.degrees.max() + 6 * L)
    assert c[_kernels.OPS] >= genuine * 4 * L
    # noop rate close to 1/L for uniform proposals
    assert abs(c[_kernels.NOOP] / n - 1 / L) < 0.02


def test_uniform_noop_always_accepted_and_favorable_moves():
    rng = np.random.default_rng(9)
    g = random_graph(20, 0.3, 6)
    st = init_state(g, ModelKind.hub_and_spoke(), rng)
    assert log_acceptance(st, 0, st.theta[0]) == 0.0


# ---------------------------------------------------------------- chains


def test_run_gibbs_minimal():
    g = random_graph(30, 0.2, 7)
    res = run_gibbs(g, ModelKind.layered(3), 2, 30, rng=1)
    assert res.n_retained == 1
    assert np.array_equal(res.marginals.sum(axis=1), np.ones(30))
    assert set(np.unique(res.marginals)) <= {0.0, 1.0}
    assert np.array_equal(res.map_partition, res.samples[0])


def test_run_gibbs_validation():
    g = random_graph(5, 0.5, 8)
    with pytest.raises(ValueError):
        run_gibbs(g, ModelKind.layered(6), 4, 10, rng=0)
    with pytest.raises(ValueError):
        run_gibbs(g, ModelKind.layered(2), 1, 10, rng=0)
    with pytest.raises(ValueError):
        run_gibbs(g, ModelKind.layered(2), 4, 0, rng=0)


def test_run_gibbs_reproducible_and_ordered():
    g = random_graph(50, 0.15, 9)
    a = run_gibbs(g, ModelKind.layered(3), 10, 200, rng=42)
    b = run_gibbs(g, ModelKind.layered(3), 10, 200, rng=42)
    assert np.array_equal(a.samples, b.samples)
    assert np.array_equal(a.log_posterior_trace, b.log_posterior_trace)
    assert np.all(np.diff(a.p_final) < 0)
    assert np.allclose(a.marginals.sum(axis=1), 1)
    assert np.array_equal(a.map_partition, np.argmax(a.marginals, axis=1))
    assert np.all(a.coreness >= 0) and np.all(a.coreness <= 1 - 1 / 3 + 1e-12)


def test_gibbs_on_er_graph_mixes():
    g = random_graph(200, 0.05, 10)
    res = run_gibbs(g, ModelKind.hub_and_spoke(), 40, 10 * 200, rng=3)
    assert res.acceptance_rate > 0.3
    # without structure node labels keep changing: marginals are far from one-hot
    assert np.mean(res.marginals.max(axis=1)) < 0.9


def test_coreness_values():
    assert coreness([[0.0, 1.0]]).tolist() == [0.0]
    assert coreness([[1.0, 0.0, 0.0]])[0] == pytest.approx(1 - 1 / 3)
    assert coreness([[0.5, 0.5]])[0] == pytest.approx(0.25)


def test_chain_state_log_posterior():
    rng = np.random.default_rng(11)
    g = random_graph(20, 0.3, 11)
    st = init_state(g, ModelKind.layered(2), rng)
    want = _posterior(g, st.theta, st.p, st.kind) + math.log(2)
    assert st.log_posterior() == pytest.approx(want)
    st2 = ChainState.from_partition(g, st.kind, st.theta, st.p, rng)
    assert st2.is_consistent()
