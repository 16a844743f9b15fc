import numpy as np
import pytest

from meshrelay import (
    AirChannelParams,
    Arena,
    Deployment,
    GroundChannelParams,
    aggregate,
    expected_aggregate_matrix,
    expected_relay_matrix,
    ground_probability_matrix,
    neighborhoods,
    relay_adjacency,
    sample_ground_adjacency,
    sample_uav_links,
    uav_probability_vector,
)

GP = GroundChannelParams()
AP = AirChannelParams()


def make_dep(points_xy):
    return Deployment(np.asarray(points_xy, dtype=float),
                      arena=Arena(-50.0, -50.0, 50.0, 50.0))


class TestGroundProbabilityMatrix:
    def test_pair_at_ten_meters(self):
        probs = ground_probability_matrix(make_dep([(0, 0), (10, 0)]), GP)
        assert probs[0, 1] == pytest.approx(0.5, abs=1e-12)
        assert probs[1, 0] == probs[0, 1]

    def test_pair_at_one_meter(self):
        probs = ground_probability_matrix(make_dep([(0, 0), (1, 0)]), GP)
        assert probs[0, 1] == pytest.approx(1.0, abs=1e-12)

    def test_single_node(self):
        probs = ground_probability_matrix(make_dep([(0, 0)]), GP)
        assert probs.shape == (1, 1)
        assert probs[0, 0] == 1.0

    def test_unit_diagonal_and_symmetry(self):
        rng = np.random.default_rng(3)
        probs = ground_probability_matrix(make_dep(rng.uniform(-20, 20, (6, 2))), GP)
        assert np.array_equal(probs, probs.T)
        assert np.all(np.diag(probs) == 1.0)


class TestSampling:
    def test_certain_links(self):
        probs = np.ones((4, 4))
        a = sample_ground_adjacency(probs, np.random.default_rng(0))
        assert np.array_equal(a, np.ones((4, 4)))

    def test_impossible_links(self):
        probs = np.eye(4)
        a = sample_ground_adjacency(probs, np.random.default_rng(0))
        assert np.array_equal(a, np.eye(4))

    def test_sampled_matrix_structure(self):
        probs = np.full((5, 5), 0.5)
        np.fill_diagonal(probs, 1.0)
        rng = np.random.default_rng(1)
        for _ in range(50):
            a = sample_ground_adjacency(probs, rng)
            assert np.array_equal(a, a.T)
            assert np.all(np.diag(a) == 1.0)
            assert set(np.unique(a)) <= {0.0, 1.0}

    def test_half_probability_frequencies(self):
        # 1e5 draws, entries Bernoulli(1/2): 3-sigma binomial bound
        m, n = 4, 100_000
        probs = np.full((m, m), 0.5)
        np.fill_diagonal(probs, 1.0)
        rng = np.random.default_rng(7)
        total = np.zeros((m, m))
        for _ in range(n):
            total += sample_ground_adjacency(probs, rng)
        freq = total / n
        bound = 3.0 * np.sqrt(0.25 / n)
        iu = np.triu_indices(m, 1)
        assert np.all(np.abs(freq[iu] - 0.5) <= bound)

    def test_uav_links_extremes(self):
        rng = np.random.default_rng(0)
        assert np.array_equal(sample_uav_links(np.ones(5), rng), np.ones(5))
        assert np.array_equal(sample_uav_links(np.zeros(5), rng), np.zeros(5))

    def test_uav_links_frequency(self):
        rng = np.random.default_rng(11)
        p = 0.3
        draws = np.array([sample_uav_links(np.full(4, p), rng) for _ in range(100_000)])
        bound = 3.0 * np.sqrt(p * (1 - p) / len(draws))
        assert np.all(np.abs(draws.mean(axis=0) - p) <= bound)


class TestRelayMatrices:
    def test_outer_product(self):
        a = relay_adjacency(np.array([1.0, 0.0, 1.0]))
        assert np.array_equal(a, np.array([[1, 0, 1], [0, 0, 0], [1, 0, 1]], dtype=float))

    def test_zero_vector(self):
        assert np.array_equal(relay_adjacency(np.zeros(4)), np.zeros((4, 4)))

    def test_all_ones(self):
        assert np.array_equal(relay_adjacency(np.ones(3)), np.ones((3, 3)))

    def test_rank_one_consistency(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            v = (rng.random(6) < 0.5).astype(float)
            a = relay_adjacency(v)
            for i in range(6):
                for j in range(6):
                    assert a[i, j] == a[i, i] * a[j, j]

    def test_expected_relay_certain(self):
        assert np.array_equal(expected_relay_matrix(np.ones(2)), np.ones((2, 2)))

    def test_expected_relay_half(self):
        e = expected_relay_matrix(np.array([0.5, 0.5]))
        assert e[0, 1] == pytest.approx(0.25)
        assert e[0, 0] == pytest.approx(0.5)  # binary entries are idempotent

    def test_expected_relay_single(self):
        assert np.array_equal(expected_relay_matrix(np.array([0.7])), np.array([[0.7]]))

    def test_expected_matches_empirical(self):
        rng = np.random.default_rng(13)
        p = np.array([0.2, 0.6, 0.9, 0.4])
        n = 100_000
        draws = rng.random((n, 4)) < p
        emp = (draws.astype(float).T @ draws.astype(float)) / n
        expected = expected_relay_matrix(p)
        sd = np.sqrt(expected * (1 - expected) / n)
        assert np.all(np.abs(emp - expected) <= 3 * sd + 1e-12)


class TestAggregate:
    def test_or_with_zero(self):
        a_gr = sample_ground_adjacency(np.full((4, 4), 0.5) + 0.5 * np.eye(4),
                                       np.random.default_rng(2))
        assert np.array_equal(aggregate(a_gr, np.zeros((4, 4))), a_gr)

    def test_relay_fills_missing_link(self):
        a_gr = np.eye(3)
        a_uav = relay_adjacency(np.array([0.0, 1.0, 1.0]))
        agg = aggregate(a_gr, a_uav)
        assert agg[1, 2] == 1.0
        assert agg[0, 1] == 0.0

    def test_all_ones(self):
        ones = np.ones((3, 3))
        assert np.array_equal(aggregate(ones, ones), ones)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            aggregate(np.ones((3, 3)), np.ones((4, 4)))

    def test_is_entrywise_or(self):
        rng = np.random.default_rng(17)
        for _ in range(50):
            g = np.triu((rng.random((5, 5)) < 0.4).astype(float), 1)
            g = g + g.T + np.eye(5)
            u = relay_adjacency((rng.random(5) < 0.5).astype(float))
            agg = aggregate(g, u)
            assert np.array_equal(agg, np.logical_or(g, u).astype(float))
            assert np.array_equal(agg, agg.T)
            assert np.all(np.diag(agg) == 1.0)

    def test_monte_carlo_aggregate_frequency(self):
        # empirical aggregated link frequency matches 1-(1-p_gr)(1-q_i q_j)
        dep = make_dep([(0, 0), (8, 0), (4, 6)])
        uav = np.array([2.0, 2.0])
        probs = ground_probability_matrix(dep, GP)
        q = uav_probability_vector(uav, 10.0, dep, AP, GP.g_th)
        rng = np.random.default_rng(23)
        n = 100_000
        iu = np.triu_indices(3, 1)
        g_draw = rng.random((n, len(iu[0]))) < probs[iu]
        a_draw = rng.random((n, 3)) < q
        rel = a_draw[:, iu[0]] & a_draw[:, iu[1]]
        freq = (g_draw | rel).mean(axis=0)
        expected = 1.0 - (1.0 - probs[iu]) * (1.0 - q[iu[0]] * q[iu[1]])
        bound = 3.0 * np.sqrt(expected * (1 - expected) / n) + 1e-12
        assert np.all(np.abs(freq - expected) <= bound)


class TestExpectedAggregate:
    def test_matches_formula(self):
        e_gr = np.array([[1.0, 0.3], [0.3, 1.0]])
        e_rel = np.array([[0.5, 0.2], [0.2, 0.5]])
        out = expected_aggregate_matrix(e_gr, e_rel)
        assert out[0, 1] == pytest.approx(1 - 0.7 * 0.8)
        assert np.all(np.diag(out) == 1.0)


class TestNeighborhoods:
    def test_identity(self):
        assert neighborhoods(np.eye(3)) == [{0}, {1}, {2}]

    def test_complete(self):
        assert neighborhoods(np.ones((3, 3))) == [{0, 1, 2}] * 3

    def test_path_graph(self):
        a = np.array([[1, 1, 0], [1, 1, 1], [0, 1, 1]], dtype=float)
        hoods = neighborhoods(a)
        assert hoods[0] == {0, 1}
        assert hoods[1] == {0, 1, 2}
        assert hoods[2] == {1, 2}

    def test_mutuality(self):
        rng = np.random.default_rng(29)
        a = np.triu((rng.random((6, 6)) < 0.5).astype(float), 1)
        a = a + a.T + np.eye(6)
        hoods = neighborhoods(a)
        for i in range(6):
            assert i in hoods[i]
            for j in hoods[i]:
                assert i in hoods[j]
