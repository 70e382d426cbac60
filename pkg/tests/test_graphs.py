"""Graph, clustering, dependence, and growth-diagnostic tests.

Expected values for derived cases are produced by independent in-test
oracles: brute BFS for hop distances and ball sizes, direct enumeration for
Manhattan balls, and a literal transcription of the 1-hop-max rule.
"""

import itertools

import numpy as np
import pytest

from switchsim.graphs import (
    Clustering,
    InterferenceGraph,
    build_graph,
    cluster_degree,
    dependence_edges,
    hop_ball_sizes,
    lattice_graph,
    lattice_uniform_clustering,
    line_graph,
    one_hop_max_clustering,
    one_hop_max_from_values,
    restricted_growth_coefficient,
    segments_clustering,
    singleton_clustering,
    whole_clustering,
)


def bfs_hop_distances(g, src):
    """Independent BFS oracle for hop distances."""
    dist = {src: 0}
    frontier = [src]
    while frontier:
        nxt = []
        for u in frontier:
            for v in g.neighborhoods[u]:
                if v not in dist:
                    dist[v] = dist[u] + 1
                    nxt.append(int(v))
        frontier = nxt
    return dist


class TestBuildGraph:
    def test_empty_edges_gives_self_neighborhoods(self):
        g = build_graph(3, [])
        for i in range(3):
            assert g.neighborhood(i).tolist() == [i]

    def test_path_neighborhood(self):
        g = build_graph(3, [(0, 1), (1, 2)])
        assert g.neighborhood(1).tolist() == [0, 1, 2]

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            build_graph(2, [(0, 2)])

    def test_self_loop_rejected(self):
        with pytest.raises(ValueError):
            build_graph(3, [(1, 1)])

    def test_duplicate_edges_collapse(self):
        g = build_graph(3, [(0, 1), (1, 0), (0, 1)])
        assert g.edges == ((0, 1),)

    def test_json_round_trip(self):
        g = build_graph(4, [(0, 1), (2, 3)])
        g2 = InterferenceGraph.from_json(g.to_json())
        assert g2.n_units == 4 and g2.edges == g.edges


class TestLineGraph:
    def test_h1_is_path(self):
        g = line_graph(5, 1)
        assert g.edges == ((0, 1), (1, 2), (2, 3), (3, 4))

    def test_h2_center_sees_everything(self):
        g = line_graph(5, 2)
        assert g.neighborhood(2).tolist() == [0, 1, 2, 3, 4]

    def test_single_node(self):
        g = line_graph(1, 3)
        assert g.edges == () and g.neighborhood(0).tolist() == [0]


class TestLatticeGraph:
    def test_center_neighborhood_h1(self):
        g = lattice_graph(3, 1)
        assert g.neighborhood(4).size == 5

    def test_h0_no_edges(self):
        assert lattice_graph(2, 0).edges == ()

    @pytest.mark.parametrize("side,h", [(3, 1), (4, 2), (5, 3)])
    def test_matches_manhattan_enumeration(self, side, h):
        g = lattice_graph(side, h)
        expected = set()
        for (r1, c1), (r2, c2) in itertools.combinations(
            itertools.product(range(side), repeat=2), 2
        ):
            if abs(r1 - r2) + abs(c1 - c2) <= h:
                i, j = r1 * side + c1, r2 * side + c2
                expected.add((min(i, j), max(i, j)))
        assert set(g.edges) == expected

    def test_corner_ball_size_side4_h2(self):
        # enumeration oracle: Manhattan ball of radius 2 around (0,0) in 4x4
        ball = {
            (r, c)
            for r in range(4)
            for c in range(4)
            if r + c <= 2
        }
        g = lattice_graph(4, 2)
        assert g.neighborhood(0).size == len(ball) == 6


class TestClusterings:
    def test_singleton(self):
        pi = singleton_clustering(3)
        assert [c.tolist() for c in pi.clusters] == [[0], [1], [2]]

    def test_whole(self):
        pi = whole_clustering(3)
        assert [c.tolist() for c in pi.clusters] == [[0, 1, 2]]

    def test_lattice_uniform_exact_tiling(self):
        pi = lattice_uniform_clustering(4, 2)
        assert pi.n_clusters == 4
        assert all(c.size == 4 for c in pi.clusters)

    def test_lattice_uniform_clipped(self):
        pi = lattice_uniform_clustering(5, 2)
        assert pi.n_clusters == 9
        sizes = sorted(c.size for c in pi.clusters)
        assert sizes == [1, 2, 2, 2, 2, 4, 4, 4, 4]

    def test_segments(self):
        pi = segments_clustering(7, 3)
        assert [c.tolist() for c in pi.clusters] == [[0, 1, 2], [3, 4, 5], [6]]

    def test_partition_validation(self):
        with pytest.raises(ValueError):
            Clustering(3, [[0, 1], [1, 2]])
        with pytest.raises(ValueError):
            Clustering(3, [[0, 1]])

    def test_json_round_trip(self):
        pi = segments_clustering(5, 2)
        pi2 = Clustering.from_json(pi.to_json())
        assert pi2.assignment.tolist() == pi.assignment.tolist()


class TestOneHopMax:
    def test_empty_graph_gives_singletons(self):
        g = build_graph(4, [])
        rng = np.random.default_rng(3)
        for _ in range(5):
            pi = one_hop_max_clustering(g, rng)
            assert pi.n_clusters == 4

    def test_complete_graph_gives_one_cluster(self):
        g = build_graph(4, [(i, j) for i in range(4) for j in range(i + 1, 4)])
        rng = np.random.default_rng(3)
        for _ in range(5):
            pi = one_hop_max_clustering(g, rng)
            assert pi.n_clusters == 1

    def test_path_hand_trace(self):
        # rule trace: every unit's closed neighborhood contains unit 1,
        # whose score 0.9 is the global maximum, so all join its cluster
        g = build_graph(3, [(0, 1), (1, 2)])
        pi = one_hop_max_from_values(g, [0.1, 0.9, 0.5])
        assert pi.n_clusters == 1
        assert pi.clusters[0].tolist() == [0, 1, 2]

    def test_centers_are_local_maxima(self):
        rng = np.random.default_rng(5)
        g = line_graph(10, 2)
        values = rng.random(10)
        pi = one_hop_max_from_values(g, values)
        centers = {int(pi.assignment[i]) for i in range(10)}
        # re-derive labels to map cluster ids back to center units
        relabel = {}
        for i in range(10):
            nb = g.neighborhoods[i]
            best = max(nb, key=lambda j: (values[j], -j))
            relabel.setdefault(int(pi.assignment[i]), int(best))
        for cid, center in relabel.items():
            nb = g.neighborhoods[center]
            assert values[center] == max(values[j] for j in nb)

    def test_valid_partition_many_seeds(self):
        rng = np.random.default_rng(11)
        for _ in range(1000):
            n = int(rng.integers(2, 12))
            mask = rng.random((n, n)) < 0.3
            edges = [(i, j) for i in range(n) for j in range(i + 1, n) if mask[i, j]]
            g = build_graph(n, edges)
            pi = one_hop_max_clustering(g, rng)
            assert sorted(int(u) for c in pi.clusters for u in c) == list(range(n))


class TestClusterDegree:
    def test_singleton_empty_graph(self):
        g = build_graph(4, [])
        pi = singleton_clustering(4)
        assert all(cluster_degree(g, pi, i) == 1 for i in range(4))

    def test_whole_is_one(self):
        g = line_graph(5, 1)
        pi = whole_clustering(5)
        assert all(cluster_degree(g, pi, i) == 1 for i in range(5))

    def test_path_singleton_center(self):
        g = line_graph(5, 1)
        pi = singleton_clustering(5)
        assert cluster_degree(g, pi, 2) == 3


class TestDependenceEdges:
    def test_no_interference_only_self_pairs(self):
        g = build_graph(4, [])
        de = dependence_edges(g, singleton_clustering(4))
        assert de.pairs == frozenset((i, i) for i in range(4))

    def test_whole_clustering_all_pairs(self):
        g = line_graph(4, 1)
        de = dependence_edges(g, whole_clustering(4))
        assert len(de.pairs) == 10  # 4 self-pairs + 6 distinct

    def test_path_singleton_is_second_power(self):
        g = line_graph(3, 1)
        de = dependence_edges(g, singleton_clustering(3))
        assert (0, 2) in de and (0, 1) in de and (0, 0) in de

    def test_singleton_second_power_on_random_graphs(self):
        rng = np.random.default_rng(17)
        for _ in range(20):
            n = int(rng.integers(3, 50))
            mask = rng.random((n, n)) < 2.0 / n
            edges = [(i, j) for i in range(n) for j in range(i + 1, n) if mask[i, j]]
            g = build_graph(n, edges)
            de = dependence_edges(g, singleton_clustering(n))
            for i in range(n):
                dist = bfs_hop_distances(g, i)
                for j in range(i, n):
                    expected = dist.get(j, 99) <= 2
                    assert ((i, j) in de) == expected

    def test_coarsening_never_removes_pairs(self):
        rng = np.random.default_rng(23)
        for _ in range(10):
            n = 12
            mask = rng.random((n, n)) < 0.2
            edges = [(i, j) for i in range(n) for j in range(i + 1, n) if mask[i, j]]
            g = build_graph(n, edges)
            fine = dependence_edges(g, singleton_clustering(n))
            coarse = dependence_edges(g, segments_clustering(n, 3))
            assert fine.pairs <= coarse.pairs

    def test_ordered_pair_weights(self):
        g = build_graph(2, [(0, 1)])
        de = dependence_edges(g, singleton_clustering(2))
        weights = {(i, j): m for i, j, m in de.ordered_pair_weights()}
        assert weights == {(0, 0): 1, (0, 1): 2, (1, 1): 1}


class TestRestrictedGrowth:
    def test_complete_graph_is_one(self):
        g = build_graph(5, [(i, j) for i in range(5) for j in range(i + 1, 5)])
        assert restricted_growth_coefficient(g) == 1.0

    def test_three_spider_is_two(self):
        # 3 paths of length 5 hanging off a root (unit 0)
        edges = []
        n = 1
        for _ in range(3):
            prev = 0
            for _ in range(5):
                edges.append((prev, n))
                prev = n
                n += 1
        g = build_graph(n, edges)
        assert restricted_growth_coefficient(g) == pytest.approx(2.0)

    def test_path9_max_ratio(self):
        g = line_graph(9, 1)
        # enumeration oracle over all units and radii
        expected = max(
            sizes[r + 1] / sizes[r]
            for i in range(9)
            for sizes in [hop_ball_sizes(g, i)]
            for r in range(1, len(sizes) - 1)
        )
        kappa = restricted_growth_coefficient(g)
        assert kappa == pytest.approx(expected) == pytest.approx(5 / 3)

    def test_at_least_one_and_saturation_condition(self):
        rng = np.random.default_rng(29)
        for _ in range(20):
            n = int(rng.integers(2, 20))
            mask = rng.random((n, n)) < 0.3
            edges = [(i, j) for i in range(n) for j in range(i + 1, n) if mask[i, j]]
            g = build_graph(n, edges)
            kappa = restricted_growth_coefficient(g)
            assert kappa >= 1.0
            flat = all(
                len(hop_ball_sizes(g, i)) < 3
                or hop_ball_sizes(g, i)[2] == hop_ball_sizes(g, i)[1]
                for i in range(n)
            )
            assert (kappa == 1.0) == flat
