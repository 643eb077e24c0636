"""Topology generators and hop-distance operations."""

from __future__ import annotations

import itertools
import random

import pytest

from ctxradar.comm_graph import (
    CommGraph,
    TopologyKind,
    assign_layers,
    build_topology,
    graph_from_dict,
    graph_to_dict,
    hop_distance,
    k_hop_neighborhood,
    load_graph,
    reachable_set,
    save_graph,
)

from conftest import exhaustive_shortest_path


def chain_graph(n: int) -> CommGraph:
    return CommGraph(n_agents=n, edges=frozenset((i, i + 1) for i in range(n - 1)))


class TestBuildTopology:
    def test_fully_connected_three_agents(self):
        graph = build_topology("fully_connected", 3)
        assert graph.edges == frozenset(
            {(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)}
        )

    def test_fully_connected_edge_count(self):
        for n in range(1, 7):
            graph = build_topology("fully_connected", n)
            assert len(graph.edges) == n * (n - 1)

    def test_random_p_one_equals_fully_connected(self):
        random_graph = build_topology("random", 5, p=1.0, seed=7)
        full = build_topology("fully_connected", 5)
        assert random_graph.edges == full.edges

    def test_random_p_zero_has_no_edges(self):
        assert build_topology("random", 5, p=0.0, seed=3).edges == frozenset()

    def test_random_is_pure_function_of_arguments(self):
        a = build_topology("random", 6, p=0.4, seed=11)
        b = build_topology("random", 6, p=0.4, seed=11)
        assert a.edges == b.edges
        c = build_topology("random", 6, p=0.4, seed=12)
        assert a.edges != c.edges  # overwhelmingly likely for 30 pairs

    def test_layered_explicit_partition(self):
        graph = build_topology("layered", 4, layers=[{0, 1}, {2, 3}], seed=0)
        allowed = {(0, 2), (0, 3), (1, 2), (1, 3)}
        assert graph.edges <= frozenset(allowed)
        assert graph.edges == frozenset(allowed)  # consecutive layers fully wired

    def test_layered_random_assignments_never_wire_within_a_layer(self):
        rng = random.Random(0)
        for _ in range(200):
            n = rng.randint(2, 6)
            n_layers = rng.randint(1, n)
            seed = rng.randrange(2**32)
            graph = build_topology("layered", n, layers=n_layers, seed=seed)
            partition = assign_layers(n, n_layers, seed)
            layer_of = {a: i for i, layer in enumerate(partition) for a in layer}
            for a, b in graph.edges:
                assert layer_of[a] < layer_of[b]

    def test_layered_three_layers_only_consecutive(self):
        graph = build_topology("layered", 3, layers=[[0], [1], [2]], seed=0)
        assert graph.edges == frozenset({(0, 1), (1, 2)})

    def test_debate_is_spatially_fully_connected(self):
        debate = build_topology("debate", 4, seed=1)
        assert debate.edges == build_topology("fully_connected", 4).edges
        assert debate.kind == TopologyKind.DEBATE

    def test_invalid_probability_rejected(self):
        with pytest.raises(ValueError):
            build_topology("random", 3, p=1.5)
        with pytest.raises(ValueError):
            build_topology("random", 3, p=-0.1)

    def test_layer_count_exceeding_agents_rejected(self):
        with pytest.raises(ValueError):
            build_topology("layered", 3, layers=4)

    def test_bad_partition_rejected(self):
        with pytest.raises(ValueError):
            build_topology("layered", 4, layers=[[0, 1], [1, 2, 3]])

    def test_n_agents_must_be_positive(self):
        with pytest.raises(ValueError):
            build_topology("fully_connected", 0)


class TestCommGraphInvariants:
    def test_self_loops_rejected(self):
        with pytest.raises(ValueError):
            CommGraph(n_agents=2, edges=frozenset({(0, 0)}))

    def test_out_of_range_endpoints_rejected(self):
        with pytest.raises(ValueError):
            CommGraph(n_agents=2, edges=frozenset({(0, 2)}))


class TestHopDistance:
    def test_distance_to_self_is_zero(self):
        graph = build_topology("random", 4, p=0.3, seed=5)
        for i in range(4):
            assert hop_distance(graph, i, i) == 0

    def test_fully_connected_distinct_pair_is_one(self):
        graph = build_topology("fully_connected", 4)
        for a in range(4):
            for b in range(4):
                if a != b:
                    assert hop_distance(graph, a, b) == 1

    def test_chain(self):
        graph = chain_graph(3)
        assert hop_distance(graph, 0, 2) == 2
        assert hop_distance(graph, 2, 0) is None

    def test_edge_iff_distance_one(self):
        rng = random.Random(1)
        for _ in range(50):
            graph = build_topology("random", 5, p=rng.random(), seed=rng.randrange(2**32))
            for a in range(5):
                for b in range(5):
                    if a == b:
                        continue
                    d = hop_distance(graph, a, b)
                    assert (d == 1) == ((a, b) in graph.edges)

    def test_agrees_with_exhaustive_enumeration_small_graphs(self):
        # Every digraph on 3 nodes, then random digraphs on 4 and 5 nodes.
        pairs3 = [(a, b) for a in range(3) for b in range(3) if a != b]
        for bits in range(2 ** len(pairs3)):
            edges = {pairs3[i] for i in range(len(pairs3)) if bits >> i & 1}
            graph = CommGraph(n_agents=3, edges=frozenset(edges))
            for a in range(3):
                for b in range(3):
                    assert hop_distance(graph, a, b) == exhaustive_shortest_path(edges, 3, a, b)

        rng = random.Random(9)
        for _ in range(120):
            n = rng.choice([4, 5])
            edges = {
                (a, b)
                for a in range(n)
                for b in range(n)
                if a != b and rng.random() < rng.random()
            }
            graph = CommGraph(n_agents=n, edges=frozenset(edges))
            for a in range(n):
                for b in range(n):
                    assert hop_distance(graph, a, b) == exhaustive_shortest_path(edges, n, a, b)

    def test_triangle_inequality_on_finite_distances(self):
        rng = random.Random(4)
        for _ in range(40):
            graph = build_topology("random", 5, p=rng.random(), seed=rng.randrange(2**32))
            for a, b, c in itertools.product(range(5), repeat=3):
                dac = hop_distance(graph, a, c)
                dab = hop_distance(graph, a, b)
                dbc = hop_distance(graph, b, c)
                if dab is not None and dbc is not None:
                    assert dac is not None and dac <= dab + dbc

    def test_id_out_of_range(self):
        graph = build_topology("fully_connected", 3)
        with pytest.raises(ValueError):
            hop_distance(graph, 0, 3)
        with pytest.raises(ValueError):
            hop_distance(graph, -1, 0)


class TestNeighborhoods:
    def test_k_zero_is_self_only(self):
        graph = build_topology("random", 5, p=0.7, seed=2)
        for i in range(5):
            assert k_hop_neighborhood(graph, i, 0) == {i}

    def test_fully_connected_k_one_is_everyone(self):
        graph = build_topology("fully_connected", 5)
        assert k_hop_neighborhood(graph, 2, 1) == set(range(5))

    def test_chain_one_hop(self):
        graph = chain_graph(3)
        assert k_hop_neighborhood(graph, 2, 1) == {1, 2}

    def test_monotone_in_k_and_caps_at_reachable_set(self):
        rng = random.Random(6)
        for _ in range(30):
            graph = build_topology("random", 5, p=rng.random(), seed=rng.randrange(2**32))
            node = rng.randrange(5)
            previous: set[int] = set()
            for k in range(5):
                current = k_hop_neighborhood(graph, node, k)
                assert previous <= current
                previous = current
            assert k_hop_neighborhood(graph, node, graph.n_agents - 1) == reachable_set(
                graph, node
            )

    def test_reachable_set_single_agent(self):
        graph = build_topology("fully_connected", 1)
        assert reachable_set(graph, 0) == {0}

    def test_reachable_set_fully_connected(self):
        graph = build_topology("fully_connected", 5)
        assert reachable_set(graph, 3) == set(range(5))

    def test_reachable_set_disconnected_component(self):
        graph = CommGraph(n_agents=3, edges=frozenset({(0, 1), (1, 0)}))
        assert reachable_set(graph, 2) == {2}

    def test_negative_k_rejected(self):
        graph = build_topology("fully_connected", 3)
        with pytest.raises(ValueError):
            k_hop_neighborhood(graph, 0, -1)


class TestGraphJson:
    def test_round_trip(self, tmp_path):
        graph = build_topology("random", 5, p=0.5, seed=42)
        path = tmp_path / "graph.json"
        save_graph(graph, str(path))
        loaded = load_graph(str(path))
        assert loaded == graph

    def test_dict_shape(self):
        graph = build_topology("fully_connected", 2, seed=9)
        data = graph_to_dict(graph)
        assert data == {
            "n_agents": 2,
            "kind": "fully_connected",
            "seed": 9,
            "edges": [[0, 1], [1, 0]],
        }

    def test_invalid_json_reports_error(self):
        with pytest.raises(ValueError):
            graph_from_dict({"kind": "random"})
