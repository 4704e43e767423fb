from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from websample import webgraph
from websample.webgraph import (GeneratorSpec, GraphFormatError, ParameterError,
                                WebGraph, draw_power_law, generate_power_law_web,
                                generate_trap_graph, load_graph, modified_degree,
                                power_law_mean, save_graph)

from conftest import build_graph, undirected


@pytest.fixture(scope="module")
def big_spec():
    return GeneratorSpec(n=100_000, target_exponent=2.72, seed=7)


@pytest.fixture(scope="module")
def big_graph(big_spec):
    return generate_power_law_web(big_spec)


def loglog_regression_exponent(values) -> float:
    """Independent check: slope of the log-log degree histogram."""
    values = np.asarray([v for v in values if v >= 1])
    uniq, counts = np.unique(values, return_counts=True)
    keep = counts >= 20
    x = np.log(uniq[keep])
    y = np.log(counts[keep])
    slope, _ = np.polyfit(x, y, 1)
    return -slope


class TestGenerator:
    def test_single_node(self):
        g = generate_power_law_web(GeneratorSpec(n=1, seed=3))
        assert g.n == 1
        assert g.m == 0
        assert g.meta(0).behavior.kind == "normal"

    def test_deterministic_serialization(self, tmp_path):
        spec = GeneratorSpec(n=500, seed=11, hazard_rates={"deadend": 0.05, "redirect": 0.02})
        p1, p2 = tmp_path / "a.txt", tmp_path / "b.txt"
        save_graph(generate_power_law_web(spec), p1)
        save_graph(generate_power_law_web(spec), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_outdegree_exponent_recovered(self, big_graph):
        from websample.analysis import fit_power_law

        degrees = [len(big_graph.out(v)) for v in range(big_graph.n)]
        fit = fit_power_law(degrees)
        assert abs(fit.exponent - 2.72) < 0.1
        # cross-check with an unrelated estimator
        assert abs(loglog_regression_exponent(degrees) - 2.72) < 0.35

    def test_mean_outdegree_matches_truncated_law(self, big_graph):
        mean = sum(len(big_graph.out(v)) for v in range(big_graph.n)) / big_graph.n
        analytic = power_law_mean(2.72)
        assert abs(mean - analytic) / analytic < 0.05

    def test_parallel_edge_cap_respected(self, big_graph):
        for v in range(0, big_graph.n, 997):
            targets = big_graph.out(v)
            for t in set(targets):
                assert targets.count(t) <= 2

    def test_hazard_fractions(self):
        spec = GeneratorSpec(n=20_000, seed=5,
                             hazard_rates={"deadend": 0.1, "fetchfail": 0.05, "sessionid": 0.05})
        g = generate_power_law_web(spec)
        kinds = [g.meta(v).behavior.kind for v in range(g.n)]
        assert abs(kinds.count("deadend") / g.n - 0.1) < 0.01
        assert abs(kinds.count("fetchfail") / g.n - 0.05) < 0.01
        for v in range(g.n):
            if g.meta(v).behavior.kind == "deadend":
                assert g.out(v) == []

    def test_invalid_spec(self):
        with pytest.raises(ParameterError):
            generate_power_law_web(GeneratorSpec(n=0))
        with pytest.raises(ParameterError):
            generate_power_law_web(GeneratorSpec(n=5, target_exponent=1.0))
        with pytest.raises(ParameterError):
            generate_power_law_web(GeneratorSpec(n=5, hazard_rates={"deadend": 0.9, "timeout": 0.2}))

    def test_content_lengths_within_cap(self, big_graph):
        for v in range(0, big_graph.n, 509):
            length = big_graph.meta(v).content_length
            assert 1024 <= length <= webgraph.MAX_CONTENT_LENGTH

    def test_draw_power_law_exact_pmf(self):
        draws = draw_power_law(2.5, 200_000, seed=42)
        # P(X=1) = 1/zeta(2.5)
        from scipy.special import zeta
        expected = 1.0 / zeta(2.5, 1)
        assert abs((draws == 1).mean() - expected) < 0.01


class TestTrapGraph:
    def test_minimal(self):
        g = generate_trap_graph(4)
        assert sorted(g.out(0)) == [1, 2]
        assert g.out(1) == [0]
        assert sorted(g.out(2)) == [0, 3]
        assert g.out(3) == [2]

    def test_degrees_n8(self):
        g = generate_trap_graph(8)
        assert len(g.out(1)) == 3
        assert len(g.out(0)) == 4

    def test_edge_count_n200(self):
        g = generate_trap_graph(200)
        undirected_edges = g.m // 2
        assert undirected_edges == (100 * 99) // 2 + 100
        # every directed edge is reciprocated
        pairs = {(u, v) for u in range(g.n) for v in g.out(u)}
        assert all((v, u) in pairs for u, v in pairs)

    def test_hosts(self):
        g = generate_trap_graph(200)
        trap_nodes = [v for v in range(g.n) if g.host(v) == "trap.example.com"]
        assert len(trap_nodes) == 100
        chain_hosts = {g.host(v) for v in range(100, 200)}
        assert len(chain_hosts) == 100
        crossing = {(u, v) for u in range(g.n) for v in g.out(u) if (u < 100) != (v < 100)}
        assert crossing == {(0, 100), (100, 0)}

    def test_invalid(self):
        with pytest.raises(ParameterError):
            generate_trap_graph(3)
        with pytest.raises(ParameterError):
            generate_trap_graph(5)


class FakeRecord:
    def __init__(self, outlinks, inlinks):
        self.outlinks = tuple(outlinks)
        self.inlinks = tuple(inlinks)


class TestModifiedDegree:
    def test_algorithm_a(self):
        rec = FakeRecord([1, 2, 3], [4, 5])
        assert modified_degree(rec, "A", 1000) == 6

    def test_algorithm_b(self):
        rec = FakeRecord([1, 2, 3], [4, 5])
        assert modified_degree(rec, "B", 10_000) == 10_000

    def test_isolated(self):
        assert modified_degree(FakeRecord([], []), "A", 10) == 1

    def test_b_max_too_small(self):
        rec = FakeRecord(list(range(20)), [])
        with pytest.raises(ParameterError):
            modified_degree(rec, "B", 20)


class TestGraphIO:
    def test_empty_round_trip(self, tmp_path):
        g = WebGraph({}, {})
        path = tmp_path / "g.txt"
        save_graph(g, path)
        assert load_graph(path) == g

    def test_trap_round_trip(self, tmp_path):
        g = generate_trap_graph(8)
        path = tmp_path / "g.txt"
        save_graph(g, path)
        loaded = load_graph(path)
        assert loaded.out_adjacency == g.out_adjacency
        assert loaded.nodes == g.nodes

    def test_unknown_edge_id(self, tmp_path):
        path = tmp_path / "g.txt"
        path.write_text(
            "webgraph v1 n=1 m=1\n"
            "N 0 http://h.d0.com/p0 h.d0.com d0.com com 100 normal\n"
            "E 0 9\n")
        with pytest.raises(GraphFormatError) as err:
            load_graph(path)
        assert "9" in str(err.value)
        assert err.value.line == 3

    def test_bad_header(self, tmp_path):
        path = tmp_path / "g.txt"
        path.write_text("nope\n")
        with pytest.raises(GraphFormatError):
            load_graph(path)

    def test_url_with_spaces_round_trips(self, tmp_path):
        g = build_graph(1, [], urls={0: "http://h.d0.com/a page?q=1"})
        path = tmp_path / "g.txt"
        save_graph(g, path)
        assert load_graph(path).meta(0).url == "http://h.d0.com/a page?q=1"

    def test_behavior_tokens_round_trip(self, tmp_path):
        g = build_graph(3, [(0, 1)], behaviors={
            0: webgraph.redirect_to(1),
            1: webgraph.session_id("err"),
            2: webgraph.TIMEOUT,
        })
        path = tmp_path / "g.txt"
        save_graph(g, path)
        loaded = load_graph(path)
        assert loaded.meta(0).behavior == webgraph.redirect_to(1)
        assert loaded.meta(1).behavior == webgraph.session_id("err")
        assert loaded.meta(2).behavior == webgraph.TIMEOUT

    def test_too_many_parallel_edges_rejected(self):
        g = build_graph(2, [(0, 1), (0, 1), (0, 1)])
        with pytest.raises(ParameterError):
            g.validate()

    @settings(max_examples=25, deadline=None)
    @given(n=st.integers(min_value=1, max_value=12), data=st.data())
    def test_round_trip_random(self, n, data):
        import tempfile

        edges = data.draw(st.lists(
            st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=20))
        capped = []
        for u, v in edges:
            if capped.count((u, v)) < 2:
                capped.append((u, v))
        g = build_graph(n, capped)
        with tempfile.TemporaryDirectory() as tmp:
            path = f"{tmp}/g.txt"
            save_graph(g, path)
            assert load_graph(path) == g
