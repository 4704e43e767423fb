from __future__ import annotations

import random
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest

from websample import webgraph
from websample.analysis import (DistributionReport, ReducibleChainError,
                                average_distribution_reports, average_host_reports,
                                content_length_report, distribution_csv,
                                fit_power_law, host_csv, host_report,
                                host_visit_shares, outdegree_report,
                                pagerank_range_report, report_summary,
                                stationary_oracle, tld_report, tv_distance)
from websample.subsampling import ScoreVector
from websample.walkers import WalkConfig, run_walks
from websample.webgraph import draw_power_law

from conftest import (build_graph, connected_test_graph, freeze_all,
                      pagerank_oracle, power_iteration_stationary,
                      walk_transition_matrix)


class TestHostReport:
    def test_distinct_hosts(self):
        g = build_graph(4, [], hosts={v: f"h{v}.d{v}.com" for v in range(4)})
        report = host_report(range(4), g)
        assert report.unique_host_count == 4
        assert all(abs(pct - 25.0) < 1e-9 for _, pct, _ in report.top)

    def test_top_share(self):
        hosts = {0: "h1.d.com", 1: "h1.d.com", 2: "h1.d.com", 3: "h2.d.com"}
        g = build_graph(4, [], hosts=hosts)
        report = host_report(range(4), g)
        count, pct, host = report.top[0]
        assert (count, host) == (3, "h1.d.com")
        assert abs(pct - 75.0) < 1e-9

    def test_host_visit_shares(self):
        g = webgraph.generate_trap_graph(8)
        cfg = WalkConfig(algorithm="AB", walkers=2, step_budget=100, start_node=0, seed=1)
        merged = run_walks(g, cfg)
        shares = host_visit_shares(merged)
        assert abs(sum(s for _, _, s in shares) - 1.0) < 1e-9
        assert shares[0][0] == "trap.example.com"


class TestOutdegreeReport:
    def test_all_zero(self):
        g = build_graph(3, [])
        report = outdegree_report(range(3), g)
        assert report.avg == 0 and report.max == 0
        assert report.fit is None

    def test_small_arithmetic(self):
        g = build_graph(3, [(0, 1), (1, 0), (1, 2), (2, 0), (2, 1), (2, 2), (0, 2)])
        report = outdegree_report(range(3), g)
        assert abs(report.avg - 7 / 3) < 1e-9
        assert report.max == 3

    def test_histogram_percentages_sum(self):
        g = connected_test_graph(50, 60, seed=1)
        report = outdegree_report(range(50), g)
        assert abs(report.histogram.percentage_total() - 100.0) < 0.01


class TestPowerLawFit:
    def test_recovers_known_exponent(self):
        draws = draw_power_law(2.4, 50_000, seed=9)
        fit = fit_power_law(draws)
        assert abs(fit.exponent - 2.4) < 0.15
        assert fit.n_tail >= 10

    def test_monotone_in_tail_weight(self):
        heavy = fit_power_law(draw_power_law(1.8, 30_000, seed=4))
        light = fit_power_law(draw_power_law(3.0, 30_000, seed=4))
        assert heavy.exponent < light.exponent

    def test_unavailable_below_ten_points(self):
        assert fit_power_law([3, 4, 5]) is None


class TestTldReport:
    def test_even_split(self):
        hosts = {0: "a.d0.com", 1: "b.d1.com", 2: "c.d2.de", 3: "d.d3.de"}
        g = build_graph(4, [], hosts=hosts)
        report = tld_report(range(4), g)
        shares = report.as_dict()
        assert shares[".com"] == 50.0
        assert shares[".de"] == 50.0

    def test_zero_rows_present(self):
        g = build_graph(1, [])
        report = tld_report([0], g)
        labels = [r[0] for r in report.rows]
        assert labels == [f".{t}" for t in webgraph.TLD_POOL] + ["other"]
        assert report.as_dict()[".jp"] == 0.0

    def test_weighted_generator_share(self):
        weights = {t: 0.4 / 10 for t in webgraph.TLD_POOL}
        weights["com"] = 0.6
        # one page per domain so the sampled share is plain binomial
        spec = webgraph.GeneratorSpec(n=20_000, seed=3, tld_weights=weights,
                                      hosts_per_domain=1.0, pages_per_host=1.0)
        g = webgraph.generate_power_law_web(spec)
        members = random.Random(1).sample(range(g.n), 10_000)
        report = tld_report(members, g)
        assert abs(report.as_dict()[".com"] - 60.0) < 2.0


class TestContentLengthReport:
    def test_two_buckets(self):
        g = build_graph(2, [], content_lengths={0: 5_000, 1: 15_000})
        shares = content_length_report(range(2), g).as_dict()
        assert shares["0-10k"] == 50.0
        assert shares["10-20k"] == 50.0

    def test_overflow_goes_to_last_bucket(self):
        g = build_graph(1, [], content_lengths={0: 250_000})
        shares = content_length_report([0], g).as_dict()
        assert shares["100-110k"] == 100.0

    def test_boundary_half_open(self):
        g = build_graph(1, [], content_lengths={0: 10_000})
        shares = content_length_report([0], g).as_dict()
        assert shares["10-20k"] == 100.0
        assert shares["0-10k"] == 0.0


class TestPageRankRanges:
    def test_uniform_scores_in_one_decade(self):
        scores = ScoreVector({v: 0.01 for v in range(100)}, "SubgraphPageRank")
        report = pagerank_range_report(scores)
        shares = report.as_dict()
        assert shares["[1e-2,1e-1)"] == 100.0

    def test_empty_subset(self):
        scores = ScoreVector({0: 1.0}, "SubgraphPageRank")
        report = pagerank_range_report(scores, subset=[])
        assert all(pct == 0.0 for _, _, pct in report.rows)

    def test_percentages_sum(self):
        values = np.random.default_rng(3).dirichlet(np.ones(200))
        scores = ScoreVector({i: float(v) for i, v in enumerate(values)}, "SubgraphPageRank")
        report = pagerank_range_report(scores)
        assert abs(report.percentage_total() - 100.0) < 0.01


class TestStationaryOracle:
    def test_path_closed_form(self, path_graph_3):
        env, store = freeze_all(path_graph_3)
        scores = stationary_oracle(path_graph_3, "undirected-degree", frozen=store)
        assert abs(scores.scores[0] - 2 / 7) < 1e-12
        assert abs(scores.scores[1] - 3 / 7) < 1e-12
        nodes, P = walk_transition_matrix(store)
        pi = power_iteration_stationary(P)
        for i, v in enumerate(nodes):
            assert abs(scores.scores[v] - pi[i]) < 1e-9

    def test_regular_uniform(self):
        g = connected_test_graph(20, 15, seed=2)
        env, store = freeze_all(g)
        scores = stationary_oracle(g, "regular-uniform", frozen=store)
        assert all(abs(p - 1 / 20) < 1e-12 for p in scores.scores.values())

    def test_two_cycle_pagerank(self):
        g = build_graph(2, [(0, 1), (1, 0)])
        scores = stationary_oracle(g, "pagerank", d=1 / 7)
        assert abs(scores.scores[0] - 0.5) < 1e-12

    def test_pagerank_matches_dense_oracle(self):
        g = build_graph(6, [(0, 1), (1, 2), (2, 0), (2, 3), (3, 4), (4, 0)])
        scores = stationary_oracle(g, "pagerank", d=1 / 7)
        oracle = pagerank_oracle(g, 1 / 7)
        for v in range(6):
            assert abs(scores.scores[v] - oracle[v]) < 1e-8

    def test_reducible_raises(self):
        g = build_graph(4, [(0, 1), (2, 3)])  # two components
        env, store = freeze_all(g)
        with pytest.raises(ReducibleChainError):
            stationary_oracle(g, "undirected-degree", frozen=store)

    def test_asymmetric_frozen_raises(self):
        # node 0 links to 25 nodes; their inlink caps keep 0, but 0's own
        # inlink sample misses some reverse slots, breaking symmetry
        edges = [(0, v) for v in range(1, 26)] + [(v, 0) for v in range(1, 26)]
        g = build_graph(26, edges)
        env, store = freeze_all(g)
        with pytest.raises(ReducibleChainError):
            stationary_oracle(g, "undirected-degree", frozen=store)

    def test_detailed_balance_exact(self, path_graph_3):
        env, store = freeze_all(path_graph_3)
        scores = stationary_oracle(path_graph_3, "undirected-degree", frozen=store)
        degrees = {v: store.get(v).slot_count + 1 for v in store.nodes()}
        total = sum(degrees.values())
        slot_counts = {v: Counter(store.get(v).slots) for v in store.nodes()}
        for u in store.nodes():
            for v, mult in slot_counts[u].items():
                # pi(u) P(u,v) == pi(v) P(v,u) as exact fractions
                left = Fraction(degrees[u], total) * Fraction(mult, degrees[u])
                right = Fraction(degrees[v], total) * Fraction(slot_counts[v][u], degrees[v])
                assert left == right


class TestTvDistance:
    def test_identical(self):
        assert tv_distance({0: 0.5, 1: 0.5}, {0: 0.5, 1: 0.5}) == 0.0

    def test_disjoint(self):
        assert tv_distance({0: 1.0}, {1: 1.0}) == 1.0

    def test_uniform_vs_point(self):
        assert abs(tv_distance({0: 0.5, 1: 0.5}, {0: 1.0}) - 0.5) < 1e-12


class TestAveraging:
    def sample_report(self, seed):
        rng = random.Random(seed)
        g = build_graph(200, [], hosts={v: f"h{v % 31}.d{v % 31}.com" for v in range(200)},
                        content_lengths={v: rng.randrange(1024, 120_000) for v in range(200)})
        members = rng.sample(range(200), 60)
        return content_length_report(members, g)

    def test_distribution_average(self):
        reports = [self.sample_report(s) for s in range(5)]
        averaged = average_distribution_reports(reports)
        assert abs(averaged.percentage_total() - 100.0) < 0.01
        for i, row in enumerate(averaged.rows):
            assert abs(row[2] - np.mean([r.rows[i][2] for r in reports])) < 1e-9

    def test_averaging_reduces_variance(self):
        singles, averaged = [], []
        for master in range(12):
            reports = [self.sample_report(100 * master + s) for s in range(5)]
            singles.append(reports[0].rows[0][2])
            averaged.append(average_distribution_reports(reports).rows[0][2])
        assert np.std(averaged) < np.std(singles)

    def test_host_average(self):
        g = build_graph(4, [], hosts={0: "a.d.com", 1: "a.d.com", 2: "b.d.com", 3: "c.d.com"})
        r1 = host_report([0, 1, 2], g)
        r2 = host_report([0, 2, 3], g)
        avg = average_host_reports([r1, r2])
        assert avg.counts["a.d.com"] == 1.5
        assert avg.unique_host_count == 2.5


class TestSerializers:
    def test_distribution_csv(self):
        report = DistributionReport("TLD", [(".com", 3, 75.0), (".de", 1, 25.0)])
        text = distribution_csv(report)
        assert text.splitlines()[0] == "label,count,percentage"
        assert ".com,3,75.00" in text

    def test_summary_is_json_compatible(self):
        import json

        g = build_graph(3, [(0, 1), (1, 2)])
        hosts = host_report(range(3), g)
        outdeg = outdegree_report(range(3), g)
        tld = tld_report(range(3), g)
        content = content_length_report(range(3), g)
        summary = report_summary("A_StatesOnLastHalf", hosts, outdeg, tld, content)
        parsed = json.loads(json.dumps(summary))
        assert parsed["sample"] == "A_StatesOnLastHalf"
        assert parsed["outdegree"]["powerlaw_exponent"] is None
