"""Sample measurements and the exact stationary oracles used to verify walks.

Reports cover nodes-per-host, outdegree statistics with a discrete
maximum-likelihood power-law fit, TLD shares, content-length buckets and
PageRank-range histograms.  All bucket conventions are half-open [lo, hi).
"""
from __future__ import annotations

import math
from collections import Counter, deque
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
from scipy.special import zeta

from .environment import FrozenStore
from .subsampling import ScoreVector, _pagerank
from .walkers import MergedWalk
from .webgraph import TLD_POOL, WebGraph

CONTENT_BUCKET_WIDTH = 10_000
CONTENT_BUCKETS = 11  # 0-10k .. 100-110k; the last bucket absorbs everything above


class ReducibleChainError(ValueError):
    """Closed-form stationary law requested for a reducible chain."""


@dataclass
class HostReport:
    counts: dict
    top: list            # (count, percentage, host), sorted descending
    unique_host_count: int
    sample_size: int


@dataclass
class DistributionReport:
    kind: str            # TLD | ContentLength | PageRankRange | Outdegree
    rows: list           # (label, count, percentage)

    def percentage_total(self) -> float:
        return sum(r[2] for r in self.rows)

    def as_dict(self) -> dict:
        return {label: pct for label, _, pct in self.rows}


@dataclass
class PowerLawFit:
    exponent: float
    xmin: int
    n_tail: int


@dataclass
class OutdegreeReport:
    histogram: DistributionReport
    avg: float
    max: int
    fit: Optional[PowerLawFit]


def host_report(members: Iterable[int], graph: WebGraph, k: int = 20) -> HostReport:
    """Per-host node counts of a sample plus the top-k concentration table."""
    counts: Counter = Counter(graph.host(v) for v in members)
    size = sum(counts.values())
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    top = [(c, 100.0 * c / size if size else 0.0, h) for h, c in ranked[:k]]
    return HostReport(counts=dict(counts), top=top,
                      unique_host_count=len(counts), sample_size=size)


def host_visit_shares(merged: MergedWalk, graph: Optional[WebGraph] = None) -> list:
    """Host visit counts of a walk (shares of all steps), sorted descending."""
    graph = graph or merged.graph
    counts: Counter = Counter()
    for v, c in merged.visit_count.items():
        counts[graph.host(v)] += c
    total = sum(counts.values())
    return [(host, c, c / total if total else 0.0)
            for host, c in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))]


def fit_power_law(values: Sequence[int], xmin: Optional[int] = None) -> Optional[PowerLawFit]:
    """Discrete MLE power-law fit with the cutoff chosen by KS distance.

    alpha = 1 + n / sum(ln(x_i / (xmin - 1/2))) over the tail x >= xmin; when
    xmin is not given, every candidate with at least 10 tail points is scored
    by the Kolmogorov-Smirnov distance between the tail's empirical CDF and
    the zeta-normalized discrete power law, and the closest wins.  Returns
    None when no candidate keeps 10 tail points.
    """
    xs = np.sort(np.asarray([v for v in values if v >= 1], dtype=np.int64))
    if xmin is not None:
        return _fit_at(xs, xmin)
    best: Optional[PowerLawFit] = None
    best_ks = math.inf
    for candidate in np.unique(xs):
        fit, ks = _fit_and_ks(xs, int(candidate))
        if fit is None:
            break  # tails only shrink as the candidate grows
        if ks < best_ks:
            best, best_ks = fit, ks
    return best


def _fit_at(xs: np.ndarray, xmin: int) -> Optional[PowerLawFit]:
    fit, _ = _fit_and_ks(xs, xmin)
    return fit


def _fit_and_ks(xs: np.ndarray, xmin: int) -> tuple[Optional[PowerLawFit], float]:
    tail = xs[xs >= xmin]
    n = len(tail)
    if n < 10:
        return None, math.inf
    alpha = 1.0 + n / float(np.log(tail / (xmin - 0.5)).sum())
    uniq, counts = np.unique(tail, return_counts=True)
    ecdf = np.cumsum(counts) / n
    z0 = zeta(alpha, xmin)
    theory = 1.0 - zeta(alpha, uniq + 1) / z0
    ks = float(np.abs(ecdf - theory).max())
    return PowerLawFit(exponent=float(alpha), xmin=int(xmin), n_tail=n), ks


def outdegree_report(members: Iterable[int], graph: WebGraph) -> OutdegreeReport:
    """Log-binned outdegree histogram, mean/max, and the power-law fit."""
    degrees = [len(graph.out(v)) for v in members]
    if not degrees:
        raise ValueError("empty sample")
    size = len(degrees)
    avg = sum(degrees) / size
    top = max(degrees)
    rows = []
    zero = sum(1 for d in degrees if d == 0)
    if zero:
        rows.append(("0", zero, 100.0 * zero / size))
    edge = 1
    while edge <= top:
        upper = edge * 2
        c = sum(1 for d in degrees if edge <= d < upper)
        if c:
            rows.append((f"[{edge},{upper})", c, 100.0 * c / size))
        edge = upper
    hist = DistributionReport(kind="Outdegree", rows=rows)
    fit = fit_power_law(degrees)
    return OutdegreeReport(histogram=hist, avg=avg, max=top, fit=fit)


def tld_report(members: Iterable[int], graph: WebGraph) -> DistributionReport:
    """Share of sample members per TLD over the fixed row set, plus other."""
    counts: Counter = Counter(graph.meta(v).tld for v in members)
    size = sum(counts.values())
    if size == 0:
        raise ValueError("empty sample")
    rows = []
    covered = 0
    for tld in TLD_POOL:
        c = counts.get(tld, 0)
        covered += c
        rows.append((f".{tld}", c, 100.0 * c / size))
    other = size - covered
    rows.append(("other", other, 100.0 * other / size))
    return DistributionReport(kind="TLD", rows=rows)


def content_length_report(members: Iterable[int], graph: WebGraph) -> DistributionReport:
    """Eleven 10k-wide buckets; the last also absorbs lengths above 100k."""
    lengths = [graph.meta(v).content_length for v in members]
    if not lengths:
        raise ValueError("empty sample")
    size = len(lengths)
    buckets = [0] * CONTENT_BUCKETS
    for length in lengths:
        idx = min(length // CONTENT_BUCKET_WIDTH, CONTENT_BUCKETS - 1)
        buckets[idx] += 1
    rows = []
    for i, c in enumerate(buckets):
        label = f"{i * 10}-{(i + 1) * 10}k"
        rows.append((label, c, 100.0 * c / size))
    return DistributionReport(kind="ContentLength", rows=rows)


def pagerank_range_report(scores: ScoreVector, subset: Optional[Iterable[int]] = None) -> DistributionReport:
    """Share of nodes per decade of score, [10^-k, 10^-k+1).

    With a subset the report covers only those nodes (a sample population);
    otherwise the whole score vector.  An empty subset yields all-zero rows.
    """
    if subset is None:
        values = list(scores.scores.values())
    else:
        values = [scores.scores[v] for v in subset]
    positive = [v for v in values if v > 0]
    size = len(values)
    if positive:
        lowest = min(math.floor(math.log10(v)) for v in positive)
        highest = max(math.floor(math.log10(v)) for v in positive)
    else:
        lowest, highest = -1, -1
    buckets: Counter = Counter()
    for v in positive:
        buckets[math.floor(math.log10(v))] += 1
    rows = []
    for k in range(lowest, highest + 1):
        c = buckets.get(k, 0)
        rows.append((f"[1e{k},1e{k + 1})", c, 100.0 * c / size if size else 0.0))
    return DistributionReport(kind="PageRankRange", rows=rows)


def _undirected_multiset(store: FrozenStore) -> Counter:
    edges: Counter = Counter()
    for v in store.nodes():
        rec = store.get(v)
        for t in rec.slots:
            edges[(v, t)] += 1
    return edges


def _check_symmetric_connected(store: FrozenStore) -> None:
    nodes = store.nodes()
    if not nodes:
        raise ReducibleChainError("empty frozen store")
    edges = _undirected_multiset(store)
    for (u, v), c in edges.items():
        if edges.get((v, u), 0) != c:
            raise ReducibleChainError(
                f"frozen adjacency is not symmetric at {u}->{v}; degree law does not apply")
    adjacency: dict[int, set] = {v: set() for v in nodes}
    for (u, v) in edges:
        if u in adjacency and v in adjacency:
            adjacency[u].add(v)
    seen = {nodes[0]}
    queue = deque([nodes[0]])
    while queue:
        u = queue.popleft()
        for v in adjacency[u]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    if len(seen) != len(nodes):
        raise ReducibleChainError("frozen graph is not connected")


def stationary_oracle(graph: WebGraph, chain: str, frozen: Optional[FrozenStore] = None,
                      d: float = 1.0 / 7.0) -> ScoreVector:
    """Exact stationary distribution of a verification chain.

    chain selects the law: "undirected-degree" is the closed form
    degree/sum(degree) of the walked graph (selfloops counting one slot),
    "regular-uniform" is uniform over the walked nodes, and "pagerank" is the
    power-iteration PageRank of the whole graph with uniform teleport d and
    dangling mass spread uniformly.  The degree and uniform forms require the
    frozen graph to be symmetric and connected.
    """
    if chain in ("undirected-degree", "regular-uniform"):
        if frozen is None:
            raise ValueError("degree and uniform oracles need the frozen store")
        _check_symmetric_connected(frozen)
        nodes = frozen.nodes()
        if chain == "regular-uniform":
            share = 1.0 / len(nodes)
            return ScoreVector({v: share for v in nodes}, "StationaryUniform")
        degrees = {v: frozen.get(v).slot_count + 1 for v in nodes}
        total = sum(degrees.values())
        return ScoreVector({v: deg / total for v, deg in degrees.items()}, "StationaryDegree")
    if chain == "pagerank":
        nodes = sorted(graph.nodes)
        index = {v: i for i, v in enumerate(nodes)}
        src, dst = [], []
        for v in nodes:
            for t in graph.out(v):
                src.append(index[v])
                dst.append(index[t])
        scores = _pagerank(len(nodes), np.asarray(src, dtype=np.int64),
                           np.asarray(dst, dtype=np.int64), d, tol=1e-10, max_iter=1000)
        return ScoreVector({v: float(scores[index[v]]) for v in nodes}, "StationaryPageRank")
    raise ValueError(f"unknown chain {chain!r}")


def tv_distance(p, q) -> float:
    """Total variation distance 0.5 * sum |p - q|; missing keys read 0."""
    pm = p.scores if isinstance(p, ScoreVector) else p
    qm = q.scores if isinstance(q, ScoreVector) else q
    keys = set(pm) | set(qm)
    return 0.5 * sum(abs(pm.get(k, 0.0) - qm.get(k, 0.0)) for k in keys)


def empirical_distribution(counts: Mapping[int, int]) -> dict:
    total = sum(counts.values())
    if total == 0:
        return {}
    return {v: c / total for v, c in counts.items()}


def average_distribution_reports(reports: Sequence[DistributionReport]) -> DistributionReport:
    """Per-bucket mean across repeated samples of the same report kind.

    Buckets are aligned by label (missing buckets count as zero), since
    histogram row sets can differ between repetitions.
    """
    if not reports:
        raise ValueError("no reports to average")
    kind = reports[0].kind
    labels: dict = {}
    for report in reports:
        for label, _, _ in report.rows:
            labels.setdefault(label, None)
    n = len(reports)
    rows = []
    for label in labels:
        count = sum(dict((l, c) for l, c, _ in r.rows).get(label, 0) for r in reports) / n
        pct = sum(dict((l, p) for l, _, p in r.rows).get(label, 0.0) for r in reports) / n
        rows.append((label, count, pct))
    return DistributionReport(kind=kind, rows=rows)


def average_host_reports(reports: Sequence[HostReport], k: int = 20) -> HostReport:
    """Mean per-host counts across repeated samples, re-ranked."""
    if not reports:
        raise ValueError("no reports to average")
    totals: Counter = Counter()
    for r in reports:
        totals.update(r.counts)
    n = len(reports)
    counts = {host: c / n for host, c in totals.items()}
    size = sum(counts.values())
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    top = [(c, 100.0 * c / size if size else 0.0, h) for h, c in ranked[:k]]
    unique = sum(r.unique_host_count for r in reports) / n
    return HostReport(counts=counts, top=top, unique_host_count=unique,
                      sample_size=size)


def distribution_csv(report: DistributionReport) -> str:
    lines = ["label,count,percentage"]
    for label, count, pct in report.rows:
        count_text = f"{count:.2f}" if isinstance(count, float) else str(count)
        lines.append(f"{label},{count_text},{pct:.2f}")
    return "\n".join(lines) + "\n"


def host_csv(report: HostReport) -> str:
    lines = ["host,count,percentage"]
    for count, pct, host in report.top:
        count_text = f"{count:.2f}" if isinstance(count, float) else str(count)
        lines.append(f"{host},{count_text},{pct:.2f}")
    return "\n".join(lines) + "\n"


def report_summary(label: str, host: HostReport, outdeg: OutdegreeReport,
                   tld: DistributionReport, content: DistributionReport) -> dict:
    """JSON-compatible summary of one sample's reports."""
    return {
        "sample": label,
        "size": host.sample_size,
        "unique_hosts": host.unique_host_count,
        "top_hosts": [
            {"host": h, "count": c, "percentage": round(p, 2)} for c, p, h in host.top[:3]
        ],
        "outdegree": {
            "avg": round(outdeg.avg, 2),
            "max": outdeg.max,
            "powerlaw_exponent": round(outdeg.fit.exponent, 3) if outdeg.fit else None,
            "powerlaw_xmin": outdeg.fit.xmin if outdeg.fit else None,
        },
        "tld_percentages": {label_: round(p, 2) for label_, _, p in tld.rows},
        "content_length_percentages": {label_: round(p, 2) for label_, _, p in content.rows},
    }
