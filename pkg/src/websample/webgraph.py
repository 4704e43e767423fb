"""Web-graph data model, synthetic generators, and the graph file format.

A :class:`WebGraph` is a directed multigraph over dense integer node ids with
per-node web metadata (url, host, domain, TLD, content length, fetch
behavior).  Graphs are immutable after construction: walkers only read them.
"""
from __future__ import annotations

import math
import random
import urllib.parse
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .seeds import derive_seed

MAX_CONTENT_LENGTH = 5 * 1024 * 1024  # 5 MB download cap
MIN_CONTENT_LENGTH = 1024
PARALLEL_EDGE_CAP = 2  # at most two parallel edges per ordered pair

TLD_POOL = ("com", "org", "net", "de", "fr", "uk", "jp", "edu", "gov", "us", "ca")

# Rough share of pages per TLD used by the generator when no weights are given.
DEFAULT_TLD_WEIGHTS = {
    "com": 0.55, "org": 0.09, "net": 0.07, "de": 0.06, "fr": 0.04,
    "uk": 0.04, "jp": 0.03, "edu": 0.02, "gov": 0.02, "us": 0.02, "ca": 0.02,
}

SID_OUTCOMES = ("ok", "err", "redir")

_URL_SAFE = ":/?#&=.~_-+%"


class ParameterError(ValueError):
    """Invalid generator or graph parameters."""


class GraphFormatError(ValueError):
    """Malformed graph file; carries the offending line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class Behavior:
    """Fetch behavior of a node.

    kind is one of normal | deadend | fetchfail | timeout | redirect | sid.
    Redirects carry the target node id; sid nodes carry the truncation
    outcome ("ok", "err" or "redir").
    """

    kind: str
    target: Optional[int] = None
    outcome: Optional[str] = None

    def token(self) -> str:
        if self.kind == "redirect":
            return f"redirect:{self.target}"
        if self.kind == "sid":
            return f"sid:{self.outcome}"
        return self.kind

    @staticmethod
    def from_token(token: str) -> "Behavior":
        if token in ("normal", "deadend", "fetchfail", "timeout"):
            return Behavior(token)
        if token.startswith("redirect:"):
            return Behavior("redirect", target=int(token.split(":", 1)[1]))
        if token.startswith("sid:"):
            outcome = token.split(":", 1)[1]
            if outcome not in SID_OUTCOMES:
                raise ValueError(f"unknown sid outcome {outcome!r}")
            return Behavior("sid", outcome=outcome)
        raise ValueError(f"unknown behavior token {token!r}")


NORMAL = Behavior("normal")
DEADEND = Behavior("deadend")
FETCHFAIL = Behavior("fetchfail")
TIMEOUT = Behavior("timeout")


def redirect_to(target: int) -> Behavior:
    return Behavior("redirect", target=target)


def session_id(outcome: str) -> Behavior:
    if outcome not in SID_OUTCOMES:
        raise ValueError(f"sid outcome must be one of {SID_OUTCOMES}")
    return Behavior("sid", outcome=outcome)


@dataclass(frozen=True)
class NodeMeta:
    url: str
    host: str
    domain: str
    tld: str
    content_length: int
    behavior: Behavior = NORMAL


class WebGraph:
    """Directed multigraph with node metadata and cached reverse adjacency."""

    def __init__(self, nodes: dict[int, NodeMeta], out_adjacency: dict[int, list[int]]):
        self.nodes = nodes
        self.out_adjacency = out_adjacency
        self._in_adjacency: Optional[dict[int, tuple[int, ...]]] = None

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def m(self) -> int:
        return sum(len(v) for v in self.out_adjacency.values())

    def out(self, node: int) -> list[int]:
        return self.out_adjacency.get(node, [])

    def meta(self, node: int) -> NodeMeta:
        return self.nodes[node]

    def host(self, node: int) -> str:
        return self.nodes[node].host

    def in_neighbors(self, node: int) -> tuple[int, ...]:
        """In-neighbors with edge multiplicity; computed once and cached."""
        if self._in_adjacency is None:
            rev: dict[int, list[int]] = {v: [] for v in self.nodes}
            for src in sorted(self.out_adjacency):
                for dst in self.out_adjacency[src]:
                    rev[dst].append(src)
            self._in_adjacency = {v: tuple(sorted(us)) for v, us in rev.items()}
        return self._in_adjacency[node]

    def __eq__(self, other) -> bool:
        if not isinstance(other, WebGraph):
            return NotImplemented
        return self.nodes == other.nodes and self.out_adjacency == other.out_adjacency

    def validate(self) -> None:
        """Check structural invariants; raises ParameterError on violation."""
        for i in range(self.n):
            if i not in self.nodes:
                raise ParameterError(f"node ids are not dense: missing {i}")
        for v, meta in self.nodes.items():
            if not meta.host.endswith(meta.domain):
                raise ParameterError(f"node {v}: host {meta.host!r} does not extend domain {meta.domain!r}")
            if meta.host.rsplit(".", 1)[-1] != meta.tld:
                raise ParameterError(f"node {v}: tld {meta.tld!r} is not the last label of {meta.host!r}")
            if meta.content_length < 0:
                raise ParameterError(f"node {v}: negative content length")
            if meta.behavior.kind == "normal" and meta.content_length > MAX_CONTENT_LENGTH:
                raise ParameterError(f"node {v}: content length exceeds the {MAX_CONTENT_LENGTH} byte cap")
            if meta.behavior.kind == "redirect" and meta.behavior.target not in self.nodes:
                raise ParameterError(f"node {v}: redirect target {meta.behavior.target} unknown")
        for src, targets in self.out_adjacency.items():
            if src not in self.nodes:
                raise ParameterError(f"edge source {src} unknown")
            seen: dict[int, int] = {}
            for dst in targets:
                if dst not in self.nodes:
                    raise ParameterError(f"edge target {dst} unknown")
                seen[dst] = seen.get(dst, 0) + 1
                if seen[dst] > PARALLEL_EDGE_CAP:
                    raise ParameterError(f"more than {PARALLEL_EDGE_CAP} parallel edges {src}->{dst}")


def cap_parallel_edges(targets: Iterable[int]) -> list[int]:
    """Keep only the first two occurrences of each target."""
    counts: dict[int, int] = {}
    kept = []
    for t in targets:
        c = counts.get(t, 0)
        if c < PARALLEL_EDGE_CAP:
            kept.append(t)
            counts[t] = c + 1
    return kept


@dataclass
class GeneratorSpec:
    """Parameters of the synthetic power-law web generator.

    hazard_rates maps behavior names (deadend, fetchfail, timeout, redirect,
    sessionid) to node fractions.  hub_bias tilts link-target selection toward
    high-outdegree nodes (0 = uniform targets); it is the knob that couples
    indegree to outdegree the way popular hub pages do.
    """

    n: int
    target_exponent: float = 2.72
    hosts_per_domain: float = 2.0
    pages_per_host: float = 10.0
    hazard_rates: dict[str, float] = field(default_factory=dict)
    seed: int = 0
    tld_weights: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_TLD_WEIGHTS))
    hub_bias: float = 0.0

    def validate(self) -> None:
        if self.n < 1:
            raise ParameterError("n must be >= 1")
        if not self.target_exponent > 1.0:
            raise ParameterError("target_exponent must be > 1")
        if self.hosts_per_domain < 1 or self.pages_per_host < 1:
            raise ParameterError("hosts_per_domain and pages_per_host must be >= 1")
        total = 0.0
        for name, rate in self.hazard_rates.items():
            if name not in ("deadend", "fetchfail", "timeout", "redirect", "sessionid"):
                raise ParameterError(f"unknown hazard {name!r}")
            if not 0.0 <= rate <= 1.0:
                raise ParameterError(f"hazard {name} out of [0,1]")
            total += rate
        if total > 1.0 + 1e-12:
            raise ParameterError("hazard rates sum to more than 1")
        if self.hub_bias < 0:
            raise ParameterError("hub_bias must be >= 0")
        for tld in self.tld_weights:
            if tld not in TLD_POOL:
                raise ParameterError(f"tld {tld!r} not in the fixed pool")


_POWER_LAW_XMAX = 1_000_000


def power_law_probabilities(exponent: float, xmax: int = _POWER_LAW_XMAX) -> np.ndarray:
    """Normalized pmf of the discrete power law on 1..xmax."""
    x = np.arange(1, xmax + 1, dtype=np.float64)
    p = x ** (-exponent)
    return p / p.sum()


def power_law_mean(exponent: float, xmax: int = _POWER_LAW_XMAX) -> float:
    p = power_law_probabilities(exponent, xmax)
    return float((p * np.arange(1, xmax + 1)).sum())


def draw_power_law(exponent: float, size: int, seed: int, xmax: int = _POWER_LAW_XMAX) -> np.ndarray:
    """Exact inverse-CDF draws from the truncated discrete power law."""
    cum = np.cumsum(power_law_probabilities(exponent, xmax))
    gen = np.random.Generator(np.random.PCG64(seed))
    u = gen.random(size)
    return np.searchsorted(cum, u, side="right") + 1


def _geometric_count(rng: random.Random, mean: float) -> int:
    """Number of extra items with the given mean (0 when mean <= 0)."""
    if mean <= 0:
        return 0
    p = 1.0 / (1.0 + mean)
    u = rng.random()
    return int(math.log1p(-u) / math.log1p(-p))


def _weighted_targets(weights_cum: np.ndarray, gen: np.random.Generator,
                      source: int, k: int, n: int) -> list[int]:
    """Draw k link targets for one source: no self links, at most 2 parallel."""
    if k <= 0 or n < 2:
        return []
    k = min(k, (n - 1) * PARALLEL_EDGE_CAP)
    kept: list[int] = []
    counts: dict[int, int] = {}
    while len(kept) < k:
        batch = np.searchsorted(weights_cum, gen.random(max(16, int((k - len(kept)) * 1.3) + 4)))
        for t in batch:
            t = int(t)
            if t == source:
                continue
            c = counts.get(t, 0)
            if c >= PARALLEL_EDGE_CAP:
                continue
            counts[t] = c + 1
            kept.append(t)
            if len(kept) == k:
                break
    return kept


def generate_power_law_web(spec: GeneratorSpec) -> WebGraph:
    """Generate a synthetic web graph with power-law outdegrees.

    Nodes are partitioned into domains and hosts (geometric sizes around the
    configured means), behaviors are assigned per hazard_rates, and outdegrees
    are drawn from the truncated discrete power law (dead ends and redirect
    nodes get no outlinks).  Identical spec and seed give an identical graph.
    """
    spec.validate()
    n = spec.n
    rng = random.Random(derive_seed(spec.seed, "structure"))

    # Domain / host / page partition.
    tlds = sorted(spec.tld_weights)
    tld_cum = []
    acc = 0.0
    total_w = sum(spec.tld_weights[t] for t in tlds)
    for t in tlds:
        acc += spec.tld_weights[t] / total_w
        tld_cum.append(acc)
    hosts: list[tuple[str, str, str]] = []  # (host, domain, tld) per node
    domain_idx = 0
    while len(hosts) < n:
        u = rng.random()
        tld = tlds[-1]
        for i, edge in enumerate(tld_cum):
            if u <= edge:
                tld = tlds[i]
                break
        domain = f"d{domain_idx}.{tld}"
        domain_idx += 1
        n_hosts = 1 + _geometric_count(rng, spec.hosts_per_domain - 1.0)
        for j in range(n_hosts):
            host = f"h{j}.{domain}"
            n_pages = 1 + _geometric_count(rng, spec.pages_per_host - 1.0)
            for _ in range(n_pages):
                hosts.append((host, domain, tld))
                if len(hosts) == n:
                    break
            if len(hosts) == n:
                break

    # Behaviors.
    hazard_order = ("deadend", "fetchfail", "timeout", "redirect", "sessionid")
    edges_rates = [(name, spec.hazard_rates.get(name, 0.0)) for name in hazard_order]
    behaviors: list[Behavior] = []
    for v in range(n):
        u = rng.random()
        chosen = NORMAL
        for name, rate in edges_rates:
            if u < rate:
                if name == "deadend":
                    chosen = DEADEND
                elif name == "fetchfail":
                    chosen = FETCHFAIL
                elif name == "timeout":
                    chosen = TIMEOUT
                elif name == "redirect":
                    target = rng.randrange(n - 1) if n > 1 else 0
                    if target >= v:
                        target += 1
                    chosen = redirect_to(target if n > 1 else v)
                else:
                    chosen = session_id(SID_OUTCOMES[rng.randrange(3)])
                break
            u -= rate
        behaviors.append(chosen)

    # Outdegrees: power law for link-bearing nodes, zero for dead ends and redirects.
    outdeg = draw_power_law(spec.target_exponent, n, derive_seed(spec.seed, "outdegrees"))
    for v in range(n):
        if behaviors[v].kind in ("deadend", "redirect"):
            outdeg[v] = 0

    # Link targets; weight 1 + hub_bias * outdegree couples in- and outdegree.
    gen = np.random.Generator(np.random.PCG64(derive_seed(spec.seed, "edges")))
    weights = 1.0 + spec.hub_bias * outdeg.astype(np.float64)
    cum = np.cumsum(weights)
    cum /= cum[-1]
    out_adjacency = {v: _weighted_targets(cum, gen, v, int(outdeg[v]), n) for v in range(n)}

    # Metadata.
    log_span = math.log(MAX_CONTENT_LENGTH / MIN_CONTENT_LENGTH)
    nodes: dict[int, NodeMeta] = {}
    page_index: dict[str, int] = {}
    for v in range(n):
        host, domain, tld = hosts[v]
        idx = page_index.get(host, 0)
        page_index[host] = idx + 1
        length = min(int(MIN_CONTENT_LENGTH * math.exp(rng.random() * log_span)), MAX_CONTENT_LENGTH)
        nodes[v] = NodeMeta(
            url=f"http://{host}/p{idx}",
            host=host,
            domain=domain,
            tld=tld,
            content_length=length,
            behavior=behaviors[v],
        )
    return WebGraph(nodes, out_adjacency)


def generate_trap_graph(n: int) -> WebGraph:
    """Clique-plus-chain construction that traps degree-following walks.

    Nodes 0..n/2-1 form a complete graph on one shared host; nodes n/2..n-1
    form a chain of single-page hosts attached to node 0.  All edges are
    reciprocal directed pairs.
    """
    if n < 4 or n % 2 != 0:
        raise ParameterError("trap graph needs an even n >= 4")
    half = n // 2
    out_adjacency: dict[int, list[int]] = {v: [] for v in range(n)}
    for u in range(half):
        for v in range(half):
            if u != v:
                out_adjacency[u].append(v)
    out_adjacency[0].append(half)
    out_adjacency[half].append(0)
    for u in range(half, n - 1):
        out_adjacency[u].append(u + 1)
        out_adjacency[u + 1].append(u)

    nodes: dict[int, NodeMeta] = {}
    for v in range(half):
        nodes[v] = NodeMeta(
            url=f"http://trap.example.com/p{v}",
            host="trap.example.com",
            domain="example.com",
            tld="com",
            content_length=2048,
        )
    for v in range(half, n):
        domain = f"site{v}.net"
        host = f"h{v}.{domain}"
        nodes[v] = NodeMeta(
            url=f"http://{host}/p0",
            host=host,
            domain=domain,
            tld="net",
            content_length=2048,
        )
    return WebGraph(nodes, out_adjacency)


def modified_degree(record, algorithm: str, max_degree: int) -> int:
    """Degree of a frozen node under algorithm A or B.

    A counts the stored adjacency slots plus the single added selfloop.  B
    pads every node to the regular degree max_degree; the implied selfloop
    multiplicity is never materialized.
    """
    base = len(record.outlinks) + len(record.inlinks)
    if algorithm == "A":
        return base + 1
    if algorithm == "B":
        if base + 1 > max_degree:
            raise ParameterError(
                f"max_degree {max_degree} is smaller than the modified degree {base + 1}")
        return max_degree
    raise ParameterError(f"algorithm must be A or B, got {algorithm!r}")


def save_graph(graph: WebGraph, path) -> None:
    """Write the line-oriented text format (see load_graph)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"webgraph v1 n={graph.n} m={graph.m}\n")
        for v in range(graph.n):
            meta = graph.nodes[v]
            url = urllib.parse.quote(meta.url, safe=_URL_SAFE)
            fh.write(
                f"N {v} {url} {meta.host} {meta.domain} {meta.tld} "
                f"{meta.content_length} {meta.behavior.token()}\n")
        for v in range(graph.n):
            for dst in graph.out_adjacency[v]:
                fh.write(f"E {v} {dst}\n")


def load_graph(path) -> WebGraph:
    """Parse a graph file; raises GraphFormatError with the offending line."""
    nodes: dict[int, NodeMeta] = {}
    out_adjacency: dict[int, list[int]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        if not header.startswith("webgraph v1 "):
            raise GraphFormatError("missing 'webgraph v1' header", 1)
        try:
            fields = dict(part.split("=", 1) for part in header.split()[2:])
            expect_n, expect_m = int(fields["n"]), int(fields["m"])
        except (ValueError, KeyError):
            raise GraphFormatError("header must carry n=<N> m=<M>", 1) from None
        edge_count = 0
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split(" ")
            if parts[0] == "N":
                if len(parts) != 8:
                    raise GraphFormatError("node line needs 8 fields", lineno)
                try:
                    v = int(parts[1])
                    meta = NodeMeta(
                        url=urllib.parse.unquote(parts[2]),
                        host=parts[3],
                        domain=parts[4],
                        tld=parts[5],
                        content_length=int(parts[6]),
                        behavior=Behavior.from_token(parts[7]),
                    )
                except ValueError as exc:
                    raise GraphFormatError(str(exc), lineno) from None
                if v in nodes:
                    raise GraphFormatError(f"duplicate node id {v}", lineno)
                nodes[v] = meta
                out_adjacency[v] = []
            elif parts[0] == "E":
                if len(parts) != 3:
                    raise GraphFormatError("edge line needs 3 fields", lineno)
                try:
                    src, dst = int(parts[1]), int(parts[2])
                except ValueError:
                    raise GraphFormatError("edge endpoints must be integers", lineno) from None
                if src not in nodes:
                    raise GraphFormatError(f"edge references unknown node id {src}", lineno)
                if dst not in nodes:
                    raise GraphFormatError(f"edge references unknown node id {dst}", lineno)
                out_adjacency[src].append(dst)
                edge_count += 1
            else:
                raise GraphFormatError(f"unknown record type {parts[0]!r}", lineno)
    if len(nodes) != expect_n:
        raise GraphFormatError(f"header says n={expect_n} but file has {len(nodes)} nodes", 1)
    if edge_count != expect_m:
        raise GraphFormatError(f"header says m={expect_m} but file has {edge_count} edges", 1)
    graph = WebGraph(nodes, out_adjacency)
    try:
        graph.validate()
    except ParameterError as exc:
        raise GraphFormatError(str(exc), 1) from None
    return graph
