"""Shared graph builders and independent oracles for the test suite.

The oracles here deliberately avoid the library's own code paths: stationary
distributions come from dense power iteration over an explicitly built
transition matrix, and windows are checked against naive run expansion.
"""
from __future__ import annotations

import numpy as np
import pytest

from websample.environment import Environment, FrozenStore, freeze_adjacency
from websample.webgraph import NodeMeta, WebGraph, NORMAL

import random


def make_meta(v: int, host: str | None = None, domain: str | None = None,
              behavior=NORMAL, url: str | None = None, content_length: int = 2048) -> NodeMeta:
    domain = domain or f"d{v}.com"
    host = host or f"h.{domain}"
    return NodeMeta(
        url=url or f"http://{host}/p{v}",
        host=host,
        domain=domain,
        tld=host.rsplit(".", 1)[-1],
        content_length=content_length,
        behavior=behavior,
    )


def build_graph(n: int, edges, behaviors=None, hosts=None, urls=None,
                content_lengths=None) -> WebGraph:
    """Small directed graph from an edge list, with overridable metadata."""
    behaviors = behaviors or {}
    hosts = hosts or {}
    urls = urls or {}
    content_lengths = content_lengths or {}
    nodes = {}
    for v in range(n):
        host = hosts.get(v)
        nodes[v] = make_meta(
            v,
            host=host,
            domain=host.split(".", 1)[1] if host else None,
            behavior=behaviors.get(v, NORMAL),
            url=urls.get(v),
            content_length=content_lengths.get(v, 2048),
        )
    out = {v: [] for v in range(n)}
    for src, dst in edges:
        out[src].append(dst)
    return WebGraph(nodes, out)


def undirected(pairs) -> list:
    edges = []
    for u, v in pairs:
        edges.append((u, v))
        edges.append((v, u))
    return edges


def connected_test_graph(n: int, extra_edges: int, seed: int, max_degree: int = 10) -> WebGraph:
    """Random connected graph with reciprocal edges and degrees <= max_degree.

    Indegree stays at or below the inlink cap, so frozen adjacency is the full
    symmetric neighborhood and the closed-form degree law applies exactly.
    """
    rng = random.Random(seed)
    degree = [0] * n
    pairs = set()
    for v in range(1, n):
        candidates = [u for u in range(v) if degree[u] < max_degree]
        u = rng.choice(candidates)
        pairs.add((u, v))
        degree[u] += 1
        degree[v] += 1
    attempts = 0
    added = 0
    while added < extra_edges and attempts < 50 * extra_edges:
        attempts += 1
        u = rng.randrange(n)
        v = rng.randrange(n)
        if u == v:
            continue
        key = (min(u, v), max(u, v))
        if key in pairs or degree[u] >= max_degree or degree[v] >= max_degree:
            continue
        pairs.add(key)
        degree[u] += 1
        degree[v] += 1
        added += 1
    hosts = {v: f"h{v % 7}.d{v % 13}.{('com', 'org', 'net', 'de')[v % 4]}" for v in range(n)}
    lengths = {v: 1024 + (v * 7919) % 150_000 for v in range(n)}
    return build_graph(n, undirected(sorted(pairs)), hosts=hosts, content_lengths=lengths)


def freeze_all(graph: WebGraph, seed: int = 0) -> tuple[Environment, FrozenStore]:
    env = Environment(graph, seed)
    store = FrozenStore()
    for v in range(graph.n):
        if env.fetch(v).fetched:
            freeze_adjacency(store, env, v, 0)
    return env, store


def walk_transition_matrix(store: FrozenStore) -> tuple[list, np.ndarray]:
    """Explicit transition matrix of the frozen walk (slots plus selfloop)."""
    nodes = store.nodes()
    index = {v: i for i, v in enumerate(nodes)}
    n = len(nodes)
    P = np.zeros((n, n))
    for v in nodes:
        rec = store.get(v)
        k = len(rec.slots) + 1
        P[index[v], index[v]] += 1.0 / k
        for t in rec.slots:
            P[index[v], index[t]] += 1.0 / k
    return nodes, P


def power_iteration_stationary(P: np.ndarray, iters: int = 20000, tol: float = 1e-13) -> np.ndarray:
    x = np.full(P.shape[0], 1.0 / P.shape[0])
    for _ in range(iters):
        nxt = x @ P
        if np.abs(nxt - x).sum() < tol:
            return nxt
        x = nxt
    return x


def pagerank_oracle(graph: WebGraph, d: float) -> dict:
    """Dense PageRank with uniform teleport and uniform dangling spread."""
    n = graph.n
    P = np.zeros((n, n))
    for v in range(n):
        outs = graph.out(v)
        if outs:
            for t in outs:
                P[v, t] += 1.0 / len(outs)
        else:
            P[v, :] = 1.0 / n
    G = d / n + (1.0 - d) * P
    x = power_iteration_stationary(G)
    x = x / x.sum()
    return {v: float(x[v]) for v in range(n)}


@pytest.fixture(scope="session")
def path_graph_3():
    # directed path a -> b -> c; inlink retrieval makes the walk undirected,
    # so walked degrees with the selfloop are 2, 3, 2
    return build_graph(3, [(0, 1), (1, 2)])
