"""Simulated fetchable web: fetch outcomes, redirects, truncation, inlinks.

All policies are deterministic in (graph, node, global seed), so fetch results
are memoized and the frozen-adjacency store can be shared by any number of
walkers.  Timeouts and failures are instantaneous flags, never real waits.
"""
from __future__ import annotations

import random
import threading
import urllib.parse
from dataclasses import dataclass
from typing import Optional

from .seeds import derive_seed
from .webgraph import WebGraph, _URL_SAFE

URL_LENGTH_LIMIT = 300       # encoded characters
REDIRECT_LIMIT = 10          # maximum redirects followed per fetch
INLINK_CAP = 10              # inlinks retrieved per node

TOO_LONG_URL = "too_long_url"
FETCH_FAIL = "fetch_fail"
TIMEOUT = "timeout"
REDIRECT_LIMIT_EXCEEDED = "redirect_limit"
REDIRECT_LOOP = "redirect_loop"


@dataclass(frozen=True)
class RedirectResolution:
    chain: tuple[int, ...]
    final: int
    truncation_applied: bool = False
    truncation_undone: bool = False
    failure: Optional[str] = None


@dataclass(frozen=True)
class FetchOutcome:
    node: int
    final: Optional[int]
    outlinks: Optional[tuple[int, ...]]
    reason: Optional[str]
    resolution: Optional[RedirectResolution] = None

    @property
    def fetched(self) -> bool:
        return self.reason is None


def _encoded_url_length(url: str) -> int:
    return len(urllib.parse.quote(url, safe=_URL_SAFE))


class Environment:
    """Fetch policies over an immutable graph, memoized per node."""

    def __init__(self, graph: WebGraph, seed: int = 0):
        self.graph = graph
        self.seed = seed
        self._fetch_memo: dict[int, FetchOutcome] = {}
        self._fetchable_memo: dict[int, bool] = {}

    def resolve_redirects(self, node: int) -> RedirectResolution:
        """Collapse the redirect chain from node into one logical node.

        Follows at most REDIRECT_LIMIT redirects and detects loops.  If the
        final page is a session-id URL it is truncated at the question mark;
        an error page or a fresh redirect after truncation undoes it, so the
        untruncated node stays final either way.
        """
        chain = [node]
        current = node
        hops = 0
        seen = {node}
        while self.graph.meta(current).behavior.kind == "redirect":
            hops += 1
            if hops > REDIRECT_LIMIT:
                return RedirectResolution(tuple(chain), current, failure=REDIRECT_LIMIT_EXCEEDED)
            nxt = self.graph.meta(current).behavior.target
            if nxt in seen:
                chain.append(nxt)
                return RedirectResolution(tuple(chain), current, failure=REDIRECT_LOOP)
            chain.append(nxt)
            seen.add(nxt)
            current = nxt
        behavior = self.graph.meta(current).behavior
        if behavior.kind == "sid":
            undone = behavior.outcome in ("err", "redir")
            return RedirectResolution(tuple(chain), current,
                                      truncation_applied=True, truncation_undone=undone)
        return RedirectResolution(tuple(chain), current)

    def fetch(self, node: int) -> FetchOutcome:
        """Fetch a node: URL-length check, behavior check, redirect resolution.

        Every failure mode is encoded in the outcome; nothing is raised.
        """
        memo = self._fetch_memo.get(node)
        if memo is not None:
            return memo
        outcome = self._fetch(node)
        self._fetch_memo[node] = outcome
        return outcome

    def _fetch(self, node: int) -> FetchOutcome:
        meta = self.graph.meta(node)
        if _encoded_url_length(meta.url) > URL_LENGTH_LIMIT:
            return FetchOutcome(node, None, None, TOO_LONG_URL)
        if meta.behavior.kind == "fetchfail":
            return FetchOutcome(node, None, None, FETCH_FAIL)
        if meta.behavior.kind == "timeout":
            return FetchOutcome(node, None, None, TIMEOUT)
        resolution = self.resolve_redirects(node)
        if resolution.failure is not None:
            return FetchOutcome(node, None, None, resolution.failure, resolution)
        final = resolution.final
        if final != node:
            final_meta = self.graph.meta(final)
            if _encoded_url_length(final_meta.url) > URL_LENGTH_LIMIT:
                return FetchOutcome(node, None, None, TOO_LONG_URL, resolution)
            if final_meta.behavior.kind == "fetchfail":
                return FetchOutcome(node, None, None, FETCH_FAIL, resolution)
            if final_meta.behavior.kind == "timeout":
                return FetchOutcome(node, None, None, TIMEOUT, resolution)
        return FetchOutcome(node, final, tuple(self.graph.out(final)), None, resolution)

    def fetchable(self, node: int) -> bool:
        cached = self._fetchable_memo.get(node)
        if cached is None:
            cached = self.fetch(node).fetched
            self._fetchable_memo[node] = cached
        return cached

    def retrieve_inlinks(self, node: int, chain: Optional[tuple[int, ...]] = None) -> tuple[int, ...]:
        """Up to INLINK_CAP in-neighbors, sampled uniformly without replacement.

        For a node reached through a redirect chain the in-neighbors of all
        chain members are pooled before sampling; links between chain members
        are dropped because the chain is one logical node.  Deterministic in
        (node, seed).
        """
        members = chain if chain else (node,)
        member_set = set(members)
        pool = sorted({u for m in members for u in self.graph.in_neighbors(m)
                       if u not in member_set})
        if len(pool) <= INLINK_CAP:
            return tuple(pool)
        rng = random.Random(derive_seed(self.seed, "inlinks", node))
        return tuple(rng.sample(pool, INLINK_CAP))


@dataclass(frozen=True)
class FrozenRecord:
    node: int
    outlinks: tuple[int, ...]
    inlinks: tuple[int, ...]
    frozen_at_step: int

    @property
    def slots(self) -> tuple[int, ...]:
        return self.outlinks + self.inlinks

    @property
    def slot_count(self) -> int:
        return len(self.outlinks) + len(self.inlinks)


class FrozenStore:
    """Write-once map of node id to its first-visit adjacency record.

    Registration is idempotent and safe under concurrent walkers: the first
    record wins and every later freeze returns it unchanged.
    """

    def __init__(self):
        self._records: dict[int, FrozenRecord] = {}
        self._lock = threading.Lock()

    def __contains__(self, node: int) -> bool:
        return node in self._records

    def __len__(self) -> int:
        return len(self._records)

    def get(self, node: int) -> FrozenRecord:
        return self._records[node]

    def nodes(self) -> list[int]:
        return sorted(self._records)

    def register(self, record: FrozenRecord) -> FrozenRecord:
        with self._lock:
            existing = self._records.get(record.node)
            if existing is not None:
                return existing
            self._records[record.node] = record
            return record


def freeze_adjacency(store: FrozenStore, env: Environment, node: int, step: int,
                     chain: Optional[tuple[int, ...]] = None) -> FrozenRecord:
    """Register the node's adjacency at first visit; later calls are no-ops."""
    existing = store._records.get(node)
    if existing is not None:
        return existing
    record = FrozenRecord(
        node=node,
        outlinks=tuple(env.graph.out(node)),
        inlinks=env.retrieve_inlinks(node, chain),
        frozen_at_step=step,
    )
    return store.register(record)


def save_store(store: FrozenStore, path) -> None:
    """Snapshot: one ``F <id> out=<csv> in=<csv> step=<t>`` line per record."""
    with open(path, "w", encoding="utf-8") as fh:
        for node in store.nodes():
            rec = store.get(node)
            out_csv = ",".join(str(v) for v in rec.outlinks)
            in_csv = ",".join(str(v) for v in rec.inlinks)
            fh.write(f"F {node} out={out_csv} in={in_csv} step={rec.frozen_at_step}\n")


def load_store(path) -> FrozenStore:
    store = FrozenStore()
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split(" ")
            if parts[0] != "F" or len(parts) != 5:
                raise ValueError(f"bad snapshot line: {line!r}")
            node = int(parts[1])
            out_csv = parts[2][len("out="):]
            in_csv = parts[3][len("in="):]
            step = int(parts[4][len("step="):])
            outlinks = tuple(int(v) for v in out_csv.split(",")) if out_csv else ()
            inlinks = tuple(int(v) for v in in_csv.split(",")) if in_csv else ()
            store.register(FrozenRecord(node, outlinks, inlinks, step))
    return store
