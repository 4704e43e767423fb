"""Walk phases: the shared undirected walk behind algorithms A and B, the
PageRank-imitating walk C with hierarchical jumps, parallel-walker
orchestration, stuck detection, and merged-walk assembly.

Algorithms A and B share one walk.  The walk itself traverses A's graph
(adjacency slots plus one selfloop per node); B's enormous selfloop
multiplicity is reproduced afterwards by :func:`inject_selfloops`, which pads
every visit with a geometric run instead of stepping through the selfloops one
by one.
"""
from __future__ import annotations

import math
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Optional

from .environment import Environment, FrozenStore, freeze_adjacency
from .seeds import derive_seed
from .webgraph import ParameterError, WebGraph

START = "start"
OUTLINK = "outlink"
INLINK = "inlink"
SELFLOOP = "selfloop"
JUMP = "jump"
SIBLING = "sibling"

TRANSITION_KINDS = (OUTLINK, INLINK, SELFLOOP, JUMP, SIBLING)


class ConfigurationError(ValueError):
    pass


class StartupError(ValueError):
    pass


class Step(NamedTuple):
    node: int
    kind: str
    count: int = 1


@dataclass
class WalkConfig:
    algorithm: str = "AB"            # AB | C
    d: float = 1.0 / 7.0             # reset probability of walk C
    max_degree: int = 10_000_000     # regular degree for algorithm B
    walkers: int = 50
    step_budget: int = 10_000
    start_node: int = 0
    consecutive_host_limit: int = 3_000
    overload_limit: int = 12
    seed: int = 0
    jump_mode: str = "hierarchy"     # hierarchy | uniform (verification mode)

    def validate(self) -> None:
        if self.algorithm not in ("AB", "C"):
            raise ConfigurationError("algorithm must be AB or C")
        if not 0.0 < self.d < 1.0:
            raise ConfigurationError("d must be in (0,1)")
        if self.walkers < 1:
            raise ConfigurationError("walkers must be >= 1")
        if self.step_budget < 0:
            raise ConfigurationError("step_budget must be >= 0")
        if self.consecutive_host_limit < 1 or self.overload_limit < 1:
            raise ConfigurationError("stuck limits must be >= 1")
        if self.jump_mode not in ("hierarchy", "uniform"):
            raise ConfigurationError("jump_mode must be hierarchy or uniform")
        if self.max_degree < 1:
            raise ConfigurationError("max_degree must be >= 1")


class WalkTrace:
    """Step sequence of one walker, with selfloop runs stored compressed."""

    __slots__ = ("walker_id", "nodes", "kinds", "counts")

    def __init__(self, walker_id: int):
        self.walker_id = walker_id
        self.nodes: list[int] = []
        self.kinds: list[str] = []
        self.counts: list[int] = []

    def append(self, node: int, kind: str, count: int = 1) -> None:
        if count < 1:
            return
        if kind == SELFLOOP and self.kinds and self.kinds[-1] == SELFLOOP and self.nodes[-1] == node:
            self.counts[-1] += count
            return
        self.nodes.append(node)
        self.kinds.append(kind)
        self.counts.append(count)

    @property
    def total_steps(self) -> int:
        return sum(self.counts)

    def __len__(self) -> int:
        return len(self.nodes)

    def entries(self) -> Iterator[Step]:
        for node, kind, count in zip(self.nodes, self.kinds, self.counts):
            yield Step(node, kind, count)

    def expand(self) -> list[int]:
        """Unit-step node sequence; for small traces and tests only."""
        out: list[int] = []
        for node, count in zip(self.nodes, self.counts):
            out.extend([node] * count)
        return out


class SeenCatalog:
    """Seen pages arranged as domain -> host -> pages, plus the visited set.

    Grow-only: nodes are appended once and never removed, so uniform picks by
    list index are deterministic.
    """

    def __init__(self):
        self.domains: list[str] = []
        self._hosts: dict[str, list[str]] = {}
        self._pages: dict[str, list[int]] = {}
        self._seen: set[int] = set()
        self.visited: set[int] = set()

    def __len__(self) -> int:
        return len(self._seen)

    def add_seen(self, node: int, host: str, domain: str) -> None:
        if node in self._seen:
            return
        self._seen.add(node)
        hosts = self._hosts.get(domain)
        if hosts is None:
            self.domains.append(domain)
            self._hosts[domain] = hosts = []
        pages = self._pages.get(host)
        if pages is None:
            hosts.append(host)
            self._pages[host] = pages = []
        pages.append(node)

    def mark_visited(self, node: int) -> None:
        self.visited.add(node)

    def pick(self, rng: random.Random) -> int:
        """Uniform seen domain, then uniform seen host, then uniform page."""
        domain = self.domains[rng.randrange(len(self.domains))]
        hosts = self._hosts[domain]
        host = hosts[rng.randrange(len(hosts))]
        pages = self._pages[host]
        return pages[rng.randrange(len(pages))]


class StuckDetector:
    """Host-overload bookkeeping for one walker.

    Every `limit` consecutive same-host visits raise one overload event; at
    `overload` events on the same host the walker is stuck.  feed() returns
    how many of the offered visits happened before the walker got stuck.
    """

    __slots__ = ("limit", "overload", "host", "streak", "events")

    def __init__(self, limit: int, overload: int):
        self.limit = limit
        self.overload = overload
        self.host: Optional[str] = None
        self.streak = 0
        self.events: Counter = Counter()

    def feed(self, host: str, count: int = 1) -> tuple[int, bool]:
        if host != self.host:
            self.host = host
            self.streak = 0
        consumed = 0
        remaining = count
        while remaining > 0:
            to_event = self.limit - self.streak
            if remaining < to_event:
                self.streak += remaining
                return consumed + remaining, False
            consumed += to_event
            remaining -= to_event
            self.streak = 0
            self.events[host] += 1
            if self.events[host] >= self.overload:
                return consumed, True
        return consumed, False


@dataclass
class MergedWalk:
    """Per-walker traces plus merged statistics over all surviving steps."""

    traces: list[WalkTrace]
    visit_count: Counter
    transition_tallies: Counter
    stuck_walkers: set[int]
    graph: WebGraph
    config: WalkConfig
    frozen: Optional[FrozenStore] = None
    catalog: Optional[SeenCatalog] = None
    forced_jumps: int = 0
    stuck_steps: dict[int, int] = field(default_factory=dict)

    @property
    def total_steps(self) -> int:
        return sum(t.total_steps for t in self.traces)


def step_ab(env: Environment, store: FrozenStore, current: int, rng: random.Random,
            step_index: int = 0) -> Step:
    """One transition of the shared undirected walk.

    Picks uniformly among the frozen adjacency slots of the current node plus
    its single selfloop slot.  An unfetchable pick falls back to a uniformly
    random fetchable sibling; with no fetchable sibling the walk stays put via
    the selfloop, which is always present.
    """
    rec = store.get(current)
    slots = rec.slots
    k = len(slots)
    i = rng.randrange(k + 1)
    if i == k:
        return Step(current, SELFLOOP, 1)
    target = slots[i]
    outcome = env.fetch(target)
    if outcome.fetched:
        final = outcome.final
        if final not in store:
            freeze_adjacency(store, env, final, step_index, outcome.resolution.chain)
        return Step(final, OUTLINK if i < len(rec.outlinks) else INLINK, 1)
    siblings = _fetchable_siblings(env, rec)
    if not siblings:
        return Step(current, SELFLOOP, 1)
    pick = siblings[rng.randrange(len(siblings))]
    outcome = env.fetch(pick)
    final = outcome.final
    if final not in store:
        freeze_adjacency(store, env, final, step_index, outcome.resolution.chain)
    return Step(final, SIBLING, 1)


_sibling_cache_key = "_websample_siblings"


def _fetchable_siblings(env: Environment, rec) -> list[int]:
    cache = getattr(env, _sibling_cache_key, None)
    if cache is None:
        cache = {}
        setattr(env, _sibling_cache_key, cache)
    sibs = cache.get(rec.node)
    if sibs is None:
        sibs = [u for u in dict.fromkeys(rec.slots) if env.fetchable(u)]
        cache[rec.node] = sibs
    return sibs


def step_c(env: Environment, catalog: SeenCatalog, current: int, d: float,
           rng: random.Random, jump_mode: str = "hierarchy") -> tuple[Step, bool]:
    """One transition of walk C.  Returns (step, forced_jump).

    With probability d the walk jumps through the seen hierarchy (or uniformly
    over all graph nodes in verification mode).  Otherwise it traverses a
    uniform outlink of the current node; a dead end or an unfetchable target
    forces a jump instead.
    """
    forced = False
    if rng.random() >= d:
        outs = env.graph.out(current)
        if outs:
            target = outs[rng.randrange(len(outs))]
            outcome = env.fetch(target)
            if outcome.fetched:
                return Step(outcome.final, OUTLINK, 1), False
        forced = True
    n = env.graph.n
    while True:
        if jump_mode == "uniform":
            target = rng.randrange(n)
        else:
            target = catalog.pick(rng)
        outcome = env.fetch(target)
        if outcome.fetched:
            return Step(outcome.final, JUMP, 1), forced


def geometric_run_length(p: float, rng: random.Random) -> int:
    """Selfloop steps before the walk leaves, when leaving succeeds w.p. p."""
    if p >= 1.0:
        return 0
    u = rng.random()
    return int(math.log1p(-u) / math.log1p(-p))


def inject_selfloops(trace: WalkTrace, store: FrozenStore, algorithm: str,
                     max_degree: int, rng: random.Random) -> WalkTrace:
    """Turn a shared-walk trace into an algorithm A or B trace.

    For A the trace already carries its selfloop steps and is returned as is.
    For B every visit unit of the trace (arrivals and each walked selfloop
    step) is padded with a geometric number of extra selfloop steps: a node
    whose walked degree is k leaves the padded regular graph with probability
    k / max_degree per step, so the run length is Geometric(k / max_degree)
    with support {0, 1, ...}.  Identical (trace, rng seed) give identical
    output.
    """
    if algorithm == "A":
        return trace
    if algorithm != "B":
        raise ConfigurationError("algorithm must be A or B")
    padded = WalkTrace(trace.walker_id)
    leave_prob: dict[int, float] = {}
    for node, kind, count in zip(trace.nodes, trace.kinds, trace.counts):
        p = leave_prob.get(node)
        if p is None:
            k = store.get(node).slot_count + 1
            if k > max_degree:
                raise ConfigurationError(
                    f"max_degree {max_degree} below walked degree {k} of node {node}")
            p = k / max_degree
            leave_prob[node] = p
        if kind == SELFLOOP:
            extra = 0
            for _ in range(count):
                extra += geometric_run_length(p, rng)
            padded.append(node, SELFLOOP, count + extra)
        else:
            padded.append(node, kind, 1)
            extra = geometric_run_length(p, rng)
            if extra:
                padded.append(node, SELFLOOP, extra)
    return padded


def run_walks(graph: WebGraph, config: WalkConfig) -> MergedWalk:
    """Run the configured number of walkers and merge their traces.

    Walkers advance round-robin with independent RNG streams keyed by walker
    index, sharing one frozen-adjacency store (AB) or one seen catalog (C), so
    the merged result is a pure function of (graph, config).  A walker stops
    early when the host-overload rule declares it stuck.
    """
    config.validate()
    if config.start_node not in graph.nodes:
        raise StartupError(f"start node {config.start_node} does not exist")
    env = Environment(graph, derive_seed(config.seed, "env"))
    start_outcome = env.fetch(config.start_node)
    if not start_outcome.fetched:
        raise StartupError(
            f"start node {config.start_node} is unfetchable ({start_outcome.reason})")
    start = start_outcome.final

    is_ab = config.algorithm == "AB"
    store = FrozenStore() if is_ab else None
    catalog = None if is_ab else SeenCatalog()
    if is_ab:
        freeze_adjacency(store, env, start, 0, start_outcome.resolution.chain)

    def arrive(node: int) -> None:
        # First visit: the node and the heads of its outlinks become seen.
        if node in catalog.visited:
            return
        catalog.mark_visited(node)
        meta = graph.meta(node)
        catalog.add_seen(node, meta.host, meta.domain)
        for head in graph.out(node):
            hm = graph.meta(head)
            catalog.add_seen(head, hm.host, hm.domain)

    rngs = [random.Random(derive_seed(config.seed, "walker", i)) for i in range(config.walkers)]
    traces = [WalkTrace(i) for i in range(config.walkers)]
    detectors = [StuckDetector(config.consecutive_host_limit, config.overload_limit)
                 for _ in range(config.walkers)]
    current = [start] * config.walkers
    stuck: set[int] = set()
    stuck_steps: dict[int, int] = {}
    forced_jumps = 0
    start_host = graph.host(start)
    for i in range(config.walkers):
        traces[i].append(start, START, 1)
        if not is_ab:
            arrive(start)
        consumed, is_stuck = detectors[i].feed(start_host, 1)
        if is_stuck:
            stuck.add(i)
            stuck_steps[i] = traces[i].total_steps

    live = [i for i in range(config.walkers) if i not in stuck]
    d = config.d
    jump_mode = config.jump_mode
    for step_index in range(1, config.step_budget + 1):
        if not live:
            break
        still = []
        for i in live:
            rng = rngs[i]
            if is_ab:
                step = step_ab(env, store, current[i], rng, step_index)
            else:
                step, forced = step_c(env, catalog, current[i], d, rng, jump_mode)
                if forced:
                    forced_jumps += 1
                arrive(step.node)
            consumed, is_stuck = detectors[i].feed(graph.host(step.node), step.count)
            if consumed:
                traces[i].append(step.node, step.kind, consumed)
            current[i] = step.node
            if is_stuck:
                stuck.add(i)
                stuck_steps[i] = traces[i].total_steps
            else:
                still.append(i)
        live = still

    visit_count: Counter = Counter()
    tallies: Counter = Counter()
    for trace in traces:
        for node, kind, count in zip(trace.nodes, trace.kinds, trace.counts):
            visit_count[node] += count
            if kind != START:
                tallies[kind] += count
    return MergedWalk(
        traces=traces,
        visit_count=visit_count,
        transition_tallies=tallies,
        stuck_walkers=stuck,
        graph=graph,
        config=config,
        frozen=store,
        catalog=catalog,
        forced_jumps=forced_jumps,
        stuck_steps=stuck_steps,
    )


def detect_stuck_and_prune(merged: MergedWalk, config: Optional[WalkConfig] = None) -> MergedWalk:
    """Re-run stuck detection over the traces and drop stuck walkers entirely.

    Removal takes the stuck walkers' visit counts with it; nodes also visited
    by surviving walkers stay, with reduced counts.
    """
    config = config or merged.config
    graph = merged.graph
    stuck = set(merged.stuck_walkers)
    for trace in merged.traces:
        if trace.walker_id in stuck:
            continue
        detector = StuckDetector(config.consecutive_host_limit, config.overload_limit)
        for node, count in zip(trace.nodes, trace.counts):
            _, is_stuck = detector.feed(graph.host(node), count)
            if is_stuck:
                stuck.add(trace.walker_id)
                break
    survivors = [t for t in merged.traces if t.walker_id not in stuck]
    visit_count: Counter = Counter()
    tallies: Counter = Counter()
    for trace in survivors:
        for node, kind, count in zip(trace.nodes, trace.kinds, trace.counts):
            visit_count[node] += count
            if kind != START:
                tallies[kind] += count
    return MergedWalk(
        traces=survivors,
        visit_count=visit_count,
        transition_tallies=tallies,
        stuck_walkers=stuck,
        graph=merged.graph,
        config=merged.config,
        frozen=merged.frozen,
        catalog=merged.catalog,
        forced_jumps=merged.forced_jumps,
        stuck_steps=dict(merged.stuck_steps),
    )


def save_traces(merged: MergedWalk, path) -> None:
    """Dump: ``W <walker> <stepindex> <nodeid> <kind>[:<count>]`` lines."""
    with open(path, "w", encoding="utf-8") as fh:
        for trace in merged.traces:
            for index, (node, kind, count) in enumerate(
                    zip(trace.nodes, trace.kinds, trace.counts)):
                suffix = f":{count}" if kind == SELFLOOP else ""
                fh.write(f"W {trace.walker_id} {index} {node} {kind}{suffix}\n")


def load_traces(path) -> list[WalkTrace]:
    traces: dict[int, WalkTrace] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split(" ")
            if parts[0] != "W" or len(parts) != 5:
                raise ValueError(f"bad trace line: {line!r}")
            walker = int(parts[1])
            node = int(parts[3])
            kind, _, count = parts[4].partition(":")
            trace = traces.get(walker)
            if trace is None:
                traces[walker] = trace = WalkTrace(walker)
            trace.append(node, kind, int(count) if count else 1)
    return [traces[w] for w in sorted(traces)]


def rebuild_merged(traces: list[WalkTrace], graph: WebGraph, config: WalkConfig,
                   frozen: Optional[FrozenStore] = None) -> MergedWalk:
    """Reassemble a MergedWalk from reloaded traces."""
    visit_count: Counter = Counter()
    tallies: Counter = Counter()
    for trace in traces:
        for node, kind, count in zip(trace.nodes, trace.kinds, trace.counts):
            visit_count[node] += count
            if kind != START:
                tallies[kind] += count
    return MergedWalk(traces=traces, visit_count=visit_count, transition_tallies=tallies,
                      stuck_walkers=set(), graph=graph, config=config, frozen=frozen)


def summary_text(merged: MergedWalk) -> str:
    """Key-value block with counts, tallies and the stuck list."""
    lines = [
        f"algorithm = {merged.config.algorithm}",
        f"walkers = {len(merged.traces)}",
        f"steps_total = {merged.total_steps}",
        f"visited_states = {len(merged.visit_count)}",
    ]
    for kind in TRANSITION_KINDS:
        lines.append(f"tally.{kind} = {merged.transition_tallies.get(kind, 0)}")
    lines.append(f"forced_jumps = {merged.forced_jumps}")
    stuck = ",".join(str(i) for i in sorted(merged.stuck_walkers))
    lines.append(f"stuck_walkers = {stuck}")
    return "\n".join(lines) + "\n"
