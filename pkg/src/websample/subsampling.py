"""Subsampling phases: the eight windowed A/B samples and the three C samples.

Every sample draws nodes independently with probability min(1, c * w(v)),
where w is the sample type's weight rule and c is calibrated so the expected
sample size hits the target.  The weight rules per unit:

    A States   1 / degree(v)
    A Steps    visits(v) / degree(v)
    B States   1 (uniform)
    B Steps    visits(v)            (degree is the constant max and cancels)
    C_Random   1
    C_PR       1 / subgraph-PageRank(v)
    C_VR       1 / visit-ratio(v)
"""
from __future__ import annotations

import random
import warnings
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from .seeds import derive_seed
from .walkers import MergedWalk, START, WalkTrace
from .webgraph import modified_degree

UNITS = ("States", "Steps", "CRandom", "CPR", "CVR")
WINDOWS = ("LastHalf", "LastQuarter", "All")

SAMPLE_LABELS = (
    "A_StatesOnLastHalf", "A_StatesOnLastQuarter",
    "A_StepsOnLastHalf", "A_StepsOnLastQuarter",
    "B_StatesOnLastHalf", "B_StatesOnLastQuarter",
    "B_StepsOnLastHalf", "B_StepsOnLastQuarter",
    "C_Random", "C_PR", "C_VR",
)


class DataError(ValueError):
    pass


@dataclass
class SampleSpec:
    algorithm_label: str             # A | B | C
    unit: str                        # States | Steps | CRandom | CPR | CVR
    window: str = "All"              # LastHalf | LastQuarter | All
    target_size: int = 10_000
    seed: int = 0

    def validate(self) -> None:
        if self.algorithm_label not in ("A", "B", "C"):
            raise DataError("algorithm_label must be A, B or C")
        if self.unit not in UNITS:
            raise DataError(f"unit must be one of {UNITS}")
        if self.window not in WINDOWS:
            raise DataError(f"window must be one of {WINDOWS}")
        if self.algorithm_label == "C":
            if self.unit not in ("CRandom", "CPR", "CVR"):
                raise DataError("C samples use the CRandom/CPR/CVR units")
            if self.window != "All":
                raise DataError("C samples subsample visited states, not a step window")
        else:
            if self.unit not in ("States", "Steps"):
                raise DataError("A/B samples use the States or Steps unit")
            if self.window not in ("LastHalf", "LastQuarter"):
                raise DataError("A/B samples use the LastHalf or LastQuarter window")
        if self.target_size < 1:
            raise DataError("target_size must be >= 1")

    @property
    def label(self) -> str:
        if self.algorithm_label == "C":
            return {"CRandom": "C_Random", "CPR": "C_PR", "CVR": "C_VR"}[self.unit]
        return f"{self.algorithm_label}_{self.unit}On{self.window}"

    @staticmethod
    def from_label(label: str, target_size: int = 10_000, seed: int = 0) -> "SampleSpec":
        if label in ("C_Random", "C_PR", "C_VR"):
            unit = {"C_Random": "CRandom", "C_PR": "CPR", "C_VR": "CVR"}[label]
            return SampleSpec("C", unit, "All", target_size, seed)
        algo = label[0]
        rest = label[2:]
        for unit in ("States", "Steps"):
            if rest.startswith(unit):
                window = rest[len(unit) + 2:]
                return SampleSpec(algo, unit, window, target_size, seed)
        raise DataError(f"unknown sample label {label!r}")


@dataclass(frozen=True)
class WindowedWalk:
    states: frozenset
    visit_count: Mapping[int, int]
    total_steps: int


@dataclass
class Sample:
    members: set
    weights_used: dict
    spec: SampleSpec


@dataclass
class ScoreVector:
    scores: dict
    kind: str                        # SubgraphPageRank | VisitRatio

    def validate(self) -> None:
        total = sum(self.scores.values())
        if abs(total - 1.0) > 1e-9:
            raise DataError(f"{self.kind} scores sum to {total}, not 1")


def extract_window(merged: MergedWalk, window: str) -> WindowedWalk:
    """States, steps and in-window visit counts of the trailing window.

    Per walker the last ceil(L/2) (or ceil(L/4)) expanded steps are taken,
    selfloop runs counting with their full length; a run straddling the
    boundary is split.
    """
    if window not in WINDOWS:
        raise DataError(f"window must be one of {WINDOWS}")
    counts: Counter = Counter()
    total = 0
    for trace in merged.traces:
        length = trace.total_steps
        if length == 0:
            continue
        if window == "All":
            want = length
        elif window == "LastHalf":
            want = -(-length // 2)
        else:
            want = -(-length // 4)
        total += want
        remaining = want
        for i in range(len(trace.nodes) - 1, -1, -1):
            if remaining <= 0:
                break
            take = min(trace.counts[i], remaining)
            counts[trace.nodes[i]] += take
            remaining -= take
    return WindowedWalk(states=frozenset(counts), visit_count=counts, total_steps=total)


def calibrate_inclusion(weights: Mapping[int, float], target_size: float) -> tuple[float, dict]:
    """Find c with sum(min(1, c*w)) == target_size; returns (c, probabilities).

    The sum is continuous and nondecreasing in c, so bisection converges to
    the unique fixpoint even when some probabilities saturate at 1.  A target
    at or above the population size includes everything.
    """
    if not weights:
        return 0.0, {}
    for node, w in weights.items():
        if w <= 0:
            raise DataError(f"non-positive weight {w} for node {node}")
    n = len(weights)
    if target_size >= n:
        return float("inf"), {v: 1.0 for v in weights}
    values = np.fromiter(weights.values(), dtype=np.float64, count=n)

    def expected(c: float) -> float:
        return float(np.minimum(1.0, c * values).sum())

    lo, hi = 0.0, 1.0 / values.max()
    while expected(hi) < target_size:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if expected(mid) < target_size:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, hi):
            break
    c = 0.5 * (lo + hi)
    probs = {v: min(1.0, c * w) for v, w in weights.items()}
    return c, probs


def _weights_for(windowed: WindowedWalk, spec: SampleSpec,
                 degree_or_score: Optional[Mapping[int, float]]) -> dict:
    if spec.unit in ("States", "Steps") and spec.algorithm_label == "A":
        if degree_or_score is None:
            raise DataError("A samples need a degree lookup")
    if spec.unit in ("CPR", "CVR") and degree_or_score is None:
        raise DataError(f"{spec.label} needs a score lookup")
    weights: dict = {}
    for v in windowed.states:
        if spec.algorithm_label == "A":
            deg = degree_or_score[v]
            base = 1.0 / deg if spec.unit == "States" else windowed.visit_count[v] / deg
        elif spec.algorithm_label == "B":
            base = 1.0 if spec.unit == "States" else float(windowed.visit_count[v])
        elif spec.unit == "CRandom":
            base = 1.0
        else:
            score = degree_or_score[v]
            if score <= 0:
                raise DataError(f"non-positive score for windowed node {v}")
            base = 1.0 / score
        weights[v] = base
    return weights


def subsample(windowed: WindowedWalk, spec: SampleSpec,
              degree_or_score: Optional[Mapping[int, float]] = None) -> Sample:
    """Draw one weighted Bernoulli sample from the window's states."""
    spec.validate()
    weights = _weights_for(windowed, spec, degree_or_score)
    _, probs = calibrate_inclusion(weights, spec.target_size)
    rng = random.Random(derive_seed(spec.seed, "subsample", spec.label))
    members = set()
    weights_used = {}
    for v in sorted(probs):
        p = probs[v]
        if rng.random() < p:
            members.add(v)
            weights_used[v] = p
    return Sample(members=members, weights_used=weights_used, spec=spec)


def subgraph_pagerank(merged: MergedWalk, d: float = 1.0 / 7.0,
                      tol: float = 1e-10, max_iter: int = 200) -> ScoreVector:
    """PageRank of the subgraph induced by the visited states.

    Edges are the known outlinks among visited states; dangling mass is
    spread uniformly; teleport probability d.  Stops at an L1 residual below
    tol or after max_iter sweeps (with a warning naming the residual).
    """
    visited = sorted(merged.visit_count)
    if not visited:
        raise DataError("merged walk has no visited states")
    index = {v: i for i, v in enumerate(visited)}
    n = len(visited)
    src_list, dst_list = [], []
    for v in visited:
        i = index[v]
        for t in merged.graph.out(v):
            j = index.get(t)
            if j is not None:
                src_list.append(i)
                dst_list.append(j)
    scores = _pagerank(n, np.asarray(src_list, dtype=np.int64),
                       np.asarray(dst_list, dtype=np.int64), d, tol, max_iter)
    return ScoreVector({v: float(scores[index[v]]) for v in visited}, "SubgraphPageRank")


def _pagerank(n: int, src: np.ndarray, dst: np.ndarray, d: float,
              tol: float, max_iter: int) -> np.ndarray:
    x = np.full(n, 1.0 / n)
    outdeg = np.bincount(src, minlength=n).astype(np.float64)
    dangling = outdeg == 0
    inv_out = np.zeros(n)
    np.divide(1.0, outdeg, out=inv_out, where=~dangling)
    residual = 1.0
    for _ in range(max_iter):
        flow = np.bincount(dst, weights=x[src] * inv_out[src], minlength=n)
        xn = d / n + (1.0 - d) * (flow + x[dangling].sum() / n)
        residual = float(np.abs(xn - x).sum())
        x = xn
        if residual < tol:
            break
    else:
        warnings.warn(f"pagerank stopped at residual {residual:.3e} after {max_iter} iterations")
    return x / x.sum()


def visit_ratio(source) -> ScoreVector:
    """Visit count over total steps, for a MergedWalk or WindowedWalk."""
    counts = source.visit_count
    total = source.total_steps if isinstance(source, (MergedWalk, WindowedWalk)) else None
    if total is None:
        total = sum(counts.values())
    if total < 1:
        raise DataError("no steps to take ratios over")
    return ScoreVector({v: c / total for v, c in counts.items()}, "VisitRatio")


def frozen_degrees(merged: MergedWalk, algorithm: str = "A") -> dict:
    """Walked degree (slots + selfloop) of every frozen node."""
    if merged.frozen is None:
        raise DataError("merged walk carries no frozen store")
    store = merged.frozen
    return {v: modified_degree(store.get(v), "A", merged.config.max_degree)
            for v in store.nodes()}


def make_samples(merged: MergedWalk, spec: SampleSpec, repetitions: int = 5) -> list[Sample]:
    """Repeated samples with derived seeds; reports average across them."""
    spec.validate()
    windowed = extract_window(merged, spec.window)
    lookup: Optional[Mapping[int, float]] = None
    if spec.algorithm_label == "A":
        lookup = frozen_degrees(merged)
    elif spec.unit == "CPR":
        lookup = subgraph_pagerank(merged, merged.config.d).scores
    elif spec.unit == "CVR":
        lookup = visit_ratio(merged).scores
    samples = []
    for rep in range(repetitions):
        rep_spec = SampleSpec(spec.algorithm_label, spec.unit, spec.window,
                              spec.target_size, derive_seed(spec.seed, "rep", rep))
        samples.append(subsample(windowed, rep_spec, lookup))
    return samples


def save_sample(sample: Sample, path) -> None:
    """Text lines ``S <nodeid> <weight>`` under a header naming the spec."""
    spec = sample.spec
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"sample {spec.label} window={spec.window} unit={spec.unit} "
                 f"target={spec.target_size} seed={spec.seed}\n")
        for v in sorted(sample.members):
            fh.write(f"S {v} {sample.weights_used[v]:.10g}\n")


def load_sample(path) -> Sample:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if not header or header[0] != "sample":
            raise DataError("missing sample header")
        fields = dict(part.split("=", 1) for part in header[2:])
        spec = SampleSpec.from_label(header[1], int(fields["target"]), int(fields["seed"]))
        members = set()
        weights = {}
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] != "S" or len(parts) != 3:
                raise DataError(f"bad sample line: {line.rstrip()!r}")
            v = int(parts[1])
            members.add(v)
            weights[v] = float(parts[2])
    return Sample(members=members, weights_used=weights, spec=spec)
