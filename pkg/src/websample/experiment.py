"""Experiment pipeline: generate -> walk -> sample -> analyze -> compare.

The configuration is a flat key-value text file with sectioned keys
(``walk.c.d = 0.142857``), chosen so manifests stay reproducible and
diffable.  Stage seeds derive from the global seed and the stage name, so
adding a sample type never perturbs earlier stages.  Rerunning a config
reproduces byte-identical outputs.
"""
from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import analysis, figures, subsampling, walkers, webgraph
from .seeds import derive_seed
from .subsampling import SAMPLE_LABELS, SampleSpec
from .walkers import WalkConfig


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


DEFAULTS = {
    "seed": "7",
    "graph.source": "generate",          # generate | file
    "graph.file": "",
    "graph.n": "2000",
    "graph.exponent": "2.72",
    "graph.hosts_per_domain": "2.0",
    "graph.pages_per_host": "6.0",
    "graph.hub_bias": "1.0",
    "graph.hazard.deadend": "0.02",
    "graph.hazard.fetchfail": "0.01",
    "graph.hazard.timeout": "0.01",
    "graph.hazard.redirect": "0.02",
    "graph.hazard.sessionid": "0.01",
    "walk.ab.walkers": "8",
    "walk.ab.steps": "5000",
    "walk.ab.max": "10000000",
    "walk.ab.consecutive_host_limit": "3000",
    "walk.ab.overload_limit": "12",
    "walk.c.walkers": "8",
    "walk.c.steps": "5000",
    "walk.c.d": "0.14285714285714285",
    "walk.c.jump_mode": "hierarchy",
    "walk.start": "auto",
    "sample.target_size": "500",
    "sample.repetitions": "5",
    "sample.types": ",".join(SAMPLE_LABELS),
    "out.dir": "out",
}


@dataclass
class ExperimentConfig:
    values: dict

    @staticmethod
    def parse(path) -> "ExperimentConfig":
        values = dict(DEFAULTS)
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ConfigError(f"line {lineno}: expected key = value")
                key, _, value = line.partition("=")
                key = key.strip()
                if key not in DEFAULTS:
                    raise ConfigError(f"line {lineno}: unknown key {key!r}")
                values[key] = value.strip()
        cfg = ExperimentConfig(values)
        cfg.validate()
        return cfg

    @staticmethod
    def defaults() -> "ExperimentConfig":
        return ExperimentConfig(dict(DEFAULTS))

    def validate(self) -> None:
        try:
            self.seed
            self.sample_labels
            int(self.values["graph.n"])
            float(self.values["walk.c.d"])
        except (KeyError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        if self.values["graph.source"] not in ("generate", "file"):
            raise ConfigError("graph.source must be generate or file")
        if self.values["graph.source"] == "file" and not Path(self.values["graph.file"]).exists():
            raise ConfigError(f"graph.file {self.values['graph.file']!r} does not exist")
        for label in self.sample_labels:
            if label not in SAMPLE_LABELS:
                raise ConfigError(f"unknown sample type {label!r}")
        if len(set(self.sample_labels)) != len(self.sample_labels):
            raise ConfigError("sample labels must be unique")

    @property
    def seed(self) -> int:
        return int(self.values["seed"])

    @property
    def sample_labels(self) -> list:
        return [s.strip() for s in self.values["sample.types"].split(",") if s.strip()]

    def canonical_text(self) -> str:
        # out.dir names where the tree lands, not what the experiment is
        keys = sorted(k for k in self.values if k != "out.dir")
        return "\n".join(f"{k} = {self.values[k]}" for k in keys) + "\n"

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()

    def generator_spec(self) -> webgraph.GeneratorSpec:
        hazards = {}
        for name in ("deadend", "fetchfail", "timeout", "redirect", "sessionid"):
            rate = float(self.values.get(f"graph.hazard.{name}", "0"))
            if rate:
                hazards[name] = rate
        return webgraph.GeneratorSpec(
            n=int(self.values["graph.n"]),
            target_exponent=float(self.values["graph.exponent"]),
            hosts_per_domain=float(self.values["graph.hosts_per_domain"]),
            pages_per_host=float(self.values["graph.pages_per_host"]),
            hazard_rates=hazards,
            seed=derive_seed(self.seed, "generate"),
            hub_bias=float(self.values["graph.hub_bias"]),
        )

    def walk_config(self, algorithm: str, start_node: int) -> WalkConfig:
        if algorithm == "AB":
            return WalkConfig(
                algorithm="AB",
                max_degree=int(self.values["walk.ab.max"]),
                walkers=int(self.values["walk.ab.walkers"]),
                step_budget=int(self.values["walk.ab.steps"]),
                start_node=start_node,
                consecutive_host_limit=int(self.values["walk.ab.consecutive_host_limit"]),
                overload_limit=int(self.values["walk.ab.overload_limit"]),
                seed=derive_seed(self.seed, "walk", "AB"),
            )
        return WalkConfig(
            algorithm="C",
            d=float(self.values["walk.c.d"]),
            walkers=int(self.values["walk.c.walkers"]),
            step_budget=int(self.values["walk.c.steps"]),
            start_node=start_node,
            consecutive_host_limit=int(self.values["walk.ab.consecutive_host_limit"]),
            overload_limit=int(self.values["walk.ab.overload_limit"]),
            seed=derive_seed(self.seed, "walk", "C"),
            jump_mode=self.values["walk.c.jump_mode"],
        )


@dataclass
class RunManifest:
    config_hash: str
    graph_hash: str = ""
    stages: dict = field(default_factory=dict)      # stage -> [relative paths]
    wall_times: dict = field(default_factory=dict)  # stage -> seconds
    tallies: dict = field(default_factory=dict)

    def text(self) -> str:
        # Wall times stay out of the file so reruns produce identical trees.
        lines = [f"config_hash = {self.config_hash}", f"graph_hash = {self.graph_hash}"]
        for stage in sorted(self.stages):
            for rel in self.stages[stage]:
                lines.append(f"file.{stage} = {rel}")
        for key in sorted(self.tallies):
            lines.append(f"tally.{key} = {self.tallies[key]}")
        return "\n".join(lines) + "\n"


def _first_fetchable(graph: webgraph.WebGraph) -> int:
    from .environment import Environment

    env = Environment(graph)
    for v in range(graph.n):
        if env.fetch(v).fetched:
            return v
    raise ConfigError("graph has no fetchable node to start from")


def _file_hash(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class Experiment:
    """Stage runner over one output directory."""

    def __init__(self, config: ExperimentConfig, out_dir, verify_mode: bool = False):
        self.config = config
        self.out = Path(out_dir)
        if verify_mode:
            self.config.values["walk.c.jump_mode"] = "uniform"
        self.manifest = RunManifest(config_hash=config.config_hash())

    # -- stage helpers -----------------------------------------------------
    def _record(self, stage: str, path: Path) -> Path:
        rel = str(path.relative_to(self.out))
        self.manifest.stages.setdefault(stage, []).append(rel)
        return path

    def _run_stage(self, stage: str, fn):
        started = time.perf_counter()
        try:
            result = fn()
        except Exception as exc:
            (self.out / f"{stage}.partial").write_text(f"stage {stage} failed: {exc}\n")
            raise StageError(stage, exc) from exc
        self.manifest.wall_times[stage] = time.perf_counter() - started
        return result

    # -- stages ------------------------------------------------------------
    def stage_generate(self) -> webgraph.WebGraph:
        def build():
            self.out.mkdir(parents=True, exist_ok=True)
            if self.config.values["graph.source"] == "file":
                graph = webgraph.load_graph(self.config.values["graph.file"])
            else:
                graph = webgraph.generate_power_law_web(self.config.generator_spec())
            path = self.out / "graph.txt"
            webgraph.save_graph(graph, path)
            self._record("generate", path)
            self.manifest.graph_hash = _file_hash(path)
            return graph

        return self._run_stage("generate", build)

    def _load_graph(self) -> webgraph.WebGraph:
        path = self.out / "graph.txt"
        if not path.exists():
            raise ConfigError("graph.txt not found; run the generate stage first")
        self.manifest.graph_hash = _file_hash(path)
        return webgraph.load_graph(path)

    def stage_walk(self, graph: webgraph.WebGraph) -> dict:
        def run():
            start_key = self.config.values["walk.start"]
            start = _first_fetchable(graph) if start_key == "auto" else int(start_key)
            merged = {}
            for algorithm in ("AB", "C"):
                cfg = self.config.walk_config(algorithm, start)
                walk = walkers.run_walks(graph, cfg)
                walk = walkers.detect_stuck_and_prune(walk)
                merged[algorithm] = walk
                name = algorithm.lower()
                trace_path = self.out / f"walk_{name}.trace"
                walkers.save_traces(walk, trace_path)
                self._record("walk", trace_path)
                summary_path = self.out / f"walk_{name}_summary.txt"
                summary_path.write_text(walkers.summary_text(walk))
                self._record("walk", summary_path)
                for kind, count in walk.transition_tallies.items():
                    self.manifest.tallies[f"{name}.{kind}"] = count
                if algorithm == "AB":
                    store_path = self.out / "frozen.txt"
                    from .environment import save_store

                    save_store(walk.frozen, store_path)
                    self._record("walk", store_path)
            return merged

        return self._run_stage("walk", run)

    def stage_sample(self, merged: dict) -> dict:
        def run():
            target = int(self.config.values["sample.target_size"])
            reps = int(self.config.values["sample.repetitions"])
            out_samples = {}
            sample_dir = self.out / "samples"
            sample_dir.mkdir(exist_ok=True)
            for label in self.config.sample_labels:
                spec = SampleSpec.from_label(
                    label, target, derive_seed(self.config.seed, "sample", label))
                source = merged["C"] if spec.algorithm_label == "C" else merged["AB"]
                if spec.algorithm_label in ("A", "B"):
                    source = self._algorithm_view(source, spec.algorithm_label)
                samples = subsampling.make_samples(source, spec, reps)
                out_samples[label] = samples
                for i, sample in enumerate(samples):
                    path = sample_dir / f"{label}.{i}.sample"
                    subsampling.save_sample(sample, path)
                    self._record("sample", path)
            return out_samples

        return self._run_stage("sample", run)

    def _algorithm_view(self, merged_ab, algorithm: str):
        cached = getattr(merged_ab, "_views", None)
        if cached is None:
            cached = {}
            merged_ab._views = cached
        if algorithm in cached:
            return cached[algorithm]
        if algorithm == "A":
            view = merged_ab
        else:
            import random as _random

            rng = _random.Random(derive_seed(merged_ab.config.seed, "inject", "B"))
            traces = [walkers.inject_selfloops(t, merged_ab.frozen, "B",
                                               merged_ab.config.max_degree, rng)
                      for t in merged_ab.traces]
            view = walkers.rebuild_merged(traces, merged_ab.graph, merged_ab.config,
                                          merged_ab.frozen)
        cached[algorithm] = view
        return view

    def stage_analyze(self, graph: webgraph.WebGraph, merged: dict, samples: dict) -> dict:
        def run():
            report_dir = self.out / "reports"
            report_dir.mkdir(exist_ok=True)
            fig_dir = self.out / "figures"
            fig_dir.mkdir(exist_ok=True)
            rows = {}
            host_by_label = {}
            outdeg_by_label = {}
            tld_by_label = {}
            content_by_label = {}
            for label, reps in samples.items():
                hosts = analysis.average_host_reports(
                    [analysis.host_report(s.members, graph) for s in reps])
                outdegs = [analysis.outdegree_report(s.members, graph) for s in reps]
                tlds = analysis.average_distribution_reports(
                    [analysis.tld_report(s.members, graph) for s in reps])
                contents = analysis.average_distribution_reports(
                    [analysis.content_length_report(s.members, graph) for s in reps])
                host_by_label[label] = hosts
                tld_by_label[label] = tlds
                content_by_label[label] = contents
                outdeg_by_label[label] = analysis.average_distribution_reports(
                    [o.histogram for o in outdegs])
                exponents = [o.fit.exponent for o in outdegs if o.fit is not None]
                avg_out = sum(o.avg for o in outdegs) / len(outdegs)
                max_out = max(o.max for o in outdegs)
                rows[label] = {
                    "unique_hosts": hosts.unique_host_count,
                    "top_host": hosts.top[0][2] if hosts.top else "",
                    "top_host_pct": hosts.top[0][1] if hosts.top else 0.0,
                    "avg_outdegree": avg_out,
                    "max_outdegree": max_out,
                    "powerlaw_exponent": (sum(exponents) / len(exponents)) if exponents else None,
                    "tld": tlds.as_dict(),
                }
                for name, report in (("hosts", hosts),):
                    path = report_dir / f"{label}_{name}.csv"
                    path.write_text(analysis.host_csv(report))
                    self._record("analyze", path)
                for name, report in (("outdegree", outdeg_by_label[label]),
                                     ("tld", tlds), ("content_length", contents)):
                    path = report_dir / f"{label}_{name}.csv"
                    path.write_text(analysis.distribution_csv(report))
                    self._record("analyze", path)
                summary = analysis.report_summary(label, hosts, outdegs[0], tlds, contents)
                summary["outdegree"] = {
                    "avg": round(avg_out, 2),
                    "max": max_out,
                    "powerlaw_exponent": (round(rows[label]["powerlaw_exponent"], 3)
                                          if rows[label]["powerlaw_exponent"] is not None else None),
                    "powerlaw_xmin": outdegs[0].fit.xmin if outdegs[0].fit else None,
                }
                path = report_dir / f"{label}_summary.json"
                path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
                self._record("analyze", path)

            # Crawl-level PageRank-range comparison for the C walk.
            pr_reports = {}
            c_merge = merged.get("C")
            if c_merge is not None and c_merge.visit_count:
                scores = subsampling.subgraph_pagerank(c_merge, c_merge.config.d)
                pr_reports["crawl"] = analysis.pagerank_range_report(scores)
                for label in ("C_PR", "C_VR"):
                    if label in samples and samples[label][0].members:
                        pr_reports[label] = analysis.pagerank_range_report(
                            scores, samples[label][0].members)
                for label, report in pr_reports.items():
                    path = report_dir / f"pagerank_ranges_{label}.csv"
                    path.write_text(analysis.distribution_csv(report))
                    self._record("analyze", path)

            figures.outdegree_figure(outdeg_by_label, fig_dir / "outdegree.png")
            self._record("analyze", fig_dir / "outdegree.png")
            figures.content_length_figure(content_by_label, fig_dir / "content_length.png")
            self._record("analyze", fig_dir / "content_length.png")
            figures.tld_figure(tld_by_label, fig_dir / "tld.png")
            self._record("analyze", fig_dir / "tld.png")
            figures.top_host_figure(host_by_label, fig_dir / "top_hosts.png")
            self._record("analyze", fig_dir / "top_hosts.png")
            if pr_reports:
                figures.pagerank_range_figure(pr_reports, fig_dir / "pagerank_ranges.png")
                self._record("analyze", fig_dir / "pagerank_ranges.png")
            return rows

        return self._run_stage("analyze", run)

    def stage_compare(self, rows: dict) -> Path:
        def run():
            path = self.out / "comparison.csv"
            path.write_text(comparison_csv({"run": (self.manifest.graph_hash, rows)}))
            self._record("compare", path)
            return path

        return self._run_stage("compare", run)

    def write_manifest(self) -> Path:
        """Write manifest.txt, merging file lists from earlier invocations.

        Staged subcommands each contribute their files, so after the last
        stage the manifest matches what a single `all` run writes.
        """
        path = self.out / "manifest.txt"
        if path.exists():
            for line in path.read_text().splitlines():
                if line.startswith("file."):
                    key, _, rel = line.partition(" = ")
                    stage = key[len("file."):]
                    known = self.manifest.stages.setdefault(stage, [])
                    if rel not in known:
                        known.append(rel)
                elif line.startswith("tally."):
                    key, _, value = line.partition(" = ")
                    self.manifest.tallies.setdefault(key[len("tally."):], int(value))
                elif line.startswith("graph_hash = ") and not self.manifest.graph_hash:
                    self.manifest.graph_hash = line.split(" = ", 1)[1]
        path.write_text(self.manifest.text())
        return path


TLD_COLUMNS = [f".{t}" for t in webgraph.TLD_POOL] + ["other"]


def comparison_csv(runs: dict) -> str:
    """One row per (run, sample type): the cross-measure comparison table."""
    hashes = {graph_hash for graph_hash, _ in runs.values()}
    if len(hashes) > 1:
        raise ValueError("refusing to compare runs over different graphs")
    header = ["run", "sample", "unique_hosts", "top_host", "top_host_pct",
              "avg_outdegree", "max_outdegree", "powerlaw_exponent"] + TLD_COLUMNS
    lines = [",".join(header)]
    for run_name in sorted(runs):
        _, rows = runs[run_name]
        for label in SAMPLE_LABELS:
            if label not in rows:
                continue
            row = rows[label]
            exponent = row["powerlaw_exponent"]
            cells = [
                run_name,
                label,
                f"{row['unique_hosts']:.1f}",
                row["top_host"],
                f"{row['top_host_pct']:.2f}",
                f"{row['avg_outdegree']:.2f}",
                str(row["max_outdegree"]),
                "NA" if exponent is None else f"{exponent:.3f}",
            ]
            cells += [f"{row['tld'].get(col, 0.0):.2f}" for col in TLD_COLUMNS]
            lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def run_experiment(config: ExperimentConfig, out_dir, verify_mode: bool = False) -> RunManifest:
    """Execute every stage; the walk for A and B happens once, C separately."""
    exp = Experiment(config, out_dir, verify_mode)
    graph = exp.stage_generate()
    merged = exp.stage_walk(graph)
    samples = exp.stage_sample(merged)
    rows = exp.stage_analyze(graph, merged, samples)
    exp.stage_compare(rows)
    exp.write_manifest()
    return exp.manifest


def load_comparison_rows(out_dir) -> tuple[str, dict]:
    """Rebuild comparison rows of a finished run from its report files."""
    out = Path(out_dir)
    manifest = out / "manifest.txt"
    if not manifest.exists():
        raise ConfigError(f"{out} has no manifest.txt")
    graph_hash = ""
    for line in manifest.read_text().splitlines():
        if line.startswith("graph_hash = "):
            graph_hash = line.split(" = ", 1)[1]
    rows = {}
    report_dir = out / "reports"
    for label in SAMPLE_LABELS:
        summary_path = report_dir / f"{label}_summary.json"
        if not summary_path.exists():
            continue
        summary = json.loads(summary_path.read_text())
        top = summary["top_hosts"][0] if summary["top_hosts"] else {"host": "", "count": 0, "percentage": 0.0}
        rows[label] = {
            "unique_hosts": summary["unique_hosts"],
            "top_host": top["host"],
            "top_host_pct": top["percentage"],
            "avg_outdegree": summary["outdegree"]["avg"],
            "max_outdegree": summary["outdegree"]["max"],
            "powerlaw_exponent": summary["outdegree"]["powerlaw_exponent"],
            "tld": summary["tld_percentages"],
        }
    return graph_hash, rows


def emit_comparison(run_dirs: list, out_path) -> Path:
    """Comparison CSV across finished runs; refuses mismatched graphs."""
    runs = {}
    for run_dir in run_dirs:
        name = Path(run_dir).name
        key = name
        suffix = 1
        while key in runs:
            suffix += 1
            key = f"{name}#{suffix}"
        runs[key] = load_comparison_rows(run_dir)
    out_path = Path(out_path)
    out_path.write_text(comparison_csv(runs))
    return out_path
