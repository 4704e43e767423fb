"""Command line entry points.

Subcommands mirror the pipeline stages: generate, walk, sample, analyze,
compare, all.  Exit codes: 0 success, 2 configuration error, 3 stage failure.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import walkers, webgraph
from .environment import load_store
from .experiment import (ConfigError, Experiment, ExperimentConfig, StageError,
                         emit_comparison)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STAGE = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="websample",
        description="Compare random-walk web-page sampling algorithms on simulated graphs.")
    parser.add_argument("--config", type=Path, default=None, help="flat key=value config file")
    parser.add_argument("--seed", type=int, default=None, help="override the global seed")
    parser.add_argument("--out", type=Path, default=None, help="output directory")
    parser.add_argument("--verify-mode", action="store_true",
                        help="walk C jumps uniformly over all nodes (oracle comparison)")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in (
        ("generate", "build or copy the graph file"),
        ("walk", "run the AB and C walk phases"),
        ("sample", "draw every configured sample type"),
        ("analyze", "write reports and figures for existing samples"),
        ("all", "run every stage"),
    ):
        sub.add_parser(name, help=doc)
    compare = sub.add_parser("compare", help="merge comparison rows across finished runs")
    compare.add_argument("runs", nargs="+", type=Path, help="finished run directories")
    return parser


def _load_config(args) -> ExperimentConfig:
    if args.config is not None:
        config = ExperimentConfig.parse(args.config)
    else:
        config = ExperimentConfig.defaults()
    if args.seed is not None:
        config.values["seed"] = str(args.seed)
    if args.out is not None:
        config.values["out.dir"] = str(args.out)
    config.validate()
    return config


def _experiment(args) -> Experiment:
    config = _load_config(args)
    out_dir = Path(config.values["out.dir"])
    return Experiment(config, out_dir, verify_mode=args.verify_mode)


def _reload_walks(exp: Experiment, graph) -> dict:
    merged = {}
    start_key = exp.config.values["walk.start"]
    from .experiment import _first_fetchable

    start = _first_fetchable(graph) if start_key == "auto" else int(start_key)
    frozen_path = exp.out / "frozen.txt"
    if not frozen_path.exists():
        raise ConfigError(f"{frozen_path} not found; run the walk stage first")
    frozen = load_store(frozen_path)
    for algorithm in ("AB", "C"):
        path = exp.out / f"walk_{algorithm.lower()}.trace"
        if not path.exists():
            raise ConfigError(f"{path} not found; run the walk stage first")
        traces = walkers.load_traces(path)
        cfg = exp.config.walk_config(algorithm, start)
        merged[algorithm] = walkers.rebuild_merged(
            traces, graph, cfg, frozen if algorithm == "AB" else None)
    return merged


def _reload_samples(exp: Experiment) -> dict:
    from .subsampling import load_sample

    sample_dir = exp.out / "samples"
    reps = int(exp.config.values["sample.repetitions"])
    samples = {}
    for label in exp.config.sample_labels:
        loaded = []
        for i in range(reps):
            path = sample_dir / f"{label}.{i}.sample"
            if not path.exists():
                raise ConfigError(f"{path} not found; run the sample stage first")
            loaded.append(load_sample(path))
        samples[label] = loaded
    return samples


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "compare":
            out = args.out or Path("comparison.csv")
            if out.is_dir() or str(out).endswith("/"):
                out = Path(out) / "comparison.csv"
            emit_comparison(args.runs, out)
            print(f"wrote {out}")
            return EXIT_OK
        exp = _experiment(args)
        exp.out.mkdir(parents=True, exist_ok=True)
        if args.command == "generate":
            graph = exp.stage_generate()
            print(f"graph: {graph.n} nodes, {graph.m} edges -> {exp.out / 'graph.txt'}")
        elif args.command == "walk":
            graph = exp._load_graph()
            merged = exp.stage_walk(graph)
            for name, walk in merged.items():
                print(f"walk {name}: {walk.total_steps} steps, "
                      f"{len(walk.visit_count)} states, {len(walk.stuck_walkers)} stuck")
        elif args.command == "sample":
            graph = exp._load_graph()
            merged = _reload_walks(exp, graph)
            samples = exp.stage_sample(merged)
            for label, reps in samples.items():
                sizes = ",".join(str(len(s.members)) for s in reps)
                print(f"sample {label}: sizes {sizes}")
        elif args.command == "analyze":
            graph = exp._load_graph()
            merged = _reload_walks(exp, graph)
            samples = _reload_samples(exp)
            rows = exp.stage_analyze(graph, merged, samples)
            exp.stage_compare(rows)
            print(f"reports in {exp.out / 'reports'}; figures in {exp.out / 'figures'}")
        elif args.command == "all":
            graph = exp.stage_generate()
            merged = exp.stage_walk(graph)
            samples = exp.stage_sample(merged)
            rows = exp.stage_analyze(graph, merged, samples)
            exp.stage_compare(rows)
            print(f"run complete in {exp.out}")
        exp.write_manifest()
        for stage, seconds in exp.manifest.wall_times.items():
            print(f"stage {stage}: {seconds:.2f}s")
        return EXIT_OK
    except (ConfigError, webgraph.ParameterError, walkers.ConfigurationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
