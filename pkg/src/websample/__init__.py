"""websample: a workbench for random-walk web-page sampling algorithms.

Three samplers run on simulated web graphs: the degree-proportional
undirected walk (algorithm A), its selfloop-regularized uniform variant
(algorithm B, sharing the same walk), and the PageRank-imitating walk with
hierarchical random jumps (algorithm C).  Each walk feeds weighted
subsampling phases whose bias the analysis suite measures against exact
Markov-chain oracles.
"""

from .webgraph import (Behavior, GeneratorSpec, NodeMeta, WebGraph,
                       generate_power_law_web, generate_trap_graph,
                       load_graph, modified_degree, save_graph)
from .environment import (Environment, FrozenRecord, FrozenStore,
                          freeze_adjacency, load_store, save_store)
from .walkers import (MergedWalk, SeenCatalog, Step, WalkConfig, WalkTrace,
                      detect_stuck_and_prune, inject_selfloops, run_walks,
                      step_ab, step_c)
from .subsampling import (Sample, SampleSpec, ScoreVector, WindowedWalk,
                          extract_window, make_samples, subgraph_pagerank,
                          subsample, visit_ratio)
from .analysis import (DistributionReport, HostReport, OutdegreeReport,
                       PowerLawFit, content_length_report, fit_power_law,
                       host_report, outdegree_report, pagerank_range_report,
                       stationary_oracle, tld_report, tv_distance)
from .experiment import ExperimentConfig, RunManifest, emit_comparison, run_experiment

__version__ = "0.1.0"
