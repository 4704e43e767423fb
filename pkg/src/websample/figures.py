"""Render report figures to PNG files next to the CSV output."""
from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .analysis import DistributionReport, HostReport  # noqa: E402

FIG_SIZE = (6.4, 4.2)
DPI = 130


def _save(fig, path):
    fig.savefig(path, dpi=DPI)
    plt.close(fig)


def outdegree_figure(reports: dict, path) -> None:
    """Log-log outdegree histograms, one line per sample label."""
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    for label in sorted(reports):
        xs, ys = [], []
        for bucket, _, pct in reports[label].rows:
            if pct <= 0:
                continue
            if bucket == "0":
                continue
            lo, hi = bucket.strip("[)").split(",")
            xs.append(math.sqrt(float(lo) * float(hi)))
            ys.append(pct)
        if xs:
            ax.plot(xs, ys, marker="o", markersize=3, linewidth=1, label=label)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("outdegree")
    ax.set_ylabel("% of sample")
    ax.set_title("Outdegree distribution")
    ax.legend(fontsize=7)
    _save(fig, path)


def content_length_figure(reports: dict, path) -> None:
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    labels = sorted(reports)
    buckets = [row[0] for row in reports[labels[0]].rows]
    width = 0.8 / max(1, len(labels))
    for i, label in enumerate(labels):
        xs = [j + i * width for j in range(len(buckets))]
        ax.bar(xs, [row[2] for row in reports[label].rows], width=width, label=label)
    ax.set_xticks(range(len(buckets)))
    ax.set_xticklabels(buckets, rotation=45, fontsize=7)
    ax.set_ylabel("% of sample")
    ax.set_title("Content length distribution")
    ax.legend(fontsize=7)
    _save(fig, path)


def pagerank_range_figure(reports: dict, path) -> None:
    """Grouped bars of score-decade shares, e.g. crawl vs C_PR vs C_VR."""
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    labels = sorted(reports)
    all_buckets = sorted({row[0] for label in labels for row in reports[label].rows})
    width = 0.8 / max(1, len(labels))
    for i, label in enumerate(labels):
        shares = {row[0]: row[2] for row in reports[label].rows}
        xs = [j + i * width for j in range(len(all_buckets))]
        ax.bar(xs, [shares.get(b, 0.0) for b in all_buckets], width=width, label=label)
    ax.set_xticks(range(len(all_buckets)))
    ax.set_xticklabels(all_buckets, rotation=45, fontsize=7)
    ax.set_ylabel("% of nodes")
    ax.set_title("PageRank value distribution")
    ax.legend(fontsize=7)
    _save(fig, path)


def top_host_figure(reports: dict, path, k: int = 8) -> None:
    """Top-host concentration per sample label."""
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    labels = sorted(reports)
    shares = []
    for label in labels:
        report: HostReport = reports[label]
        shares.append(report.top[0][1] if report.top else 0.0)
    ax.barh(range(len(labels)), shares)
    ax.set_yticks(range(len(labels)))
    ax.set_yticklabels(labels, fontsize=7)
    ax.set_xlabel("% of sample on the top host")
    ax.set_title("Top host concentration")
    fig.tight_layout()
    _save(fig, path)


def tld_figure(reports: dict, path) -> None:
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    labels = sorted(reports)
    buckets = [row[0] for row in reports[labels[0]].rows]
    width = 0.8 / max(1, len(labels))
    for i, label in enumerate(labels):
        xs = [j + i * width for j in range(len(buckets))]
        ax.bar(xs, [row[2] for row in reports[label].rows], width=width, label=label)
    ax.set_xticks(range(len(buckets)))
    ax.set_xticklabels(buckets, rotation=45, fontsize=7)
    ax.set_ylabel("% of sample")
    ax.set_title("Top level domain distribution")
    ax.legend(fontsize=6)
    _save(fig, path)
