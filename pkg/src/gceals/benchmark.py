"""Multi-method clustering benchmark harness.

Runs a grid of (dataset, method, dim, seed) jobs, scores each run against the
held-out labels, selects the best embedding dimension per dataset and method
by accuracy, and aggregates within-dataset method ranks into an average rank
per method.

Per-job seeds are derived by stable hashing so results are identical for any
worker count and any execution order. Input-space methods ignore the embedding
dimension: they run once per seed and their scores are replicated across dim
rows of the report.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .baselines import gmm_fit, kmeans
from .linalg import DenseMatrix, Rng
from .metrics import (
    LabelPair,
    adjusted_rand_index,
    clustering_accuracy,
    metrics_json,
    normalized_mutual_information,
)
from .neuralnet import encode, pretrain_autoencoder, save_checkpoint
from .training import (
    MODE_DEC,
    MODE_GCEALS,
    MODE_IDEC,
    GcealsConfig,
    train_dec_variant,
    train_gceals,
    write_embedding_csv,
)

METHODS = ("gceals", "dec", "idec", "kmeans_x", "gmm_x", "kmeans_z", "gmm_z")
X_SPACE_METHODS = ("kmeans_x", "gmm_x")


@dataclass
class BenchmarkTask:
    """One dataset ready to cluster: preprocessed features, labels, k."""

    name: str
    x: DenseMatrix
    y: np.ndarray
    k: int


def job_seed(dataset: str, method: str, dim, seed: int) -> int:
    """Stable per-job seed; dim is ignored for input-space methods."""
    dim_tag = "x" if dim is None else str(int(dim))
    tag = f"{dataset}|{method}|{dim_tag}|{seed}"
    return int.from_bytes(hashlib.sha256(tag.encode("utf-8")).digest()[:8], "big")


def run_single(task: BenchmarkTask, method: str, dim, seed: int,
               gamma: float = 0.1, pretrain_epochs: int = 1000,
               finetune_epochs: int = 1000, batch_cap: int = 256,
               out_dir=None) -> dict:
    """One clustering run, scored against the task labels.

    `dim` must be None for input-space methods. When `out_dir` is given the
    run's artifacts (metrics.json, and for embedding methods trace.csv,
    embedding.csv, checkpoint) are written there.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    if (dim is None) != (method in X_SPACE_METHODS):
        raise ValueError(f"dim={dim!r} invalid for method {method!r}")
    rng = Rng(job_seed(task.name, method, dim, seed))
    x, k = task.x, task.k
    report = None
    embedding = None
    net = None
    started = time.perf_counter()
    if method == "kmeans_x":
        labels = kmeans(x, k, rng).labels
    elif method == "gmm_x":
        labels = gmm_fit(x, k, rng).labels
    elif method in ("kmeans_z", "gmm_z"):
        pre_rng, cluster_rng = rng.split(2)
        net, _ = pretrain_autoencoder(x, dim, pretrain_epochs, batch_cap, pre_rng)
        embedding = encode(net, x)
        if method == "kmeans_z":
            labels = kmeans(embedding, k, cluster_rng).labels
        else:
            labels = gmm_fit(embedding, k, cluster_rng).labels
    else:
        config = GcealsConfig(
            embedding_dim=dim, gamma=gamma, pretrain_epochs=pretrain_epochs,
            finetune_epochs=finetune_epochs, batch_cap=batch_cap,
            mode=MODE_GCEALS if method == "gceals" else method)
        if method == "gceals":
            run = train_gceals(x, k, config, rng)
        else:
            run = train_dec_variant(x, k, config, rng)
        report = run.report
        labels = report.hard_labels
        net = run.autoencoder
        embedding = encode(net, x)
    runtime = time.perf_counter() - started

    pair = LabelPair(task.y, labels)
    acc = clustering_accuracy(pair)
    ari = adjusted_rand_index(pair)
    nmi = normalized_mutual_information(pair)
    cell = {"acc": acc, "ari": ari, "nmi": nmi, "runtime_sec": runtime,
            "status": "ok"}
    if report is not None:
        cell["stop_reason"] = report.stop_reason
        cell["stop_epoch"] = report.stop_epoch
        report.scores = {"acc": round(acc, 6), "ari": round(ari, 6),
                         "nmi": round(nmi, 6)}
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "metrics.json"), "w", encoding="utf-8") as fh:
            fh.write(metrics_json(acc, ari, nmi))
            fh.write("\n")
        if embedding is not None:
            write_embedding_csv(embedding, labels, os.path.join(out_dir, "embedding.csv"))
        if report is not None:
            report.write_trace_csv(os.path.join(out_dir, "trace.csv"))
            with open(os.path.join(out_dir, "train_report.json"), "w",
                      encoding="utf-8") as fh:
                fh.write(report.to_json())
                fh.write("\n")
        if net is not None:
            save_checkpoint(net, os.path.join(out_dir, "checkpoint.npz"))
    return cell


def run_dir(out_root, dataset: str, method: str, dim, seed: int) -> str:
    dim_name = "dimx" if dim is None else f"dim{int(dim)}"
    return os.path.join(str(out_root), dataset, method, dim_name, f"seed{seed}")


def _run_job(payload) -> tuple:
    task = BenchmarkTask(name=payload["name"], x=payload["x"], y=payload["y"],
                         k=payload["k"])
    key = (payload["name"], payload["method"], payload["dim"], payload["seed"])
    try:
        cell = run_single(
            task, payload["method"], payload["dim"], payload["seed"],
            gamma=payload["gamma"], pretrain_epochs=payload["pretrain_epochs"],
            finetune_epochs=payload["finetune_epochs"],
            batch_cap=payload["batch_cap"], out_dir=payload["out_dir"])
    except Exception as exc:
        cell = {"status": "failed", "error": f"{type(exc).__name__}: {exc}"}
    return key, cell


def average_rank_of(values: dict) -> dict:
    """Rank methods by score, higher better; tied scores share the mean rank."""
    ranks = {}
    vals = list(values.values())
    for name, v in values.items():
        greater = sum(1 for w in vals if w > v)
        equal = sum(1 for w in vals if w == v)
        ranks[name] = greater + (equal + 1) / 2.0
    return ranks


def run_benchmark(tasks: list, methods: list, dims: list, seeds: list,
                  gamma: float = 0.1, pretrain_epochs: int = 1000,
                  finetune_epochs: int = 1000, batch_cap: int = 256,
                  jobs: int = 1, out_root=None) -> dict:
    """The full grid, scored, aggregated, and rank-ordered.

    Any failed run leaves its cell missing and excludes that whole dataset
    from the rank aggregation, with a warning in the report.
    """
    for method in methods:
        if method not in METHODS:
            raise ValueError(f"unknown method {method!r}")
    if len(methods) < 2:
        raise ValueError("ranking needs at least 2 methods")
    if len(set(t.name for t in tasks)) != len(tasks):
        raise ValueError("dataset names must be unique")
    dims = [int(d) for d in dims]
    if any(d < 1 for d in dims):
        raise ValueError("dims must be positive")

    payloads = []
    for task in tasks:
        for method in methods:
            job_dims = [None] if method in X_SPACE_METHODS else dims
            for dim in job_dims:
                for seed in seeds:
                    out_dir = None
                    if out_root is not None:
                        out_dir = run_dir(out_root, task.name, method, dim, seed)
                    payloads.append({
                        "name": task.name, "x": task.x, "y": task.y, "k": task.k,
                        "method": method, "dim": dim, "seed": seed,
                        "gamma": gamma, "pretrain_epochs": pretrain_epochs,
                        "finetune_epochs": finetune_epochs,
                        "batch_cap": batch_cap, "out_dir": out_dir,
                    })

    if jobs <= 1:
        outcomes = [_run_job(p) for p in payloads]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_run_job, payloads))
    results = dict(outcomes)

    dataset_names = [t.name for t in tasks]
    warnings = []
    rows = []
    failed_datasets = set()
    for name in dataset_names:
        for method in methods:
            for dim in dims:
                for seed in seeds:
                    lookup_dim = None if method in X_SPACE_METHODS else dim
                    cell = results[(name, method, lookup_dim, seed)]
                    row = {"dataset": name, "method": method, "dim": dim,
                           "seed": seed}
                    row.update(cell)
                    rows.append(row)
                    if cell["status"] != "ok":
                        failed_datasets.add(name)
    for name in sorted(failed_datasets):
        warnings.append(f"dataset {name!r} excluded from ranking: failed run(s)")

    # mean score per (dataset, method, dim) across seeds, then best dim by acc
    best = {}
    for name in dataset_names:
        best[name] = {}
        for method in methods:
            per_dim = {}
            for dim in dims:
                lookup_dim = None if method in X_SPACE_METHODS else dim
                cells = [results[(name, method, lookup_dim, s)] for s in seeds]
                if all(c["status"] == "ok" for c in cells):
                    per_dim[dim] = {
                        "acc": float(np.mean([c["acc"] for c in cells])),
                        "ari": float(np.mean([c["ari"] for c in cells])),
                        "nmi": float(np.mean([c["nmi"] for c in cells])),
                    }
            if per_dim:
                top = max(per_dim, key=lambda d: (per_dim[d]["acc"], -d))
                best[name][method] = {"dim": top, **per_dim[top]}

    ranked = [n for n in dataset_names if n not in failed_datasets]
    ranks = {}
    for name in ranked:
        scores = {method: best[name][method]["acc"] for method in methods}
        ranks[name] = average_rank_of(scores)
    average_ranks = {}
    for method in methods:
        if ranked:
            per_dataset = [ranks[name][method] for name in ranked]
            average_ranks[method] = {
                "mean": float(np.mean(per_dataset)),
                "std": float(np.std(per_dataset)),
            }
        else:
            average_ranks[method] = {"mean": None, "std": None}
    if not ranked:
        warnings.append("no dataset completed every run; ranks unavailable")

    return {
        "datasets": dataset_names,
        "methods": list(methods),
        "dims": dims,
        "seeds": list(seeds),
        "gamma": gamma,
        "rows": rows,
        "best_dim": best,
        "ranks": ranks,
        "average_ranks": average_ranks,
        "warnings": warnings,
    }


def write_report_json(report: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_report_csv(report: dict, path) -> None:
    """Score table, one row per (dataset, method, dim, seed).

    Runtimes are deliberately left out so the table is byte-identical across
    reruns and worker counts.
    """
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dataset", "method", "dim", "seed", "acc", "ari",
                         "nmi", "status"])
        for row in report["rows"]:
            if row["status"] == "ok":
                scores = [repr(round(row[m], 6)) for m in ("acc", "ari", "nmi")]
            else:
                scores = ["", "", ""]
            writer.writerow([row["dataset"], row["method"], row["dim"],
                             row["seed"]] + scores + [row["status"]])


def write_summary_csv(report: dict, path) -> None:
    """Aggregate table: best-dim accuracy per dataset and average rank per method."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "avg_rank", "rank_std"] +
                        [f"acc_{name}" for name in report["datasets"]])
        for method in report["methods"]:
            avg = report["average_ranks"][method]
            cells = []
            for name in report["datasets"]:
                entry = report["best_dim"].get(name, {}).get(method)
                cells.append("" if entry is None else repr(round(entry["acc"], 6)))
            writer.writerow([
                method,
                "" if avg["mean"] is None else repr(round(avg["mean"], 6)),
                "" if avg["std"] is None else repr(round(avg["std"], 6)),
            ] + cells)
