"""k-means clustering and label-agreement metrics (ACC, NMI, ARI)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .data import MultiViewDataset
from .model import SemVibModel, view_embeddings


@dataclass(frozen=True)
class ClusterReport:
    """Mean metrics of repeated k-means on one representation."""

    labels: np.ndarray  # assignment of the best-inertia run
    acc: float
    nmi: float
    ari: float
    inertia: float
    n_runs: int


def _squared_distances(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    d2 = (
        (points * points).sum(axis=1)[:, None]
        - 2.0 * points @ centers.T
        + (centers * centers).sum(axis=1)[None, :]
    )
    return np.maximum(d2, 0.0)


def _kmeans_pp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    closest = _squared_distances(points, centers[:1]).ravel()
    for j in range(1, k):
        total = closest.sum()
        if total <= 0:
            centers[j] = points[rng.integers(n)]
        else:
            r = rng.random() * total
            idx = int(np.searchsorted(np.cumsum(closest), r))
            centers[j] = points[min(idx, n - 1)]
        closest = np.minimum(closest, _squared_distances(points, centers[j : j + 1]).ravel())
    return centers


def kmeans(
    points: np.ndarray,
    k: int,
    restarts: int = 10,
    max_iters: int = 300,
    tol: float = 1e-4,
    seed=0,
) -> tuple[np.ndarray, float]:
    """Best-inertia Lloyd clustering over k-means++ restarts.

    Empty clusters are re-seeded to the point farthest from its center.
    Returns (labels, inertia).
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if k < 1 or n < k:
        raise ValueError(f"need 1 <= K <= N, got K={k}, N={n}")
    rng = np.random.default_rng(seed)
    best_labels, best_inertia = None, np.inf
    for _ in range(restarts):
        centers = _kmeans_pp_init(points, k, rng)
        labels = np.zeros(n, dtype=np.int64)
        for _ in range(max_iters):
            d2 = _squared_distances(points, centers)
            labels = d2.argmin(axis=1)
            new_centers = centers.copy()
            for j in range(k):
                mask = labels == j
                if mask.any():
                    new_centers[j] = points[mask].mean(axis=0)
                else:
                    farthest = d2[np.arange(n), labels].argmax()
                    new_centers[j] = points[farthest]
                    labels[farthest] = j
            shift = np.linalg.norm(new_centers - centers, axis=1).max()
            centers = new_centers
            if shift < tol:
                break
        d2 = _squared_distances(points, centers)
        labels = d2.argmin(axis=1)
        inertia = float(d2[np.arange(n), labels].sum())
        if inertia < best_inertia:
            best_inertia, best_labels = inertia, labels
    return best_labels, best_inertia


def _contingency(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("label vectors must be 1-D and of equal length")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    ka, kb = ai.max() + 1, bi.max() + 1
    table = np.zeros((ka, kb), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)
    return table


def clustering_accuracy(true_labels, pred_labels) -> float:
    """Matched fraction under the optimal cluster-to-class assignment."""
    table = _contingency(true_labels, pred_labels)
    rows, cols = linear_sum_assignment(table, maximize=True)
    return float(table[rows, cols].sum() / np.asarray(true_labels).size)


def _entropy(counts: np.ndarray, n: int) -> float:
    p = counts[counts > 0] / n
    return float(-(p * np.log(p)).sum())


def nmi(true_labels, pred_labels) -> float:
    """Mutual information normalized by the mean of the two entropies."""
    table = _contingency(true_labels, pred_labels)
    n = int(table.sum())
    hu = _entropy(table.sum(axis=1), n)
    hv = _entropy(table.sum(axis=0), n)
    if hu == 0.0 and hv == 0.0:
        return 1.0  # both single-cluster partitions are identical
    pu = table.sum(axis=1) / n
    pv = table.sum(axis=0) / n
    mi = 0.0
    for i, j in zip(*np.nonzero(table)):
        pij = table[i, j] / n
        mi += pij * np.log(pij / (pu[i] * pv[j]))
    mi = max(mi, 0.0)
    return float(2.0 * mi / (hu + hv))


def ari(true_labels, pred_labels) -> float:
    """Pair-counting partition agreement adjusted for chance."""
    table = _contingency(true_labels, pred_labels)
    n = int(table.sum())

    def comb2(x):
        return x * (x - 1) / 2.0

    index = comb2(table).sum()
    sum_rows = comb2(table.sum(axis=1)).sum()
    sum_cols = comb2(table.sum(axis=0)).sum()
    total = comb2(n)
    expected = sum_rows * sum_cols / total if total > 0 else 0.0
    max_index = 0.5 * (sum_rows + sum_cols)
    if max_index == expected:
        return 1.0  # degenerate agreement (e.g. both singleton partitions)
    return float((index - expected) / (max_index - expected))


def evaluate_representation(
    points: np.ndarray,
    true_labels: np.ndarray,
    k: int,
    runs: int = 10,
    seed=0,
    restarts: int = 10,
) -> ClusterReport:
    """Mean of metrics over ``runs`` k-means executions with derived seeds."""
    children = np.random.SeedSequence(seed).spawn(runs)
    accs, nmis, aris, inertias = [], [], [], []
    best_labels, best_inertia = None, np.inf
    for child in children:
        labels, inertia = kmeans(points, k, restarts=restarts, seed=child)
        accs.append(clustering_accuracy(true_labels, labels))
        nmis.append(nmi(true_labels, labels))
        aris.append(ari(true_labels, labels))
        inertias.append(inertia)
        if inertia < best_inertia:
            best_inertia, best_labels = inertia, labels
    return ClusterReport(
        labels=best_labels,
        acc=float(np.mean(accs)),
        nmi=float(np.mean(nmis)),
        ari=float(np.mean(aris)),
        inertia=float(np.mean(inertias)),
        n_runs=runs,
    )


def ablation_eval(
    model: SemVibModel,
    ds: MultiViewDataset,
    k: int | None = None,
    runs: int = 10,
    seed: int = 0,
) -> dict[str, ClusterReport]:
    """Cluster raw views, per-view posterior means, and the consistent matrix.

    Keys: ``X^(m)``, ``Z^(m)`` for each view m (1-based), and ``Z``.
    """
    if ds.labels is None:
        raise ValueError("ablation evaluation requires ground-truth labels")
    if k is None:
        k = ds.n_clusters
    reports: dict[str, ClusterReport] = {}
    for m in range(ds.n_views):
        reports[f"X^({m + 1})"] = evaluate_representation(
            ds.views[m], ds.labels, k, runs=runs, seed=seed
        )
    for m in range(ds.n_views):
        emb = view_embeddings(model, ds.views, m)
        reports[f"Z^({m + 1})"] = evaluate_representation(emb, ds.labels, k, runs=runs, seed=seed)
    reports["Z"] = evaluate_representation(model.Z.data, ds.labels, k, runs=runs, seed=seed)
    return reports
