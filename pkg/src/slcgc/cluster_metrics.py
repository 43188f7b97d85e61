"""K-means on fused embeddings and the six clustering evaluation indices.

Unsupervised labels are scored against ground truth through an optimal
injective cluster-to-class assignment (Hungarian matching) by default; a
per-cluster majority mapping is available as an alternative. All indices
exclude pixels whose ground-truth label is 0 and pixels carrying the
cluster-map sentinel.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.optimize

from .hsi_io import SENTINEL, ClusterMap, GroundTruth


@dataclass
class KmeansResult:
    labels: np.ndarray  # (n,) cluster ids in [0, m)
    centroids: np.ndarray  # (m, d)
    inertia: float


def _kmeanspp_centers(z: np.ndarray, m: int, rng: np.random.Generator) -> np.ndarray:
    n = z.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = ((z - z[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, m):
        total = d2.sum()
        if total > 0:
            probs = d2 / total
            idx = int(rng.choice(n, p=probs))
        else:
            # All remaining distances are zero (duplicate points); pick an
            # unchosen index deterministically via the generator.
            candidates = np.setdiff1d(np.arange(n), np.array(chosen))
            idx = int(candidates[rng.integers(candidates.size)])
        chosen.append(idx)
        d2 = np.minimum(d2, ((z - z[idx]) ** 2).sum(axis=1))
    return z[chosen].copy()


def _repair_empty(labels: np.ndarray, point_d2: np.ndarray, m: int) -> None:
    # Give every empty cluster the point farthest from its current centroid,
    # taking donors only from clusters that keep at least one member.
    counts = np.bincount(labels, minlength=m)
    eligible = point_d2.copy()
    for empty in np.flatnonzero(counts == 0):
        eligible[counts[labels] <= 1] = -np.inf
        thief = int(np.argmax(eligible))
        counts[labels[thief]] -= 1
        labels[thief] = empty
        counts[empty] += 1
        eligible[thief] = -np.inf


def _lloyd(z: np.ndarray, centers: np.ndarray, iters: int):
    n, _ = z.shape
    m = centers.shape[0]
    labels = np.full(n, -1, dtype=np.int64)
    for _ in range(iters):
        d2 = ((z[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_labels = np.argmin(d2, axis=1)  # ties -> lowest cluster index
        _repair_empty(new_labels, d2[np.arange(n), new_labels], m)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for c in range(m):
            centers[c] = z[labels == c].mean(axis=0)
    inertia = float(((z - centers[labels]) ** 2).sum())
    return labels, centers, inertia


def kmeans(z: np.ndarray, m: int, restarts: int = 10, iters: int = 300,
           seed: int = 0) -> KmeansResult:
    """Best-of-``restarts`` k-means with k-means++ seeding.

    Deterministic for a fixed seed: restart r uses the generator seeded
    with (seed, r) and ties in inertia keep the earlier restart.
    """
    z = np.asarray(z, dtype=np.float64)
    n = z.shape[0]
    if m > n:
        raise ValueError(f"m={m} exceeds point count {n}")
    if m < 1 or restarts < 1:
        raise ValueError("m and restarts must be >= 1")
    best = None
    for r in range(restarts):
        rng = np.random.default_rng((seed, r))
        centers = _kmeanspp_centers(z, m, rng)
        labels, centers, inertia = _lloyd(z, centers, iters)
        if best is None or inertia < best.inertia:
            best = KmeansResult(labels=labels, centroids=centers, inertia=inertia)
    return best


def hungarian_map(confusion: np.ndarray) -> np.ndarray:
    """Injective cluster-to-class assignment maximizing the matched count.

    ``confusion`` is C x m (classes x clusters). Returns an array of length
    m with the assigned class index per cluster, -1 for clusters left
    unassigned when m > C.
    """
    confusion = np.asarray(confusion)
    n_classes, n_clusters = confusion.shape
    rows, cols = scipy.optimize.linear_sum_assignment(confusion, maximize=True)
    mapping = np.full(n_clusters, -1, dtype=np.int64)
    mapping[cols] = rows
    return mapping


def majority_map(confusion: np.ndarray) -> np.ndarray:
    """Non-injective mapping: each cluster takes its majority class."""
    return np.argmax(np.asarray(confusion), axis=0)


@dataclass
class MetricsReport:
    oa: float
    kappa: float
    nmi: float
    ari: float
    purity: float
    per_class_accuracy: np.ndarray  # (C,)
    confusion: np.ndarray  # (C, m) contingency over evaluated pixels
    mapping: np.ndarray  # (m,) class index per cluster, -1 unassigned

    def to_dict(self) -> dict:
        return {
            "oa": self.oa,
            "kappa": self.kappa,
            "nmi": self.nmi,
            "ari": self.ari,
            "purity": self.purity,
            "per_class_accuracy": [float(v) for v in self.per_class_accuracy],
            "confusion": self.confusion.astype(int).tolist(),
            "mapping": self.mapping.astype(int).tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def _entropy(counts: np.ndarray, n: int) -> float:
    p = counts[counts > 0] / n
    return float(-(p * np.log(p)).sum())


def _mutual_information(confusion: np.ndarray, n: int) -> float:
    a = confusion.sum(axis=1)
    b = confusion.sum(axis=0)
    mi = 0.0
    rows, cols = np.nonzero(confusion)
    for i, j in zip(rows, cols):
        nij = confusion[i, j]
        mi += (nij / n) * np.log(n * nij / (a[i] * b[j]))
    return mi


def _nmi(confusion: np.ndarray, n: int, norm: str) -> float:
    hu = _entropy(confusion.sum(axis=1), n)
    hv = _entropy(confusion.sum(axis=0), n)
    if norm == "arithmetic":
        denom = 0.5 * (hu + hv)
    elif norm == "geometric":
        denom = np.sqrt(hu * hv)
    elif norm == "min":
        denom = min(hu, hv)
    elif norm == "max":
        denom = max(hu, hv)
    else:
        raise ValueError(f"unknown NMI normalization '{norm}'")
    if denom == 0.0:
        # Both partitions trivial, hence identical.
        return 1.0
    return float(np.clip(_mutual_information(confusion, n) / denom, 0.0, 1.0))


def _comb2(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return x * (x - 1.0) / 2.0


def _ari(confusion: np.ndarray, n: int) -> float:
    total_pairs = n * (n - 1) / 2.0
    if total_pairs == 0:
        return 1.0
    index = _comb2(confusion).sum()
    sum_a = _comb2(confusion.sum(axis=1)).sum()
    sum_b = _comb2(confusion.sum(axis=0)).sum()
    expected = sum_a * sum_b / total_pairs
    max_index = 0.5 * (sum_a + sum_b)
    denom = max_index - expected
    if denom == 0.0:
        return 1.0
    return float((index - expected) / denom)


def compute_metrics(pred: ClusterMap, gt: GroundTruth,
                    mapping_mode: str = "hungarian",
                    nmi_norm: str = "arithmetic") -> MetricsReport:
    """Score a cluster map against ground truth on labeled pixels only."""
    if (pred.height, pred.width) != (gt.height, gt.width):
        raise ValueError(
            f"prediction is {pred.height}x{pred.width}, "
            f"ground truth is {gt.height}x{gt.width}"
        )
    mask = (gt.labels > 0) & (pred.labels != SENTINEL)
    if not mask.any():
        raise ValueError("no labeled pixels to evaluate")
    y = gt.labels[mask] - 1  # class index 0..C-1
    p = pred.labels[mask]
    n = int(mask.sum())
    n_classes = gt.num_classes
    n_clusters = int(p.max()) + 1
    confusion = np.bincount(
        y * n_clusters + p, minlength=n_classes * n_clusters
    ).reshape(n_classes, n_clusters)

    if mapping_mode == "hungarian":
        mapping = hungarian_map(confusion)
    elif mapping_mode == "majority":
        mapping = majority_map(confusion)
    else:
        raise ValueError(f"unknown mapping mode '{mapping_mode}'")

    matched_per_class = np.zeros(n_classes)
    mapped_count = np.zeros(n_classes)
    cluster_sizes = confusion.sum(axis=0)
    for k in range(n_clusters):
        c = mapping[k]
        if c >= 0:
            matched_per_class[c] += confusion[c, k]
            mapped_count[c] += cluster_sizes[k]
    class_sizes = confusion.sum(axis=1)
    oa = float(matched_per_class.sum() / n)
    with np.errstate(invalid="ignore", divide="ignore"):
        pa = np.where(class_sizes > 0, matched_per_class / np.maximum(class_sizes, 1), 0.0)

    p_e = float((class_sizes / n) @ (mapped_count / n))
    if p_e == 1.0:
        kappa = 1.0 if oa == 1.0 else 0.0
    else:
        kappa = float((oa - p_e) / (1.0 - p_e))

    return MetricsReport(
        oa=oa,
        kappa=kappa,
        nmi=_nmi(confusion, n, nmi_norm),
        ari=_ari(confusion, n),
        purity=float(confusion.max(axis=0).sum() / n),
        per_class_accuracy=pa,
        confusion=confusion,
        mapping=mapping,
    )
