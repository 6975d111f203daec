"""Clustering algorithms driven by a precomputed distance matrix.

Five algorithms are provided: k-medoids, agglomerative (complete, average or
single linkage), spectral, DBSCAN and OPTICS.  The first three consume a
cluster count k; the density-based two discover it and may label objects as
noise.  Ties are broken by lowest index throughout so repeated runs are
bitwise reproducible.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import sklearn.cluster

from .core import (
    NOISE_LABEL,
    AlgorithmSpec,
    ClusterAssignment,
    ClusteringSetup,
    TrajectoryDataset,
)
from .distance import DistanceMatrix

MatrixLike = Union[DistanceMatrix, np.ndarray]

_KMEDOIDS_MAX_ITER = 300
_OPTICS_XI = 0.05


def _values(m: MatrixLike) -> np.ndarray:
    v = m.values if isinstance(m, DistanceMatrix) else np.asarray(m, dtype=float)
    if v.ndim != 2 or v.shape[0] != v.shape[1]:
        raise ValueError("distance matrix must be square")
    return v


def _canonical_labels(labels: np.ndarray) -> np.ndarray:
    """Relabel clusters in order of first occurrence; noise stays NOISE_LABEL."""
    out = np.full(len(labels), NOISE_LABEL, dtype=int)
    mapping: dict[int, int] = {}
    for i, lab in enumerate(labels):
        if lab == NOISE_LABEL:
            continue
        if lab not in mapping:
            mapping[lab] = len(mapping)
        out[i] = mapping[lab]
    return out


def _check_k(k: int, n: int) -> None:
    if not 2 <= k <= n:
        raise ValueError(f"cluster count must be in [2, {n}], got {k}")


# ---------------------------------------------------------------------------
# k-medoids

def kmedoids(m: MatrixLike, k: int, seed: int = 0) -> ClusterAssignment:
    """Alternating k-medoids on the distance matrix.

    Medoids start as a seeded, distance-weighted sample (k-medoids++ style,
    without replacement); objects are assigned to the nearest medoid and each
    medoid moves to the member minimizing the total within-cluster distance,
    until a fixed point or the iteration cap.
    """
    for _, labels in kmedoids_states(m, k, seed):
        pass
    return ClusterAssignment.from_array(_canonical_labels(labels))


def _kmedoids_pp_init(values: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = values.shape[0]
    medoids = [int(rng.integers(n))]
    for _ in range(1, k):
        d2 = values[:, medoids].min(axis=1) ** 2
        d2[medoids] = 0.0
        total = d2.sum()
        if total == 0:  # every remaining object duplicates a medoid
            medoids.append(next(i for i in range(n) if i not in medoids))
        else:
            medoids.append(int(rng.choice(n, p=d2 / total)))
    return np.sort(np.array(medoids))


def kmedoids_states(m: MatrixLike, k: int, seed: int = 0):
    """Yield (medoids, labels) after every k-medoids iteration; the last yield
    is the fixed point (or the state at the iteration cap)."""
    values = _values(m)
    n = values.shape[0]
    _check_k(k, n)
    rng = np.random.default_rng(seed)
    medoids = _kmedoids_pp_init(values, k, rng)
    labels = _assign_to_medoids(values, medoids)
    yield medoids, labels
    for _ in range(_KMEDOIDS_MAX_ITER):
        new_medoids = medoids.copy()
        for c in range(k):
            members = np.flatnonzero(labels == c)
            if members.size == 0:  # unrepairable only when duplicates exhaust objects
                continue
            costs = values[np.ix_(members, members)].sum(axis=1)
            new_medoids[c] = members[int(np.argmin(costs))]
        new_medoids = np.sort(new_medoids)
        new_labels = _assign_to_medoids(values, new_medoids)
        if np.array_equal(new_medoids, medoids) and np.array_equal(new_labels, labels):
            return
        medoids, labels = new_medoids, new_labels
        yield medoids, labels


def _assign_to_medoids(values: np.ndarray, medoids: np.ndarray) -> np.ndarray:
    # argmin takes the first minimum, i.e. the lowest medoid index on ties
    labels = np.argmin(values[:, medoids], axis=1)
    # a medoid can end up memberless when equal distances tie toward a lower
    # medoid index; repair by moving in the farthest-from-its-medoid object,
    # never stealing the last member of another cluster
    k = len(medoids)
    for _ in range(k):
        sizes = np.bincount(labels, minlength=k)
        empty = np.flatnonzero(sizes == 0)
        if empty.size == 0:
            break
        eligible = sizes[labels] > 1
        if not eligible.any():
            break
        dist_to_own = values[np.arange(len(labels)), medoids[labels]]
        far = int(np.argmax(np.where(eligible, dist_to_own, -np.inf)))
        labels[far] = empty[0]
    return labels


def kmedoids_cost(m: MatrixLike, labels: Sequence[int]) -> float:
    """Sum of distances from each object to its cluster's best medoid."""
    values = _values(m)
    arr = np.asarray(labels)
    total = 0.0
    for c in np.unique(arr):
        members = np.flatnonzero(arr == c)
        total += values[np.ix_(members, members)].sum(axis=1).min()
    return float(total)


# ---------------------------------------------------------------------------
# agglomerative

def agglomerative(m: MatrixLike, k: int, linkage: str) -> ClusterAssignment:
    """Bottom-up merging under the named linkage, cut at k clusters.

    The closest active pair merges first; equal distances resolve to the
    lexicographically smallest index pair.
    """
    if linkage not in ("complete", "average", "single"):
        raise ValueError(f"unknown linkage: {linkage!r}")
    values = _values(m)
    n = values.shape[0]
    _check_k(k, n)

    work = values.astype(float).copy()
    np.fill_diagonal(work, np.inf)
    size = np.ones(n)
    members: list[list[int]] = [[i] for i in range(n)]
    active = np.ones(n, dtype=bool)

    for _ in range(n - k):
        # row-major argmin over the symmetric matrix picks the smallest
        # (i, j) pair with i < j on ties
        flat = int(np.argmin(work))
        i, j = divmod(flat, n)
        if i > j:
            i, j = j, i
        if linkage == "single":
            merged = np.minimum(work[i], work[j])
        elif linkage == "complete":
            merged = np.maximum(work[i], work[j])
        else:
            merged = (size[i] * work[i] + size[j] * work[j]) / (size[i] + size[j])
        merged[i] = np.inf
        merged[j] = np.inf
        work[i, :] = merged
        work[:, i] = merged
        work[j, :] = np.inf
        work[:, j] = np.inf
        size[i] += size[j]
        members[i].extend(members[j])
        members[j] = []
        active[j] = False

    labels = np.empty(n, dtype=int)
    for rank, c in enumerate(np.flatnonzero(active)):
        labels[members[c]] = rank
    return ClusterAssignment.from_array(labels)


# ---------------------------------------------------------------------------
# spectral

def spectral(m: MatrixLike, k: int, seed: int = 0) -> ClusterAssignment:
    """Normalized-cut spectral clustering of the distance matrix.

    Distances convert to affinities with a Gaussian kernel whose bandwidth is
    the median off-diagonal distance; the embedding uses the k leading
    eigenvectors of the normalized affinity, row-normalized, clustered by a
    seeded k-means.
    """
    values = _values(m)
    n = values.shape[0]
    _check_k(k, n)
    off_diag = values[~np.eye(n, dtype=bool)]
    sigma = float(np.median(off_diag)) if n > 1 else 0.0
    if sigma == 0.0:
        raise ValueError("degenerate affinity: all pairwise distances are zero")
    affinity = np.exp(-(values**2) / (2.0 * sigma**2))

    inv_sqrt_deg = 1.0 / np.sqrt(affinity.sum(axis=1))
    sym = affinity * inv_sqrt_deg[:, None] * inv_sqrt_deg[None, :]
    # the k smallest eigenvalues of I - sym are the k largest of sym
    _, vecs = np.linalg.eigh(sym)
    embedding = vecs[:, -k:]
    norms = np.linalg.norm(embedding, axis=1)
    norms[norms == 0] = 1.0
    embedding = embedding / norms[:, None]

    labels = _kmeans(embedding, k, np.random.default_rng(seed))
    return ClusterAssignment.from_array(_canonical_labels(labels))


def _kmeans(points: np.ndarray, k: int, rng: np.random.Generator,
            n_init: int = 10, max_iter: int = 300) -> np.ndarray:
    n = points.shape[0]
    best_labels = None
    best_inertia = np.inf
    for _ in range(n_init):
        centers = _kmeans_pp(points, k, rng)
        labels = np.zeros(n, dtype=int)
        for _ in range(max_iter):
            d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
            new_labels = d2.argmin(axis=1)
            for c in range(k):
                if not (new_labels == c).any():
                    far = int(d2[np.arange(n), new_labels].argmax())
                    new_labels[far] = c
            if np.array_equal(new_labels, labels):
                break
            labels = new_labels
            centers = np.vstack([points[labels == c].mean(axis=0) for c in range(k)])
        inertia = float(((points - centers[labels]) ** 2).sum())
        if inertia < best_inertia:
            best_inertia = inertia
            best_labels = labels
    return best_labels


def _kmeans_pp(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centers = [points[int(rng.integers(n))]]
    for _ in range(1, k):
        d2 = np.min(
            ((points[:, None, :] - np.array(centers)[None, :, :]) ** 2).sum(axis=2), axis=1
        )
        total = d2.sum()
        if total == 0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers.append(points[idx])
    return np.array(centers)


# ---------------------------------------------------------------------------
# density-based

def dbscan(m: MatrixLike, radius: float, min_samples: int) -> ClusterAssignment:
    """Core/border/noise labeling with matrix-lookup neighborhoods.

    A neighborhood is every object within ``radius`` (non-strict, counting the
    object itself); clusters are numbered in first-touch order and border
    objects join the first cluster that reaches them.
    """
    if radius < 0:
        raise ValueError("radius must be non-negative")
    if min_samples < 1:
        raise ValueError("min_samples must be at least 1")
    values = _values(m)
    n = values.shape[0]
    within = values <= radius
    core = within.sum(axis=1) >= min_samples

    labels = np.full(n, NOISE_LABEL, dtype=int)
    cluster_id = 0
    for start in range(n):
        if not core[start] or labels[start] != NOISE_LABEL:
            continue
        labels[start] = cluster_id
        queue = [start]
        head = 0
        while head < len(queue):
            p = queue[head]
            head += 1
            for q in np.flatnonzero(within[p]):
                if labels[q] == NOISE_LABEL:
                    labels[q] = cluster_id
                    if core[q]:
                        queue.append(int(q))
        cluster_id += 1
    return ClusterAssignment.from_array(labels)


def optics(m: MatrixLike, min_samples: int) -> ClusterAssignment:
    """OPTICS ordering with unbounded reachability radius, clusters extracted
    by the xi-steepness method (xi = 0.05).  Delegates to scikit-learn."""
    if min_samples < 1:
        raise ValueError("min_samples must be at least 1")
    values = _values(m)
    n = values.shape[0]
    if min_samples > n:
        return ClusterAssignment.from_array(np.full(n, NOISE_LABEL, dtype=int))
    if min_samples < 2:
        raise ValueError("optics requires min_samples >= 2")
    model = sklearn.cluster.OPTICS(
        metric="precomputed",
        min_samples=min_samples,
        max_eps=np.inf,
        cluster_method="xi",
        xi=_OPTICS_XI,
    )
    model.fit(values)
    return ClusterAssignment.from_array(_canonical_labels(model.labels_))


# ---------------------------------------------------------------------------
# dispatch

def cluster_precomputed(
    values: MatrixLike, algo: AlgorithmSpec, k: Optional[int] = None
) -> ClusterAssignment:
    """Run the algorithm described by ``algo`` on a precomputed matrix."""
    if algo.requires_k:
        if k is None:
            raise ValueError(f"{algo.kind} requires a cluster count")
    elif k is not None:
        raise ValueError(f"{algo.kind} does not take a cluster count")
    if algo.kind == "kmedoids":
        return kmedoids(values, k, seed=algo.seed)
    if algo.kind == "agglomerative":
        return agglomerative(values, k, linkage=algo.linkage)
    if algo.kind == "spectral":
        return spectral(values, k, seed=algo.seed)
    if algo.kind == "dbscan":
        return dbscan(values, radius=algo.radius, min_samples=algo.min_samples)
    if algo.kind == "optics":
        return optics(values, min_samples=algo.min_samples)
    raise ValueError(f"unknown algorithm kind: {algo.kind!r}")


def run_setup(
    ds: TrajectoryDataset, matrix: DistanceMatrix, setup: ClusteringSetup
) -> ClusterAssignment:
    """Cluster the dataset with one setup, checking matrix/dataset agreement."""
    if matrix.fingerprint != ds.fingerprint():
        raise ValueError("distance matrix does not belong to this dataset (fingerprint mismatch)")
    if matrix.spec != setup.distance:
        raise ValueError(
            f"matrix holds {matrix.spec.key()} distances, setup wants {setup.distance.key()}"
        )
    return cluster_precomputed(matrix, setup.algorithm, setup.cluster_count)


def write_assignment_csv(
    ids: Sequence[str], assignment: ClusterAssignment, path: Union[str, Path]
) -> None:
    """Serialize labels as ``track_id,label`` rows; noise is written as -1."""
    if len(ids) != len(assignment):
        raise ValueError("ids and labels differ in length")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["track_id", "label"])
        for tid, lab in zip(ids, assignment.labels):
            writer.writerow([tid, lab])
