"""Reference clusters from trajectory origins and destinations.

Origins and destinations are clustered separately as 2-D point sets; each
trajectory gets the compound label (origin cluster, destination cluster) and
the label pairs holding at least a configurable share of all trajectories are
retained as the reference set for supervised evaluation.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .cluster import cluster_precomputed
from .core import AlgorithmSpec, TrajectoryDataset, destination, origin
from .distance import _pointwise_dist

logger = logging.getLogger(__name__)

#: Share of the dataset an origin-destination pair must reach to be retained.
DEFAULT_MIN_SHARE = 0.01

#: Default elbow sweep range (half-open).
DEFAULT_K_MIN = 2
DEFAULT_K_MAX = 16

DEFAULT_ENDPOINT_ALGORITHM = AlgorithmSpec(kind="agglomerative", linkage="average")

_DETERMINISTIC_KINDS = frozenset({"agglomerative", "dbscan", "optics"})


@dataclass(frozen=True)
class ElbowCurve:
    """Mean within-cluster average distance per candidate k, with replication spread."""

    ks: tuple[int, ...]
    means: tuple[float, ...]
    stds: tuple[float, ...]

    def __post_init__(self):
        if not (len(self.ks) == len(self.means) == len(self.stds)):
            raise ValueError("curve fields must be equally long")


@dataclass(frozen=True)
class ReferenceEntry:
    trajectory_id: str
    origin_cluster: int
    destination_cluster: int
    od_label: int
    retained: bool


@dataclass(frozen=True)
class ReferenceClusters:
    """Per-trajectory origin-destination labels plus the retained subset."""

    entries: tuple[ReferenceEntry, ...]
    k_origin: int
    k_destination: int
    min_share: float

    @property
    def retained_ids(self) -> tuple[str, ...]:
        return tuple(e.trajectory_id for e in self.entries if e.retained)

    @property
    def n_reference_clusters(self) -> int:
        return len({e.od_label for e in self.entries if e.retained})

    def labels_for(self, ids: Sequence[str]) -> np.ndarray:
        """Retained od labels aligned with ``ids``; raises on non-retained ids."""
        by_id = {e.trajectory_id: e for e in self.entries}
        out = []
        for tid in ids:
            e = by_id.get(tid)
            if e is None or not e.retained:
                raise KeyError(f"trajectory {tid!r} is not in the retained reference set")
            out.append(e.od_label)
        return np.array(out, dtype=int)


def _euclidean_matrix(points: np.ndarray) -> np.ndarray:
    return _pointwise_dist(points, points)


def _cluster_points(points: np.ndarray, algo: AlgorithmSpec, k: int) -> np.ndarray:
    if not algo.requires_k:
        raise ValueError("endpoint clustering needs a k-consuming algorithm")
    assignment = cluster_precomputed(_euclidean_matrix(points), algo, k)
    return assignment.as_array


def _canonical_by_centroid(points: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Renumber clusters by ascending centroid (x, then y) so labels do not
    depend on the input ordering."""
    ks = np.unique(labels)
    centroids = [(points[labels == c].mean(axis=0), c) for c in ks]
    order = sorted(centroids, key=lambda item: (item[0][0], item[0][1]))
    remap = {old: new for new, (_, old) in enumerate(order)}
    return np.array([remap[c] for c in labels], dtype=int)


def _mean_centroid_distance(points: np.ndarray, labels: np.ndarray) -> float:
    """Average distance of each point to its own cluster centroid."""
    total = 0.0
    for c in np.unique(labels):
        member = points[labels == c]
        centroid = member.mean(axis=0)
        total += np.linalg.norm(member - centroid, axis=1).sum()
    return total / len(points)


def endpoint_elbow(
    points: np.ndarray,
    k_min: int = DEFAULT_K_MIN,
    k_max: int = DEFAULT_K_MAX,
    algo: AlgorithmSpec = DEFAULT_ENDPOINT_ALGORITHM,
    replications: int = 10,
) -> ElbowCurve:
    """Sweep k over [k_min, k_max) and record the within-cluster average distance.

    Stochastic algorithms are replicated on permuted inputs with derived
    seeds to populate the spread; deterministic ones run once and report a
    zero standard deviation.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[1] != 2:
        raise ValueError("points must be an (n, 2) array")
    n = len(points)
    if k_max - 1 > n:  # half-open sweep: the largest k tried is k_max - 1
        raise ValueError(f"elbow sweep reaches k={k_max - 1} but only {n} points exist")
    if k_min < 1 or k_min >= k_max:
        raise ValueError("need 1 <= k_min < k_max")

    deterministic = algo.kind in _DETERMINISTIC_KINDS
    ks, means, stds = [], [], []
    for k in range(k_min, k_max):
        if deterministic:
            vals = [_mean_centroid_distance(points, _cluster_points(points, algo, k))]
        else:
            vals = []
            for rep in range(replications):
                rng = np.random.default_rng(np.random.SeedSequence([algo.seed, k, rep]))
                perm = rng.permutation(n)
                seeded = AlgorithmSpec(
                    kind=algo.kind,
                    linkage=algo.linkage,
                    min_samples=algo.min_samples,
                    radius=algo.radius,
                    seed=int(rng.integers(2**31)),
                )
                labels_perm = _cluster_points(points[perm], seeded, k)
                vals.append(_mean_centroid_distance(points[perm], labels_perm))
        ks.append(k)
        means.append(float(np.mean(vals)))
        stds.append(float(np.std(vals)) if len(vals) > 1 else 0.0)
    return ElbowCurve(tuple(ks), tuple(means), tuple(stds))


def pick_elbow(curve: ElbowCurve, override: Optional[int] = None) -> int:
    """The k right after the sharpest drop: the interior k maximizing the
    second difference of the curve.  A manual override always wins."""
    if override is not None:
        return int(override)
    if len(curve.ks) < 3:
        raise ValueError("elbow detection needs at least 3 curve points")
    d = curve.means
    best_k, best_val = None, -np.inf
    for i in range(1, len(d) - 1):
        second = d[i - 1] - 2 * d[i] + d[i + 1]
        if second > best_val:
            best_val = second
            best_k = curve.ks[i]
    return best_k


def build_reference(
    ds: TrajectoryDataset,
    k_origin: int,
    k_destination: int,
    algo: AlgorithmSpec = DEFAULT_ENDPOINT_ALGORITHM,
    min_share: float = DEFAULT_MIN_SHARE,
) -> ReferenceClusters:
    """Cluster origins into k_origin groups and destinations into k_destination
    groups, label each trajectory with the pair, and retain the pairs holding
    at least ``min_share`` of all trajectories."""
    if not 0 <= min_share < 1:
        raise ValueError("min_share must be in [0, 1)")
    n = len(ds)
    if k_origin > n or k_destination > n:
        raise ValueError("endpoint cluster counts exceed the dataset size")

    origins = np.array([(p.x, p.y) for p in map(origin, ds.trajectories)])
    dests = np.array([(p.x, p.y) for p in map(destination, ds.trajectories)])
    o_labels = _canonical_by_centroid(origins, _cluster_points(origins, algo, k_origin))
    d_labels = _canonical_by_centroid(dests, _cluster_points(dests, algo, k_destination))

    od = o_labels * k_destination + d_labels
    counts = np.bincount(od, minlength=k_origin * k_destination)
    threshold = min_share * n
    retained_pairs = {pair for pair in np.flatnonzero(counts >= threshold)}
    dropped = int(np.flatnonzero((counts > 0) & (counts < threshold)).size)
    if dropped:
        logger.info(
            "dropped %d origin-destination pair(s) below %.1f%% of %d trajectories",
            dropped, 100 * min_share, n,
        )

    entries = tuple(
        ReferenceEntry(
            trajectory_id=t.id,
            origin_cluster=int(o_labels[i]),
            destination_cluster=int(d_labels[i]),
            od_label=int(od[i]),
            retained=bool(od[i] in retained_pairs),
        )
        for i, t in enumerate(ds.trajectories)
    )
    return ReferenceClusters(entries, k_origin, k_destination, min_share)


def write_reference_csv(ref: ReferenceClusters, path: Union[str, Path]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["track_id", "origin_cluster", "destination_cluster", "od_label", "retained"])
        for e in ref.entries:
            writer.writerow(
                [e.trajectory_id, e.origin_cluster, e.destination_cluster, e.od_label, int(e.retained)]
            )


def read_reference_csv(path: Union[str, Path]) -> ReferenceClusters:
    """Load a reference CSV written by :func:`write_reference_csv`."""
    entries = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            entries.append(
                ReferenceEntry(
                    trajectory_id=row["track_id"],
                    origin_cluster=int(row["origin_cluster"]),
                    destination_cluster=int(row["destination_cluster"]),
                    od_label=int(row["od_label"]),
                    retained=bool(int(row["retained"])),
                )
            )
    k_o = max(e.origin_cluster for e in entries) + 1
    k_d = max(e.destination_cluster for e in entries) + 1
    return ReferenceClusters(tuple(entries), k_o, k_d, min_share=float("nan"))


def write_elbow_csv(curve: ElbowCurve, path: Union[str, Path]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "mean", "std"])
        for k, mean, std in zip(curve.ks, curve.means, curve.stds):
            writer.writerow([k, f"{mean:.17g}", f"{std:.17g}"])
