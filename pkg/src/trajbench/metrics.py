"""Clustering performance measures: silhouette plus six reference-based scores.

The reference-based measures (completeness, homogeneity, V, AMI, ARI, FMI)
are computed from the contingency table of reference versus predicted labels.
Entropies use the natural logarithm; every base cancels in the ratios used.

Conventions for degenerate inputs, applied consistently here and documented
per function: zero-entropy sides score 1 in homogeneity/completeness, V is 0
when both h and c are 0, ARI and AMI are 1 for identical trivial partitions,
and FMI is 1 when neither side has any co-clustered pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy.special import gammaln

from .core import NOISE_LABEL, ClusterAssignment
from .distance import DistanceMatrix
from .reference import ReferenceClusters

MatrixLike = Union[DistanceMatrix, np.ndarray]

#: Measure identifiers in canonical reporting order.
MEASURES = ("silhouette", "completeness", "homogeneity", "v_measure", "ami", "ari", "fmi")

#: Value range of each measure (inclusive).
MEASURE_RANGES = {
    "silhouette": (-1.0, 1.0),
    "completeness": (0.0, 1.0),
    "homogeneity": (0.0, 1.0),
    "v_measure": (0.0, 1.0),
    "ami": (-1.0, 1.0),
    "ari": (-1.0, 1.0),
    "fmi": (0.0, 1.0),
}


@dataclass(frozen=True)
class MeasureValue:
    measure: str
    value: float


@dataclass(frozen=True)
class ContingencyTable:
    """Counts of objects per (reference cluster, predicted cluster) pair."""

    counts: np.ndarray  # shape (n_ref_clusters, n_pred_clusters), int64

    @classmethod
    def from_labels(
        cls, ref_labels: Sequence[int], pred_labels: Sequence[int]
    ) -> "ContingencyTable":
        ref = np.asarray(ref_labels)
        pred = np.asarray(pred_labels)
        if ref.shape != pred.shape or ref.ndim != 1:
            raise ValueError("label vectors must be 1-D and equally long")
        _, ref_idx = np.unique(ref, return_inverse=True)
        _, pred_idx = np.unique(pred, return_inverse=True)
        counts = np.zeros((ref_idx.max() + 1, pred_idx.max() + 1), dtype=np.int64)
        np.add.at(counts, (ref_idx, pred_idx), 1)
        counts.setflags(write=False)
        return cls(counts)

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @property
    def row_sums(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def col_sums(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    def validate(self) -> None:
        if (self.counts < 0).any():
            raise ValueError("contingency counts must be non-negative")
        if self.n == 0:
            raise ValueError("contingency table is empty")


def entropy(labels: Sequence[int]) -> float:
    """Shannon entropy of the cluster-size distribution, natural log."""
    arr = np.asarray(labels)
    if arr.size == 0:
        raise ValueError("empty labeling")
    _, counts = np.unique(arr, return_counts=True)
    return _entropy_from_counts(counts, arr.size)


def _entropy_from_counts(counts: np.ndarray, n: int) -> float:
    p = counts[counts > 0] / n
    return float(-(p * np.log(p)).sum())


def _conditional_entropy(counts: np.ndarray, given_sums: np.ndarray) -> float:
    """H(rows | columns) when given_sums are column sums, and vice versa."""
    n = counts.sum()
    nz = counts > 0
    joint = counts[nz] / n
    denom = np.broadcast_to(given_sums, counts.shape)[nz]
    return float(-(joint * np.log(counts[nz] / denom)).sum())


def homogeneity_completeness_v(
    table: ContingencyTable, beta: float = 1.0
) -> tuple[float, float, float]:
    """Homogeneity, completeness and their beta-weighted harmonic mean V.

    A zero-entropy reference makes h = 1; a zero-entropy prediction makes
    c = 1; V = 0 when h and c are both 0.
    """
    table.validate()
    counts = table.counts
    n = table.n
    h_ref = _entropy_from_counts(table.row_sums, n)
    h_pred = _entropy_from_counts(table.col_sums, n)
    h_ref_given_pred = _conditional_entropy(counts, table.col_sums[None, :])
    h_pred_given_ref = _conditional_entropy(counts, table.row_sums[:, None])
    h = 1.0 if h_ref == 0 else 1.0 - h_ref_given_pred / h_ref
    c = 1.0 if h_pred == 0 else 1.0 - h_pred_given_ref / h_pred
    if beta * h + c == 0:
        v = 0.0
    else:
        v = (1.0 + beta) * h * c / (beta * h + c)
    return h, c, v


def mutual_information(table: ContingencyTable) -> float:
    """Mutual information between the two labelings, natural log."""
    counts = table.counts
    n = table.n
    nz = counts > 0
    joint = counts[nz] / n
    outer = np.outer(table.row_sums, table.col_sums)[nz] / (n * n)
    return float((joint * np.log(joint / outer)).sum())


def expected_mutual_information(row_sums: np.ndarray, col_sums: np.ndarray, n: int) -> float:
    """Expected MI under the fixed-marginals hypergeometric model."""
    lg = gammaln
    emi = 0.0
    for a in row_sums:
        a = int(a)
        for b in col_sums:
            b = int(b)
            lo = max(1, a + b - n)
            hi = min(a, b)
            for nij in range(lo, hi + 1):
                log_weight = (
                    lg(a + 1) + lg(b + 1) + lg(n - a + 1) + lg(n - b + 1)
                    - lg(n + 1) - lg(nij + 1) - lg(a - nij + 1) - lg(b - nij + 1)
                    - lg(n - a - b + nij + 1)
                )
                # log(n*nij) - log(a*b) cancels exactly when n*nij == a*b
                term = (nij / n) * (math.log(n * nij) - math.log(a * b))
                emi += math.exp(log_weight) * term
    return emi


def ami(table: ContingencyTable) -> float:
    """Adjusted mutual information with the arithmetic-mean normalizer.

    Identical trivial partitions (zero denominator with MI equal to its
    expectation) score 1.
    """
    table.validate()
    n = table.n
    mi = mutual_information(table)
    emi = expected_mutual_information(table.row_sums, table.col_sums, n)
    h_ref = _entropy_from_counts(table.row_sums, n)
    h_pred = _entropy_from_counts(table.col_sums, n)
    denom = 0.5 * (h_ref + h_pred) - emi
    if denom == 0:
        return 1.0 if mi == emi else 0.0
    return float((mi - emi) / denom)


def _pair_count(counts: np.ndarray) -> int:
    """Number of object pairs sharing a cell, in exact integer arithmetic."""
    return sum(int(c) * (int(c) - 1) // 2 for c in counts.ravel() if c > 1)


def ari(table: ContingencyTable) -> float:
    """Adjusted Rand index via pair counting with the hypergeometric expectation.

    Computed as a ratio of exact integers so the clean fractions (1, 0, -0.5)
    come out bit-exact; a zero denominator means both partitions are trivial
    and identical, scoring 1.
    """
    table.validate()
    n = table.n
    if n < 2:
        raise ValueError("ari requires at least 2 objects")
    together_both = _pair_count(table.counts)
    together_ref = _pair_count(table.row_sums)
    together_pred = _pair_count(table.col_sums)
    total_pairs = n * (n - 1) // 2
    num = 2 * (together_both * total_pairs - together_ref * together_pred)
    den = (together_ref + together_pred) * total_pairs - 2 * together_ref * together_pred
    if den == 0:
        return 1.0
    return num / den


def fmi(table: ContingencyTable) -> float:
    """Fowlkes-Mallows index: geometric mean of pair precision and recall.

    Scores 1 when neither labeling co-clusters any pair, 0 when there are
    positive pairs but no true positives.
    """
    table.validate()
    if table.n < 2:
        raise ValueError("fmi requires at least 2 objects")
    tp = _pair_count(table.counts)
    together_ref = _pair_count(table.row_sums)
    together_pred = _pair_count(table.col_sums)
    if together_ref == 0 and together_pred == 0:
        return 1.0
    if tp == 0:
        return 0.0
    return float(tp / math.sqrt(together_ref * together_pred))


# ---------------------------------------------------------------------------
# silhouette

def silhouette_values(m: MatrixLike, labels: Union[ClusterAssignment, Sequence[int]]) -> np.ndarray:
    """Per-object silhouette coefficients; noise objects get NaN.

    a_i is the mean distance to the object's own cluster (excluding itself),
    b_i the smallest mean distance to another cluster; singletons score 0.
    """
    values = m.values if isinstance(m, DistanceMatrix) else np.asarray(m, dtype=float)
    arr = labels.as_array if isinstance(labels, ClusterAssignment) else np.asarray(labels)
    if values.shape[0] != arr.shape[0]:
        raise ValueError("matrix size and label count differ")
    clusters = sorted(set(arr.tolist()) - {NOISE_LABEL})
    if len(clusters) < 2:
        raise ValueError("silhouette requires at least 2 non-noise clusters")
    member_idx = {c: np.flatnonzero(arr == c) for c in clusters}
    sums = np.stack([values[:, idx].sum(axis=1) for c, idx in member_idx.items()], axis=1)
    sizes = np.array([len(member_idx[c]) for c in clusters], dtype=float)

    out = np.full(arr.shape[0], np.nan)
    pos_of = {c: i for i, c in enumerate(clusters)}
    for i in range(arr.shape[0]):
        lab = arr[i]
        if lab == NOISE_LABEL:
            continue
        ci = pos_of[lab]
        own_size = sizes[ci]
        if own_size == 1:
            out[i] = 0.0
            continue
        a = sums[i, ci] / (own_size - 1)  # own-cluster sum includes d(i,i)=0
        other_means = np.delete(sums[i] / sizes, ci)
        b = other_means.min()
        denom = max(a, b)
        out[i] = 0.0 if denom == 0 else (b - a) / denom
    return out


def silhouette(m: MatrixLike, labels: Union[ClusterAssignment, Sequence[int]]) -> float:
    """Mean silhouette coefficient over all non-noise objects."""
    vals = silhouette_values(m, labels)
    return float(np.nanmean(vals))


# ---------------------------------------------------------------------------
# one-shot evaluation

def evaluate_all(
    m: MatrixLike,
    ids: Sequence[str],
    labels: Union[ClusterAssignment, Sequence[int]],
    ref: ReferenceClusters,
) -> list[MeasureValue]:
    """All seven measures of one clustering against the retained reference set.

    ``ids`` aligns matrix rows and labels with reference entries and must
    cover exactly the retained trajectory set.  Noise objects form one extra
    predicted cluster for the reference-based measures and are excluded from
    the silhouette; when fewer than 2 non-noise clusters exist the silhouette
    is reported as NaN rather than raising.
    """
    arr = labels.as_array if isinstance(labels, ClusterAssignment) else np.asarray(labels)
    if len(ids) != len(arr):
        raise ValueError("ids and labels differ in length")
    ref_by_id = {e.trajectory_id: e.od_label for e in ref.entries if e.retained}
    if set(ids) != set(ref_by_id):
        raise ValueError("ids do not match the retained reference trajectory set")
    ref_labels = np.array([ref_by_id[i] for i in ids])

    pred = arr.copy()
    if (pred == NOISE_LABEL).any():
        pred[pred == NOISE_LABEL] = (pred.max() if (pred != NOISE_LABEL).any() else -1) + 1

    table = ContingencyTable.from_labels(ref_labels, pred)
    h, c, v = homogeneity_completeness_v(table)
    try:
        s = silhouette(m, arr)
    except ValueError:
        s = float("nan")
    return [
        MeasureValue("silhouette", s),
        MeasureValue("completeness", c),
        MeasureValue("homogeneity", h),
        MeasureValue("v_measure", v),
        MeasureValue("ami", ami(table)),
        MeasureValue("ari", ari(table)),
        MeasureValue("fmi", fmi(table)),
    ]
