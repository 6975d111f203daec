"""Pairwise trajectory distances and the symmetric distance-matrix builder.

Six measures are provided: dtw, lcss (converted to a distance), edr, pf,
hausdorff and sspd.  All of them use Euclidean point-to-point distances, are
symmetric, non-negative and zero on identical inputs.  The elastic measures
(dtw, lcss, edr, pf) tolerate trajectories of different lengths.
"""

from __future__ import annotations

import json
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .core import DistanceSpec, Trajectory, TrajectoryDataset

ArrayLike = Union[Trajectory, np.ndarray]

_CACHE_MAGIC = b"TBDM1\n"


def _coords(obj: ArrayLike) -> np.ndarray:
    """Accept a Trajectory or a raw (m, 2) array of positions."""
    if isinstance(obj, Trajectory):
        return obj.xy
    arr = np.asarray(obj, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 1:
        raise ValueError(f"expected an (m, 2) position array, got shape {arr.shape}")
    return arr


def _pointwise_dist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Euclidean distances between every point of a and every point of b."""
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt((diff * diff).sum(axis=2))


def dtw(a: ArrayLike, b: ArrayLike) -> float:
    """Unconstrained dynamic time warping distance (sum of matched point costs)."""
    pa, pb = _coords(a), _coords(b)
    cost = _pointwise_dist(pa, pb)
    m, n = cost.shape
    acc = np.full((m + 1, n + 1), np.inf)
    acc[0, 0] = 0.0
    for i in range(1, m + 1):
        row = acc[i]
        prev = acc[i - 1]
        ci = cost[i - 1]
        for j in range(1, n + 1):
            row[j] = ci[j - 1] + min(prev[j - 1], prev[j], row[j - 1])
    return float(acc[m, n])


def lcss_distance(a: ArrayLike, b: ArrayLike, match_radius: float) -> float:
    """Distance in [0, 1] from the longest common subsequence under a match radius.

    Two points match when their Euclidean distance is at most ``match_radius``
    (non-strict).  With L the longest common subsequence length, the distance
    is ``1 - L / min(len(a), len(b))``.
    """
    if match_radius <= 0:
        raise ValueError("match_radius must be positive")
    pa, pb = _coords(a), _coords(b)
    close = _pointwise_dist(pa, pb) <= match_radius
    m, n = close.shape
    length = np.zeros((m + 1, n + 1), dtype=int)
    for i in range(1, m + 1):
        row = length[i]
        prev = length[i - 1]
        ci = close[i - 1]
        for j in range(1, n + 1):
            if ci[j - 1]:
                row[j] = prev[j - 1] + 1
            else:
                row[j] = prev[j] if prev[j] >= row[j - 1] else row[j - 1]
    lcs = int(length[m, n])
    return 1.0 - lcs / min(m, n)


def edr(a: ArrayLike, b: ArrayLike, match_radius: float, *, normalized: bool = False):
    """Edit distance on real sequences: unit-cost inserts/deletes/substitutions,
    zero-cost matches for point pairs within ``match_radius`` (non-strict).

    Returns the raw operation count by default; ``normalized=True`` divides by
    the longer length instead.
    """
    if match_radius <= 0:
        raise ValueError("match_radius must be positive")
    pa, pb = _coords(a), _coords(b)
    close = _pointwise_dist(pa, pb) <= match_radius
    m, n = close.shape
    dist = np.zeros((m + 1, n + 1), dtype=int)
    dist[0, :] = np.arange(n + 1)
    dist[:, 0] = np.arange(m + 1)
    for i in range(1, m + 1):
        row = dist[i]
        prev = dist[i - 1]
        ci = close[i - 1]
        for j in range(1, n + 1):
            sub = prev[j - 1] + (0 if ci[j - 1] else 1)
            ins = row[j - 1] + 1
            dele = prev[j] + 1
            row[j] = min(sub, ins, dele)
    if normalized:
        return float(dist[m, n]) / max(m, n)
    return int(dist[m, n])


def _progress(m: int) -> np.ndarray:
    """Normalized progress of each sample index: 0 at the start, 1 at the end."""
    if m == 1:
        return np.zeros(1)
    return np.arange(m) / (m - 1)


def _pf_directed(pa: np.ndarray, pb: np.ndarray, window: float) -> float:
    """Mean, over samples of a, of the minimum distance to b's points whose
    normalized progress lies within +-window; the nearest-progress point is
    always a candidate so the window is never empty for coarse sampling."""
    dists = _pointwise_dist(pa, pb)
    ua, ub = _progress(len(pa)), _progress(len(pb))
    gap = np.abs(ua[:, None] - ub[None, :])
    in_window = gap <= window
    in_window[np.arange(len(pa)), gap.argmin(axis=1)] = True
    masked = np.where(in_window, dists, np.inf)
    return float(masked.min(axis=1).mean())


def pf(a: ArrayLike, b: ArrayLike, window: float) -> float:
    """Progress-window distance in the style of Piciarelli and Foresti.

    Each sample is compared against the other trajectory's points at a
    similar fraction of total progress; ``window`` is that fraction.  The
    result is the mean windowed minimum distance, averaged over both
    directions.  With ``window=1`` this reduces to the symmetrized mean
    nearest-neighbor distance.
    """
    if not (0 < window <= 1):
        raise ValueError("window must be in (0, 1]")
    pa, pb = _coords(a), _coords(b)
    return 0.5 * (_pf_directed(pa, pb, window) + _pf_directed(pb, pa, window))


def hausdorff(a: ArrayLike, b: ArrayLike) -> float:
    """Symmetric point-set Hausdorff distance."""
    dists = _pointwise_dist(_coords(a), _coords(b))
    return float(max(dists.min(axis=1).max(), dists.min(axis=0).max()))


def _point_to_segments(points: np.ndarray, seg_a: np.ndarray, seg_b: np.ndarray) -> np.ndarray:
    """Min Euclidean distance from each point to any of the segments [seg_a, seg_b]."""
    seg = seg_b - seg_a  # (s, 2)
    seg_len2 = (seg * seg).sum(axis=1)  # (s,)
    rel = points[:, None, :] - seg_a[None, :, :]  # (p, s, 2)
    dot = (rel * seg[None, :, :]).sum(axis=2)  # (p, s)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(seg_len2 > 0, dot / seg_len2, 0.0)
    t = np.clip(t, 0.0, 1.0)
    proj = seg_a[None, :, :] + t[:, :, None] * seg[None, :, :]
    diff = points[:, None, :] - proj
    d = np.sqrt((diff * diff).sum(axis=2))
    return d.min(axis=1)


def segment_path_distance(a: ArrayLike, b: ArrayLike) -> float:
    """Mean distance from the points of a to the polyline of b (directional)."""
    pa, pb = _coords(a), _coords(b)
    if len(pb) < 2:
        raise ValueError("polyline needs at least 2 points")
    return float(_point_to_segments(pa, pb[:-1], pb[1:]).mean())


def sspd(a: ArrayLike, b: ArrayLike) -> float:
    """Symmetric segment-path distance: the two directional point-to-polyline
    means, averaged."""
    pa, pb = _coords(a), _coords(b)
    if len(pa) < 2 or len(pb) < 2:
        raise ValueError("sspd requires trajectories with at least 2 points")
    return 0.5 * (segment_path_distance(pa, pb) + segment_path_distance(pb, pa))


def pairwise_distance(a: ArrayLike, b: ArrayLike, spec: DistanceSpec) -> float:
    """Evaluate the distance described by ``spec`` on one trajectory pair."""
    if spec.kind == "dtw":
        return dtw(a, b)
    if spec.kind == "lcss":
        return lcss_distance(a, b, spec.match_radius)
    if spec.kind == "edr":
        return float(edr(a, b, spec.match_radius))
    if spec.kind == "pf":
        return pf(a, b, spec.window)
    if spec.kind == "hausdorff":
        return hausdorff(a, b)
    if spec.kind == "sspd":
        return sspd(a, b)
    raise ValueError(f"unknown distance kind: {spec.kind!r}")


@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric matrix of pairwise distances for one dataset and one spec."""

    values: np.ndarray
    spec: DistanceSpec
    fingerprint: str

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def validate(self) -> None:
        v = self.values
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError("matrix must be square")
        if not np.isfinite(v).all():
            raise ValueError("matrix contains non-finite entries")
        if (v < 0).any():
            raise ValueError("matrix contains negative entries")
        if np.diagonal(v).any():
            raise ValueError("matrix diagonal must be zero")
        if not np.array_equal(v, v.T):
            raise ValueError("matrix must be symmetric")

    def permuted(self, perm: np.ndarray) -> "DistanceMatrix":
        """Rows/columns reordered so entry (i, j) describes objects perm[i], perm[j]."""
        return DistanceMatrix(self.values[np.ix_(perm, perm)], self.spec, self.fingerprint)


# Worker-side state for parallel matrix builds: set once per process via the
# pool initializer so trajectory arrays are not re-pickled for every chunk.
_worker_data: dict = {}


def _init_worker(coords: list[np.ndarray], spec: DistanceSpec) -> None:
    _worker_data["coords"] = coords
    _worker_data["spec"] = spec


def _compute_chunk(pairs: list[tuple[int, int]]) -> list[float]:
    coords = _worker_data["coords"]
    spec = _worker_data["spec"]
    return [pairwise_distance(coords[i], coords[j], spec) for i, j in pairs]


def build_matrix(
    ds: TrajectoryDataset,
    spec: DistanceSpec,
    *,
    workers: int = 1,
    chunk_size: int = 512,
) -> DistanceMatrix:
    """Compute all pairwise distances for the dataset.

    Only the upper triangle is computed and then mirrored.  Each pair's value
    lands in a fixed position, so the result is identical for any worker
    count.  Raises if any pair evaluates to a non-finite value.
    """
    n = len(ds)
    if n == 0:
        raise ValueError("dataset is empty")
    coords = [t.xy for t in ds.trajectories]
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    values = np.zeros((n, n), dtype=np.float64)

    if workers <= 1 or len(pairs) < 2:
        flat = _compute_all(coords, spec, pairs)
    else:
        chunks = [pairs[i : i + chunk_size] for i in range(0, len(pairs), chunk_size)]
        flat = []
        with ProcessPoolExecutor(
            max_workers=workers, initializer=_init_worker, initargs=(coords, spec)
        ) as pool:
            for part in pool.map(_compute_chunk, chunks):
                flat.extend(part)

    for (i, j), v in zip(pairs, flat):
        if not np.isfinite(v):
            raise ValueError(
                f"{spec.key()} returned a non-finite value for pair "
                f"({ds.trajectories[i].id}, {ds.trajectories[j].id})"
            )
        values[i, j] = v
        values[j, i] = v
    values.setflags(write=False)
    return DistanceMatrix(values, spec, ds.fingerprint())


def _compute_all(coords, spec, pairs) -> list[float]:
    return [pairwise_distance(coords[i], coords[j], spec) for i, j in pairs]


def save_matrix(matrix: DistanceMatrix, path: Union[str, Path]) -> None:
    """Write the matrix cache file: a JSON header followed by row-major float64."""
    header = {
        "spec": {
            "kind": matrix.spec.kind,
            "match_radius": matrix.spec.match_radius,
            "window": matrix.spec.window,
        },
        "fingerprint": matrix.fingerprint,
        "n": matrix.n,
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_CACHE_MAGIC)
        fh.write(struct.pack(">I", len(blob)))
        fh.write(blob)
        fh.write(np.ascontiguousarray(matrix.values, dtype="<f8").tobytes())


def load_matrix(
    path: Union[str, Path],
    *,
    expect_fingerprint: Optional[str] = None,
    expect_spec: Optional[DistanceSpec] = None,
) -> DistanceMatrix:
    """Read a matrix cache file, refusing mismatched fingerprints or specs."""
    with open(path, "rb") as fh:
        magic = fh.read(len(_CACHE_MAGIC))
        if magic != _CACHE_MAGIC:
            raise ValueError(f"{path}: not a distance-matrix cache file")
        (hlen,) = struct.unpack(">I", fh.read(4))
        header = json.loads(fh.read(hlen).decode())
        n = int(header["n"])
        raw = fh.read(n * n * 8)
    if len(raw) != n * n * 8:
        raise ValueError(f"{path}: truncated matrix payload")
    spec = DistanceSpec(**header["spec"])
    if expect_fingerprint is not None and header["fingerprint"] != expect_fingerprint:
        raise ValueError(
            f"{path}: cache fingerprint {header['fingerprint'][:12]}... does not match "
            f"the dataset ({expect_fingerprint[:12]}...)"
        )
    if expect_spec is not None and spec != expect_spec:
        raise ValueError(f"{path}: cache holds {spec.key()}, expected {expect_spec.key()}")
    values = np.frombuffer(raw, dtype="<f8").reshape(n, n).astype(np.float64)
    values.setflags(write=False)
    return DistanceMatrix(values, spec, header["fingerprint"])
