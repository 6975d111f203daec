"""Domain types shared across the toolkit: trajectories, datasets, setups, labelings."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np

#: Label assigned to objects left outside every density-based cluster.
NOISE_LABEL = -1

#: Allowed range for the requested cluster count in a setup.
MIN_CLUSTER_COUNT = 2
MAX_CLUSTER_COUNT = 30

K_CONSUMING_ALGORITHMS = frozenset({"kmedoids", "agglomerative", "spectral"})
DENSITY_ALGORITHMS = frozenset({"dbscan", "optics"})


class Point(NamedTuple):
    """Timestamped planar position: x, y in meters, t in seconds."""

    x: float
    y: float
    t: float


@dataclass(frozen=True)
class Trajectory:
    """Time-ordered sequence of timestamped positions of one road user.

    Invariants (checked by :func:`validate_dataset`, enforced at ingestion):
    at least two points, strictly increasing timestamps, finite coordinates.
    """

    id: str
    points: tuple[Point, ...]

    def __len__(self) -> int:
        return len(self.points)

    @cached_property
    def xy(self) -> np.ndarray:
        """Positions as an (m, 2) float array."""
        arr = np.array([(p.x, p.y) for p in self.points], dtype=float)
        arr.setflags(write=False)
        return arr

    @cached_property
    def times(self) -> np.ndarray:
        arr = np.array([p.t for p in self.points], dtype=float)
        arr.setflags(write=False)
        return arr


def origin(traj: Trajectory) -> Point:
    """First recorded point of the trajectory."""
    return traj.points[0]


def destination(traj: Trajectory) -> Point:
    """Last recorded point of the trajectory."""
    return traj.points[-1]


@dataclass(frozen=True)
class TrajectoryDataset:
    """A set of trajectories recorded at one site. Trajectory ids must be unique."""

    trajectories: tuple[Trajectory, ...]
    site_id: str = ""

    def __len__(self) -> int:
        return len(self.trajectories)

    def __iter__(self):
        return iter(self.trajectories)

    @cached_property
    def ids(self) -> tuple[str, ...]:
        return tuple(t.id for t in self.trajectories)

    def subset(self, ids: Iterable[str]) -> "TrajectoryDataset":
        """Dataset restricted to the given ids, preserving the current order."""
        wanted = set(ids)
        kept = tuple(t for t in self.trajectories if t.id in wanted)
        return TrajectoryDataset(kept, site_id=self.site_id)

    def fingerprint(self) -> str:
        """Hash over trajectory ids and point counts, used to key cached matrices."""
        h = hashlib.sha256()
        for t in self.trajectories:
            h.update(f"{t.id}:{len(t)}\n".encode())
        return h.hexdigest()


@dataclass(frozen=True)
class Violation:
    """One invariant violation found in a dataset, naming the offender and the rule."""

    trajectory_id: Optional[str]
    rule: str
    detail: str = ""

    def __str__(self) -> str:
        who = self.trajectory_id if self.trajectory_id is not None else "<dataset>"
        return f"{who}: {self.rule}" + (f" ({self.detail})" if self.detail else "")


def validate_trajectory(traj: Trajectory) -> list[Violation]:
    """Check one trajectory against the length, ordering and finiteness rules."""
    out: list[Violation] = []
    if len(traj.points) < 2:
        out.append(Violation(traj.id, "min length", f"{len(traj.points)} point(s), need 2"))
    for p in traj.points:
        if not (math.isfinite(p.x) and math.isfinite(p.y) and math.isfinite(p.t)):
            out.append(Violation(traj.id, "non-finite coordinate", repr(p)))
            break
    ts = [p.t for p in traj.points]
    if any(b <= a for a, b in zip(ts, ts[1:])):
        out.append(Violation(traj.id, "timestamp order", "timestamps not strictly increasing"))
    return out


def validate_dataset(ds: TrajectoryDataset) -> list[Violation]:
    """Diagnostic check of every dataset invariant; empty list means the dataset is clean."""
    out: list[Violation] = []
    seen: set[str] = set()
    for t in ds.trajectories:
        if t.id in seen:
            out.append(Violation(t.id, "duplicate id"))
        seen.add(t.id)
        out.extend(validate_trajectory(t))
    return out


@dataclass(frozen=True)
class DistanceSpec:
    """A pairwise trajectory distance choice plus its parameter, if it takes one.

    kinds: dtw, lcss, edr, pf, hausdorff, sspd.  ``match_radius`` (meters) applies
    to lcss/edr, ``window`` (fraction of trajectory progress, in (0, 1]) to pf.
    """

    kind: str
    match_radius: Optional[float] = None
    window: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("dtw", "lcss", "edr", "pf", "hausdorff", "sspd"):
            raise ValueError(f"unknown distance kind: {self.kind!r}")
        if self.kind in ("lcss", "edr"):
            if self.match_radius is None or self.match_radius <= 0:
                raise ValueError(f"{self.kind} requires match_radius > 0")
            if self.window is not None:
                raise ValueError(f"{self.kind} takes no window parameter")
        elif self.kind == "pf":
            if self.window is None or not (0 < self.window <= 1):
                raise ValueError("pf requires window in (0, 1]")
            if self.match_radius is not None:
                raise ValueError("pf takes no match_radius parameter")
        else:
            if self.match_radius is not None or self.window is not None:
                raise ValueError(f"{self.kind} takes no parameters")

    def key(self) -> str:
        """Stable short identifier, e.g. ``lcss[r=2]`` or ``dtw``."""
        if self.kind in ("lcss", "edr"):
            return f"{self.kind}[r={_fmt_num(self.match_radius)}]"
        if self.kind == "pf":
            return f"pf[w={_fmt_num(self.window)}]"
        return self.kind


@dataclass(frozen=True)
class AlgorithmSpec:
    """A clustering algorithm choice plus the parameters its kind requires.

    kinds: kmedoids, agglomerative, spectral, dbscan, optics.  ``linkage``
    applies to agglomerative, ``min_samples`` to dbscan/optics, ``radius``
    (neighborhood distance) to dbscan, ``seed`` to the stochastic kmedoids
    and spectral algorithms.
    """

    kind: str
    linkage: Optional[str] = None
    min_samples: Optional[int] = None
    radius: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("kmedoids", "agglomerative", "spectral", "dbscan", "optics"):
            raise ValueError(f"unknown algorithm kind: {self.kind!r}")
        if self.kind == "agglomerative":
            if self.linkage not in ("complete", "average", "single"):
                raise ValueError("agglomerative requires linkage in {complete, average, single}")
        elif self.linkage is not None:
            raise ValueError(f"{self.kind} takes no linkage parameter")
        if self.kind in ("dbscan", "optics"):
            if self.min_samples is None or self.min_samples < 1:
                raise ValueError(f"{self.kind} requires min_samples >= 1")
        elif self.min_samples is not None:
            raise ValueError(f"{self.kind} takes no min_samples parameter")
        if self.kind == "dbscan":
            if self.radius is None or self.radius < 0:
                raise ValueError("dbscan requires radius >= 0")
        elif self.radius is not None:
            raise ValueError(f"{self.kind} takes no radius parameter")

    @property
    def requires_k(self) -> bool:
        return self.kind in K_CONSUMING_ALGORITHMS

    def key(self) -> str:
        """Stable short identifier, e.g. ``agglomerative[average]``."""
        if self.kind == "agglomerative":
            return f"agglomerative[{self.linkage}]"
        if self.kind == "dbscan":
            return f"dbscan[eps={_fmt_num(self.radius)},min={self.min_samples}]"
        if self.kind == "optics":
            return f"optics[min={self.min_samples}]"
        return self.kind


@dataclass(frozen=True)
class ClusteringSetup:
    """One full clustering choice: distance, algorithm and cluster count.

    ``cluster_count`` must be present exactly when the algorithm consumes a
    cluster count (kmedoids, agglomerative, spectral) and absent for the
    density-based algorithms, which decide the count themselves.
    """

    distance: DistanceSpec
    algorithm: AlgorithmSpec
    cluster_count: Optional[int] = None

    def __post_init__(self):
        if self.algorithm.requires_k:
            if self.cluster_count is None:
                raise ValueError(f"{self.algorithm.kind} requires a cluster count")
            if not (MIN_CLUSTER_COUNT <= self.cluster_count <= MAX_CLUSTER_COUNT):
                raise ValueError(
                    f"cluster count must be in [{MIN_CLUSTER_COUNT}, {MAX_CLUSTER_COUNT}], "
                    f"got {self.cluster_count}"
                )
        elif self.cluster_count is not None:
            raise ValueError(f"{self.algorithm.kind} does not take a cluster count")

    def key(self) -> str:
        k = str(self.cluster_count) if self.cluster_count is not None else "-"
        return f"{self.distance.key()}+{self.algorithm.key()}+k={k}"


@dataclass(frozen=True)
class ClusterAssignment:
    """Per-object integer labels; ``NOISE_LABEL`` marks unclustered objects."""

    labels: tuple[int, ...]

    @classmethod
    def from_array(cls, labels: Sequence[int]) -> "ClusterAssignment":
        return cls(tuple(int(v) for v in labels))

    def __len__(self) -> int:
        return len(self.labels)

    @cached_property
    def as_array(self) -> np.ndarray:
        arr = np.array(self.labels, dtype=int)
        arr.setflags(write=False)
        return arr

    @cached_property
    def n_clusters(self) -> int:
        """Number of distinct non-noise clusters."""
        return len({v for v in self.labels if v != NOISE_LABEL})

    @cached_property
    def noise_fraction(self) -> float:
        if not self.labels:
            return 0.0
        return sum(1 for v in self.labels if v == NOISE_LABEL) / len(self.labels)

    def validate(self) -> None:
        """Raise if labels are not noise or a contiguous block [0, k)."""
        non_noise = sorted({v for v in self.labels if v != NOISE_LABEL})
        if not non_noise:
            raise ValueError("assignment has no non-noise cluster")
        if non_noise[0] < 0 or non_noise != list(range(len(non_noise))):
            raise ValueError(f"labels must form a contiguous block [0, k), got {non_noise}")


def _fmt_num(v) -> str:
    """Render 2.0 as '2' and 0.05 as '0.05' so keys stay readable."""
    f = float(v)
    return str(int(f)) if f == int(f) else str(f)
