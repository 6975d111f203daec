"""Loading trajectory datasets from delimited text and clipping them to a site.

Files carry one observation per row.  The column mapping names (or indexes)
the id, time and position columns and applies unit scale factors; rows are
grouped by id and time-sorted, so input row order never matters.  Corrupt
rows fail the whole load, while trajectories that end up too short or
inconsistent are dropped with a logged reason.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .core import Point, Trajectory, TrajectoryDataset, validate_trajectory
from .errors import DataError

logger = logging.getLogger(__name__)

#: Canonical column names used by files this toolkit writes itself.
CANONICAL_COLUMNS = ("track_id", "t", "x", "y")


@dataclass(frozen=True)
class ColumnMapping:
    """Where to find id/time/position in a delimited file.

    Columns are header names (strings) or zero-based indices (ints); when all
    four are ints the file is read without a header row.  Scale factors
    convert positions to meters and times to seconds.
    """

    id_column: Union[str, int] = "track_id"
    t_column: Union[str, int] = "t"
    x_column: Union[str, int] = "x"
    y_column: Union[str, int] = "y"
    position_scale: float = 1.0
    time_scale: float = 1.0
    delimiter: str = ","

    def __post_init__(self):
        cols = [self.id_column, self.t_column, self.x_column, self.y_column]
        if len(set(cols)) != 4:
            raise ValueError("the four mapped columns must be distinct")
        kinds = {type(c) for c in cols}
        if len(kinds) != 1:
            raise ValueError("mix of column names and indices is not supported")
        if self.position_scale <= 0 or self.time_scale <= 0:
            raise ValueError("scale factors must be positive")

    @property
    def headerless(self) -> bool:
        return isinstance(self.id_column, int)


@dataclass(frozen=True)
class SiteBoundary:
    """Axis-aligned rectangle or convex polygon delimiting the site, in meters."""

    rect: Optional[tuple[float, float, float, float]] = None  # xmin, ymin, xmax, ymax
    polygon: Optional[tuple[tuple[float, float], ...]] = None

    def __post_init__(self):
        if (self.rect is None) == (self.polygon is None):
            raise ValueError("provide exactly one of rect or polygon")
        if self.rect is not None:
            xmin, ymin, xmax, ymax = self.rect
            if xmin >= xmax or ymin >= ymax:
                raise ValueError("rectangle has empty area")
        else:
            if len(self.polygon) < 3:
                raise ValueError("polygon needs at least 3 vertices")
            _check_convex(np.asarray(self.polygon, dtype=float))

    def contains(self, xy: np.ndarray) -> np.ndarray:
        """Boolean mask of points inside the boundary (boundary inclusive)."""
        xy = np.asarray(xy, dtype=float)
        if self.rect is not None:
            xmin, ymin, xmax, ymax = self.rect
            return (
                (xy[:, 0] >= xmin) & (xy[:, 0] <= xmax)
                & (xy[:, 1] >= ymin) & (xy[:, 1] <= ymax)
            )
        verts = np.asarray(self.polygon, dtype=float)
        nxt = np.roll(verts, -1, axis=0)
        edges = nxt - verts
        # consistent cross-product sign against every edge = inside (convex)
        rel = xy[:, None, :] - verts[None, :, :]
        cross = edges[None, :, 0] * rel[:, :, 1] - edges[None, :, 1] * rel[:, :, 0]
        return np.all(cross >= 0, axis=1) | np.all(cross <= 0, axis=1)


def _check_convex(verts: np.ndarray) -> None:
    nxt = np.roll(verts, -1, axis=0)
    edges = nxt - verts
    prev = np.roll(edges, 1, axis=0)
    cross = prev[:, 0] * edges[:, 1] - prev[:, 1] * edges[:, 0]
    if np.allclose(cross, 0):
        raise ValueError("polygon has empty area")
    if not (np.all(cross >= 0) or np.all(cross <= 0)):
        raise ValueError("polygon must be convex")


def load_csv(
    path: Union[str, Path], mapping: ColumnMapping = ColumnMapping(), site_id: str = ""
) -> TrajectoryDataset:
    """Load a delimited observation file into a dataset.

    Rows are grouped by id and sorted by time; scale factors are applied.
    Raises :class:`DataError` for unreadable files, missing columns or
    non-numeric cells (reported with their row number).  Trajectories
    violating the dataset invariants are dropped and logged.
    """
    path = Path(path)
    try:
        fh = open(path, newline="")
    except OSError as e:
        raise DataError(f"cannot read {path}: {e}") from e

    groups: dict[str, list[tuple[float, float, float]]] = {}
    with fh:
        reader = csv.reader(fh, delimiter=mapping.delimiter)
        if mapping.headerless:
            idx = (mapping.id_column, mapping.t_column, mapping.x_column, mapping.y_column)
            first_row = 1
        else:
            try:
                header = next(reader)
            except StopIteration:
                raise DataError(f"{path}: file is empty")
            header = [h.strip() for h in header]
            try:
                idx = tuple(
                    header.index(c)
                    for c in (mapping.id_column, mapping.t_column, mapping.x_column, mapping.y_column)
                )
            except ValueError as e:
                missing = [
                    c
                    for c in (mapping.id_column, mapping.t_column, mapping.x_column, mapping.y_column)
                    if c not in header
                ]
                raise DataError(f"{path}: missing mapped column(s) {missing}") from e
            first_row = 2
        for row_no, row in enumerate(reader, start=first_row):
            if not row:
                continue
            if max(idx) >= len(row):
                raise DataError(f"{path}:{row_no}: row has {len(row)} field(s), need {max(idx) + 1}")
            tid = row[idx[0]].strip()
            try:
                t = float(row[idx[1]]) * mapping.time_scale
                x = float(row[idx[2]]) * mapping.position_scale
                y = float(row[idx[3]]) * mapping.position_scale
            except ValueError as e:
                raise DataError(f"{path}:{row_no}: non-numeric cell ({e})") from e
            groups.setdefault(tid, []).append((t, x, y))

    trajectories = []
    for tid in sorted(groups):
        rows = sorted(groups[tid], key=lambda r: r[0])
        traj = Trajectory(tid, tuple(Point(x, y, t) for t, x, y in rows))
        problems = validate_trajectory(traj)
        if problems:
            for v in problems:
                logger.warning("dropping trajectory %s: %s", tid, v.rule)
            continue
        trajectories.append(traj)
    return TrajectoryDataset(tuple(trajectories), site_id=site_id)


def clip_to_boundary(ds: TrajectoryDataset, boundary: SiteBoundary) -> TrajectoryDataset:
    """Replace each trajectory by its longest contiguous run of points inside
    the boundary; trajectories left with fewer than 2 interior points are
    dropped.  Earliest run wins on equal lengths."""
    kept = []
    for traj in ds.trajectories:
        inside = boundary.contains(traj.xy)
        start, length = _longest_run(inside)
        if length < 2:
            logger.info("dropping trajectory %s: outside the site boundary", traj.id)
            continue
        if length == len(traj):
            kept.append(traj)
        else:
            kept.append(Trajectory(traj.id, traj.points[start : start + length]))
    return TrajectoryDataset(tuple(kept), site_id=ds.site_id)


def _longest_run(mask: np.ndarray) -> tuple[int, int]:
    best_start, best_len = 0, 0
    start = None
    for i, flag in enumerate(mask):
        if flag and start is None:
            start = i
        if (not flag or i == len(mask) - 1) and start is not None:
            end = i + 1 if flag else i
            if end - start > best_len:
                best_start, best_len = start, end - start
            start = None
    return best_start, best_len


def write_canonical_csv(ds: TrajectoryDataset, path: Union[str, Path]) -> None:
    """Write the dataset in the canonical ``track_id,t,x,y`` layout."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CANONICAL_COLUMNS)
        for traj in ds.trajectories:
            for p in traj.points:
                writer.writerow([traj.id, f"{p.t:.17g}", f"{p.x:.17g}", f"{p.y:.17g}"])
