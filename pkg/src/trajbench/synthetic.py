"""Synthetic intersection traffic for demos and verification.

Generates trajectories crossing a four-arm intersection along a configurable
set of entry-arm/exit-arm movements, with right-hand lane offsets and Gaussian
lateral noise, so clustering behavior can be checked against planted labels.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .core import Point, Trajectory, TrajectoryDataset

#: Arm unit vectors: east, north, west, south.
ARM_DIRECTIONS = {
    "E": np.array([1.0, 0.0]),
    "N": np.array([0.0, 1.0]),
    "W": np.array([-1.0, 0.0]),
    "S": np.array([0.0, -1.0]),
}

#: Default movement set: the four through movements plus four turns, so each
#: arm serves as entry for two movements and as exit for two.
DEFAULT_MOVEMENTS = (
    ("N", "S"), ("S", "N"), ("E", "W"), ("W", "E"),
    ("N", "E"), ("E", "S"), ("S", "W"), ("W", "N"),
)


def _right_of(direction: np.ndarray) -> np.ndarray:
    """Unit vector pointing to the right of the travel direction."""
    return np.array([direction[1], -direction[0]])


def _movement_waypoints(
    entry_arm: str, exit_arm: str, arm_length: float, lane_offset: float
) -> np.ndarray:
    u_in = ARM_DIRECTIONS[entry_arm]
    u_out = ARM_DIRECTIONS[exit_arm]
    d_in = -u_in  # travel direction while approaching the center
    start = u_in * arm_length + _right_of(d_in) * lane_offset
    end = u_out * arm_length + _right_of(u_out) * lane_offset
    # corner waypoint: intersection of the entry and exit lane lines
    denom = d_in[0] * u_out[1] - d_in[1] * u_out[0]
    if abs(denom) < 1e-12:
        return np.array([start, end])
    rel = end - start
    s = (rel[0] * u_out[1] - rel[1] * u_out[0]) / denom
    corner = start + s * d_in
    return np.array([start, corner, end])


def _sample_polyline(waypoints: np.ndarray, n_points: int) -> np.ndarray:
    seg = np.diff(waypoints, axis=0)
    seg_len = np.linalg.norm(seg, axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    targets = np.linspace(0.0, cum[-1], n_points)
    out = np.empty((n_points, 2))
    for i, s in enumerate(targets):
        j = min(np.searchsorted(cum, s, side="right") - 1, len(seg) - 1)
        frac = 0.0 if seg_len[j] == 0 else (s - cum[j]) / seg_len[j]
        out[i] = waypoints[j] + frac * seg[j]
    return out


def make_intersection(
    n_trajectories: int = 400,
    movements: Sequence[tuple[str, str]] = DEFAULT_MOVEMENTS,
    n_points: int = 25,
    arm_length: float = 60.0,
    lane_offset: float = 2.0,
    lateral_noise: float = 0.5,
    time_step: float = 0.5,
    seed: int = 0,
) -> tuple[TrajectoryDataset, dict[str, int]]:
    """Build a synthetic intersection dataset with planted movements.

    Trajectories are spread evenly over the movements (remainders go to the
    first ones).  Returns the dataset and the planted movement index per
    trajectory id.
    """
    if n_trajectories < len(movements):
        raise ValueError("need at least one trajectory per movement")
    rng = np.random.default_rng(seed)
    paths = [
        _sample_polyline(_movement_waypoints(a, b, arm_length, lane_offset), n_points)
        for a, b in movements
    ]
    counts = np.full(len(movements), n_trajectories // len(movements))
    counts[: n_trajectories % len(movements)] += 1

    trajectories = []
    planted: dict[str, int] = {}
    idx = 0
    for move_id, (path, count) in enumerate(zip(paths, counts)):
        heading = np.diff(path, axis=0)
        heading = np.vstack([heading, heading[-1]])
        norms = np.linalg.norm(heading, axis=1)
        norms[norms == 0] = 1.0
        normal = np.column_stack([heading[:, 1], -heading[:, 0]]) / norms[:, None]
        for _ in range(count):
            offsets = rng.normal(0.0, lateral_noise, size=n_points)
            xy = path + normal * offsets[:, None]
            tid = f"t{idx:05d}"
            points = tuple(
                Point(float(x), float(y), float(j * time_step))
                for j, (x, y) in enumerate(xy)
            )
            trajectories.append(Trajectory(tid, points))
            planted[tid] = move_id
            idx += 1
    return TrajectoryDataset(tuple(trajectories), site_id="synthetic"), planted


def make_parallel_corridors(
    n_per_movement: int = 40,
    n_points: int = 12,
    length: float = 50.0,
    band: float = 4.0,
    gap: float = 1.0,
    seed: int = 0,
) -> tuple[TrajectoryDataset, dict[str, int]]:
    """Two adjacent horizontal corridors of straight trajectories.

    Movement 0 occupies lateral positions [0, band], movement 1
    [band + gap, 2 * band + gap]; positions are uniform within each corridor.
    Useful for constructing clusterings that mix the adjacent halves.
    """
    rng = np.random.default_rng(seed)
    trajectories = []
    planted: dict[str, int] = {}
    idx = 0
    for move_id, y0 in enumerate((0.0, band + gap)):
        for _ in range(n_per_movement):
            y = y0 + rng.uniform(0.0, band)
            xs = np.linspace(0.0, length, n_points)
            tid = f"c{idx:05d}"
            points = tuple(Point(float(x), float(y), float(j)) for j, x in enumerate(xs))
            trajectories.append(Trajectory(tid, points))
            planted[tid] = move_id
            idx += 1
    return TrajectoryDataset(tuple(trajectories), site_id="corridors"), planted
