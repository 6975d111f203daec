import numpy as np
import pytest

from trajbench.core import Point, Trajectory, TrajectoryDataset


def make_traj(tid: str, xy, t0: float = 0.0, dt: float = 1.0) -> Trajectory:
    points = tuple(Point(float(x), float(y), t0 + i * dt) for i, (x, y) in enumerate(xy))
    return Trajectory(tid, points)


def make_dataset(arrays, site_id="test") -> TrajectoryDataset:
    return TrajectoryDataset(
        tuple(make_traj(f"t{i}", xy) for i, xy in enumerate(arrays)), site_id=site_id
    )


def block_matrix(sizes, within=0.1, between=9.0, rng=None):
    """Distance matrix with tight diagonal blocks and large cross distances."""
    n = sum(sizes)
    rng = rng or np.random.default_rng(0)
    values = np.full((n, n), between) + rng.uniform(0, 0.5, size=(n, n))
    values = (values + values.T) / 2
    start = 0
    for s in sizes:
        block = within * (1 + rng.uniform(0, 0.5, size=(s, s)))
        block = (block + block.T) / 2
        values[start : start + s, start : start + s] = block
        start += s
    np.fill_diagonal(values, 0.0)
    return values


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def two_line_dataset():
    a = [(float(i), 0.0) for i in range(5)]
    b = [(float(i), 3.0) for i in range(5)]
    return make_dataset([a, b])
