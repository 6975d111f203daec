import numpy as np
import pytest

from conftest import make_dataset
from trajbench.errors import DataError
from trajbench.ingest import (
    ColumnMapping,
    SiteBoundary,
    clip_to_boundary,
    load_csv,
    write_canonical_csv,
)


def write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestLoadCsv:
    def test_basic_two_trajectories(self, tmp_path):
        path = write(tmp_path, "track_id,t,x,y\na,0,0,0\na,1,1,0\nb,0,5,5\nb,1,6,5\n")
        ds = load_csv(path)
        assert len(ds) == 2
        assert ds.ids == ("a", "b")
        assert ds.trajectories[0].xy.tolist() == [[0, 0], [1, 0]]

    def test_single_row_id_dropped(self, tmp_path, caplog):
        path = write(tmp_path, "track_id,t,x,y\na,0,0,0\nb,0,5,5\nb,1,6,5\n")
        with caplog.at_level("WARNING"):
            ds = load_csv(path)
        assert ds.ids == ("b",)
        assert any("dropping trajectory a" in r.message for r in caplog.records)

    def test_rows_sorted_by_time(self, tmp_path):
        shuffled = write(tmp_path, "track_id,t,x,y\na,2,2,0\na,0,0,0\na,1,1,0\n", "s.csv")
        ordered = write(tmp_path, "track_id,t,x,y\na,0,0,0\na,1,1,0\na,2,2,0\n", "o.csv")
        assert load_csv(shuffled).trajectories[0] == load_csv(ordered).trajectories[0]

    def test_row_permutation_invariance(self, tmp_path, rng):
        rows = [f"{tid},{t},{t * 2},{tid_i}" for tid_i, tid in enumerate("abc") for t in range(4)]
        perm = list(rows)
        rng.shuffle(perm)
        ds1 = load_csv(write(tmp_path, "track_id,t,x,y\n" + "\n".join(rows) + "\n", "r1.csv"))
        ds2 = load_csv(write(tmp_path, "track_id,t,x,y\n" + "\n".join(perm) + "\n", "r2.csv"))
        assert ds1 == ds2

    def test_missing_column(self, tmp_path):
        path = write(tmp_path, "track_id,t,x\na,0,0\n")
        with pytest.raises(DataError, match="missing mapped column"):
            load_csv(path)

    def test_non_numeric_cell_names_row(self, tmp_path):
        path = write(tmp_path, "track_id,t,x,y\na,0,0,0\na,1,oops,0\n")
        with pytest.raises(DataError, match=":3:"):
            load_csv(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="cannot read"):
            load_csv(tmp_path / "nope.csv")

    def test_scale_factors(self, tmp_path):
        path = write(tmp_path, "track_id,t,x,y\na,0,100,200\na,10,300,400\n")
        mapping = ColumnMapping(position_scale=0.01, time_scale=0.1)
        ds = load_csv(path, mapping)
        traj = ds.trajectories[0]
        assert traj.xy.tolist() == [[1.0, 2.0], [3.0, 4.0]]
        assert traj.times.tolist() == [0.0, 1.0]

    def test_headerless_integer_mapping(self, tmp_path):
        path = write(tmp_path, "7;0;1;2\n7;1;2;3\n")
        mapping = ColumnMapping(id_column=0, t_column=1, x_column=2, y_column=3, delimiter=";")
        ds = load_csv(path, mapping)
        assert ds.ids == ("7",)

    def test_duplicate_timestamp_dropped(self, tmp_path, caplog):
        path = write(tmp_path, "track_id,t,x,y\na,1,0,0\na,1,1,0\nb,0,0,0\nb,1,1,1\n")
        with caplog.at_level("WARNING"):
            ds = load_csv(path)
        assert ds.ids == ("b",)

    def test_mapping_rejects_duplicate_columns(self):
        with pytest.raises(ValueError):
            ColumnMapping(id_column="x", x_column="x")

    def test_canonical_roundtrip(self, tmp_path, rng):
        ds = make_dataset([rng.uniform(0, 10, size=(4, 2)) for _ in range(3)])
        path = tmp_path / "canon.csv"
        write_canonical_csv(ds, path)
        loaded = load_csv(path, site_id="test")
        assert loaded == ds


class TestBoundary:
    def test_rect_contains(self):
        b = SiteBoundary(rect=(0, 0, 10, 10))
        mask = b.contains(np.array([[5, 5], [10, 10], [11, 5], [-1, 2]]))
        assert mask.tolist() == [True, True, False, False]

    def test_polygon_contains(self):
        b = SiteBoundary(polygon=((0, 0), (4, 0), (4, 4), (0, 4)))
        mask = b.contains(np.array([[2, 2], [4, 2], [5, 2]]))
        assert mask.tolist() == [True, True, False]

    def test_rejects_non_convex(self):
        with pytest.raises(ValueError, match="convex"):
            SiteBoundary(polygon=((0, 0), (4, 0), (1, 1), (0, 4)))

    def test_rejects_empty_area(self):
        with pytest.raises(ValueError):
            SiteBoundary(rect=(0, 0, 0, 10))

    def test_requires_exactly_one_shape(self):
        with pytest.raises(ValueError):
            SiteBoundary()


class TestClip:
    boundary = SiteBoundary(rect=(0, -10, 10, 10))

    def test_fully_inside_unchanged(self):
        ds = make_dataset([[(1, 0), (2, 0), (3, 0)]])
        clipped = clip_to_boundary(ds, self.boundary)
        assert clipped.trajectories == ds.trajectories

    def test_fully_outside_dropped(self):
        ds = make_dataset([[(20, 0), (21, 0)]])
        assert len(clip_to_boundary(ds, self.boundary)) == 0

    def test_longest_interior_run_kept(self):
        # x from -2 to 7: points 3..7 (x in 1..5) inside [0, 10] after entering
        xs = [-2, -1, -0.5, 1, 2, 3, 4, 5, 11, 12]
        ds = make_dataset([[(x, 0) for x in xs]])
        clipped = clip_to_boundary(ds, self.boundary)
        # brute force: scan every contiguous interior run
        inside = [0 <= x <= 10 for x in xs]
        best = max(
            (
                (j - i, i)
                for i in range(len(xs))
                for j in range(i + 1, len(xs) + 1)
                if all(inside[i:j])
            ),
        )
        expect = xs[best[1] : best[1] + best[0]]
        assert [p.x for p in clipped.trajectories[0].points] == expect

    def test_idempotent(self, rng):
        arrays = [np.column_stack([np.linspace(-5, 15, 12), rng.uniform(-2, 2, 12)])
                  for _ in range(5)]
        ds = make_dataset(arrays)
        once = clip_to_boundary(ds, self.boundary)
        twice = clip_to_boundary(once, self.boundary)
        assert once == twice

    def test_short_remainder_dropped(self):
        ds = make_dataset([[(-1, 0), (5, 0), (11, 0)]])
        assert len(clip_to_boundary(ds, self.boundary)) == 0
