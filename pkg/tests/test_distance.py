import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import (
    dtw_brute,
    edr_brute,
    hausdorff_brute,
    lcss_distance_brute,
    nearest_neighbor_mean_brute,
    sspd_brute,
)
from conftest import make_dataset
from trajbench.core import DistanceSpec
from trajbench.distance import (
    build_matrix,
    dtw,
    edr,
    hausdorff,
    lcss_distance,
    load_matrix,
    pairwise_distance,
    pf,
    save_matrix,
    segment_path_distance,
    sspd,
)


def random_traj(rng, max_len=6, min_len=1):
    m = int(rng.integers(min_len, max_len + 1))
    return rng.uniform(-5, 5, size=(m, 2))


coord = st.floats(min_value=-50, max_value=50, allow_nan=False, allow_infinity=False)
traj_strategy = st.lists(st.tuples(coord, coord), min_size=1, max_size=8).map(np.array)


class TestDtw:
    def test_identity(self):
        a = np.array([[0.0, 0.0], [1.0, 2.0], [3.0, 1.0]])
        assert dtw(a, a) == 0.0

    def test_two_vs_three_points(self):
        a = np.array([[0.0, 0.0], [1.0, 0.0]])
        b = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
        assert dtw(a, b) == pytest.approx(1.0, abs=1e-12)

    def test_single_points(self):
        assert dtw(np.array([[0.0, 0.0]]), np.array([[3.0, 4.0]])) == pytest.approx(5.0)

    def test_matches_brute_force(self, rng):
        for _ in range(50):
            a, b = random_traj(rng), random_traj(rng)
            assert dtw(a, b) == pytest.approx(dtw_brute(a, b), abs=1e-9)


class TestLcss:
    def test_identity_is_zero(self, rng):
        a = rng.uniform(-5, 5, size=(6, 2))
        for r in (0.5, 1.0, 10.0):
            assert lcss_distance(a, a, r) == 0.0

    def test_worked_example(self):
        a = np.array([[0.0, 0.0], [5.0, 0.0]])
        b = np.array([[0.5, 0.0], [10.0, 0.0]])
        assert lcss_distance(a, b, 1.0) == pytest.approx(0.5)

    def test_disjoint_is_one(self):
        a = np.array([[0.0, 0.0], [1.0, 0.0]])
        b = np.array([[100.0, 0.0], [101.0, 0.0]])
        assert lcss_distance(a, b, 1.0) == 1.0

    def test_matches_brute_force(self, rng):
        for _ in range(50):
            a, b = random_traj(rng), random_traj(rng)
            r = float(rng.uniform(0.5, 6))
            assert lcss_distance(a, b, r) == pytest.approx(lcss_distance_brute(a, b, r), abs=1e-12)

    def test_monotone_in_radius(self, rng):
        a, b = random_traj(rng, min_len=3), random_traj(rng, min_len=3)
        prev = np.inf
        for r in (0.5, 1.0, 2.0, 4.0, 8.0):
            cur = lcss_distance(a, b, r)
            assert cur <= prev + 1e-12
            prev = cur

    def test_threshold_non_strict(self):
        a = np.array([[0.0, 0.0], [9.0, 9.0]])
        b = np.array([[1.0, 0.0], [20.0, 20.0]])
        assert lcss_distance(a, b, 1.0) == 0.5  # exactly at the radius counts


class TestEdr:
    def test_identity(self, rng):
        a = rng.uniform(-5, 5, size=(5, 2))
        assert edr(a, a, 0.5) == 0

    def test_all_far(self):
        a = np.array([[0.0, 0.0], [1.0, 0.0]])
        b = np.array([[50.0, 0.0], [51.0, 0.0], [52.0, 0.0]])
        assert edr(a, b, 1.0) == 3

    def test_worked_example(self):
        a = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
        b = np.array([[0.0, 0.0], [2.0, 0.0]])
        assert edr(a, b, 0.5) == 1

    def test_matches_brute_force(self, rng):
        for _ in range(50):
            a, b = random_traj(rng), random_traj(rng)
            r = float(rng.uniform(0.5, 6))
            assert edr(a, b, r) == edr_brute(a, b, r)

    def test_bounded_by_max_length(self, rng):
        a, b = random_traj(rng), random_traj(rng)
        assert edr(a, b, 1.0) <= max(len(a), len(b))

    def test_normalized_option(self):
        a = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
        b = np.array([[0.0, 0.0], [2.0, 0.0]])
        assert edr(a, b, 0.5, normalized=True) == pytest.approx(1 / 3)
        assert edr(a, b, 0.5) == 1  # raw count stays the default


class TestPf:
    def test_identity(self, rng):
        a = rng.uniform(-5, 5, size=(7, 2))
        for w in (0.01, 0.3, 1.0):
            assert pf(a, a, w) == 0.0

    def test_parallel_lines(self):
        a = np.array([[float(i), 0.0] for i in range(10)])
        b = np.array([[float(i), 2.0] for i in range(10)])
        assert pf(a, b, 0.1) == pytest.approx(2.0)

    def test_full_window_is_nearest_neighbor_mean(self, rng):
        for _ in range(20):
            a, b = random_traj(rng, min_len=2), random_traj(rng, min_len=2)
            assert pf(a, b, 1.0) == pytest.approx(nearest_neighbor_mean_brute(a, b), abs=1e-9)

    def test_window_search_matches_brute(self, rng):
        # windowed minimum at every sample, searched exhaustively
        for _ in range(20):
            a, b = random_traj(rng, min_len=3), random_traj(rng, min_len=3)
            w = 0.25

            def directed(src, dst):
                m, n = len(src), len(dst)
                total = 0.0
                for i in range(m):
                    u = i / (m - 1) if m > 1 else 0.0
                    gaps = [abs((j / (n - 1) if n > 1 else 0.0) - u) for j in range(n)]
                    cand = [j for j in range(n) if gaps[j] <= w]
                    nearest = min(range(n), key=lambda j: gaps[j])
                    if nearest not in cand:
                        cand.append(nearest)
                    total += min(np.hypot(*(src[i] - dst[j])) for j in cand)
                return total / m

            expect = 0.5 * (directed(a, b) + directed(b, a))
            assert pf(a, b, w) == pytest.approx(expect, abs=1e-9)


class TestHausdorff:
    def test_single_points(self):
        assert hausdorff(np.array([[0.0, 0.0]]), np.array([[3.0, 4.0]])) == 5.0

    def test_subset(self):
        a = np.array([[0.0, 0.0], [1.0, 0.0]])
        b = np.array([[0.0, 0.0]])
        assert hausdorff(a, b) == 1.0

    def test_matches_brute_force(self, rng):
        for _ in range(30):
            a, b = random_traj(rng), random_traj(rng)
            assert hausdorff(a, b) == pytest.approx(hausdorff_brute(a, b), abs=1e-12)


class TestSspd:
    def test_identity(self, rng):
        a = rng.uniform(-5, 5, size=(6, 2))
        assert sspd(a, a) == 0.0

    def test_parallel_segments(self):
        a = np.array([[0.0, 0.0], [10.0, 0.0]])
        b = np.array([[0.0, 3.0], [10.0, 3.0]])
        assert sspd(a, b) == pytest.approx(3.0)

    def test_projection_case(self):
        a = np.array([[0.0, 0.0], [0.0, 0.0001]])
        b = np.array([[-5.0, -1.0], [5.0, -1.0]])
        assert segment_path_distance(a, b) == pytest.approx(1.0, abs=1e-3)

    def test_matches_brute_force(self, rng):
        for _ in range(30):
            a, b = random_traj(rng, min_len=2), random_traj(rng, min_len=2)
            assert sspd(a, b) == pytest.approx(sspd_brute(a, b), abs=1e-9)

    def test_rejects_single_point(self):
        with pytest.raises(ValueError):
            sspd(np.array([[0.0, 0.0]]), np.array([[1.0, 0.0], [2.0, 0.0]]))


ALL_SPECS = [
    DistanceSpec("dtw"),
    DistanceSpec("lcss", match_radius=2.0),
    DistanceSpec("edr", match_radius=2.0),
    DistanceSpec("pf", window=0.2),
    DistanceSpec("hausdorff"),
    DistanceSpec("sspd"),
]


@pytest.mark.parametrize("spec", ALL_SPECS, ids=lambda s: s.key())
class TestCommonProperties:
    def test_symmetry_and_nonnegativity(self, spec, rng):
        for _ in range(10):
            a, b = random_traj(rng, min_len=2), random_traj(rng, min_len=2)
            d_ab = pairwise_distance(a, b, spec)
            d_ba = pairwise_distance(b, a, spec)
            assert d_ab == pytest.approx(d_ba, abs=1e-12)
            assert d_ab >= 0
            assert np.isfinite(d_ab)

    def test_self_distance_zero(self, spec, rng):
        a = random_traj(rng, min_len=2)
        assert pairwise_distance(a, a, spec) == 0.0


@settings(max_examples=40, deadline=None)
@given(a=traj_strategy, b=traj_strategy)
def test_dtw_symmetric_property(a, b):
    assert dtw(a, b) == pytest.approx(dtw(b, a), abs=1e-9)
    assert dtw(a, b) >= 0


class TestBuildMatrix:
    def test_single_trajectory(self):
        ds = make_dataset([[(0, 0), (1, 1)]])
        m = build_matrix(ds, DistanceSpec("dtw"))
        assert m.values.shape == (1, 1)
        assert m.values[0, 0] == 0.0

    def test_matches_pairwise_calls(self, rng):
        arrays = [rng.uniform(0, 10, size=(4, 2)) for _ in range(3)]
        ds = make_dataset(arrays)
        spec = DistanceSpec("sspd")
        m = build_matrix(ds, spec)
        for i in range(3):
            for j in range(3):
                expect = 0.0 if i == j else sspd(arrays[i], arrays[j])
                assert m.values[i, j] == pytest.approx(expect, abs=1e-12)
        m.validate()

    def test_permuted_dataset_permutes_matrix(self, rng):
        arrays = [rng.uniform(0, 10, size=(5, 2)) for _ in range(4)]
        ds = make_dataset(arrays)
        perm = [2, 0, 3, 1]
        ds_perm = make_dataset([arrays[i] for i in perm])
        spec = DistanceSpec("hausdorff")
        m = build_matrix(ds, spec).values
        mp = build_matrix(ds_perm, spec).values
        assert np.array_equal(mp, m[np.ix_(perm, perm)])

    def test_worker_counts_agree(self, rng):
        arrays = [rng.uniform(0, 10, size=(5, 2)) for _ in range(8)]
        ds = make_dataset(arrays)
        spec = DistanceSpec("lcss", match_radius=2.0)
        m1 = build_matrix(ds, spec, workers=1)
        m4 = build_matrix(ds, spec, workers=4, chunk_size=3)
        assert np.array_equal(m1.values, m4.values)

    def test_cache_roundtrip(self, tmp_path, rng):
        arrays = [rng.uniform(0, 10, size=(4, 2)) for _ in range(3)]
        ds = make_dataset(arrays)
        spec = DistanceSpec("pf", window=0.2)
        m = build_matrix(ds, spec)
        path = tmp_path / "m.tbdm"
        save_matrix(m, path)
        loaded = load_matrix(path, expect_fingerprint=ds.fingerprint(), expect_spec=spec)
        assert np.array_equal(loaded.values, m.values)
        assert loaded.spec == spec

    def test_non_finite_distance_aborts_with_pair(self):
        ds = make_dataset([[(0, 0), (1, 0)], [(float("inf"), 0), (2, 0)]])
        with pytest.raises(ValueError, match=r"\(t0, t1\)"):
            build_matrix(ds, DistanceSpec("hausdorff"))

    def test_cache_rejects_wrong_fingerprint(self, tmp_path, rng):
        arrays = [rng.uniform(0, 10, size=(4, 2)) for _ in range(3)]
        ds = make_dataset(arrays)
        m = build_matrix(ds, DistanceSpec("dtw"))
        path = tmp_path / "m.tbdm"
        save_matrix(m, path)
        with pytest.raises(ValueError, match="fingerprint"):
            load_matrix(path, expect_fingerprint="0" * 64)
