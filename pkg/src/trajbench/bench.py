"""Setup sweep: permutations, confidence lower bounds, measure pruning, ranking.

Every setup (distance, algorithm, parameters, cluster count) is run against
``n`` random orderings of the retained trajectory subset.  Per measure, the
mean, sample standard deviation and the lower bound of the 95% confidence
interval are recorded; setups are ranked per measure on the lower bound and
the per-measure ranks are averaged into the final score.  Correlated measures
can be pruned beforehand so no aspect of performance is double counted.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import zlib
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import scipy.stats

from .cluster import cluster_precomputed
from .core import (
    NOISE_LABEL,
    AlgorithmSpec,
    ClusteringSetup,
    DistanceSpec,
    TrajectoryDataset,
)
from .distance import DistanceMatrix, build_matrix, load_matrix, save_matrix
from .errors import BenchmarkError
from .metrics import MEASURES, evaluate_all
from .reference import ReferenceClusters

logger = logging.getLogger(__name__)

DEFAULT_PERMUTATIONS = 10
DEFAULT_CORRELATION_THRESHOLD = 0.75
CONFIDENCE_LEVEL = 0.95

#: When a correlated pair must lose a member, the measure appearing first
#: here is the one dropped.
DEFAULT_DROP_PRIORITY = (
    "v_measure",
    "fmi",
    "homogeneity",
    "completeness",
    "ami",
    "ari",
    "silhouette",
)

_MATCH_RADII = (1.0, 2.0, 3.0, 5.0, 7.0, 10.0)
_PF_WINDOWS = (0.01, 0.05, 0.1, 0.2, 0.3, 0.5)

# domain separators for deriving independent random streams from one seed
_PERM_STREAM = 1
_ALGO_STREAM = 2


def default_distances() -> tuple[DistanceSpec, ...]:
    """The full default distance grid: 21 specs."""
    out = [DistanceSpec("dtw")]
    out += [DistanceSpec("lcss", match_radius=r) for r in _MATCH_RADII]
    out += [DistanceSpec("edr", match_radius=r) for r in _MATCH_RADII]
    out += [DistanceSpec("pf", window=w) for w in _PF_WINDOWS]
    out += [DistanceSpec("hausdorff"), DistanceSpec("sspd")]
    return tuple(out)


def default_algorithms() -> tuple[AlgorithmSpec, ...]:
    """Default algorithm grid: the k-consuming algorithms only, because the
    density-based ones need site-specific neighborhood parameters."""
    return (
        AlgorithmSpec("kmedoids"),
        AlgorithmSpec("agglomerative", linkage="complete"),
        AlgorithmSpec("agglomerative", linkage="average"),
        AlgorithmSpec("agglomerative", linkage="single"),
        AlgorithmSpec("spectral"),
    )


@dataclass(frozen=True)
class SetupGrid:
    """The cross product of distance specs, algorithm specs and cluster counts."""

    distances: tuple[DistanceSpec, ...]
    algorithms: tuple[AlgorithmSpec, ...]
    k_values: tuple[int, ...]

    @classmethod
    def default(cls) -> "SetupGrid":
        return cls(default_distances(), default_algorithms(), tuple(range(2, 31)))

    def __post_init__(self):
        if not self.distances or not self.algorithms:
            raise ValueError("grid needs at least one distance and one algorithm")
        if any(a.requires_k for a in self.algorithms) and not self.k_values:
            raise ValueError("grid includes k-consuming algorithms but no k values")

    def setups(self) -> list[ClusteringSetup]:
        out = []
        for d in self.distances:
            for a in self.algorithms:
                if a.requires_k:
                    out.extend(ClusteringSetup(d, a, k) for k in self.k_values)
                else:
                    out.append(ClusteringSetup(d, a))
        return out


@dataclass(frozen=True)
class PerformanceRecord:
    """Per-permutation values of one measure for one setup, plus statistics."""

    setup: ClusteringSetup
    measure: str
    values: tuple[float, ...]
    mean: float
    std: float
    lower: float
    noise_fraction: float = 0.0
    error: Optional[str] = None


def t_multiplier(n: int, confidence: float = CONFIDENCE_LEVEL) -> float:
    """Two-sided t quantile for an n-sample confidence interval (df = n - 1)."""
    return float(scipy.stats.t.ppf(0.5 + confidence / 2, n - 1))


def lower_bound(values: Sequence[float], confidence: float = CONFIDENCE_LEVEL) -> float:
    """Lower end of the t-based confidence interval: mean - t * std / sqrt(n)."""
    arr = np.asarray(values, dtype=float)
    n = arr.size
    if n < 2:
        raise ValueError("lower_bound needs at least 2 values")
    mean = float(arr.mean())
    std = float(arr.std(ddof=1))
    return mean - t_multiplier(n, confidence) * std / math.sqrt(n)


def _record(setup, measure, vals, noise, error=None) -> PerformanceRecord:
    arr = np.asarray(vals, dtype=float)
    mean = float(arr.mean())
    std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    if np.isnan(mean):
        low = float("nan")
    elif std == 0.0:
        low = mean
    else:
        low = mean - t_multiplier(arr.size) * std / math.sqrt(arr.size)
    return PerformanceRecord(setup, measure, tuple(arr.tolist()), mean, std, low, noise, error)


def _algo_seed(master_seed: int, setup: ClusteringSetup) -> int:
    key_hash = zlib.crc32(setup.key().encode())
    ss = np.random.SeedSequence([master_seed, _ALGO_STREAM, key_hash])
    return int(ss.generate_state(1)[0])


def matrix_for_subset(
    dsub: TrajectoryDataset,
    spec: DistanceSpec,
    *,
    workers: int = 1,
    cache_dir: Optional[Union[str, Path]] = None,
    full_ds: Optional[TrajectoryDataset] = None,
) -> DistanceMatrix:
    """Load a cached matrix for the subset, slice one cached for the full
    dataset, or compute (and cache) from scratch."""
    fp = dsub.fingerprint()
    if cache_dir is not None:
        cache_dir = Path(cache_dir)
        cache_dir.mkdir(parents=True, exist_ok=True)
        path = cache_dir / f"{fp[:16]}_{spec.key()}.tbdm"
        if path.exists():
            return load_matrix(path, expect_fingerprint=fp, expect_spec=spec)
        if full_ds is not None:
            full_fp = full_ds.fingerprint()
            full_path = cache_dir / f"{full_fp[:16]}_{spec.key()}.tbdm"
            if full_path.exists():
                full = load_matrix(full_path, expect_fingerprint=full_fp, expect_spec=spec)
                pos = {tid: i for i, tid in enumerate(full_ds.ids)}
                take = np.array([pos[tid] for tid in dsub.ids])
                values = full.values[np.ix_(take, take)].copy()
                values.setflags(write=False)
                return DistanceMatrix(values, spec, fp)
    matrix = build_matrix(dsub, spec, workers=workers)
    if cache_dir is not None:
        save_matrix(matrix, path)
    return matrix


def run_benchmark(
    ds: TrajectoryDataset,
    ref: ReferenceClusters,
    grid: SetupGrid,
    n_permutations: int = DEFAULT_PERMUTATIONS,
    seed: int = 0,
    *,
    workers: int = 1,
    cache_dir: Optional[Union[str, Path]] = None,
) -> list[PerformanceRecord]:
    """Run every setup of the grid over n permutations of the retained subset.

    Clustering happens on the permuted matrix; labels are mapped back to the
    canonical order before evaluation, so a permutation-equivariant algorithm
    yields a zero spread.  A failing setup is recorded with NaN values and the
    error message instead of aborting the sweep.
    """
    if n_permutations < 2:
        raise ValueError("need at least 2 permutations")
    retained = set(ref.retained_ids)
    if not retained:
        raise BenchmarkError("reference retains no trajectories")
    if not retained.issubset(set(ds.ids)):
        raise BenchmarkError("reference does not belong to this dataset")
    dsub = ds.subset(retained)
    ids = list(dsub.ids)
    n_obj = len(ids)

    perms = []
    for l in range(n_permutations):
        rng = np.random.default_rng(np.random.SeedSequence([seed, _PERM_STREAM, l]))
        perms.append(rng.permutation(n_obj))

    records: list[PerformanceRecord] = []
    for dspec in grid.distances:
        logger.info("distance %s: preparing matrix over %d trajectories", dspec.key(), n_obj)
        matrix = matrix_for_subset(dsub, dspec, workers=workers, cache_dir=cache_dir, full_ds=ds)
        setups = [s for s in grid.setups() if s.distance == dspec]
        for setup in setups:
            algo = replace(setup.algorithm, seed=_algo_seed(seed, setup))
            values = {m: [] for m in MEASURES}
            noise_fracs = []
            error = None
            for perm in perms:
                permuted = matrix.permuted(perm)
                try:
                    assignment = cluster_precomputed(permuted, algo, setup.cluster_count)
                    labels = np.empty(n_obj, dtype=int)
                    labels[perm] = assignment.as_array
                    measured = evaluate_all(matrix, ids, labels, ref)
                except Exception as e:  # per-setup failure: record, keep sweeping
                    if error is None:
                        error = f"{type(e).__name__}: {e}"
                    for m in MEASURES:
                        values[m].append(float("nan"))
                    noise_fracs.append(float("nan"))
                    continue
                for mv in measured:
                    values[mv.measure].append(mv.value)
                noise_fracs.append(float(np.mean(assignment.as_array == NOISE_LABEL)))
            if error is not None:
                logger.warning("setup %s failed: %s", setup.key(), error)
            noise = float(np.mean(noise_fracs))
            for m in MEASURES:
                records.append(_record(setup, m, values[m], noise, error))
    return records


# ---------------------------------------------------------------------------
# measure pruning

def prune_correlated(
    records: Sequence[PerformanceRecord],
    threshold: float = DEFAULT_CORRELATION_THRESHOLD,
    drop_priority: Sequence[str] = DEFAULT_DROP_PRIORITY,
) -> tuple[str, ...]:
    """Retain a subset of measures with no pairwise |Pearson r| above the
    threshold, computed over per-setup means.  From each offending pair the
    member appearing first in ``drop_priority`` is dropped."""
    setups = _ordered_setups(records)
    if len(setups) < 2:
        raise ValueError("correlation pruning needs at least 2 setups")
    by_key = {(r.setup, r.measure): r for r in records}
    measures = [m for m in MEASURES if any((s, m) in by_key for s in setups)]
    means = np.array([[by_key[(s, m)].mean for s in setups] for m in measures])

    complete = ~np.isnan(means).any(axis=0)
    if complete.sum() < 2:
        logger.warning("too few complete setups to assess correlations; keeping all measures")
        return tuple(measures)
    with np.errstate(invalid="ignore"):
        corr = np.corrcoef(means[:, complete])
    corr = np.nan_to_num(corr, nan=0.0)  # constant measures correlate with nothing

    retained = list(measures)
    while True:
        offending = [
            (a, b)
            for i, a in enumerate(retained)
            for b in retained[i + 1 :]
            if abs(corr[measures.index(a), measures.index(b)]) > threshold
        ]
        if not offending:
            break
        flat = {m for pair in offending for m in pair}
        for candidate in drop_priority:
            if candidate in flat:
                retained.remove(candidate)
                break
        else:  # none of the offenders is in the priority list; drop the first
            retained.remove(offending[0][0])
    return tuple(retained)


# ---------------------------------------------------------------------------
# ranking

@dataclass(frozen=True)
class RankTable:
    """Per-measure and aggregated ranks for every setup, best rank first = 1."""

    setups: tuple[ClusteringSetup, ...]
    measures: tuple[str, ...]
    ranks: dict[str, tuple[float, ...]]
    lowers: dict[str, tuple[float, ...]]
    avg_rank: tuple[float, ...]
    top: tuple[ClusteringSetup, ...]

    def top_avg_ranks(self) -> tuple[float, ...]:
        pos = {s: i for i, s in enumerate(self.setups)}
        return tuple(self.avg_rank[pos[s]] for s in self.top)


def _ordered_setups(records: Sequence[PerformanceRecord]) -> list[ClusteringSetup]:
    seen = {}
    for r in records:
        if r.setup not in seen:
            seen[r.setup] = len(seen)
    return sorted(seen, key=seen.get)


def _rank_descending(values: np.ndarray) -> np.ndarray:
    """Rank 1 for the largest value; ties averaged; NaN ranks worst."""
    keyed = np.where(np.isnan(values), -np.inf, values)
    return scipy.stats.rankdata(-keyed, method="average")


def rank_setups(
    records: Sequence[PerformanceRecord], measures: Sequence[str]
) -> RankTable:
    """Rank all setups per measure on the confidence lower bound (higher is
    better for every measure) and aggregate by the mean rank."""
    setups = _ordered_setups(records)
    by_key = {(r.setup, r.measure): r for r in records}
    ranks: dict[str, tuple[float, ...]] = {}
    lowers: dict[str, tuple[float, ...]] = {}
    for m in measures:
        missing = [s for s in setups if (s, m) not in by_key]
        if missing:
            raise ValueError(f"missing record for measure {m!r} and setup {missing[0].key()}")
        lower = np.array([by_key[(s, m)].lower for s in setups])
        ranks[m] = tuple(_rank_descending(lower).tolist())
        lowers[m] = tuple(lower.tolist())
    avg = np.mean([ranks[m] for m in measures], axis=0)
    order = sorted(range(len(setups)), key=lambda i: (avg[i], setups[i].key()))
    top = tuple(setups[i] for i in order[: min(10, len(setups))])
    if len(setups) < 10:
        logger.warning("only %d setups ranked; top list is shorter than 10", len(setups))
    return RankTable(
        setups=tuple(setups),
        measures=tuple(measures),
        ranks=ranks,
        lowers=lowers,
        avg_rank=tuple(float(v) for v in avg),
        top=top,
    )


def top_frequencies(table: RankTable) -> tuple[dict[str, float], dict[str, float]]:
    """How often each distance kind and each algorithm kind appears among the
    top-ranked setups; each histogram's proportions sum to 1."""
    top = table.top
    if not top:
        raise ValueError("rank table has no setups")
    dist_counts: dict[str, int] = {}
    algo_counts: dict[str, int] = {}
    for s in top:
        dist_counts[s.distance.kind] = dist_counts.get(s.distance.kind, 0) + 1
        algo_counts[s.algorithm.kind] = algo_counts.get(s.algorithm.kind, 0) + 1
    n = len(top)
    return (
        {k: v / n for k, v in sorted(dist_counts.items())},
        {k: v / n for k, v in sorted(algo_counts.items())},
    )


# ---------------------------------------------------------------------------
# serialization

def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_results_csv(records: Sequence[PerformanceRecord], path: Union[str, Path]) -> None:
    """Per-run values: one row per setup, permutation and measure."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["setup_id", "permutation", "measure", "value"])
        for r in records:
            for l, v in enumerate(r.values, start=1):
                writer.writerow([r.setup.key(), l, r.measure, _fmt(v)])


def write_summary_csv(records: Sequence[PerformanceRecord], path: Union[str, Path]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["setup_id", "measure", "mean", "std", "lower", "noise_fraction", "error"])
        for r in records:
            writer.writerow(
                [r.setup.key(), r.measure, _fmt(r.mean), _fmt(r.std), _fmt(r.lower),
                 _fmt(r.noise_fraction), r.error or ""]
            )


def write_rank_csv(table: RankTable, path: Union[str, Path]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["setup_id", "avg_rank"] + [f"rank_{m}" for m in table.measures])
        for i, s in enumerate(table.setups):
            row = [s.key(), _fmt(table.avg_rank[i])]
            row += [_fmt(table.ranks[m][i]) for m in table.measures]
            writer.writerow(row)


def report_dict(
    table: RankTable,
    *,
    n_permutations: int,
    seed: int,
    files: Optional[dict[str, str]] = None,
) -> dict:
    dist_freq, algo_freq = top_frequencies(table)
    top_ranks = table.top_avg_ranks()
    return {
        "retained_measures": list(table.measures),
        "n_setups": len(table.setups),
        "n_permutations": n_permutations,
        "seed": seed,
        "top_setups": [
            {
                "setup_id": s.key(),
                "distance": s.distance.key(),
                "algorithm": s.algorithm.key(),
                "cluster_count": s.cluster_count,
                "avg_rank": top_ranks[i],
            }
            for i, s in enumerate(table.top)
        ],
        "distance_frequencies": dist_freq,
        "algorithm_frequencies": algo_freq,
        "files": files or {},
    }


def write_report_json(report: dict, path: Union[str, Path]) -> None:
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
