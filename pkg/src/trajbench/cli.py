"""Command-line pipeline: ingest -> distmat -> refclusters -> benchmark.

Each stage writes its artifacts under the configured output directory and the
later stages pick them up, so expensive intermediates (above all the distance
matrices) are computed once.  Exit codes: 0 success, 1 usage or configuration
error, 2 data error, 3 systemic benchmark failure.
"""

from __future__ import annotations

import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from . import bench as bench_mod
from . import report as report_mod
from .config import RunConfig, apply_overrides, load_config
from .core import validate_dataset
from .errors import BenchmarkError, ConfigError, DataError, TrajbenchError
from .ingest import clip_to_boundary, load_csv, write_canonical_csv
from .reference import (
    build_reference,
    endpoint_elbow,
    pick_elbow,
    read_reference_csv,
    write_elbow_csv,
    write_reference_csv,
)
from .synthetic import make_intersection

logger = logging.getLogger(__name__)

_CANONICAL_NAME = "canonical.csv"
_REFERENCE_NAME = "reference.csv"


def _config_options(fn):
    fn = click.option("--config", "config_path", required=True,
                      type=click.Path(exists=False), help="YAML run configuration.")(fn)
    fn = click.option("--out", "out_dir", type=click.Path(), default=None,
                      help="Output directory (overrides config).")(fn)
    return fn


@click.group()
@click.option("--verbose", is_flag=True, help="Debug-level logging.")
def cli(verbose: bool) -> None:
    """Trajectory clustering evaluation pipeline."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )


def _load(config_path: str, **overrides) -> RunConfig:
    cfg = load_config(config_path)
    return apply_overrides(cfg, **overrides)


def _canonical_dataset(cfg: RunConfig):
    """The ingested, clipped dataset: from the cached canonical file when
    present, otherwise rebuilt from the raw input."""
    canonical = cfg.out_dir / _CANONICAL_NAME
    if canonical.exists():
        return load_csv(canonical, site_id=cfg.site_id)
    ds = load_csv(cfg.data_path, cfg.mapping, site_id=cfg.site_id)
    if cfg.boundary is not None:
        ds = clip_to_boundary(ds, cfg.boundary)
    return ds


@cli.command()
@_config_options
def ingest(config_path: str, out_dir) -> None:
    """Load, validate and clip the dataset; write the canonical file."""
    cfg = _load(config_path, out_dir=out_dir)
    ds = load_csv(cfg.data_path, cfg.mapping, site_id=cfg.site_id)
    if cfg.boundary is not None:
        ds = clip_to_boundary(ds, cfg.boundary)
    if len(ds) == 0:
        raise DataError("empty dataset after clipping")
    violations = validate_dataset(ds)
    if violations:
        raise DataError("dataset invariants violated: " + "; ".join(map(str, violations)))

    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    write_canonical_csv(ds, cfg.out_dir / _CANONICAL_NAME)
    lengths = [len(t) for t in ds.trajectories]
    summary = {
        "site_id": cfg.site_id,
        "trajectories": len(ds),
        "points_min": int(min(lengths)),
        "points_median": float(np.median(lengths)),
        "points_max": int(max(lengths)),
        "fingerprint": ds.fingerprint(),
    }
    with open(cfg.out_dir / "dataset_summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    click.echo(f"ingested {len(ds)} trajectories -> {cfg.out_dir / _CANONICAL_NAME}")
    click.echo(json.dumps(summary, indent=2, sort_keys=True))


@cli.command()
@_config_options
@click.option("--workers", type=int, default=None, help="Parallel workers for matrix builds.")
@click.option("--cache", "cache_dir", type=click.Path(), default=None,
              help="Matrix cache directory (overrides config).")
@click.option("--distance", "distance_key", default=None,
              help="Build only the named distance, e.g. 'lcss[r=2]'.")
def distmat(config_path: str, out_dir, workers, cache_dir, distance_key) -> None:
    """Build or refresh the distance-matrix cache for every grid distance."""
    cfg = _load(config_path, out_dir=out_dir, workers=workers, cache_dir=cache_dir)
    ds = _canonical_dataset(cfg)
    if len(ds) == 0:
        raise DataError("dataset is empty")
    specs = cfg.grid.distances
    if distance_key is not None:
        specs = tuple(s for s in specs if s.key() == distance_key)
        if not specs:
            known = ", ".join(s.key() for s in cfg.grid.distances)
            raise ConfigError(f"no grid distance named {distance_key!r} (grid has: {known})")
    cfg.cache_dir.mkdir(parents=True, exist_ok=True)
    fp = ds.fingerprint()
    for spec in specs:
        path = cfg.cache_dir / f"{fp[:16]}_{spec.key()}.tbdm"
        if path.exists():
            click.echo(f"{spec.key()}: cache hit ({path.name})")
            continue
        matrix = bench_mod.build_matrix(ds, spec, workers=cfg.workers)
        bench_mod.save_matrix(matrix, path)
        click.echo(f"{spec.key()}: computed ({path.name})")


@cli.command()
@_config_options
@click.option("--k-origin", type=int, default=None, help="Manual origin cluster count.")
@click.option("--k-destination", type=int, default=None, help="Manual destination cluster count.")
@click.option("--epsilon", "min_share", type=float, default=None,
              help="Minimum share of trajectories per retained OD pair.")
def refclusters(config_path: str, out_dir, k_origin, k_destination, min_share) -> None:
    """Derive reference clusters from trajectory origins and destinations."""
    cfg = _load(config_path, out_dir=out_dir, k_origin=k_origin,
                k_destination=k_destination, min_share=min_share)
    ds = _canonical_dataset(cfg)
    if len(ds) == 0:
        raise DataError("dataset is empty")
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    ref = _build_reference(cfg, ds, write_curves=True)
    write_reference_csv(ref, cfg.out_dir / _REFERENCE_NAME)
    click.echo(
        f"reference: k_origin={ref.k_origin} k_destination={ref.k_destination} "
        f"-> {ref.n_reference_clusters} retained clusters covering "
        f"{len(ref.retained_ids)}/{len(ds)} trajectories"
    )


def _build_reference(cfg: RunConfig, ds, *, write_curves: bool):
    rc = cfg.reference
    origins = np.array([(t.points[0].x, t.points[0].y) for t in ds.trajectories])
    dests = np.array([(t.points[-1].x, t.points[-1].y) for t in ds.trajectories])
    k_o, k_d = rc.k_origin, rc.k_destination
    for which, points, chosen in (("origins", origins, k_o), ("destinations", dests, k_d)):
        if chosen is not None and not write_curves:
            continue
        k_max = min(rc.k_max, len(points))
        curve = endpoint_elbow(points, rc.k_min, k_max, rc.algorithm, rc.replications)
        picked = pick_elbow(curve, override=chosen)
        if write_curves:
            write_elbow_csv(curve, cfg.out_dir / f"elbow_{which}.csv")
            if cfg.plots:
                report_mod.save_elbow_figure(
                    curve, cfg.out_dir / f"elbow_{which}.png",
                    chosen_k=picked, title=f"{which}: within-cluster average distance",
                )
        if which == "origins":
            k_o = picked
        else:
            k_d = picked
    return build_reference(ds, k_o, k_d, rc.algorithm, rc.min_share)


@cli.command()
@_config_options
@click.option("--permutations", type=int, default=None, help="Dataset permutations per setup.")
@click.option("--seed", type=int, default=None, help="Master seed.")
@click.option("--workers", type=int, default=None, help="Parallel workers for matrix builds.")
@click.option("--cache", "cache_dir", type=click.Path(), default=None,
              help="Matrix cache directory (overrides config).")
@click.option("--plots/--no-plots", "plots", default=None,
              help="Render report figures (default: per config).")
def benchmark(config_path: str, out_dir, permutations, seed, workers, cache_dir, plots) -> None:
    """Run the full setup sweep and write result, summary, rank and report files."""
    cfg = _load(config_path, out_dir=out_dir, permutations=permutations,
                seed=seed, workers=workers, cache_dir=cache_dir)
    if plots is not None:
        cfg = replace(cfg, plots=plots)
    ds = _canonical_dataset(cfg)
    if len(ds) == 0:
        raise DataError("dataset is empty")
    cfg.out_dir.mkdir(parents=True, exist_ok=True)

    ref_path = cfg.out_dir / _REFERENCE_NAME
    if ref_path.exists():
        ref = read_reference_csv(ref_path)
    else:
        logger.info("no reference file found; deriving reference clusters first")
        ref = _build_reference(cfg, ds, write_curves=False)
        write_reference_csv(ref, ref_path)

    try:
        records = bench_mod.run_benchmark(
            ds, ref, cfg.grid, cfg.permutations, cfg.seed,
            workers=cfg.workers, cache_dir=cfg.cache_dir,
        )
    except BenchmarkError:
        raise
    except Exception as e:
        raise BenchmarkError(f"benchmark sweep failed: {e}") from e
    if all(r.error is not None for r in records):
        raise BenchmarkError("every setup failed; see the summary for details")

    retained = bench_mod.prune_correlated(records)
    table = bench_mod.rank_setups(records, retained)

    files = {
        "results": "results.csv",
        "summary": "summary.csv",
        "ranks": "ranks.csv",
    }
    bench_mod.write_results_csv(records, cfg.out_dir / files["results"])
    bench_mod.write_summary_csv(records, cfg.out_dir / files["summary"])
    bench_mod.write_rank_csv(table, cfg.out_dir / files["ranks"])

    if cfg.plots:
        fig_dir = cfg.out_dir / "figures"
        fig_dir.mkdir(exist_ok=True)
        report_mod.save_frequency_figure(table, fig_dir / "top_frequencies.png")
        files["figure_top_frequencies"] = "figures/top_frequencies.png"
        for dspec in cfg.grid.distances:
            if any(r.setup.distance == dspec and r.setup.cluster_count is not None
                   for r in records):
                name = f"figures/measures_{dspec.key()}.png"
                report_mod.save_measure_curves(records, dspec, cfg.out_dir / name)
                files[f"figure_measures_{dspec.key()}"] = name

    report = bench_mod.report_dict(
        table, n_permutations=cfg.permutations, seed=cfg.seed, files=files,
    )
    bench_mod.write_report_json(report, cfg.out_dir / "report.json")
    click.echo(f"ranked {len(table.setups)} setups over measures: {', '.join(retained)}")
    for i, entry in enumerate(report["top_setups"], start=1):
        click.echo(f"  {i:2d}. {entry['setup_id']} (avg rank {entry['avg_rank']:.2f})")
    click.echo(f"report written to {cfg.out_dir / 'report.json'}")


@cli.command()
@click.option("--out", "out_path", required=True, type=click.Path(), help="Output CSV path.")
@click.option("--n", "n_trajectories", type=int, default=400, show_default=True)
@click.option("--noise", type=float, default=0.5, show_default=True,
              help="Lateral noise std in meters.")
@click.option("--seed", type=int, default=0, show_default=True)
def synth(out_path: str, n_trajectories: int, noise: float, seed: int) -> None:
    """Generate a synthetic four-arm intersection dataset with planted movements."""
    ds, planted = make_intersection(
        n_trajectories=n_trajectories, lateral_noise=noise, seed=seed
    )
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_canonical_csv(ds, out)
    movements_path = out.with_name(out.stem + "_movements.csv")
    with open(movements_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["track_id", "movement"])
        for tid, move in planted.items():
            writer.writerow([tid, move])
    click.echo(f"wrote {len(ds)} trajectories to {out} (movements in {movements_path})")


def main(argv=None) -> None:
    try:
        cli(args=argv, standalone_mode=False)
    except click.exceptions.Exit as e:
        sys.exit(e.exit_code)
    except click.exceptions.Abort:
        sys.exit(1)
    except click.ClickException as e:
        e.show()
        sys.exit(1)
    except ConfigError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(1)
    except DataError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(2)
    except BenchmarkError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(3)
    except TrajbenchError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(1)
    except ValueError as e:  # parameter validation raised inside the library
        click.echo(f"error: {e}", err=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
