import csv
import json

import numpy as np
import pytest

from trajbench.cli import main
from trajbench.ingest import load_csv


def run_cli(args):
    """Invoke the CLI entry point, returning its exit code."""
    try:
        main(args)
    except SystemExit as e:
        return e.code or 0
    return 0


@pytest.fixture
def workspace(tmp_path):
    """A tiny synthetic site plus a matching config file."""
    data = tmp_path / "tracks.csv"
    rng = np.random.default_rng(7)
    rows = ["track_id,t,x,y"]
    idx = 0
    for (ox, oy), (dx, dy) in [((0, 0), (60, 0)), ((0, 0), (60, 30)),
                               ((0, 30), (60, 0)), ((0, 30), (60, 30))]:
        for _ in range(6):
            o = np.array([ox, oy]) + rng.normal(0, 0.3, 2)
            d = np.array([dx, dy]) + rng.normal(0, 0.3, 2)
            for j, frac in enumerate(np.linspace(0, 1, 5)):
                p = o + frac * (d - o) + rng.normal(0, 0.2, 2)
                rows.append(f"t{idx},{j},{p[0]:.3f},{p[1]:.3f}")
            idx += 1
    data.write_text("\n".join(rows) + "\n")

    cfg = tmp_path / "run.yaml"
    cfg.write_text(
        f"""
site_id: tiny
dataset:
  path: tracks.csv
grid:
  distances:
    - kind: hausdorff
  algorithms:
    - kind: agglomerative
      linkage: average
  k_min: 2
  k_max: 4
reference:
  k_origin: 2
  k_destination: 2
  k_max: 8
permutations: 2
seed: 3
out_dir: out
cache_dir: cache
plots: true
"""
    )
    return tmp_path, cfg


class TestPipeline:
    def test_ingest(self, workspace, capsys):
        root, cfg = workspace
        assert run_cli(["ingest", "--config", str(cfg)]) == 0
        assert (root / "out" / "canonical.csv").exists()
        summary = json.loads((root / "out" / "dataset_summary.json").read_text())
        assert summary["trajectories"] == 24
        assert "ingested 24 trajectories" in capsys.readouterr().out

    def test_distmat_cache_hit(self, workspace, capsys):
        root, cfg = workspace
        run_cli(["ingest", "--config", str(cfg)])
        assert run_cli(["distmat", "--config", str(cfg)]) == 0
        out1 = capsys.readouterr().out
        assert "computed" in out1
        assert run_cli(["distmat", "--config", str(cfg)]) == 0
        assert "cache hit" in capsys.readouterr().out
        assert len(list((root / "cache").glob("*.tbdm"))) == 1

    def test_refclusters(self, workspace, capsys):
        root, cfg = workspace
        run_cli(["ingest", "--config", str(cfg)])
        assert run_cli(["refclusters", "--config", str(cfg)]) == 0
        assert (root / "out" / "reference.csv").exists()
        assert (root / "out" / "elbow_origins.csv").exists()
        assert (root / "out" / "elbow_origins.png").exists()
        out = capsys.readouterr().out
        assert "k_origin=2 k_destination=2" in out
        assert "4 retained clusters" in out

    def test_benchmark_outputs(self, workspace):
        root, cfg = workspace
        run_cli(["ingest", "--config", str(cfg)])
        run_cli(["refclusters", "--config", str(cfg)])
        assert run_cli(["benchmark", "--config", str(cfg)]) == 0
        report = json.loads((root / "out" / "report.json").read_text())
        assert len(report["top_setups"]) <= 10
        assert report["distance_frequencies"]
        assert report["algorithm_frequencies"]
        for rel in report["files"].values():
            assert (root / "out" / rel).exists(), rel
        with open(root / "out" / "results.csv") as fh:
            rows = list(csv.DictReader(fh))
        # 3 setups x 7 measures x 2 permutations
        assert len(rows) == 3 * 7 * 2

    def test_benchmark_rerun_identical(self, workspace):
        root, cfg = workspace
        run_cli(["ingest", "--config", str(cfg)])
        run_cli(["refclusters", "--config", str(cfg)])
        run_cli(["benchmark", "--config", str(cfg)])
        first = (root / "out" / "results.csv").read_bytes()
        run_cli(["benchmark", "--config", str(cfg)])
        assert (root / "out" / "results.csv").read_bytes() == first

    def test_distance_filter(self, workspace, capsys):
        root, cfg = workspace
        run_cli(["ingest", "--config", str(cfg)])
        assert run_cli(["distmat", "--config", str(cfg), "--distance", "hausdorff"]) == 0
        assert "hausdorff" in capsys.readouterr().out
        assert run_cli(["distmat", "--config", str(cfg), "--distance", "nope"]) == 1

    def test_default_grid_yields_21_caches(self, tmp_path):
        data = tmp_path / "d.csv"
        rows = ["track_id,t,x,y"]
        for i in range(8):
            for j in range(4):
                rows.append(f"t{i},{j},{j * 10 + i * 0.1:.2f},{(i % 2) * 30}")
        data.write_text("\n".join(rows) + "\n")
        cfg = tmp_path / "run.yaml"
        cfg.write_text(
            "dataset:\n  path: d.csv\n"
            "grid:\n  algorithms:\n    - kind: agglomerative\n      linkage: average\n"
            "out_dir: out\ncache_dir: cache\n"
        )
        assert run_cli(["distmat", "--config", str(cfg)]) == 0
        assert len(list((tmp_path / "cache").glob("*.tbdm"))) == 21

    def test_k_override_flags(self, workspace, capsys):
        root, cfg = workspace
        run_cli(["ingest", "--config", str(cfg)])
        code = run_cli([
            "refclusters", "--config", str(cfg),
            "--k-origin", "3", "--k-destination", "2", "--epsilon", "0.0",
        ])
        assert code == 0
        assert "k_origin=3" in capsys.readouterr().out


class TestErrors:
    def test_missing_config(self, tmp_path):
        assert run_cli(["ingest", "--config", str(tmp_path / "nope.yaml")]) == 1

    def test_bad_config(self, tmp_path):
        cfg = tmp_path / "bad.yaml"
        cfg.write_text("dataset: {}\n")
        assert run_cli(["ingest", "--config", str(cfg)]) == 1

    def test_missing_column(self, tmp_path):
        (tmp_path / "d.csv").write_text("track_id,t,x\na,0,0\n")
        cfg = tmp_path / "run.yaml"
        cfg.write_text("dataset:\n  path: d.csv\n")
        assert run_cli(["ingest", "--config", str(cfg)]) == 2

    def test_boundary_excludes_everything(self, tmp_path):
        (tmp_path / "d.csv").write_text(
            "track_id,t,x,y\na,0,0,0\na,1,1,0\nb,0,5,5\nb,1,6,5\n"
        )
        cfg = tmp_path / "run.yaml"
        cfg.write_text(
            "dataset:\n  path: d.csv\nboundary:\n  rect: [100, 100, 200, 200]\n"
        )
        assert run_cli(["ingest", "--config", str(cfg)]) == 2

    def test_usage_error(self):
        assert run_cli(["ingest"]) == 1  # missing --config


class TestSynth:
    def test_writes_dataset_and_movements(self, tmp_path):
        out = tmp_path / "synth.csv"
        assert run_cli(["synth", "--out", str(out), "--n", "40", "--seed", "1"]) == 0
        ds = load_csv(out)
        assert len(ds) == 40
        with open(tmp_path / "synth_movements.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 40
        assert {r["movement"] for r in rows} == {str(i) for i in range(8)}
