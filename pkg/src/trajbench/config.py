"""Run configuration: a YAML file mirroring every pipeline knob, with CLI
flag overrides applied on top."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Union

import yaml

from .bench import SetupGrid, default_algorithms, default_distances
from .core import (
    MAX_CLUSTER_COUNT,
    MIN_CLUSTER_COUNT,
    AlgorithmSpec,
    DistanceSpec,
)
from .errors import ConfigError
from .ingest import ColumnMapping, SiteBoundary
from .reference import (
    DEFAULT_ENDPOINT_ALGORITHM,
    DEFAULT_K_MAX,
    DEFAULT_K_MIN,
    DEFAULT_MIN_SHARE,
)


@dataclass(frozen=True)
class ReferenceConfig:
    k_min: int = DEFAULT_K_MIN
    k_max: int = DEFAULT_K_MAX
    k_origin: Optional[int] = None
    k_destination: Optional[int] = None
    min_share: float = DEFAULT_MIN_SHARE
    replications: int = 10
    algorithm: AlgorithmSpec = DEFAULT_ENDPOINT_ALGORITHM


@dataclass(frozen=True)
class RunConfig:
    data_path: Path
    mapping: ColumnMapping = ColumnMapping()
    site_id: str = ""
    boundary: Optional[SiteBoundary] = None
    grid: SetupGrid = field(default_factory=SetupGrid.default)
    reference: ReferenceConfig = ReferenceConfig()
    permutations: int = 10
    seed: int = 0
    workers: int = 1
    out_dir: Path = Path("out")
    cache_dir: Path = Path("cache")
    plots: bool = True


def _spec_from_dict(d: dict) -> DistanceSpec:
    try:
        return DistanceSpec(**d)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"bad distance spec {d}: {e}") from e


def _algo_from_dict(d: dict) -> AlgorithmSpec:
    try:
        return AlgorithmSpec(**d)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"bad algorithm spec {d}: {e}") from e


def _grid_from_dict(d: dict) -> SetupGrid:
    distances = (
        tuple(_spec_from_dict(item) for item in d["distances"])
        if d.get("distances")
        else default_distances()
    )
    algorithms = (
        tuple(_algo_from_dict(item) for item in d["algorithms"])
        if d.get("algorithms")
        else default_algorithms()
    )
    k_min = int(d.get("k_min", MIN_CLUSTER_COUNT))
    k_max = int(d.get("k_max", MAX_CLUSTER_COUNT))
    if not MIN_CLUSTER_COUNT <= k_min <= k_max <= MAX_CLUSTER_COUNT:
        raise ConfigError(
            f"grid k range must lie within [{MIN_CLUSTER_COUNT}, {MAX_CLUSTER_COUNT}]"
        )
    try:
        return SetupGrid(distances, algorithms, tuple(range(k_min, k_max + 1)))
    except ValueError as e:
        raise ConfigError(str(e)) from e


def _boundary_from_dict(d: dict) -> SiteBoundary:
    try:
        if "rect" in d:
            return SiteBoundary(rect=tuple(float(v) for v in d["rect"]))
        if "polygon" in d:
            return SiteBoundary(polygon=tuple((float(x), float(y)) for x, y in d["polygon"]))
    except (TypeError, ValueError) as e:
        raise ConfigError(f"bad boundary: {e}") from e
    raise ConfigError("boundary must define 'rect' or 'polygon'")


def load_config(path: Union[str, Path]) -> RunConfig:
    """Parse and validate a YAML run configuration."""
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"config {path} is not valid YAML: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must be a mapping")

    ds = raw.get("dataset")
    if not isinstance(ds, dict) or "path" not in ds:
        raise ConfigError("config needs a 'dataset' section with a 'path'")
    mapping_kwargs = {
        k: ds[k]
        for k in (
            "id_column", "t_column", "x_column", "y_column",
            "position_scale", "time_scale", "delimiter",
        )
        if k in ds
    }
    try:
        mapping = ColumnMapping(**mapping_kwargs)
    except ValueError as e:
        raise ConfigError(f"bad column mapping: {e}") from e

    ref_raw = raw.get("reference", {}) or {}
    ref = ReferenceConfig(
        k_min=int(ref_raw.get("k_min", DEFAULT_K_MIN)),
        k_max=int(ref_raw.get("k_max", DEFAULT_K_MAX)),
        k_origin=ref_raw.get("k_origin"),
        k_destination=ref_raw.get("k_destination"),
        min_share=float(ref_raw.get("min_share", DEFAULT_MIN_SHARE)),
        replications=int(ref_raw.get("replications", 10)),
        algorithm=(
            _algo_from_dict(ref_raw["algorithm"])
            if "algorithm" in ref_raw
            else DEFAULT_ENDPOINT_ALGORITHM
        ),
    )

    base = path.parent
    data_path = Path(ds["path"])
    if not data_path.is_absolute():
        data_path = base / data_path

    def _resolve(p: str) -> Path:
        q = Path(p)
        return q if q.is_absolute() else base / q

    return RunConfig(
        data_path=data_path,
        mapping=mapping,
        site_id=str(raw.get("site_id", "")),
        boundary=_boundary_from_dict(raw["boundary"]) if raw.get("boundary") else None,
        grid=_grid_from_dict(raw.get("grid", {}) or {}),
        reference=ref,
        permutations=int(raw.get("permutations", 10)),
        seed=int(raw.get("seed", 0)),
        workers=int(raw.get("workers", 1)),
        out_dir=_resolve(str(raw.get("out_dir", "out"))),
        cache_dir=_resolve(str(raw.get("cache_dir", "cache"))),
        plots=bool(raw.get("plots", True)),
    )


def apply_overrides(config: RunConfig, **overrides) -> RunConfig:
    """Apply non-None CLI flag values over the loaded configuration."""
    fields = {}
    simple = ("permutations", "seed", "workers")
    for name in simple:
        if overrides.get(name) is not None:
            fields[name] = overrides[name]
    if overrides.get("out_dir") is not None:
        fields["out_dir"] = Path(overrides["out_dir"])
    if overrides.get("cache_dir") is not None:
        fields["cache_dir"] = Path(overrides["cache_dir"])
    ref_fields = {}
    for name in ("k_origin", "k_destination", "min_share"):
        if overrides.get(name) is not None:
            ref_fields[name] = overrides[name]
    if ref_fields:
        fields["reference"] = replace(config.reference, **ref_fields)
    return replace(config, **fields) if fields else config
