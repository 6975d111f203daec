"""Trajectory clustering evaluation toolkit.

Computes pairwise trajectory distances, clusters the distance matrices with
several algorithms, derives weak-supervision reference clusters from the
trajectories' origins and destinations, and ranks every clustering setup by
a combination of unsupervised and reference-based performance measures.
"""

from .core import (
    NOISE_LABEL,
    AlgorithmSpec,
    ClusterAssignment,
    ClusteringSetup,
    DistanceSpec,
    Point,
    Trajectory,
    TrajectoryDataset,
    destination,
    origin,
    validate_dataset,
)
from .distance import (
    DistanceMatrix,
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
from .cluster import (
    agglomerative,
    cluster_precomputed,
    dbscan,
    kmedoids,
    optics,
    run_setup,
    spectral,
)
from .reference import (
    ElbowCurve,
    ReferenceClusters,
    build_reference,
    endpoint_elbow,
    pick_elbow,
)
from .metrics import (
    MEASURES,
    ContingencyTable,
    MeasureValue,
    ami,
    ari,
    entropy,
    evaluate_all,
    fmi,
    homogeneity_completeness_v,
    silhouette,
    silhouette_values,
)
from .bench import (
    PerformanceRecord,
    RankTable,
    SetupGrid,
    lower_bound,
    prune_correlated,
    rank_setups,
    run_benchmark,
    top_frequencies,
)
from .ingest import ColumnMapping, SiteBoundary, clip_to_boundary, load_csv

__version__ = "0.1.0"
