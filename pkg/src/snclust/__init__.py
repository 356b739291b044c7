"""Semi-supervised hierarchical clustering over precomputed embeddings.

The package clusters a partially labelled feature set bottom-up from the
connected components of a per-cluster neighbor graph, merges clusters
one-to-one under label constraints, estimates the number of classes with
a joint labelled/unlabelled reference score, and evaluates assignments
with Hungarian-matched accuracy, purity, silhouette, and contrastive
losses. Everything operates on in-memory numpy arrays; the CLI adds file
formats and figures on top.
"""

from .baselines import finch, kmeans, semi_kmeans
from .data import (
    FeatureMatrix,
    GcdDataset,
    LabelledSplit,
    l2_normalize,
    load_features,
    load_labels,
    remap_labels,
    save_features,
    save_labels,
    split_labelled,
)
from .errors import ConstraintError, DataFormatError, SnclustError
from .estimate import (
    EstimateConfig,
    KEstimate,
    ReferenceScore,
    assign_labels,
    estimate_k,
    reference_components,
)
from .graph import NeighborGraph, UnionFind, build_adjacency, connected_components
from .losses import (
    Batch,
    LossConfig,
    PositiveSets,
    build_positive_sets,
    refresh_pseudo,
    sup_con_loss,
    total_loss,
    unified_loss,
)
from .merge import MergeTrace, MergeView, find_start_level, one_to_one_merge
from .metrics import AccReport, clustering_accuracy, hungarian, purity, silhouette
from .snc import (
    ChainConfig,
    Cluster,
    Hierarchy,
    OverclusterWarning,
    Partition,
    SelectiveNeighborMap,
    chain_length,
    cluster_label,
    pseudo_labels,
    run_snc,
    select_neighbors,
    snc_step,
)
from .synth import BlobDataset, gen_blobs

__version__ = "0.1.0"

__all__ = [
    "AccReport",
    "Batch",
    "BlobDataset",
    "ChainConfig",
    "Cluster",
    "ConstraintError",
    "DataFormatError",
    "EstimateConfig",
    "FeatureMatrix",
    "GcdDataset",
    "Hierarchy",
    "KEstimate",
    "LabelledSplit",
    "LossConfig",
    "MergeTrace",
    "MergeView",
    "NeighborGraph",
    "OverclusterWarning",
    "Partition",
    "PositiveSets",
    "ReferenceScore",
    "SelectiveNeighborMap",
    "SnclustError",
    "UnionFind",
    "assign_labels",
    "build_adjacency",
    "build_positive_sets",
    "chain_length",
    "cluster_label",
    "clustering_accuracy",
    "connected_components",
    "estimate_k",
    "finch",
    "find_start_level",
    "gen_blobs",
    "hungarian",
    "kmeans",
    "l2_normalize",
    "load_features",
    "load_labels",
    "one_to_one_merge",
    "pseudo_labels",
    "purity",
    "refresh_pseudo",
    "remap_labels",
    "run_snc",
    "save_features",
    "save_labels",
    "select_neighbors",
    "semi_kmeans",
    "silhouette",
    "snc_step",
    "split_labelled",
    "sup_con_loss",
    "total_loss",
    "unified_loss",
]
