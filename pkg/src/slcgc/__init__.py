"""Self-supervised hyperspectral-image clustering.

Pipeline: spectral cube -> superpixel graph -> low-pass graph denoising ->
two-branch contrastive MLP embedding -> k-means -> evaluated cluster map.
"""

__version__ = "0.1.0"

from .cluster_metrics import (KmeansResult, MetricsReport, compute_metrics,
                              hungarian_map, kmeans, majority_map)
from .contrastive import (Embeddings, EncoderState, MlpBranch, TrainConfig,
                          encode, fuse, inject_noise, loss, similarity, train)
from .graph_filter import (FilterConfig, LaplacianPair, laplacian_pair,
                           low_pass_filter, rayleigh, self_loop,
                           sym_norm_laplacian)
from .hsi_io import (SENTINEL, ClusterMap, GroundTruth, HsiCube,
                     load_cluster_map, load_cube, load_ground_truth,
                     save_cluster_map, save_cube, save_ground_truth)
from .pipeline import PipelineError, RunConfig, RunResult, evaluate, run
from .preprocess import (ReducedImage, normalize_bands, reduce_supervised,
                         reduce_unsupervised)
from .superpixel import (Graph, Segmentation, backproject, build_adjacency,
                         correlation_matrix, pixel_segmentation, project,
                         slic)

__all__ = [
    "SENTINEL", "ClusterMap", "Embeddings", "EncoderState", "FilterConfig",
    "Graph", "GroundTruth", "HsiCube", "KmeansResult", "LaplacianPair",
    "MetricsReport", "MlpBranch", "PipelineError", "ReducedImage",
    "RunConfig", "RunResult", "Segmentation", "TrainConfig", "backproject",
    "build_adjacency", "compute_metrics", "correlation_matrix", "encode",
    "evaluate", "fuse", "hungarian_map", "inject_noise", "kmeans",
    "laplacian_pair", "load_cluster_map", "load_cube", "load_ground_truth",
    "loss", "low_pass_filter", "majority_map", "normalize_bands",
    "pixel_segmentation", "project", "rayleigh", "reduce_supervised",
    "reduce_unsupervised", "run", "save_cluster_map", "save_cube",
    "save_ground_truth", "self_loop", "similarity", "slic",
    "sym_norm_laplacian", "train",
]
