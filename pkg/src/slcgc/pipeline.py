"""End-to-end orchestration: cube -> superpixel graph -> low-pass filter ->
contrastive training -> k-means -> evaluated cluster map.

Every run writes four artifacts into the output directory: the cluster map
(``clusters.pgm``), the evaluation report (``metrics.json``), the training
loss history (``loss.csv``) and a manifest (``manifest.json``) whose
``config`` block can be fed back via ``--config`` to reproduce the run
exactly.
"""

from __future__ import annotations

import json
import sys
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .cluster_metrics import MetricsReport, compute_metrics, kmeans
from .contrastive import TrainConfig, train
from .graph_filter import FilterConfig, laplacian_pair, low_pass_filter
from .hsi_io import (ClusterMap, load_cluster_map, load_cube,
                     load_ground_truth, save_cluster_map)
from .preprocess import normalize_bands, reduce_supervised, reduce_unsupervised
from .superpixel import backproject, build_adjacency, pixel_segmentation, project, slic

ABLATION_BLOCKS = ("ghr", "lgd", "gscl", "noise")
PIXEL_NODE_LIMIT = 100_000

# Fixed palette for the optional color rendering of cluster maps.
PALETTE = [
    (230, 25, 75), (60, 180, 75), (255, 225, 25), (0, 130, 200),
    (245, 130, 48), (145, 30, 180), (70, 240, 240), (240, 50, 230),
    (210, 245, 60), (250, 190, 212), (0, 128, 128), (220, 190, 255),
    (170, 110, 40), (255, 250, 200), (128, 0, 0), (170, 255, 195),
    (128, 128, 0), (255, 215, 180), (0, 0, 128), (128, 128, 128),
]


class PipelineError(RuntimeError):
    """A stage failure, annotated with the stage name."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage


@dataclass
class RunConfig:
    """Everything a run needs; defaults follow the preset hyperparameters
    (T=400, lr=1e-3, t=2, sigma=0.01, hidden dims 500)."""

    cube: str
    gt: str
    out: str
    epochs: int = 400
    lr: float = 1e-3
    filter_layers: int = 2
    filter_k: float = 0.5
    noise_sigma: float = 0.01
    hidden_dim: int = 500
    n_superpixels: int | None = None  # default: ceil(HW / 100)
    compactness: float = 0.1
    slic_iters: int = 10
    clusters: int | None = None  # default: ground-truth class count
    restarts: int = 10
    kmeans_iters: int = 300
    seed: int = 0
    ablate: tuple[str, ...] = ()
    reduce: str = "pca"  # "pca" | "lda"
    reduce_dim: int = 3
    laplacian: str = "selfloop"  # "selfloop" | "raw"
    activation: str = "relu"
    mapping: str = "hungarian"  # "hungarian" | "majority"
    noisy_inference: bool = False
    color: bool = False
    force: bool = False

    def __post_init__(self):
        self.ablate = tuple(sorted(set(self.ablate)))
        unknown = [a for a in self.ablate if a not in ABLATION_BLOCKS]
        if unknown:
            raise ValueError(
                f"unknown ablation block(s) {unknown}; valid: {ABLATION_BLOCKS}"
            )
        if self.reduce not in ("pca", "lda"):
            raise ValueError(f"unknown reducer '{self.reduce}'")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ablate"] = list(self.ablate)
        for key in ("cube", "gt", "out"):
            d[key] = str(d[key])
        return d


@dataclass
class RunResult:
    metrics: MetricsReport
    cluster_map: ClusterMap
    out_dir: Path
    n_nodes: int
    losses: list[float] = field(repr=False, default_factory=list)
    stage_seconds: dict = field(repr=False, default_factory=dict)


@contextmanager
def _stage(name: str, timings: dict):
    start = time.perf_counter()
    try:
        yield
    except PipelineError:
        raise
    except Exception as e:
        raise PipelineError(name, e) from e
    timings[name] = time.perf_counter() - start


def run(cfg: RunConfig) -> RunResult:
    """Execute the full pipeline and write all artifacts."""
    timings: dict[str, float] = {}
    out_dir = Path(cfg.out)

    with _stage("load", timings):
        cube = load_cube(cfg.cube)
        gt = load_ground_truth(cfg.gt)
        if (gt.height, gt.width) != (cube.height, cube.width):
            raise ValueError("cube and ground-truth dimensions differ")

    with _stage("normalize", timings):
        cube = normalize_bands(cube)

    ghr_off = "ghr" in cfg.ablate
    with _stage("segment", timings):
        if ghr_off:
            n_nodes = cube.height * cube.width
            if n_nodes > PIXEL_NODE_LIMIT:
                if not cfg.force:
                    raise ValueError(
                        f"pixel-level graph has {n_nodes} nodes "
                        f"(> {PIXEL_NODE_LIMIT}); pass --force to proceed"
                    )
                warn(f"pixel-level graph has {n_nodes} nodes; this will be slow")
            seg = pixel_segmentation(cube.height, cube.width)
        else:
            if cfg.reduce == "lda":
                reduced = reduce_supervised(cube, gt, cfg.reduce_dim)
            else:
                reduced = reduce_unsupervised(cube, cfg.reduce_dim)
            n_segments = cfg.n_superpixels
            if n_segments is None:
                n_segments = -(-cube.height * cube.width // 100)
            seg = slic(reduced, n_segments, cfg.compactness, cfg.slic_iters)

    with _stage("graph", timings):
        adjacency = build_adjacency(seg)
        x = project(cube, seg)
        n_nodes = seg.n_segments

    with _stage("filter", timings):
        t = 0 if "lgd" in cfg.ablate else cfg.filter_layers
        pair = laplacian_pair(adjacency, cfg.laplacian)
        x_t = low_pass_filter(x, pair.laplacian, FilterConfig(k=cfg.filter_k, t=t))

    losses: list[float] = []
    with _stage("train", timings):
        if "gscl" in cfg.ablate:
            z = x_t
        else:
            tcfg = TrainConfig(
                iterations=cfg.epochs, lr=cfg.lr, sigma=cfg.noise_sigma,
                seed=cfg.seed, d1=cfg.hidden_dim, d2=cfg.hidden_dim,
                activation=cfg.activation, no_noise="noise" in cfg.ablate,
                noisy_inference=cfg.noisy_inference,
            )
            a_hat = np.asarray(pair.self_loop_adjacency.todense())
            embeddings, losses, _ = train(x_t, a_hat, tcfg)
            z = embeddings.fused

    with _stage("kmeans", timings):
        m = cfg.clusters if cfg.clusters is not None else gt.num_classes
        km = kmeans(z, m, restarts=cfg.restarts, iters=cfg.kmeans_iters,
                    seed=cfg.seed)

    with _stage("backproject", timings):
        cluster_map = backproject(km.labels, seg)

    with _stage("metrics", timings):
        report = compute_metrics(cluster_map, gt, mapping_mode=cfg.mapping)

    with _stage("write", timings):
        out_dir.mkdir(parents=True, exist_ok=True)
        save_cluster_map(cluster_map, out_dir / "clusters.pgm")
        (out_dir / "metrics.json").write_text(report.to_json())
        _write_loss_csv(out_dir / "loss.csv", losses)
        if cfg.color:
            _write_color_map(out_dir / "clusters_color.ppm", cluster_map)
        manifest = {
            "version": __version__,
            "config": cfg.to_dict(),
            "n_nodes": n_nodes,
            "n_clusters": int(m),
            "effective": {
                "filter_layers": t,
                "noise_sigma": 0.0 if "noise" in cfg.ablate else cfg.noise_sigma,
                "trained": "gscl" not in cfg.ablate,
                "pixel_graph": ghr_off,
            },
            "stage_seconds": timings,
        }
        (out_dir / "manifest.json").write_text(
            json.dumps(manifest, sort_keys=True, indent=2) + "\n"
        )

    return RunResult(metrics=report, cluster_map=cluster_map, out_dir=out_dir,
                     n_nodes=n_nodes, losses=losses, stage_seconds=timings)


def evaluate(pred_path, gt_path, mapping: str = "hungarian") -> MetricsReport:
    """Standalone scoring of an externally produced cluster map."""
    pred = load_cluster_map(pred_path)
    gt = load_ground_truth(gt_path)
    return compute_metrics(pred, gt, mapping_mode=mapping)


def _write_loss_csv(path: Path, losses: list[float]) -> None:
    lines = ["iteration,loss"]
    lines.extend(f"{i},{v!r}" for i, v in enumerate(losses))
    path.write_text("\n".join(lines) + "\n")


def _write_color_map(path: Path, cmap: ClusterMap) -> None:
    h, w = cmap.height, cmap.width
    rgb = np.zeros((h, w, 3), dtype=np.uint8)
    for label in np.unique(cmap.labels):
        if label < 0:
            continue  # sentinel renders black
        rgb[cmap.labels == label] = PALETTE[int(label) % len(PALETTE)]
    header = f"P6\n{w} {h}\n255\n".encode("ascii")
    path.write_bytes(header + rgb.tobytes())


def warn(message: str) -> None:
    print(f"warning: {message}", file=sys.stderr)
