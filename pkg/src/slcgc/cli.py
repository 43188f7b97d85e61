"""Command-line entry point.

Two subcommands:

    slcgc run  --cube c.json --gt g.json --out dir [hyperparameter flags]
    slcgc eval --pred p.pgm --gt g.json

``run`` accepts ``--config file.json`` holding any subset of the run
options; explicit flags always override the file. The ``config`` block of
a previous run's manifest is itself a valid config file, so a run can be
reproduced with ``slcgc run --config manifest_config.json``.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .pipeline import (ABLATION_BLOCKS, PipelineError, RunConfig, evaluate,
                       run)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slcgc",
        description="Self-supervised hyperspectral-image clustering: "
        "superpixel graph, low-pass denoising, contrastive embedding, k-means.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute the full pipeline")
    p_run.add_argument("--config", help="JSON file with run options "
                       "(flags override it)")
    p_run.add_argument("--cube", help="cube header path (.json)")
    p_run.add_argument("--gt", help="ground-truth header path (.json)")
    p_run.add_argument("--out", help="output directory")
    p_run.add_argument("--epochs", type=int, help="training iterations "
                       "(default 400)")
    p_run.add_argument("--lr", type=float, help="Adam learning rate "
                       "(default 1e-3)")
    p_run.add_argument("--filter-layers", type=int,
                       help="low-pass filter stack depth t (default 2)")
    p_run.add_argument("--filter-k", type=float,
                       help="filter coefficient k (default 0.5)")
    p_run.add_argument("--noise-sigma", type=float,
                       help="Gaussian perturbation scale (default 0.01)")
    p_run.add_argument("--hidden-dim", type=int,
                       help="MLP layer width d1=d2 (default 500)")
    p_run.add_argument("--n-superpixels", type=int,
                       help="target superpixel count (default: pixels/100)")
    p_run.add_argument("--compactness", type=float,
                       help="SLIC spatial weight (default 0.1)")
    p_run.add_argument("--slic-iters", type=int,
                       help="SLIC refinement iterations (default 10)")
    p_run.add_argument("--clusters", type=int,
                       help="cluster count m (default: ground-truth classes)")
    p_run.add_argument("--restarts", type=int,
                       help="k-means restarts (default 10)")
    p_run.add_argument("--kmeans-iters", type=int,
                       help="Lloyd iteration cap per restart (default 300)")
    p_run.add_argument("--seed", type=int, help="master seed (default 0)")
    p_run.add_argument("--ablate",
                       help="comma-separated blocks to disable: "
                       + ",".join(ABLATION_BLOCKS))
    p_run.add_argument("--reduce", choices=["pca", "lda"],
                       help="band reducer for SLIC input (default pca)")
    p_run.add_argument("--reduce-dim", type=int,
                       help="reduced band count (default 3)")
    p_run.add_argument("--laplacian", choices=["selfloop", "raw"],
                       help="normalize A+I (default) or A directly")
    p_run.add_argument("--activation", choices=["relu", "none"],
                       help="MLP hidden activation (default relu)")
    p_run.add_argument("--mapping", choices=["hungarian", "majority"],
                       help="cluster-to-class mapping for metrics")
    p_run.add_argument("--noisy-inference", action="store_true", default=None,
                       help="perturb the final branch-1 view as well")
    p_run.add_argument("--color", action="store_true", default=None,
                       help="also write clusters_color.ppm")
    p_run.add_argument("--force", action="store_true", default=None,
                       help="allow pixel-level graphs above the node limit")

    p_eval = sub.add_parser("eval", help="score an existing cluster map")
    p_eval.add_argument("--pred", required=True, help="cluster map (.pgm)")
    p_eval.add_argument("--gt", required=True, help="ground-truth header "
                        "path (.json)")
    p_eval.add_argument("--mapping", choices=["hungarian", "majority"],
                        default="hungarian")
    return parser


def _merge_run_config(args: argparse.Namespace) -> RunConfig:
    options: dict = {}
    if args.config:
        with open(args.config) as fh:
            loaded = json.load(fh)
        if not isinstance(loaded, dict):
            raise ValueError("config file must hold a JSON object")
        options.update(loaded)
    for key in ("cube", "gt", "out", "epochs", "lr", "filter_layers",
                "filter_k", "noise_sigma", "hidden_dim", "n_superpixels",
                "compactness", "slic_iters", "clusters", "restarts",
                "kmeans_iters", "seed", "reduce", "reduce_dim", "laplacian",
                "activation", "mapping", "noisy_inference", "color", "force"):
        value = getattr(args, key)
        if value is not None:
            options[key] = value
    if args.ablate is not None:
        options["ablate"] = [a for a in args.ablate.split(",") if a]
    options["ablate"] = tuple(options.get("ablate", ()))
    for path_key in ("cube", "gt", "out"):
        if not options.get(path_key):
            raise ValueError(f"--{path_key} is required (flag or config file)")
    known = set(RunConfig.__dataclass_fields__)
    unknown = sorted(set(options) - known)
    if unknown:
        raise ValueError(f"unknown config key(s): {unknown}")
    return RunConfig(**options)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            cfg = _merge_run_config(args)
            result = run(cfg)
            report = result.metrics
            print(f"wrote {result.out_dir}/clusters.pgm "
                  f"({result.n_nodes} nodes)")
            print(f"OA={report.oa:.4f} kappa={report.kappa:.4f} "
                  f"NMI={report.nmi:.4f} ARI={report.ari:.4f} "
                  f"purity={report.purity:.4f}")
        else:
            report = evaluate(args.pred, args.gt, args.mapping)
            print(report.to_json(), end="")
    except (PipelineError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
