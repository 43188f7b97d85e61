"""Orchestration, artifacts, reproducibility, ablations, and the CLI."""

import json

import numpy as np
import pytest

import slcgc.pipeline
from slcgc import (PipelineError, RunConfig, evaluate, load_cluster_map, run,
                   save_cluster_map, save_ground_truth)
from slcgc.cli import main
from slcgc.hsi_io import ClusterMap, GroundTruth
from conftest import make_synthetic, write_synthetic

FAST = dict(epochs=5, hidden_dim=16, restarts=2, kmeans_iters=50,
            n_superpixels=9, reduce_dim=2)


def run_small(tmp_path, seed=0, sigma=0.03, **overrides):
    cube_path, gt_path = write_synthetic(tmp_path, seed, sigma)
    options = dict(FAST)
    options.update(overrides)
    cfg = RunConfig(cube=str(cube_path), gt=str(gt_path),
                    out=str(tmp_path / "out"), seed=seed, **options)
    return run(cfg), cfg


class TestArtifacts:
    def test_all_outputs_written(self, tmp_path):
        result, _ = run_small(tmp_path)
        out = tmp_path / "out"
        for name in ("clusters.pgm", "metrics.json", "loss.csv",
                     "manifest.json"):
            assert (out / name).exists()
        assert not (out / "clusters_color.ppm").exists()

    def test_cluster_map_round_trips(self, tmp_path):
        result, _ = run_small(tmp_path)
        loaded = load_cluster_map(tmp_path / "out" / "clusters.pgm")
        assert np.array_equal(loaded.labels, result.cluster_map.labels)

    def test_metrics_file_matches_report(self, tmp_path):
        result, _ = run_small(tmp_path)
        text = (tmp_path / "out" / "metrics.json").read_text()
        assert text == result.metrics.to_json()
        assert json.loads(text)["oa"] == result.metrics.oa

    def test_loss_csv_matches_history(self, tmp_path):
        result, cfg = run_small(tmp_path)
        lines = (tmp_path / "out" / "loss.csv").read_text().splitlines()
        assert lines[0] == "iteration,loss"
        assert len(lines) == 1 + cfg.epochs
        for i, line in enumerate(lines[1:]):
            idx, value = line.split(",")
            assert int(idx) == i
            assert float(value) == result.losses[i]

    def test_manifest_contents(self, tmp_path):
        result, cfg = run_small(tmp_path)
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert manifest["version"] == slcgc.__version__
        assert manifest["n_nodes"] == result.n_nodes
        assert manifest["n_clusters"] == 3
        assert manifest["config"]["epochs"] == cfg.epochs
        assert manifest["effective"] == {
            "filter_layers": 2, "noise_sigma": 0.01,
            "trained": True, "pixel_graph": False,
        }
        for stage in ("load", "normalize", "segment", "graph", "filter",
                      "train", "kmeans", "backproject", "metrics"):
            assert stage in manifest["stage_seconds"]

    def test_color_map_on_request(self, tmp_path):
        result, _ = run_small(tmp_path, color=True)
        data = (tmp_path / "out" / "clusters_color.ppm").read_bytes()
        assert data.startswith(b"P6\n30 30\n255\n")
        assert len(data) == len(b"P6\n30 30\n255\n") + 30 * 30 * 3


class TestReproducibility:
    def test_same_config_same_bytes(self, tmp_path):
        for sub in ("a", "b"):
            (tmp_path / sub).mkdir()
            run_small(tmp_path / sub)
        first = (tmp_path / "a" / "out" / "metrics.json").read_bytes()
        second = (tmp_path / "b" / "out" / "metrics.json").read_bytes()
        assert first == second

    def test_manifest_config_replays_run(self, tmp_path):
        run_small(tmp_path)
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        options = manifest["config"]
        options["out"] = str(tmp_path / "replay")
        run(RunConfig(**options))
        assert ((tmp_path / "replay" / "metrics.json").read_bytes()
                == (tmp_path / "out" / "metrics.json").read_bytes())
        assert ((tmp_path / "replay" / "clusters.pgm").read_bytes()
                == (tmp_path / "out" / "clusters.pgm").read_bytes())


class TestAblations:
    def test_filter_bypass_recorded(self, tmp_path):
        _, _ = run_small(tmp_path, ablate=("lgd",))
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert manifest["effective"]["filter_layers"] == 0
        assert manifest["config"]["ablate"] == ["lgd"]

    def test_training_bypass_clusters_filtered_features(self, tmp_path):
        result, _ = run_small(tmp_path, ablate=("gscl",))
        assert result.losses == []
        lines = (tmp_path / "out" / "loss.csv").read_text().splitlines()
        assert lines == ["iteration,loss"]
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert manifest["effective"]["trained"] is False

    def test_noise_off_recorded(self, tmp_path):
        _, _ = run_small(tmp_path, ablate=("noise",))
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert manifest["effective"]["noise_sigma"] == 0.0

    def test_noise_off_equals_sigma_zero(self, tmp_path):
        (tmp_path / "a").mkdir()
        (tmp_path / "b").mkdir()
        run_small(tmp_path / "a", ablate=("noise",))
        run_small(tmp_path / "b", noise_sigma=0.0)
        assert ((tmp_path / "a" / "out" / "clusters.pgm").read_bytes()
                == (tmp_path / "b" / "out" / "clusters.pgm").read_bytes())

    def test_pixel_graph_ablation(self, tmp_path):
        result, _ = run_small(tmp_path, ablate=("ghr", "gscl"))
        assert result.n_nodes == 900
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert manifest["effective"]["pixel_graph"] is True

    def test_pixel_graph_node_limit(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setattr(slcgc.pipeline, "PIXEL_NODE_LIMIT", 100)
        with pytest.raises(PipelineError, match="--force") as excinfo:
            run_small(tmp_path, ablate=("ghr", "gscl"))
        assert excinfo.value.stage == "segment"
        result, _ = run_small(tmp_path, ablate=("ghr", "gscl"), force=True)
        assert result.n_nodes == 900
        assert "will be slow" in capsys.readouterr().err

    def test_unknown_block_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="unknown ablation block"):
            RunConfig(cube="c", gt="g", out="o", ablate=("slic",))

    def test_blocks_sorted_and_deduplicated(self):
        cfg = RunConfig(cube="c", gt="g", out="o",
                        ablate=("noise", "lgd", "noise"))
        assert cfg.ablate == ("lgd", "noise")


class TestStageErrors:
    def test_missing_cube_reports_load_stage(self, tmp_path):
        cfg = RunConfig(cube=str(tmp_path / "nope.json"),
                        gt=str(tmp_path / "gt.json"),
                        out=str(tmp_path / "out"))
        with pytest.raises(PipelineError, match="stage 'load'") as excinfo:
            run(cfg)
        assert excinfo.value.stage == "load"

    def test_dimension_mismatch_reports_load_stage(self, tmp_path):
        cube_path, _ = write_synthetic(tmp_path, 0)
        _, small_gt = make_synthetic(0, h=10, w=10)
        gt_path = tmp_path / "small_gt.json"
        save_ground_truth(small_gt, gt_path)
        cfg = RunConfig(cube=str(cube_path), gt=str(gt_path),
                        out=str(tmp_path / "out"))
        with pytest.raises(PipelineError, match="dimensions differ"):
            run(cfg)

    def test_oversized_cluster_count_reports_kmeans_stage(self, tmp_path):
        with pytest.raises(PipelineError) as excinfo:
            run_small(tmp_path, clusters=999)
        assert excinfo.value.stage == "kmeans"


class TestEvaluate:
    def test_perfect_prediction(self, tmp_path):
        _, gt_path = write_synthetic(tmp_path, 0)
        _, gt = make_synthetic(0)
        pred = ClusterMap(30, 30, np.maximum(gt.labels - 1, 0))
        pred_path = tmp_path / "pred.pgm"
        save_cluster_map(pred, pred_path)
        report = evaluate(pred_path, gt_path)
        assert report.oa == 1.0

    def test_single_cluster_degenerate(self, tmp_path):
        gt = GroundTruth(2, 2, np.array([[1, 1], [2, 2]]))
        gt_path = tmp_path / "gt.json"
        save_ground_truth(gt, gt_path)
        pred_path = tmp_path / "pred.pgm"
        save_cluster_map(ClusterMap(2, 2, np.zeros((2, 2), dtype=int)),
                         pred_path)
        report = evaluate(pred_path, gt_path)
        assert report.nmi == 0.0
        assert report.oa == 0.5

    def test_rerun_stable(self, tmp_path):
        _, gt_path = write_synthetic(tmp_path, 0)
        _, gt = make_synthetic(0)
        pred_path = tmp_path / "pred.pgm"
        save_cluster_map(ClusterMap(30, 30, gt.labels % 3), pred_path)
        first = evaluate(pred_path, gt_path).to_json()
        second = evaluate(pred_path, gt_path).to_json()
        assert first == second


class TestCli:
    def fast_flags(self):
        flags = []
        for key, value in FAST.items():
            flags.extend([f"--{key.replace('_', '-')}", str(value)])
        return flags

    def test_run_prints_summary(self, tmp_path, capsys):
        cube_path, gt_path = write_synthetic(tmp_path, 0)
        code = main(["run", "--cube", str(cube_path), "--gt", str(gt_path),
                     "--out", str(tmp_path / "out")] + self.fast_flags())
        captured = capsys.readouterr()
        assert code == 0
        assert "clusters.pgm" in captured.out
        assert "OA=" in captured.out

    def test_eval_prints_report_json(self, tmp_path, capsys):
        _, gt_path = write_synthetic(tmp_path, 0)
        _, gt = make_synthetic(0)
        pred_path = tmp_path / "pred.pgm"
        save_cluster_map(ClusterMap(30, 30, np.maximum(gt.labels - 1, 0)),
                         pred_path)
        code = main(["eval", "--pred", str(pred_path), "--gt", str(gt_path)])
        captured = capsys.readouterr()
        assert code == 0
        assert json.loads(captured.out)["oa"] == 1.0

    def test_error_exit_code(self, tmp_path, capsys):
        code = main(["run", "--cube", str(tmp_path / "nope.json"),
                     "--gt", str(tmp_path / "gt.json"),
                     "--out", str(tmp_path / "out")])
        captured = capsys.readouterr()
        assert code == 1
        assert captured.err.startswith("error:")

    def test_missing_path_reported(self, tmp_path, capsys):
        code = main(["run", "--cube", "c.json"])
        captured = capsys.readouterr()
        assert code == 1
        assert "--gt is required" in captured.err

    def test_config_file_with_flag_override(self, tmp_path, capsys):
        cube_path, gt_path = write_synthetic(tmp_path, 0)
        options = dict(FAST)
        options.update(cube=str(cube_path), gt=str(gt_path),
                       out=str(tmp_path / "out"), seed=1)
        config_path = tmp_path / "run.json"
        config_path.write_text(json.dumps(options))
        code = main(["run", "--config", str(config_path), "--seed", "2"])
        assert code == 0
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert manifest["config"]["seed"] == 2
        assert manifest["config"]["epochs"] == FAST["epochs"]

    def test_manifest_config_replay_via_cli(self, tmp_path, capsys):
        run_small(tmp_path)
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        config_path = tmp_path / "replay.json"
        config_path.write_text(json.dumps(manifest["config"]))
        code = main(["run", "--config", str(config_path),
                     "--out", str(tmp_path / "replay")])
        assert code == 0
        assert ((tmp_path / "replay" / "metrics.json").read_bytes()
                == (tmp_path / "out" / "metrics.json").read_bytes())

    def test_ablate_flag_parsed(self, tmp_path, capsys):
        cube_path, gt_path = write_synthetic(tmp_path, 0)
        code = main(["run", "--cube", str(cube_path), "--gt", str(gt_path),
                     "--out", str(tmp_path / "out"),
                     "--ablate", "noise,lgd"] + self.fast_flags())
        assert code == 0
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert manifest["config"]["ablate"] == ["lgd", "noise"]

    def test_unknown_config_key_rejected(self, tmp_path, capsys):
        config_path = tmp_path / "run.json"
        config_path.write_text(json.dumps({"cube": "c", "gt": "g", "out": "o",
                                           "epoch": 4}))
        code = main(["run", "--config", str(config_path)])
        captured = capsys.readouterr()
        assert code == 1
        assert "unknown config key" in captured.err
        assert "epoch" in captured.err

    def test_non_object_config_rejected(self, tmp_path, capsys):
        config_path = tmp_path / "run.json"
        config_path.write_text("[1, 2]")
        code = main(["run", "--config", str(config_path)])
        captured = capsys.readouterr()
        assert code == 1
        assert "JSON object" in captured.err

    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main(["--version"])
        assert excinfo.value.code == 0
        assert capsys.readouterr().out.strip() == slcgc.__version__
