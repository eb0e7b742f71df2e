import json

import numpy as np
import pytest

from millab import MILConfig, SynthSpec, TrainConfig, generate
from millab.cli import main
from millab.experiments import (
    DEFAULT_GRID_RESOLUTION,
    DEFAULT_GRID_WINDOW,
    ExperimentConfig,
    ToyMultiLabelConfig,
    config_digest,
    make_toy_dataset,
    render_heatmap,
    run_table1,
    run_theory_report,
    run_toy_multilabel,
    save_dataset,
)
from millab.nets import LinearArch, init_params, params_from_vector


@pytest.fixture(scope="module")
def tiny_spec():
    cfg = MILConfig(bag_size=10, positives_per_bag=1, imbalance=5.0, n_pos_bags=20)
    return SynthSpec(config=cfg, skew=0.8, seed=0)


def read_pgm(path):
    data = path.read_bytes()
    assert data.startswith(b"P5\n")
    header, rest = data.split(b"\n255\n", 1)
    nx, ny = map(int, header.split(b"\n")[1].split())
    img = np.frombuffer(rest, dtype=np.uint8).reshape(ny, nx)
    return img


# ---------------------------------------------------------------------------
# table runner


def test_run_table1_end_to_end(tiny_spec, tmp_path):
    config = ExperimentConfig(
        spec=tiny_spec,
        losses=("si", "uc"),
        archs=("linear", "two_layer"),
        train=TrainConfig(epochs=150, learning_rates=(1e-2, 1e-3)),
        seeds=(0, 1),
        n_workers=1,
    )
    table = run_table1(config, output_dir=tmp_path)
    assert len(table.cells) == 8
    for cell in table.cells:
        assert not cell.failed
        assert 0.0 <= cell.ap <= 1.0
        assert cell.chosen_lr in (1e-2, 1e-3)
        assert np.isfinite(cell.final_train_loss)

    data = json.loads((tmp_path / "table1.json").read_text())
    assert len(data["cells"]) == 8
    assert "si/two_layer" in data["summary"]
    text = (tmp_path / "table1.txt").read_text()
    assert "si" in text and "two_layer" in text

    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["command"] == "table1"
    assert manifest["config_digest"] == config_digest(config.to_json_dict())
    assert "numpy" in manifest["versions"]

    assert (tmp_path / "data_scatter.png").exists()
    for loss in ("si", "uc"):
        for arch in ("linear", "two_layer"):
            base = tmp_path / "heatmaps" / f"{loss}_{arch}"
            assert base.with_suffix(".csv").exists()
            assert base.with_suffix(".pgm").exists()
            assert base.with_suffix(".png").exists()


def test_run_table1_worker_pool_matches_sequential(tiny_spec):
    config = ExperimentConfig(
        spec=tiny_spec,
        losses=("si",),
        archs=("linear",),
        train=TrainConfig(epochs=100, learning_rates=(1e-2,)),
        seeds=(0, 1, 2),
        n_workers=1,
    )
    seq = run_table1(config)
    from dataclasses import replace

    par = run_table1(replace(config, n_workers=3))
    for c1, c2 in zip(seq.cells, par.cells):
        assert c1.ap == c2.ap
        assert c1.final_train_loss == c2.final_train_loss


def test_experiment_config_round_trip(tiny_spec):
    config = ExperimentConfig(spec=tiny_spec, seeds=(3, 4), n_workers=2)
    rebuilt = ExperimentConfig.from_json_dict(config.to_json_dict())
    assert rebuilt == config
    assert config_digest(rebuilt.to_json_dict()) == config_digest(
        config.to_json_dict()
    )


def test_experiment_config_validation(tiny_spec):
    from millab import ValidationError

    with pytest.raises(ValidationError):
        ExperimentConfig(spec=tiny_spec, losses=())
    with pytest.raises(ValidationError):
        ExperimentConfig(spec=tiny_spec, losses=("nope",))
    with pytest.raises(ValidationError):
        ExperimentConfig(spec=tiny_spec, seeds=())


# ---------------------------------------------------------------------------
# heatmaps


def test_heatmap_uniform_for_zero_model():
    arch = LinearArch(2)
    zeros = params_from_vector(arch, np.zeros(3), seed=0)
    grid = render_heatmap(zeros, resolution=(20, 10))
    assert grid.values.shape == (10, 20)
    np.testing.assert_allclose(grid.values, 0.5)


def test_heatmap_default_window_and_files(tmp_path):
    params = init_params(LinearArch(2), seed=1)
    base = tmp_path / "hm"
    grid = render_heatmap(params, out_basename=base)
    assert grid.resolution == DEFAULT_GRID_RESOLUTION
    assert grid.x_range == DEFAULT_GRID_WINDOW[0]
    assert grid.values.size == 40_000

    img = read_pgm(base.with_suffix(".pgm"))
    assert img.shape == (200, 200)
    # PGM top row corresponds to the largest y
    np.testing.assert_array_equal(
        img[0], np.round(grid.values[-1] * 255).astype(np.uint8)
    )

    lines = base.with_suffix(".csv").read_text().splitlines()
    assert lines[0] == "x,y,score"
    assert len(lines) == 40_001
    x0, y0, s0 = map(float, lines[1].split(","))
    assert (x0, y0) == (-2.5, -1.0)
    assert s0 == pytest.approx(grid.values[0, 0])
    assert base.with_suffix(".png").exists()


def test_heatmap_orientation_tracks_y():
    # a model scoring high only for large y must light up the top PGM rows
    params = params_from_vector(LinearArch(2), np.array([0.0, 4.0, -8.0]), seed=0)
    grid = render_heatmap(params, resolution=(5, 50))
    assert grid.values[-1].mean() > 0.9  # y = 5.5 rows
    assert grid.values[0].mean() < 0.01  # y = -1 rows


# ---------------------------------------------------------------------------
# theory report


def test_theory_report_values(paper_spec, tmp_path):
    report = run_theory_report(paper_spec, output_dir=tmp_path)
    assert report["mixing_optimum"] == pytest.approx(99 / 2099)
    by_x = {s["abscissa"]: s for s in report["segments"]}
    assert by_x[1.0]["nonmixing_optimum"] == pytest.approx(0.0734, abs=5e-5)
    assert by_x[-1.0]["nonmixing_optimum"] == pytest.approx(0.0194, abs=5e-5)
    assert set(report["tolerance_verdicts"]) == {"0.1", "0.25", "0.5"}
    assert all(
        v["status"] == "pass" for v in report["tolerance_verdicts"]["0.5"]
    )
    # 0.0194 < 0.1 < 0.0734: the right line fails the strictest threshold
    strict = {v["abscissa"]: v["status"] for v in report["tolerance_verdicts"]["0.1"]}
    assert strict == {-1.0: "pass", 1.0: "pass"} or strict[1.0] == "pass"
    assert (tmp_path / "theory_report.json").exists()
    assert (tmp_path / "manifest.json").exists()


def test_theory_report_mixing_spec(paper_config):
    spec = SynthSpec(config=paper_config, skew=0.5)
    report = run_theory_report(spec)
    for seg in report["segments"]:
        assert seg["nonmixing_optimum"] == pytest.approx(report["mixing_optimum"])


# ---------------------------------------------------------------------------
# toy multi-label


def test_make_toy_dataset_shapes():
    cfg = ToyMultiLabelConfig(
        n_labels=3, bag_size=8, positives_per_bag=2, n_bags=42, seed=1
    )
    features, labels = make_toy_dataset(cfg)
    assert features.shape == (42, 8, 6)
    assert labels.shape == (42, 3)
    for z, imbalance in enumerate(cfg.label_imbalances):
        n_pos = int(labels[:, z].sum())
        assert n_pos == max(1, round(42 / (1 + imbalance)))
        # positive instances on the low line in the label's own dimensions
        pos_bags = labels[:, z] == 1
        y = features[pos_bags, :, 2 * z + 1]
        assert np.sum(y == -0.5) == n_pos * cfg.positives_per_bag


def test_make_toy_dataset_deterministic():
    cfg = ToyMultiLabelConfig(n_labels=2, bag_size=6, n_bags=30, seed=7)
    f1, l1 = make_toy_dataset(cfg)
    f2, l2 = make_toy_dataset(cfg)
    np.testing.assert_array_equal(f1, f2)
    np.testing.assert_array_equal(l1, l2)


def test_run_toy_multilabel_micro(tmp_path):
    cfg = ToyMultiLabelConfig(
        n_labels=2,
        bag_size=6,
        positives_per_bag=1,
        imbalances=(5.0, 5.0),
        n_bags=36,
        seed=0,
        train=TrainConfig(epochs=400, learning_rates=(1e-2,)),
    )
    result = run_toy_multilabel(cfg, output_dir=tmp_path)
    assert set(result.mean_ap) == {"si", "soft_nor"}
    for name in ("si", "soft_nor"):
        assert len(result.per_label_ap[name]) == 2
        assert 0.0 <= result.mean_ap[name] <= 1.0
    assert result.gap == pytest.approx(
        abs(result.mean_ap["si"] - result.mean_ap["soft_nor"])
    )
    assert (tmp_path / "toy_multilabel.json").exists()
    assert (tmp_path / "toy_ap_bars.png").exists()
    assert (tmp_path / "manifest.json").exists()


def test_run_toy_multilabel_single_label_degenerate():
    cfg = ToyMultiLabelConfig(
        n_labels=1,
        bag_size=5,
        positives_per_bag=1,
        imbalances=(4.0,),
        n_bags=25,
        seed=2,
        train=TrainConfig(epochs=300, learning_rates=(1e-2,)),
    )
    result = run_toy_multilabel(cfg)
    for name in ("si", "soft_nor"):
        assert len(result.per_label_ap[name]) == 1
        assert result.mean_ap[name] == result.per_label_ap[name][0]


# ---------------------------------------------------------------------------
# dataset persistence


def test_save_dataset(tiny_spec, tmp_path):
    out = save_dataset(tiny_spec, tmp_path / "data")
    assert (out / "data.csv").exists()
    assert (out / "spec.json").exists()
    assert (out / "data_scatter.png").exists()
    assert (out / "manifest.json").exists()
    loaded = SynthSpec.load_json(out / "spec.json")
    assert loaded == tiny_spec
    n_lines = len((out / "data.csv").read_text().splitlines())
    assert n_lines == tiny_spec.scaled_config.n_instances + 1


# ---------------------------------------------------------------------------
# CLI


def test_cli_generate_and_theory(tmp_path, capsys):
    out = tmp_path / "gen"
    code = main(
        [
            "generate", "--out", str(out),
            "--bag-size", "10", "--positives-per-bag", "1",
            "--imbalance", "5", "--pos-bags", "10", "--seed", "3",
        ]
    )
    assert code == 0
    assert (out / "data.csv").exists()
    capsys.readouterr()

    code = main(["theory", "--skew", "0.8"])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["mixing_optimum"] == pytest.approx(99 / 2099)


def test_cli_train_and_heatmap(tmp_path, capsys):
    out = tmp_path / "run"
    code = main(
        [
            "train", "--out", str(out),
            "--bag-size", "10", "--pos-bags", "20", "--imbalance", "5",
            "--loss", "si", "--arch", "two_layer",
            "--epochs", "200", "--lrs", "1e-2",
        ]
    )
    assert code == 0
    assert (out / "checkpoint.json").exists()
    assert (out / "train_result.json").exists()

    hm = tmp_path / "hm"
    code = main(
        [
            "heatmap", "--checkpoint", str(out / "checkpoint.json"),
            "--out", str(hm), "--resolution", "16", "8",
        ]
    )
    assert code == 0
    img = read_pgm(hm / "heatmap.pgm")
    assert img.shape == (8, 16)


def test_cli_table1_micro(tmp_path):
    out = tmp_path / "t1"
    code = main(
        [
            "table1", "--out", str(out),
            "--bag-size", "10", "--pos-bags", "10", "--imbalance", "5",
            "--losses", "si", "--archs", "linear",
            "--seeds", "0", "--epochs", "100", "--workers", "1",
        ]
    )
    assert code == 0
    assert (out / "table1.json").exists()


def test_cli_table1_config_file_with_overrides(tmp_path, tiny_spec):
    config = ExperimentConfig(
        spec=tiny_spec,
        losses=("si",),
        archs=("linear",),
        train=TrainConfig(epochs=2000, learning_rates=(1e-2,)),
        seeds=(0,),
        n_workers=1,
    )
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps(config.to_json_dict()))
    out = tmp_path / "from_config"
    code = main(
        ["table1", "--config", str(cfg_path), "--out", str(out),
         "--epochs", "50", "--workers", "1"]
    )
    assert code == 0
    table = json.loads((out / "table1.json").read_text())
    assert table["config"]["train"]["epochs"] == 50  # override applied
    assert table["config"]["spec"] == tiny_spec.to_json_dict()


def test_cli_toy_multilabel(tmp_path, capsys):
    out = tmp_path / "toy"
    code = main(
        [
            "toy-multilabel", "--out", str(out),
            "--labels", "1", "--bags", "24", "--bag-size", "5",
            "--positives-per-bag", "1", "--imbalances", "5",
            "--epochs", "200", "--lrs", "1e-2",
        ]
    )
    assert code == 0
    assert "mAP" in capsys.readouterr().out


def test_cli_validation_exit_code(tmp_path, capsys):
    code = main(["generate", "--out", str(tmp_path / "x"), "--skew", "1.5"])
    assert code == 2
    code = main(["table1", "--out", str(tmp_path / "y"), "--config", "/nonexistent.json"])
    assert code == 2
    # B*P not an integer
    code = main(["theory", "--imbalance", "0.3", "--pos-bags", "7"])
    assert code == 2
