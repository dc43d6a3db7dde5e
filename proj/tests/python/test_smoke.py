import json
import math
import os

import numpy as np
import pytest

import ssfer


def test_version():
    assert ssfer.__version__


def test_synth_shapes_and_determinism():
    imgs, labels, boxes = ssfer.synth(24, classes=3, size=32, jitter=0.3, seed=7)
    assert imgs.shape == (24, 32, 32, 3)
    assert labels.shape == (24,)
    assert boxes.shape == (24, 4)
    assert imgs.min() >= 0.0 and imgs.max() <= 1.0
    assert set(labels.tolist()) <= {0, 1, 2}

    imgs2, labels2, boxes2 = ssfer.synth(24, classes=3, size=32, jitter=0.3, seed=7)
    assert np.array_equal(imgs, imgs2)
    assert np.array_equal(labels, labels2)
    assert np.array_equal(boxes, boxes2)


def test_iou_known_value():
    # 2x2 boxes offset by 1 in each direction: overlap 1, union 7
    assert ssfer.iou([0, 0, 2, 2], [1, 1, 3, 3]) == pytest.approx(1.0 / 7.0, abs=1e-12)
    assert ssfer.iou([0, 0, 2, 2], [0, 0, 2, 2]) == pytest.approx(1.0, abs=1e-12)
    assert ssfer.iou([0, 0, 1, 1], [2, 2, 3, 3]) == 0.0


def test_mix_images_arithmetic():
    a = np.zeros((8, 8, 3), dtype=np.float32)
    b = np.ones((8, 8, 3), dtype=np.float32)
    m = ssfer.mix_images(a, b, 0.25)
    assert np.allclose(m, 0.75)


def test_sample_mask_count():
    masked, visible = ssfer.sample_mask(64, 0.75, seed=3)
    assert len(masked) == math.floor(0.75 * 64)
    assert sorted(masked + visible) == list(range(64))


def test_image_similarity_self():
    img = ssfer.synth(1, seed=5)[0][0]
    assert ssfer.image_similarity("ssim", img, img) == pytest.approx(1.0, abs=1e-9)
    # psnr reports decibels, capped at 50 for identical images
    assert ssfer.image_similarity("psnr", img, img) == pytest.approx(50.0, abs=1e-9)


def test_patchify_shape():
    img = ssfer.synth(1, size=32, seed=1)[0][0]
    p = ssfer.patchify(img, 4)
    assert p.shape == (64, 48)


def test_count_base224():
    r = ssfer.count_params_flops("base224")
    assert abs(r["params"] - 85.7e6) / 85.7e6 < 0.01
    assert abs(r["flops"] - 16.9e9) / 16.9e9 < 0.01


def test_gwo_sphere():
    res = ssfer.gwo(lambda x: sum(v * v for v in x), [-5, -5], [5, 5],
                    wolves=12, iterations=60, seed=0)
    assert res["best_fitness"] < 1e-3
    hist = res["history"]
    assert all(hist[i + 1] <= hist[i] + 1e-15 for i in range(len(hist) - 1))


def test_micro_pipeline(tmp_path):
    cfg = ssfer.default_config()
    cfg["seed"] = 0
    cfg["output_dir"] = str(tmp_path / "run")
    cfg["data"]["synth"]["n_samples"] = 60
    cfg["data"]["budget_value"] = 0.3
    cfg["pretrain"].update(epochs=1, warmup_epochs=0, batch_size=16)
    cfg["supervised"].update(epochs=1, warmup_epochs=0, batch_size=8,
                             auto_extend_small_labels=False)
    cfg["semisup"].update(epochs=1, warmup_epochs=0, batch_size=8, unlabeled_batch_size=8)
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps(cfg))

    man = ssfer.run_pipeline(str(cfg_path))
    assert [s["name"] for s in man["stages"]] == ["pretrain", "supervised", "semisup"]
    assert "test_accuracy" in man["final_metrics"]
    for rel in man["artifacts"]:
        assert os.path.exists(os.path.join(cfg["output_dir"], rel)), rel
