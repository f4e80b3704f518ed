import numpy as np
import pytest

import stpp

TINY = {
    "data": {
        "image_size": 16,
        "pool_size": 10,
        "validation_size": 3,
        "labeled_fraction": 0.3,
        "min_shape_size": 4,
        "max_shape_size": 8,
    },
    "train": {"base_lr": 0.5, "batch_size": 4, "epochs": 2},
    "weak": {"crop_size": 12},
    "tta": {"scales": [1.0], "use_flip": False},
}


def test_metrics_match_hand_example():
    pred = np.array([[0, 0], [1, 1]], dtype=np.uint8)
    ref = np.array([[0, 1], [1, 1]], dtype=np.uint8)
    assert stpp.confusion_matrix(pred, ref, 2).tolist() == [[1, 0], [1, 2]]
    assert stpp.mean_iou(pred, ref, 2) == pytest.approx((0.5 + 2 / 3) / 2)
    assert stpp.per_class_iou(pred, ref, 3)[2] is None
    assert stpp.stability_score([pred, ref, ref], 2) == pytest.approx(1 + 7 / 12, abs=1e-12)


def test_schedule_split_and_oversampling():
    assert stpp.poly_lr(0.001, 500, 1000, 0.9) == pytest.approx(5.35887e-4, abs=1e-9)
    reliable, unreliable = stpp.rank_and_split([(0, 0.9), (1, 0.1), (2, 0.5), (3, 0.7)], 0.5)
    assert reliable == [0, 3] and unreliable == [2, 1]
    assert len(stpp.oversample_labeled([1, 2, 3, 4, 5], 16)) == 20


def test_errors_carry_their_kind():
    with pytest.raises(stpp.Error) as info:
        stpp.mean_iou(np.zeros((2, 2), np.uint8), np.zeros((2, 3), np.uint8), 2)
    assert info.value.kind == "dimension error"
    with pytest.raises(stpp.Error):
        stpp.normalize_config('{"train": {"epoch": 1}}')


def test_model_prediction_and_checkpoint(tmp_path):
    data = stpp.generate_data(TINY, seed=2)
    assert len(data["labeled_images"]) == 3 and len(data["unlabeled_images"]) == 7
    img = data["validation_images"][0]
    assert img.shape == (16, 16, 3) and img.dtype == np.float32
    model = stpp.Model(4, seed=3)
    probs = model.predict_proba_tta(img, scales=[0.5, 1.0], flip=True)
    assert probs.shape == (16, 16, 4)
    np.testing.assert_allclose(probs.sum(axis=2), 1.0, atol=1e-6)
    assert model.predict(img).shape == (16, 16)
    model.save(tmp_path / "m.ckpt")
    assert stpp.Model.load(tmp_path / "m.ckpt") == model


def test_run_is_reproducible(tmp_path):
    model, report = stpp.run(TINY, "stpp", seed=1)
    assert report["stage_order"] == ["supervised", "select", "retrain-partial", "retrain-full"]
    assert 0.0 <= report["stages"]["retrain-full"]["val_miou"] <= 1.0
    again, report2 = stpp.run(TINY, "stpp", seed=1, output_dir=tmp_path)
    assert again == model
    assert report2["body"] == report["body"]
    assert (tmp_path / "stpp-seed1" / "report.csv").read_text() == report["body"]
