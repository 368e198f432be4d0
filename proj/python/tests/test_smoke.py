import math

import numpy as np
import pytest

import lts


def test_label_fixed_points():
    assert lts.stability_label([0.626]) == pytest.approx(0.269, abs=1e-3)
    assert lts.stability_label([0.89]) == pytest.approx(0.3593, abs=1e-3)
    assert lts.stability_label([0.1, 0.626, 0.3]) == lts.stability_label([0.626])
    assert lts.label_to_distance(lts.stability_label([0.626])) == pytest.approx(0.626)


def test_errors_become_value_errors():
    with pytest.raises(lts.Error):
        lts.label_to_distance(1.0)
    with pytest.raises(ValueError, match="degenerate ROC"):
        lts.auc([0.1, 0.2], [0, 0])
    with pytest.raises(ValueError, match=r"\(N, 3\)"):
        lts.remove_outliers_sor(np.zeros((5, 2)))


def test_metrics():
    scores = np.array([0.9, 0.4, 0.4, 0.7, 0.1, 0.6])
    truth = np.array([1, 1, 0, 0, 0, 1])
    th, tpr, fpr = lts.roc_curve(scores, truth)
    assert math.isinf(th[0])
    assert tpr[-1] == 1.0 and fpr[-1] == 1.0
    assert lts.auc(scores, truth) == pytest.approx(6.5 / 9.0)
    threshold, gmean = lts.optimal_threshold(scores, truth)
    assert threshold in scores
    m, per_class = lts.miou(truth, truth)
    assert m == 1.0 and per_class == (1.0, 1.0)
    report = lts.evaluate(scores, truth, threshold=0.5)
    assert report["applied_threshold"] == 0.5
    assert report["rmse"] is None


def test_weights_average_to_one():
    rng = np.random.default_rng(0)
    labels = rng.uniform(size=500) ** 3
    for density in ("histogram", "kde"):
        w = lts.dense_weights(labels, density=density)
        assert w.mean() == pytest.approx(1.0, abs=1e-9)
    assert np.all(lts.dense_weights(labels, alpha=0.0) == 1.0)


def test_preprocess_and_register():
    rng = np.random.default_rng(1)
    ground = np.column_stack([rng.uniform(-8, 8, 3000), rng.uniform(-8, 8, 3000), rng.normal(0, 0.01, 3000)])
    box = np.column_stack([rng.uniform(-1, 1, 500), rng.uniform(-1, 1, 500), rng.uniform(0.8, 2.5, 500)])
    off, on = lts.remove_ground_csf(np.vstack([ground, box]))
    assert len(off) + len(on) == 3500
    assert np.mean(off >= 3000) > 0.95

    kept = lts.remove_outliers_sor(np.vstack([box, [[40.0, 40.0, 40.0]]]), k=8)
    assert 500 not in kept

    normals = lts.estimate_normals(ground)
    assert np.allclose(np.linalg.norm(normals, axis=1), 1.0)

    angle = math.radians(3.0)
    rot = np.array([[math.cos(angle), -math.sin(angle), 0], [math.sin(angle), math.cos(angle), 0], [0, 0, 1]])
    target = box
    source = (box - [0.2, -0.1, 0.0]) @ rot
    r = lts.icp_align(source, target)
    moved = source @ r["transform"][:3, :3].T + r["transform"][:3, 3]
    assert np.abs(moved - target).max() < 1e-3
    residuals = r["accepted_residuals"]
    assert np.all(np.diff(residuals) <= 0)


def test_label_tile_vote():
    scene = lts.generate_scene(sessions=3, cars=2, ghost_trails=1, extent=(30.0, 20.0), seed=3)
    assert len(scene) == 3
    maps = []
    for s in scene:
        t = s["to_reference"]
        maps.append(s["positions"] @ t[:3, :3].T + t[:3, 3])
    labels, d_max = lts.label_maps(maps, reference=1)
    assert labels.shape == (len(maps[1]),)
    assert np.all((labels >= 0) & (labels < 1))
    truth = scene[1]["ground_truth"]
    if truth.min() != truth.max():
        assert lts.auc(labels, truth) > 0.9

    subs = lts.tile_submaps(maps[1], labels, points_per_submap=256)
    assert subs and all(len(s["labels"]) == 256 for s in subs)
    scores = lts.resolve_votes(len(labels), [s["source_indices"] for s in subs], [s["labels"] for s in subs])
    covered = ~np.isnan(scores)
    assert np.allclose(scores[covered], labels[covered])


def test_pipeline_reports_missing_manifest(tmp_path):
    with pytest.raises(ValueError, match="cannot open manifest"):
        lts.run_pipeline(tmp_path / "absent.json", tmp_path / "out")
