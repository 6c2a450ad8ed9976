import numpy as np
import pytest

import geochart


def small_config(tmp_path, **extra):
    cfg = geochart.default_config()
    cfg["train_trajectory"]["n"] = 120
    cfg["test_trajectory"]["n"] = 40
    cfg["train"]["epochs"] = 2
    cfg["train"]["pairs_per_epoch"] = 256
    cfg["train"]["hidden"] = [16, 8]
    cfg["mds"]["max_iterations"] = 20
    cfg["sammon"]["max_iterations"] = 20
    cfg["out"] = str(tmp_path / "run")
    cfg.update(extra)
    return cfg


def test_simulate_shapes_and_determinism(tmp_path):
    cfg = small_config(tmp_path)
    a = geochart.simulate(cfg)
    b = geochart.simulate(cfg)
    n = cfg["train_trajectory"]["n"]
    assert a["positions"].shape == (n, 2)
    assert a["cirs"].ndim == 3 and a["cirs"].shape[0] == n
    assert a["toa"].shape == a["cirs"].shape[:2]
    np.testing.assert_array_equal(a["cirs"], b["cirs"])
    assert geochart.simulate(cfg, "test")["positions"].shape == (40, 2)
    with pytest.raises(geochart.GeochartError):
        geochart.simulate(cfg, "validation")


def test_distances_and_geodesics(tmp_path):
    ds = geochart.simulate(small_config(tmp_path))
    x = geochart.preprocess(ds["cirs"], ds["toa"], ds["sample_rate"], ds["window"], "l1")
    assert x.shape[2] == ds["window"]
    np.testing.assert_allclose(x.sum(axis=2)[x.sum(axis=2) > 0], 1.0)
    d = geochart.pairwise_distances(x)
    assert d.shape == (len(x), len(x))
    np.testing.assert_allclose(d, d.T)
    assert d[0, 1] == pytest.approx(np.abs(x[0] - x[1]).sum())
    assert geochart.cir_distance(x[0], x[1]) == pytest.approx(d[0, 1])
    g = geochart.geodesic_distances(d, 15)
    assert np.all(g >= d - 1e-12)


def test_embeddings_and_metrics(tmp_path):
    ds = geochart.simulate(small_config(tmp_path))
    x = geochart.preprocess(ds["cirs"], ds["toa"], ds["sample_rate"], ds["window"], "l1")
    d = geochart.pairwise_distances(x)
    g = geochart.geodesic_distances(d, 15)
    enc = geochart.train_encoder(x, g, {"epochs": 2, "pairs_per_epoch": 256, "hidden": [16, 8]})
    assert len(enc.loss_history) == enc.epochs_run == 2
    for z in (enc.embed(x), geochart.pca_embed(x), geochart.mds_embed(g, 20), geochart.sammon_embed(g, 20)):
        assert z.shape == (len(x), 2)
        assert np.all(np.isfinite(z))

    gt = ds["positions"]
    e = geochart.euclidean_distances(gt)
    assert geochart.continuity(e, e, 5) == 1.0
    assert geochart.trustworthiness(e, e, 5) == 1.0
    t = geochart.fit_affine(gt, gt)
    np.testing.assert_allclose(t, [[1, 0, 0], [0, 1, 0]], atol=1e-9)
    mae, ce90 = geochart.position_errors(gt, t, gt)
    assert mae < 1e-9 and ce90 < 1e-9


def test_pipeline_and_study(tmp_path):
    cfg = small_config(tmp_path, methods=["siamese_geo", "pca"])
    reports = geochart.run_pipeline(cfg)
    assert [(r["method"], r["split"]) for r in reports] == [
        ("siamese_geo", "train"), ("siamese_geo", "test"), ("pca", "train"), ("pca", "test")]
    assert (tmp_path / "run" / "results.csv").exists()
    cfg["study_pairs"] = 300
    s = geochart.distance_study(cfg, tmp_path / "study")
    assert s["pairs"] == 300 and not s["clamped"]
    assert -1.0 <= s["r_geo"] <= 1.0
