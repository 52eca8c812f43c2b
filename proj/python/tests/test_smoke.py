import numpy as np
import pytest

import msdc


def piecewise(n=32, seed=0):
    return msdc.generate_synthetic("piecewise", n, seed)


def test_size_for_ratio():
    assert msdc.size_for_ratio(256, 0.10) == 81
    assert msdc.size_for_ratio(256, 0.25) == 128


def test_stp_measure_matches_numpy():
    rng = np.random.default_rng(3)
    x = rng.random((16, 16))
    p1 = msdc.gaussian_init(8, 16, 1)
    p2 = msdc.gaussian_init(8, 16, 2)
    assert p1.shape == (8, 16)
    assert abs(p1.std() - 1 / np.sqrt(8)) < 0.1
    np.testing.assert_allclose(msdc.stp_measure(x, p1, p2), p1 @ x @ p2.T, atol=1e-12)
    np.testing.assert_allclose(msdc.measure_single(x, p1), x @ p1.T, atol=1e-12)


def test_model_measure_and_initial():
    model = msdc.Model.init(32, 0.25, channels=4, cardinality=2, se_reduction=2, seed=5)
    x = piecewise()
    y = model.measure(x)
    assert y.shape == (model.m, model.m)
    np.testing.assert_allclose(y, model.phi1 @ x @ model.phi2.T, atol=1e-10)
    x0 = model.initial_reconstruct(y)
    np.testing.assert_allclose(x0, model.phi1.T @ y @ model.phi2, atol=1e-10)


def test_identity_model_is_lossless(tmp_path):
    model = msdc.Model.identity(32, channels=4, cardinality=2, se_reduction=2)
    x = piecewise()
    out = model.reconstruct(model.measure(x))
    assert out["converged"]
    assert msdc.psnr(out["image"], x) == pytest.approx(99.0)
    path = tmp_path / "m.ckpt"
    model.save(str(path))
    again = msdc.Model.load(str(path))
    np.testing.assert_array_equal(again.phi1, model.phi1)


def test_metrics_against_numpy_and_skimage():
    rng = np.random.default_rng(11)
    ref = rng.random((40, 40))
    x = np.clip(ref + 0.05 * rng.standard_normal(ref.shape), 0, 1)
    mse = np.mean((x - ref) ** 2)
    assert msdc.hmse(x, ref) == pytest.approx(0.5 * mse)
    assert msdc.psnr(x, ref) == pytest.approx(10 * np.log10(1 / mse), abs=1e-9)
    skm = pytest.importorskip("skimage.metrics")
    expected = skm.structural_similarity(x, ref, data_range=1.0, gaussian_weights=True, sigma=1.5,
                                         use_sample_covariance=False)
    assert msdc.ssim(x, ref) == pytest.approx(expected, abs=1e-6)


def test_soft_threshold_and_conv():
    v = np.array([-2.0, -0.5, 0.0, 0.3, 1.5])
    np.testing.assert_allclose(msdc.soft_threshold(v, 1.0), np.sign(v) * np.maximum(np.abs(v) - 1, 0))
    x = np.zeros((1, 1, 5, 5))
    x[0, 0, 2, 2] = 1.0
    k = np.arange(9, dtype=float).reshape(1, 1, 3, 3)
    out = msdc.conv2d(x, k, dilation=2)
    assert out.shape == (1, 1, 5, 5)
    assert out[0, 0, 2, 2] == pytest.approx(k[0, 0, 1, 1])
    assert out.sum() == pytest.approx(k.sum())


def test_fixed_point_solvers():
    a = np.diag(np.linspace(0.1, 0.9, 6))
    b = np.ones(6)
    star = np.linalg.solve(np.eye(6) - a, b)
    f = lambda x: a @ x + b
    pic = msdc.picard_solve(f, np.zeros(6), max_iter=500, tol=1e-10)
    and_ = msdc.anderson_solve(f, np.zeros(6), max_iter=500, tol=1e-10)
    assert pic["converged"] and and_["converged"]
    assert and_["iterations"] <= pic["iterations"]
    np.testing.assert_allclose(and_["x"], star, atol=1e-8)
    with pytest.raises(RuntimeError):
        msdc.picard_solve(lambda x: 2 * x + 1, np.ones(3), max_iter=200)


def test_ista_recovers_sparse_vector():
    rng = np.random.default_rng(0)
    phi = rng.standard_normal((40, 100)) / np.sqrt(40)
    x = np.zeros(100)
    x[[3, 50, 77]] = [1.0, -1.0, 0.5]
    res = msdc.ista_solve(phi, phi @ x, 1e-3, max_iter=5000, tol=1e-10)
    trace = np.array(res["objective_trace"])
    assert np.all(np.diff(trace) <= 1e-12)
    np.testing.assert_allclose(res["x"], x, atol=0.05)


def test_pgm_roundtrip(tmp_path):
    x = piecewise(24, 7)
    path = str(tmp_path / "a.pgm")
    msdc.write_pgm(path, x)
    np.testing.assert_allclose(msdc.read_pgm(path), x, atol=0.5 / 255 + 1e-12)


def test_shape_errors():
    model = msdc.Model.init(32, 0.25, channels=4, cardinality=2, se_reduction=2)
    with pytest.raises(ValueError):
        model.measure(np.zeros((16, 16)))
    with pytest.raises(ValueError):
        msdc.psnr(np.zeros((4, 4)), np.zeros((5, 5)))


def test_train_reduces_loss():
    model = msdc.Model.init(32, 0.25, channels=4, cardinality=2, se_reduction=2, seed=1)
    trained, losses, diagnostics = msdc.train(model, [piecewise(32, 21)], steps=30, batch=1, lr=1e-4,
                                              forward_iters=10, backward_iters=5)
    assert len(losses) == 30
    assert not diagnostics
    assert np.mean(losses[-5:]) < np.mean(losses[:5])
    assert isinstance(trained, msdc.Model)
