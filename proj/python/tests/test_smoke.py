import math

import numpy as np
import pytest

import cogo


def test_dct_round_trip_and_parseval():
    x = np.random.default_rng(0).random((3, 32, 32), dtype=np.float32)
    c = cogo.dct2(x)
    assert c.shape == x.shape
    np.testing.assert_allclose(cogo.idct2(c), x, atol=1e-5)
    assert math.isclose(float((c.astype(np.float64) ** 2).sum()), float((x.astype(np.float64) ** 2).sum()), rel_tol=1e-5)


def test_statistics():
    rng = np.random.default_rng(1)
    a = rng.standard_normal(200).astype(np.float32)
    b = (0.6 * a + 0.8 * rng.standard_normal(200)).astype(np.float32)
    assert abs(cogo.pearson(a, b) - np.corrcoef(a, b)[0, 1]) < 1e-5
    assert cogo.mutual_info(a, a, 8) == pytest.approx(cogo.histogram_entropy(a, 8), abs=1e-6)


def test_suppression_weights_range():
    g = np.random.default_rng(2).standard_normal((2, 10, 16)).astype(np.float32)
    w = cogo.suppression_weights(g, n_pairs=20, alpha=0.3, seed=3)
    assert len(w) == 16
    assert all(0.1 <= x <= 1.0 for x in w)


def test_errors_are_raised_as_cogo_error():
    with pytest.raises(cogo.CogoError):
        cogo.dct2(np.zeros((4, 4), dtype=np.float32))


def test_train_and_attack(tmp_path):
    ckpt = tmp_path / "vit.ckpt"
    acc = cogo.train("vit_tiny", ckpt, dataset="procedural:0:10:train", val="procedural:0:10:val", epochs=1)
    assert 0.0 <= acc <= 1.0
    model = cogo.load_model(ckpt)
    assert model.variant == "vit_tiny"

    images, labels = cogo.generate_procedural(seed=0, n_per_class=10, split="eval")
    assert images.shape == (100, 3, 32, 32)
    assert model.logits(images[:4]).shape == (4, 10)

    x = images[0]
    out = cogo.attack(model, x, labels[0], iterations=3)
    assert np.abs(out["x_adv"] - x).max() <= 8 / 255 + 1e-6
    assert out["x_adv"].min() >= 0.0 and out["x_adv"].max() <= 1.0
    assert len(out["losses"]) == 3

    mim = cogo.attack(model, x, labels[0], method="mim", iterations=3)
    same = cogo.attack(model, x, labels[0], iterations=3, ce=False, is_=False)
    np.testing.assert_array_equal(mim["x_adv"], same["x_adv"])
