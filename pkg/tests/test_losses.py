import math

import numpy as np
import pytest

from conftest import random_image
from vocsmooth.imaging import max_pool
from vocsmooth.losses import (
    PARTS,
    PROB_EPS,
    LossWeights,
    dtv_loss,
    dtv_terms,
    edge_loss,
    reconstruction_loss,
    reconstruction_terms,
    seg_cross_entropy,
    total_loss,
)
from vocsmooth.metrics import ssim


def test_edge_loss_cases():
    e = np.zeros((4, 4), bool)
    e[1:3, 1:3] = True
    perfect = np.where(e, 1 - PROB_EPS, PROB_EPS)
    assert edge_loss(perfect, e) < 1e-4 * e.sum()
    # all non-edge: alpha = 1, only the (empty) edge term survives
    assert edge_loss(np.full((3, 3), 0.9), np.zeros((3, 3), bool)) == 0.0
    one = np.zeros((2, 2), bool)
    one[0, 0] = True
    assert edge_loss(np.full((2, 2), 0.5), one) == pytest.approx(1.5 * math.log(2), abs=1e-4)


def test_edge_loss_pixel_oracle():
    rng = np.random.Generator(np.random.Philox(1))
    p = rng.uniform(0.01, 0.99, (5, 6))
    e = rng.uniform(size=(5, 6)) < 0.3
    alpha = (~e).sum() / e.size
    expected = sum(-alpha * math.log(p[i, j]) if e[i, j] else -(1 - alpha) * math.log(1 - p[i, j])
                   for i in range(5) for j in range(6))
    assert edge_loss(p, e) == pytest.approx(expected, abs=1e-9)
    assert math.isfinite(edge_loss(np.zeros((5, 6)), e))
    with pytest.raises(ValueError):
        edge_loss(p, e[:4])


def test_reconstruction_loss():
    s = random_image(2, 32, 32)
    assert reconstruction_loss(s, s) == pytest.approx(0.0, abs=1e-6)
    gt = np.full((32, 32, 3), 0.4)
    terms = reconstruction_terms(gt + 0.1, gt)
    assert terms["l1"] == pytest.approx(0.1, abs=1e-15)
    t = random_image(3, 32, 32)
    expected = np.mean(np.abs(s - t)) + sum(1 - ssim(max_pool(s, k), max_pool(t, k)) for k in (1, 2, 4, 8))
    assert reconstruction_loss(s, t) == pytest.approx(expected, abs=1e-12)
    assert reconstruction_loss(s, t, levels=1) == pytest.approx(np.mean(np.abs(s - t)) + 1 - ssim(s, t), abs=1e-12)


def test_dtv_constant_without_edges():
    none = np.zeros((6, 6), bool)
    assert dtv_loss(np.full((6, 6, 1), 0.3), random_image(4, 6, 6, 1), none) == 0.0


def test_dtv_constant_on_non_edges_and_exact_on_edges():
    gt = random_image(6, 6, 6, 1)
    e = np.zeros((6, 6), bool)
    e[:, 5] = True
    s = np.full_like(gt, 0.5)
    gt2 = gt.copy()
    gt2[:, 5] = 0.5
    assert dtv_loss(s, gt2, e) == 0.0


def test_dtv_pixel_oracle():
    rng = np.random.Generator(np.random.Philox(7))
    s = rng.uniform(size=(4, 4, 1))
    gt = rng.uniform(size=(4, 4, 1))
    e = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], bool)
    l1 = [abs(s[i, j, 0] - gt[i, j, 0]) for i in range(4) for j in range(4) if e[i, j]]
    tv = []
    for i in range(4):
        for j in range(4):
            if not e[i, j]:
                dx = s[i, j + 1, 0] - s[i, j, 0] if j < 3 else 0.0
                dy = s[i + 1, j, 0] - s[i, j, 0] if i < 3 else 0.0
                tv.append(abs(dx) + abs(dy))
    assert dtv_loss(s, gt, e) == pytest.approx(sum(l1) / len(l1) + sum(tv) / len(tv), abs=1e-9)
    with pytest.raises(ValueError):
        dtv_loss(s, gt, e[:3])


def test_seg_cross_entropy():
    labels = np.array([[0, 1], [2, 1]])
    onehot = np.eye(3)[labels]
    assert seg_cross_entropy(onehot, labels) < 1e-6
    uniform = np.full((3, 3, 21), 1 / 21)
    assert seg_cross_entropy(uniform, np.zeros((3, 3), int)) == pytest.approx(math.log(21), abs=1e-4)
    probs = np.array([[[0.7, 0.2, 0.1], [0.1, 0.8, 0.1]], [[0.3, 0.3, 0.4], [0.5, 0.25, 0.25]]])
    lab = np.array([[0, 1], [2, 255]])
    expected = -(math.log(0.7) + math.log(0.8) + math.log(0.4)) / 3
    assert seg_cross_entropy(probs, lab) == pytest.approx(expected, abs=1e-12)
    with pytest.raises(ValueError):
        seg_cross_entropy(probs, np.full((2, 2), 255))
    with pytest.raises(ValueError):
        seg_cross_entropy(probs, np.array([[0, 1], [2, 3]]))


def test_total_loss_examples():
    assert total_loss({})[0] == 0.0
    assert total_loss({"edge": 10.0})[0] == pytest.approx(0.01, abs=1e-15)
    total, breakdown = total_loss({name: 1.0 for name in PARTS})
    assert total == pytest.approx(6.001, abs=1e-12)
    assert breakdown["edge"] == 0.001 and set(breakdown) == set(PARTS)


def test_total_loss_weights_are_finite_difference_slopes():
    base = {name: 0.5 for name in PARTS}
    w = LossWeights()
    for name in PARTS:
        bumped = dict(base, **{name: base[name] + 1.0})
        slope = total_loss(bumped, w)[0] - total_loss(base, w)[0]
        assert slope == pytest.approx(w.coefficient(name), abs=1e-12)


def test_total_loss_validation():
    with pytest.raises(ValueError):
        total_loss({"edge": -1.0})
    with pytest.raises(ValueError):
        total_loss({"seg": math.nan})
    with pytest.raises(KeyError):
        total_loss({"style": 1.0})
    with pytest.raises(ValueError):
        LossWeights(lambda_e=-0.1)
