import math

import numpy as np
import pytest
from PIL import Image

import oracles
from conftest import random_image
from vocsmooth.errors import ImageDecodeError
from vocsmooth.imaging import (
    box_filter,
    gaussian_filter,
    gaussian_kernel,
    laplacian,
    load_image,
    max_pool,
    mean_intensity,
    quantize,
    save_image,
    sobel_edges,
    to_grayscale,
)


def write_png(path, arr, mode):
    Image.fromarray(np.asarray(arr, dtype=np.uint8), mode=mode).save(path)


def test_load_white_and_black_pixels(tmp_path):
    write_png(tmp_path / "w.png", [[[255, 255, 255]]], "RGB")
    write_png(tmp_path / "b.png", [[[0, 0, 0]]], "RGB")
    assert load_image(tmp_path / "w.png").tolist() == [[[1.0, 1.0, 1.0]]]
    assert load_image(tmp_path / "b.png").tolist() == [[[0.0, 0.0, 0.0]]]


def test_load_gray_ppm_levels(tmp_path):
    path = tmp_path / "g.pgm"
    Image.fromarray(np.array([[0, 85], [170, 255]], dtype=np.uint8), mode="L").save(path)
    img = load_image(path)
    assert img.shape == (2, 2, 1)
    np.testing.assert_allclose(img[:, :, 0], [[0, 1 / 3], [2 / 3, 1]], atol=1e-6)


def test_load_rejects_unsupported_color_model(tmp_path):
    path = tmp_path / "rgba.png"
    Image.fromarray(np.zeros((2, 2, 4), dtype=np.uint8), mode="RGBA").save(path)
    with pytest.raises(ImageDecodeError, match="RGBA"):
        load_image(path)


def test_load_rejects_16_bit(tmp_path):
    path = tmp_path / "deep.png"
    Image.fromarray(np.zeros((2, 2), dtype=np.uint16)).save(path)
    with pytest.raises(ImageDecodeError, match="bit depth"):
        load_image(path)


def test_load_missing_and_garbage(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_image(tmp_path / "nope.png")
    (tmp_path / "junk.png").write_bytes(b"not an image")
    with pytest.raises(ImageDecodeError):
        load_image(tmp_path / "junk.png")


def test_save_quantizes_half_up(tmp_path):
    save_image(np.full((3, 4, 3), 0.5), tmp_path / "half.png")
    assert np.all(np.asarray(Image.open(tmp_path / "half.png")) == 128)
    save_image(np.zeros((3, 4, 1)), tmp_path / "black.ppm")
    assert np.all(np.asarray(Image.open(tmp_path / "black.ppm")) == 0)


@pytest.mark.parametrize("suffix", [".png", ".ppm"])
def test_save_load_round_trip(tmp_path, suffix):
    img = random_image(3, 9, 7)
    save_image(img, tmp_path / f"r{suffix}")
    assert np.max(np.abs(load_image(tmp_path / f"r{suffix}") - img)) <= 1 / 510 + 1e-12


def test_quantize_bounds():
    assert quantize(np.array([-1.0, 0.0, 1 / 510, 1.0, 2.0])).tolist() == [0, 0, 1, 255, 255]


def test_grayscale_weights():
    def g(rgb):
        return float(to_grayscale(np.array(rgb, dtype=float).reshape(1, 1, 3))[0, 0, 0])

    assert g((1, 1, 1)) == pytest.approx(1.0, abs=1e-12)
    assert g((1, 0, 0)) == pytest.approx(0.299)
    assert g((0.2, 0.4, 0.6)) == pytest.approx(0.3630, abs=1e-6)
    with pytest.raises(ValueError):
        to_grayscale(np.zeros((2, 2, 1)))


def test_mean_intensity():
    assert mean_intensity(np.full((4, 5, 1), 0.7)) == pytest.approx(0.7)
    assert mean_intensity(np.array([[0.0], [1.0]])) == 0.5
    assert abs(mean_intensity(np.arange(9.0).reshape(3, 3) / 8) - 0.5) < 1e-9


def test_sobel_edges():
    assert not sobel_edges(np.full((8, 8), 0.3), 1e-12).any()
    step = np.zeros((6, 8))
    step[:, 4:] = 1.0
    mask = sobel_edges(step, 0.5)
    expected = np.zeros_like(mask)
    expected[:, 3:5] = True
    assert np.array_equal(mask, expected)
    assert not sobel_edges(random_image(1, 8, 8, 1), 1e9).any()


def test_sobel_matches_oracle():
    plane = random_image(2, 10, 12, 1)[:, :, 0]
    for thr in (0.2, 0.8, 1.5):
        assert np.array_equal(sobel_edges(plane, thr), oracles.sobel_magnitude(plane) > thr)


def test_laplacian():
    assert np.all(laplacian(np.full((5, 5), 0.4)) == 0)
    ramp = np.tile(np.arange(6.0) / 5, (5, 1))
    np.testing.assert_allclose(laplacian(ramp)[1:-1, 1:-1], 0, atol=1e-12)
    imp = np.zeros((3, 3))
    imp[1, 1] = 1
    np.testing.assert_array_equal(laplacian(imp), [[0, 1, 0], [1, -4, 1], [0, 1, 0]])


def test_gaussian_filter_constant_and_impulse():
    const = np.full((9, 9, 3), 0.37)
    assert np.array_equal(gaussian_filter(const, 2.0), const)
    imp = np.zeros((15, 15, 1))
    imp[7, 7] = 1.0
    k = gaussian_kernel(1.0)
    out = gaussian_filter(imp, 1.0)[:, :, 0]
    np.testing.assert_allclose(out[4:11, 4:11], np.outer(k, k), atol=1e-6)


def test_gaussian_small_sigma_near_identity():
    img = random_image(5, 8, 8, 1)
    k = gaussian_kernel(0.1)
    assert len(k) == 3
    off_mass = 1 - k[1] ** 2
    assert np.max(np.abs(gaussian_filter(img, 0.1) - img)) <= off_mass + 1e-12


def test_gaussian_matches_oracle():
    plane = random_image(6, 12, 10, 1)[:, :, 0]
    np.testing.assert_allclose(gaussian_filter(plane, 1.3)[:, :, 0], oracles.gaussian(plane, 1.3), atol=1e-12)


def test_box_filter():
    assert np.array_equal(box_filter(np.full((6, 6, 1), 0.2), 2), np.full((6, 6, 1), 0.2))
    small = random_image(7, 3, 3, 1)
    assert box_filter(small, 1)[1, 1, 0] == pytest.approx(small.mean(), abs=1e-12)
    plane = random_image(8, 32, 32, 1)[:, :, 0]
    assert np.max(np.abs(box_filter(plane, 4)[:, :, 0] - oracles.box(plane, 4))) <= 1e-9
    with pytest.raises(ValueError):
        box_filter(plane, 0)


def test_max_pool():
    img = random_image(9, 5, 5, 1)
    assert np.array_equal(max_pool(img, 1), img)
    assert max_pool(np.array([[1, 2], [3, 4]]) / 4, 2).ravel().tolist() == [1.0]
    pooled = max_pool(img, 2)
    assert pooled.shape == (3, 3, 1)
    assert np.array_equal(pooled[:, :, 0], oracles.max_pool(img[:, :, 0], 2))


def test_gaussian_kernel_radius():
    for sigma in (0.5, 1.0, 1.7, 3.0):
        k = gaussian_kernel(sigma)
        assert len(k) == 2 * math.ceil(3 * sigma) + 1
        assert k.sum() == pytest.approx(1.0)
    with pytest.raises(ValueError):
        gaussian_kernel(0)
