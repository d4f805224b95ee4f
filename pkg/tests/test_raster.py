import numpy as np
import pytest

from scene_text_synthesis.exceptions import ImageTooSmall, InvalidChannelCount
from scene_text_synthesis.raster import (
    ColorSpace,
    RasterImage,
    integral_image,
    lab_to_srgb,
    sobel_gradients,
    srgb_array_to_lab,
    srgb_to_lab,
)


def test_lab_round_trip_within_one_code(rng):
    data = rng.integers(0, 256, size=(64, 64, 3), dtype=np.uint8)
    back = lab_to_srgb(srgb_to_lab(RasterImage(data)))
    diff = np.abs(back.data.astype(np.int64) - data.astype(np.int64))
    assert diff.max() <= 1


def test_grays_have_no_chroma():
    grays = np.repeat(np.arange(256, dtype=np.uint8)[:, np.newaxis], 3, axis=1)
    lab = srgb_array_to_lab(grays)
    assert np.abs(lab[:, 1:]).max() < 1e-6
    assert np.all(np.diff(lab[:, 0]) > 0)


def test_white_and_black():
    lab = srgb_array_to_lab(np.array([[255, 255, 255], [0, 0, 0]], dtype=np.uint8))
    np.testing.assert_allclose(lab[0], [100.0, 0.0, 0.0], atol=1e-6)
    np.testing.assert_allclose(lab[1], [0.0, 0.0, 0.0], atol=1e-6)


def test_lab_needs_three_channels():
    gray = RasterImage(np.zeros((4, 4), dtype=np.uint8), ColorSpace.GRAY)
    with pytest.raises(InvalidChannelCount):
        srgb_to_lab(gray)


def test_raster_rejects_bad_channel_counts():
    with pytest.raises(InvalidChannelCount):
        RasterImage(np.zeros((4, 4, 2), dtype=np.uint8))
    with pytest.raises(InvalidChannelCount):
        RasterImage(np.zeros((4, 4, 3), dtype=np.uint8), ColorSpace.GRAY)


def test_to_gray_uses_rec601_weights():
    data = np.zeros((1, 3, 3), dtype=np.uint8)
    data[0, 0, 0] = data[0, 1, 1] = data[0, 2, 2] = 255
    gray = RasterImage(data).to_gray()
    np.testing.assert_allclose(gray.data[0], [0.299, 0.587, 0.114], atol=1e-6)


def test_file_round_trip(tmp_path, rng):
    data = rng.integers(0, 256, size=(10, 12, 3), dtype=np.uint8)
    RasterImage(data).to_file(tmp_path / "a.png")
    np.testing.assert_array_equal(RasterImage.from_file(tmp_path / "a.png").data, data)


def test_sobel_unit_ramp():
    ramp = np.tile(np.arange(10, dtype=np.float32), (8, 1))
    grad = sobel_gradients(RasterImage(ramp, ColorSpace.GRAY))
    np.testing.assert_allclose(grad.gx[:, 1:-1], 1.0, atol=1e-6)
    np.testing.assert_allclose(grad.gy, 0.0, atol=1e-6)
    np.testing.assert_allclose(grad.orientation[:, 1:-1], 0.0, atol=1e-6)


def test_sobel_orientation_range(rng):
    noise = rng.random((16, 16)).astype(np.float32)
    grad = sobel_gradients(RasterImage(noise, ColorSpace.GRAY))
    assert grad.orientation.min() >= 0.0
    assert grad.orientation.max() < np.pi
    np.testing.assert_allclose(grad.magnitude, np.hypot(grad.gx, grad.gy), rtol=1e-5)


def test_sobel_needs_three_by_three():
    with pytest.raises(ImageTooSmall):
        sobel_gradients(RasterImage(np.zeros((2, 5), dtype=np.float32), ColorSpace.GRAY))


def test_integral_matches_brute_force(rng):
    mask = rng.random((37, 53)) < 0.4
    table = integral_image(mask)
    assert table.shape == mask.shape
    for _ in range(200):
        x0, x1 = sorted(rng.integers(0, 54, size=2).tolist())
        y0, y1 = sorted(rng.integers(0, 38, size=2).tolist())
        assert table.rect_sum(x0, y0, x1, y1) == int(mask[y0:y1, x0:x1].sum())


def test_integral_vectorized_queries(rng):
    mask = rng.random((20, 30)) < 0.5
    table = integral_image(mask)
    x0 = np.array([0, 5, 10])
    y0 = np.array([0, 2, 4])
    sums = table.rect_sums(x0, y0, x0 + 8, y0 + 6)
    expected = [int(mask[y : y + 6, x : x + 8].sum()) for x, y in zip(x0, y0)]
    assert sums.tolist() == expected


def test_sobel_is_linear(rng):
    image = rng.random((12, 15)).astype(np.float32)
    base = sobel_gradients(RasterImage(image, ColorSpace.GRAY))
    scaled = sobel_gradients(RasterImage(image * np.float32(2.5), ColorSpace.GRAY))
    np.testing.assert_allclose(scaled.gx, 2.5 * base.gx, rtol=1e-5, atol=1e-6)
    np.testing.assert_allclose(scaled.gy, 2.5 * base.gy, rtol=1e-5, atol=1e-6)


def test_sobel_vertical_step_edge():
    step = np.zeros((9, 12), dtype=np.float32)
    step[:, 6:] = 1.0
    grad = sobel_gradients(RasterImage(step, ColorSpace.GRAY))
    assert np.all(grad.gy == 0.0)
    np.testing.assert_allclose(grad.gx[1:-1, 5:7], 0.5, atol=1e-6)
    assert np.all(grad.gx[:, :5] == 0.0)
    assert np.all(grad.gx[:, 7:] == 0.0)


def test_sobel_constant_image():
    flat = np.full((7, 9), 0.3, dtype=np.float32)
    grad = sobel_gradients(RasterImage(flat, ColorSpace.GRAY))
    assert np.all(grad.gx == 0.0)
    assert np.all(grad.gy == 0.0)
    assert np.all(grad.magnitude == 0.0)
