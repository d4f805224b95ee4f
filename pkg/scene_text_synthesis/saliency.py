import abc
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import scipy.ndimage as ndi

from scene_text_synthesis.config import Config
from scene_text_synthesis.exceptions import InvalidChannelCount
from scene_text_synthesis.raster import ColorSpace, RasterImage, srgb_array_to_lab

logger = logging.getLogger(__name__)

# Nominal Lab ranges used for quantization.
_LAB_LOW = np.array([0.0, -128.0, -128.0])
_LAB_SPAN = np.array([100.0, 256.0, 256.0])


@dataclass(frozen=True)
class SaliencyMap:
    """Saliency values in [0, 1] with their cached global mean."""

    values: np.ndarray
    mean: float

    @classmethod
    def from_values(cls, values: np.ndarray) -> "SaliencyMap":
        values = np.asarray(values, dtype=np.float32)
        # float64 accumulation of float32 values is exact for any realistic size, so a
        # constant map has a mean equal to its value.
        mean = float(values.mean(dtype=np.float64)) if values.size else 0.0
        return cls(values=values, mean=mean)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape

    def to_image(self) -> RasterImage:
        """8-bit grayscale rendition for debug output."""
        gray = np.rint(np.clip(self.values, 0.0, 1.0) * 255.0).astype(np.uint8)
        return RasterImage(gray, ColorSpace.GRAY)


@dataclass(frozen=True)
class SaliencyMask:
    mask: np.ndarray
    threshold: float


class SaliencyBackend(abc.ABC):
    """Seam for swapping saliency models."""

    @abc.abstractmethod
    def compute(self, img: RasterImage) -> SaliencyMap:
        """Return a saliency map normalized to [0, 1]."""


class HistogramContrastSaliency(SaliencyBackend):
    """Global color-contrast saliency over a quantized Lab histogram.

    Lab colors are quantized into bins_per_channel bins per channel; the most
    frequent bins covering at least `coverage` of the pixels are kept and every
    other bin is merged into its nearest kept color. The saliency of a kept color
    c is sum_j f_j * ||c - c_j|| over kept colors with frequencies f_j. Per-pixel
    values are smoothed with a Gaussian of sigma = sigma_fraction * diagonal and
    min-max normalized.

    Args:
        bins_per_channel (int): Quantization bins per Lab channel.
        coverage (float): Fraction of pixels the kept colors must cover.
        sigma_fraction (float): Smoothing sigma relative to the image diagonal.
    """

    def __init__(
        self,
        bins_per_channel: int = 12,
        coverage: float = 0.95,
        sigma_fraction: float = 0.02,
    ):
        self._bins = int(bins_per_channel)
        self._coverage = float(coverage)
        self._sigma_fraction = float(sigma_fraction)

    @classmethod
    def from_config(cls, config: Config = Config()) -> "HistogramContrastSaliency":
        return cls(**config.saliency)

    def quantize(self, lab: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Quantize Lab pixels into kept colors.

        Args:
            lab (np.ndarray): (H, W, 3) Lab values.

        Returns:
            Tuple containing:
                np.ndarray: (H, W) index of each pixel's kept color
                np.ndarray: (K, 3) kept colors, the mean Lab of their bins
                np.ndarray: (K,) frequencies after merging dropped bins
        """
        flat = lab.reshape(-1, 3).astype(np.float64)
        n = flat.shape[0]
        q = np.floor((flat - _LAB_LOW) / _LAB_SPAN * self._bins).astype(np.int64)
        q = np.clip(q, 0, self._bins - 1)
        keys = (q[:, 0] * self._bins + q[:, 1]) * self._bins + q[:, 2]

        unique_keys, bin_of_pixel, counts = np.unique(
            keys, return_inverse=True, return_counts=True
        )
        bin_of_pixel = bin_of_pixel.reshape(-1)
        colors = np.stack(
            [
                np.bincount(bin_of_pixel, weights=flat[:, c], minlength=len(counts))
                for c in range(3)
            ],
            axis=1,
        ) / counts[:, np.newaxis]

        # Most frequent first; ties by key for determinism.
        order = np.lexsort((unique_keys, -counts))
        cumulative = np.cumsum(counts[order])
        n_keep = int(np.searchsorted(cumulative, self._coverage * n - 1e-9) + 1)
        n_keep = min(n_keep, len(order))
        kept = order[:n_keep]

        remap = np.empty(len(counts), dtype=np.int64)
        remap[kept] = np.arange(n_keep)
        dropped = order[n_keep:]
        if dropped.size:
            d = np.linalg.norm(
                colors[dropped][:, np.newaxis, :] - colors[kept][np.newaxis, :, :],
                axis=2,
            )
            remap[dropped] = np.argmin(d, axis=1)

        kept_colors = colors[kept]
        kept_counts = np.bincount(remap, weights=counts, minlength=n_keep)
        frequencies = kept_counts / float(n)

        return remap[bin_of_pixel].reshape(lab.shape[:2]), kept_colors, frequencies

    def color_contrast(self, img: RasterImage) -> np.ndarray:
        """Per-pixel color contrast before smoothing and normalization."""
        if img.channels != 3 or img.colorspace != ColorSpace.SRGB8:
            raise InvalidChannelCount(img.channels, 3)
        lab = srgb_array_to_lab(img.data)
        index, colors, frequencies = self.quantize(lab)
        distances = np.linalg.norm(
            colors[:, np.newaxis, :] - colors[np.newaxis, :, :], axis=2
        )
        color_saliency = distances @ frequencies
        return color_saliency[index]

    def compute(self, img: RasterImage) -> SaliencyMap:
        raw = self.color_contrast(img)
        sigma = self._sigma_fraction * float(np.hypot(img.height, img.width))
        if sigma > 0:
            raw = ndi.gaussian_filter(raw, sigma=sigma, mode="nearest")
        low, high = float(raw.min()), float(raw.max())
        if high - low <= 1e-12:
            logger.debug("Degenerate single-color image, saliency is zero.")
            return SaliencyMap.from_values(np.zeros(raw.shape, dtype=np.float32))
        return SaliencyMap.from_values((raw - low) / (high - low))


def compute_saliency(
    img: RasterImage, backend: Optional[SaliencyBackend] = None
) -> SaliencyMap:
    """Saliency of an sRGB image; histogram contrast unless another backend is given."""
    if backend is None:
        backend = HistogramContrastSaliency()
    return backend.compute(img)


def low_saliency_mask(s: SaliencyMap) -> SaliencyMask:
    """Mask of pixels at or below the global mean saliency."""
    return SaliencyMask(mask=s.values.astype(np.float64) <= s.mean, threshold=s.mean)
