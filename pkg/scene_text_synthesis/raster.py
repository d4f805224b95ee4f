import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import NamedTuple, Tuple, Union

import numpy as np
import scipy.ndimage as ndi
from PIL import Image

from scene_text_synthesis.exceptions import ImageTooSmall, InvalidChannelCount

logger = logging.getLogger(__name__)

# sRGB primaries under D65. The reference white is taken as the image of RGB white
# so that gray inputs land exactly on the a = b = 0 axis.
_XYZ_FROM_LINEAR_RGB = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_LINEAR_RGB_FROM_XYZ = np.linalg.inv(_XYZ_FROM_LINEAR_RGB)
_WHITE_XYZ = _XYZ_FROM_LINEAR_RGB.sum(axis=1)

_LAB_DELTA = 6.0 / 29.0
_LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


class ColorSpace(str, Enum):
    SRGB8 = "sRGB8"
    LINEAR_RGB = "LinearRGB"
    LAB = "Lab"
    GRAY = "Gray"


class LabPixel(NamedTuple):
    L: float
    a: float
    b: float


@dataclass(frozen=True)
class RasterImage:
    """H x W pixel grid tagged with its color space.

    sRGB8 images are uint8 with 3 channels; LinearRGB and Lab are float32 with 3
    channels; Gray is single channel, uint8 or float32.
    """

    data: np.ndarray
    colorspace: ColorSpace = ColorSpace.SRGB8

    def __post_init__(self) -> None:
        channels = 1 if self.data.ndim == 2 else self.data.shape[-1]
        if self.data.ndim not in (2, 3) or channels not in (1, 3):
            raise InvalidChannelCount(channels, 3)
        if self.colorspace == ColorSpace.GRAY:
            if self.data.ndim != 2:
                raise InvalidChannelCount(channels, 1)
            if self.data.dtype not in (np.uint8, np.float32):
                raise TypeError(f"Gray images are uint8 or float32, not {self.data.dtype}")
            return
        if channels != 3 or self.data.ndim != 3:
            raise InvalidChannelCount(channels, 3)
        expected = np.uint8 if self.colorspace == ColorSpace.SRGB8 else np.float32
        if self.data.dtype != expected:
            raise TypeError(
                f"{self.colorspace.value} images are {np.dtype(expected)}, "
                f"not {self.data.dtype}"
            )

    @property
    def height(self) -> int:
        return int(self.data.shape[0])

    @property
    def width(self) -> int:
        return int(self.data.shape[1])

    @property
    def channels(self) -> int:
        return 1 if self.data.ndim == 2 else int(self.data.shape[2])

    @property
    def shape(self) -> Tuple[int, int]:
        return self.height, self.width

    def crop(self, x0: int, y0: int, x1: int, y1: int) -> "RasterImage":
        """Crop to the half-open rectangle [x0, x1) x [y0, y1), clipped to the image."""
        x0, x1 = max(0, int(x0)), min(self.width, int(x1))
        y0, y1 = max(0, int(y0)), min(self.height, int(y1))
        return RasterImage(self.data[y0:y1, x0:x1].copy(), self.colorspace)

    def to_gray(self) -> "RasterImage":
        """Rec. 601 luma of the sRGB code values, float32 in [0, 1]."""
        if self.colorspace == ColorSpace.GRAY:
            data = self.data.astype(np.float32)
            if self.data.dtype == np.uint8:
                data /= 255.0
            return RasterImage(data, ColorSpace.GRAY)
        if self.colorspace != ColorSpace.SRGB8:
            raise ValueError(f"Gray conversion needs sRGB8 input, not {self.colorspace}")
        luma = (self.data.astype(np.float64) @ _LUMA_WEIGHTS) / 255.0
        return RasterImage(luma.astype(np.float32), ColorSpace.GRAY)

    def to_pil(self) -> Image.Image:
        if self.colorspace == ColorSpace.SRGB8:
            return Image.fromarray(self.data, mode="RGB")
        if self.colorspace == ColorSpace.GRAY and self.data.dtype == np.uint8:
            return Image.fromarray(self.data, mode="L")
        if self.colorspace == ColorSpace.GRAY:
            return Image.fromarray(self.data, mode="F")
        raise ValueError(f"No PIL representation for {self.colorspace.value} images.")

    @classmethod
    def from_pil(cls, image: Image.Image) -> "RasterImage":
        if image.mode == "L":
            return cls(np.array(image, dtype=np.uint8), ColorSpace.GRAY)
        return cls(np.array(image.convert("RGB"), dtype=np.uint8), ColorSpace.SRGB8)

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "RasterImage":
        """Decode a PNG or JPEG as 8-bit sRGB."""
        with Image.open(path) as im:
            if im.format not in ("PNG", "JPEG", "MPO"):
                raise ValueError(f"Unsupported image format {im.format}: {path}")
            return cls(np.array(im.convert("RGB"), dtype=np.uint8), ColorSpace.SRGB8)

    def to_file(self, path: Union[str, Path]) -> None:
        """Encode as PNG or JPEG depending on the suffix."""
        path = Path(path)
        fmt = "JPEG" if path.suffix.lower() in (".jpg", ".jpeg") else "PNG"
        self.to_pil().save(path, format=fmt)


@dataclass(frozen=True)
class GradientField:
    gx: np.ndarray
    gy: np.ndarray
    magnitude: np.ndarray
    orientation: np.ndarray  # Radians in [0, pi).

    @property
    def shape(self) -> Tuple[int, int]:
        return self.gx.shape


class IntegralTable:
    """Summed-area table with a zero first row and column.

    Rectangle queries use half-open bounds [x0, x1) x [y0, y1).
    """

    def __init__(self, values: np.ndarray):
        dtype = np.int64 if values.dtype.kind in "biu" else np.float64
        table = np.zeros((values.shape[0] + 1, values.shape[1] + 1), dtype=dtype)
        table[1:, 1:] = values.astype(dtype).cumsum(axis=0).cumsum(axis=1)
        self._table = table

    @property
    def table(self) -> np.ndarray:
        return self._table

    @property
    def shape(self) -> Tuple[int, int]:
        return self._table.shape[0] - 1, self._table.shape[1] - 1

    def rect_sum(self, x0: int, y0: int, x1: int, y1: int) -> Union[int, float]:
        t = self._table
        value = t[y1, x1] - t[y0, x1] - t[y1, x0] + t[y0, x0]
        return value.item()

    def rect_sums(
        self, x0: np.ndarray, y0: np.ndarray, x1: np.ndarray, y1: np.ndarray
    ) -> np.ndarray:
        """Vectorized rect_sum over broadcastable index arrays."""
        t = self._table
        return t[y1, x1] - t[y0, x1] - t[y1, x0] + t[y0, x0]


def srgb_to_linear(c: np.ndarray) -> np.ndarray:
    """sRGB EOTF for values in [0, 1]."""
    c = np.asarray(c, dtype=np.float64)
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def linear_to_srgb(c: np.ndarray) -> np.ndarray:
    """Inverse sRGB EOTF for values in [0, 1]."""
    c = np.clip(np.asarray(c, dtype=np.float64), 0.0, 1.0)
    return np.where(c <= 0.0031308, 12.92 * c, 1.055 * np.power(c, 1.0 / 2.4) - 0.055)


def _lab_f(t: np.ndarray) -> np.ndarray:
    return np.where(
        t > _LAB_DELTA**3,
        np.cbrt(t),
        t / (3.0 * _LAB_DELTA**2) + 4.0 / 29.0,
    )


def _lab_f_inv(f: np.ndarray) -> np.ndarray:
    return np.where(f > _LAB_DELTA, f**3, 3.0 * _LAB_DELTA**2 * (f - 4.0 / 29.0))


def srgb_array_to_lab(rgb: np.ndarray) -> np.ndarray:
    """uint8 (..., 3) sRGB to float64 (..., 3) CIE Lab."""
    linear = srgb_to_linear(np.asarray(rgb, dtype=np.float64) / 255.0)
    xyz = linear @ _XYZ_FROM_LINEAR_RGB.T
    f = _lab_f(xyz / _WHITE_XYZ)
    lab = np.empty_like(f)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    lab[..., 0] = np.clip(lab[..., 0], 0.0, 100.0)
    return lab


def lab_array_to_linear(lab: np.ndarray) -> np.ndarray:
    """float (..., 3) Lab to float64 (..., 3) linear RGB clipped to the gamut."""
    lab = np.asarray(lab, dtype=np.float64)
    fy = (lab[..., 0] + 16.0) / 116.0
    fx = fy + lab[..., 1] / 500.0
    fz = fy - lab[..., 2] / 200.0
    xyz = np.stack([_lab_f_inv(fx), _lab_f_inv(fy), _lab_f_inv(fz)], axis=-1)
    xyz *= _WHITE_XYZ
    return np.clip(xyz @ _LINEAR_RGB_FROM_XYZ.T, 0.0, 1.0)


def lab_array_to_srgb(lab: np.ndarray) -> np.ndarray:
    """float (..., 3) Lab to uint8 (..., 3) sRGB."""
    srgb = linear_to_srgb(lab_array_to_linear(lab))
    return np.rint(srgb * 255.0).astype(np.uint8)


def srgb_to_lab(img: RasterImage) -> RasterImage:
    """Convert an 8-bit sRGB image to CIE L*a*b* (D65).

    Raises:
        InvalidChannelCount: If the input is not a 3-channel image.
    """
    if img.channels != 3 or img.colorspace != ColorSpace.SRGB8:
        raise InvalidChannelCount(img.channels, 3)
    return RasterImage(srgb_array_to_lab(img.data).astype(np.float32), ColorSpace.LAB)


def lab_to_srgb(img: RasterImage) -> RasterImage:
    """Inverse of srgb_to_lab; out-of-gamut colors clamp."""
    if img.colorspace != ColorSpace.LAB:
        raise ValueError(f"Expected Lab-tagged image, got {img.colorspace.value}.")
    return RasterImage(lab_array_to_srgb(img.data), ColorSpace.SRGB8)


def lab_pixel_to_srgb(color: LabPixel) -> np.ndarray:
    return lab_array_to_srgb(np.array(color, dtype=np.float64))


def sobel_gradients(img: RasterImage) -> GradientField:
    """3x3 Sobel derivatives normalized by 8, replicate borders.

    A unit ramp I(x, y) = x gives gx = 1 at every interior pixel.

    Raises:
        InvalidChannelCount: If the input is not single channel.
        ImageTooSmall: If the image is smaller than 3 x 3.
    """
    if img.channels != 1:
        raise InvalidChannelCount(img.channels, 1)
    if img.height < 3 or img.width < 3:
        raise ImageTooSmall(img.shape, (3, 3))

    data = img.data.astype(np.float32)
    if img.data.dtype == np.uint8:
        data /= 255.0
    gx = ndi.sobel(data, axis=1, mode="nearest") / np.float32(8.0)
    gy = ndi.sobel(data, axis=0, mode="nearest") / np.float32(8.0)
    magnitude = np.sqrt(gx * gx + gy * gy)
    orientation = np.mod(np.arctan2(gy, gx), np.pi).astype(np.float32)
    orientation[orientation >= np.float32(np.pi)] = 0.0

    return GradientField(gx=gx, gy=gy, magnitude=magnitude, orientation=orientation)


def integral_image(mask: np.ndarray) -> IntegralTable:
    """Summed-area table of a boolean grid (exact integer sums)."""
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise ValueError(f"Expected a 2-d mask, got shape {mask.shape}.")
    return IntegralTable(mask.astype(bool))
