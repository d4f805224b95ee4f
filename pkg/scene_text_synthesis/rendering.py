import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import TYPE_CHECKING, FrozenSet, Tuple

import numpy as np
import scipy.ndimage as ndi
from fontTools.ttLib import TTFont
from PIL import Image, ImageDraw, ImageFont

from scene_text_synthesis.appearance import FontEntry
from scene_text_synthesis.converter import format_groundtruth
from scene_text_synthesis.exceptions import EmptyText, MissingGlyph
from scene_text_synthesis.placement import PlacementCandidate
from scene_text_synthesis.raster import (
    ColorSpace,
    LabPixel,
    RasterImage,
    lab_array_to_linear,
    linear_to_srgb,
    srgb_to_linear,
)
from scene_text_synthesis.utils import rotated_corners

if TYPE_CHECKING:
    from scene_text_synthesis.containers.sample import SynthesizedSample

logger = logging.getLogger(__name__)

_REFERENCE_SIZE = 100
MIN_PX_HEIGHT = 8


@lru_cache(maxsize=64)
def _codepoints(font_path: str) -> FrozenSet[int]:
    font = TTFont(font_path, lazy=True)
    try:
        cmap = font.getBestCmap() or {}
    finally:
        font.close()
    return frozenset(cmap)


@lru_cache(maxsize=256)
def _truetype(font_path: str, size: int) -> ImageFont.FreeTypeFont:
    return ImageFont.truetype(font_path, size=size)


@lru_cache(maxsize=64)
def _cap_height_ratio(font_path: str) -> float:
    """Cap height of "H" per unit of font size."""
    _, top, _, bottom = _truetype(font_path, _REFERENCE_SIZE).getbbox("H", anchor="ls")
    return max(1, bottom - top) / float(_REFERENCE_SIZE)


def font_size_for(font_path: str, px_height: int) -> int:
    """Font size whose cap height is px_height pixels."""
    return max(1, int(round(px_height / _cap_height_ratio(font_path))))


def check_glyphs(text: str, font: FontEntry) -> None:
    """Raise MissingGlyph for the first character the font cannot draw."""
    codepoints = _codepoints(font.path)
    for char in text:
        if char.isspace():
            continue
        if ord(char) not in codepoints:
            raise MissingGlyph(char, font.path)


@dataclass(frozen=True)
class TextLayout:
    """Rendered glyph coverage of a string.

    Attributes:
        text (str): The rendered string.
        font (FontEntry): Font it was rendered with.
        px_height (int): Cap height in pixels.
        alpha (RasterImage): Gray float32 coverage in [0, 1].
        ink_box (Tuple[int, int, int, int]): Tight half-open bounds of alpha > 0.
    """

    text: str
    font: FontEntry
    px_height: int
    alpha: RasterImage
    ink_box: Tuple[int, int, int, int]

    def ink(self) -> np.ndarray:
        x0, y0, x1, y1 = self.ink_box
        return self.alpha.data[y0:y1, x0:x1]


def ink_bounds(alpha: np.ndarray) -> Tuple[int, int, int, int]:
    ys, xs = np.nonzero(alpha > 0)
    if ys.size == 0:
        return (0, 0, 0, 0)
    return int(xs.min()), int(ys.min()), int(xs.max()) + 1, int(ys.max()) + 1


def rasterize_text(text: str, font: FontEntry, px_height: int) -> TextLayout:
    """Anti-aliased coverage of text with its cap height at px_height pixels.

    Characters are laid out left to right by advance width, without kerning.

    Raises:
        EmptyText: If the text is empty after trimming or draws no ink.
        MissingGlyph: If the font lacks a character.
    """
    text = text.strip()
    if not text:
        raise EmptyText("Nothing to render after trimming.")
    if px_height < MIN_PX_HEIGHT:
        raise ValueError(f"px_height must be >= {MIN_PX_HEIGHT}, got {px_height}.")
    check_glyphs(text, font)

    f = _truetype(font.path, font_size_for(font.path, px_height))
    ascent, descent = f.getmetrics()
    pad = f.size // 4 + 2
    advances = [f.getlength(char) for char in text]

    width = int(math.ceil(sum(advances))) + 2 * pad
    height = ascent + descent + 2 * pad
    canvas = Image.new("L", (width, height), 0)
    draw = ImageDraw.Draw(canvas)
    pen, baseline = float(pad), float(pad + ascent)
    for char, advance in zip(text, advances):
        if not char.isspace():
            draw.text((pen, baseline), char, font=f, fill=255, anchor="ls")
        pen += advance

    alpha = np.asarray(canvas, dtype=np.float32) / np.float32(255.0)
    box = ink_bounds(alpha)
    if box[2] <= box[0] or box[3] <= box[1]:
        raise EmptyText(f"{text!r} draws no ink in {font.style}.")
    return TextLayout(
        text=text,
        font=font,
        px_height=int(px_height),
        alpha=RasterImage(alpha, ColorSpace.GRAY),
        ink_box=box,
    )


def _fit_ink(
    ink: np.ndarray, placement: PlacementCandidate, padding_fraction: float
) -> np.ndarray:
    ih, iw = ink.shape
    avail_w = placement.width * (1.0 - 2.0 * padding_fraction)
    avail_h = placement.height * (1.0 - 2.0 * padding_fraction)
    scale = min(avail_w / iw, avail_h / ih)
    sw = max(1, min(int(math.floor(avail_w)), int(round(iw * scale))))
    sh = max(1, min(int(math.floor(avail_h)), int(round(ih * scale))))
    if (sw, sh) == (iw, ih):
        return ink.astype(np.float32)
    resized = Image.fromarray(ink.astype(np.float32), mode="F").resize(
        (sw, sh), Image.Resampling.BILINEAR
    )
    return np.clip(np.asarray(resized, dtype=np.float32), 0.0, 1.0)


def composite(
    background: RasterImage,
    layout: TextLayout,
    color: LabPixel,
    placement: PlacementCandidate,
    padding_fraction: float = 0.05,
) -> Tuple[RasterImage, np.ndarray]:
    """Blend colored text into a background at a rotated placement.

    The ink is scaled to fit the placement box minus padding on every side,
    centered, rotated by theta with bilinear sampling and alpha-blended in linear
    RGB. Pixels without coverage are left untouched.

    Returns:
        Tuple containing:
            RasterImage: Composited sRGB8 image
            np.ndarray: (4, 2) tight rotated quad of the placed ink
    """
    out = background.data.copy()
    cx, cy = placement.center
    ink = layout.ink()
    if ink.size == 0:
        quad = rotated_corners(cx, cy, 0.0, 0.0, placement.theta)
        return RasterImage(out, ColorSpace.SRGB8), quad

    scaled = _fit_ink(ink, placement, padding_fraction)
    sh, sw = scaled.shape
    quad = rotated_corners(cx, cy, sw, sh, placement.theta)

    x0 = max(0, int(math.floor(quad[:, 0].min())) - 1)
    y0 = max(0, int(math.floor(quad[:, 1].min())) - 1)
    x1 = min(background.width, int(math.ceil(quad[:, 0].max())) + 1)
    y1 = min(background.height, int(math.ceil(quad[:, 1].max())) + 1)
    if x1 <= x0 or y1 <= y0:
        return RasterImage(out, ColorSpace.SRGB8), quad

    ys, xs = np.mgrid[y0:y1, x0:x1]
    dx = xs + 0.5 - cx
    dy = ys + 0.5 - cy
    c, s = math.cos(placement.theta), math.sin(placement.theta)
    col = c * dx + s * dy + sw / 2.0 - 0.5
    row = -s * dx + c * dy + sh / 2.0 - 0.5
    alpha = ndi.map_coordinates(
        scaled.astype(np.float64), [row, col], order=1, mode="constant", cval=0.0
    )
    alpha = np.clip(alpha, 0.0, 1.0)
    covered = alpha > 0
    if not covered.any():
        return RasterImage(out, ColorSpace.SRGB8), quad

    text_linear = lab_array_to_linear(np.array(color, dtype=np.float64))
    window = out[y0:y1, x0:x1]
    a = alpha[covered][:, np.newaxis]
    bg_linear = srgb_to_linear(window[covered].astype(np.float64) / 255.0)
    blended = a * text_linear + (1.0 - a) * bg_linear
    window[covered] = np.rint(linear_to_srgb(blended) * 255.0).astype(np.uint8)

    return RasterImage(out, ColorSpace.SRGB8), quad


def emit_annotations(sample: "SynthesizedSample") -> str:
    """Quad ground truth of a synthesized sample, one instance per line."""
    return format_groundtruth(
        [instance.quad for instance in sample.instances],
        [instance.text for instance in sample.instances],
    )
