from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from PIL import Image, ImageDraw, ImageFont

from scene_text_synthesis.appearance import default_font_dir
from scene_text_synthesis.raster import ColorSpace, RasterImage
from scene_text_synthesis.utils import quad_to_int, rotated_corners

SKY, WALL, PERSON = 1, 2, 3
FIXTURE_PALETTE: Dict[int, str] = {SKY: "sky", WALL: "wall", PERSON: "person"}

DEFAULT_WORDS = (
    "exit",
    "open",
    "cafe",
    "hotel",
    "bank",
    "market",
    "station",
    "parking",
    "museum",
    "library",
)


def fixture_font_path() -> Path:
    return default_font_dir() / "DejaVuSans.ttf"


def two_tone_background(
    height: int = 120,
    width: int = 160,
    split: float = 0.3,
    top: Tuple[int, int, int] = (90, 150, 220),
    bottom: Tuple[int, int, int] = (200, 190, 170),
    noise: float = 0.0,
    seed: int = 42,
) -> RasterImage:
    """Background whose top split fraction is one color and the rest another.

    Args:
        height (int): Image height. Defaults to 120.
        width (int): Image width. Defaults to 160.
        split (float): Fraction of rows taken by the top color. Defaults to 0.3.
        top (Tuple[int, int, int]): Top sRGB color.
        bottom (Tuple[int, int, int]): Bottom sRGB color.
        noise (float): Standard deviation of Gaussian pixel noise. Defaults to 0.
        seed (int): Random seed for reproducibility. Defaults to 42.
    """
    rng = np.random.default_rng(seed=seed)
    data = np.empty((height, width, 3), dtype=np.float64)
    cut = int(round(split * height))
    data[:cut] = top
    data[cut:] = bottom
    if noise > 0:
        data += rng.normal(0.0, noise, size=data.shape)
    return RasterImage(np.clip(np.rint(data), 0, 255).astype(np.uint8), ColorSpace.SRGB8)


def two_tone_labels(
    height: int = 120,
    width: int = 160,
    split: float = 0.3,
    top: int = SKY,
    bottom: int = WALL,
) -> np.ndarray:
    labels = np.full((height, width), bottom, dtype=np.uint16)
    labels[: int(round(split * height))] = top
    return labels


def oriented_edge_image(
    size: int = 128,
    theta_degrees: float = 30.0,
    low: int = 60,
    high: int = 200,
) -> RasterImage:
    """Anti-aliased straight edge through the center along (cos theta, sin theta)."""
    theta = np.deg2rad(theta_degrees)
    ys, xs = np.mgrid[0:size, 0:size] + 0.5
    # Signed distance to the line through the center along the baseline direction.
    d = -(xs - size / 2) * np.sin(theta) + (ys - size / 2) * np.cos(theta)
    coverage = np.clip(d + 0.5, 0.0, 1.0)
    gray = np.rint(low + (high - low) * coverage).astype(np.uint8)
    return RasterImage(np.repeat(gray[..., np.newaxis], 3, axis=2), ColorSpace.SRGB8)


def text_crop(
    text: str = "SALE",
    foreground: Tuple[int, int, int] = (255, 255, 255),
    background: Tuple[int, int, int] = (110, 110, 110),
    font_size: int = 28,
    margin: int = 20,
    font_path: Optional[Union[str, Path]] = None,
) -> Tuple[RasterImage, Tuple[int, int, int, int]]:
    """Text drawn without anti-aliasing on a flat background, with its box.

    Returns:
        Tuple containing:
            RasterImage: sRGB8 crop
            Tuple[int, int, int, int]: Half-open text box, 2 px around the ink
    """
    font = ImageFont.truetype(str(font_path or fixture_font_path()), size=font_size)
    measure = ImageDraw.Draw(Image.new("L", (1, 1)))
    left, top, right, bottom = measure.textbbox((0, 0), text, font=font)
    width = right - left + 2 * margin
    height = bottom - top + 2 * margin

    im = Image.new("RGB", (width, height), background)
    draw = ImageDraw.Draw(im)
    # Binary glyphs so every text pixel carries exactly the foreground color.
    draw.fontmode = "1"
    draw.text((margin - left, margin - top), text, font=font, fill=foreground)
    box = (margin - 2, margin - 2, width - margin + 2, height - margin + 2)
    return RasterImage.from_pil(im), box


def write_palette(
    path: Union[str, Path], palette: Dict[int, str] = FIXTURE_PALETTE
) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as f:
        f.write("# id\tname\n")
        for class_id in sorted(palette):
            f.write(f"{class_id}\t{palette[class_id]}\n")
    return path


def write_label_map(path: Union[str, Path], labels: np.ndarray) -> Path:
    Image.fromarray(labels.astype(np.uint8), mode="L").save(path, format="PNG")
    return Path(path)


def write_background_set(
    root: Union[str, Path],
    n_images: int = 3,
    height: int = 120,
    width: int = 160,
    seed: int = 42,
) -> Dict[str, Path]:
    """Two-tone backgrounds (sky over wall) with label maps and a palette.

    Wall colors and split heights vary per image.

    Returns:
        Dict[str, Path]: backgrounds_dir, semantic_maps_dir and palette_path.
    """
    rng = np.random.default_rng(seed=seed)
    root = Path(root)
    backgrounds = root / "backgrounds"
    labels = root / "labels"
    backgrounds.mkdir(parents=True, exist_ok=True)
    labels.mkdir(parents=True, exist_ok=True)
    for i in range(n_images):
        split = float(rng.uniform(0.2, 0.3))
        wall = tuple(int(v) for v in rng.integers(150, 230, size=3))
        image = two_tone_background(height, width, split, bottom=wall)
        image.to_file(backgrounds / f"bg_{i:03d}.png")
        write_label_map(labels / f"bg_{i:03d}.png", two_tone_labels(height, width, split))
    return {
        "backgrounds_dir": backgrounds,
        "semantic_maps_dir": labels,
        "palette_path": write_palette(root / "palette.txt"),
    }


def write_icdar_dataset(
    root: Union[str, Path],
    n_images: int = 2,
    words: Sequence[str] = DEFAULT_WORDS,
    boxes_per_image: int = 2,
    flush_box: bool = False,
    separator: str = ",",
    seed: int = 42,
) -> Path:
    """Annotated scene-text dataset in ICDAR 2013 word format.

    Each image holds boxes_per_image words in light text on a darker band.

    Args:
        root (Union[str, Path]): Output directory.
        n_images (int): Number of images. Defaults to 2.
        words (Sequence[str]): Words to draw from.
        boxes_per_image (int): Words per image. Defaults to 2.
        flush_box (bool): Add a box covering the whole first image, which has no
            background ring. Defaults to False.
        separator (str): "," (test split style) or " " (train split style).
        seed (int): Random seed for reproducibility. Defaults to 42.
    """
    rng = np.random.default_rng(seed=seed)
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    font = ImageFont.truetype(str(fixture_font_path()), size=24)
    width, row_height = 320, 60

    for i in range(n_images):
        height = row_height * boxes_per_image
        bg = tuple(int(v) for v in rng.integers(40, 90, size=3))
        fg = tuple(int(v) for v in rng.integers(190, 255, size=3))
        im = Image.new("RGB", (width, height), bg)
        draw = ImageDraw.Draw(im)
        draw.fontmode = "1"
        lines = []
        for j in range(boxes_per_image):
            word = words[int(rng.integers(len(words)))]
            x, y = 20 + int(rng.integers(0, 40)), j * row_height + 18
            left, top, right, bottom = draw.textbbox((x, y), word, font=font)
            draw.text((x, y), word, font=font, fill=fg)
            box = (left - 2, top - 2, right + 2, bottom + 2)
            lines.append(
                separator.join(str(v) for v in box) + f'{separator}"{word}"'
            )
        if flush_box and i == 0:
            flush = (0, 0, width, height)
            lines.append(separator.join(str(v) for v in flush) + f'{separator}"all"')
        im.save(root / f"img_{i + 1}.png")
        with open(root / f"gt_img_{i + 1}.txt", "w", encoding="utf-8") as f:
            f.write("\n".join(lines) + "\n")
    return root


def write_corpus(path: Union[str, Path], lines: Sequence[str]) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")
    return path


def random_quads(
    n: int = 500,
    width: int = 640,
    height: int = 480,
    seed: int = 42,
) -> Tuple[List[np.ndarray], List[str]]:
    """Random integer rotated-rectangle quads with transcripts."""
    rng = np.random.default_rng(seed=seed)
    alphabet = list("abcdefghijklmnopqrstuvwxyz0123456789,.-'\"#é中文")
    quads, texts = [], []
    for _ in range(n):
        h = float(rng.uniform(10, 60))
        w = min(h * float(rng.uniform(1, 6)), width / 2.0 - 1.0)
        theta = float(rng.uniform(-np.pi / 4, np.pi / 4))
        cx = float(rng.uniform(w, width - w))
        cy = float(rng.uniform(h, height - h))
        quads.append(quad_to_int(rotated_corners(cx, cy, w, h, theta)))
        length = int(rng.integers(1, 12))
        texts.append("".join(rng.choice(alphabet, size=length).tolist()))
    return quads, texts
