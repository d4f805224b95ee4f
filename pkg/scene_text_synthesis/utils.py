from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import List, Union

import mmh3
import numpy as np

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


def engine_version() -> str:
    """Installed package version, recorded in run manifests."""
    try:
        return version("scene_text_synthesis")
    except PackageNotFoundError:
        return "0.0.0+unknown"


def derive_sample_seed(seed: int, index: int) -> int:
    """Counter-based split of a run seed into an unsigned 64-bit sample seed.

    Depends only on (seed, index), so any worker order gives the same seeds.
    """
    return mmh3.hash64(f"{int(seed)}:{int(index)}", signed=False)[0]


def sample_rng(sample_seed: int) -> np.random.Generator:
    """Counter-based generator for one sample."""
    return np.random.Generator(np.random.Philox(key=int(sample_seed)))


def list_images(directory: Union[str, Path]) -> List[Path]:
    """PNG/JPEG files of a directory, sorted by name."""
    return sorted(
        p
        for p in Path(directory).iterdir()
        if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
    )


def rotated_corners(
    cx: float, cy: float, width: float, height: float, theta: float
) -> np.ndarray:
    """Corners of a rotated rectangle, clockwise from top-left.

    Image coordinates (x right, y down); the rectangle's width axis points along
    (cos theta, sin theta).

    Returns:
        np.ndarray: (4, 2) float64 array of (x, y) corners.
    """
    c, s = np.cos(theta), np.sin(theta)
    hw, hh = width / 2.0, height / 2.0
    local = np.array([[-hw, -hh], [hw, -hh], [hw, hh], [-hw, hh]])
    rot = np.array([[c, -s], [s, c]])
    return local @ rot.T + np.array([cx, cy])


def quad_to_int(quad: np.ndarray) -> np.ndarray:
    """Round quad corners to integer pixels."""
    return np.rint(np.asarray(quad, dtype=np.float64)).astype(np.int64)
