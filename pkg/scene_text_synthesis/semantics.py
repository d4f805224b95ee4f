import json
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Dict, FrozenSet, List, Literal, Optional, Tuple, Union

import numpy as np
import scipy.ndimage as ndi
from PIL import Image

from scene_text_synthesis.exceptions import (
    ConfigError,
    DimensionMismatch,
    InvalidChannelCount,
    UnknownClassId,
)
from scene_text_synthesis.raster import RasterImage

logger = logging.getLogger(__name__)

# 4-connectivity.
_FOUR_CONNECTED = ndi.generate_binary_structure(2, 1)


@dataclass(frozen=True)
class SemanticMap:
    """Per-pixel class ids plus the id -> class name palette.

    Attributes:
        labels (np.ndarray): uint16 grid of class ids.
        palette (Dict[int, str]): Class names for every id occurring in labels.
        source_id (str): Provenance, usually the label file stem.
    """

    labels: np.ndarray
    palette: Dict[int, str]
    source_id: str = ""

    def __post_init__(self) -> None:
        if self.labels.ndim != 2:
            raise InvalidChannelCount(self.labels.shape[-1], 1)
        for class_id in np.unique(self.labels).tolist():
            if class_id not in self.palette:
                raise UnknownClassId(class_id)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.labels.shape

    def histogram(self) -> Dict[str, int]:
        """Pixel count per class name."""
        ids, counts = np.unique(self.labels, return_counts=True)
        hist: Dict[str, int] = {}
        for class_id, count in zip(ids.tolist(), counts.tolist()):
            name = self.palette[class_id]
            hist[name] = hist.get(name, 0) + count
        return hist

    def check_pairing(self, image: RasterImage) -> None:
        """Raise DimensionMismatch unless the map matches the background size."""
        if self.shape != image.shape:
            raise DimensionMismatch(self.shape, image.shape)


@dataclass(frozen=True)
class SemanticPolicy:
    """Allow/deny class lists deciding where text may be embedded."""

    allow: FrozenSet[str] = field(default_factory=frozenset)
    deny: FrozenSet[str] = field(default_factory=frozenset)
    default: Literal["allow", "deny"] = "deny"

    def __post_init__(self) -> None:
        object.__setattr__(self, "allow", frozenset(self.allow))
        object.__setattr__(self, "deny", frozenset(self.deny))
        if self.default not in ("allow", "deny"):
            raise ConfigError(f"Policy default must be allow or deny: {self.default}")
        overlap = self.allow & self.deny
        if overlap:
            raise ConfigError(f"Classes both allowed and denied: {sorted(overlap)}")

    def allows(self, class_name: str) -> bool:
        if class_name in self.allow:
            return True
        if class_name in self.deny:
            return False
        return self.default == "allow"

    def inverted(self) -> "SemanticPolicy":
        return SemanticPolicy(
            allow=self.deny,
            deny=self.allow,
            default="deny" if self.default == "allow" else "allow",
        )

    @classmethod
    def from_json(cls, path: Union[str, Path]) -> "SemanticPolicy":
        """Load {"allow": [...], "deny": [...], "default": "allow"|"deny"}."""
        with open(path, "r", encoding="utf-8") as f:
            try:
                values = json.load(f)
            except json.JSONDecodeError as e:
                raise ConfigError(f"Malformed policy {path}: {e}") from e
        unknown = set(values) - {"allow", "deny", "default"}
        if unknown:
            raise ConfigError(f"Unknown policy keys in {path}: {sorted(unknown)}")
        return cls(
            allow=frozenset(values.get("allow", [])),
            deny=frozenset(values.get("deny", [])),
            default=values.get("default", "deny"),
        )

    @classmethod
    def default_policy(cls) -> "SemanticPolicy":
        """Policy shipped with the package."""
        ref = resources.files("scene_text_synthesis") / "default_policy.json"
        with resources.as_file(ref) as path:
            return cls.from_json(path)

    @classmethod
    def from_config_path(cls, path: Optional[Union[str, Path]]) -> "SemanticPolicy":
        return cls.from_json(path) if path else cls.default_policy()


@dataclass(frozen=True)
class RegionComponent:
    """A 4-connected component of an eligibility mask.

    Attributes:
        region_id (int): Index in scan order of the component's first pixel.
        mask (np.ndarray): Component pixels inside its bounding box.
        bbox (Tuple[int, int, int, int]): Tight half-open box (x0, y0, x1, y1).
        area (int): Pixel count.
    """

    region_id: int
    mask: np.ndarray
    bbox: Tuple[int, int, int, int]
    area: int

    @property
    def width(self) -> int:
        return self.bbox[2] - self.bbox[0]

    @property
    def height(self) -> int:
        return self.bbox[3] - self.bbox[1]

    def full_mask(self, shape: Tuple[int, int]) -> np.ndarray:
        m = np.zeros(shape, dtype=bool)
        x0, y0, x1, y1 = self.bbox
        m[y0:y1, x0:x1] = self.mask
        return m


def load_palette(palette_path: Union[str, Path]) -> Dict[int, str]:
    """Parse "id<TAB>name" lines; '#' starts a comment."""
    palette: Dict[int, str] = {}
    with open(palette_path, "r", encoding="utf-8-sig") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.split("#", 1)[0].rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split("\t", 1)
            if len(parts) != 2:
                raise ConfigError(f"{palette_path}:{lineno}: expected 'id<TAB>name'.")
            try:
                class_id = int(parts[0].strip())
            except ValueError as e:
                raise ConfigError(f"{palette_path}:{lineno}: bad class id.") from e
            palette[class_id] = parts[1].strip()
    return palette


def load_semantic_map(
    label_path: Union[str, Path],
    palette_path: Union[str, Path],
    palette: Optional[Dict[int, str]] = None,
) -> SemanticMap:
    """Load a single-channel PNG of class ids with its palette.

    Args:
        label_path: Label image.
        palette_path: Palette text file.
        palette: Already parsed palette; skips re-reading palette_path.

    Raises:
        InvalidChannelCount: If the label image is not single channel.
        UnknownClassId: If a label id has no palette entry.
    """
    if palette is None:
        palette = load_palette(palette_path)
    with Image.open(label_path) as im:
        if im.mode not in ("L", "I", "I;16", "I;16B", "I;16L", "P"):
            raise InvalidChannelCount(len(im.getbands()), 1)
        labels = np.array(im)
    if labels.min() < 0 or labels.max() > np.iinfo(np.uint16).max:
        raise ValueError(f"Class ids out of uint16 range in {label_path}.")
    return SemanticMap(
        labels=labels.astype(np.uint16),
        palette=dict(palette),
        source_id=Path(label_path).stem,
    )


def semantic_mask(semantic_map: SemanticMap, policy: SemanticPolicy) -> np.ndarray:
    """Boolean mask of pixels whose class the policy allows."""
    max_id = int(semantic_map.labels.max()) if semantic_map.labels.size else 0
    lut = np.zeros(max_id + 1, dtype=bool)
    for class_id, name in semantic_map.palette.items():
        if class_id <= max_id:
            lut[class_id] = policy.allows(name)
    return lut[semantic_map.labels]


def connected_regions(mask: np.ndarray, min_area: int = 32 * 32) -> List[RegionComponent]:
    """4-connected components with area >= min_area, in scan order."""
    labeled, n = ndi.label(mask, structure=_FOUR_CONNECTED)
    if n == 0:
        return []
    areas = np.bincount(labeled.ravel(), minlength=n + 1)
    regions = []
    for index, slc in enumerate(ndi.find_objects(labeled), start=1):
        if slc is None or areas[index] < min_area:
            continue
        ys, xs = slc
        regions.append(
            RegionComponent(
                region_id=len(regions),
                mask=labeled[slc] == index,
                bbox=(xs.start, ys.start, xs.stop, ys.stop),
                area=int(areas[index]),
            )
        )
    return regions
