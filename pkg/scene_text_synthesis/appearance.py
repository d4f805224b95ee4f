import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Tuple, Union

import h5py
import matplotlib
import numpy as np
from PIL import Image, ImageFont
from skimage.filters import threshold_otsu
from sklearn.utils.parallel import Parallel, delayed
from tqdm import tqdm

from scene_text_synthesis.config import AttributeDict, Config, Constants
from scene_text_synthesis.converter import (
    GroundTruthFormat,
    iter_dataset,
    read_groundtruth,
)
from scene_text_synthesis.exceptions import (
    EmptyDatabase,
    EmptyFontList,
    ImageTooSmall,
    NoBackgroundRing,
    SegmentationFailed,
    StaleDatabase,
)
from scene_text_synthesis.raster import (
    ColorSpace,
    LabPixel,
    RasterImage,
    sobel_gradients,
    srgb_array_to_lab,
)

logger = logging.getLogger(__name__)

HOG_DIMENSION = (
    (Constants.hog_patch_size // Constants.hog_cell_size - Constants.hog_block_size + 1)
    ** 2
    * Constants.hog_block_size**2
    * Constants.hog_bins
)

Box = Tuple[int, int, int, int]


@dataclass(frozen=True)
class HogFeature:
    """Histogram of oriented gradients of a background patch."""

    vector: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "vector", np.asarray(self.vector, dtype=np.float32))
        if self.vector.shape != (HOG_DIMENSION,):
            raise ValueError(
                f"HoG vector of shape {self.vector.shape}, expected ({HOG_DIMENSION},)."
            )

    def distance(self, other: "HogFeature") -> float:
        d = self.vector.astype(np.float64) - other.vector.astype(np.float64)
        return float(np.sqrt((d * d).sum()))


def _to_hog_gray(patch: RasterImage) -> np.ndarray:
    gray = patch.to_gray().data
    size = Constants.hog_patch_size
    if gray.shape != (size, size):
        im = Image.fromarray(gray.astype(np.float32), mode="F")
        gray = np.array(
            im.resize((size, size), Image.Resampling.BILINEAR), dtype=np.float32
        )
    return gray


def _l2_hys(v: np.ndarray) -> np.ndarray:
    eps2 = Constants.hog_eps**2
    v = v / np.sqrt((v * v).sum() + eps2)
    v = np.minimum(v, Constants.hog_clip)
    return v / np.sqrt((v * v).sum() + eps2)


def extract_hog(patch: RasterImage) -> HogFeature:
    """HoG descriptor of a patch resized to 32 x 32 gray.

    8 x 8 pixel cells, 9 unsigned orientation bins over [0, pi) with hard voting
    by gradient magnitude, 2 x 2 cell blocks at stride one, L2-Hys normalization.

    Raises:
        ImageTooSmall: If the patch covers fewer than 64 pixels.
    """
    if patch.height * patch.width < 64:
        raise ImageTooSmall(patch.shape, "64 px area")

    gray = _to_hog_gray(patch)
    grad = sobel_gradients(RasterImage(gray, ColorSpace.GRAY))

    cell = Constants.hog_cell_size
    n_bins = Constants.hog_bins
    n_cells = Constants.hog_patch_size // cell
    magnitude = grad.magnitude.astype(np.float64)
    bins = np.floor(grad.orientation.astype(np.float64) / (np.pi / n_bins)).astype(
        np.int64
    )
    bins = np.clip(bins, 0, n_bins - 1)

    rows, cols = np.indices(gray.shape)
    cell_index = (rows // cell) * n_cells + (cols // cell)
    hist = np.bincount(
        (cell_index * n_bins + bins).ravel(),
        weights=magnitude.ravel(),
        minlength=n_cells * n_cells * n_bins,
    ).reshape(n_cells, n_cells, n_bins)

    block = Constants.hog_block_size
    n_blocks = n_cells - block + 1
    blocks = [
        _l2_hys(hist[by : by + block, bx : bx + block].ravel())
        for by in range(n_blocks)
        for bx in range(n_blocks)
    ]
    return HogFeature(np.concatenate(blocks))


@dataclass(frozen=True)
class AppearanceRecord:
    """Background descriptor paired with Lab statistics of its text pixels."""

    h_b: HogFeature
    mu_L: float
    sigma_L: float
    mu_a: float
    sigma_a: float
    mu_b: float
    sigma_b: float
    source_id: str

    @property
    def mean(self) -> LabPixel:
        return LabPixel(self.mu_L, self.mu_a, self.mu_b)

    @property
    def std(self) -> LabPixel:
        return LabPixel(self.sigma_L, self.sigma_a, self.sigma_b)

    def stats_row(self) -> np.ndarray:
        return np.array(
            [self.mu_L, self.sigma_L, self.mu_a, self.sigma_a, self.mu_b, self.sigma_b],
            dtype=np.float32,
        )

    @classmethod
    def from_row(
        cls, h_b: np.ndarray, stats: np.ndarray, source_id: str
    ) -> "AppearanceRecord":
        values = [float(v) for v in np.asarray(stats, dtype=np.float32)]
        return cls(HogFeature(h_b), *values, source_id=source_id)


def ring_width(box_height: int, params: AttributeDict = Config().appearance) -> int:
    return max(int(params.ring_min), int(math.ceil(params.ring_fraction * box_height)))


def _outer_box(shape: Tuple[int, int], box: Box, ring: int) -> Box:
    h, w = shape
    x0, y0, x1, y1 = box
    return (max(0, x0 - ring), max(0, y0 - ring), min(w, x1 + ring), min(h, y1 + ring))


def segment_text_pixels(
    box_lab: np.ndarray,
    ring_L: float,
    params: AttributeDict = Config().appearance,
) -> np.ndarray:
    """Boolean mask of text pixels inside a box.

    Otsu's threshold on L splits the box in two clusters; text is the cluster
    whose mean L lies farther from the background ring, or the minority cluster
    when both are about equally far.

    Raises:
        SegmentationFailed: On a flat box or fewer than min_text_pixels text pixels.
    """
    L = box_lab[..., 0]
    if float(L.max() - L.min()) < 1e-6:
        raise SegmentationFailed("Flat lightness inside the box.")
    t = threshold_otsu(L)
    bright = L > t
    n_bright = int(bright.sum())
    n_dark = bright.size - n_bright
    if n_bright == 0 or n_dark == 0:
        raise SegmentationFailed("Otsu threshold left an empty cluster.")

    d_bright = abs(float(L[bright].mean()) - ring_L)
    d_dark = abs(float(L[~bright].mean()) - ring_L)
    if abs(d_bright - d_dark) < params.ambiguity_margin:
        text = bright if n_bright <= n_dark else ~bright
    else:
        text = bright if d_bright > d_dark else ~bright

    if int(text.sum()) < int(params.min_text_pixels):
        raise SegmentationFailed(f"Only {int(text.sum())} text pixels in the box.")
    return text


def build_record(
    crop: RasterImage,
    box: Box,
    source_id: str = "",
    params: AttributeDict = Config().appearance,
) -> AppearanceRecord:
    """Appearance record of one annotated text box.

    The descriptor is the HoG of the box plus a background ring of width
    max(ring_min, ring_fraction * box height), clipped to the image, with the box
    interior filled by the ring's mean color. Text statistics are Lab means and
    population standard deviations of the segmented text pixels.

    Args:
        crop (RasterImage): sRGB8 image holding the box.
        box (Box): Half-open (x0, y0, x1, y1) text box.
        source_id (str): Provenance of the record.
        params (AttributeDict): Appearance section of the config.

    Raises:
        NoBackgroundRing: If no ring pixel exists around the box.
        SegmentationFailed: If too few text pixels are found.
    """
    x0, y0, x1, y1 = (int(v) for v in box)
    if not (0 <= x0 < x1 <= crop.width and 0 <= y0 < y1 <= crop.height):
        raise ValueError(f"Box {box} outside image of shape {crop.shape}.")

    ring_w = ring_width(y1 - y0, params)
    ox0, oy0, ox1, oy1 = _outer_box(crop.shape, (x0, y0, x1, y1), ring_w)
    ring = np.ones((oy1 - oy0, ox1 - ox0), dtype=bool)
    inner = (slice(y0 - oy0, y1 - oy0), slice(x0 - ox0, x1 - ox0))
    ring[inner] = False
    if not ring.any():
        raise NoBackgroundRing(f"No background ring around box {box}.")

    patch = crop.data[oy0:oy1, ox0:ox1].copy()
    lab = srgb_array_to_lab(patch)
    ring_rgb = patch[ring].astype(np.float64).mean(axis=0)
    ring_L = float(lab[ring][:, 0].mean())

    text = segment_text_pixels(lab[inner], ring_L, params)
    text_lab = lab[inner][text]

    masked = patch.copy()
    masked[inner] = np.rint(ring_rgb).astype(np.uint8)
    h_b = extract_hog(RasterImage(masked, ColorSpace.SRGB8))

    mu = text_lab.mean(axis=0)
    sigma = text_lab.std(axis=0)
    stats = np.array(
        [mu[0], sigma[0], mu[1], sigma[1], mu[2], sigma[2]], dtype=np.float32
    )
    return AppearanceRecord.from_row(h_b.vector, stats, source_id)


def background_descriptor(
    image: RasterImage, box: Box, params: AttributeDict = Config().appearance
) -> HogFeature:
    """HoG of a candidate location with the same ring geometry as build_record."""
    x0, y0, x1, y1 = box
    outer = _outer_box(image.shape, box, ring_width(y1 - y0, params))
    return extract_hog(image.crop(*outer))


class AppearanceDatabase:
    """Immutable list of appearance records with a descriptor version tag."""

    def __init__(
        self,
        records: Sequence[AppearanceRecord],
        version: str = Constants.database_version,
    ) -> None:
        self._records = list(records)
        self._version = version
        if self._records:
            self._matrix = np.stack([r.h_b.vector for r in self._records]).astype(
                np.float32
            )
        else:
            self._matrix = np.empty((0, HOG_DIMENSION), dtype=np.float32)
        source_ids = np.array([r.source_id for r in self._records], dtype=object)
        order = np.argsort(source_ids, kind="stable")
        self._source_rank = np.empty(len(self._records), dtype=np.int64)
        self._source_rank[order] = np.arange(len(self._records))

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[AppearanceRecord]:
        return iter(self._records)

    def __getitem__(self, i: int) -> AppearanceRecord:
        return self._records[i]

    @property
    def records(self) -> List[AppearanceRecord]:
        return list(self._records)

    @property
    def version(self) -> str:
        return self._version

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    @property
    def source_rank(self) -> np.ndarray:
        return self._source_rank

    def dump_h5(
        self,
        h5file: Union[str, Path, h5py.File, h5py.Group],
        dataset_name: str = "appearance_db",
    ) -> None:
        """Save the database to an HDF5 file or group.

        Args:
            h5file (Union[str, Path, h5py.File, h5py.Group]): Path or h5py object.
            dataset_name (str): Name of the group holding the database.
        """
        if isinstance(h5file, (str, Path)):
            f = h5py.File(h5file, "w")
            grp = f.create_group(dataset_name)
            close_file = True
        else:
            grp = h5file.create_group(dataset_name)
            close_file = False

        grp.attrs["version"] = self._version
        grp.attrs["n_records"] = len(self._records)
        grp.create_dataset("h_b", data=self._matrix)
        grp.create_dataset(
            "stats",
            data=(
                np.stack([r.stats_row() for r in self._records])
                if self._records
                else np.empty((0, 6), dtype=np.float32)
            ),
        )
        grp.create_dataset(
            "source_id",
            data=[r.source_id for r in self._records],
            dtype=h5py.string_dtype(encoding="utf-8"),
        )

        if close_file:
            f.close()

    @classmethod
    def from_h5(
        cls,
        h5file: Union[str, Path, h5py.File, h5py.Group],
        dataset_name: str = "appearance_db",
        expected_version: Optional[str] = Constants.database_version,
    ) -> "AppearanceDatabase":
        """Load a database written by dump_h5.

        Raises:
            StaleDatabase: If the stored version tag differs from expected_version.
        """
        if isinstance(h5file, (str, Path)):
            f = h5py.File(h5file, "r")
            grp = f[dataset_name]
            close_file = True
        else:
            grp = h5file[dataset_name]
            close_file = False

        version = grp.attrs["version"]
        if isinstance(version, bytes):
            version = version.decode("utf-8")
        if expected_version is not None and version != expected_version:
            if close_file:
                f.close()
            raise StaleDatabase(
                f"Database version {version!r}, expected {expected_version!r}."
            )

        h_b = grp["h_b"][:]
        stats = grp["stats"][:]
        source_ids = [
            s.decode("utf-8") if isinstance(s, bytes) else s
            for s in grp["source_id"][:]
        ]
        obj = cls(
            [
                AppearanceRecord.from_row(h, s, i)
                for h, s, i in zip(h_b, stats, source_ids)
            ],
            version=str(version),
        )

        if close_file:
            f.close()

        return obj


def _records_for_image(
    image_path: Path,
    gt_path: Path,
    gt_format: GroundTruthFormat,
    dataset_name: str,
    params: AttributeDict,
) -> Tuple[List[AppearanceRecord], int]:
    image = RasterImage.from_file(image_path)
    records = []
    skipped = 0
    for i, annotation in enumerate(read_groundtruth(gt_path, gt_format)):
        source_id = f"{dataset_name}/{image_path.stem}/{i:04d}"
        if annotation.dont_care:
            logger.debug(f"{source_id}: don't-care box skipped.")
            continue
        x0, y0, x1, y1 = annotation.bounds()
        box = (max(0, x0), max(0, y0), min(image.width, x1), min(image.height, y1))
        try:
            records.append(build_record(image, box, source_id, params))
        except (NoBackgroundRing, SegmentationFailed, ImageTooSmall, ValueError) as e:
            logger.warning(f"{source_id}: skipped, {type(e).__name__}: {e}")
            skipped += 1
    return records, skipped


def build_database(
    dataset_root: Union[str, Path],
    gt_format: GroundTruthFormat = "icdar-word",
    config: Config = Config(),
    out: Optional[Union[str, Path]] = None,
) -> AppearanceDatabase:
    """Build the appearance database of an annotated scene-text dataset.

    Images are processed in parallel; records are merged in source_id order so the
    result does not depend on the number of workers.

    Args:
        dataset_root (Union[str, Path]): Dataset directory (images + gt files).
        gt_format (GroundTruthFormat): Ground-truth line format.
        config (Config): Configuration.
        out (Optional[Union[str, Path]]): Where to write the database, if given.

    Raises:
        EmptyDatabase: If no annotation produced a record.
    """
    root = Path(dataset_root)
    pairs = iter_dataset(root)
    logger.info(f"Building appearance statistics from {len(pairs)} images in {root}.")

    results = Parallel(n_jobs=config.general.n_jobs)(
        delayed(_records_for_image)(
            image_path, gt_path, gt_format, root.name, config.appearance
        )
        for image_path, gt_path in tqdm(
            pairs, disable=(not config.general.tqdm_enabled)
        )
    )

    records = sorted(
        (r for image_records, _ in results for r in image_records),
        key=lambda r: r.source_id,
    )
    skipped = sum(s for _, s in results)
    logger.info(f"{len(records)} appearance records, {skipped} annotations skipped.")
    if not records:
        raise EmptyDatabase(f"No appearance record could be built from {root}.")

    db = AppearanceDatabase(records)
    if out is not None:
        db.dump_h5(str(out))
        logger.info(f"Appearance database written to {out}.")
    return db


def query_nearest(
    db: AppearanceDatabase, h_s: HogFeature, k: int
) -> List[Tuple[AppearanceRecord, float]]:
    """k nearest records by Euclidean HoG distance, ties by source_id.

    Raises:
        EmptyDatabase: If the database holds no record.
    """
    if len(db) == 0:
        raise EmptyDatabase("Query against an empty appearance database.")
    k = max(1, min(int(k), len(db)))
    diff = db.matrix.astype(np.float64) - h_s.vector.astype(np.float64)
    distances = np.sqrt((diff * diff).sum(axis=1))
    order = np.lexsort((db.source_rank, distances))[:k]
    return [(db[i], float(distances[i])) for i in order]


def sample_text_color(record: AppearanceRecord, rng: np.random.Generator) -> LabPixel:
    """mu + u * sigma per channel with u ~ U(-1, 1); L clamped to [0, 100]."""
    u = rng.uniform(-1.0, 1.0, size=3)
    mu = np.array(record.mean, dtype=np.float64)
    sigma = np.array(record.std, dtype=np.float64)
    L, a, b = (mu + u * sigma).tolist()
    return LabPixel(min(100.0, max(0.0, L)), a, b)


def random_text_color(rng: np.random.Generator) -> LabPixel:
    """Appearance-agnostic color used when adaptive appearance is switched off."""
    L = float(rng.uniform(0.0, 100.0))
    a, b = rng.uniform(-60.0, 60.0, size=2).tolist()
    return LabPixel(L, a, b)


def default_font_dir() -> Path:
    return Path(matplotlib.get_data_path()) / "fonts" / "ttf"


@dataclass(frozen=True)
class FontEntry:
    path: str
    style: str


class FontList:
    """Scalable fonts text is rendered with."""

    def __init__(self, entries: Sequence[FontEntry]) -> None:
        self._entries = list(entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __getitem__(self, i: int) -> FontEntry:
        return self._entries[i]

    def __iter__(self) -> Iterator[FontEntry]:
        return iter(self._entries)

    @property
    def entries(self) -> List[FontEntry]:
        return list(self._entries)

    @classmethod
    def from_dir(cls, font_dir: Union[str, Path], pattern: str = "*") -> "FontList":
        """Every loadable .ttf/.otf file of a directory matching pattern, by name.

        Raises:
            EmptyFontList: If no file loads.
        """
        paths = sorted(
            p
            for p in Path(font_dir).glob(pattern)
            if p.is_file() and p.suffix.lower() in (".ttf", ".otf")
        )
        entries = []
        for p in paths:
            try:
                family, style = ImageFont.truetype(str(p), size=16).getname()
            except OSError as e:
                logger.warning(f"Font {p.name} not loadable, skipped: {e}")
                continue
            entries.append(FontEntry(path=str(p), style=f"{family} {style}".strip()))
        if not entries:
            raise EmptyFontList(f"No loadable font in {font_dir}.")
        logger.debug(f"{len(entries)} fonts loaded from {font_dir}.")
        return cls(entries)

    @classmethod
    def default(cls) -> "FontList":
        """DejaVu fonts bundled with matplotlib."""
        fonts = cls.from_dir(default_font_dir(), pattern="DejaVu*")
        # The Display faces are glyph subsets for math rendering.
        return cls([e for e in fonts if "Display" not in Path(e.path).name])

    @classmethod
    def from_config_path(cls, font_dir: Optional[Union[str, Path]]) -> "FontList":
        return cls.from_dir(font_dir) if font_dir else cls.default()


def pick_font(
    fonts: Union[FontList, Sequence[FontEntry]], rng: np.random.Generator
) -> FontEntry:
    """Uniform draw from the font list.

    Raises:
        EmptyFontList: If the list is empty.
    """
    if len(fonts) == 0:
        raise EmptyFontList("Cannot pick from an empty font list.")
    return fonts[int(rng.integers(len(fonts)))]
