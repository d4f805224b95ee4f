import logging
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
from PIL import Image

from ..placement import draw_overlay
from ..raster import RasterImage
from ..rendering import emit_annotations
from .manifest import MANIFEST_NAME, ManifestEntry, RunManifest
from .sample import SynthesizedSample, TextInstance

logger = logging.getLogger(__name__)

__all__ = [
    "MANIFEST_NAME",
    "ManifestEntry",
    "RunManifest",
    "SynthesizedSample",
    "TextInstance",
    "sample_file_names",
    "write_sample",
    "crop_entry_words",
]


def sample_file_names(sample_id: int) -> Tuple[str, str]:
    """(image, ground truth) file names of a sample."""
    stem = f"img_{sample_id:06d}"
    return f"{stem}.png", f"gt_{stem}.txt"


def write_sample(
    sample: SynthesizedSample,
    out_dir: Union[str, Path],
    sample_id: int,
    attempt_index: int,
    debug_masks: bool = False,
    background: Optional[RasterImage] = None,
) -> ManifestEntry:
    """Write a sample's image and ground truth and return its manifest entry.

    Args:
        sample (SynthesizedSample): Sample to write.
        out_dir (Union[str, Path]): Run directory.
        sample_id (int): Position of the sample in the run.
        attempt_index (int): Attempt the sample seed was derived from.
        debug_masks (bool): Also write the saliency map and eligibility overlay.
        background (Optional[RasterImage]): Background the overlay is drawn on.
    """
    out_dir = Path(out_dir)
    image_name, gt_name = sample_file_names(sample_id)
    sample.image.to_file(out_dir / image_name)
    with open(out_dir / gt_name, "w", encoding="utf-8", newline="\n") as f:
        f.write(emit_annotations(sample))

    debug = {}
    if debug_masks and sample.saliency is not None:
        name = f"saliency_{sample_id:06d}.png"
        sample.saliency.to_image().to_file(out_dir / name)
        debug["saliency"] = name
    if debug_masks and sample.eligibility_mask is not None:
        name = f"overlay_{sample_id:06d}.png"
        base = background if background is not None else sample.image
        draw_overlay(base, sample.eligibility_mask, sample.candidates).to_file(
            out_dir / name
        )
        debug["overlay"] = name

    return ManifestEntry(
        sample_id=sample_id,
        attempt_index=attempt_index,
        background_id=sample.background_id,
        seed=sample.seed,
        image=image_name,
        groundtruth=gt_name,
        instances=[i.to_dict() for i in sample.instances],
        debug=debug,
    )


def _rectified_size(quad: np.ndarray) -> Tuple[int, int]:
    top = np.linalg.norm(quad[1] - quad[0])
    bottom = np.linalg.norm(quad[2] - quad[3])
    left = np.linalg.norm(quad[3] - quad[0])
    right = np.linalg.norm(quad[2] - quad[1])
    return max(1, int(round(max(top, bottom)))), max(1, int(round(max(left, right))))


def crop_entry_words(
    entry: ManifestEntry,
    root: Union[str, Path],
    out_dir: Union[str, Path],
) -> List[Tuple[str, str]]:
    """Rectify every instance quad of a written sample into an upright word image.

    Returns:
        List[Tuple[str, str]]: (file name, transcript) per written crop.
    """
    root, out_dir = Path(root), Path(out_dir)
    labels = []
    with Image.open(root / entry.image) as im:
        im = im.convert("RGB")
        for i, inst in enumerate(entry.instances):
            quad = np.asarray(inst["quad"], dtype=np.float64)
            size = _rectified_size(quad)
            tl, tr, br, bl = quad.tolist()
            # PIL expects upper-left, lower-left, lower-right, upper-right.
            data = tuple(tl + bl + br + tr)
            word = im.transform(
                size, Image.Transform.QUAD, data, Image.Resampling.BILINEAR
            )
            name = f"word_{entry.sample_id:06d}_{i:02d}.png"
            word.save(out_dir / name, format="PNG")
            labels.append((name, inst["text"]))
    return labels
