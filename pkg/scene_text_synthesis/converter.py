from typing import List, Literal, Optional, Sequence, Tuple, Union
from pathlib import Path
from dataclasses import dataclass
import logging
import math
import re

import numpy as np

from scene_text_synthesis.utils import list_images, quad_to_int

logger = logging.getLogger(__name__)

GroundTruthFormat = Literal["icdar-word", "quad"]

DONT_CARE = "###"

# "x1,y1,x2,y2,"text"" (test split) or "x1 y1 x2 y2 "text"" (train split).
_ICDAR_WORD = re.compile(
    r"^\s*(-?\d+)\s*[,\s]\s*(-?\d+)\s*[,\s]\s*(-?\d+)\s*[,\s]\s*(-?\d+)(?:\s*[,\s]\s*(.*))?$"
)


@dataclass(frozen=True)
class Annotation:
    """One ground-truth text box.

    Attributes:
        quad (np.ndarray): (4, 2) corners clockwise from top-left.
        transcript (str): Text inside the box.
    """

    quad: np.ndarray
    transcript: str

    @property
    def dont_care(self) -> bool:
        return self.transcript == DONT_CARE

    def bounds(self) -> Tuple[int, int, int, int]:
        """Axis-aligned half-open bounds (x0, y0, x1, y1)."""
        q = np.asarray(self.quad, dtype=np.float64)
        return (
            int(math.floor(q[:, 0].min())),
            int(math.floor(q[:, 1].min())),
            int(math.ceil(q[:, 0].max())),
            int(math.ceil(q[:, 1].max())),
        )


def _unquote(text: str) -> str:
    text = text.strip()
    if len(text) >= 2 and text[0] == '"' and text[-1] == '"':
        return text[1:-1]
    return text


def parse_icdar_word_line(line: str) -> Optional[Annotation]:
    """Parse an ICDAR 2013 word line; right and bottom are exclusive.

    Returns:
        Optional[Annotation]: None if the line does not hold a box.
    """
    m = _ICDAR_WORD.match(line.rstrip("\r\n"))
    if m is None:
        return None
    left, top, right, bottom = (int(v) for v in m.groups()[:4])
    if right <= left or bottom <= top:
        return None
    quad = np.array(
        [[left, top], [right, top], [right, bottom], [left, bottom]], dtype=np.float64
    )
    return Annotation(quad=quad, transcript=_unquote(m.group(5) or ""))


def parse_quad_line(line: str) -> Optional[Annotation]:
    """Parse "x1,y1,...,x4,y4,transcript"; the transcript may contain commas."""
    parts = line.rstrip("\r\n").split(",", 8)
    if len(parts) < 8:
        return None
    try:
        coords = [float(p) for p in parts[:8]]
    except ValueError:
        return None
    transcript = parts[8] if len(parts) == 9 else ""
    return Annotation(
        quad=np.array(coords, dtype=np.float64).reshape(4, 2),
        transcript=transcript,
    )


def read_groundtruth(
    path: Union[str, Path], gt_format: GroundTruthFormat = "icdar-word"
) -> List[Annotation]:
    """Read a ground-truth file, UTF-8 with or without BOM.

    Unparseable lines are logged and skipped.
    """
    if gt_format == "icdar-word":
        parse = parse_icdar_word_line
    elif gt_format == "quad":
        parse = parse_quad_line
    else:
        raise ValueError(f"Unknown ground-truth format: {gt_format}")

    annotations = []
    with open(path, "r", encoding="utf-8-sig") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            annotation = parse(line)
            if annotation is None:
                logger.warning(f"{path}:{lineno}: unparseable {gt_format} line skipped.")
                continue
            annotations.append(annotation)
    return annotations


def format_quad_line(quad: np.ndarray, transcript: str) -> str:
    """Integer quad line without the trailing newline."""
    coords = ",".join(str(v) for v in quad_to_int(quad).reshape(-1).tolist())
    return f"{coords},{transcript}"


def format_groundtruth(
    quads: Sequence[np.ndarray], transcripts: Sequence[str]
) -> str:
    """Quad ground-truth file content, LF line endings."""
    return "".join(
        format_quad_line(q, t) + "\n" for q, t in zip(quads, transcripts)
    )


def groundtruth_path(image_path: Union[str, Path], gt_dir: Optional[Path] = None) -> Path:
    """Ground-truth file paired with an image: gt_<stem>.txt, else <stem>.txt."""
    image_path = Path(image_path)
    directory = gt_dir if gt_dir is not None else image_path.parent
    for name in (f"gt_{image_path.stem}.txt", f"{image_path.stem}.txt"):
        candidate = directory / name
        if candidate.exists():
            return candidate
    return directory / f"gt_{image_path.stem}.txt"


def iter_dataset(dataset_root: Union[str, Path]) -> List[Tuple[Path, Path]]:
    """Pairs of (image, ground truth) in a dataset directory, sorted by image name.

    Images are looked up in the root or its images/ subdirectory; ground-truth
    files next to the images or in a gt/ subdirectory. Images without ground
    truth are logged and left out.
    """
    root = Path(dataset_root)
    image_dir = root / "images" if (root / "images").is_dir() else root
    gt_dir = root / "gt" if (root / "gt").is_dir() else None

    pairs = []
    for image_path in list_images(image_dir):
        gt_path = groundtruth_path(image_path, gt_dir)
        if not gt_path.exists():
            logger.warning(f"No ground truth for {image_path.name}, skipped.")
            continue
        pairs.append((image_path, gt_path))
    return pairs
