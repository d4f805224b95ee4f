from typing import Any, Dict, List, Optional
from dataclasses import dataclass, field
from pathlib import Path
import logging

import numpy as np

from scene_text_synthesis.placement import PlacementCandidate, rotated_iou
from scene_text_synthesis.raster import LabPixel, RasterImage
from scene_text_synthesis.rendering import TextLayout
from scene_text_synthesis.saliency import SaliencyMap
from scene_text_synthesis.utils import quad_to_int

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TextInstance:
    """One piece of text composited into a background.

    Attributes:
        layout (TextLayout): Rendered glyph coverage.
        color (LabPixel): Text color.
        placement (PlacementCandidate): Where the text was placed.
        quad (np.ndarray): (4, 2) tight rotated quad of the ink, clockwise from
            top-left, inside the placement rectangle.
        record_source_id (str): Appearance record the color came from; empty when
            the color was drawn at random.
    """

    layout: TextLayout
    color: LabPixel
    placement: PlacementCandidate
    quad: np.ndarray
    record_source_id: str = ""

    @property
    def text(self) -> str:
        return self.layout.text

    def in_bounds(self, shape) -> bool:
        h, w = shape
        q = self.quad
        return bool(
            (q[:, 0] >= 0).all()
            and (q[:, 0] <= w).all()
            and (q[:, 1] >= 0).all()
            and (q[:, 1] <= h).all()
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "text": self.text,
            "quad": quad_to_int(self.quad).tolist(),
            "color": [float(v) for v in self.color],
            "font": Path(self.layout.font.path).name,
            "font_style": self.layout.font.style,
            "px_height": int(self.layout.px_height),
            "record_source_id": self.record_source_id,
            "placement": self.placement.to_dict(),
        }


@dataclass
class SynthesizedSample:
    """A background with text instances composited in.

    The masks the placements were searched on are kept for debug output and
    invariant checks; they are not part of the written sample.
    """

    image: RasterImage
    instances: List[TextInstance]
    seed: int
    background_id: str
    semantic_mask: Optional[np.ndarray] = field(default=None, repr=False)
    eligibility_mask: Optional[np.ndarray] = field(default=None, repr=False)
    saliency: Optional[SaliencyMap] = field(default=None, repr=False)
    candidates: List[PlacementCandidate] = field(default_factory=list, repr=False)

    def __len__(self) -> int:
        return len(self.instances)

    @property
    def quads(self) -> List[np.ndarray]:
        return [i.quad for i in self.instances]

    @property
    def transcripts(self) -> List[str]:
        return [i.text for i in self.instances]

    def max_pairwise_iou(self) -> float:
        """Largest rotated IoU between two instance placements, 0.0 if fewer than 2."""
        best = 0.0
        for i, a in enumerate(self.instances):
            for b in self.instances[i + 1 :]:
                best = max(best, rotated_iou(a.placement, b.placement))
        return best
