import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from PIL import Image, ImageDraw
from shapely.geometry import Polygon

from scene_text_synthesis.config import AttributeDict, Config
from scene_text_synthesis.exceptions import DimensionMismatch
from scene_text_synthesis.raster import (
    GradientField,
    IntegralTable,
    RasterImage,
    integral_image,
)
from scene_text_synthesis.saliency import SaliencyMap, SaliencyMask
from scene_text_synthesis.semantics import connected_regions
from scene_text_synthesis.utils import rotated_corners

logger = logging.getLogger(__name__)

_THETA_MIN = -math.pi / 4 + 1e-6
_THETA_MAX = math.pi / 4
_TENSOR_EPS = 1e-12


@dataclass(frozen=True)
class PlacementCandidate:
    """A rotated text box inside one eligible region.

    Attributes:
        center (Tuple[float, float]): Box center (x, y) in pixels.
        width (float): Box width before rotation.
        height (float): Box height before rotation.
        theta (float): Baseline angle in radians, within (-pi/4, pi/4].
        region_id (int): Index of the region the box was seeded in.
        score (float): Mean saliency inside the box, lower preferred.
    """

    center: Tuple[float, float]
    width: float
    height: float
    theta: float
    region_id: int
    score: float

    def corners(self, pad: float = 0.0) -> np.ndarray:
        """Corners clockwise from top-left, optionally grown by pad on every side."""
        return rotated_corners(
            self.center[0],
            self.center[1],
            self.width + 2 * pad,
            self.height + 2 * pad,
            self.theta,
        )

    def bounds(self) -> Tuple[int, int, int, int]:
        """Axis-aligned integer bounds (x0, y0, x1, y1) of the rotated box."""
        c = self.corners()
        return (
            int(math.floor(c[:, 0].min())),
            int(math.floor(c[:, 1].min())),
            int(math.ceil(c[:, 0].max())),
            int(math.ceil(c[:, 1].max())),
        )

    def polygon(self) -> Polygon:
        return Polygon(self.corners())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "center": [float(self.center[0]), float(self.center[1])],
            "width": float(self.width),
            "height": float(self.height),
            "theta": float(self.theta),
            "region_id": int(self.region_id),
            "score": float(self.score),
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "PlacementCandidate":
        return cls(
            center=(float(d["center"][0]), float(d["center"][1])),
            width=float(d["width"]),
            height=float(d["height"]),
            theta=float(d["theta"]),
            region_id=int(d["region_id"]),
            score=float(d["score"]),
        )


@dataclass(frozen=True)
class TextShape:
    """Box shape searched for: width = aspect_ratio * height."""

    aspect_ratio: float
    min_height: int = 16
    max_height: Optional[int] = None


@dataclass(frozen=True)
class EligibilityMask:
    mask: np.ndarray
    provenance: Tuple[str, str] = ("semantic", "saliency")


def combine_masks(
    sem: np.ndarray,
    sal: SaliencyMask,
    provenance: Tuple[str, str] = ("semantic", "saliency"),
) -> EligibilityMask:
    """Pixelwise AND of the semantic and low-saliency masks.

    Raises:
        DimensionMismatch: If the masks differ in size.
    """
    if sem.shape != sal.mask.shape:
        raise DimensionMismatch(sem.shape, sal.mask.shape)
    return EligibilityMask(mask=np.logical_and(sem, sal.mask), provenance=provenance)


def estimate_orientation(
    grad: GradientField, window: Tuple[int, int, int, int]
) -> Tuple[float, float]:
    """Dominant structure orientation inside a window.

    The structure tensor summed over the window gives the dominant gradient
    direction; the text baseline runs perpendicular to it, i.e. parallel to the
    structure.

    Args:
        grad (GradientField): Image gradients.
        window (Tuple[int, int, int, int]): Half-open (x0, y0, x1, y1), clipped to
            the image.

    Returns:
        Tuple[float, float]: theta in (-pi/4, pi/4] and coherence in [0, 1]. A flat
            window gives (0.0, 0.0).
    """
    h, w = grad.shape
    x0, y0, x1, y1 = window
    x0, x1 = max(0, int(x0)), min(w, int(x1))
    y0, y1 = max(0, int(y0)), min(h, int(y1))
    if x1 <= x0 or y1 <= y0:
        return 0.0, 0.0

    gx = grad.gx[y0:y1, x0:x1].astype(np.float64)
    gy = grad.gy[y0:y1, x0:x1].astype(np.float64)
    jxx = float((gx * gx).sum())
    jyy = float((gy * gy).sum())
    jxy = float((gx * gy).sum())

    trace = jxx + jyy
    if trace <= _TENSOR_EPS:
        return 0.0, 0.0
    # lambda1 - lambda2 and lambda1 + lambda2.
    spread = math.sqrt((jxx - jyy) ** 2 + 4.0 * jxy * jxy)
    coherence = min(1.0, max(0.0, spread / (trace + _TENSOR_EPS)))

    gradient_direction = 0.5 * math.atan2(2.0 * jxy, jxx - jyy)
    theta = gradient_direction + math.pi / 2
    theta = ((theta + math.pi / 2) % math.pi) - math.pi / 2
    theta = min(_THETA_MAX, max(_THETA_MIN, theta))

    return theta, coherence


def height_ladder(min_height: float, max_height: float, factor: float) -> List[int]:
    """Geometric ladder of integer heights between min_height and max_height."""
    heights: List[int] = []
    h = float(min_height)
    while h <= max_height + 1e-9:
        hi = int(round(h))
        if not heights or hi != heights[-1]:
            heights.append(hi)
        h *= factor
    return heights


def _sample_points(candidate: PlacementCandidate, step: float) -> np.ndarray:
    nu = max(1, int(math.ceil(candidate.width / step)))
    nv = max(1, int(math.ceil(candidate.height / step)))
    u = (np.arange(nu) + 0.5) * (candidate.width / nu) - candidate.width / 2.0
    v = (np.arange(nv) + 0.5) * (candidate.height / nv) - candidate.height / 2.0
    uu, vv = np.meshgrid(u, v)
    c, s = math.cos(candidate.theta), math.sin(candidate.theta)
    x = candidate.center[0] + c * uu - s * vv
    y = candidate.center[1] + s * uu + c * vv
    return np.stack([x.ravel(), y.ravel()], axis=1)


def in_bounds(candidate: PlacementCandidate, shape: Tuple[int, int]) -> bool:
    c = candidate.corners()
    h, w = shape
    tol = 1e-6
    return bool(
        (c[:, 0] >= -tol).all()
        and (c[:, 0] <= w + tol).all()
        and (c[:, 1] >= -tol).all()
        and (c[:, 1] <= h + tol).all()
    )


def _sample(values: np.ndarray, candidate: PlacementCandidate, step: float) -> np.ndarray:
    pts = _sample_points(candidate, step)
    h, w = values.shape
    ix = np.clip(np.floor(pts[:, 0]).astype(np.int64), 0, w - 1)
    iy = np.clip(np.floor(pts[:, 1]).astype(np.int64), 0, h - 1)
    return values[iy, ix]


def rotated_coverage(
    mask: np.ndarray, candidate: PlacementCandidate, step: float = 1.0
) -> float:
    """Fraction of sampled box pixels on the mask; 0.0 when out of bounds.

    With step 1 and an axis-aligned integer box every pixel center is sampled once.
    """
    if not in_bounds(candidate, mask.shape):
        return 0.0
    return float(_sample(mask, candidate, step).mean())


def rotated_mean(
    values: np.ndarray, candidate: PlacementCandidate, step: float = 1.0
) -> float:
    """Mean of values sampled inside the box."""
    return float(_sample(values, candidate, step).astype(np.float64).mean())


def rotated_iou(a: PlacementCandidate, b: PlacementCandidate) -> float:
    """Intersection over union of two rotated boxes."""
    ab, bb = a.bounds(), b.bounds()
    if ab[2] <= bb[0] or bb[2] <= ab[0] or ab[3] <= bb[1] or bb[3] <= ab[1]:
        return 0.0
    pa, pb = a.polygon(), b.polygon()
    inter = pa.intersection(pb).area
    union = pa.area + pb.area - inter
    return float(inter / union) if union > 0 else 0.0


def _scan_region_seeds(
    region_mask: np.ndarray,
    offset: Tuple[int, int],
    region_id: int,
    shape: TextShape,
    saliency_table: IntegralTable,
    params: AttributeDict,
) -> np.ndarray:
    """Axis-aligned seeds passing the coverage test on the scan grid.

    Returns:
        np.ndarray: (n, 6) rows of (score, region_id, y, x, h, w).
    """
    table = integral_image(region_mask)
    bh, bw = region_mask.shape
    max_h = params.max_height_fraction * min(bw, bh)
    if shape.max_height:
        max_h = min(max_h, shape.max_height)

    rows = []
    for h in height_ladder(shape.min_height, max_h, params.ladder_factor):
        w = int(round(shape.aspect_ratio * h))
        if w < 1 or w > bw or h > bh:
            continue
        stride = max(1, h // int(params.stride_divisor))
        yy, xx = np.meshgrid(
            np.arange(0, bh - h + 1, stride),
            np.arange(0, bw - w + 1, stride),
            indexing="ij",
        )
        coverage = table.rect_sums(xx, yy, xx + w, yy + h) / float(w * h)
        passing = coverage >= params.coverage_min
        if not passing.any():
            continue
        x = xx[passing] + offset[0]
        y = yy[passing] + offset[1]
        scores = saliency_table.rect_sums(x, y, x + w, y + h) / float(w * h)
        rows.append(
            np.stack(
                [
                    scores,
                    np.full(len(x), region_id),
                    y,
                    x,
                    np.full(len(x), h),
                    np.full(len(x), w),
                ],
                axis=1,
            ).astype(np.float64)
        )
    if not rows:
        return np.empty((0, 6))
    return np.concatenate(rows)


def _sort_seeds(seeds: np.ndarray) -> np.ndarray:
    # Ascending (score, region, y, x, h).
    order = np.lexsort((seeds[:, 4], seeds[:, 3], seeds[:, 2], seeds[:, 1], seeds[:, 0]))
    return seeds[order]


def _suppress_seeds(seeds: np.ndarray, iou_max: float) -> np.ndarray:
    """Greedy non-maximum suppression of axis-aligned seeds, lowest score first.

    A seed is kept when its IoU with every kept seed stays below iou_max.
    """
    if seeds.shape[0] == 0:
        return seeds
    seeds = _sort_seeds(seeds)
    y1, x1 = seeds[:, 2], seeds[:, 3]
    y2, x2 = y1 + seeds[:, 4], x1 + seeds[:, 5]
    area = seeds[:, 4] * seeds[:, 5]

    picked = []
    idxs = np.arange(seeds.shape[0])
    while idxs.size > 0:
        i, rest = idxs[0], idxs[1:]
        picked.append(i)
        w = np.maximum(0.0, np.minimum(x2[i], x2[rest]) - np.maximum(x1[i], x1[rest]))
        h = np.maximum(0.0, np.minimum(y2[i], y2[rest]) - np.maximum(y1[i], y1[rest]))
        inter = w * h
        iou = inter / (area[i] + area[rest] - inter)
        idxs = rest[iou < iou_max]
    return seeds[picked]


def find_placements(
    elig: EligibilityMask,
    grad: GradientField,
    saliency: SaliencyMap,
    shape: TextShape,
    rng: np.random.Generator,
    params: AttributeDict = Config().placement,
) -> List[PlacementCandidate]:
    """Search every eligible region for non-overlapping text boxes.

    Per region a geometric ladder of heights and a stride height/4 grid of
    positions are scanned with an integral table. Passing seeds are thinned per
    region by axis-aligned non-maximum suppression. The max_seeds lowest-score
    survivors get an orientation from the structure tensor on a window twice the
    box size (or a small horizontal jitter when the structure is incoherent), are
    re-verified as rotated boxes and scored by mean saliency. Candidates are
    accepted in ascending score order while their rotated IoU with every
    accepted box stays below iou_max.

    Args:
        elig (EligibilityMask): Where text may go.
        grad (GradientField): Gradients of the background.
        saliency (SaliencyMap): Saliency of the background.
        shape (TextShape): Box aspect ratio and height bounds.
        rng (np.random.Generator): Source of orientation jitter.
        params (AttributeDict): Placement section of the config.

    Returns:
        List[PlacementCandidate]: Accepted candidates sorted ascending by score.
    """
    mask = elig.mask
    if mask.shape != saliency.shape or mask.shape != grad.shape:
        raise DimensionMismatch(mask.shape, saliency.shape)

    regions = connected_regions(mask, min_area=int(params.min_region_side) ** 2)
    if not regions:
        return []

    saliency_table = IntegralTable(saliency.values.astype(np.float64))
    n_scanned = 0
    seed_rows = []
    for region in regions:
        rows = _scan_region_seeds(
            region.mask,
            (region.bbox[0], region.bbox[1]),
            region.region_id,
            shape,
            saliency_table,
            params,
        )
        n_scanned += len(rows)
        seed_rows.append(_suppress_seeds(rows, float(params.iou_max)))
    seeds = _sort_seeds(np.concatenate(seed_rows))
    if seeds.shape[0] == 0:
        return []

    n_distinct = len(seeds)
    seeds = seeds[: int(params.max_seeds)]
    logger.debug(
        f"{n_scanned} seeds on the scan grid, {n_distinct} without overlap, "
        f"verifying {len(seeds)}."
    )

    jitter = math.radians(float(params.jitter_degrees))
    verified = []
    for _, region_id, y, x, h, w in seeds:
        cx, cy = x + w / 2.0, y + h / 2.0
        half_w = w * params.orientation_window / 2.0
        half_h = h * params.orientation_window / 2.0
        window = (
            int(math.floor(cx - half_w)),
            int(math.floor(cy - half_h)),
            int(math.ceil(cx + half_w)),
            int(math.ceil(cy + half_h)),
        )
        theta, coherence = estimate_orientation(grad, window)
        if coherence < params.coherence_gate:
            theta = float(rng.uniform(-jitter, jitter)) if jitter > 0 else 0.0

        candidate = PlacementCandidate(
            center=(cx, cy),
            width=w,
            height=h,
            theta=theta,
            region_id=int(region_id),
            score=0.0,
        )
        step = max(1.0, h * float(params.sample_step_fraction))
        if rotated_coverage(mask, candidate, step) < params.coverage_min:
            continue
        score = rotated_mean(saliency.values, candidate, step)
        verified.append(
            PlacementCandidate(
                center=(cx, cy),
                width=w,
                height=h,
                theta=theta,
                region_id=int(region_id),
                score=score,
            )
        )

    verified.sort(
        key=lambda c: (c.score, c.region_id, c.center[1], c.center[0], c.height)
    )
    accepted: List[PlacementCandidate] = []
    for candidate in verified:
        if all(rotated_iou(candidate, a) < params.iou_max for a in accepted):
            accepted.append(candidate)
            if len(accepted) >= int(params.max_candidates):
                break

    return accepted


def select_placements(
    cands: Sequence[PlacementCandidate],
    max_count: int,
    rng: np.random.Generator,
    tau: float = 0.2,
) -> List[PlacementCandidate]:
    """Draw up to max_count candidates without replacement, weight exp(-score/tau).

    Selected candidates keep their input order.
    """
    n = len(cands)
    k = min(int(max_count), n)
    if k <= 0:
        return []
    scores = np.array([c.score for c in cands], dtype=np.float64)
    # Shifting by the minimum leaves the normalized weights unchanged.
    weights = np.exp(-(scores - scores.min()) / tau)
    p = weights / weights.sum()
    chosen = rng.choice(n, size=k, replace=False, p=p)
    return [cands[i] for i in sorted(chosen.tolist())]


def carve(mask: np.ndarray, candidate: PlacementCandidate, pad: float = 2.0) -> np.ndarray:
    """Copy of mask with the (padded) rotated box cleared."""
    im = Image.fromarray(mask.astype(np.uint8) * 255, mode="L")
    # PIL places pixel centers on integer coordinates.
    corners = candidate.corners(pad=pad) - 0.5
    ImageDraw.Draw(im).polygon([tuple(p) for p in corners.tolist()], fill=0, outline=0)
    return np.array(im) > 0


def draw_overlay(
    image: RasterImage,
    mask: np.ndarray,
    candidates: Sequence[PlacementCandidate],
) -> RasterImage:
    """Tint eligible pixels green and outline candidate boxes in red."""
    data = image.data.astype(np.float64)
    tint = np.array([0.0, 255.0, 0.0])
    data[mask] = 0.6 * data[mask] + 0.4 * tint
    im = Image.fromarray(np.rint(data).astype(np.uint8), mode="RGB")
    draw = ImageDraw.Draw(im)
    for c in candidates:
        pts = [tuple(p) for p in (c.corners() - 0.5).tolist()]
        draw.line(pts + [pts[0]], fill=(255, 0, 0), width=1)
    return RasterImage.from_pil(im)
