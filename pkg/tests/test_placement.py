import math
from itertools import combinations

import numpy as np
import pytest

from scene_text_synthesis.config import Config
from scene_text_synthesis.exceptions import DimensionMismatch
from scene_text_synthesis.placement import (
    EligibilityMask,
    PlacementCandidate,
    TextShape,
    carve,
    combine_masks,
    draw_overlay,
    estimate_orientation,
    find_placements,
    height_ladder,
    rotated_coverage,
    rotated_iou,
    select_placements,
)
from scene_text_synthesis.raster import ColorSpace, RasterImage, sobel_gradients
from scene_text_synthesis.saliency import SaliencyMap, SaliencyMask
from scene_text_synthesis.simulation import oriented_edge_image


def _flat_inputs(height=100, width=200, saliency=0.5):
    gray = RasterImage(np.full((height, width), 0.5, dtype=np.float32), ColorSpace.GRAY)
    return (
        sobel_gradients(gray),
        SaliencyMap.from_values(np.full((height, width), saliency, dtype=np.float32)),
    )


def _candidate(cx, cy, w, h, theta=0.0, score=0.0):
    return PlacementCandidate(
        center=(cx, cy), width=w, height=h, theta=theta, region_id=0, score=score
    )


def test_combine_masks(rng):
    sem = rng.random((20, 30)) < 0.5
    sal = SaliencyMask(mask=rng.random((20, 30)) < 0.5, threshold=0.5)
    elig = combine_masks(sem, sal)
    np.testing.assert_array_equal(elig.mask, sem & sal.mask)
    assert elig.provenance == ("semantic", "saliency")


def test_combine_masks_identities():
    ones = np.ones((5, 5), dtype=bool)
    zeros = np.zeros((5, 5), dtype=bool)
    assert combine_masks(ones, SaliencyMask(ones, 1.0)).mask.all()
    assert not combine_masks(ones, SaliencyMask(zeros, 0.0)).mask.any()
    with pytest.raises(DimensionMismatch):
        combine_masks(ones, SaliencyMask(np.ones((5, 6), dtype=bool), 1.0))


@pytest.mark.parametrize("degrees", [30.0, -20.0, 0.0])
def test_orientation_of_straight_edge(degrees):
    grad = sobel_gradients(oriented_edge_image(128, degrees).to_gray())
    theta, coherence = estimate_orientation(grad, (0, 0, 128, 128))
    assert math.degrees(theta) == pytest.approx(degrees, abs=2.0)
    assert coherence > 0.9


def test_orientation_of_flat_window():
    grad, _ = _flat_inputs()
    theta, coherence = estimate_orientation(grad, (10, 10, 60, 40))
    assert theta == 0.0
    assert coherence < 0.05


def test_orientation_is_clamped():
    grad = sobel_gradients(oriented_edge_image(128, 70.0).to_gray())
    theta, _ = estimate_orientation(grad, (0, 0, 128, 128))
    assert -math.pi / 4 < theta <= math.pi / 4


def test_height_ladder():
    ladder = height_ladder(16, 80, 1.26)
    assert ladder[0] == 16
    assert ladder[-1] <= 80
    assert ladder == sorted(set(ladder))
    assert height_ladder(16, 10, 1.26) == []


def test_coverage_of_axis_aligned_box_is_exact(rng):
    mask = rng.random((40, 60)) < 0.7
    candidate = _candidate(25.0, 18.0, 30, 16)
    expected = mask[10:26, 10:40].mean()
    assert rotated_coverage(mask, candidate, step=1.0) == pytest.approx(expected)


def test_coverage_out_of_bounds_is_zero():
    mask = np.ones((40, 60), dtype=bool)
    assert rotated_coverage(mask, _candidate(5.0, 20.0, 30, 10)) == 0.0
    assert rotated_coverage(mask, _candidate(30.0, 20.0, 30, 10, theta=0.5)) == 1.0


def test_rotated_iou():
    a = _candidate(50.0, 50.0, 40, 20)
    assert rotated_iou(a, a) == pytest.approx(1.0)
    assert rotated_iou(a, _candidate(150.0, 50.0, 40, 20)) == 0.0
    assert rotated_iou(a, _candidate(70.0, 50.0, 40, 20)) == pytest.approx(1.0 / 3.0)


def test_candidate_dict_round_trip():
    c = _candidate(12.5, 7.25, 48, 16, theta=0.1, score=0.3)
    assert PlacementCandidate.from_dict(c.to_dict()) == c
    x0, y0, x1, y1 = c.bounds()
    corners = c.corners()
    assert x0 <= corners[:, 0].min() and corners[:, 0].max() <= x1
    assert y0 <= corners[:, 1].min() and corners[:, 1].max() <= y1


def test_placements_on_open_region(rng):
    grad, saliency = _flat_inputs()
    elig = EligibilityMask(np.ones((100, 200), dtype=bool))
    params = Config().placement
    candidates = find_placements(elig, grad, saliency, TextShape(3.0), rng, params)

    assert candidates
    assert len(candidates) <= params.max_candidates
    scores = [c.score for c in candidates]
    assert scores == sorted(scores)
    for c in candidates:
        assert rotated_coverage(elig.mask, c) >= params.coverage_min
        assert c.height >= 16
        assert c.width == pytest.approx(3.0 * c.height, abs=1.0)
        assert -math.pi / 4 < c.theta <= math.pi / 4
        # Incoherent structure leaves the box horizontal up to the jitter.
        assert abs(math.degrees(c.theta)) <= params.jitter_degrees + 1e-9
        assert c.score == pytest.approx(0.5)
    for a, b in combinations(candidates, 2):
        assert rotated_iou(a, b) < params.iou_max


def test_placements_prefer_low_saliency(rng):
    grad, _ = _flat_inputs()
    values = np.full((100, 200), 0.2, dtype=np.float32)
    values[:, 100:] = 0.8
    saliency = SaliencyMap.from_values(values)
    elig = EligibilityMask(np.ones((100, 200), dtype=bool))
    candidates = find_placements(elig, grad, saliency, TextShape(3.0), rng)
    assert candidates[0].center[0] + candidates[0].width / 2 <= 100 + 1e-9
    assert candidates[0].score == pytest.approx(0.2)


def test_placements_follow_structure(rng):
    image = oriented_edge_image(160, 20.0)
    grad = sobel_gradients(image.to_gray())
    ys, xs = np.mgrid[0:160, 0:160] + 0.5
    distance = np.hypot(xs - 80.0, ys - 80.0)
    saliency = SaliencyMap.from_values((distance / distance.max()).astype(np.float32))
    elig = EligibilityMask(np.ones((160, 160), dtype=bool))
    candidates = find_placements(elig, grad, saliency, TextShape(3.0), rng)
    # The least salient box sits on the edge through the center.
    assert math.degrees(candidates[0].theta) == pytest.approx(20.0, abs=3.0)


def test_no_placement_without_room(rng):
    grad, saliency = _flat_inputs()
    assert find_placements(
        EligibilityMask(np.zeros((100, 200), dtype=bool)),
        grad,
        saliency,
        TextShape(3.0),
        rng,
    ) == []

    small = np.zeros((100, 200), dtype=bool)
    small[10:30, 10:30] = True
    assert find_placements(EligibilityMask(small), grad, saliency, TextShape(3.0), rng) == []


def test_placement_inputs_must_match(rng):
    grad, saliency = _flat_inputs()
    with pytest.raises(DimensionMismatch):
        find_placements(
            EligibilityMask(np.ones((50, 50), dtype=bool)),
            grad,
            saliency,
            TextShape(3.0),
            rng,
        )


def test_select_placements(rng):
    candidates = [_candidate(20.0 * i, 10.0, 10, 5, score=i / 10) for i in range(8)]
    chosen = select_placements(candidates, 3, rng)
    assert len(chosen) == 3
    assert len(set(id(c) for c in chosen)) == 3
    positions = [candidates.index(c) for c in chosen]
    assert positions == sorted(positions)
    assert select_placements(candidates, 20, rng) == candidates
    assert select_placements(candidates, 0, rng) == []
    assert select_placements([], 3, rng) == []


def test_select_placements_is_deterministic():
    candidates = [_candidate(20.0 * i, 10.0, 10, 5, score=i / 10) for i in range(8)]
    a = select_placements(candidates, 3, np.random.default_rng(seed=7))
    b = select_placements(candidates, 3, np.random.default_rng(seed=7))
    assert a == b


def test_select_placements_prefers_low_scores(rng):
    candidates = [_candidate(0.0, 0.0, 10, 5, score=0.0), _candidate(50.0, 0.0, 10, 5, score=1.0)]
    draws = [select_placements(candidates, 1, rng)[0].score for _ in range(2000)]
    # Weight ratio exp(-1 / 0.2).
    assert np.mean(np.array(draws) == 0.0) > 0.97


def test_carve_clears_box():
    mask = np.ones((40, 60), dtype=bool)
    carved = carve(mask, _candidate(30.0, 20.0, 20, 10), pad=2.0)
    assert mask.all()
    assert not carved[13:27, 18:42].any()
    assert carved[:10].all()
    assert carved[30:].all()
    assert carved[:, :16].all()


def test_overlay_marks_eligible_pixels():
    image = RasterImage(np.full((40, 60, 3), 100, dtype=np.uint8))
    mask = np.zeros((40, 60), dtype=bool)
    mask[:, :30] = True
    overlay = draw_overlay(image, mask, [])
    assert overlay.shape == image.shape
    assert overlay.data[5, 5, 1] > 100
    assert overlay.data[5, 50].tolist() == [100, 100, 100]


def test_open_region_spreads_candidates(rng):
    height, width = 240, 320
    yy, xx = np.mgrid[0:height, 0:width]
    bowl = np.hypot(xx - width / 2.0, yy - height / 2.0)
    saliency = SaliencyMap.from_values(bowl / bowl.max())
    grad, _ = _flat_inputs(height, width)
    elig = EligibilityMask(np.ones((height, width), dtype=bool))
    params = Config().placement

    candidates = find_placements(elig, grad, saliency, TextShape(3.0), rng, params)

    assert len(candidates) >= Config().synthesis.max_instances_per_image
    xs = [c.center[0] for c in candidates]
    ys = [c.center[1] for c in candidates]
    assert max(xs) - min(xs) >= 120
    assert max(ys) - min(ys) >= 60
    for a, b in combinations(candidates, 2):
        assert rotated_iou(a, b) < params.iou_max


def _grid_boxes(mask, saliency, heights, aspect, stride_divisor):
    bh, bw = mask.shape
    boxes = []
    for h in heights:
        w = int(round(aspect * h))
        stride = max(1, h // stride_divisor)
        for y in range(0, bh - h + 1, stride):
            for x in range(0, bw - w + 1, stride):
                boxes.append(
                    (
                        float(mask[y : y + h, x : x + w].mean()),
                        float(saliency[y : y + h, x : x + w].astype(np.float64).mean()),
                        _candidate(x + w / 2.0, y + h / 2.0, w, h),
                    )
                )
    return boxes


def test_l_shaped_region_matches_exhaustive_search(rng):
    mask = np.zeros((80, 140), dtype=bool)
    mask[0:64, 0:32] = True
    mask[32:64, 0:128] = True
    values = rng.uniform(0.0, 1.0, mask.shape).astype(np.float32)
    saliency = SaliencyMap.from_values(values)
    grad, _ = _flat_inputs(*mask.shape)

    params = Config().placement
    params.jitter_degrees = 0.0
    params.sample_step_fraction = 0.04
    params.max_seeds = 10**6
    params.max_candidates = 10**6
    shape = TextShape(3.0, min_height=16, max_height=21)

    candidates = find_placements(EligibilityMask(mask), grad, saliency, shape, rng, params)
    assert candidates

    for c in candidates:
        assert c.theta == 0.0
        x0, y0 = int(c.center[0] - c.width / 2), int(c.center[1] - c.height / 2)
        box = mask[y0 : y0 + int(c.height), x0 : x0 + int(c.width)]
        assert box.shape == (c.height, c.width)
        assert box.mean() >= params.coverage_min
        assert c.score == pytest.approx(
            values[y0 : y0 + int(c.height), x0 : x0 + int(c.width)].astype(np.float64).mean()
        )

    # Region bounding box is the top-left 64 x 128 block.
    heights = height_ladder(16, 21, params.ladder_factor)
    assert heights == [16, 20]
    grid = _grid_boxes(mask[:64, :128], values[:64, :128], heights, 3.0, params.stride_divisor)
    passing = [(score, box) for coverage, score, box in grid if coverage >= params.coverage_min]
    assert min(score for score, _ in passing) == pytest.approx(candidates[0].score)
    for score, box in passing:
        # Every passing box is returned or overlapped by a returned box scoring no worse.
        assert any(
            (c.score <= score + 1e-9 and rotated_iou(c, box) >= params.iou_max)
            or (c.center, c.height) == (box.center, box.height)
            for c in candidates
        )
