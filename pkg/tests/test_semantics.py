from collections import deque

import numpy as np
import pytest

from scene_text_synthesis.exceptions import (
    ConfigError,
    DimensionMismatch,
    UnknownClassId,
)
from scene_text_synthesis.raster import RasterImage
from scene_text_synthesis.semantics import (
    SemanticMap,
    SemanticPolicy,
    connected_regions,
    load_palette,
    load_semantic_map,
    semantic_mask,
)
from scene_text_synthesis.simulation import (
    FIXTURE_PALETTE,
    WALL,
    two_tone_labels,
    write_label_map,
    write_palette,
)


def _flood_fill_areas(mask):
    """Component areas by breadth-first search over 4-neighbors."""
    seen = np.zeros(mask.shape, dtype=bool)
    h, w = mask.shape
    areas = []
    for y0 in range(h):
        for x0 in range(w):
            if not mask[y0, x0] or seen[y0, x0]:
                continue
            queue = deque([(y0, x0)])
            seen[y0, x0] = True
            area = 0
            while queue:
                y, x = queue.popleft()
                area += 1
                for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                    ny, nx = y + dy, x + dx
                    if 0 <= ny < h and 0 <= nx < w and mask[ny, nx] and not seen[ny, nx]:
                        seen[ny, nx] = True
                        queue.append((ny, nx))
            areas.append(area)
    return areas


def test_unknown_class_id():
    labels = np.array([[1, 2], [2, 9]], dtype=np.uint16)
    with pytest.raises(UnknownClassId) as e:
        SemanticMap(labels, FIXTURE_PALETTE)
    assert e.value.class_id == 9


def test_policy_overlap_rejected():
    with pytest.raises(ConfigError):
        SemanticPolicy(allow={"wall"}, deny={"wall"})


def test_policy_default_and_inversion():
    policy = SemanticPolicy(allow={"wall"}, deny={"sky"}, default="deny")
    assert policy.allows("wall")
    assert not policy.allows("sky")
    assert not policy.allows("person")
    inverted = policy.inverted()
    assert not inverted.allows("wall")
    assert inverted.allows("sky")
    assert inverted.allows("person")


def test_packaged_policy():
    policy = SemanticPolicy.default_policy()
    assert policy.allows("wall")
    assert policy.allows("signboard")
    assert not policy.allows("sky")
    assert not policy.allows("person")


def test_policy_from_json_rejects_unknown_keys(tmp_path):
    path = tmp_path / "policy.json"
    path.write_text('{"allow": ["wall"], "maybe": []}', encoding="utf-8")
    with pytest.raises(ConfigError):
        SemanticPolicy.from_json(path)


def test_semantic_mask_follows_policy():
    labels = two_tone_labels(40, 50, split=0.25)
    semantic_map = SemanticMap(labels, FIXTURE_PALETTE)
    mask = semantic_mask(semantic_map, SemanticPolicy.default_policy())
    np.testing.assert_array_equal(mask, labels == WALL)
    assert semantic_map.histogram() == {"sky": 10 * 50, "wall": 30 * 50}


def test_load_from_files(tmp_path):
    labels = two_tone_labels(20, 30)
    write_label_map(tmp_path / "bg.png", labels)
    write_palette(tmp_path / "palette.txt")
    semantic_map = load_semantic_map(tmp_path / "bg.png", tmp_path / "palette.txt")
    np.testing.assert_array_equal(semantic_map.labels, labels)
    assert semantic_map.source_id == "bg"
    assert load_palette(tmp_path / "palette.txt") == FIXTURE_PALETTE

    image = RasterImage(np.zeros((20, 31, 3), dtype=np.uint8))
    with pytest.raises(DimensionMismatch):
        semantic_map.check_pairing(image)


def test_malformed_palette(tmp_path):
    path = tmp_path / "palette.txt"
    path.write_text("1 sky\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_palette(path)


def test_connected_regions_four_connectivity():
    mask = np.zeros((10, 10), dtype=bool)
    mask[0:3, 0:3] = True
    mask[3:6, 3:6] = True  # Touches the first square diagonally only.
    regions = connected_regions(mask, min_area=1)
    assert [r.area for r in regions] == [9, 9]
    assert regions[0].bbox == (0, 0, 3, 3)
    assert regions[1].bbox == (3, 3, 6, 6)


def test_connected_regions_min_area():
    mask = np.zeros((50, 50), dtype=bool)
    mask[0:40, 0:40] = True
    mask[45:48, 45:48] = True
    regions = connected_regions(mask)
    assert len(regions) == 1
    assert regions[0].area == 1600
    big = np.zeros_like(mask)
    big[0:40, 0:40] = True
    np.testing.assert_array_equal(regions[0].full_mask(mask.shape), big)


def test_connected_regions_match_flood_fill(rng):
    mask = rng.random((40, 40)) < 0.55
    regions = connected_regions(mask, min_area=1)
    assert sorted(r.area for r in regions) == sorted(_flood_fill_areas(mask))
    covered = np.zeros(mask.shape, dtype=bool)
    for r in regions:
        full = r.full_mask(mask.shape)
        assert not (covered & full).any()
        covered |= full
    np.testing.assert_array_equal(covered, mask)


def test_semantic_mask_ignores_id_values(rng):
    labels = rng.integers(1, 4, size=(30, 40)).astype(np.uint16)
    renamed_ids = {1: 7, 2: 9, 3: 4}
    renamed = np.vectorize(renamed_ids.get)(labels).astype(np.uint16)
    renamed_palette = {renamed_ids[k]: v for k, v in FIXTURE_PALETTE.items()}

    policy = SemanticPolicy.default_policy()
    np.testing.assert_array_equal(
        semantic_mask(SemanticMap(labels, FIXTURE_PALETTE), policy),
        semantic_mask(SemanticMap(renamed, renamed_palette), policy),
    )


@pytest.mark.parametrize(
    "policy",
    [
        SemanticPolicy.default_policy(),
        SemanticPolicy(allow={"wall"}, deny={"sky"}, default="deny"),
        SemanticPolicy(deny={"person"}, default="allow"),
    ],
)
def test_policy_and_inversion_partition_pixels(rng, policy):
    labels = rng.integers(1, 4, size=(25, 35)).astype(np.uint16)
    semantic_map = SemanticMap(labels, FIXTURE_PALETTE)
    allowed = semantic_mask(semantic_map, policy)
    denied = semantic_mask(semantic_map, policy.inverted())
    assert not np.any(allowed & denied)
    assert np.all(allowed | denied)
    assert int(allowed.sum()) + int(denied.sum()) == 25 * 35
