import json

import numpy as np
import pytest

from scene_text_synthesis.config import Config
from scene_text_synthesis.containers import (
    MANIFEST_NAME,
    ManifestEntry,
    RunManifest,
    SynthesizedSample,
    TextInstance,
    crop_entry_words,
    sample_file_names,
    write_sample,
)
from scene_text_synthesis.placement import PlacementCandidate, rotated_iou
from scene_text_synthesis.raster import LabPixel, RasterImage
from scene_text_synthesis.rendering import composite, rasterize_text
from scene_text_synthesis.saliency import HistogramContrastSaliency


def _sample(font, words=("exit", "open")):
    background = RasterImage(np.full((80, 160, 3), 60, dtype=np.uint8))
    image = background
    instances = []
    for i, word in enumerate(words):
        placement = PlacementCandidate(
            center=(50.0 + 70.0 * i, 40.0),
            width=60,
            height=20,
            theta=0.0,
            region_id=0,
            score=0.1,
        )
        layout = rasterize_text(word, font, 20)
        color = LabPixel(95.0, 0.0, 0.0)
        image, quad = composite(image, layout, color, placement)
        instances.append(
            TextInstance(layout, color, placement, quad, record_source_id=f"data/img_1/{i:04d}")
        )
    return SynthesizedSample(
        image=image,
        instances=instances,
        seed=7,
        background_id="bg_000",
        eligibility_mask=np.ones(background.shape, dtype=bool),
        saliency=HistogramContrastSaliency().compute(background),
    )


def _manifest(font, tmp_path):
    entries = [
        write_sample(_sample(font), tmp_path, sample_id=0, attempt_index=0),
        write_sample(_sample(font, ("sale",)), tmp_path, sample_id=1, attempt_index=2),
    ]
    return RunManifest(
        engine_version="1.0.0",
        config_hash="abc",
        seed=42,
        requested=2,
        entries=entries,
        config=Config().to_dict(),
        attempts=3,
        root=tmp_path,
    )


def test_sample_file_names():
    assert sample_file_names(12) == ("img_000012.png", "gt_img_000012.txt")


def test_write_sample(font, tmp_path):
    sample = _sample(font)
    entry = write_sample(sample, tmp_path, sample_id=3, attempt_index=5)

    assert entry.files() == ["img_000003.png", "gt_img_000003.txt"]
    assert (entry.background_id, entry.seed, entry.attempt_index) == ("bg_000", 7, 5)
    np.testing.assert_array_equal(
        RasterImage.from_file(tmp_path / entry.image).data, sample.image.data
    )
    lines = (tmp_path / entry.groundtruth).read_text(encoding="utf-8").splitlines()
    assert [line.rsplit(",", 1)[1] for line in lines] == ["exit", "open"]
    assert [i["record_source_id"] for i in entry.instances] == [
        "data/img_1/0000",
        "data/img_1/0001",
    ]
    assert entry.instances[0]["font"] == "DejaVuSans.ttf"
    assert entry.instances[0]["px_height"] == 20


def test_write_sample_debug_masks(font, tmp_path):
    entry = write_sample(_sample(font), tmp_path, 0, 0, debug_masks=True)
    assert entry.debug == {"saliency": "saliency_000000.png", "overlay": "overlay_000000.png"}
    assert entry.files()[2:] == ["overlay_000000.png", "saliency_000000.png"]
    for name in entry.files():
        assert (tmp_path / name).exists()


def test_manifest_is_canonical(font, tmp_path):
    manifest = _manifest(font, tmp_path)
    text = manifest.dumps()
    assert text == manifest.dumps()
    d = json.loads(text)
    assert list(d) == sorted(d)
    assert [s["sample_id"] for s in d["samples"]] == [0, 1]
    assert d["config"]["general"]["random_seed"] == 42


def test_manifest_round_trip(font, tmp_path):
    manifest = _manifest(font, tmp_path)
    manifest.to_json(tmp_path / MANIFEST_NAME)
    loaded = RunManifest.from_json(tmp_path / MANIFEST_NAME)

    assert loaded.root == tmp_path
    assert loaded.dumps() == manifest.dumps()
    assert (tmp_path / MANIFEST_NAME).read_text(encoding="utf-8") == manifest.dumps() + "\n"
    assert loaded.to_config().to_dict() == Config().to_dict()


def test_manifest_lookup(font, tmp_path):
    manifest = _manifest(font, tmp_path)
    assert len(manifest) == 2
    assert manifest.entry(1).attempt_index == 2
    assert manifest.files() == [
        "img_000000.png",
        "gt_img_000000.txt",
        "img_000001.png",
        "gt_img_000001.txt",
    ]
    with pytest.raises(KeyError):
        manifest.entry(5)


def test_manifest_entry_from_dict():
    entry = ManifestEntry(0, 4, "bg_001", 2**63 + 5, "img_000000.png", "gt_img_000000.txt")
    assert ManifestEntry.from_dict(json.loads(json.dumps(entry.to_dict()))) == entry


def test_manifest_frame(font, tmp_path):
    df = _manifest(font, tmp_path).to_frame()
    assert len(df) == 3
    assert df["text"].tolist() == ["exit", "open", "sale"]
    assert df["instance"].tolist() == [0, 1, 0]
    for column in ["L", "a", "b", "theta", "record_source_id", "x1", "y4"]:
        assert column in df.columns
    assert df["L"].iloc[0] == pytest.approx(95.0)


def test_crop_entry_words(font, tmp_path):
    manifest = _manifest(font, tmp_path)
    out_dir = tmp_path / "words"
    out_dir.mkdir()
    labels = crop_entry_words(manifest.entry(0), tmp_path, out_dir)
    assert labels == [("word_000000_00.png", "exit"), ("word_000000_01.png", "open")]

    quad = np.asarray(manifest.entry(0).instances[0]["quad"])
    crop = RasterImage.from_file(out_dir / "word_000000_00.png")
    assert crop.width == quad[1, 0] - quad[0, 0]
    assert crop.height == quad[3, 1] - quad[0, 1]
    assert crop.data.max() > 200


def test_max_pairwise_iou(font):
    sample = _sample(font, words=("exit",))
    assert sample.max_pairwise_iou() == 0.0

    sample = _sample(font)
    a, b = (i.placement for i in sample.instances)
    assert sample.max_pairwise_iou() == rotated_iou(a, b) == 0.0

    tilted = PlacementCandidate(
        center=(60.0, 40.0), width=60, height=20, theta=0.3, region_id=0, score=0.2
    )
    layout = rasterize_text("shop", font, 20)
    sample.instances.append(
        TextInstance(layout, LabPixel(95.0, 0.0, 0.0), tilted, tilted.corners())
    )
    expected = max(rotated_iou(a, tilted), rotated_iou(b, tilted))
    assert expected > 0.0
    assert sample.max_pairwise_iou() == pytest.approx(expected)
