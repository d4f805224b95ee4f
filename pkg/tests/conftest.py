import shutil
from pathlib import Path

import numpy as np
import pytest

from scene_text_synthesis.appearance import FontEntry, FontList, build_database
from scene_text_synthesis.config import Config
from scene_text_synthesis.simulation import (
    DEFAULT_WORDS,
    fixture_font_path,
    write_background_set,
    write_corpus,
    write_icdar_dataset,
)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(seed=42)


@pytest.fixture(scope="session")
def font() -> FontEntry:
    return FontEntry(path=str(fixture_font_path()), style="DejaVu Sans Book")


@pytest.fixture
def font_dir(tmp_path: Path) -> Path:
    """Directory holding DejaVu Sans only."""
    directory = tmp_path / "fonts"
    directory.mkdir()
    shutil.copy(fixture_font_path(), directory / "DejaVuSans.ttf")
    return directory


@pytest.fixture
def fonts(font: FontEntry) -> FontList:
    return FontList([font])


@pytest.fixture
def icdar_dataset(tmp_path: Path) -> Path:
    return write_icdar_dataset(tmp_path / "icdar", n_images=2, boxes_per_image=2)


@pytest.fixture
def synth_config(tmp_path: Path, font_dir: Path, icdar_dataset: Path) -> Config:
    """Complete run configuration over three two-tone backgrounds."""
    backgrounds = write_background_set(tmp_path / "scenes", n_images=3)
    corpus = write_corpus(tmp_path / "words.txt", DEFAULT_WORDS)

    config = Config()
    build_database(icdar_dataset, "icdar-word", config, out=tmp_path / "appearance.h5")
    config.update(
        {
            "paths": {
                **backgrounds,
                "appearance_db": tmp_path / "appearance.h5",
                "font_dir": font_dir,
                "corpus_paths": [str(corpus)],
                "output_dir": tmp_path / "out",
            },
            "general": {"n_jobs": 1, "tqdm_enabled": False},
            "synthesis": {"count": 3, "max_instances_per_image": 3},
        }
    )
    return config
