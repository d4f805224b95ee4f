import logging
import unicodedata
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from scene_text_synthesis.converter import (
    GroundTruthFormat,
    iter_dataset,
    read_groundtruth,
)
from scene_text_synthesis.exceptions import EmptyCorpus, EncodingError

logger = logging.getLogger(__name__)


class Granularity(str, Enum):
    WORD = "word"
    LINE = "line"


def _punctuation_only(token: str) -> bool:
    return all(unicodedata.category(c).startswith("P") for c in token)


def split_units(text: str, granularity: Granularity) -> List[str]:
    """Text units of a decoded document.

    Word mode splits on whitespace and drops punctuation-only tokens; line mode
    keeps every non-blank line verbatim.
    """
    if Granularity(granularity) == Granularity.WORD:
        return [t for t in text.split() if not _punctuation_only(t)]
    return [line for line in text.splitlines() if line.strip()]


@dataclass(frozen=True)
class TextCorpus:
    """Source texts with an optional language tag per unit."""

    units: Tuple[str, ...]
    granularity: Granularity = Granularity.WORD
    languages: Tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        object.__setattr__(self, "units", tuple(self.units))
        object.__setattr__(self, "granularity", Granularity(self.granularity))
        if not self.languages:
            object.__setattr__(self, "languages", ("",) * len(self.units))
        object.__setattr__(self, "languages", tuple(self.languages))
        if len(self.languages) != len(self.units):
            raise ValueError("One language tag per unit.")
        for u in self.units:
            if not u.strip():
                raise ValueError("Corpus units must not be blank.")
            if self.granularity == Granularity.WORD and len(u.split()) != 1:
                raise ValueError(f"Word unit with whitespace: {u!r}")

    def __len__(self) -> int:
        return len(self.units)

    def __contains__(self, unit: str) -> bool:
        return unit in self.units


def _read_utf8(path: Union[str, Path]) -> str:
    raw = Path(path).read_bytes()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as e:
        raise EncodingError(path, e.start) from e
    return text[1:] if text.startswith("\ufeff") else text


def load_corpus(
    paths: Sequence[Union[str, Path]],
    granularity: Union[Granularity, str] = Granularity.WORD,
    languages: Optional[Dict[str, str]] = None,
) -> TextCorpus:
    """Load text units from UTF-8 files.

    Args:
        paths (Sequence[Union[str, Path]]): Text files, read in the given order.
        granularity (Union[Granularity, str]): Word or line units.
        languages (Optional[Dict[str, str]]): Language tag per file path or name.

    Raises:
        EncodingError: On bytes that are not valid UTF-8.
    """
    granularity = Granularity(granularity)
    languages = languages or {}
    units: List[str] = []
    tags: List[str] = []
    for path in paths:
        file_units = split_units(_read_utf8(path), granularity)
        tag = languages.get(str(path), languages.get(Path(path).name, ""))
        units.extend(file_units)
        tags.extend([tag] * len(file_units))
        logger.debug(f"{len(file_units)} {granularity.value} units from {path}.")
    return TextCorpus(units=tuple(units), granularity=granularity, languages=tuple(tags))


def load_transcripts(
    dataset_root: Union[str, Path],
    gt_format: GroundTruthFormat = "icdar-word",
    granularity: Union[Granularity, str] = Granularity.WORD,
) -> TextCorpus:
    """Corpus of the transcripts of an annotated dataset, don't-care boxes left out."""
    granularity = Granularity(granularity)
    units: List[str] = []
    for _, gt_path in iter_dataset(dataset_root):
        for annotation in read_groundtruth(gt_path, gt_format):
            if annotation.dont_care:
                continue
            units.extend(split_units(annotation.transcript, granularity))
    return TextCorpus(units=tuple(units), granularity=granularity)


def sample_text(corpus: TextCorpus, rng: np.random.Generator) -> str:
    """Uniform draw from the corpus.

    Raises:
        EmptyCorpus: If the corpus is empty.
    """
    if len(corpus) == 0:
        raise EmptyCorpus("Cannot sample from an empty corpus.")
    return corpus.units[int(rng.integers(len(corpus)))]


class CorpusMixture:
    """Dataset transcripts mixed with an external corpus.

    A draw comes from the primary corpus with probability ratio and from the
    secondary corpus otherwise; an empty side is never drawn from.
    """

    def __init__(
        self,
        primary: Optional[TextCorpus],
        secondary: Optional[TextCorpus],
        ratio: float = 0.5,
    ) -> None:
        if not 0.0 <= ratio <= 1.0:
            raise ValueError(f"Mixture ratio must be in [0, 1], got {ratio}.")
        self.primary = primary if primary is not None and len(primary) else None
        self.secondary = secondary if secondary is not None and len(secondary) else None
        self.ratio = float(ratio)
        if self.primary is None and self.secondary is None:
            raise EmptyCorpus("Both sides of the corpus mixture are empty.")

    def __len__(self) -> int:
        return sum(len(c) for c in (self.primary, self.secondary) if c is not None)

    def __contains__(self, unit: str) -> bool:
        return any(unit in c for c in (self.primary, self.secondary) if c is not None)

    def sample(self, rng: np.random.Generator) -> str:
        if self.primary is None:
            return sample_text(self.secondary, rng)
        if self.secondary is None:
            return sample_text(self.primary, rng)
        source = self.primary if rng.random() < self.ratio else self.secondary
        return sample_text(source, rng)
