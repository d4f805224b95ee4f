from pathlib import Path
from typing import Any, Optional, Union


class ConfigError(ValueError):
    """Invalid configuration or input layout."""


class InvalidChannelCount(ValueError):
    def __init__(self, channels: int, expected: int):
        self.channels = channels
        self.expected = expected
        super().__init__(f"Expected {expected}-channel image, got {channels}.")


class ImageTooSmall(ValueError):
    def __init__(self, shape: Any, minimum: Any):
        self.shape = shape
        super().__init__(f"Image of shape {shape} smaller than {minimum}.")


class DimensionMismatch(ValueError):
    def __init__(self, a: Any, b: Any):
        self.shapes = (a, b)
        super().__init__(f"Dimension mismatch: {a} != {b}.")


class UnknownClassId(ValueError):
    def __init__(self, class_id: int):
        self.class_id = class_id
        super().__init__(f"Class id {class_id} has no palette entry.")


class NoBackgroundRing(ValueError):
    """Annotation box leaves no background pixels around it."""


class SegmentationFailed(ValueError):
    """Too few text pixels inside an annotation box."""


class EmptyDatabase(ValueError):
    """No appearance record could be built."""


class StaleDatabase(ValueError):
    """Appearance database written with another descriptor version."""


class EmptyFontList(ValueError):
    """No usable font."""


class MissingGlyph(ValueError):
    def __init__(self, char: str, font: Union[str, Path]):
        self.char = char
        self.font = str(font)
        super().__init__(f"Glyph {char!r} (U+{ord(char):04X}) missing from {font}.")


class EmptyText(ValueError):
    """Text is empty after trimming."""


class EncodingError(ValueError):
    def __init__(self, path: Union[str, Path], offset: int):
        self.path = str(path)
        self.offset = offset
        super().__init__(f"Undecodable UTF-8 in {path} at byte offset {offset}.")


class EmptyCorpus(ValueError):
    """Corpus holds no text units."""


class EmptySample(RuntimeError):
    """No text instance could be placed on a background."""


class ShortRun(RuntimeError):
    def __init__(self, achieved: int, requested: int, manifest: Optional[Any] = None):
        self.achieved = achieved
        self.requested = requested
        self.manifest = manifest
        super().__init__(
            f"Produced {achieved} of {requested} requested samples before "
            "exhausting backgrounds and retries."
        )
