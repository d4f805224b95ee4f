import ast
import configparser
import copy
import json
import logging
from pathlib import Path
from typing import Any, Dict, Union

import mmh3

from scene_text_synthesis.exceptions import ConfigError


def format_logger(logger: logging.Logger, level: int = logging.INFO) -> None:
    """Configure basic formatting for a logger.

    Args:
        logger: Logger instance to configure
    """
    formatter = logging.Formatter(
        fmt="[%(asctime)s] {%(filename)s:%(lineno)d} %(levelname)s - %(message)s"
    )
    for handler in logger.handlers:
        handler.setFormatter(formatter)

    logger.setLevel(level)


class AttributeDict(dict):
    """Dictionary with attribute-style access"""

    def __getattr__(self, item: str) -> Any:
        """ """
        try:
            return self[item]
        except KeyError:
            raise AttributeError(f"'{type(self).__name__}' has no attribute '{item}'")

    def __setattr__(self, key: Any, value: Any) -> None:
        """ """
        self[key] = value

    def __deepcopy__(self, memo: Dict[int, Any]) -> "AttributeDict":
        return AttributeDict(**copy.deepcopy(dict(self), memo))

    def __repr__(self) -> str:
        """ """
        items = [f"{k}={v}" for k, v in self.items()]
        return f"{self.__class__.__name__}({', '.join(items)})"


class Config:
    """Synthesis configuration.

    Class level sections are defaults; every instance works on its own deep copy so
    that loading or editing one config never leaks into another.
    """

    general = AttributeDict(
        **{
            "random_seed": 42,
            "tqdm_enabled": False,
            "n_jobs": 1,
        }
    )

    paths = AttributeDict(
        **{
            "backgrounds_dir": "",
            "semantic_maps_dir": "",
            "palette_path": "",
            "policy_path": "",  # Empty uses the packaged default policy.
            "appearance_db": "",
            "font_dir": "",  # Empty uses the DejaVu fonts shipped with matplotlib.
            "corpus_paths": [],
            "corpus_languages": {},
            "transcripts_dataset": "",
            "transcripts_format": "icdar-word",
            "output_dir": "synth_out",
        }
    )

    synthesis = AttributeDict(
        **{
            "granularity": "word",
            "max_instances_per_image": 5,
            "count": 10,
            "retry_budget": 3,
            "corpus_mix_ratio": 0.5,
            "use_semantics": True,
            "use_saliency": True,
            "adaptive_appearance": True,
            "debug_masks": False,
        }
    )

    saliency = AttributeDict(
        **{
            "bins_per_channel": 12,
            "coverage": 0.95,
            "sigma_fraction": 0.02,  # Of the image diagonal.
        }
    )

    placement = AttributeDict(
        **{
            "coverage_min": 0.98,
            "min_region_side": 32,
            "min_height": 16,
            "max_height": None,
            "max_height_fraction": 0.8,  # Of the region bounding box short side.
            "ladder_factor": 1.26,
            "stride_divisor": 4,
            "orientation_window": 2.0,
            "coherence_gate": 0.3,
            "jitter_degrees": 3.0,
            "iou_max": 0.05,
            "select_tau": 0.2,
            "max_seeds": 256,
            "max_candidates": 64,
            "sample_step_fraction": 0.0625,  # Of the box height, for rotated checks.
            "word_aspect_ratio": 3.0,
            "line_aspect_ratio": 8.0,
        }
    )

    appearance = AttributeDict(
        **{
            "k_nearest": 5,
            "ring_min": 4,
            "ring_fraction": 0.5,
            "min_text_pixels": 10,
            "ambiguity_margin": 2.0,  # L units.
        }
    )

    rendering = AttributeDict(
        **{
            "padding_fraction": 0.05,
            "min_px_height": 8,
            "max_text_attempts": 3,
            "carve_dilation": 2,
        }
    )

    def __init__(self) -> None:
        for key, value in vars(type(self)).items():
            if isinstance(value, AttributeDict):
                setattr(self, key, copy.deepcopy(value))

    def __repr__(self):
        """Return string representation of Config showing all attributes"""
        items = []

        attributes = dict(**vars(self.__class__))
        attributes.update(vars(self))

        for key, value in attributes.items():
            if not key.startswith("_"):
                if isinstance(value, AttributeDict):
                    items.append(f"{key}={value}")
        attribute_sep = "\n  "
        return f"{self.__class__.__name__}(\n  {(', '+attribute_sep).join(items)}\n)"

    @property
    def sections(self) -> Dict[str, AttributeDict]:
        return {k: v for k, v in vars(self).items() if isinstance(v, AttributeDict)}

    def to_dict(self) -> Dict[str, Dict[str, Any]]:
        return {k: dict(v) for k, v in self.sections.items()}

    def update(self, values: Dict[str, Any]) -> None:
        """Update from nested (section -> key -> value) or flat (key -> value) dicts.

        Flat keys are resolved to the single section that defines them.

        Raises:
            ConfigError: On unknown sections or keys.
        """
        sections = self.sections
        for key, value in values.items():
            if isinstance(value, Path):
                value = str(value)
            if key in sections and isinstance(value, dict):
                for k, v in value.items():
                    if k not in sections[key]:
                        raise ConfigError(f"Unknown config key: {key}.{k}")
                    sections[key][k] = str(v) if isinstance(v, Path) else v
                continue
            owners = [name for name, section in sections.items() if key in section]
            if len(owners) != 1:
                raise ConfigError(f"Unknown config key: {key}")
            sections[owners[0]][key] = value

    def hash(self) -> str:
        """Stable hash of the canonical JSON dump."""
        canonical = json.dumps(
            self.to_dict(), sort_keys=True, ensure_ascii=False, default=str
        )
        return "%032x" % mmh3.hash128(canonical.encode("utf-8"), signed=False)

    def validate(self, check_paths: bool = True) -> None:
        """Check config invariants.

        Raises:
            ConfigError: When any invariant fails.
        """
        s = self.synthesis
        if int(s.max_instances_per_image) < 1:
            raise ConfigError("max_instances_per_image must be >= 1.")
        if int(s.count) < 0:
            raise ConfigError("count must be >= 0.")
        if s.granularity not in ("word", "line"):
            raise ConfigError(f"Unknown granularity: {s.granularity}")
        if not 0.0 <= float(s.corpus_mix_ratio) <= 1.0:
            raise ConfigError("corpus_mix_ratio must be in [0, 1].")
        if not 0.0 < float(self.placement.coverage_min) <= 1.0:
            raise ConfigError("coverage_min must be in (0, 1].")
        if self.paths.transcripts_format not in ("icdar-word", "quad"):
            raise ConfigError(
                f"Unknown transcripts format: {self.paths.transcripts_format}"
            )

        if not check_paths:
            return

        required = ["backgrounds_dir"]
        if s.adaptive_appearance:
            required.append("appearance_db")
        if s.use_semantics:
            required.extend(["semantic_maps_dir", "palette_path"])
        for key in required:
            if not self.paths[key]:
                raise ConfigError(f"paths.{key} must be set.")
        optional = [
            "backgrounds_dir",
            "semantic_maps_dir",
            "palette_path",
            "policy_path",
            "appearance_db",
            "font_dir",
            "transcripts_dataset",
        ]
        for key in optional:
            if self.paths[key] and not Path(self.paths[key]).exists():
                raise ConfigError(f"paths.{key} does not exist: {self.paths[key]}")
        if not self.paths.corpus_paths and not self.paths.transcripts_dataset:
            raise ConfigError("At least one corpus path or a transcripts dataset.")
        for p in self.paths.corpus_paths:
            if not Path(p).exists():
                raise ConfigError(f"Corpus path does not exist: {p}")

    @classmethod
    def from_ini(cls, ini_path: Union[str, Path]) -> "Config":
        """Load configuration from an INI file.

        Args:
            ini_path (str): Path to the INI file

        Returns:
            Config: New config instance with values from INI file
        """
        config = configparser.ConfigParser()
        config.optionxform = str
        config.read(ini_path, encoding="utf-8")

        instance = cls()
        values: Dict[str, Dict[str, Any]] = {}
        for section in config.sections():
            values[section] = {}
            for key, value in config[section].items():
                # Convert string values to appropriate types
                try:
                    typed_value = ast.literal_eval(value)
                except (ValueError, SyntaxError):
                    typed_value = value
                values[section][key] = typed_value
        instance.update(values)

        return instance

    def to_ini(self, ini_path: Union[Path, str]) -> None:
        """Save current configuration to an INI file.

        Args:
            ini_path (str): Path where to save the INI file
        """
        config = configparser.ConfigParser()
        config.optionxform = str

        for key, section in self.sections.items():
            config[key] = {k: repr(v) for k, v in section.items()}

        with open(ini_path, "w", encoding="utf-8") as f:
            config.write(f)

    @classmethod
    def from_json(cls, json_path: Union[str, Path]) -> "Config":
        """Load configuration from a JSON file (nested by section or flat)."""
        try:
            with open(json_path, "r", encoding="utf-8") as f:
                values = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"Malformed config {json_path}: {e}") from e
        if not isinstance(values, dict):
            raise ConfigError(f"Config {json_path} must hold a JSON object.")
        instance = cls()
        instance.update(values)
        return instance

    def to_json(self, json_path: Union[str, Path]) -> None:
        with open(json_path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True, ensure_ascii=False)
            f.write("\n")

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "Config":
        """Dispatch on suffix: .ini or .json."""
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"Config file does not exist: {path}")
        if path.suffix.lower() == ".ini":
            return cls.from_ini(path)
        return cls.from_json(path)


class Constants:
    # Background descriptor parameterization; changing any value changes the
    # database version tag.
    hog_patch_size = 32
    hog_cell_size = 8
    hog_bins = 9
    hog_block_size = 2
    hog_eps = 1e-6
    hog_clip = 0.2
    database_version = "hog32-c8-o9-b2-l2hys/lab-otsu/v1"
