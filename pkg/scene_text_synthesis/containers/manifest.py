from typing import Any, Dict, List, Optional, Union
from dataclasses import dataclass, field
from pathlib import Path
import json
import logging

import pandas as pd

from scene_text_synthesis.config import Config

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


@dataclass
class ManifestEntry:
    """Ledger line of one written sample.

    Attributes:
        sample_id (int): Position of the sample in the run, from 0.
        attempt_index (int): Attempt counter the sample seed was derived from.
        background_id (str): Background image stem.
        seed (int): Unsigned 64-bit sample seed.
        image (str): Image file name, relative to the run directory.
        groundtruth (str): Ground-truth file name, relative to the run directory.
        instances (List[Dict[str, Any]]): Per-instance text, quad, color, font and
            appearance record.
        debug (Dict[str, str]): Debug outputs by kind, if written.
    """

    sample_id: int
    attempt_index: int
    background_id: str
    seed: int
    image: str
    groundtruth: str
    instances: List[Dict[str, Any]] = field(default_factory=list)
    debug: Dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "sample_id": self.sample_id,
            "attempt_index": self.attempt_index,
            "background_id": self.background_id,
            "seed": self.seed,
            "image": self.image,
            "groundtruth": self.groundtruth,
            "instances": self.instances,
            "debug": self.debug,
        }

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "ManifestEntry":
        return cls(
            sample_id=int(d["sample_id"]),
            attempt_index=int(d["attempt_index"]),
            background_id=str(d["background_id"]),
            seed=int(d["seed"]),
            image=str(d["image"]),
            groundtruth=str(d["groundtruth"]),
            instances=list(d.get("instances", [])),
            debug=dict(d.get("debug", {})),
        )

    def files(self) -> List[str]:
        return [self.image, self.groundtruth] + [
            self.debug[k] for k in sorted(self.debug)
        ]


class RunManifest:
    """Reproducibility ledger of a synthesis run.

    Serialized as canonical JSON (sorted keys, no timestamps) so identical runs
    write identical bytes.
    """

    def __init__(
        self,
        engine_version: str,
        config_hash: str,
        seed: int,
        requested: int,
        entries: Optional[List[ManifestEntry]] = None,
        config: Optional[Dict[str, Any]] = None,
        attempts: int = 0,
        root: Optional[Union[str, Path]] = None,
    ) -> None:
        self.engine_version = engine_version
        self.config_hash = config_hash
        self.seed = int(seed)
        self.requested = int(requested)
        self.entries = list(entries or [])
        self.config = config or {}
        self.attempts = int(attempts)
        self.root = Path(root) if root is not None else None

    def __len__(self) -> int:
        return len(self.entries)

    def entry(self, sample_id: int) -> ManifestEntry:
        for e in self.entries:
            if e.sample_id == int(sample_id):
                return e
        raise KeyError(f"No sample {sample_id} in manifest.")

    def files(self) -> List[str]:
        return [f for e in self.entries for f in e.files()]

    def to_config(self) -> Config:
        config = Config()
        config.update(self.config)
        return config

    def to_dict(self) -> Dict[str, Any]:
        return {
            "engine_version": self.engine_version,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "requested": self.requested,
            "attempts": self.attempts,
            "config": self.config,
            "samples": [e.to_dict() for e in self.entries],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, ensure_ascii=False)

    def to_json(self, path: Union[str, Path]) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(self.dumps())
            f.write("\n")

    @classmethod
    def from_json(cls, path: Union[str, Path]) -> "RunManifest":
        path = Path(path)
        with open(path, "r", encoding="utf-8") as f:
            d = json.load(f)
        return cls(
            engine_version=d["engine_version"],
            config_hash=d["config_hash"],
            seed=d["seed"],
            requested=d["requested"],
            entries=[ManifestEntry.from_dict(s) for s in d.get("samples", [])],
            config=d.get("config", {}),
            attempts=d.get("attempts", 0),
            root=path.parent,
        )

    def to_frame(self) -> pd.DataFrame:
        """One row per text instance."""
        rows = []
        for e in self.entries:
            for i, inst in enumerate(e.instances):
                row = {
                    "sample_id": e.sample_id,
                    "background_id": e.background_id,
                    "seed": e.seed,
                    "image": e.image,
                    "instance": i,
                    "text": inst["text"],
                    "font": inst["font"],
                    "record_source_id": inst["record_source_id"],
                    "L": inst["color"][0],
                    "a": inst["color"][1],
                    "b": inst["color"][2],
                    "theta": inst["placement"]["theta"],
                }
                for j, (x, y) in enumerate(inst["quad"], start=1):
                    row[f"x{j}"] = x
                    row[f"y{j}"] = y
                rows.append(row)
        return pd.DataFrame(rows)
