"""Dataset manifests: file listing, labels, and split assignments.

A manifest is a JSON file sitting next to the video containers.  Split
assignments partition the dataset; the ``train`` split may only contain
normal videos, which is enforced both when saving and when loading so a
hand-edited manifest cannot silently leak anomalies into training.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import DataError
from .video import RawVideo, read_video

MANIFEST_NAME = "manifest.json"
TRAIN_SPLIT = "train"


@dataclass
class ManifestEntry:
    path: str  # relative to the manifest directory
    identifier: str
    label: str
    split: str

    def to_dict(self) -> dict:
        return {"path": self.path, "identifier": self.identifier, "label": self.label, "split": self.split}


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry]
    seed: int | None = None
    preprocessing: dict = field(default_factory=dict)

    def validate(self) -> "DatasetManifest":
        seen = {}
        for e in self.entries:
            if e.identifier in seen and seen[e.identifier] != e.split:
                raise DataError(
                    f"identifier {e.identifier!r} appears in splits "
                    f"{seen[e.identifier]!r} and {e.split!r}"
                )
            seen.setdefault(e.identifier, e.split)
            if e.split == TRAIN_SPLIT and e.label != "normal":
                raise DataError(
                    f"anomalous video {e.identifier!r} (label {e.label!r}) assigned to the train split"
                )
        return self

    def splits(self) -> list[str]:
        return sorted({e.split for e in self.entries})

    def select(self, split: str) -> list[ManifestEntry]:
        out = [e for e in self.entries if e.split == split]
        if not out:
            raise DataError(f"split {split!r} is empty; available: {self.splits()}")
        return out

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "preprocessing": self.preprocessing,
            "entries": [e.to_dict() for e in self.entries],
        }

    def save(self, directory) -> Path:
        self.validate()
        path = Path(directory) / MANIFEST_NAME
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        return path

    @classmethod
    def load(cls, directory) -> "DatasetManifest":
        path = Path(directory) / MANIFEST_NAME
        if not path.is_file():
            raise DataError(f"no {MANIFEST_NAME} in {directory}")
        try:
            raw = json.loads(path.read_text())
            entries = [ManifestEntry(**e) for e in raw["entries"]]
            manifest = cls(entries=entries, seed=raw.get("seed"), preprocessing=raw.get("preprocessing", {}))
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise DataError(f"{path}: malformed manifest: {exc}") from exc
        return manifest.validate()


def load_dataset(directory, split: str) -> list[RawVideo]:
    """Load all videos of one split, in manifest order."""
    directory = Path(directory)
    manifest = DatasetManifest.load(directory)
    videos = []
    for entry in manifest.select(split):
        video_path = directory / entry.path
        if not video_path.is_file():
            raise DataError(f"manifest refers to missing file {video_path}")
        videos.append(read_video(video_path, identifier=entry.identifier, label=entry.label))
    return videos
