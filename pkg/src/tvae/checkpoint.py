"""Self-describing binary model checkpoints.

Layout: 8-byte magic ``TVAECKP1``, little-endian u32 header length, a
canonical JSON header (sorted keys, no whitespace), then the concatenated
float32 tensor payloads in header order.  The header records the format
version, the full model config, the training step counter, the empirical
temporal-parameter ranges, and a directory of tensor name/shape/offset
entries.  Because the header is canonical and the payloads are raw bytes,
save -> load -> save reproduces the file bit for bit.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .config import ModelConfig
from .errors import ConfigError, DataError
from .model.tvae import TrajectoryVae

CHECKPOINT_MAGIC = b"TVAECKP1"
FORMAT_VERSION = 1


@dataclass
class LoadedCheckpoint:
    model: TrajectoryVae
    step: int
    param_ranges: dict

    @property
    def config(self) -> ModelConfig:
        return self.model.config


def save_checkpoint(path, model: TrajectoryVae, step: int = 0) -> None:
    """Serialize model weights, config, step, and temporal ranges."""
    state = model.state_dict()
    directory = []
    payloads = []
    offset = 0
    for name in sorted(state):
        array = state[name].detach().cpu().to(torch.float32).numpy()
        data = np.ascontiguousarray(array).tobytes()
        directory.append({"name": name, "shape": list(array.shape), "offset": offset, "nbytes": len(data)})
        payloads.append(data)
        offset += len(data)
    header = {
        "format_version": FORMAT_VERSION,
        "config": model.config.to_dict(),
        "step": int(step),
        "param_ranges": model.param_ranges or {},
        "tensors": directory,
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for data in payloads:
            fh.write(data)


def load_checkpoint(path) -> LoadedCheckpoint:
    """Rebuild a model from a checkpoint file.

    The config is validated like any other, the weights are restored
    exactly (float32 round-trip is byte-preserving), and unknown format
    versions are refused.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"checkpoint {path} does not exist")
    raw = path.read_bytes()
    if len(raw) < 12 or raw[:8] != CHECKPOINT_MAGIC:
        raise DataError(f"{path}: not a checkpoint file")
    (header_len,) = struct.unpack_from("<I", raw, 8)
    body = 12 + header_len
    if len(raw) < body:
        raise DataError(f"{path}: truncated checkpoint header")
    try:
        header = json.loads(raw[12:body].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: malformed checkpoint header: {exc}") from exc
    version = header.get("format_version")
    if version != FORMAT_VERSION:
        raise ConfigError(f"{path}: unsupported checkpoint format version {version!r}")
    config = ModelConfig.from_dict(header["config"]).validate()
    model = TrajectoryVae(config)
    state = {}
    for entry in header["tensors"]:
        start = body + entry["offset"]
        end = start + entry["nbytes"]
        if end > len(raw):
            raise DataError(f"{path}: truncated tensor payload for {entry['name']!r}")
        array = np.frombuffer(raw, dtype="<f4", count=entry["nbytes"] // 4, offset=start)
        state[entry["name"]] = torch.from_numpy(array.reshape(entry["shape"]).copy())
    try:
        model.load_state_dict(state)
    except RuntimeError as exc:
        raise DataError(f"{path}: checkpoint tensors do not match the declared config: {exc}") from exc
    model.param_ranges = header.get("param_ranges") or {}
    model.eval()
    return LoadedCheckpoint(model=model, step=int(header.get("step", 0)), param_ranges=model.param_ranges)
