import json
import struct

import numpy as np
import pytest
import torch

from tvae.checkpoint import CHECKPOINT_MAGIC, load_checkpoint, save_checkpoint
from tvae.config import ModelConfig
from tvae.errors import ConfigError, DataError
from tvae.model.tvae import TrajectoryVae


@pytest.fixture()
def model():
    torch.manual_seed(7)
    m = TrajectoryVae(ModelConfig.mini("tvae-s", seed=7))
    m.param_ranges = {"f": [0.8, 1.9], "omega": [0.1, 6.0], "v": [-0.2, 0.3]}
    return m


class TestRoundTrip:
    def test_weights_and_metadata_survive(self, model, tmp_path):
        path = tmp_path / "m.ckpt"
        save_checkpoint(path, model, step=42)
        loaded = load_checkpoint(path)
        assert loaded.step == 42
        assert loaded.param_ranges == model.param_ranges
        assert loaded.config.to_dict() == model.config.to_dict()
        for name, tensor in model.state_dict().items():
            assert torch.equal(loaded.model.state_dict()[name], tensor), name

    def test_save_load_save_is_bit_exact(self, model, tmp_path):
        path_a, path_b = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
        save_checkpoint(path_a, model, step=3)
        save_checkpoint(path_b, load_checkpoint(path_a).model, step=3)
        assert path_a.read_bytes() == path_b.read_bytes()

    def test_save_creates_missing_directories(self, model, tmp_path):
        path = tmp_path / "runs" / "deep" / "m.ckpt"
        save_checkpoint(path, model)
        assert load_checkpoint(path).step == 0

    def test_loaded_model_reproduces_outputs(self, model, tmp_path):
        x = torch.rand(1, 5, 16, 16, generator=torch.Generator().manual_seed(1))
        path = tmp_path / "m.ckpt"
        save_checkpoint(path, model, step=1)
        loaded = load_checkpoint(path).model
        model.eval()
        with torch.no_grad():
            a, _ = model.reconstruct_tensors(x)
            b, _ = loaded.reconstruct_tensors(x)
        assert torch.equal(a, b)


class TestRejection:
    def test_unknown_version(self, model, tmp_path):
        path = tmp_path / "m.ckpt"
        save_checkpoint(path, model)
        raw = bytearray(path.read_bytes())
        (length,) = struct.unpack_from("<I", raw, 8)
        header = json.loads(raw[12 : 12 + length].decode())
        header["format_version"] = 99
        blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
        patched = CHECKPOINT_MAGIC + struct.pack("<I", len(blob)) + blob + bytes(raw[12 + length :])
        path.write_bytes(patched)
        with pytest.raises(ConfigError):
            load_checkpoint(path)

    def test_wrong_magic_and_truncation(self, model, tmp_path):
        path = tmp_path / "m.ckpt"
        save_checkpoint(path, model)
        data = path.read_bytes()
        bad = tmp_path / "bad.ckpt"
        bad.write_bytes(b"NOTMAGIC" + data[8:])
        with pytest.raises(DataError):
            load_checkpoint(bad)
        short = tmp_path / "short.ckpt"
        short.write_bytes(data[:-64])
        with pytest.raises(DataError):
            load_checkpoint(short)
        with pytest.raises(DataError):
            load_checkpoint(tmp_path / "absent.ckpt")

    def test_tensor_config_mismatch(self, model, tmp_path):
        path = tmp_path / "m.ckpt"
        save_checkpoint(path, model)
        raw = bytearray(path.read_bytes())
        (length,) = struct.unpack_from("<I", raw, 8)
        header = json.loads(raw[12 : 12 + length].decode())
        header["config"]["latent_dim"] = 9  # declared config no longer matches tensors
        blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
        path.write_bytes(CHECKPOINT_MAGIC + struct.pack("<I", len(blob)) + blob + bytes(raw[12 + length :]))
        with pytest.raises(DataError):
            load_checkpoint(path)


class TestWarmStart:
    def test_warm_start_restores_weights(self, model, tmp_path, mini_setup):
        from tvae.model import train

        path = tmp_path / "m.ckpt"
        save_checkpoint(path, mini_setup["model"], step=80)
        cfg = ModelConfig.mini("tvae-s", steps=0, seed=99, warm_start=str(path))
        warm, _ = train(mini_setup["videos"], cfg)
        for name, tensor in mini_setup["model"].state_dict().items():
            assert torch.equal(warm.state_dict()[name], tensor), name

    def test_warm_start_architecture_mismatch(self, model, tmp_path, mini_setup):
        from tvae.model import train

        path = tmp_path / "m.ckpt"
        save_checkpoint(path, model)  # tvae-s mini
        cfg = ModelConfig.mini("tvae-c", steps=0, seed=1, warm_start=str(path))
        with pytest.raises(ConfigError):
            train(mini_setup["videos"], cfg)
