import numpy as np
import pytest
import torch

torch.set_num_threads(1)


@pytest.fixture(scope="session")
def mini_setup():
    """A tiny trained model plus matching clips, shared by cheap tests.

    Six synthetic videos, preprocessed to the mini geometry, and a
    TVAE-S trained for 80 steps: enough structure for contract tests
    without noticeable runtime.
    """
    from tvae.config import ModelConfig, PreprocessParams
    from tvae.data import SyntheticSpec, extract_clip, generate_synthetic, preprocess
    from tvae.model import train

    config = ModelConfig.mini("tvae-s", steps=80, seed=11)
    spec = SyntheticSpec(count=6, num_frames=75)
    videos = generate_synthetic(spec, np.random.default_rng(1234))
    params = PreprocessParams(target_size=config.height)
    preprocessed = [preprocess(v, params) for v in videos]
    model, info = train(preprocessed, config)
    clip_params = PreprocessParams(
        target_size=config.height, target_fps=config.fps, clip_frames=config.frames
    )
    clips = [extract_clip(v, 0, clip_params) for v in preprocessed]
    return {
        "config": config,
        "videos": preprocessed,
        "clips": clips,
        "model": model,
        "info": info,
        "clip_params": clip_params,
    }
