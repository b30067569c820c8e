"""Video containers, preprocessing, dataset manifests, and synthesis."""

from .video import (
    EchoClip,
    RawVideo,
    import_pgm_dir,
    read_float_stack,
    read_video,
    write_float_stack,
    write_video,
)
from .manifest import DatasetManifest, ManifestEntry, load_dataset
from .preprocess import (
    augment,
    clip_frame_indices,
    extract_clip,
    extract_mask_clip,
    frame_stride,
    preprocess,
)
from .synthetic import SyntheticSpec, build_dataset, generate_synthetic

__all__ = [
    "EchoClip",
    "RawVideo",
    "import_pgm_dir",
    "read_float_stack",
    "read_video",
    "write_float_stack",
    "write_video",
    "DatasetManifest",
    "ManifestEntry",
    "load_dataset",
    "augment",
    "clip_frame_indices",
    "extract_clip",
    "extract_mask_clip",
    "frame_stride",
    "preprocess",
    "SyntheticSpec",
    "build_dataset",
    "generate_synthetic",
]
