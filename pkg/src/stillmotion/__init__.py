"""stillmotion: labeled pseudo-motion clip datasets from static images.

A deterministic generator that pans crop windows across still images to
synthesize motion-classification clips, optionally freezing the area
outside a square window to one background frame (static masks).  Ships
with an independent block-matching oracle that checks the labels are
recoverable from the pixels, lossless dataset serialization, preview
rendering, and a TCP batch-streaming server for external trainers.
"""

from .compositor import (
    JitterDraw,
    MaskSpec,
    SequenceSample,
    SourceImage,
    apply_static_mask,
    color_jitter,
    extract_sequence,
    generate_batch,
    generate_sample,
    prepare_source,
    sample_mask_spec,
)
from .config import GenConfig, JitterConfig
from .dataset_io import (
    LoadedSample,
    SourceRef,
    enumerate_sources,
    read_dataset,
    read_manifest,
    render_preview,
    write_dataset,
)
from .errors import (
    ConfigError,
    DatasetError,
    IntegrityError,
    OracleError,
    ProtocolError,
    StillMotionError,
    TrajectoryError,
)
from .labels import LabelPool, MotionLabel, build_label_pool, per_axis_speed_count_to_K
from .oracle import (
    DisplacementEstimate,
    VerificationReport,
    classify_sample,
    estimate_displacement,
    verify_dataset,
)
from .pipeline import generate_dataset, regenerate_sample, run_benchmark
from .server import StreamServer, client_fetch, make_producer
from .trajectory import (
    TrajectoryPlan,
    interpolate_positions,
    motion_distance,
    plan_trajectory,
    sample_start,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DatasetError",
    "DisplacementEstimate",
    "GenConfig",
    "IntegrityError",
    "JitterConfig",
    "JitterDraw",
    "LabelPool",
    "LoadedSample",
    "MaskSpec",
    "MotionLabel",
    "OracleError",
    "ProtocolError",
    "SequenceSample",
    "SourceImage",
    "SourceRef",
    "StillMotionError",
    "StreamServer",
    "TrajectoryError",
    "TrajectoryPlan",
    "VerificationReport",
    "apply_static_mask",
    "build_label_pool",
    "classify_sample",
    "client_fetch",
    "color_jitter",
    "enumerate_sources",
    "estimate_displacement",
    "extract_sequence",
    "generate_batch",
    "generate_dataset",
    "generate_sample",
    "interpolate_positions",
    "make_producer",
    "motion_distance",
    "per_axis_speed_count_to_K",
    "plan_trajectory",
    "prepare_source",
    "read_dataset",
    "read_manifest",
    "regenerate_sample",
    "render_preview",
    "run_benchmark",
    "sample_mask_spec",
    "sample_start",
    "verify_dataset",
    "write_dataset",
]
