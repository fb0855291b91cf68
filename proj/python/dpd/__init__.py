"""Desk-scale discriminative prototype-guided diffusion dataset distillation."""

from ._dpd import (  # noqa: F401
    Clustering,
    Codec,
    EvalReport,
    ImageSample,
    NoiseSchedule,
    RunConfig,
    build_schedule,
    estimate_clean,
    forward_diffuse,
    generate_toy_dataset,
    kmeans,
    margin,
    run_pipeline,
    sampling_timesteps,
    select_prototypes,
    substream_seed,
)

__all__ = [
    "Clustering",
    "Codec",
    "EvalReport",
    "ImageSample",
    "NoiseSchedule",
    "RunConfig",
    "build_schedule",
    "estimate_clean",
    "forward_diffuse",
    "generate_toy_dataset",
    "kmeans",
    "margin",
    "run_pipeline",
    "sampling_timesteps",
    "select_prototypes",
    "substream_seed",
]
