"""Knee flexion keypoint regression from synthetic renders."""

from ._kneeflex import (
    Model,
    annotate,
    euclid_loss,
    flexion_angle,
    generate,
    generate_dataset,
)

__all__ = [
    "Model",
    "annotate",
    "euclid_loss",
    "flexion_angle",
    "generate",
    "generate_dataset",
]
