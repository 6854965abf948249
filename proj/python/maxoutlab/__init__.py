"""Maxout networks and dropout model-averaging laboratory."""

from ._core import (
    Model,
    exact_mask_average,
    gcn,
    kl_divergence,
    load_idx,
    matmul,
    pwl_sup_error,
    synth_digits,
    train_from_config,
)

__all__ = [
    "Model",
    "exact_mask_average",
    "gcn",
    "kl_divergence",
    "load_idx",
    "matmul",
    "pwl_sup_error",
    "synth_digits",
    "train_from_config",
]
