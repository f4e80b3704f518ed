"""Self-training (ST / ST++) for semi-supervised segmentation, as a Python module."""

import json

from ._core import (
    IGNORE,
    NUM_FEATURES,
    Error,
    Model,
    confusion_matrix,
    default_config,
    mean_iou,
    normalize_config,
    oversample_labeled,
    per_class_iou,
    poly_lr,
    rank_and_split,
    spearman,
    stability_score,
)
from ._core import generate_data as _generate_data
from ._core import run as _run

__all__ = [
    "IGNORE",
    "NUM_FEATURES",
    "Error",
    "Model",
    "confusion_matrix",
    "default_config",
    "generate_data",
    "mean_iou",
    "normalize_config",
    "oversample_labeled",
    "per_class_iou",
    "poly_lr",
    "rank_and_split",
    "run",
    "spearman",
    "stability_score",
]


def _as_json(config):
    if config is None:
        return "{}"
    if isinstance(config, str):
        return config
    return json.dumps(config)


def run(config=None, pipeline="stpp", ablation="", seed=1, output_dir=None):
    """Run one pipeline for one seed. `config` is a dict or JSON text; returns (Model, report dict)."""
    return _run(_as_json(config), pipeline, ablation, seed, output_dir)


def generate_data(config=None, seed=1):
    """Generated labeled / unlabeled / validation splits as numpy arrays."""
    return _generate_data(_as_json(config), seed)
