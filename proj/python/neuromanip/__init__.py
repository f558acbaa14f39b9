"""Python bindings for the neuromanip controller library."""

import json as _json

from . import _core

from ._core import (
    CHANNELS,
    FEATURES,
    SAMPLE_RATE_HZ,
    Config,
    Model,
    NeuromanipError,
    World,
    build_model,
    encode_rate_counts,
    extract_features,
    filter_magnitude_db,
    filter_signal,
    generate_dataset,
    gesture_names,
    load_config,
    load_model,
    load_world,
    study_stats,
    synth_emg,
)


def evaluate(config, world, model, sigma=None, n=None, restricted=True):
    """Evaluate on the test split and return the report as a dict."""
    return _json.loads(_core.evaluate_json(config, world, model, sigma=sigma, n=n, restricted=restricted))

__all__ = [
    "CHANNELS",
    "FEATURES",
    "SAMPLE_RATE_HZ",
    "Config",
    "Model",
    "NeuromanipError",
    "World",
    "build_model",
    "encode_rate_counts",
    "evaluate",
    "extract_features",
    "filter_magnitude_db",
    "filter_signal",
    "generate_dataset",
    "gesture_names",
    "load_config",
    "load_model",
    "load_world",
    "study_stats",
    "synth_emg",
]
