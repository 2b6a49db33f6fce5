"""Dynamic range compression vs. genre classification.

Thin Python layer over the C++ core. Arrays are float64 numpy arrays of mono
samples in [-1, 1].
"""

import json

from ._core import (
    CompressorSettings,
    OvoModel,
    WavError,
    base_settings,
    chroma,
    compress,
    db_from_linear,
    estimate_tempo,
    extract_features,
    feature_names,
    genre_names,
    grid,
    hz_to_mel,
    linear_from_db,
    mel_to_hz,
    mfcc,
    read_wav,
    smooth_gain,
    solve_dual,
    split,
    static_gain_hard_knee,
    static_gain_soft_knee,
    synth_clip,
    tonal_centroid,
    write_wav,
    zero_crossing_rate,
)
from . import _core

__version__ = "0.1.0"


def sweep_synthetic(**kwargs):
    """Run the sweep on an in-memory synthetic dataset; returns the report as a dict."""
    return json.loads(_core.sweep_synthetic_json(**kwargs))


def sweep_dataset(root, **kwargs):
    """Run the sweep on ``root/<genre>/*.wav``; returns the report as a dict."""
    return json.loads(_core.sweep_dataset_json(str(root), **kwargs))
