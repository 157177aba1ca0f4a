# Copyright 2026 The SMLE Authors
# License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
"""Python access to the smle speech denoising core."""

from ._smle import (
    SAMPLE_RATE,
    SmleError,
    denoise,
    ideal_ratio_mask,
    interior_range,
    istft,
    load_wav,
    param_count,
    run_cli,
    save_wav,
    scaled_softmax,
    si_sdr,
    stft,
)

__all__ = [
    "SAMPLE_RATE",
    "SmleError",
    "denoise",
    "ideal_ratio_mask",
    "interior_range",
    "istft",
    "load_wav",
    "param_count",
    "run_cli",
    "save_wav",
    "scaled_softmax",
    "si_sdr",
    "stft",
]
