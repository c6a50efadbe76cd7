"""Core value types for the audio front-end."""

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

DEFAULT_SAMPLE_RATE = 16000


class Regime(str, Enum):
    """Channel-simulation regimes applied during training."""

    NONE = "none"
    NOISE_ONLY = "noise_only"
    NOISE_OR_RIR = "noise_or_rir"
    NOISE_AND_RIR = "noise_and_rir"


class NoiseCategory(str, Enum):
    AMBIENT = "ambient"
    MUSIC = "music"
    BABBLE = "babble"


@dataclass
class Waveform:
    """Mono time-domain signal with its sample rate.

    Samples are dimensionless amplitudes, nominally in [-1, 1].
    """

    samples: np.ndarray
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1 or self.samples.size < 1:
            raise ValueError("waveform must be a non-empty 1-D array")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("waveform contains non-finite samples")

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate

    def __len__(self) -> int:
        return self.samples.size


@dataclass
class SegmentPair:
    """Two equal-length, non-overlapping crops of one source utterance."""

    utterance_id: str
    seg1: Waveform
    seg2: Waveform
    seg1_span: tuple  # (start, stop) sample indices in the source
    seg2_span: tuple

    def __post_init__(self):
        if len(self.seg1) != len(self.seg2):
            raise ValueError("segments must have identical duration")
        a, b = self.seg1_span, self.seg2_span
        if max(a[0], b[0]) < min(a[1], b[1]):
            raise ValueError("segment spans overlap")


@dataclass
class AugmentationSpec:
    """One sampled channel simulation.

    The noise crop and RIR are materialised at draw time so the same spec
    can be applied to two segments and produce the same channel (identical
    noise recording and filter, SNR calibrated per segment).
    """

    regime: Regime = Regime.NONE
    rir: Optional[np.ndarray] = None
    noise: Optional[Waveform] = None
    noise_category: Optional[NoiseCategory] = None
    snr_db: float = 0.0
    augment_both_segments: bool = True

    def __post_init__(self):
        if self.regime == Regime.NONE and (self.rir is not None or self.noise is not None):
            raise ValueError("regime 'none' must not carry a filter or noise")
        if not np.isfinite(self.snr_db):
            raise ValueError("snr_db must be finite")
        if self.rir is not None:
            self.rir = np.asarray(self.rir, dtype=np.float64)
            if self.rir.size == 0:
                raise ValueError("rir must be non-empty when present")


@dataclass
class FeatureMap:
    """T x M matrix of log-mel energies plus the framing that produced it."""

    frames: np.ndarray  # (T, M)
    frame_hop_s: float = 0.010
    window_s: float = 0.025

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 2 or self.frames.shape[0] < 1:
            raise ValueError("feature map must be (T, M) with T >= 1")
        if not np.all(np.isfinite(self.frames)):
            raise ValueError("feature map contains non-finite entries")

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def num_bins(self) -> int:
        return self.frames.shape[1]
