"""Log-mel feature extraction and per-utterance normalisation.

40 triangular mel filters spanning 20-7600 Hz over a 512-point FFT, 25 ms
Hamming window, 10 ms hop. Energies are floored at 1e-6 before the log so
silence stays finite.
"""

from functools import lru_cache

import numpy as np

from ..errors import SegmentTooShort
from .types import FeatureMap, Waveform

NUM_MELS = 40
WINDOW_S = 0.025
HOP_S = 0.010
FFT_SIZE = 512
FMIN_HZ = 20.0
FMAX_HZ = 7600.0
LOG_FLOOR = 1e-6


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@lru_cache(maxsize=4)
def mel_filterbank(sample_rate: int, n_mels: int = NUM_MELS, n_fft: int = FFT_SIZE,
                   fmin: float = FMIN_HZ, fmax: float = FMAX_HZ) -> np.ndarray:
    """Triangular mel filterbank, shape (n_mels, n_fft // 2 + 1)."""
    mel_points = np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2)
    hz_points = mel_to_hz(mel_points)
    fft_freqs = np.fft.rfftfreq(n_fft, d=1.0 / sample_rate)

    bank = np.zeros((n_mels, fft_freqs.size), dtype=np.float64)
    for m in range(n_mels):
        lo, center, hi = hz_points[m], hz_points[m + 1], hz_points[m + 2]
        rising = (fft_freqs - lo) / (center - lo)
        falling = (hi - fft_freqs) / (hi - center)
        bank[m] = np.clip(np.minimum(rising, falling), 0.0, None)
    return bank


def mel_center_frequencies(sample_rate: int, n_mels: int = NUM_MELS,
                           fmin: float = FMIN_HZ, fmax: float = FMAX_HZ) -> np.ndarray:
    mel_points = np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2)
    return mel_to_hz(mel_points)[1:-1]


def extract_logmel(seg: Waveform) -> FeatureMap:
    """Short-time log-mel energies: T = 1 + floor((L - window) / hop) frames."""
    window_len = int(round(WINDOW_S * seg.sample_rate))
    hop_len = int(round(HOP_S * seg.sample_rate))
    if len(seg) < window_len:
        raise SegmentTooShort(f"{len(seg)} samples < window of {window_len}")

    frames = np.lib.stride_tricks.sliding_window_view(seg.samples, window_len)[::hop_len]
    window = np.hamming(window_len)
    spectrum = np.fft.rfft(frames * window, n=FFT_SIZE, axis=1)
    power = np.abs(spectrum) ** 2
    energies = power @ mel_filterbank(seg.sample_rate).T
    logmel = np.log(np.maximum(energies, LOG_FLOOR))
    return FeatureMap(frames=logmel, frame_hop_s=HOP_S, window_s=WINDOW_S)


def instance_normalize(fm: FeatureMap) -> FeatureMap:
    """Standardise each mel bin over time to mean 0, variance 1 (biased).

    Bins with zero variance map to all-zeros.
    """
    if fm.num_frames < 2:
        raise ValueError("instance normalisation needs at least 2 frames")
    mean = fm.frames.mean(axis=0)
    std = fm.frames.std(axis=0)  # biased, matching variance over the utterance
    out = np.where(std > 0.0, (fm.frames - mean) / np.where(std > 0.0, std, 1.0), 0.0)
    return FeatureMap(frames=out, frame_hop_s=fm.frame_hop_s, window_s=fm.window_s)
