"""Channel simulation: RIR convolution, SNR-calibrated noise mixing, regimes."""

from typing import Optional

import numpy as np
from scipy import signal

from ..errors import InvalidFilter, SilentInput
from .types import AugmentationSpec, NoiseCategory, Regime, Waveform

# SNR ranges per noise category, in dB, drawn uniformly (x-vector recipe).
SNR_RANGES_DB = {
    NoiseCategory.AMBIENT: (0.0, 15.0),
    NoiseCategory.MUSIC: (5.0, 15.0),
    NoiseCategory.BABBLE: (13.0, 20.0),
}
BABBLE_SOURCES = (3, 7)  # babble sums this many speech recordings (inclusive)


def convolve_rir(seg: Waveform, rir: np.ndarray) -> Waveform:
    """Convolve a segment with a room impulse response.

    The filter is aligned so its maximum-magnitude tap lands at lag zero,
    the wet signal is truncated to the input length, and the result is
    peak-normalised to the dry signal's peak amplitude.
    """
    rir = np.asarray(rir, dtype=np.float64)
    if rir.size == 0 or not np.all(np.isfinite(rir)):
        raise InvalidFilter("rir must be non-empty and finite")

    peak_tap = int(np.argmax(np.abs(rir)))
    wet = signal.convolve(seg.samples, rir, mode="full")
    wet = wet[peak_tap:peak_tap + len(seg)]

    wet_peak = np.max(np.abs(wet))
    dry_peak = np.max(np.abs(seg.samples))
    if wet_peak > 0:
        wet = wet * (dry_peak / wet_peak)
    return Waveform(wet, seg.sample_rate)


def mix_noise_at_snr(seg: Waveform, noise: Waveform, snr_db: float) -> Waveform:
    """Add a noise recording scaled so the mixture hits the requested SNR.

    The gain is alpha = sqrt(P_seg / (P_noise * 10^(snr/10))) with P the mean
    squared amplitude; noise shorter than the segment is tiled, longer noise
    is truncated from the start (random cropping is the sampler's job).
    """
    p_seg = float(np.mean(seg.samples ** 2))
    noise_samples = noise.samples
    if noise_samples.size < len(seg):
        reps = -(-len(seg) // noise_samples.size)
        noise_samples = np.tile(noise_samples, reps)
    noise_samples = noise_samples[:len(seg)]
    p_noise = float(np.mean(noise_samples ** 2))

    if p_seg == 0.0 or p_noise == 0.0:
        raise SilentInput("segment and noise must both have non-zero power")

    alpha = np.sqrt(p_seg / (p_noise * 10.0 ** (snr_db / 10.0)))
    return Waveform(seg.samples + alpha * noise_samples, seg.sample_rate)


def augment(seg: Waveform, spec: AugmentationSpec,
            rng: Optional[np.random.Generator] = None) -> Waveform:
    """Apply one materialised channel simulation to a segment.

    All randomness (which branch of noise_or_rir, which noise crop, the SNR)
    is resolved when the spec is drawn, so applying the same spec to two
    segments simulates the same channel. Reverberation is applied before
    noise, matching additive noise at the microphone.
    """
    if spec.regime == Regime.NONE:
        return seg
    out = seg
    if spec.rir is not None:
        out = convolve_rir(out, spec.rir)
    if spec.noise is not None:
        out = mix_noise_at_snr(out, spec.noise, spec.snr_db)
    return out


class AugmentationSampler:
    """Draws materialised AugmentationSpecs from noise and RIR corpora.

    `noise_bank` maps NoiseCategory to a list of loader callables returning
    Waveforms; `rir_bank` is a list of callables returning filter arrays.
    Loaders keep corpus I/O out of this class and make it easy to feed
    synthetic banks in tests.
    """

    def __init__(self, noise_bank=None, rir_bank=None):
        self.noise_bank = noise_bank or {}
        self.rir_bank = rir_bank or []

    def draw(self, regime: Regime, segment_len: int, rng: np.random.Generator,
             augment_both_segments: bool = True) -> AugmentationSpec:
        regime = Regime(regime)
        if regime == Regime.NONE:
            return AugmentationSpec(regime=regime,
                                    augment_both_segments=augment_both_segments)

        want_noise = regime in (Regime.NOISE_ONLY, Regime.NOISE_AND_RIR)
        want_rir = regime == Regime.NOISE_AND_RIR
        if regime == Regime.NOISE_OR_RIR:
            # the branch is part of the channel draw, fixed for both segments
            if rng.random() < 0.5:
                want_noise = True
            else:
                want_rir = True

        rir = self._draw_rir(rng) if want_rir else None
        if want_noise:
            noise, category, snr_db = self._draw_noise(segment_len, rng)
        else:
            noise, category, snr_db = None, None, 0.0

        return AugmentationSpec(
            regime=regime,
            rir=rir,
            noise=noise,
            noise_category=category,
            snr_db=snr_db,
            augment_both_segments=augment_both_segments,
        )

    def _draw_rir(self, rng: np.random.Generator) -> np.ndarray:
        if not self.rir_bank:
            raise InvalidFilter("no RIR filters available for this regime")
        loader = self.rir_bank[int(rng.integers(0, len(self.rir_bank)))]
        return np.asarray(loader(), dtype=np.float64)

    def _draw_noise(self, segment_len: int, rng: np.random.Generator):
        categories = [c for c in NoiseCategory if self.noise_bank.get(c)]
        if not categories:
            raise SilentInput("no noise recordings available for this regime")
        category = categories[int(rng.integers(0, len(categories)))]
        lo, hi = SNR_RANGES_DB[category]
        snr_db = float(rng.uniform(lo, hi))

        if category == NoiseCategory.BABBLE:
            n_sources = int(rng.integers(BABBLE_SOURCES[0], BABBLE_SOURCES[1] + 1))
            mix = np.zeros(segment_len, dtype=np.float64)
            sr = None
            for _ in range(n_sources):
                wav = self._load_from(category, rng)
                sr = wav.sample_rate
                mix += self._fit_length(wav.samples, segment_len, rng)
            noise = Waveform(mix, sr)
        else:
            wav = self._load_from(category, rng)
            noise = Waveform(self._fit_length(wav.samples, segment_len, rng),
                             wav.sample_rate)
        return noise, category, snr_db

    def _load_from(self, category: NoiseCategory, rng: np.random.Generator) -> Waveform:
        bank = self.noise_bank[category]
        return bank[int(rng.integers(0, len(bank)))]()

    @staticmethod
    def _fit_length(samples: np.ndarray, segment_len: int,
                    rng: np.random.Generator) -> np.ndarray:
        """Tile short noise; randomly crop long noise."""
        if samples.size < segment_len:
            reps = -(-segment_len // samples.size)
            samples = np.tile(samples, reps)
        if samples.size > segment_len:
            start = int(rng.integers(0, samples.size - segment_len + 1))
            samples = samples[start:start + segment_len]
        return samples.copy()
