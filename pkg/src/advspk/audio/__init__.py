from .types import (DEFAULT_SAMPLE_RATE, AugmentationSpec, FeatureMap,
                    NoiseCategory, Regime, SegmentPair, Waveform)
from .segments import sample_segments
from .augment import (SNR_RANGES_DB, AugmentationSampler, augment,
                      convolve_rir, mix_noise_at_snr)
from .features import (extract_logmel, instance_normalize, mel_filterbank,
                       mel_center_frequencies, NUM_MELS)
from .io import (load_noise_bank, load_rir_bank, read_noise_manifest,
                 read_rir_manifest, read_train_manifest, read_wav, write_wav)

__all__ = [
    "DEFAULT_SAMPLE_RATE", "AugmentationSpec", "FeatureMap", "NoiseCategory",
    "Regime", "SegmentPair", "Waveform", "sample_segments", "SNR_RANGES_DB",
    "AugmentationSampler", "augment", "convolve_rir", "mix_noise_at_snr",
    "extract_logmel", "instance_normalize", "mel_filterbank",
    "mel_center_frequencies", "NUM_MELS", "load_noise_bank", "load_rir_bank",
    "read_noise_manifest", "read_rir_manifest", "read_train_manifest",
    "read_wav", "write_wav",
]
