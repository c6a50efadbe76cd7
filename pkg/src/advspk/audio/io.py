"""WAV and corpus-manifest I/O.

Audio is mono PCM WAV (16-bit or float) at 16 kHz; other sample rates are
rejected rather than resampled. Manifests are UTF-8 text, one entry per line:

    training utterances:  <utterance_id> <relative_path>
    noise corpus:         <relative_path> <category>
    RIR filters:          <relative_path>
"""

import os
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np
from scipy.io import wavfile

from ..errors import AdvspkError
from .types import DEFAULT_SAMPLE_RATE, NoiseCategory, Waveform


def read_wav(path, expected_rate: int = DEFAULT_SAMPLE_RATE) -> Waveform:
    rate, data = wavfile.read(os.fspath(path))
    if rate != expected_rate:
        raise AdvspkError(f"{path}: sample rate {rate} != {expected_rate} (no resampling)")
    if data.ndim != 1:
        raise AdvspkError(f"{path}: expected mono audio, got shape {data.shape}")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise AdvspkError(f"{path}: unsupported sample format {data.dtype}")
    return Waveform(samples, rate)


def write_wav(path, wav: Waveform, dtype: str = "int16") -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if dtype == "int16":
        clipped = np.clip(wav.samples, -1.0, 1.0)
        data = (clipped * 32767.0).round().astype(np.int16)
    elif dtype == "float32":
        data = wav.samples.astype(np.float32)
    else:
        raise ValueError(f"unsupported dtype {dtype!r}")
    wavfile.write(os.fspath(path), wav.sample_rate, data)


def _manifest_lines(path) -> List[List[str]]:
    rows = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            rows.append((lineno, line.split()))
    return rows


def read_train_manifest(path) -> List[Tuple[str, str]]:
    """[(utterance_id, relative_path), ...]"""
    entries = []
    for lineno, fields in _manifest_lines(path):
        if len(fields) != 2:
            raise AdvspkError(f"{path}:{lineno}: expected '<utterance_id> <path>'")
        entries.append((fields[0], fields[1]))
    return entries


def read_noise_manifest(path) -> List[Tuple[str, NoiseCategory]]:
    """[(relative_path, category), ...]"""
    entries = []
    for lineno, fields in _manifest_lines(path):
        if len(fields) != 2:
            raise AdvspkError(f"{path}:{lineno}: expected '<path> <category>'")
        try:
            category = NoiseCategory(fields[1])
        except ValueError as exc:
            raise AdvspkError(f"{path}:{lineno}: unknown noise category {fields[1]!r}") from exc
        entries.append((fields[0], category))
    return entries


def read_rir_manifest(path) -> List[str]:
    entries = []
    for lineno, fields in _manifest_lines(path):
        if len(fields) != 1:
            raise AdvspkError(f"{path}:{lineno}: expected a single '<path>' field")
        entries.append(fields[0])
    return entries


def load_noise_bank(manifest_path, root) -> Dict[NoiseCategory, list]:
    """Build the lazy noise bank the AugmentationSampler consumes."""
    root = Path(root)
    bank: Dict[NoiseCategory, list] = {}

    def loader(p):
        return lambda: read_wav(root / p)

    for rel, category in read_noise_manifest(manifest_path):
        bank.setdefault(category, []).append(loader(rel))
    return bank


def load_rir_bank(manifest_path, root) -> list:
    root = Path(root)

    def loader(p):
        return lambda: read_wav(root / p).samples

    return [loader(rel) for rel in read_rir_manifest(manifest_path)]
