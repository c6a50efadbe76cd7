"""Synthetic desk-scale corpora.

Each pseudo-speaker is a fixed random spectral envelope (a cascade of
resonators) exciting white noise; utterances add slow amplitude modulation
and, optionally, a random per-utterance channel filter so recording
conditions are entangled with identity the way they are in found data.
Also generates matching noise/RIR banks and verification trial lists.
Everything is deterministic per seed.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
from scipy import signal

from .audio import write_wav
from .audio.types import DEFAULT_SAMPLE_RATE, Waveform


@dataclass
class SpeakerVoice:
    """A pseudo-speaker: an inventory of resonator configurations ("phones").

    Utterances are random phone sequences, so identity lives in the spectral
    dynamics (which band patterns alternate), which survives the per-bin
    instance normalisation applied by the feature front-end.
    """

    phones: list  # one second-order-section array per phone
    tilt: float   # spectral tilt pole in (0, 1)


_FORMANT_BANDS = [(250, 500), (500, 800), (800, 1200), (1200, 1700),
                  (1700, 2300), (2300, 3000), (3000, 3800), (3800, 4600)]


def _random_phone(rng: np.random.Generator, sample_rate: int) -> np.ndarray:
    # formants drawn from disjoint bands keep phones spectrally spread out
    n_formants = int(rng.integers(2, 5))
    bands = rng.choice(len(_FORMANT_BANDS), size=n_formants, replace=False)
    sections = []
    for band in bands:
        lo, hi = _FORMANT_BANDS[band]
        freq = rng.uniform(lo, hi)
        bw = rng.uniform(50.0, 150.0)
        r = np.exp(-np.pi * bw / sample_rate)
        theta = 2 * np.pi * freq / sample_rate
        # resonator poles at r * e^{+-i theta}
        sections.append([1.0, 0.0, 0.0, 1.0, -2 * r * np.cos(theta), r * r])
    return np.array(sections)


def _random_voice(rng: np.random.Generator, sample_rate: int) -> SpeakerVoice:
    n_phones = int(rng.integers(4, 7))
    phones = [_random_phone(rng, sample_rate) for _ in range(n_phones)]
    return SpeakerVoice(phones=phones, tilt=float(rng.uniform(0.80, 0.95)))


def _render_utterance(voice: SpeakerVoice, duration_s: float,
                      rng: np.random.Generator, sample_rate: int) -> np.ndarray:
    n = int(round(duration_s * sample_rate))
    x = np.zeros(n)
    fade = int(0.010 * sample_rate)
    pos = 0
    prev = -1
    while pos < n:
        phone = int(rng.integers(0, len(voice.phones)))
        if phone == prev:  # avoid immediate repeats so dynamics keep moving
            phone = (phone + 1) % len(voice.phones)
        prev = phone
        length = int(rng.uniform(0.08, 0.25) * sample_rate)
        length = min(length, n - pos + fade)
        seg = signal.sosfilt(voice.phones[phone], rng.standard_normal(length))
        seg = seg / (np.sqrt(np.mean(seg ** 2)) + 1e-12)
        ramp = np.ones(length)
        k = min(fade, length // 2)
        ramp[:k] = np.linspace(0.0, 1.0, k)
        ramp[-k:] = np.linspace(1.0, 0.0, k)
        end = min(pos + length, n)
        x[pos:end] += (seg * ramp)[:end - pos]
        pos += length - fade  # crossfaded overlap-add
    x = signal.lfilter([1.0], [1.0, -voice.tilt], x)  # gentle low-frequency tilt

    # slow energy contour so segments are not statistically identical
    t = np.arange(n) / sample_rate
    rate = rng.uniform(1.5, 5.0)
    phase = rng.uniform(0, 2 * np.pi)
    envelope = 0.6 + 0.4 * np.sin(2 * np.pi * rate * t + phase) ** 2
    x = x * envelope

    peak = np.max(np.abs(x))
    return 0.6 * x / peak if peak > 0 else x


def _random_channel_filter(rng: np.random.Generator, sample_rate: int):
    """Low-order coloration: random tilt plus one gentle peaking resonance."""
    tilt = rng.uniform(-0.4, 0.4)
    freq = rng.uniform(300.0, 6000.0)
    bw = rng.uniform(800.0, 2000.0)
    r = np.exp(-np.pi * bw / sample_rate)
    theta = 2 * np.pi * freq / sample_rate
    b = [1.0, tilt]
    a = [1.0, -2 * r * np.cos(theta), r * r]
    return b, a


def _apply_channel(x: np.ndarray, channel, rng: np.random.Generator) -> np.ndarray:
    b, a = channel
    y = signal.lfilter(b, a, x)
    peak = np.max(np.abs(y))
    return 0.6 * y / peak if peak > 0 else y


def make_synthetic_corpus(out_root, n_speakers: int, utts_per_speaker: int,
                          channel_coloration: bool, seed: int,
                          utt_duration_s: float = 4.0,
                          sample_rate: int = DEFAULT_SAMPLE_RATE) -> Path:
    """WAV tree + manifest of `n_speakers * utts_per_speaker` utterances.

    Returns the manifest path; utterance ids are `spk###-utt###` and audio
    lands under `speech/spk###/`.
    """
    if n_speakers < 2:
        raise ValueError("need at least 2 speakers")
    out_root = Path(out_root)
    rng = np.random.default_rng(seed)
    lines = []
    for s in range(n_speakers):
        voice = _random_voice(rng, sample_rate)
        for u in range(utts_per_speaker):
            x = _render_utterance(voice, utt_duration_s, rng, sample_rate)
            if channel_coloration:
                x = _apply_channel(x, _random_channel_filter(rng, sample_rate), rng)
            rel = f"speech/spk{s:03d}/utt{u:03d}.wav"
            write_wav(out_root / rel, Waveform(x, sample_rate))
            lines.append(f"spk{s:03d}-utt{u:03d} {rel}")
    manifest = out_root / "train_manifest.txt"
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return manifest


def make_noise_corpus(out_root, seed: int, clips_per_category: int = 6,
                      clip_duration_s: float = 3.0,
                      sample_rate: int = DEFAULT_SAMPLE_RATE) -> Path:
    """Synthetic stand-in for a real noise corpus, one WAV per clip.

    ambient: colored noise; music: harmonic stacks with vibrato; babble:
    speech-like resonator noise (the sampler sums several of these).
    """
    out_root = Path(out_root)
    rng = np.random.default_rng(seed)
    n = int(round(clip_duration_s * sample_rate))
    t = np.arange(n) / sample_rate
    lines = []

    for i in range(clips_per_category):
        cutoff = rng.uniform(0.05, 0.45)
        b, a = signal.butter(2, cutoff)
        x = signal.lfilter(b, a, rng.standard_normal(n))
        x = 0.5 * x / np.max(np.abs(x))
        rel = f"noise/ambient/clip{i:02d}.wav"
        write_wav(out_root / rel, Waveform(x, sample_rate))
        lines.append(f"{rel} ambient")

    for i in range(clips_per_category):
        f0 = rng.uniform(110.0, 440.0)
        vibrato = rng.uniform(3.0, 7.0)
        x = np.zeros(n)
        for h in range(1, 6):
            x += np.sin(2 * np.pi * h * f0 * t
                        + 0.8 * np.sin(2 * np.pi * vibrato * t)) / h
        x = 0.5 * x / np.max(np.abs(x))
        rel = f"noise/music/clip{i:02d}.wav"
        write_wav(out_root / rel, Waveform(x, sample_rate))
        lines.append(f"{rel} music")

    for i in range(clips_per_category):
        voice = _random_voice(rng, sample_rate)
        x = _render_utterance(voice, clip_duration_s, rng, sample_rate)
        rel = f"noise/babble/clip{i:02d}.wav"
        write_wav(out_root / rel, Waveform(x, sample_rate))
        lines.append(f"{rel} babble")

    manifest = out_root / "noise_manifest.txt"
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return manifest


def make_rir_set(out_root, seed: int, n_filters: int = 20,
                 sample_rate: int = DEFAULT_SAMPLE_RATE) -> Path:
    """Exponentially decaying random reflections after a direct-path tap."""
    out_root = Path(out_root)
    rng = np.random.default_rng(seed)
    lines = []
    for i in range(n_filters):
        length = int(rng.uniform(0.1, 0.3) * sample_rate)
        tau = rng.uniform(0.01, 0.06) * sample_rate
        h = rng.standard_normal(length) * np.exp(-np.arange(length) / tau)
        h *= rng.uniform(0.3, 0.7) / np.max(np.abs(h[1:]))
        h[0] = 1.0  # direct path dominates
        rel = f"rir/rir{i:03d}.wav"
        write_wav(out_root / rel, Waveform(h * 0.5, sample_rate), dtype="float32")
        lines.append(rel)
    manifest = out_root / "rir_manifest.txt"
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return manifest


def speaker_of(utterance_id: str) -> str:
    return utterance_id.split("-")[0]


def make_trial_list(manifest_entries: List[Tuple[str, str]], out_path,
                    n_trials: int, seed: int) -> Path:
    """Balanced same/different trial list over the given utterances."""
    rng = np.random.default_rng(seed)
    by_speaker = {}
    for utt_id, rel in manifest_entries:
        by_speaker.setdefault(speaker_of(utt_id), []).append(rel)
    speakers = sorted(by_speaker)
    if len(speakers) < 2 or any(len(v) < 2 for v in by_speaker.values()):
        raise ValueError("need >= 2 speakers with >= 2 utterances each")

    lines = []
    for k in range(n_trials):
        if k % 2 == 0:
            spk = speakers[int(rng.integers(0, len(speakers)))]
            a, b = rng.choice(len(by_speaker[spk]), size=2, replace=False)
            lines.append(f"1 {by_speaker[spk][a]} {by_speaker[spk][b]}")
        else:
            i, j = rng.choice(len(speakers), size=2, replace=False)
            a = by_speaker[speakers[i]][int(rng.integers(0, len(by_speaker[speakers[i]])))]
            b = by_speaker[speakers[j]][int(rng.integers(0, len(by_speaker[speakers[j]])))]
            lines.append(f"0 {a} {b}")
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return out_path


def long_term_spectrum(samples: np.ndarray, sample_rate: int,
                       nfft: int = 1024) -> np.ndarray:
    freqs, psd = signal.welch(samples, fs=sample_rate, nperseg=nfft)
    return np.log(psd + 1e-12)
