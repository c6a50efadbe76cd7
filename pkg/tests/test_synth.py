import hashlib
from pathlib import Path

import numpy as np
import pytest

from advspk.audio.io import (read_noise_manifest, read_rir_manifest,
                             read_train_manifest, read_wav)
from advspk.synth import (long_term_spectrum, make_noise_corpus, make_rir_set,
                          make_synthetic_corpus, make_trial_list, speaker_of)


def _tree_digest(root: Path) -> str:
    h = hashlib.sha256()
    for path in sorted(root.rglob("*")):
        if path.is_file():
            h.update(str(path.relative_to(root)).encode())
            h.update(path.read_bytes())
    return h.hexdigest()


def test_corpus_counts_and_manifest(tmp_path):
    manifest = make_synthetic_corpus(tmp_path, n_speakers=4, utts_per_speaker=3,
                                     channel_coloration=False, seed=0,
                                     utt_duration_s=1.0)
    entries = read_train_manifest(manifest)
    assert len(entries) == 12
    wavs = list((tmp_path / "speech").rglob("*.wav"))
    assert len(wavs) == 12
    for utt_id, rel in entries:
        assert (tmp_path / rel).exists()
        assert speaker_of(utt_id).startswith("spk")


def test_same_seed_gives_byte_identical_trees(tmp_path):
    digests = []
    for name in ("one", "two"):
        root = tmp_path / name
        make_synthetic_corpus(root, n_speakers=3, utts_per_speaker=2,
                              channel_coloration=True, seed=7,
                              utt_duration_s=1.0)
        digests.append(_tree_digest(root))
    assert digests[0] == digests[1]

    other = tmp_path / "other"
    make_synthetic_corpus(other, n_speakers=3, utts_per_speaker=2,
                          channel_coloration=True, seed=8, utt_duration_s=1.0)
    assert _tree_digest(other) != digests[0]


def test_speakers_have_distinct_long_term_spectra(tmp_path):
    manifest = make_synthetic_corpus(tmp_path, n_speakers=3, utts_per_speaker=2,
                                     channel_coloration=False, seed=1,
                                     utt_duration_s=2.0)
    entries = read_train_manifest(manifest)
    spectra = {}
    for utt_id, rel in entries:
        wav = read_wav(tmp_path / rel)
        spectra.setdefault(speaker_of(utt_id), []).append(
            long_term_spectrum(wav.samples, wav.sample_rate))
    means = {spk: np.mean(np.stack(s), axis=0) for spk, s in spectra.items()}
    speakers = sorted(means)
    for i in range(len(speakers)):
        for j in range(i + 1, len(speakers)):
            dist = np.mean(np.abs(means[speakers[i]] - means[speakers[j]]))
            assert dist > 0.5  # log-spectral floor between distinct voices


def test_channel_coloration_changes_audio(tmp_path):
    kwargs = dict(n_speakers=2, utts_per_speaker=1, seed=3, utt_duration_s=1.0)
    make_synthetic_corpus(tmp_path / "clean", channel_coloration=False, **kwargs)
    make_synthetic_corpus(tmp_path / "colored", channel_coloration=True, **kwargs)
    a = read_wav(tmp_path / "clean/speech/spk000/utt000.wav")
    b = read_wav(tmp_path / "colored/speech/spk000/utt000.wav")
    assert not np.array_equal(a.samples, b.samples)


def test_noise_corpus_categories(tmp_path):
    manifest = make_noise_corpus(tmp_path, seed=4, clips_per_category=2,
                                 clip_duration_s=0.5)
    entries = read_noise_manifest(manifest)
    assert len(entries) == 6
    categories = {c.value for _, c in entries}
    assert categories == {"ambient", "music", "babble"}
    for rel, _ in entries:
        wav = read_wav(tmp_path / rel)
        assert np.max(np.abs(wav.samples)) > 0.01


def test_rir_set_loadable_and_direct_path_dominant(tmp_path):
    manifest = make_rir_set(tmp_path, seed=5, n_filters=3)
    rels = read_rir_manifest(manifest)
    assert len(rels) == 3
    for rel in rels:
        h = read_wav(tmp_path / rel).samples
        assert np.argmax(np.abs(h)) == 0


def test_trial_list_is_balanced_and_resolvable(tmp_path):
    manifest = make_synthetic_corpus(tmp_path, n_speakers=3, utts_per_speaker=3,
                                     channel_coloration=False, seed=6,
                                     utt_duration_s=1.0)
    entries = read_train_manifest(manifest)
    path = make_trial_list(entries, tmp_path / "trials.txt", n_trials=20, seed=7)
    lines = path.read_text().splitlines()
    assert len(lines) == 20
    labels = [int(l.split()[0]) for l in lines]
    assert labels.count(1) == 10 and labels.count(0) == 10
    for line in lines:
        label, a, b = line.split()
        assert (tmp_path / a).exists() and (tmp_path / b).exists()
        same = speaker_of_path(a) == speaker_of_path(b)
        assert same == (label == "1")


def speaker_of_path(rel: str) -> str:
    return Path(rel).parent.name


def test_too_small_corpus_rejected(tmp_path):
    with pytest.raises(ValueError):
        make_synthetic_corpus(tmp_path, n_speakers=1, utts_per_speaker=3,
                              channel_coloration=False, seed=0)
    with pytest.raises(ValueError):
        make_trial_list([("spk000-utt000", "x.wav")], tmp_path / "t.txt", 4, 0)
