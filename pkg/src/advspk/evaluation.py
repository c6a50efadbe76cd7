"""Speaker-verification evaluation: trial scoring, EER, minDCF.

Each trial is scored by embedding 10 evenly spaced 4-second crops per
utterance (no augmentation) and averaging cosine similarity over all crop
pairs. Metrics sweep thresholds over the sorted score multiset; the EER is
linearly interpolated between adjacent operating points.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .audio import extract_logmel, instance_normalize, read_wav
from .audio.types import Waveform
from .encoder import Encoder
from .errors import AdvspkError, DegenerateLabels, UtteranceTooShort

EVAL_NUM_SEGMENTS = 10
EVAL_SEGMENT_S = 4.0


@dataclass
class TrialPair:
    label: int  # 1 = same speaker, 0 = different
    path_a: str
    path_b: str


@dataclass
class ScoreSet:
    trials: List[TrialPair]
    scores: np.ndarray

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if len(self.trials) != self.scores.size:
            raise ValueError("one score per trial required")
        if not np.all(np.isfinite(self.scores)):
            raise ValueError("scores must be finite")

    def split(self) -> Tuple[np.ndarray, np.ndarray]:
        labels = np.array([t.label for t in self.trials])
        return self.scores[labels == 1], self.scores[labels == 0]


@dataclass
class DCFParams:
    c_miss: float = 1.0
    c_fa: float = 1.0
    p_target: float = 0.05

    def __post_init__(self):
        if self.c_miss <= 0 or self.c_fa <= 0:
            raise ValueError("costs must be positive")
        if not 0.0 < self.p_target < 1.0:
            raise ValueError("p_target must lie in (0, 1)")


def eval_crops(utt: Waveform, n_segments: int = EVAL_NUM_SEGMENTS,
               eval_segment_s: float = EVAL_SEGMENT_S) -> List[Waveform]:
    """Deterministic evenly spaced crops; falls back to the full utterance
    when it is shorter than one crop."""
    seg_len = int(round(eval_segment_s * utt.sample_rate))
    window_len = int(round(0.025 * utt.sample_rate))
    if len(utt) < window_len:
        raise UtteranceTooShort(f"{len(utt)} samples cannot fill one analysis window")
    if len(utt) <= seg_len:
        return [utt]
    starts = np.round(np.linspace(0, len(utt) - seg_len, n_segments)).astype(int)
    return [Waveform(utt.samples[s:s + seg_len].copy(), utt.sample_rate)
            for s in starts]


def _crop_embeddings(utt: Waveform, encoder: Encoder, n_segments: int,
                     eval_segment_s: float) -> np.ndarray:
    crops = eval_crops(utt, n_segments, eval_segment_s)
    feats = np.stack([instance_normalize(extract_logmel(c)).frames for c in crops])
    emb = encoder.embed_batch(feats)
    norms = np.linalg.norm(emb, axis=1, keepdims=True)
    return emb / np.maximum(norms, 1e-12)


def score_trial(utt_a: Waveform, utt_b: Waveform, encoder: Encoder,
                n_segments: int = EVAL_NUM_SEGMENTS,
                eval_segment_s: float = EVAL_SEGMENT_S) -> float:
    """Mean cosine similarity over all crop-embedding pairs."""
    ea = _crop_embeddings(utt_a, encoder, n_segments, eval_segment_s)
    eb = _crop_embeddings(utt_b, encoder, n_segments, eval_segment_s)
    return float(np.mean(ea @ eb.T))


def _operating_points(same: np.ndarray, diff: np.ndarray):
    """FAR/FRR at every threshold in the sorted score multiset plus endpoints.

    Accept when score >= t: FAR(t) = fraction of different-trials at or above
    t, FRR(t) = fraction of same-trials below t.
    """
    same_sorted = np.sort(same)
    diff_sorted = np.sort(diff)
    thresholds = np.sort(np.concatenate([same, diff]))
    far = 1.0 - np.searchsorted(diff_sorted, thresholds, side="left") / diff.size
    frr = np.searchsorted(same_sorted, thresholds, side="left") / same.size

    # virtual endpoints guarantee a crossing: accept-all and reject-all
    lo = thresholds[0] - 1.0
    hi = thresholds[-1] + 1.0
    thresholds = np.concatenate([[lo], thresholds, [hi]])
    far = np.concatenate([[1.0], far, [0.0]])
    frr = np.concatenate([[0.0], frr, [1.0]])
    return thresholds, far, frr


def _check_labels(score_set: ScoreSet):
    same, diff = score_set.split()
    if same.size == 0 or diff.size == 0:
        raise DegenerateLabels("need at least one same and one different trial")
    return same, diff


def compute_eer(score_set: ScoreSet) -> Tuple[float, float]:
    """Equal error rate and the threshold at the interpolated crossing."""
    same, diff = _check_labels(score_set)
    thresholds, far, frr = _operating_points(same, diff)

    gap = far - frr  # starts at +1, ends at -1, non-increasing crossings swept
    k = int(np.argmax(gap <= 0))
    if gap[k] == 0.0:
        return float(far[k]), float(thresholds[k])
    # linear interpolation between the adjacent operating points
    d1, d2 = gap[k - 1], gap[k]
    s = d1 / (d1 - d2)
    eer = far[k - 1] + s * (far[k] - far[k - 1])
    threshold = thresholds[k - 1] + s * (thresholds[k] - thresholds[k - 1])
    return float(eer), float(threshold)


def compute_mindcf(score_set: ScoreSet, p: Optional[DCFParams] = None) -> float:
    """Normalized minimum detection cost over all thresholds."""
    p = p or DCFParams()
    same, diff = _check_labels(score_set)
    _, far, frr = _operating_points(same, diff)
    cost = p.c_miss * frr * p.p_target + p.c_fa * far * (1.0 - p.p_target)
    floor = min(p.c_miss * p.p_target, p.c_fa * (1.0 - p.p_target))
    return float(np.min(cost) / floor)


def load_trial_list(path) -> List[TrialPair]:
    """Lines of `<label 0|1> <path_a> <path_b>`."""
    trials = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            fields = line.split()
            if len(fields) != 3 or fields[0] not in ("0", "1"):
                raise AdvspkError(f"{path}:{lineno}: expected '<0|1> <path_a> <path_b>'")
            trials.append(TrialPair(int(fields[0]), fields[1], fields[2]))
    return trials


def write_score_file(path, score_set: ScoreSet):
    with open(path, "w", encoding="utf-8") as f:
        for trial, score in zip(score_set.trials, score_set.scores):
            f.write(f"{score:.6f} {trial.path_a} {trial.path_b}\n")


@dataclass
class EvalResult:
    eer: float
    eer_threshold: float
    mindcf: float
    score_set: ScoreSet


def evaluate(trials: Sequence[TrialPair], encoder: Encoder, audio_root=".",
             p: Optional[DCFParams] = None, score_file=None,
             n_segments: int = EVAL_NUM_SEGMENTS,
             eval_segment_s: float = EVAL_SEGMENT_S) -> EvalResult:
    """Score every trial and compute EER/minDCF.

    Missing audio files are collected and reported in one error before any
    scoring happens; per-utterance crop embeddings are cached since each
    utterance appears in many trials.
    """
    root = Path(audio_root)
    paths = sorted({t.path_a for t in trials} | {t.path_b for t in trials})
    missing = [p_ for p_ in paths if not (root / p_).exists()]
    if missing:
        raise AdvspkError("missing audio files:\n" + "\n".join(missing))

    cache: Dict[str, np.ndarray] = {}
    for rel in paths:
        cache[rel] = _crop_embeddings(read_wav(root / rel), encoder,
                                      n_segments, eval_segment_s)

    scores = np.array([float(np.mean(cache[t.path_a] @ cache[t.path_b].T))
                       for t in trials])
    score_set = ScoreSet(list(trials), scores)
    if score_file is not None:
        write_score_file(score_file, score_set)

    eer, threshold = compute_eer(score_set)
    mindcf = compute_mindcf(score_set, p)
    return EvalResult(eer=eer, eer_threshold=threshold, mindcf=mindcf,
                      score_set=score_set)
