"""Segment sampling: two non-overlapping crops per utterance."""

import math

import numpy as np

from ..errors import UtteranceTooShort
from .types import SegmentPair, Waveform


def sample_segments(utt: Waveform, segment_duration_s: float, rng: np.random.Generator,
                    utterance_id: str = "") -> SegmentPair:
    """Crop two equal-length, non-overlapping segments at uniform random positions.

    The placement is uniform over every valid non-overlapping pair of spans:
    an index into the triangle {(a, b): 0 <= a <= b <= slack} of earlier/later
    start offsets is drawn and decoded exactly, then a fair coin decides which
    crop becomes seg1.
    """
    seg_len = int(round(segment_duration_s * utt.sample_rate))
    n = len(utt)
    if n < 2 * seg_len:
        raise UtteranceTooShort(
            f"utterance {utterance_id!r}: {n} samples < 2 x {seg_len} required")

    slack = n - 2 * seg_len
    count = (slack + 1) * (slack + 2) // 2
    k = int(rng.integers(0, count))
    b = (math.isqrt(8 * k + 1) - 1) // 2
    a = k - b * (b + 1) // 2

    first = (a, a + seg_len)
    second = (b + seg_len, b + 2 * seg_len)
    if rng.random() < 0.5:
        first, second = second, first

    return SegmentPair(
        utterance_id=utterance_id,
        seg1=Waveform(utt.samples[first[0]:first[1]].copy(), utt.sample_rate),
        seg2=Waveform(utt.samples[second[0]:second[1]].copy(), utt.sample_rate),
        seg1_span=first,
        seg2_span=second,
    )
