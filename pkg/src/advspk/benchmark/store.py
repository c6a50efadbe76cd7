"""Benchmark set, pair assignment, and the append-only annotation store.

Human judgments are audit data: records land in a line-delimited file where
each line carries a checksum of its payload, so a crash mid-write can only
ever lose the trailing partial line. Every index is derived from that file,
never authoritative.
"""

import csv
import hashlib
import json
import os
import time
from dataclasses import dataclass, asdict, field
from pathlib import Path
from typing import Dict, List, Optional

from ..errors import (DuplicateAnnotation, InvalidScore, NotAssigned,
                      SubsetExhausted)

TIME_LIMIT_S = 30.0
GRACE_S = 5.0
SUBSET_NAMES = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"


@dataclass
class AnnotationRecord:
    pair_id: str
    annotator_id: str
    score: int  # 1..5
    elapsed_s: float
    timestamp: float = 0.0

    def __post_init__(self):
        if self.timestamp == 0.0:
            self.timestamp = time.time()

    @property
    def borderline_used(self) -> bool:
        return self.score == 3

    @property
    def overrun(self) -> bool:
        return self.elapsed_s > TIME_LIMIT_S + GRACE_S


@dataclass
class BenchmarkPair:
    pair_id: str
    path_a: str
    path_b: str
    label: int  # hidden ground truth: 1 = same speaker
    subset: str


@dataclass
class BenchmarkSet:
    pairs: List[BenchmarkPair] = field(default_factory=list)

    @classmethod
    def from_trials(cls, trials, n_subsets: int = 4) -> "BenchmarkSet":
        """Split (label, path_a, path_b) trials into disjoint, exhaustive subsets."""
        pairs = []
        for idx, trial in enumerate(trials):
            subset = SUBSET_NAMES[idx % n_subsets]
            pairs.append(BenchmarkPair(
                pair_id=f"pair{idx:05d}", path_a=trial.path_a,
                path_b=trial.path_b, label=int(trial.label), subset=subset))
        return cls(pairs=pairs)

    @property
    def subsets(self) -> List[str]:
        return sorted({p.subset for p in self.pairs})

    def subset_pairs(self, subset: str) -> List[BenchmarkPair]:
        return [p for p in self.pairs if p.subset == subset]

    def by_id(self) -> Dict[str, BenchmarkPair]:
        return {p.pair_id: p for p in self.pairs}

    def save(self, path):
        Path(path).write_text(json.dumps({"pairs": [asdict(p) for p in self.pairs]},
                                         indent=2))

    @classmethod
    def load(cls, path) -> "BenchmarkSet":
        data = json.loads(Path(path).read_text())
        return cls(pairs=[BenchmarkPair(**p) for p in data["pairs"]])


def _checksum(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]


class RecordStore:
    """Append-only annotation log with per-record checksums.

    Also tracks subset claims (one annotator per subset) and skip events from
    timer expiry; skips are kept apart from scores and excluded from metrics.
    """

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.records_path = self.root / "records.jsonl"
        self.skips_path = self.root / "skips.jsonl"
        self.claims_path = self.root / "claims.json"

    # -- low-level append-only persistence -------------------------------

    def _append(self, path: Path, payload: dict):
        line = json.dumps({"payload": payload, "checksum": _checksum(payload)},
                          sort_keys=True)
        with open(path, "a", encoding="utf-8") as f:
            f.write(line + "\n")
            f.flush()
            os.fsync(f.fileno())

    @staticmethod
    def _load_lines(path: Path) -> List[dict]:
        if not path.exists():
            return []
        out = []
        with open(path, encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                try:
                    entry = json.loads(line)
                except json.JSONDecodeError:
                    continue  # truncated trailing write
                payload = entry.get("payload")
                if payload is None or entry.get("checksum") != _checksum(payload):
                    continue
                out.append(payload)
        return out

    # -- annotations ------------------------------------------------------

    def records(self) -> List[AnnotationRecord]:
        return [AnnotationRecord(**p) for p in self._load_lines(self.records_path)]

    def skips(self) -> List[dict]:
        return self._load_lines(self.skips_path)

    def record_index(self) -> Dict[tuple, AnnotationRecord]:
        return {(r.pair_id, r.annotator_id): r for r in self.records()}

    def record_annotation(self, rec: AnnotationRecord,
                          benchmark: Optional[BenchmarkSet] = None) -> AnnotationRecord:
        """Persist one judgment; idempotent on exact retries."""
        if rec.score not in (1, 2, 3, 4, 5):
            raise InvalidScore(f"score {rec.score} outside 1..5")
        if benchmark is not None:
            pair = benchmark.by_id().get(rec.pair_id)
            if pair is None:
                raise NotAssigned(f"unknown pair {rec.pair_id!r}")
            claimed = self.claims().get(rec.annotator_id)
            if claimed != pair.subset:
                raise NotAssigned(
                    f"pair {rec.pair_id!r} is not assigned to {rec.annotator_id!r}")

        existing = self.record_index().get((rec.pair_id, rec.annotator_id))
        if existing is not None:
            same_payload = (existing.score == rec.score
                            and existing.elapsed_s == rec.elapsed_s)
            if same_payload:
                return existing  # retry: acknowledged without duplication
            raise DuplicateAnnotation(
                f"({rec.pair_id}, {rec.annotator_id}) already answered")

        self._append(self.records_path, asdict(rec))
        return rec

    def record_skip(self, pair_id: str, annotator_id: str, reason: str = "timeout"):
        key_seen = any(s["pair_id"] == pair_id and s["annotator_id"] == annotator_id
                       for s in self.skips())
        if not key_seen:
            self._append(self.skips_path, {
                "pair_id": pair_id, "annotator_id": annotator_id,
                "reason": reason, "timestamp": time.time()})

    # -- subset claims ----------------------------------------------------

    def claims(self) -> Dict[str, str]:
        if not self.claims_path.exists():
            return {}
        return json.loads(self.claims_path.read_text())

    def _write_claims(self, claims: Dict[str, str]):
        tmp = self.claims_path.with_suffix(".tmp")
        tmp.write_text(json.dumps(claims, indent=2))
        os.replace(tmp, self.claims_path)

    def claim_subset(self, benchmark: BenchmarkSet, annotator_id: str) -> str:
        """Sticky subset assignment: one annotator per subset pass."""
        claims = self.claims()
        if annotator_id in claims:
            return claims[annotator_id]
        taken = set(claims.values())
        for subset in benchmark.subsets:
            if subset not in taken:
                claims[annotator_id] = subset
                self._write_claims(claims)
                return subset
        raise SubsetExhausted("every subset is already claimed")

    # -- queues and progress ----------------------------------------------

    def assign_pairs(self, benchmark: BenchmarkSet, annotator_id: str) -> List[BenchmarkPair]:
        """Ordered queue of this annotator's unanswered, unskipped pairs."""
        subset = self.claim_subset(benchmark, annotator_id)
        done = {key[0] for key in self.record_index()
                if key[1] == annotator_id}
        done |= {s["pair_id"] for s in self.skips()
                 if s["annotator_id"] == annotator_id}
        queue = [p for p in benchmark.subset_pairs(subset) if p.pair_id not in done]
        if not queue:
            raise SubsetExhausted(f"subset {subset} is complete for {annotator_id!r}")
        return queue

    def progress(self, benchmark: BenchmarkSet, annotator_id: str) -> dict:
        claims = self.claims()
        subset = claims.get(annotator_id)
        if subset is None:
            return {"subset": None, "completed": 0, "remaining": 0, "skipped": 0}
        total = len(benchmark.subset_pairs(subset))
        completed = sum(1 for key in self.record_index() if key[1] == annotator_id)
        skipped = sum(1 for s in self.skips() if s["annotator_id"] == annotator_id)
        return {"subset": subset, "completed": completed,
                "remaining": total - completed - skipped, "skipped": skipped}

    # -- export -----------------------------------------------------------

    def export_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(["pair_id", "annotator_id", "score", "elapsed_s",
                             "timestamp"])
            for r in self.records():
                writer.writerow([r.pair_id, r.annotator_id, r.score,
                                 r.elapsed_s, r.timestamp])
