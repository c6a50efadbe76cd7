"""Experiment orchestration: config files, run matrix, aggregation, reports.

A run is one (condition, seed) training + evaluation; its directory is named
by a hash of the resolved condition and seed, so re-running a completed run
is a cache hit. Rows aggregate mean and standard deviation over repeats.
"""

import csv
import hashlib
import io
import json
from dataclasses import dataclass, asdict, field, fields
from pathlib import Path
from typing import List, Optional

import numpy as np
import yaml

from .audio import AugmentationSampler, Regime, load_noise_bank, load_rir_bank
from .audio.io import read_train_manifest
from .encoder import EncoderConfig
from .errors import AdvspkError
from .evaluation import DCFParams, evaluate, load_trial_list
from .losses import LossConfig
from .trainer import BatchConfig, Trainer, TrainSchedule


@dataclass
class CorpusPaths:
    audio_root: str = "."
    train_manifest: str = ""
    noise_manifest: Optional[str] = None
    rir_manifest: Optional[str] = None
    trial_list: str = ""


@dataclass
class EvalPolicy:
    n_segments: int = 10
    eval_segment_s: float = 4.0
    c_miss: float = 1.0
    c_fa: float = 1.0
    p_target: float = 0.05

    def dcf(self) -> DCFParams:
        return DCFParams(self.c_miss, self.c_fa, self.p_target)


@dataclass
class ExperimentConfig:
    corpus: CorpusPaths = field(default_factory=CorpusPaths)
    batch: BatchConfig = field(default_factory=BatchConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    schedule: TrainSchedule = field(default_factory=TrainSchedule)
    eval: EvalPolicy = field(default_factory=EvalPolicy)
    repeats: int = 3
    seed: int = 0
    sweep: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")


_SECTION_TYPES = {
    "corpus": CorpusPaths, "batch": BatchConfig, "loss": LossConfig,
    "encoder": EncoderConfig, "schedule": TrainSchedule, "eval": EvalPolicy,
}
_YAML_ALIASES = {"lambda": "lambda_"}  # yaml uses the bare word


def _build_section(cls, data: dict, path: str):
    known = {f.name for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        name = _YAML_ALIASES.get(key, key)
        if name not in known:
            raise AdvspkError(f"config: unknown key {path}.{key}")
        kwargs[name] = value
    return cls(**kwargs)


def load_config(path) -> ExperimentConfig:
    data = yaml.safe_load(Path(path).read_text()) or {}
    if not isinstance(data, dict):
        raise AdvspkError("config: top level must be a mapping")
    kwargs = {}
    for key, value in data.items():
        if key in _SECTION_TYPES:
            if not isinstance(value, dict):
                raise AdvspkError(f"config: section {key} must be a mapping")
            kwargs[key] = _build_section(_SECTION_TYPES[key], value, key)
        elif key in ("repeats", "seed", "sweep"):
            kwargs[key] = value
        else:
            raise AdvspkError(f"config: unknown section {key!r}")
    return ExperimentConfig(**kwargs)


def dump_config(cfg: ExperimentConfig, path):
    data = asdict(cfg)
    data["batch"]["regime"] = cfg.batch.regime.value
    data["loss"]["lambda"] = data["loss"].pop("lambda_")
    Path(path).write_text(yaml.safe_dump(data, sort_keys=False))


@dataclass
class Condition:
    """One cell of the experiment matrix."""

    speaker_loss: str
    regime: str
    augment_both_segments: bool
    lambda_: float
    aat_enabled: bool

    def label(self) -> str:
        loss = "AP" if self.speaker_loss == "angular_prototypical" else "P"
        aat = "+AAT" if self.aat_enabled and self.lambda_ > 0 else ""
        both = "both" if self.augment_both_segments else "one"
        return f"{loss}{aat} {self.regime} {both} lambda={self.lambda_:g}"


def conditions_from_config(cfg: ExperimentConfig) -> List[Condition]:
    """Base condition, expanded by any sweep axes in the config."""
    base = Condition(
        speaker_loss=cfg.loss.speaker_loss,
        regime=cfg.batch.regime.value,
        augment_both_segments=cfg.batch.augment_both_segments,
        lambda_=cfg.loss.lambda_,
        aat_enabled=cfg.loss.aat_enabled,
    )
    sweep = cfg.sweep or {}
    lambdas = sweep.get("lambdas")
    regimes = sweep.get("regimes")
    losses = sweep.get("speaker_losses")
    augment_both = sweep.get("augment_both")

    out = []
    for loss in losses or [base.speaker_loss]:
        for regime in regimes or [base.regime]:
            for both in augment_both if augment_both is not None else [base.augment_both_segments]:
                for lam in lambdas if lambdas is not None else [base.lambda_]:
                    out.append(Condition(
                        speaker_loss=loss, regime=regime,
                        augment_both_segments=bool(both), lambda_=float(lam),
                        aat_enabled=bool(lam > 0) if lambdas is not None else base.aat_enabled))
    return out


@dataclass
class ResultRow:
    condition: Condition
    eer_mean: float
    eer_std: Optional[float]
    mindcf_mean: float
    mindcf_std: Optional[float]
    n_runs: int
    run_ids: List[str] = field(default_factory=list)


def run_seed(cfg: ExperimentConfig, condition_index: int, repeat: int) -> int:
    """Root seed expands by a counter: 1000 per condition, 1 per repeat."""
    return cfg.seed + 1000 * condition_index + repeat


def _run_hash(condition: Condition, cfg: ExperimentConfig, seed: int) -> str:
    blob = json.dumps({
        "condition": asdict(condition), "seed": seed,
        "encoder": asdict(cfg.encoder),
        "schedule": asdict(cfg.schedule),
        "batch_size": cfg.batch.batch_size,
        "segment_duration_s": cfg.batch.segment_duration_s,
    }, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def build_sampler(cfg: ExperimentConfig) -> AugmentationSampler:
    noise_bank = {}
    rir_bank = []
    root = cfg.corpus.audio_root
    if cfg.corpus.noise_manifest:
        noise_bank = load_noise_bank(cfg.corpus.noise_manifest, root)
    if cfg.corpus.rir_manifest:
        rir_bank = load_rir_bank(cfg.corpus.rir_manifest, root)
    return AugmentationSampler(noise_bank=noise_bank, rir_bank=rir_bank)


def execute_run(cfg: ExperimentConfig, condition: Condition, seed: int,
                run_dir: Path) -> dict:
    """Train one model under the condition and evaluate it; returns results."""
    run_dir.mkdir(parents=True, exist_ok=True)
    manifest = read_train_manifest(cfg.corpus.train_manifest)
    sampler = build_sampler(cfg)

    batch_cfg = BatchConfig(
        batch_size=cfg.batch.batch_size,
        segment_duration_s=cfg.batch.segment_duration_s,
        regime=Regime(condition.regime),
        augment_both_segments=condition.augment_both_segments)
    loss_cfg = LossConfig(
        speaker_loss=condition.speaker_loss, lambda_=condition.lambda_,
        aat_enabled=condition.aat_enabled,
        two_logit_discriminator=cfg.loss.two_logit_discriminator)
    schedule = TrainSchedule(**{**asdict(cfg.schedule), "seed": seed})

    trainer = Trainer(cfg.encoder, batch_cfg, loss_cfg, schedule, sampler)
    trainer.train(manifest, audio_root=cfg.corpus.audio_root, out_dir=run_dir)

    trials = load_trial_list(cfg.corpus.trial_list)
    result = evaluate(trials, trainer.encoder, audio_root=cfg.corpus.audio_root,
                      p=cfg.eval.dcf(), score_file=run_dir / "scores.txt",
                      n_segments=cfg.eval.n_segments,
                      eval_segment_s=cfg.eval.eval_segment_s)
    return {"eer": result.eer, "mindcf": result.mindcf,
            "eer_threshold": result.eer_threshold, "seed": seed}


def run_experiment(cfg: ExperimentConfig, out_dir, log_fn=print) -> List[ResultRow]:
    """Execute the full (condition x repeat) matrix with per-run isolation.

    Completed runs (matching hash) are skipped; failed runs are reported and
    excluded from the aggregate with a warning.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dump_config(cfg, out_dir / "config.yaml")
    conditions = conditions_from_config(cfg)

    rows = []
    failures = []
    for c_idx, condition in enumerate(conditions):
        eers, dcfs, run_ids = [], [], []
        for repeat in range(cfg.repeats):
            seed = run_seed(cfg, c_idx, repeat)
            run_id = _run_hash(condition, cfg, seed)
            run_dir = out_dir / "runs" / run_id
            results_path = run_dir / "results.json"
            if results_path.exists():
                results = json.loads(results_path.read_text())
                log_fn(f"[cache] {condition.label()} seed={seed} -> {run_id}")
            else:
                try:
                    results = execute_run(cfg, condition, seed, run_dir)
                except Exception as exc:
                    failures.append((condition.label(), seed, str(exc)))
                    log_fn(f"[fail] {condition.label()} seed={seed}: {exc}")
                    continue
                results["condition"] = asdict(condition)
                results["config_hash"] = run_id
                results_path.write_text(json.dumps(results, indent=2))
            eers.append(results["eer"])
            dcfs.append(results["mindcf"])
            run_ids.append(run_id)

        if eers:
            rows.append(ResultRow(
                condition=condition,
                eer_mean=float(np.mean(eers)),
                eer_std=float(np.std(eers)) if len(eers) >= 2 else None,
                mindcf_mean=float(np.mean(dcfs)),
                mindcf_std=float(np.std(dcfs)) if len(dcfs) >= 2 else None,
                n_runs=len(eers),
                run_ids=run_ids))

    if failures:
        log_fn(f"warning: {len(failures)} run(s) failed; aggregates cover "
               f"completed runs only")
    rows.sort(key=lambda r: (r.condition.speaker_loss, r.condition.regime,
                             r.condition.lambda_))
    return rows, failures


def _fmt(mean, std, decimals, scale=1.0):
    m = f"{mean * scale:.{decimals}f}"
    if std is None:
        return f"{m}±—"
    return f"{m}±{std * scale:.{decimals}f}"


def render_report(rows: List[ResultRow]) -> str:
    """Plain-text table: EER as percent to 2 decimals, minDCF to 3."""
    header = f"{'condition':<44} {'EER (%)':>14} {'minDCF':>14} {'runs':>5}"
    lines = [header, "-" * len(header)]
    for row in rows:
        lines.append(
            f"{row.condition.label():<44} "
            f"{_fmt(row.eer_mean, row.eer_std, 2, scale=100.0):>14} "
            f"{_fmt(row.mindcf_mean, row.mindcf_std, 3):>14} "
            f"{row.n_runs:>5}")
    return "\n".join(lines)


def render_csv(rows: List[ResultRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["speaker_loss", "regime", "augment_both", "lambda",
                     "eer_mean", "eer_std", "mindcf_mean", "mindcf_std",
                     "n_runs", "run_ids"])
    for row in rows:
        c = row.condition
        writer.writerow([
            c.speaker_loss, c.regime, c.augment_both_segments, c.lambda_,
            row.eer_mean, "" if row.eer_std is None else row.eer_std,
            row.mindcf_mean, "" if row.mindcf_std is None else row.mindcf_std,
            row.n_runs, ";".join(row.run_ids)])
    return buf.getvalue()
