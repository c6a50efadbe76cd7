"""Self-supervised training loop.

Each iteration draws N utterances, crops two non-overlapping segments per
utterance and builds three feature maps: segment 1 and segment 2 under the
same channel draw, and segment 2 under an independent draw. The channel
discriminator and the embedding extractor are then updated in turn on the
same batch, discriminator first.
"""

import json
import os
from dataclasses import dataclass, asdict, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
import torch

from .audio import (AugmentationSampler, Regime, augment, extract_logmel,
                    instance_normalize, read_wav, sample_segments)
from .encoder import CHECKPOINT_VERSION, Encoder, EncoderConfig, features_to_batch
from .errors import ManifestTooSmall, TrainingDiverged
from .losses import (AugmentationClassifier, LossConfig, SimilarityParams,
                     aat_loss, discriminator_loss, overall_loss, speaker_loss_fn)


@dataclass
class BatchConfig:
    batch_size: int = 200
    segment_duration_s: float = 1.8
    regime: Regime = Regime.NONE
    augment_both_segments: bool = True

    def __post_init__(self):
        self.regime = Regime(self.regime)
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class TrainSchedule:
    epochs: int = 150
    initial_lr: float = 0.001
    lr_decay: float = 0.95
    lr_decay_every: int = 5
    seed: int = 0

    def lr_at(self, epoch: int) -> float:
        return self.initial_lr * self.lr_decay ** (epoch // self.lr_decay_every)


@dataclass
class TrainingBatch:
    utterance_ids: List[str]
    # each (N, T, M): segment 1 / channel 1, segment 2 / channel 1, segment 2 / channel 2
    features_11: np.ndarray
    features_21: np.ndarray
    features_22: np.ndarray
    specs_1: list = field(default_factory=list)
    specs_2: list = field(default_factory=list)

    @property
    def size(self) -> int:
        return len(self.utterance_ids)


def form_batch(manifest: Sequence[Tuple[str, str]], cfg: BatchConfig,
               rng: np.random.Generator, sampler: AugmentationSampler,
               audio_root=".", utterances=None) -> TrainingBatch:
    """Build one training batch of per-utterance feature-map triples.

    `utterances` may pre-select (id, Waveform) pairs (the epoch loop does its
    own shuffling); otherwise `cfg.batch_size` entries are drawn from the
    manifest without replacement and read from disk.
    """
    if utterances is None:
        if len(manifest) < cfg.batch_size:
            raise ManifestTooSmall(f"{len(manifest)} utterances < batch of {cfg.batch_size}")
        picks = rng.choice(len(manifest), size=cfg.batch_size, replace=False)
        root = Path(audio_root)
        utterances = [(manifest[i][0], read_wav(root / manifest[i][1])) for i in picks]

    ids, f11, f21, f22, specs_1, specs_2 = [], [], [], [], [], []
    for utt_id, wav in utterances:
        pair = sample_segments(wav, cfg.segment_duration_s, rng, utterance_id=utt_id)
        seg_len = len(pair.seg1)
        if cfg.augment_both_segments:
            spec1 = sampler.draw(cfg.regime, seg_len, rng, augment_both_segments=True)
        else:
            # augment-one mode: the first channel draw is the clean channel
            spec1 = sampler.draw(Regime.NONE, seg_len, rng, augment_both_segments=False)
        spec2 = sampler.draw(cfg.regime, seg_len, rng,
                             augment_both_segments=cfg.augment_both_segments)

        x11 = augment(pair.seg1, spec1)
        x21 = augment(pair.seg2, spec1)
        x22 = augment(pair.seg2, spec2)

        ids.append(utt_id)
        f11.append(instance_normalize(extract_logmel(x11)).frames)
        f21.append(instance_normalize(extract_logmel(x21)).frames)
        f22.append(instance_normalize(extract_logmel(x22)).frames)
        specs_1.append(spec1)
        specs_2.append(spec2)

    return TrainingBatch(ids, np.stack(f11), np.stack(f21), np.stack(f22),
                         specs_1, specs_2)


def _embed_groups(encoder: Encoder, batch: TrainingBatch, need_third: bool):
    """Forward the batch's feature groups through the encoder in one pass."""
    groups = [batch.features_11, batch.features_22]
    if need_third:
        groups.insert(1, batch.features_21)
    x = features_to_batch(np.concatenate(groups))
    out = encoder(x)
    n = batch.size
    if need_third:
        return out[:n], out[n:2 * n], out[2 * n:]
    return out[:n], None, out[n:]


def _frozen_stats(encoder: Encoder):
    """Batch-norm layers keep using batch statistics but stop tracking."""
    layers = [m for m in encoder.modules()
              if isinstance(m, (torch.nn.BatchNorm1d, torch.nn.BatchNorm2d))]
    return layers


def discriminator_step(batch: TrainingBatch, encoder: Encoder,
                       g: AugmentationClassifier, opt_g: torch.optim.Optimizer):
    """One update of the channel discriminator; the encoder is untouched.

    Embeddings come from the same train-mode forward the embedding phase
    uses (batch statistics), but under no_grad and with running-stat
    tracking paused, so the encoder stays bitwise identical, buffers
    included.
    """
    was_training = encoder.training
    encoder.train()
    bn_layers = _frozen_stats(encoder)
    for m in bn_layers:
        m.track_running_stats = False
    try:
        with torch.no_grad():
            e11, e21, e22 = _embed_groups(encoder, batch, need_third=True)
    finally:
        for m in bn_layers:
            m.track_running_stats = True
        encoder.train(was_training)

    g.train()
    same_pairs = torch.cat([e11, e21], dim=1)
    diff_pairs = torch.cat([e11, e22], dim=1)
    loss = discriminator_loss(g, same_pairs, diff_pairs)
    opt_g.zero_grad()
    loss.backward()
    opt_g.step()
    return float(loss.detach())


def embedding_step(batch: TrainingBatch, encoder: Encoder,
                   sim_params: SimilarityParams, g: Optional[AugmentationClassifier],
                   opt_f: torch.optim.Optimizer, cfg: LossConfig):
    """One update of the encoder and similarity params; g stays fixed.

    g is evaluated with frozen parameters and in eval mode so it is bitwise
    unchanged, buffers included. Returns (L_spk, L_aat, L_overall) values.
    """
    encoder.train()
    spk_fn = speaker_loss_fn(cfg, sim_params)

    adversarial = cfg.adversarial_active and g is not None
    e11, e21, e22 = _embed_groups(encoder, batch, need_third=adversarial)
    l_spk = spk_fn(e11, e22)

    if adversarial:
        g.eval()
        same_pairs = torch.cat([e11, e21], dim=1)
        diff_pairs = torch.cat([e11, e22], dim=1)
        l_aat = aat_loss(g, same_pairs, diff_pairs)
        total = overall_loss(l_spk, l_aat, cfg)
        l_aat_value = float(l_aat.detach())
    else:
        total = l_spk
        l_aat_value = 0.0

    opt_f.zero_grad()
    total.backward()
    opt_f.step()
    sim_params.clamp_()
    return float(l_spk.detach()), l_aat_value, float(total.detach())


class Trainer:
    """Owns the models, optimizers, and the alternating update loop."""

    def __init__(self, encoder_config: EncoderConfig, batch_cfg: BatchConfig,
                 loss_cfg: LossConfig, schedule: TrainSchedule,
                 sampler: AugmentationSampler, discriminator_hidden: int = 512):
        self.batch_cfg = batch_cfg
        self.loss_cfg = loss_cfg
        self.schedule = schedule
        self.sampler = sampler

        torch.manual_seed(schedule.seed)
        self.encoder = Encoder(encoder_config)
        self.sim_params = SimilarityParams()
        self.discriminator = AugmentationClassifier(
            encoder_config.embed_dim, hidden_dim=discriminator_hidden,
            two_logit=loss_cfg.two_logit_discriminator)

        self.opt_f = torch.optim.Adam(
            list(self.encoder.parameters()) + list(self.sim_params.parameters()),
            lr=schedule.initial_lr)
        self.opt_g = torch.optim.Adam(self.discriminator.parameters(),
                                      lr=schedule.initial_lr)

    def set_lr(self, lr: float):
        for opt in (self.opt_f, self.opt_g):
            for group in opt.param_groups:
                group["lr"] = lr

    def run_iteration(self, batch: TrainingBatch):
        """Discriminator phase then embedding phase on the same batch."""
        if self.loss_cfg.adversarial_active:
            l_dis = discriminator_step(batch, self.encoder, self.discriminator,
                                       self.opt_g)
        else:
            l_dis = 0.0
        l_spk, l_aat, l_total = embedding_step(
            batch, self.encoder, self.sim_params, self.discriminator,
            self.opt_f, self.loss_cfg)
        return l_spk, l_dis, l_aat, l_total

    def train(self, manifest: Sequence[Tuple[str, str]], audio_root=".",
              out_dir=None, epochs: Optional[int] = None, log_fn=None):
        """Full training run: epoch shuffling, lr schedule, logs, checkpoints.

        Returns the metrics history as a list of dicts (one per iteration).
        """
        if len(manifest) < self.batch_cfg.batch_size:
            raise ManifestTooSmall(
                f"{len(manifest)} utterances < batch of {self.batch_cfg.batch_size}")
        rng = np.random.default_rng(self.schedule.seed)
        out_dir = Path(out_dir) if out_dir is not None else None
        log_path = None
        if out_dir is not None:
            out_dir.mkdir(parents=True, exist_ok=True)
            log_path = out_dir / "metrics.jsonl"

        root = Path(audio_root)
        n = self.batch_cfg.batch_size
        history = []
        iteration = 0
        total_epochs = self.schedule.epochs if epochs is None else epochs

        for epoch in range(total_epochs):
            lr = self.schedule.lr_at(epoch)
            self.set_lr(lr)
            order = rng.permutation(len(manifest))
            # one pass over the shuffled manifest, truncated to full batches
            for start in range(0, len(order) - n + 1, n):
                picks = order[start:start + n]
                utterances = [(manifest[i][0], read_wav(root / manifest[i][1]))
                              for i in picks]
                batch = form_batch(None, self.batch_cfg, rng, self.sampler,
                                   utterances=utterances)
                l_spk, l_dis, l_aat, l_total = self.run_iteration(batch)

                if not all(np.isfinite(v) for v in (l_spk, l_dis, l_aat, l_total)):
                    dump_path = None
                    if out_dir is not None:
                        dump_path = out_dir / f"diverged_iter{iteration}.json"
                        dump_path.write_text(json.dumps({
                            "iter": iteration, "epoch": epoch,
                            "utterance_ids": batch.utterance_ids,
                            "losses": {"L_spk": l_spk, "L_dis": l_dis,
                                       "L_aat": l_aat, "L_overall": l_total},
                        }, indent=2))
                    raise TrainingDiverged(
                        f"non-finite loss at iteration {iteration}",
                        utterance_ids=batch.utterance_ids, dump_path=dump_path)

                record = {"iter": iteration, "epoch": epoch, "L_spk": l_spk,
                          "L_dis": l_dis, "L_aat": l_aat, "lr": lr}
                history.append(record)
                if log_path is not None:
                    with open(log_path, "a", encoding="utf-8") as f:
                        f.write(json.dumps(record) + "\n")
                if log_fn is not None:
                    log_fn(record)
                iteration += 1

            if out_dir is not None:
                self.save_checkpoint(out_dir / f"checkpoint_epoch{epoch:04d}.pt",
                                     epoch=epoch, iteration=iteration)
        return history

    def save_checkpoint(self, path, epoch: int = 0, iteration: int = 0):
        payload = {
            "format_version": CHECKPOINT_VERSION,
            "kind": "training",
            "encoder_config": asdict(self.encoder.config),
            "encoder_state": self.encoder.state_dict(),
            "similarity_state": self.sim_params.state_dict(),
            "discriminator_state": self.discriminator.state_dict(),
            "optimizer_f_state": self.opt_f.state_dict(),
            "optimizer_g_state": self.opt_g.state_dict(),
            "loss_config": asdict(self.loss_cfg),
            "batch_config": {**asdict(self.batch_cfg),
                             "regime": self.batch_cfg.regime.value},
            "schedule": asdict(self.schedule),
            "epoch": epoch,
            "iteration": iteration,
        }
        tmp = Path(str(path) + ".tmp")
        torch.save(payload, tmp)
        os.replace(tmp, path)

    def load_checkpoint(self, path):
        payload = torch.load(path, map_location="cpu", weights_only=False)
        if payload.get("format_version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version "
                             f"{payload.get('format_version')}")
        self.encoder.load_state_dict(payload["encoder_state"])
        self.sim_params.load_state_dict(payload["similarity_state"])
        self.discriminator.load_state_dict(payload["discriminator_state"])
        self.opt_f.load_state_dict(payload["optimizer_f_state"])
        self.opt_g.load_state_dict(payload["optimizer_g_state"])
        return payload
