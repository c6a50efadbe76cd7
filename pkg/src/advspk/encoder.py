"""Speaker embedding extractor.

A thin ResNet-34 (channel widths cut to a quarter) over log-mel feature maps,
followed by self-attentive pooling along time and a linear projection to the
embedding space. Input layout is (batch, 1, mel_bins, frames).
"""

import math
from dataclasses import dataclass, field, asdict
from typing import Dict, Optional

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .audio.types import FeatureMap
from .errors import InputTooShort

CHECKPOINT_VERSION = 1


@dataclass
class EncoderConfig:
    embed_dim: int = 512
    channel_widths: tuple = (16, 32, 64, 128)
    blocks_per_stage: tuple = (3, 4, 6, 3)
    attention_hidden: int = 128
    mel_bins: int = 40

    def __post_init__(self):
        self.channel_widths = tuple(int(w) for w in self.channel_widths)
        self.blocks_per_stage = tuple(int(b) for b in self.blocks_per_stage)
        if self.embed_dim < 1:
            raise ValueError("embed_dim must be >= 1")
        if len(self.channel_widths) != 4 or len(self.blocks_per_stage) != 4:
            raise ValueError("expected 4 stages")
        if any(w < 1 for w in self.channel_widths):
            raise ValueError("channel widths must be strictly positive")


@dataclass
class Embedding:
    """One speaker representation with its (utterance, segment, augmentation) indices."""

    vector: np.ndarray
    utterance_index: int = 0
    segment_index: int = 1
    augmentation_index: int = 1

    def __post_init__(self):
        self.vector = np.asarray(self.vector, dtype=np.float64)
        if not np.all(np.isfinite(self.vector)):
            raise ValueError("embedding contains non-finite values")


class BasicBlock(nn.Module):
    def __init__(self, in_ch, out_ch, stride=1):
        super().__init__()
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, stride=stride, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(out_ch)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, stride=1, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(out_ch)
        if stride != 1 or in_ch != out_ch:
            self.downsample = nn.Sequential(
                nn.Conv2d(in_ch, out_ch, 1, stride=stride, bias=False),
                nn.BatchNorm2d(out_ch),
            )
        else:
            self.downsample = None

    def forward(self, x):
        out = F.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        shortcut = x if self.downsample is None else self.downsample(x)
        return F.relu(out + shortcut)


class SelfAttentivePool(nn.Module):
    """Softmax-weighted temporal average with a learned scoring function.

    Scores are v . tanh(W h_t + b) per frame; weights are non-negative and
    sum to one, so the pooled vector is a convex combination of the frames.
    """

    def __init__(self, feature_dim, hidden_dim):
        super().__init__()
        self.score_hidden = nn.Linear(feature_dim, hidden_dim)
        self.score_out = nn.Linear(hidden_dim, 1, bias=False)

    def attention_weights(self, frames):
        # frames: (B, T, C) -> (B, T)
        scores = self.score_out(torch.tanh(self.score_hidden(frames))).squeeze(-1)
        return F.softmax(scores, dim=-1)

    def forward(self, frames):
        weights = self.attention_weights(frames)
        return torch.sum(frames * weights.unsqueeze(-1), dim=1)


def attentive_pool(frame_features, pool: SelfAttentivePool):
    """Pool a single (T, C) matrix to a C vector with the given attention params."""
    x = torch.as_tensor(frame_features)
    if x.dim() != 2 or x.shape[0] < 1:
        raise ValueError("expected a (T, C) matrix with T >= 1")
    return pool(x.unsqueeze(0)).squeeze(0)


class Encoder(nn.Module):
    """Quarter-width ResNet-34 trunk + self-attentive pooling + projection."""

    def __init__(self, config: Optional[EncoderConfig] = None):
        super().__init__()
        self.config = config or EncoderConfig()
        w = self.config.channel_widths
        blocks = self.config.blocks_per_stage

        self.frontend = nn.Sequential(
            nn.Conv2d(1, w[0], 3, stride=1, padding=1, bias=False),
            nn.BatchNorm2d(w[0]),
            nn.ReLU(inplace=True),
        )
        self.stage1 = self._make_stage(w[0], w[0], blocks[0], stride=1)
        self.stage2 = self._make_stage(w[0], w[1], blocks[1], stride=2)
        self.stage3 = self._make_stage(w[1], w[2], blocks[2], stride=2)
        self.stage4 = self._make_stage(w[2], w[3], blocks[3], stride=2)

        # three stride-2 stages shrink the mel axis 40 -> 5
        freq_out = self.config.mel_bins
        for _ in range(3):
            freq_out = (freq_out - 1) // 2 + 1
        self.frame_dim = w[3] * freq_out
        self.pool = SelfAttentivePool(self.frame_dim, self.config.attention_hidden)
        self.projection = nn.Linear(self.frame_dim, self.config.embed_dim)

        self._init_parameters()

    @staticmethod
    def _make_stage(in_ch, out_ch, n_blocks, stride):
        layers = [BasicBlock(in_ch, out_ch, stride)]
        layers += [BasicBlock(out_ch, out_ch) for _ in range(n_blocks - 1)]
        return nn.Sequential(*layers)

    def _init_parameters(self):
        for m in self.modules():
            if isinstance(m, nn.Conv2d):
                nn.init.kaiming_normal_(m.weight, mode="fan_in", nonlinearity="relu")
                if m.bias is not None:
                    nn.init.zeros_(m.bias)
            elif isinstance(m, (nn.BatchNorm2d, nn.BatchNorm1d)):
                nn.init.ones_(m.weight)
                nn.init.zeros_(m.bias)
            elif isinstance(m, nn.Linear):
                nn.init.kaiming_normal_(m.weight, mode="fan_in", nonlinearity="relu")
                if m.bias is not None:
                    nn.init.zeros_(m.bias)

    @property
    def min_input_frames(self) -> int:
        # every conv pads by 1 around a 3x3 kernel, so each stride-2 stage maps
        # T -> floor((T - 1) / 2) + 1, which keeps T >= 1 for any T >= 1
        return 1

    def forward(self, x):
        """(B, 1, mel_bins, T) -> (B, embed_dim)."""
        if x.dim() != 4:
            raise ValueError("expected (batch, 1, mel_bins, frames)")
        if x.shape[-1] < self.min_input_frames:
            raise InputTooShort(
                f"{x.shape[-1]} frames < minimum {self.min_input_frames}")
        h = self.frontend(x)
        h = self.stage4(self.stage3(self.stage2(self.stage1(h))))
        # (B, C, F', T') -> (B, T', C*F')
        b, c, f, t = h.shape
        frames = h.permute(0, 3, 1, 2).reshape(b, t, c * f)
        return self.projection(self.pool(frames))

    def embed(self, features: FeatureMap, utterance_index: int = 0,
              segment_index: int = 1, augmentation_index: int = 1) -> Embedding:
        """Deterministic inference on one feature map (eval mode, no grad)."""
        was_training = self.training
        self.eval()
        try:
            with torch.no_grad():
                x = torch.as_tensor(features.frames.T, dtype=torch.float32)
                vec = self.forward(x.unsqueeze(0).unsqueeze(0)).squeeze(0)
        finally:
            self.train(was_training)
        return Embedding(vec.numpy(), utterance_index, segment_index, augmentation_index)

    def embed_batch(self, feature_stack: np.ndarray) -> np.ndarray:
        """(B, T, M) feature arrays -> (B, D) numpy embeddings, eval mode."""
        was_training = self.training
        self.eval()
        try:
            with torch.no_grad():
                x = torch.as_tensor(feature_stack, dtype=torch.float32)
                x = x.permute(0, 2, 1).unsqueeze(1)  # (B, 1, M, T)
                out = self.forward(x)
        finally:
            self.train(was_training)
        return out.numpy().astype(np.float64)


def parameter_summary(encoder: Encoder) -> Dict[str, int]:
    """Exact parameter counts per stage plus the total."""
    groups = {"frontend": encoder.frontend, "stage1": encoder.stage1,
              "stage2": encoder.stage2, "stage3": encoder.stage3,
              "stage4": encoder.stage4, "attention": encoder.pool,
              "projection": encoder.projection}
    summary = {name: sum(p.numel() for p in module.parameters())
               for name, module in groups.items()}
    summary["total"] = sum(summary.values())
    return summary


def features_to_batch(feature_maps, dtype=torch.float32) -> torch.Tensor:
    """Stack equal-length FeatureMaps into the encoder's (B, 1, M, T) layout."""
    arrays = [fm.frames if isinstance(fm, FeatureMap) else np.asarray(fm)
              for fm in feature_maps]
    stacked = np.stack(arrays)  # (B, T, M)
    x = torch.as_tensor(stacked, dtype=dtype)
    return x.permute(0, 2, 1).unsqueeze(1)


def save_encoder(path, encoder: Encoder) -> None:
    """Self-describing checkpoint: version, config, and named parameter arrays."""
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "kind": "encoder",
        "encoder_config": asdict(encoder.config),
        "encoder_state": encoder.state_dict(),
    }
    torch.save(payload, path)


def load_encoder(path) -> Encoder:
    payload = torch.load(path, map_location="cpu", weights_only=False)
    if payload.get("format_version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {payload.get('format_version')}")
    config = EncoderConfig(**payload["encoder_config"])
    encoder = Encoder(config)
    encoder.load_state_dict(payload["encoder_state"])
    return encoder
