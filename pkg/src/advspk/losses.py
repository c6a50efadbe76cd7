"""Training objectives.

Speaker losses are softmax cross-entropy over a query/prototype similarity
matrix built from within-utterance segment pairs; the channel head is a
two-layer classifier over concatenated embedding pairs trained with binary
cross entropy. The adversarial loss reuses the discriminator's forward value
and reverses its gradient on the way back into the encoder.
"""

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import BatchEmpty, DimensionMismatch, ZeroVector

W_MIN = 1e-6


@dataclass
class LossConfig:
    speaker_loss: str = "angular_prototypical"  # or "prototypical"
    lambda_: float = 0.0
    aat_enabled: bool = False
    two_logit_discriminator: bool = False

    def __post_init__(self):
        if self.speaker_loss not in ("prototypical", "angular_prototypical"):
            raise ValueError(f"unknown speaker loss {self.speaker_loss!r}")
        if self.lambda_ < 0:
            raise ValueError("lambda must be non-negative")

    @property
    def adversarial_active(self) -> bool:
        # lambda = 0 degenerates to plain contrastive training, so the
        # discriminator pass is skipped entirely to keep the runs identical
        return self.aat_enabled and self.lambda_ > 0


class SimilarityParams(nn.Module):
    """Learnable scale and bias for the angular similarity; w stays positive."""

    def __init__(self, init_w: float = 10.0, init_b: float = -5.0):
        super().__init__()
        self.w = nn.Parameter(torch.tensor(float(init_w)))
        self.b = nn.Parameter(torch.tensor(float(init_b)))

    def clamp_(self):
        """Call after each optimizer step to enforce w > 0."""
        with torch.no_grad():
            self.w.clamp_(min=W_MIN)


def _as_pair(e_i, e_j):
    e_i = torch.as_tensor(e_i)
    e_j = torch.as_tensor(e_j)
    if e_i.shape != e_j.shape or e_i.dim() != 1:
        raise DimensionMismatch(f"expected equal 1-D shapes, got {tuple(e_i.shape)} "
                                f"and {tuple(e_j.shape)}")
    return e_i, e_j


def neg_l2_similarity(e_i, e_j):
    """Negative squared L2 distance between two embeddings."""
    e_i, e_j = _as_pair(e_i, e_j)
    return -torch.sum((e_i - e_j) ** 2)


def angular_similarity(e_i, e_j, params: SimilarityParams):
    """w * cos(e_i, e_j) + b; raises ZeroVector on zero-norm inputs."""
    e_i, e_j = _as_pair(e_i, e_j)
    n_i, n_j = torch.linalg.vector_norm(e_i), torch.linalg.vector_norm(e_j)
    if n_i == 0 or n_j == 0:
        raise ZeroVector("cosine similarity is undefined for zero vectors")
    cos = torch.dot(e_i, e_j) / (n_i * n_j)
    return params.w.to(cos.dtype) * cos + params.b.to(cos.dtype)


def neg_l2_matrix(queries: torch.Tensor, prototypes: torch.Tensor) -> torch.Tensor:
    """(N, D) x (N', D) -> (N, N') matrix of negative squared distances."""
    diff = queries.unsqueeze(1) - prototypes.unsqueeze(0)
    return -torch.sum(diff ** 2, dim=-1)


def angular_matrix(queries: torch.Tensor, prototypes: torch.Tensor,
                   params: SimilarityParams) -> torch.Tensor:
    qn = torch.linalg.vector_norm(queries, dim=1)
    pn = torch.linalg.vector_norm(prototypes, dim=1)
    if (qn == 0).any() or (pn == 0).any():
        raise ZeroVector("cosine similarity is undefined for zero vectors")
    cos = (queries / qn.unsqueeze(1)) @ (prototypes / pn.unsqueeze(1)).T
    return params.w.to(cos.dtype) * cos + params.b.to(cos.dtype)


def prototypical_loss(queries: torch.Tensor, prototypes: torch.Tensor,
                      similarity) -> torch.Tensor:
    """Cross entropy over the similarity matrix with positives on the diagonal.

    `similarity` maps (queries, prototypes) to the (N, N) score matrix;
    pass neg_l2_matrix or a bound angular_matrix.
    """
    if queries.dim() != 2 or queries.shape[0] < 1:
        raise BatchEmpty("need at least one query/prototype pair")
    if queries.shape != prototypes.shape:
        raise DimensionMismatch(f"queries {tuple(queries.shape)} vs prototypes "
                                f"{tuple(prototypes.shape)}")
    scores = similarity(queries, prototypes)
    targets = torch.arange(queries.shape[0], device=scores.device)
    return F.cross_entropy(scores, targets)


class AugmentationClassifier(nn.Module):
    """Two fully connected layers over a concatenated embedding pair.

    Hidden size 512 with ReLU and 1-D batch norm between the layers. The
    head is a single logit scored with a sigmoid; the two-logit softmax
    variant is equivalent and selected by `two_logit`, in which case the
    scalar channel-same logit is the difference of the two class logits.
    """

    def __init__(self, embed_dim: int, hidden_dim: int = 512, two_logit: bool = False):
        super().__init__()
        self.embed_dim = embed_dim
        self.two_logit = two_logit
        self.fc1 = nn.Linear(2 * embed_dim, hidden_dim)
        self.bn = nn.BatchNorm1d(hidden_dim)
        self.fc2 = nn.Linear(hidden_dim, 2 if two_logit else 1)

    def forward(self, pairs: torch.Tensor) -> torch.Tensor:
        """(B, 2D) concatenated pairs -> (B,) scalar same-channel logits."""
        if pairs.dim() != 2 or pairs.shape[1] != 2 * self.embed_dim:
            raise DimensionMismatch(
                f"expected (B, {2 * self.embed_dim}), got {tuple(pairs.shape)}")
        h = self.bn(F.relu(self.fc1(pairs)))
        out = self.fc2(h)
        if self.two_logit:
            return out[:, 1] - out[:, 0]
        return out.squeeze(-1)


def discriminator_forward(g: AugmentationClassifier, pair) -> torch.Tensor:
    """Scalar logit for one concatenated pair (inference mode for the norm)."""
    pair = torch.as_tensor(pair, dtype=next(g.parameters()).dtype)
    if pair.dim() != 1 or pair.shape[0] != 2 * g.embed_dim:
        raise DimensionMismatch(f"expected a vector of length {2 * g.embed_dim}")
    was_training = g.training
    g.eval()
    try:
        with torch.no_grad():
            logit = g(pair.unsqueeze(0)).squeeze(0)
    finally:
        g.train(was_training)
    return logit


def _bce_on_pairs(g: AugmentationClassifier, same_channel_pairs: torch.Tensor,
                  diff_channel_pairs: torch.Tensor) -> torch.Tensor:
    if same_channel_pairs.shape[0] < 1:
        raise BatchEmpty("discriminator batch is empty")
    if same_channel_pairs.shape != diff_channel_pairs.shape:
        raise DimensionMismatch("same/diff pair batches must match in shape")
    inputs = torch.cat([same_channel_pairs, diff_channel_pairs], dim=0)
    logits = g(inputs)
    targets = torch.cat([
        torch.ones(same_channel_pairs.shape[0], dtype=logits.dtype),
        torch.zeros(diff_channel_pairs.shape[0], dtype=logits.dtype),
    ]).to(logits.device)
    return F.binary_cross_entropy_with_logits(logits, targets)


def discriminator_loss(g: AugmentationClassifier, same_channel_pairs,
                       diff_channel_pairs) -> torch.Tensor:
    """Mean BCE over 2N pairs; embeddings are constants (no grad to the encoder)."""
    return _bce_on_pairs(g, same_channel_pairs.detach(), diff_channel_pairs.detach())


class _GradReverse(torch.autograd.Function):
    @staticmethod
    def forward(ctx, x):
        return x.view_as(x)

    @staticmethod
    def backward(ctx, grad_output):
        return grad_output.neg()


def grad_reverse(x: torch.Tensor) -> torch.Tensor:
    """Identity in the forward pass, negated gradient in the backward pass."""
    return _GradReverse.apply(x)


def aat_loss(g: AugmentationClassifier, same_channel_pairs: torch.Tensor,
             diff_channel_pairs: torch.Tensor) -> torch.Tensor:
    """Adversarial channel loss.

    Forward value equals discriminator_loss on the same inputs; the reversal
    layer sits between the embeddings and g, so gradients reaching encoder
    parameters are the negation of the discriminator's. g's own parameters
    are frozen for the duration of the call.
    """
    frozen = [p for p in g.parameters() if p.requires_grad]
    for p in frozen:
        p.requires_grad_(False)
    try:
        return _bce_on_pairs(g, grad_reverse(same_channel_pairs),
                             grad_reverse(diff_channel_pairs))
    finally:
        for p in frozen:
            p.requires_grad_(True)


def overall_loss(l_spk, l_aat, cfg: LossConfig):
    """Speaker loss plus lambda-weighted adversarial loss."""
    if not cfg.aat_enabled:
        return l_spk
    return l_spk + cfg.lambda_ * l_aat


def speaker_loss_fn(cfg: LossConfig, params: SimilarityParams):
    """Bind the configured similarity into a (queries, prototypes) -> loss callable."""
    if cfg.speaker_loss == "prototypical":
        return lambda q, p: prototypical_loss(q, p, neg_l2_matrix)
    return lambda q, p: prototypical_loss(
        q, p, lambda a, b: angular_matrix(a, b, params))
