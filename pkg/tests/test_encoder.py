import numpy as np
import pytest
import torch

from advspk.audio import FeatureMap
from advspk.encoder import (Encoder, EncoderConfig, SelfAttentivePool,
                            attentive_pool, features_to_batch, load_encoder,
                            parameter_summary, save_encoder)
from advspk.errors import InputTooShort

TINY = EncoderConfig(embed_dim=16, channel_widths=(2, 4, 4, 8),
                     blocks_per_stage=(1, 1, 1, 1), attention_hidden=4)


def test_default_config_maps_178x40_to_512():
    torch.manual_seed(0)
    enc = Encoder(EncoderConfig())
    out = enc(torch.randn(1, 1, 40, 178))
    assert out.shape == (1, 512)


def test_inference_is_deterministic():
    torch.manual_seed(1)
    enc = Encoder(TINY)
    fm = FeatureMap(frames=np.random.default_rng(0).normal(size=(50, 40)))
    a = enc.embed(fm)
    b = enc.embed(fm)
    np.testing.assert_array_equal(a.vector, b.vector)
    assert a.vector.shape == (16,)


def test_variable_length_inputs_pool_to_fixed_dim():
    torch.manual_seed(2)
    enc = Encoder(TINY)
    for frames in (150, 300):
        out = enc(torch.randn(2, 1, 40, frames))
        assert out.shape == (2, 16)


def test_too_short_input_rejected():
    enc = Encoder(TINY)
    with pytest.raises(InputTooShort):
        enc(torch.randn(1, 1, 40, 0))


# -------------------------------------------------------------- attentive_pool

def test_single_frame_pools_to_itself():
    torch.manual_seed(3)
    pool = SelfAttentivePool(8, 4)
    frame = torch.randn(1, 8)
    out = attentive_pool(frame, pool)
    torch.testing.assert_close(out, frame.squeeze(0))


def test_uniform_scores_give_temporal_mean():
    pool = SelfAttentivePool(8, 4)
    with torch.no_grad():
        pool.score_out.weight.zero_()  # every frame scores 0
    frames = torch.randn(12, 8)
    out = attentive_pool(frames, pool)
    torch.testing.assert_close(out, frames.mean(dim=0))


def test_weights_sum_to_one_and_output_in_hull():
    torch.manual_seed(4)
    pool = SelfAttentivePool(128, 32)
    frames = torch.randn(10, 128)
    with torch.no_grad():
        weights = pool.attention_weights(frames.unsqueeze(0)).squeeze(0)
    assert float(weights.sum()) == pytest.approx(1.0, abs=1e-6)
    assert (weights >= 0).all()
    out = attentive_pool(frames, pool)
    assert (out <= frames.max(dim=0).values + 1e-6).all()
    assert (out >= frames.min(dim=0).values - 1e-6).all()


def test_pooling_is_permutation_invariant():
    torch.manual_seed(5)
    pool = SelfAttentivePool(16, 8)
    frames = torch.randn(20, 16)
    perm = torch.randperm(20)
    out = attentive_pool(frames, pool)
    out_permuted = attentive_pool(frames[perm], pool)
    torch.testing.assert_close(out, out_permuted, atol=1e-6, rtol=1e-6)


def test_pool_gradients_match_finite_differences():
    pool = SelfAttentivePool(6, 3).double()
    frames = torch.randn(5, 6, dtype=torch.float64, requires_grad=True)
    assert torch.autograd.gradcheck(lambda x: pool(x.unsqueeze(0)), (frames,))


# ----------------------------------------------------------- parameter_summary

def test_quarter_width_is_under_a_tenth_of_full_width():
    quarter = parameter_summary(Encoder(EncoderConfig()))
    full = parameter_summary(Encoder(EncoderConfig(
        channel_widths=(64, 128, 256, 512))))
    assert quarter["total"] < full["total"] / 10


def test_doubling_embed_dim_only_changes_projection():
    base = parameter_summary(Encoder(EncoderConfig(embed_dim=512)))
    wide = parameter_summary(Encoder(EncoderConfig(embed_dim=1024)))
    for stage in ("frontend", "stage1", "stage2", "stage3", "stage4", "attention"):
        assert base[stage] == wide[stage]
    assert wide["projection"] == 2 * base["projection"]


def test_count_is_structural():
    torch.manual_seed(6)
    enc = Encoder(TINY)
    before = parameter_summary(enc)
    with torch.no_grad():
        for p in enc.parameters():
            p.zero_()
    assert parameter_summary(enc) == before


# ------------------------------------------------------------------ robustness

def test_no_non_finite_activations_on_random_inputs():
    torch.manual_seed(7)
    enc = Encoder(TINY)
    enc.eval()
    with torch.no_grad():
        for _ in range(10):
            x = torch.empty(100, 1, 40, 12).uniform_(-5.0, 5.0)
            out = enc(x)
            assert torch.isfinite(out).all()


def test_checkpoint_roundtrip(tmp_path):
    torch.manual_seed(8)
    enc = Encoder(TINY)
    fm = FeatureMap(frames=np.random.default_rng(1).normal(size=(30, 40)))
    before = enc.embed(fm).vector
    save_encoder(tmp_path / "enc.pt", enc)
    loaded = load_encoder(tmp_path / "enc.pt")
    after = loaded.embed(fm).vector
    np.testing.assert_array_equal(before, after)
    assert loaded.config == enc.config


def test_features_to_batch_layout():
    maps = [FeatureMap(frames=np.full((7, 40), i, dtype=float)) for i in range(3)]
    x = features_to_batch(maps)
    assert x.shape == (3, 1, 40, 7)
    assert float(x[1].mean()) == 1.0
