"""Tests for the numpy encoder: initialization, forward contracts, pooling,
the tied prediction head, gradient correctness, and checkpoints."""

import numpy as np
import pytest

from sageforge import encoder as enc
from sageforge.encoder import (
    EncoderConfig,
    EncoderError,
    init_params,
    load_checkpoint,
    parameter_count,
    save_checkpoint,
)

from helpers import (
    cl_loss_through_encoder,
    cl_loss_value,
    finite_difference_check,
    frozen_gamma_through_encoder,
    mlm_loss_through_encoder,
    mlm_loss_value,
)

SMALL = EncoderConfig(
    layers=2, heads=2, model_dim=8, ff_dim=16, vocab_size=50, max_len=16,
    dropout_rate=0.0, seed=3, dtype="float64",
)


def _batch(config, rng, batch=3, length=7, pad_cols=2):
    ids = rng.integers(4, config.vocab_size, size=(batch, length))
    mask = np.ones((batch, length), dtype=np.int64)
    if pad_cols:
        ids[:, -pad_cols:] = 0  # PAD id 0 by convention in these tests
        mask[:, -pad_cols:] = 0
        ids[0, -1] = 0
    return ids, mask


def test_init_deterministic():
    a = init_params(SMALL)
    b = init_params(SMALL)
    for name in a:
        assert np.array_equal(a[name], b[name])


def test_init_seed_changes_params():
    a = init_params(SMALL, seed=1)
    b = init_params(SMALL, seed=2)
    assert not np.array_equal(a["tok_emb"], b["tok_emb"])


def test_tiny_preset_parameter_count_closed_form():
    config = EncoderConfig.from_preset("tiny", vocab_size=8192, max_len=128)
    V, D, P, F, L = 8192, 64, 128, 256, 2
    per_layer = 2 * D + 4 * (D * D + D) + 2 * D + (D * F + F) + (F * D + D)
    expected = V * D + P * D + L * per_layer + 2 * D + V
    assert parameter_count(config) == expected


def test_zero_layer_forward_is_normed_embedding_sum():
    config = EncoderConfig(layers=0, heads=1, model_dim=6, ff_dim=8,
                           vocab_size=11, max_len=4, dtype="float64")
    params = init_params(config)
    ids = np.array([[7]])
    mask = np.ones((1, 1), dtype=np.int64)
    hidden, _ = enc.forward(params, config, ids, mask)
    raw = params["tok_emb"][7] + params["pos_emb"][0]
    mu, var = raw.mean(), raw.var()
    expected = (raw - mu) / np.sqrt(var + enc.LN_EPS)
    assert np.allclose(hidden[0, 0], expected, atol=1e-12)


def test_forward_batch_permutation_equivariance():
    rng = np.random.default_rng(0)
    params = init_params(SMALL)
    ids, mask = _batch(SMALL, rng)
    hidden, _ = enc.forward(params, SMALL, ids, mask)
    perm = np.array([2, 0, 1])
    hidden_p, _ = enc.forward(params, SMALL, ids[perm], mask[perm])
    assert np.allclose(hidden_p, hidden[perm], atol=1e-12)


def test_forward_pad_content_invariance():
    rng = np.random.default_rng(1)
    params = init_params(SMALL)
    ids, mask = _batch(SMALL, rng)
    hidden, _ = enc.forward(params, SMALL, ids, mask)
    altered = ids.copy()
    altered[:, -1] = 9  # padded column, arbitrary other id
    hidden2, _ = enc.forward(params, SMALL, altered, mask)
    valid = mask.astype(bool)
    assert np.allclose(hidden[valid], hidden2[valid], atol=1e-12)


def test_forward_rejects_out_of_range_ids():
    params = init_params(SMALL)
    ids = np.array([[SMALL.vocab_size]])
    with pytest.raises(EncoderError):
        enc.forward(params, SMALL, ids, np.ones((1, 1), dtype=np.int64))


def test_forward_deterministic_inference():
    rng = np.random.default_rng(2)
    params = init_params(SMALL)
    ids, mask = _batch(SMALL, rng)
    h1, _ = enc.forward(params, SMALL, ids, mask)
    h2, _ = enc.forward(params, SMALL, ids, mask)
    assert np.array_equal(h1, h2)


def test_dropout_requires_rng_and_changes_output():
    config = EncoderConfig(layers=1, heads=2, model_dim=8, ff_dim=16,
                           vocab_size=20, max_len=8, dropout_rate=0.5, dtype="float64")
    params = init_params(config)
    ids = np.array([[3, 4, 5]])
    mask = np.ones((1, 3), dtype=np.int64)
    with pytest.raises(EncoderError):
        enc.forward(params, config, ids, mask, train_mode=True)
    h1, _ = enc.forward(params, config, ids, mask, train_mode=True,
                        rng=np.random.default_rng(0))
    h2, _ = enc.forward(params, config, ids, mask, train_mode=False)
    assert not np.allclose(h1, h2)


# -- pooling -----------------------------------------------------------------


def test_pool_mean_constant_rows():
    v = np.array([1.0, -2.0, 3.0])
    hidden = np.tile(v, (1, 5, 1))
    mask = np.array([[1, 1, 0, 1, 0]])
    assert np.allclose(enc.pool_mean(hidden, mask)[0], v)


def test_pool_mean_two_positions():
    a, b = np.array([1.0, 0.0]), np.array([0.0, 3.0])
    hidden = np.stack([a, b, np.array([99.0, 99.0])])[None]
    mask = np.array([[1, 1, 0]])
    assert np.allclose(enc.pool_mean(hidden, mask)[0], (a + b) / 2)


def test_pool_mean_ignores_masked_position():
    rng = np.random.default_rng(3)
    hidden = rng.normal(size=(1, 4, 3))
    mask = np.array([[1, 0, 1, 1]])
    pooled = enc.pool_mean(hidden, mask)
    hidden2 = hidden.copy()
    hidden2[0, 1] = 1e6
    assert np.allclose(enc.pool_mean(hidden2, mask), pooled)


def test_pool_mean_all_pad_is_error():
    with pytest.raises(EncoderError):
        enc.pool_mean(np.zeros((1, 3, 2)), np.zeros((1, 3)))


# -- the tied head --------------------------------------------------------------


def test_mlm_logits_zero_hidden_gives_bias():
    params = init_params(SMALL)
    params["mlm_bias"] = np.arange(SMALL.vocab_size, dtype=np.float64)
    logits = enc.mlm_logits(params, np.zeros((2, SMALL.model_dim)))
    assert np.allclose(logits, params["mlm_bias"])


# -- gradients ------------------------------------------------------------------


def test_gradients_match_finite_differences_mlm():
    rng = np.random.default_rng(7)
    params = init_params(SMALL)
    ids, mask = _batch(SMALL, rng)
    positions = np.array([[0, 1], [0, 3], [1, 0], [2, 4]])
    labels = np.array([5, 9, 13, 17])
    _, grads = mlm_loss_through_encoder(params, SMALL, ids, mask, positions, labels)
    worst = finite_difference_check(
        params, grads,
        lambda p: mlm_loss_value(p, SMALL, ids, mask, positions, labels),
        rng=np.random.default_rng(11), h=1e-4,
    )
    assert worst < 1e-4


def test_gradients_match_finite_differences_contrastive():
    rng = np.random.default_rng(8)
    params = init_params(SMALL)
    a_ids, a_mask = _batch(SMALL, rng, batch=3, length=5, pad_cols=1)
    p_ids, p_mask = _batch(SMALL, rng, batch=3, length=6, pad_cols=2)
    frozen = frozen_gamma_through_encoder(params, SMALL, a_ids, a_mask, p_ids, p_mask, 0.05)
    _, grads = cl_loss_through_encoder(
        params, SMALL, a_ids, a_mask, p_ids, p_mask, 0.05, frozen_gamma=frozen
    )
    worst = finite_difference_check(
        params, grads,
        lambda p: cl_loss_value(p, SMALL, a_ids, a_mask, p_ids, p_mask, 0.05, frozen),
        rng=np.random.default_rng(12), h=1e-4,
    )
    assert worst < 1e-4


def test_pad_embedding_row_gets_zero_gradient_without_head():
    # Through pooling + contrastive loss the PAD row is untouched; the tied
    # prediction head would add softmax mass to every vocabulary row instead.
    rng = np.random.default_rng(9)
    params = init_params(SMALL)
    a_ids, a_mask = _batch(SMALL, rng, pad_cols=2)
    p_ids, p_mask = _batch(SMALL, rng, pad_cols=1)
    _, grads = cl_loss_through_encoder(params, SMALL, a_ids, a_mask, p_ids, p_mask)
    assert np.allclose(grads["tok_emb"][0], 0.0)


def test_backward_linearity():
    rng = np.random.default_rng(10)
    params = init_params(SMALL)
    ids, mask = _batch(SMALL, rng)
    hidden, cache = enc.forward(params, SMALL, ids, mask)
    d_hidden = rng.normal(size=hidden.shape)
    g1 = enc.backward(params, SMALL, cache, d_hidden)
    g2 = enc.backward(params, SMALL, cache, 2.0 * d_hidden)
    for name in g1:
        assert np.allclose(g2[name], 2.0 * g1[name], atol=1e-10)


def test_forward_backward_finite_on_fuzzed_inputs():
    rng = np.random.default_rng(13)
    params = init_params(SMALL)
    for _ in range(5):
        ids, mask = _batch(SMALL, rng, batch=2, length=int(rng.integers(2, 10)),
                           pad_cols=int(rng.integers(0, 2)))
        hidden, cache = enc.forward(params, SMALL, ids, mask)
        assert np.all(np.isfinite(hidden))
        grads = enc.backward(params, SMALL, cache, rng.normal(size=hidden.shape))
        for g in grads.values():
            assert np.all(np.isfinite(g))


# -- checkpoints ------------------------------------------------------------------


def test_checkpoint_round_trip(tmp_path):
    config = EncoderConfig(layers=1, heads=2, model_dim=8, ff_dim=16,
                           vocab_size=30, max_len=8, dtype="float32", seed=5)
    params = init_params(config)
    p1 = tmp_path / "a.ckpt"
    p2 = tmp_path / "b.ckpt"
    save_checkpoint(p1, params, config)
    loaded, loaded_config = load_checkpoint(p1)
    assert loaded_config == config
    for name in params:
        assert np.array_equal(loaded[name], params[name])
    save_checkpoint(p2, loaded, loaded_config)
    assert p1.read_bytes() == p2.read_bytes()


def test_checkpoint_magic_validated(tmp_path):
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(EncoderError):
        load_checkpoint(bad)
