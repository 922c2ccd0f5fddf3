"""Shared test utilities: composite loss functions through the encoder and
central finite-difference gradient checking."""

from __future__ import annotations

import numpy as np

from sageforge import encoder as enc
from sageforge.objectives import (
    ContrastiveBatch,
    contrastive_loss,
    gamma_matrix,
    mlm_loss,
)


def mlm_loss_through_encoder(params, config, ids, mask, positions, labels):
    """loss + parameter gradients for masked prediction at the given positions.

    positions: (n, 2) array of (batch_row, seq_pos); labels: (n,) token ids.
    """
    hidden, cache = enc.forward(params, config, ids, mask, train_mode=False)
    rows = hidden[positions[:, 0], positions[:, 1]]
    logits = enc.mlm_logits(params, rows)
    loss, d_logits = mlm_loss(logits, labels)
    d_rows, d_tok_head, d_bias = enc.mlm_logits_backward(params, rows, d_logits)
    d_hidden = np.zeros_like(hidden)
    d_hidden[positions[:, 0], positions[:, 1]] = d_rows
    grads = enc.backward(params, config, cache, d_hidden)
    grads["tok_emb"] += d_tok_head
    grads["mlm_bias"] += d_bias
    return loss, grads


def mlm_loss_value(params, config, ids, mask, positions, labels):
    hidden, _ = enc.forward(params, config, ids, mask, train_mode=False)
    rows = hidden[positions[:, 0], positions[:, 1]]
    logits = enc.mlm_logits(params, rows)
    return mlm_loss(logits, labels)[0]


def cl_loss_through_encoder(params, config, a_ids, a_mask, p_ids, p_mask, tau=0.05,
                            frozen_gamma=None):
    """loss + parameter gradients for the contrastive objective on pooled rows."""
    a_hidden, a_cache = enc.forward(params, config, a_ids, a_mask, train_mode=False)
    p_hidden, p_cache = enc.forward(params, config, p_ids, p_mask, train_mode=False)
    anchors = enc.pool_mean(a_hidden, a_mask)
    positives = enc.pool_mean(p_hidden, p_mask)
    loss, d_anchors, d_positives = contrastive_loss(
        ContrastiveBatch(anchors, positives, tau), frozen_gamma=frozen_gamma
    )
    grads = enc.backward(
        params, config, a_cache, enc.pool_mean_backward(d_anchors, a_mask)
    )
    grads_p = enc.backward(
        params, config, p_cache, enc.pool_mean_backward(d_positives, p_mask)
    )
    for name in grads:
        grads[name] += grads_p[name]
    return loss, grads


def cl_loss_value(params, config, a_ids, a_mask, p_ids, p_mask, tau, frozen_gamma):
    a_hidden, _ = enc.forward(params, config, a_ids, a_mask, train_mode=False)
    p_hidden, _ = enc.forward(params, config, p_ids, p_mask, train_mode=False)
    anchors = enc.pool_mean(a_hidden, a_mask)
    positives = enc.pool_mean(p_hidden, p_mask)
    return contrastive_loss(
        ContrastiveBatch(anchors, positives, tau), frozen_gamma=frozen_gamma
    )[0]


def frozen_gamma_through_encoder(params, config, a_ids, a_mask, p_ids, p_mask, tau):
    a_hidden, _ = enc.forward(params, config, a_ids, a_mask, train_mode=False)
    p_hidden, _ = enc.forward(params, config, p_ids, p_mask, train_mode=False)
    return gamma_matrix(
        enc.pool_mean(a_hidden, a_mask), enc.pool_mean(p_hidden, p_mask), tau
    )


def finite_difference_check(params, grads, loss_fn, rng, h=1e-4,
                            coords_per_tensor=5):
    """Max relative error between analytic grads and central differences.

    Samples coords_per_tensor coordinates from every parameter tensor.
    """
    worst = 0.0
    for name, grad in grads.items():
        flat = params[name].reshape(-1)
        n = flat.shape[0]
        picks = rng.choice(n, size=min(coords_per_tensor, n), replace=False)
        for idx in picks:
            original = flat[idx]
            flat[idx] = original + h
            up = loss_fn(params)
            flat[idx] = original - h
            down = loss_fn(params)
            flat[idx] = original
            fd = (up - down) / (2 * h)
            analytic = grad.reshape(-1)[idx]
            diff = abs(analytic - fd)
            if diff < 1e-9:
                continue
            rel = diff / max(abs(analytic), abs(fd), 1e-8)
            worst = max(worst, rel)
    return worst
