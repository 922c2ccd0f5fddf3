"""Training objectives: masked-prediction cross-entropy and the symmetric
contrastive loss with hard-negative weighting.

The contrastive batch is laid out interleaved, [h_1, h_1+, h_2, h_2+, ...],
over N (anchor, positive) pairs. For a row r with partner p, the loss term is

    -log( exp(s_rp / tau) / (exp(s_rp / tau) + sum_k gamma_rk exp(s_rk / tau)) )

where s is cosine similarity, k ranges over the 2N - 2 in-batch negatives,
and gamma_rk is a softmax over the negatives' similarities at the same
temperature: negatives already close to the anchor get up-weighted. The
per-pair loss sums the two directions (anchor and positive both act as
anchors) and the batch loss is the mean over pairs.

gamma is treated as a constant weight (no gradient flows through it); the
gradient is therefore the gamma-reweighted InfoNCE gradient, exact for that
convention and verified against finite differences in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_TEMPERATURE = 0.05


class ObjectiveError(ValueError):
    pass


# -- masked-prediction loss ------------------------------------------------------


def mlm_loss(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over labeled positions.

    logits: (n, vocab) rows already gathered at the labeled positions;
    labels: (n,) original token ids. Returns (loss, d_loss/d_logits).
    """
    logits = np.asarray(logits)
    labels = np.asarray(labels)
    if logits.ndim != 2 or labels.ndim != 1 or logits.shape[0] != labels.shape[0]:
        raise ObjectiveError("logits must be (n, vocab) aligned with (n,) labels")
    n = logits.shape[0]
    if n == 0:
        raise ObjectiveError("mlm_loss needs at least one labeled position")
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_z
    rows = np.arange(n)
    loss = -log_probs[rows, labels].mean()
    d_logits = np.exp(log_probs)
    d_logits[rows, labels] -= 1.0
    d_logits /= n
    return float(loss), d_logits


# -- contrastive loss --------------------------------------------------------------


@dataclass
class ContrastiveBatch:
    anchors: np.ndarray  # (N, d)
    positives: np.ndarray  # (N, d)
    temperature: float = DEFAULT_TEMPERATURE

    def __post_init__(self):
        if self.anchors.shape != self.positives.shape:
            raise ObjectiveError("anchor and positive blocks must have equal shape")
        if self.temperature <= 0:
            raise ObjectiveError("temperature must be positive")


def interleave(anchors: np.ndarray, positives: np.ndarray) -> np.ndarray:
    n, d = anchors.shape
    out = np.empty((2 * n, d), dtype=anchors.dtype)
    out[0::2] = anchors
    out[1::2] = positives
    return out


def cosine_sim_matrix(anchors: np.ndarray, positives: np.ndarray) -> np.ndarray:
    """(2N, 2N) cosine similarities over the interleaved batch."""
    rows = interleave(anchors, positives)
    norms = np.linalg.norm(rows, axis=1)
    if np.any(norms == 0):
        raise ObjectiveError("zero-norm embedding row")
    unit = rows / norms[:, None]
    return unit @ unit.T


def hard_negative_weights(sim: np.ndarray, i: int, temperature: float) -> np.ndarray:
    """gamma weights of anchor i over its 2N-2 in-batch negatives.

    Returns a length-2N vector that is zero at i and at i's partner and sums
    to one over the negatives. Computed as a max-shifted softmax.
    """
    m = sim.shape[0]
    if m < 4 or m % 2 != 0:
        raise ObjectiveError("need at least two pairs for in-batch negatives")
    partner = i ^ 1
    neg = [k for k in range(m) if k not in (i, partner)]
    z = sim[i, neg] / temperature
    z = np.exp(z - z.max())
    gamma = np.zeros(m, dtype=sim.dtype)
    gamma[neg] = z / z.sum()
    return gamma


def gamma_matrix(anchors: np.ndarray, positives: np.ndarray, temperature: float) -> np.ndarray:
    """All hard-negative weight rows as one (2N, 2N) matrix."""
    sim = cosine_sim_matrix(anchors, positives)
    m = sim.shape[0]
    return np.stack([hard_negative_weights(sim, i, temperature) for i in range(m)])


def contrastive_loss(
    batch: ContrastiveBatch,
    frozen_gamma: np.ndarray | None = None,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Symmetric weighted contrastive loss; returns (loss, d_anchors, d_positives).

    ``frozen_gamma`` substitutes a precomputed (2N, 2N) weight matrix for the
    batch's own hard-negative weights; the finite-difference oracle uses this
    to probe the detached-gamma convention the gradient implements.
    """
    anchors, positives, tau = batch.anchors, batch.positives, batch.temperature
    n_pairs = anchors.shape[0]
    if n_pairs < 2:
        raise ObjectiveError("contrastive loss needs at least two pairs")
    rows = interleave(anchors, positives)
    m = 2 * n_pairs
    norms = np.linalg.norm(rows, axis=1)
    if np.any(norms == 0):
        raise ObjectiveError("zero-norm embedding row")
    unit = rows / norms[:, None]
    sim = unit @ unit.T

    partner = np.arange(m) ^ 1
    exp_sim = np.exp(sim / tau)  # |sim| <= 1, tau >= 0.05 keeps this bounded
    neg_mask = np.ones((m, m), dtype=rows.dtype)
    idx = np.arange(m)
    neg_mask[idx, idx] = 0.0
    neg_mask[idx, partner] = 0.0

    if frozen_gamma is None:
        neg_exp = exp_sim * neg_mask
        gamma = neg_exp / neg_exp.sum(axis=1, keepdims=True)
    else:
        gamma = frozen_gamma
    pos_exp = exp_sim[idx, partner]
    denom = pos_exp + (gamma * exp_sim * neg_mask).sum(axis=1)
    per_row = -(np.log(pos_exp) - np.log(denom))
    loss = per_row.sum() / n_pairs  # sum of both directions, mean over pairs

    # d(loss)/d(sim), holding gamma constant.
    g = np.zeros_like(sim)
    g[idx, partner] = (pos_exp / denom - 1.0) / tau
    g += (gamma * exp_sim * neg_mask) / (denom[:, None] * tau)
    g /= n_pairs

    g_sym = g + g.T
    d_unit = g_sym @ unit
    d_rows = (d_unit - unit * (d_unit * unit).sum(axis=1, keepdims=True)) / norms[:, None]
    return float(loss), d_rows[0::2], d_rows[1::2]


def in_batch_retrieval_accuracy(anchors: np.ndarray, positives: np.ndarray) -> float:
    """Fraction of rows whose partner is the most similar of the 2N-1 others."""
    sim = cosine_sim_matrix(anchors, positives)
    m = sim.shape[0]
    np.fill_diagonal(sim, -np.inf)
    best = sim.argmax(axis=1)
    return float((best == (np.arange(m) ^ 1)).mean())
