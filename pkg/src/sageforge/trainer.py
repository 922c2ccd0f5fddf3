"""Two-stage training: denoising (Stage I) and bimodal contrastive learning
(Stage II), with AdamW, a linear warmup/decay schedule, global-norm gradient
clipping, and binary checkpoints.

Runs are bitwise reproducible for a fixed (config, seed, corpus): every
random stream (initialization, epoch shuffling, masking, dropout) is derived
from the single config seed via spawned generators. Steps whose gradients
come out non-finite are skipped and counted rather than applied.

Desk-scale defaults are deliberately small: the published recipe's schedule
(250k steps at batch 2048, then 20k steps at batch 8192) is far beyond a CPU
budget, so configs here default to a few hundred steps and the learning rate
for Stage II is scaled up to match the much smaller batches.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import encoder as enc
from .denoiser import MaskConfig, Stage1Item, collate_items, prepare_stage1_items
from .objectives import (
    ContrastiveBatch,
    contrastive_loss,
    in_batch_retrieval_accuracy,
    mlm_loss,
)
from .tokenizer import Tokenizer

STAGE1 = "stage1"
STAGE2 = "stage2"
STAGE2_SCRATCH = "stage2-scratch"

ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8


class TrainerError(ValueError):
    pass


@dataclass
class TrainConfig:
    stage: str = STAGE1
    steps: int = 300
    warmup_steps: int = 30
    batch_size: int = 32
    base_lr: float = 3e-4
    weight_decay: float = 0.01
    grad_clip: float = 1.0
    seed: int = 0
    encoder_preset: str = "tiny"
    vocab_size: int = 0  # 0: take the tokenizer's size
    max_len: int = 128
    dropout_rate: float = 0.1
    temperature: float = 0.05
    mask: MaskConfig = field(default_factory=MaskConfig)
    eval_every: int = 50
    checkpoint_every: int = 0  # 0: final checkpoint only
    out_dir: Optional[str] = None

    def __post_init__(self):
        if self.stage not in (STAGE1, STAGE2, STAGE2_SCRATCH):
            raise TrainerError(f"unknown stage {self.stage!r}")
        if self.warmup_steps > self.steps:
            raise TrainerError("warmup_steps exceeds steps")
        if self.stage != STAGE1 and self.batch_size < 2:
            raise TrainerError("contrastive training needs batch_size >= 2")

    def encoder_config(self, tokenizer: Tokenizer) -> enc.EncoderConfig:
        vocab = self.vocab_size or tokenizer.vocab_size
        return enc.EncoderConfig.from_preset(
            self.encoder_preset,
            vocab_size=vocab,
            max_len=self.max_len,
            dropout_rate=self.dropout_rate,
            seed=self.seed,
        )


@dataclass
class TrainReport:
    losses: list[float] = field(default_factory=list)
    evals: list[dict] = field(default_factory=list)
    wall_clock_sec: float = 0.0
    skipped_steps: int = 0
    final_checkpoint: Optional[str] = None
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "losses": self.losses,
            "evals": self.evals,
            "wall_clock_sec": self.wall_clock_sec,
            "skipped_steps": self.skipped_steps,
            "final_checkpoint": self.final_checkpoint,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=2, sort_keys=True), encoding="utf-8"
        )

    def save_loss_csv(self, path: str | Path) -> None:
        lines = ["step,loss"]
        lines.extend(f"{i},{v}" for i, v in enumerate(self.losses))
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# -- schedule and optimizer --------------------------------------------------------


def lr_schedule(step: int, config: TrainConfig) -> float:
    """Linear warmup to base_lr, then linear decay to zero at config.steps."""
    if step <= 0 and config.warmup_steps > 0:
        return 0.0
    if step < config.warmup_steps:
        return config.base_lr * step / config.warmup_steps
    if config.steps == config.warmup_steps:
        return config.base_lr if step == config.warmup_steps else 0.0
    remaining = max(config.steps - step, 0)
    return config.base_lr * remaining / (config.steps - config.warmup_steps)


@dataclass
class AdamWState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def init(cls, params: dict[str, np.ndarray]) -> "AdamWState":
        return cls(
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
        )


def global_grad_norm(grads: dict[str, np.ndarray]) -> float:
    total = 0.0
    for g in grads.values():
        total += float((g.astype(np.float64) ** 2).sum())
    return float(np.sqrt(total))


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float) -> float:
    norm = global_grad_norm(grads)
    if max_norm > 0 and norm > max_norm:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return norm


def optimizer_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamWState,
    lr: float,
    weight_decay: float,
) -> bool:
    """Decoupled-weight-decay Adam update in place; returns False when skipped."""
    norm = global_grad_norm(grads)
    if not np.isfinite(norm):
        return False
    state.t += 1
    b1, b2 = ADAM_BETAS
    bc1 = 1.0 - b1**state.t
    bc2 = 1.0 - b2**state.t
    for name, p in params.items():
        g = grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        update = (m / bc1) / (np.sqrt(v / bc2) + ADAM_EPS)
        if weight_decay:
            update = update + weight_decay * p
        p -= p.dtype.type(lr) * update.astype(p.dtype)
    return True


# -- shared batching helpers ----------------------------------------------------------


def wrap_encode(text: str, tokenizer: Tokenizer, max_len: int) -> list[int]:
    ids = tokenizer.encode_ids(text)[: max_len - 2]
    return [tokenizer.cls_id] + ids + [tokenizer.sep_id]


def pad_batch(seqs: Sequence[Sequence[int]], pad_id: int) -> tuple[np.ndarray, np.ndarray]:
    width = max(len(s) for s in seqs)
    inputs = np.full((len(seqs), width), pad_id, dtype=np.int64)
    mask = np.zeros((len(seqs), width), dtype=np.int64)
    for i, s in enumerate(seqs):
        inputs[i, : len(s)] = s
        mask[i, : len(s)] = 1
    return inputs, mask


def _epoch_batches(n: int, batch_size: int, rng: np.random.Generator):
    """Yields index arrays forever: seeded shuffle per epoch, no replacement."""
    while True:
        order = rng.permutation(n)
        for start in range(0, n - batch_size + 1, batch_size):
            yield order[start : start + batch_size]


def _spawn_rngs(seed: int, n: int) -> list[np.random.Generator]:
    seqs = np.random.SeedSequence(seed).spawn(n)
    return [np.random.default_rng(s) for s in seqs]


def _maybe_checkpoint(params, config, train_config: TrainConfig, step: int, final: bool):
    if train_config.out_dir is None:
        return None
    out = Path(train_config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if final:
        path = out / f"{train_config.stage}-final.ckpt"
    elif train_config.checkpoint_every and step % train_config.checkpoint_every == 0:
        path = out / f"{train_config.stage}-step{step:06d}.ckpt"
    else:
        return None
    enc.save_checkpoint(path, params, config)
    return str(path)


# -- Stage I: denoising ---------------------------------------------------------------


def train_stage1(
    texts: Sequence[str],
    tokenizer: Tokenizer,
    train_config: TrainConfig,
    items: Optional[Sequence[Stage1Item]] = None,
) -> tuple[dict[str, np.ndarray], enc.EncoderConfig, TrainReport]:
    """Optimize the denoising objective over collated masked batches."""
    if train_config.stage != STAGE1:
        raise TrainerError("train_stage1 expects a stage1 config")
    if items is None:
        if not texts:
            raise TrainerError("empty training corpus")
        items = prepare_stage1_items(texts, tokenizer, train_config.max_len)
    if not items:
        raise TrainerError("empty training corpus")
    config = train_config.encoder_config(tokenizer)
    init_rng, order_rng, mask_rng, drop_rng = _spawn_rngs(train_config.seed, 4)
    params = enc.init_params(config, seed=int(init_rng.integers(2**31)))
    state = AdamWState.init(params)
    report = TrainReport(config=asdict(train_config))
    started = time.time()

    batch_size = min(train_config.batch_size, len(items))
    batches = _epoch_batches(len(items), batch_size, order_rng)
    for step in range(train_config.steps):
        batch_items = [items[i] for i in next(batches)]
        batch = collate_items(batch_items, tokenizer, train_config.mask, mask_rng)
        hidden, cache = enc.forward(
            params, config, batch.inputs, batch.attention_mask,
            train_mode=True, rng=drop_rng,
        )
        rows = hidden[batch.labels[:, 0], batch.labels[:, 1]]
        logits = enc.mlm_logits(params, rows)
        loss, d_logits = mlm_loss(logits, batch.labels[:, 2])
        d_rows, d_tok, d_bias = enc.mlm_logits_backward(params, rows, d_logits)
        d_hidden = np.zeros_like(hidden)
        d_hidden[batch.labels[:, 0], batch.labels[:, 1]] = d_rows
        grads = enc.backward(params, config, cache, d_hidden)
        grads["tok_emb"] += d_tok
        grads["mlm_bias"] += d_bias
        clip_gradients(grads, train_config.grad_clip)
        if not optimizer_step(params, grads, state, lr_schedule(step, train_config),
                              train_config.weight_decay):
            report.skipped_steps += 1
        report.losses.append(loss)
        _maybe_checkpoint(params, config, train_config, step, final=False)

    report.wall_clock_sec = time.time() - started
    report.final_checkpoint = _maybe_checkpoint(params, config, train_config, 0, final=True)
    return params, config, report


# -- Stage II: contrastive -------------------------------------------------------------


def train_stage2(
    pairs: Sequence[tuple[str, str]],
    tokenizer: Tokenizer,
    train_config: TrainConfig,
    init_checkpoint: Optional[str | Path] = None,
) -> tuple[dict[str, np.ndarray], enc.EncoderConfig, TrainReport]:
    """Optimize the contrastive objective over (summary, hard positive) pairs."""
    if train_config.stage == STAGE1:
        raise TrainerError("train_stage2 expects a stage2 config")
    if init_checkpoint is None and train_config.stage != STAGE2_SCRATCH:
        raise TrainerError("stage2 needs an init checkpoint (or stage2-scratch)")
    if len(pairs) < train_config.batch_size:
        raise TrainerError(
            f"{len(pairs)} pairs cannot fill batches of {train_config.batch_size}"
        )
    init_rng, order_rng, drop_rng = _spawn_rngs(train_config.seed, 3)
    if init_checkpoint is not None:
        params, config = enc.load_checkpoint(init_checkpoint)
        if config.vocab_size != tokenizer.vocab_size:
            raise TrainerError("checkpoint vocabulary does not match the tokenizer")
        config.dropout_rate = train_config.dropout_rate
    else:
        config = train_config.encoder_config(tokenizer)
        params = enc.init_params(config, seed=int(init_rng.integers(2**31)))
    state = AdamWState.init(params)
    report = TrainReport(config=asdict(train_config))
    started = time.time()

    anchor_seqs = [wrap_encode(s, tokenizer, train_config.max_len) for s, _ in pairs]
    positive_seqs = [wrap_encode(c, tokenizer, train_config.max_len) for _, c in pairs]
    batches = _epoch_batches(len(pairs), train_config.batch_size, order_rng)
    for step in range(train_config.steps):
        idx = next(batches)
        a_inputs, a_mask = pad_batch([anchor_seqs[i] for i in idx], tokenizer.pad_id)
        p_inputs, p_mask = pad_batch([positive_seqs[i] for i in idx], tokenizer.pad_id)
        a_hidden, a_cache = enc.forward(params, config, a_inputs, a_mask,
                                        train_mode=True, rng=drop_rng)
        p_hidden, p_cache = enc.forward(params, config, p_inputs, p_mask,
                                        train_mode=True, rng=drop_rng)
        anchors = enc.pool_mean(a_hidden, a_mask)
        positives = enc.pool_mean(p_hidden, p_mask)
        loss, d_anchors, d_positives = contrastive_loss(
            ContrastiveBatch(anchors, positives, train_config.temperature)
        )
        grads = enc.backward(params, config, a_cache,
                             enc.pool_mean_backward(d_anchors, a_mask))
        grads_p = enc.backward(params, config, p_cache,
                               enc.pool_mean_backward(d_positives, p_mask))
        for name in grads:
            grads[name] += grads_p[name]
        clip_gradients(grads, train_config.grad_clip)
        if not optimizer_step(params, grads, state, lr_schedule(step, train_config),
                              train_config.weight_decay):
            report.skipped_steps += 1
        report.losses.append(loss)
        if train_config.eval_every and (step + 1) % train_config.eval_every == 0:
            acc = _eval_in_batch(params, config, tokenizer, a_inputs, a_mask,
                                 p_inputs, p_mask)
            report.evals.append({"step": step + 1, "in_batch_accuracy": acc})
        _maybe_checkpoint(params, config, train_config, step, final=False)

    report.wall_clock_sec = time.time() - started
    report.final_checkpoint = _maybe_checkpoint(params, config, train_config, 0, final=True)
    return params, config, report


def _eval_in_batch(params, config, tokenizer, a_inputs, a_mask, p_inputs, p_mask) -> float:
    a_hidden, _ = enc.forward(params, config, a_inputs, a_mask, train_mode=False)
    p_hidden, _ = enc.forward(params, config, p_inputs, p_mask, train_mode=False)
    return in_batch_retrieval_accuracy(
        enc.pool_mean(a_hidden, a_mask), enc.pool_mean(p_hidden, p_mask)
    )
