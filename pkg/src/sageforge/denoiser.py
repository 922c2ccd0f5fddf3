"""Stage I corruption: mask-position selection, Full Mask, the 80-10-10
convention, dynamic masking rates, deobfuscation mixing, and batch collation.

Per example the collator flips a fair coin between deobfuscation (DOBF) and
random masking. DOBF corrupts nothing beyond the identifier placeholders, so
natural-language tokens in comments and docstrings stay visible; random
masking may select any non-special position. Examples whose obfuscation
yields no identifiers, whose placeholders exceed the tokenizer's special
budget, or whose DOBF labels are all truncated away fall back to random
masking so they still contribute signal.

Sequences are wrapped as [CLS] ... [SEP], tail-truncated to the configured
maximum length, and padded per batch with [PAD]; labels never sit on special
positions.
"""

from __future__ import annotations

import textwrap
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .obfuscator import DobfExample, ObfuscationError, build_mask_map, obfuscate
from .tokenizer import Tokenizer

SCHEME_FULL = "full"
SCHEME_80_10_10 = "80-10-10"
SCHEME_DOBF = "dobf"
DYNAMIC_RATE = "dynamic"
DYNAMIC_RANGE = (0.10, 0.50)
DEFAULT_MASK_RATE = 0.15


class DenoiserError(ValueError):
    pass


@dataclass
class MaskConfig:
    scheme: str = SCHEME_FULL
    rate: float | str = DEFAULT_MASK_RATE
    dobf_mix: float = 0.5
    max_len: int = 256

    def __post_init__(self):
        if self.scheme not in (SCHEME_FULL, SCHEME_80_10_10):
            raise DenoiserError(f"unknown masking scheme {self.scheme!r}")
        if self.rate != DYNAMIC_RATE and not 0.0 < float(self.rate) < 1.0:
            raise DenoiserError(f"masking rate {self.rate!r} outside (0, 1)")
        if not 0.0 <= self.dobf_mix <= 1.0:
            raise DenoiserError("dobf_mix must lie in [0, 1]")


@dataclass
class MaskedExample:
    input_ids: list[int]
    labels: list[tuple[int, int]]  # (position, original id), positions increasing
    scheme: str


@dataclass
class Stage1Batch:
    inputs: np.ndarray  # (B, T) int64, padded
    attention_mask: np.ndarray  # (B, T) int64, zero exactly on padding
    labels: np.ndarray  # (n, 3) rows of (batch_row, position, original id)
    schemes: list[str] = field(default_factory=list)


def select_mask_positions(
    maskable: Sequence[int], rate: float, rng: np.random.Generator
) -> list[int]:
    """Uniform sample without replacement of max(1, round(rate * n)) positions."""
    if not 0.0 < rate < 1.0:
        raise DenoiserError(f"masking rate {rate} outside (0, 1)")
    n = len(maskable)
    if n == 0:
        return []
    count = max(1, int(np.floor(rate * n + 0.5)))  # round half up, floor 1
    picked = rng.choice(np.asarray(maskable), size=count, replace=False)
    return sorted(int(p) for p in picked)


def draw_dynamic_rate(rng: np.random.Generator) -> float:
    lo, hi = DYNAMIC_RANGE
    return float(rng.uniform(lo, hi))


def apply_full_mask(
    ids: Sequence[int], positions: Sequence[int], mask_id: int
) -> MaskedExample:
    out = list(ids)
    labels = []
    for pos in sorted(positions):
        labels.append((pos, out[pos]))
        out[pos] = mask_id
    return MaskedExample(out, labels, SCHEME_FULL)


def apply_80_10_10(
    ids: Sequence[int],
    positions: Sequence[int],
    rng: np.random.Generator,
    random_token_ids: np.ndarray,
    mask_id: int,
) -> MaskedExample:
    """80% [MASK], 10% unchanged, 10% random non-special token."""
    out = list(ids)
    labels = []
    for pos in sorted(positions):
        labels.append((pos, out[pos]))
        u = rng.random()
        if u < 0.8:
            out[pos] = mask_id
        elif u < 0.9:
            pass  # left unchanged
        else:
            out[pos] = int(random_token_ids[rng.integers(0, len(random_token_ids))])
    return MaskedExample(out, labels, SCHEME_80_10_10)


def apply_dobf_mask(example: DobfExample) -> MaskedExample:
    """Deobfuscation needs no further corruption; positions/labels carry over."""
    return MaskedExample(list(example.input_token_ids), list(example.label_map), SCHEME_DOBF)


# -- sequence assembly -----------------------------------------------------------


@dataclass
class Stage1Item:
    """Per-function cache: tokenized ids and, when available, the DOBF view."""

    plain_ids: list[int]  # [CLS] ... [SEP], truncated
    maskable: list[int]  # positions eligible for random masking
    dobf_ids: Optional[list[int]] = None
    dobf_labels: Optional[list[tuple[int, int]]] = None


def _wrap_truncate(ids: list[int], tokenizer: Tokenizer, max_len: int) -> list[int]:
    body = ids[: max_len - 2]
    return [tokenizer.cls_id] + body + [tokenizer.sep_id]


def prepare_stage1_item(text: str, tokenizer: Tokenizer, max_len: int) -> Stage1Item:
    source = textwrap.dedent(text)
    ids = tokenizer.encode_ids(source)
    plain = _wrap_truncate(ids, tokenizer, max_len)
    maskable = [i for i, t in enumerate(plain) if not tokenizer.is_special(t)]
    item = Stage1Item(plain_ids=plain, maskable=maskable)
    try:
        result = obfuscate(source)
        if result.identifier_map:
            dobf = build_mask_map(result, tokenizer)
            wrapped = _wrap_truncate(dobf.input_token_ids, tokenizer, max_len)
            labels = [
                (pos + 1, label)
                for pos, label in dobf.label_map
                if pos + 1 < len(wrapped) - 1  # dropped when truncated away
            ]
            if labels:
                item.dobf_ids = wrapped
                item.dobf_labels = labels
    except ObfuscationError:
        pass  # placeholder budget exceeded; random masking still applies
    return item


def prepare_stage1_items(
    texts: Sequence[str], tokenizer: Tokenizer, max_len: int
) -> list[Stage1Item]:
    return [prepare_stage1_item(t, tokenizer, max_len) for t in texts]


def mask_item(
    item: Stage1Item,
    tokenizer: Tokenizer,
    config: MaskConfig,
    rng: np.random.Generator,
    random_token_ids: np.ndarray,
) -> Optional[MaskedExample]:
    """Draw the scheme for one item and corrupt it; None when nothing is maskable."""
    use_dobf = rng.random() < config.dobf_mix
    if use_dobf and item.dobf_ids is not None:
        # dobf_ids already carry [MASK] at every label position
        return MaskedExample(list(item.dobf_ids), list(item.dobf_labels), SCHEME_DOBF)
    if not item.maskable:
        return None
    rate = draw_dynamic_rate(rng) if config.rate == DYNAMIC_RATE else float(config.rate)
    positions = select_mask_positions(item.maskable, rate, rng)
    if config.scheme == SCHEME_80_10_10:
        return apply_80_10_10(item.plain_ids, positions, rng, random_token_ids,
                              tokenizer.mask_id)
    return apply_full_mask(item.plain_ids, positions, tokenizer.mask_id)


def non_special_token_ids(tokenizer: Tokenizer) -> np.ndarray:
    return np.arange(len(tokenizer.specials), tokenizer.vocab_size, dtype=np.int64)


def collate_items(
    items: Sequence[Stage1Item],
    tokenizer: Tokenizer,
    config: MaskConfig,
    rng: np.random.Generator,
) -> Stage1Batch:
    random_ids = non_special_token_ids(tokenizer)
    masked: list[MaskedExample] = []
    for item in items:
        ex = mask_item(item, tokenizer, config, rng, random_ids)
        if ex is not None:
            masked.append(ex)
    if not masked:
        raise DenoiserError("batch has no maskable examples")
    width = max(len(ex.input_ids) for ex in masked)
    inputs = np.full((len(masked), width), tokenizer.pad_id, dtype=np.int64)
    attention = np.zeros((len(masked), width), dtype=np.int64)
    labels: list[tuple[int, int, int]] = []
    schemes: list[str] = []
    for row, ex in enumerate(masked):
        n = len(ex.input_ids)
        inputs[row, :n] = ex.input_ids
        attention[row, :n] = 1
        labels.extend((row, pos, label) for pos, label in ex.labels)
        schemes.append(ex.scheme)
    return Stage1Batch(inputs, attention,
                       np.asarray(labels, dtype=np.int64).reshape(-1, 3), schemes)


def collate_stage1(
    texts: Sequence[str],
    tokenizer: Tokenizer,
    config: MaskConfig,
    rng: np.random.Generator,
) -> Stage1Batch:
    """One-shot collation from raw function sources (tokenizes internally)."""
    items = prepare_stage1_items(texts, tokenizer, config.max_len)
    return collate_items(items, tokenizer, config, rng)
