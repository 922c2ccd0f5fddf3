"""Tests for mask selection, corruption schemes, DOBF mixing, and collation."""

import numpy as np
import pytest

from sageforge.denoiser import (
    DYNAMIC_RATE,
    SCHEME_80_10_10,
    SCHEME_DOBF,
    SCHEME_FULL,
    DenoiserError,
    MaskConfig,
    apply_80_10_10,
    apply_dobf_mask,
    apply_full_mask,
    collate_stage1,
    draw_dynamic_rate,
    non_special_token_ids,
    prepare_stage1_item,
    select_mask_positions,
)
from sageforge.obfuscator import DobfExample, build_mask_map, obfuscate
from sageforge.tokenizer import default_specials, train_bpe


@pytest.fixture(scope="module")
def tok():
    corpus = [
        "def add(a, b):\n    return a + b\n",
        "def scale(values, factor):\n    out = []\n    for v in values:\n"
        "        out.append(v * factor)\n    return out\n",
        "total = 0\n",
    ]
    return train_bpe(corpus, vocab_size=600, specials=default_specials(16))


def test_selection_count_rounding():
    rng = np.random.default_rng(0)
    assert len(select_mask_positions(list(range(20)), 0.15, rng)) == 3
    assert len(select_mask_positions(list(range(3)), 0.15, rng)) == 1
    assert len(select_mask_positions(list(range(10)), 0.15, rng)) == 2  # 1.5 rounds up
    assert select_mask_positions([], 0.15, rng) == []


def test_selection_deterministic_under_seed():
    a = select_mask_positions(list(range(50)), 0.3, np.random.default_rng(7))
    b = select_mask_positions(list(range(50)), 0.3, np.random.default_rng(7))
    assert a == b


def test_selection_rejects_bad_rate():
    with pytest.raises(DenoiserError):
        select_mask_positions([1, 2], 0.0, np.random.default_rng(0))
    with pytest.raises(DenoiserError):
        select_mask_positions([1, 2], 1.0, np.random.default_rng(0))


def test_dynamic_rate_range():
    rng = np.random.default_rng(1)
    rates = [draw_dynamic_rate(rng) for _ in range(200)]
    assert all(0.10 <= r <= 0.50 for r in rates)
    assert max(rates) > 0.4 and min(rates) < 0.2


def test_full_mask_basic():
    ex = apply_full_mask([10, 11, 12], [1], mask_id=1)
    assert ex.input_ids == [10, 1, 12]
    assert ex.labels == [(1, 11)]
    assert ex.scheme == SCHEME_FULL


def test_full_mask_empty_positions_identity():
    ex = apply_full_mask([10, 11], [], mask_id=1)
    assert ex.input_ids == [10, 11]
    assert ex.labels == []


def test_full_mask_all_positions():
    ex = apply_full_mask([10, 11, 12], [0, 1, 2], mask_id=1)
    assert ex.input_ids == [1, 1, 1]


def test_80_10_10_fractions():
    rng = np.random.default_rng(99)
    n = 10_000
    ids = list(range(1000, 1000 + n))
    positions = list(range(n))
    random_ids = np.arange(5000, 9000)
    ex = apply_80_10_10(ids, positions, rng, random_ids, mask_id=1)
    assert len(ex.labels) == n
    masked = sum(1 for i, v in enumerate(ex.input_ids) if v == 1)
    unchanged = sum(1 for i, v in enumerate(ex.input_ids) if v == ids[i])
    randomized = n - masked - unchanged
    assert abs(masked / n - 0.8) < 0.015
    assert abs(unchanged / n - 0.1) < 0.015
    assert abs(randomized / n - 0.1) < 0.015


def test_80_10_10_labels_keep_originals():
    rng = np.random.default_rng(5)
    ids = [100, 101, 102, 103]
    ex = apply_80_10_10(ids, [0, 1, 2, 3], rng, np.arange(200, 300), mask_id=1)
    assert [label for _, label in ex.labels] == ids
    # reconstructing from labels recovers the uncorrupted sequence
    rebuilt = list(ex.input_ids)
    for pos, label in ex.labels:
        rebuilt[pos] = label
    assert rebuilt == ids


def test_80_10_10_random_replacement_is_non_special():
    # A seed where at least one position draws the random branch.
    rng = np.random.default_rng(3)
    ids = [500] * 200
    random_ids = np.arange(600, 700)
    ex = apply_80_10_10(ids, list(range(200)), rng, random_ids, mask_id=1)
    randomized = [v for v in ex.input_ids if v != 1 and v != 500]
    assert randomized
    assert all(600 <= v < 700 for v in randomized)


def test_dobf_mask_carries_labels(tok):
    src = "def add(a, b):\n    return a + b\n"
    example = build_mask_map(obfuscate(src), tok)
    masked = apply_dobf_mask(example)
    assert masked.scheme == SCHEME_DOBF
    assert masked.labels == example.label_map
    for pos, _ in masked.labels:
        assert masked.input_ids[pos] == tok.mask_id


def test_prepare_item_dobf_available(tok):
    item = prepare_stage1_item("def add(a, b):\n    return a + b\n", tok, max_len=128)
    assert item.dobf_ids is not None
    assert item.plain_ids[0] == tok.cls_id and item.plain_ids[-1] == tok.sep_id
    for pos, _ in item.dobf_labels:
        assert item.dobf_ids[pos] == tok.mask_id


def test_prepare_item_no_identifiers(tok):
    item = prepare_stage1_item("1 + 2\n", tok, max_len=128)
    assert item.dobf_ids is None


def test_prepare_item_truncation_drops_tail_labels(tok):
    # identifiers sit near the end; a tiny max_len truncates them away
    src = "(" + " + ".join(str(n) for n in range(30)) + ")\n" + "def zz(q):\n    return q\n"
    full = prepare_stage1_item(src, tok, max_len=256)
    assert full.dobf_ids is not None
    tiny = prepare_stage1_item(src, tok, max_len=8)
    assert tiny.dobf_ids is None  # all labels truncated -> DOBF view discarded
    assert len(tiny.plain_ids) == 8


def test_collate_scheme_mix(tok):
    texts = ["def f%d(a):\n    return a + %d\n" % (i, i) for i in range(1000)]
    config = MaskConfig(scheme=SCHEME_FULL, rate=0.15, dobf_mix=0.5, max_len=64)
    batch = collate_stage1(texts, tok, config, np.random.default_rng(123))
    frac = sum(1 for s in batch.schemes if s == SCHEME_DOBF) / len(batch.schemes)
    assert 0.45 <= frac <= 0.55


def test_collate_identifier_free_always_random(tok):
    texts = ["1 + 2\n"] * 50
    config = MaskConfig(scheme=SCHEME_FULL, rate=0.15, dobf_mix=0.5, max_len=64)
    batch = collate_stage1(texts, tok, config, np.random.default_rng(5))
    assert all(s == SCHEME_FULL for s in batch.schemes)


def test_collate_padding_and_mask(tok):
    texts = ["x = 1\n", "def add(a, b):\n    return a + b\n"] * 2
    config = MaskConfig(scheme=SCHEME_FULL, rate=0.15, dobf_mix=0.0, max_len=64)
    batch = collate_stage1(texts, tok, config, np.random.default_rng(2))
    widths = [len(prepare_stage1_item(t, tok, 64).plain_ids) for t in texts]
    assert batch.inputs.shape[1] == max(widths)
    assert np.array_equal(batch.attention_mask == 0, batch.inputs == tok.pad_id)
    for row, pos, _ in batch.labels:
        assert batch.attention_mask[row, pos] == 1
        assert batch.inputs[row, pos] == tok.mask_id  # full-mask scheme


def test_collate_deterministic(tok):
    texts = ["def f%d(a):\n    return a * %d\n" % (i, i) for i in range(20)]
    config = MaskConfig(scheme=SCHEME_80_10_10, rate=DYNAMIC_RATE, dobf_mix=0.5, max_len=64)
    b1 = collate_stage1(texts, tok, config, np.random.default_rng(11))
    b2 = collate_stage1(texts, tok, config, np.random.default_rng(11))
    assert np.array_equal(b1.inputs, b2.inputs)
    assert np.array_equal(b1.labels, b2.labels)
    assert b1.schemes == b2.schemes


def test_full_mask_label_recoverability_through_collate(tok):
    texts = ["def g(a, b):\n    s = a + b\n    return s\n"]
    config = MaskConfig(scheme=SCHEME_FULL, rate=0.3, dobf_mix=0.0, max_len=64)
    batch = collate_stage1(texts, tok, config, np.random.default_rng(4))
    item = prepare_stage1_item(texts[0], tok, 64)
    rebuilt = list(batch.inputs[0][: len(item.plain_ids)])
    for row, pos, label in batch.labels:
        if row == 0:
            rebuilt[pos] = label
    assert rebuilt == item.plain_ids


def test_labels_never_on_specials(tok):
    texts = ["def f(a):\n    return a\n"] * 30
    config = MaskConfig(scheme=SCHEME_FULL, rate=0.9, dobf_mix=0.5, max_len=32)
    batch = collate_stage1(texts, tok, config, np.random.default_rng(8))
    for row, pos, _ in batch.labels:
        assert pos != 0  # [CLS]
        assert batch.inputs[row, pos] != tok.pad_id
        assert batch.inputs[row, pos] != tok.sep_id


def test_non_special_token_ids_excludes_specials(tok):
    ids = non_special_token_ids(tok)
    assert ids.min() == len(tok.specials)
    assert tok.mask_id not in ids
