"""Tests for identifier obfuscation, byte-exact deobfuscation, and the
mask-position/label alignment."""

import pytest

from sageforge.obfuscator import (
    ObfuscationError,
    build_mask_map,
    deobfuscate,
    obfuscate,
)
from sageforge.tokenizer import default_specials, train_bpe

from test_syntax import POSTORDER_LISTING

EXPECTED_POSTORDER_MAP = {
    "c_0": "Node",
    "f_0": "__init__",
    "f_1": "printPostorder",
    "v_0": "self",
    "v_1": "v",
    "v_2": "data",
    "v_3": "left",
    "v_4": "right",
    "v_5": "node",
}


def test_postorder_listing_identifier_map():
    result = obfuscate(POSTORDER_LISTING)
    assert result.identifier_map == EXPECTED_POSTORDER_MAP


def test_postorder_listing_obfuscated_text():
    result = obfuscate(POSTORDER_LISTING)
    text = result.obfuscated_text
    assert "class c_0:" in text
    assert "def f_0(v_0, v_1):" in text
    assert "v_0.v_2 = v_1" in text
    assert "def f_1(v_5):" in text
    assert "f_1(v_5.v_3)" in text
    assert "f_1(v_5.v_4)" in text
    assert "print(v_5.v_2, end=' ')" in text
    # comments are untouched
    assert "# Function to print postorder traversal" in text
    assert "# First recur on the left subtree" in text


def test_builtins_left_intact():
    result = obfuscate("def f(x):\n    print(x)\n")
    assert "print(" in result.obfuscated_text
    assert "print" not in result.identifier_map.values()


def test_no_identifiers_is_identity():
    result = obfuscate("1 + 2\n")
    assert result.obfuscated_text == "1 + 2\n"
    assert result.identifier_map == {}
    assert result.placeholder_spans == []


def test_imported_names_left_intact():
    src = "import os\n\ndef f(path):\n    return os.stat(path)\n"
    result = obfuscate(src)
    assert "os.stat" in result.obfuscated_text
    assert "os" not in result.identifier_map.values()


def test_keyword_argument_names_left_intact():
    src = "def f(values):\n    print(values, sep=', ')\n"
    result = obfuscate(src)
    assert "sep=" in result.obfuscated_text


def test_same_identifier_same_placeholder():
    src = "def f(a):\n    b = a + a\n    return b + a\n"
    result = obfuscate(src)
    data = result.obfuscated_text
    originals = {}
    for ph, (s, e) in result.placeholder_spans:
        assert data.encode("utf-8")[s:e].decode("utf-8") == ph
        originals.setdefault(ph, result.identifier_map[ph])
    # 'a' appears 4 times, all mapped to one placeholder
    a_spans = [ph for ph, _ in result.placeholder_spans if result.identifier_map[ph] == "a"]
    assert len(a_spans) == 4
    assert len(set(a_spans)) == 1


def test_round_trip_byte_exact():
    sources = [
        POSTORDER_LISTING,
        "def f(x):\n    return x\n",
        "class A:\n    def m(self):\n        return self\n",
        "def outer(a):\n    def inner(b):\n        return b * 2\n    return inner(a)\n",
        "def g():\n    try:\n        pass\n    except ValueError as err:\n        return err\n",
        "total = 0\nfor item in [1, 2]:\n    total += item\n",
        "def h(xs):\n    return [x * x for x in xs]\n",
        "x = 'π literal'\ndef f2(é):\n    return é\n",
    ]
    for src in sources:
        result = obfuscate(src)
        assert deobfuscate(result) == src


def test_collision_with_literal_placeholder_name():
    src = "def f(c_0):\n    return c_0 + 1\n"
    result = obfuscate(src)
    assert deobfuscate(result) == src
    assert "c_0" in result.identifier_map.values()


def test_parse_error_leaves_identifiers_intact():
    result = obfuscate("def f(: ) x")
    assert result.obfuscated_text == "def f(: ) x"
    assert result.identifier_map == {}


def test_comments_and_docstrings_byte_identical():
    src = (
        'def f(a):\n    """Docstring mentioning a and f."""\n'
        "    # comment about a\n    return a\n"
    )
    result = obfuscate(src)
    assert '"""Docstring mentioning a and f."""' in result.obfuscated_text
    assert "# comment about a" in result.obfuscated_text


def test_deobfuscate_rejects_corrupt_spans():
    result = obfuscate("def f(a):\n    return a\n")
    result.placeholder_spans[0] = (result.placeholder_spans[0][0], (0, 3))
    with pytest.raises(ObfuscationError):
        deobfuscate(result)


@pytest.fixture(scope="module")
def word_tokenizer():
    # 'function' and 'name' become single tokens; '_' stays a lone byte.
    corpus = ["function"] * 30 + ["name"] * 30
    return train_bpe(corpus, vocab_size=256 + len(default_specials(8)) + 16,
                     specials=default_specials(8))


def test_mask_map_multi_subword_identifier(word_tokenizer):
    tok = word_tokenizer
    assert len(tok.encode_ids("function_name")) == 3
    src = "def function_name():\n    return 1\n"
    result = obfuscate(src)
    example = build_mask_map(result, tok)
    assert len(example.label_map) == 3
    positions = [p for p, _ in example.label_map]
    assert positions == sorted(positions)
    for p, _ in example.label_map:
        assert example.input_token_ids[p] == tok.mask_id
    label_ids = [l for _, l in example.label_map]
    assert tok.decode(label_ids) == "function_name"


def test_mask_map_single_subword(word_tokenizer):
    tok = word_tokenizer
    src = "def g(x):\n    return x\n"
    result = obfuscate(src)
    example = build_mask_map(result, tok)
    # g, x, x: three placeholder occurrences, all single-byte identifiers
    assert example.placeholder_count == 3
    assert len(example.label_map) == 3


def test_mask_map_substitution_recovers_original(word_tokenizer):
    tok = word_tokenizer
    src = "def function_name(name):\n    return name\n"
    result = obfuscate(src)
    example = build_mask_map(result, tok)
    ids = list(example.input_token_ids)
    for pos, label in example.label_map:
        ids[pos] = label
    assert tok.decode(ids) == src


def test_mask_map_total_positions(word_tokenizer):
    tok = word_tokenizer
    src = "def function_name(v):\n    return function_name(v)\n"
    result = obfuscate(src)
    example = build_mask_map(result, tok)
    expected = sum(
        len(tok.encode_ids(result.identifier_map[ph]))
        for ph, _ in result.placeholder_spans
    )
    assert len(example.label_map) == expected


def test_mask_map_requires_placeholder_specials():
    tok = train_bpe(["abc"] * 4, vocab_size=266, specials=["[PAD]", "[MASK]"])
    result = obfuscate("def f(a):\n    return a\n")
    with pytest.raises(ObfuscationError):
        build_mask_map(result, tok)
