"""Identifier obfuscation and the mask-token/label alignment for deobfuscation
training.

``obfuscate`` renames identifiers that are defined inside the given unit
(class names -> c_i, function names -> f_i, variables/arguments/assigned
attributes -> v_i), numbered by first textual occurrence. Builtins, imported
names, and keyword-argument names stay intact, as do comments and docstrings.
The result carries a span-indexed placeholder map, so ``deobfuscate`` restores
the original bytes exactly even when the source already contains literal
``c_0``-style names.

``build_mask_map`` turns an obfuscation result into an encoder training
example: each placeholder occupies k [MASK] positions, where k is the subword
length of the original identifier encoded in isolation, and the label map
pairs every mask position with its identifier subword. Boundary-aware
encoding keeps neighbouring punctuation out of the identifier subwords, so
the alignment is one-to-one by construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

from .syntax import SyntaxTree, index_identifiers, parse
from .tokenizer import Tokenizer

Span = tuple[int, int]


class ObfuscationError(ValueError):
    pass


@dataclass
class ObfuscationResult:
    obfuscated_text: str
    identifier_map: dict[str, str]  # placeholder -> original identifier
    placeholder_spans: list[tuple[str, Span]]  # spans in obfuscated_text
    original_text: str = ""

    def to_json_dict(self) -> dict:
        return {
            "identifier_map": dict(self.identifier_map),
            "placeholder_spans": [
                {"placeholder": ph, "start": s, "end": e}
                for ph, (s, e) in self.placeholder_spans
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), ensure_ascii=False, indent=2)


@dataclass
class DobfExample:
    """Masked input ids plus the mask-position -> identifier-subword labels."""

    input_token_ids: list[int]
    label_map: list[tuple[int, int]]
    placeholder_count: int = 0


def _family_for(name: str, unit) -> Optional[str]:
    if name in unit.imported_names:
        return None
    if name in unit.defined_classes:
        return "c"
    if name in unit.defined_functions:
        return "f"
    if name in unit.defined_variables or name in unit.defined_attributes:
        return "v"
    return None


def obfuscate(source: str, tree: SyntaxTree | None = None) -> ObfuscationResult:
    """Rename unit-defined identifiers to placeholder tokens.

    Identifiers covered by parse-error regions are left intact; comments and
    docstrings are byte-identical in the output.
    """
    if tree is None:
        tree = parse(source)
    unit = index_identifiers(tree)

    def in_error_region(span: Span) -> bool:
        return any(s <= span[0] < e for s, e in tree.error_spans)

    replacements: list[tuple[Span, str]] = []  # (original span, placeholder)
    identifier_map: dict[str, str] = {}
    counters = {"c": 0, "f": 0, "v": 0}
    assigned: dict[tuple[str, str], str] = {}
    prev_end = -1
    for occ in unit.occurrences:
        if occ.span[0] < prev_end:
            continue  # overlapping duplicate record
        if occ.context in ("kwarg", "import") or in_error_region(occ.span):
            continue
        family = _family_for(occ.name, unit)
        if family is None:
            continue
        if occ.context == "attribute" and occ.name not in (
            unit.defined_attributes | unit.defined_functions | unit.defined_classes
        ):
            continue  # attribute of some external object that shadows a local name
        key = (family, occ.name)
        placeholder = assigned.get(key)
        if placeholder is None:
            placeholder = f"{family}_{counters[family]}"
            counters[family] += 1
            assigned[key] = placeholder
            identifier_map[placeholder] = occ.name
        replacements.append((occ.span, placeholder))
        prev_end = occ.span[1]

    data = source.encode("utf-8")
    parts: list[bytes] = []
    placeholder_spans: list[tuple[str, Span]] = []
    cursor = 0
    out_pos = 0
    for (start, end), placeholder in replacements:
        parts.append(data[cursor:start])
        out_pos += start - cursor
        ph_bytes = placeholder.encode("utf-8")
        parts.append(ph_bytes)
        placeholder_spans.append((placeholder, (out_pos, out_pos + len(ph_bytes))))
        out_pos += len(ph_bytes)
        cursor = end
    parts.append(data[cursor:])
    obfuscated = b"".join(parts).decode("utf-8")
    return ObfuscationResult(obfuscated, identifier_map, placeholder_spans, source)


def deobfuscate(result: ObfuscationResult) -> str:
    """Invert an obfuscation by splicing original identifiers back in."""
    data = result.obfuscated_text.encode("utf-8")
    parts: list[bytes] = []
    cursor = 0
    for placeholder, (start, end) in result.placeholder_spans:
        if start < cursor or end > len(data):
            raise ObfuscationError(f"placeholder span ({start}, {end}) out of order")
        if data[start:end] != placeholder.encode("utf-8"):
            raise ObfuscationError(
                f"text at ({start}, {end}) is not placeholder {placeholder!r}"
            )
        original = result.identifier_map.get(placeholder)
        if original is None:
            raise ObfuscationError(f"placeholder {placeholder!r} missing from map")
        parts.append(data[cursor:start])
        parts.append(original.encode("utf-8"))
        cursor = end
    parts.append(data[cursor:])
    return b"".join(parts).decode("utf-8")


def build_mask_map(result: ObfuscationResult, tokenizer: Tokenizer) -> DobfExample:
    """Tokenize obfuscated code and expand each placeholder into aligned masks."""
    spans = [span for _, span in result.placeholder_spans]
    span_to_placeholder = {span: ph for ph, span in result.placeholder_spans}
    encoded = tokenizer.encode_with_boundaries(result.obfuscated_text, spans)
    ids: list[int] = []
    labels: list[tuple[int, int]] = []
    expanded = 0
    for tid, span in encoded:
        placeholder = span_to_placeholder.get(span)
        if placeholder is None:
            ids.append(tid)
            continue
        if tokenizer.special_ids.get(placeholder) != tid:
            raise ObfuscationError(
                f"placeholder {placeholder!r} is not a special token of this tokenizer"
            )
        subwords = tokenizer.encode_ids(result.identifier_map[placeholder])
        if not subwords:
            raise ObfuscationError(
                f"identifier {result.identifier_map[placeholder]!r} encodes to nothing"
            )
        for sub in subwords:
            labels.append((len(ids), sub))
            ids.append(tokenizer.mask_id)
        expanded += 1
    if expanded != len(result.placeholder_spans):
        raise ObfuscationError(
            f"expanded {expanded} placeholders, expected {len(result.placeholder_spans)}"
        )
    return DobfExample(ids, labels, placeholder_count=expanded)
