"""Trainable byte-level BPE tokenizer with special tokens and span-aware encoding.

The tokenizer operates on UTF-8 bytes: the base alphabet is all 256 byte
values, so ``decode(encode(s)) == s`` holds for arbitrary text without an
unknown-token escape hatch. Whitespace is ordinary data (indentation is
signal in code) and merges may cross it.

Special tokens ([PAD], [MASK], [CLS], [SEP] and the c_i / f_i / v_i
identifier placeholders) own dedicated ids. Plain ``encode`` never emits
them; ``encode_with_boundaries`` emits a special id when a boundary range
covers exactly the special's text, which is how placeholder tokens survive
tokenization of obfuscated code.

Id layout: specials first, then the 256 byte tokens, then merge tokens in
learned order. Merges are stored as (left_id, right_id) pairs, so two merge
rules that happen to produce the same byte string still get distinct ids.
"""

from __future__ import annotations

import heapq
import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

PAD = "[PAD]"
MASK = "[MASK]"
CLS = "[CLS]"
SEP = "[SEP]"

FORMAT_VERSION = "bpe-v1"

# Placeholder families for identifier obfuscation; see default_specials().
PLACEHOLDER_FAMILIES = ("c", "f", "v")
DEFAULT_PLACEHOLDER_LIMIT = 100
DEFAULT_VOCAB_SIZE = 8192


class TokenizerError(ValueError):
    pass


def placeholder_name(family: str, index: int) -> str:
    return f"{family}_{index}"


def default_specials(placeholder_limit: int = DEFAULT_PLACEHOLDER_LIMIT) -> list[str]:
    specials = [PAD, MASK, CLS, SEP]
    for family in PLACEHOLDER_FAMILIES:
        specials.extend(placeholder_name(family, i) for i in range(placeholder_limit))
    return specials


@dataclass
class Tokenizer:
    """A trained BPE tokenizer. Immutable after construction."""

    specials: list[str]
    merges: list[tuple[int, int]]  # (left_id, right_id) in learned order
    seed: int = 0
    # Derived tables, built in __post_init__.
    id_to_bytes: list[bytes] = field(init=False, repr=False)
    special_ids: dict[str, int] = field(init=False, repr=False)
    _ranks: dict[tuple[int, int], tuple[int, int]] = field(init=False, repr=False)

    def __post_init__(self):
        n_special = len(self.specials)
        if len(set(self.specials)) != n_special:
            raise TokenizerError("duplicate special tokens")
        self.special_ids = {s: i for i, s in enumerate(self.specials)}
        table: list[bytes] = [s.encode("utf-8") for s in self.specials]
        table.extend(bytes([b]) for b in range(256))
        ranks: dict[tuple[int, int], tuple[int, int]] = {}
        for rank, (a, b) in enumerate(self.merges):
            new_id = n_special + 256 + rank
            if a >= new_id or b >= new_id or a < n_special or b < n_special:
                raise TokenizerError(f"merge {rank} references invalid ids ({a}, {b})")
            table.append(table[a] + table[b])
            ranks[(a, b)] = (rank, new_id)
        self.id_to_bytes = table
        self._ranks = ranks

    # -- basic properties ---------------------------------------------------

    @property
    def vocab_size(self) -> int:
        return len(self.id_to_bytes)

    @property
    def pad_id(self) -> int:
        return self.special_ids[PAD]

    @property
    def mask_id(self) -> int:
        return self.special_ids[MASK]

    @property
    def cls_id(self) -> int:
        return self.special_ids[CLS]

    @property
    def sep_id(self) -> int:
        return self.special_ids[SEP]

    def is_special(self, token_id: int) -> bool:
        return 0 <= token_id < len(self.specials)

    # -- encoding -----------------------------------------------------------

    def _bpe_ids(self, data: bytes) -> list[int]:
        """Apply merge rules to a byte segment, lowest rank first."""
        n_special = len(self.specials)
        word = [n_special + b for b in data]
        if len(word) < 2:
            return word
        ranks = self._ranks
        while True:
            best = None
            for pair in zip(word, word[1:]):
                r = ranks.get(pair)
                if r is not None and (best is None or r[0] < best[1][0]):
                    best = (pair, r)
            if best is None:
                return word
            (a, b), (_, new_id) = best
            out = []
            i = 0
            while i < len(word):
                if i + 1 < len(word) and word[i] == a and word[i + 1] == b:
                    out.append(new_id)
                    i += 2
                else:
                    out.append(word[i])
                    i += 1
            word = out
            if len(word) < 2:
                return word

    def _encode_segment(self, data: bytes, offset: int) -> list[tuple[int, tuple[int, int]]]:
        ids = self._bpe_ids(data)
        out = []
        pos = offset
        for tid in ids:
            width = len(self.id_to_bytes[tid])
            out.append((tid, (pos, pos + width)))
            pos += width
        return out

    def encode(self, s: str) -> list[tuple[int, tuple[int, int]]]:
        """Encode text to (token id, byte span) pairs; spans tile the UTF-8 bytes of s."""
        return self._encode_segment(s.encode("utf-8"), 0)

    def encode_ids(self, s: str) -> list[int]:
        return self._bpe_ids(s.encode("utf-8"))

    def encode_with_boundaries(
        self, s: str, boundaries: Sequence[tuple[int, int]]
    ) -> list[tuple[int, tuple[int, int]]]:
        """Encode with hard token boundaries at the given byte ranges.

        No output span straddles a boundary edge; each boundary's interior is
        encoded independently. A boundary whose covered text equals a special
        token yields that special's id as a single token.
        """
        data = s.encode("utf-8")
        bounds = sorted(boundaries)
        prev_end = 0
        for start, end in bounds:
            if start < prev_end:
                raise TokenizerError(f"overlapping boundaries at {start}")
            if start > end or end > len(data):
                raise TokenizerError(f"boundary ({start}, {end}) outside text")
            prev_end = end
        out: list[tuple[int, tuple[int, int]]] = []
        cursor = 0
        for start, end in bounds:
            if cursor < start:
                out.extend(self._encode_segment(data[cursor:start], cursor))
            segment = data[start:end]
            special = self.special_ids.get(segment.decode("utf-8", errors="replace"))
            if special is not None and self.id_to_bytes[special] == segment:
                out.append((special, (start, end)))
            elif segment:
                out.extend(self._encode_segment(segment, start))
            cursor = end
        if cursor < len(data):
            out.extend(self._encode_segment(data[cursor:], cursor))
        return out

    def decode(self, ids: Iterable[int]) -> str:
        chunks = []
        for tid in ids:
            if not 0 <= tid < len(self.id_to_bytes):
                raise TokenizerError(f"unknown token id {tid}")
            chunks.append(self.id_to_bytes[tid])
        return b"".join(chunks).decode("utf-8", errors="replace")

    # -- persistence ----------------------------------------------------------

    def to_json(self) -> str:
        vocab = {str(i): b.decode("latin-1") for i, b in enumerate(self.id_to_bytes)}
        doc = {
            "version": FORMAT_VERSION,
            "seed": self.seed,
            "specials": self.specials,
            "merges": [list(m) for m in self.merges],
            "vocab": vocab,
        }
        return json.dumps(doc, ensure_ascii=False, sort_keys=False)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def from_json(cls, text: str) -> "Tokenizer":
        doc = json.loads(text)
        if doc.get("version") != FORMAT_VERSION:
            raise TokenizerError(f"unsupported tokenizer format {doc.get('version')!r}")
        tok = cls(
            specials=list(doc["specials"]),
            merges=[tuple(m) for m in doc["merges"]],
            seed=int(doc.get("seed", 0)),
        )
        # Cross-check the stored vocab against the reconstruction.
        stored = {int(i): s.encode("latin-1") for i, s in doc["vocab"].items()}
        for i, b in enumerate(tok.id_to_bytes):
            if stored.get(i) != b:
                raise TokenizerError(f"vocab entry {i} does not match merge table")
        return tok

    @classmethod
    def load(cls, path: str | Path) -> "Tokenizer":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def train_bpe(
    corpus: Iterable[str],
    vocab_size: int = DEFAULT_VOCAB_SIZE,
    seed: int = 0,
    specials: Sequence[str] | None = None,
) -> Tokenizer:
    """Learn BPE merges from a text corpus.

    Deterministic given corpus order: each step merges the highest-frequency
    adjacent pair, ties broken by lexicographically smallest (left bytes,
    right bytes). The seed is recorded for provenance; the procedure itself
    draws no randomness.
    """
    specials = list(specials) if specials is not None else default_specials()
    n_special = len(specials)
    n_merges = vocab_size - 256 - n_special
    if n_merges <= 0:
        raise TokenizerError(
            f"vocab_size {vocab_size} must exceed 256 + {n_special} specials"
        )

    # Sequences as singly-linked token lists over byte ids.
    seqs: list[list[int]] = []
    nxt: list[list[int]] = []
    prv: list[list[int]] = []
    for text in corpus:
        data = text.encode("utf-8")
        if not data:
            continue
        ids = [n_special + b for b in data]
        n = len(ids)
        seqs.append(ids)
        nxt.append(list(range(1, n)) + [-1])
        prv.append([-1] + list(range(n - 1)))

    id_bytes: list[bytes] = [s.encode("utf-8") for s in specials]
    id_bytes.extend(bytes([b]) for b in range(256))

    counts: Counter[tuple[int, int]] = Counter()
    positions: dict[tuple[int, int], set[tuple[int, int]]] = {}
    for si, ids in enumerate(seqs):
        for i in range(len(ids) - 1):
            pair = (ids[i], ids[i + 1])
            counts[pair] += 1
            positions.setdefault(pair, set()).add((si, i))

    heap: list[tuple[int, bytes, bytes, tuple[int, int]]] = [
        (-c, id_bytes[p[0]], id_bytes[p[1]], p) for p, c in counts.items()
    ]
    heapq.heapify(heap)

    def push(pair: tuple[int, int]) -> None:
        c = counts.get(pair, 0)
        if c > 0:
            heapq.heappush(heap, (-c, id_bytes[pair[0]], id_bytes[pair[1]], pair))

    merges: list[tuple[int, int]] = []
    while len(merges) < n_merges and heap:
        neg, _, _, pair = heapq.heappop(heap)
        if counts.get(pair, 0) != -neg:
            continue  # stale entry
        a, b = pair
        new_id = len(id_bytes)
        id_bytes.append(id_bytes[a] + id_bytes[b])
        merges.append(pair)

        touched: set[tuple[int, int]] = set()
        for si, i in sorted(positions.get(pair, ())):
            ids, nx, pv = seqs[si], nxt[si], prv[si]
            j = nx[i]
            # Stale when an earlier merge consumed either node.
            if ids[i] != a or j == -1 or ids[j] != b:
                continue
            left, right = pv[i], nx[j]
            if left != -1:
                old = (ids[left], a)
                counts[old] -= 1
                positions[old].discard((si, left))
                new = (ids[left], new_id)
                counts[new] = counts.get(new, 0) + 1
                positions.setdefault(new, set()).add((si, left))
                touched.update((old, new))
            if right != -1:
                old = (b, ids[right])
                counts[old] -= 1
                positions[old].discard((si, j))
                new = (new_id, ids[right])
                counts[new] = counts.get(new, 0) + 1
                positions.setdefault(new, set()).add((si, i))
                touched.update((old, new))
            counts[pair] -= 1
            ids[i] = new_id
            nx[i] = right
            if right != -1:
                prv[si][right] = i
            ids[j] = -1

        positions.pop(pair, None)
        counts.pop(pair, None)
        for p in touched:
            push(p)

    return Tokenizer(specials=specials, merges=merges, seed=seed)
