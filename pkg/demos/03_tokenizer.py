"""Walkthrough: the byte-level BPE tokenizer.

Trains on a code corpus, demonstrates lossless round-trips (any UTF-8 text),
span tiling, boundary-constrained encoding (identifier edges never straddled),
and special-token atomicity.

Run: python3 demos/03_tokenizer.py
"""

import random
import tempfile
from pathlib import Path

from sageforge.synthcorpus import generate_file
from sageforge.tokenizer import Tokenizer, default_specials, train_bpe

rng = random.Random(3)
corpus = [generate_file(rng) for _ in range(40)]
print(f"training corpus: {sum(len(c) for c in corpus)} bytes of code")

tokenizer = train_bpe(corpus, vocab_size=4096, seed=3, specials=default_specials())
print(f"trained vocab: {tokenizer.vocab_size} "
      f"({len(tokenizer.specials)} specials + 256 bytes + {len(tokenizer.merges)} merges)\n")

print("=" * 60)
print("compression and spans")
print("=" * 60)
sample = corpus[0].splitlines()[0:6]
text = "\n".join(sample)
encoded = tokenizer.encode(text)
print(text)
print(f"\n{len(text.encode('utf-8'))} bytes -> {len(encoded)} tokens")
print("first tokens:", [tokenizer.decode([tid]) for tid, _ in encoded[:10]])

print("\n" + "=" * 60)
print("lossless round trips, any UTF-8")
print("=" * 60)
fuzz = random.Random(99)
trials = 0
for _ in range(500):
    s = "".join(chr(fuzz.randrange(1, 0x2FFF)) for _ in range(fuzz.randrange(0, 50)))
    assert tokenizer.decode(tokenizer.encode_ids(s)) == s
    trials += 1
print(f"{trials} random strings round-tripped exactly")
for s in ("def f(x): return x", "π ≈ 3.14159 # комментарий", "emoji \U0001F40D ok"):
    assert tokenizer.decode(tokenizer.encode_ids(s)) == s
    print(f"  ok: {s!r}")

print("\n" + "=" * 60)
print("boundary-constrained encoding")
print("=" * 60)
s = "def total_prices(values):"
plain = tokenizer.encode(s)
start, end = s.index("total_prices"), s.index("total_prices") + len("total_prices")
bounded = tokenizer.encode_with_boundaries(s, [(start, end)])
print(f"text: {s!r}, boundary over bytes [{start}, {end})")
print("plain  :", [tokenizer.decode([t]) for t, _ in plain])
print("bounded:", [tokenizer.decode([t]) for t, _ in bounded])
for _, (a, b) in bounded:
    assert not (a < start < b) and not (a < end < b)
print("no token straddles the identifier edges")

print("\n" + "=" * 60)
print("special tokens are atomic under boundaries")
print("=" * 60)
s = "x = c_0 + 1"
span = (s.index("c_0"), s.index("c_0") + 3)
toks = tokenizer.encode_with_boundaries(s, [span])
special = [t for t, sp in toks if sp == span]
print(f"boundary over 'c_0' -> single id {special} "
      f"(= special id {tokenizer.special_ids['c_0']})")

path = Path(tempfile.mkdtemp(prefix="sageforge_demo3_")) / "tokenizer.json"
tokenizer.save(path)
reloaded = Tokenizer.load(path)
assert reloaded.encode(corpus[1]) == tokenizer.encode(corpus[1])
print(f"\nsaved + reloaded identically from {path}")
