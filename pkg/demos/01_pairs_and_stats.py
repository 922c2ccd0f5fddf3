"""Walkthrough: from a source tree to (summary, hard positive) training pairs.

Generates a small synthetic corpus, extracts functions, shows the bimodal
filters at work, builds hard positives (signature + docstring + returns
removed), and prints the token-taxonomy and lexical-overlap statistics that
motivate the hard-positive construction.

Run: python3 demos/01_pairs_and_stats.py
"""

import tempfile
from pathlib import Path

from sageforge.corpus import (
    build_pairs,
    extract_functions,
    extract_summary,
    ingest_directory,
    make_hard_positive,
)
from sageforge.synthcorpus import generate_corpus
from sageforge.syntax import overlap_report, token_distribution
from sageforge.tokenizer import default_specials, train_bpe

workdir = Path(tempfile.mkdtemp(prefix="sageforge_demo1_"))
corpus_dir = workdir / "corpus"
generate_corpus(corpus_dir, n_files=60, seed=11)
print(f"synthetic corpus written to {corpus_dir}")

files = list(ingest_directory(corpus_dir))
functions = [fn for f in files for fn in extract_functions(f)]
print(f"{len(files)} files, {len(functions)} functions extracted\n")

print("=" * 60)
print("training a small BPE tokenizer on the corpus")
tokenizer = train_bpe((f.content for f in files), vocab_size=4096,
                      specials=default_specials())
print(f"vocab size {tokenizer.vocab_size}\n")

print("=" * 60)
print("one function, its summary, and its hard positive")
print("=" * 60)
example = next(fn for fn in functions if fn.docstring and fn.body_code_lines >= 3)
print(example.source_text)
summary = extract_summary(example.docstring, tokenizer)
view, fallback = make_hard_positive(example)
print(f"--> summary ({summary.token_count} tokens): {summary.text!r}")
print(f"--> hard positive (fallback={fallback}):")
for line in view.splitlines():
    print("    " + line)
print()

print("=" * 60)
print("building the full pair dataset")
print("=" * 60)
pairs, report = build_pairs(files, tokenizer)
print(f"filter verdicts: {report.to_dict()}")
print(f"{len(pairs)} accepted pairs\n")

print("=" * 60)
print("token taxonomy (subword level)")
print("=" * 60)
dist = token_distribution((f.content for f in files), tokenizer)
for category, count in sorted(dist.counts.items()):
    print(f"  {category:<12} {count:>8}  ({count / dist.total:.1%})")
print(f"  PL fraction          {dist.pl_token_fraction:.3f}")
print(f"  NL fraction          {dist.nl_token_fraction:.3f}")
print(f"  identifiers / total  {dist.identifier_fraction_of_total:.3f}\n")

print("=" * 60)
print("lexical overlap: why signatures are removed from positives")
print("=" * 60)
items = []
for f in files:
    data = f.content.encode("utf-8")
    for fn in extract_functions(f):
        s = extract_summary(fn.docstring, tokenizer)
        items.append((
            data[fn.signature_span[0]:fn.signature_span[1]].decode("utf-8"),
            data[fn.body_span[0]:fn.body_span[1]].decode("utf-8"),
            fn.docstring,
            s.text if s else None,
        ))
overlaps = overlap_report(items, tokenizer)
for key, value in overlaps.items():
    print(f"  {key:<24} {value:.3f}")
print("\nthe hard positive drops the signature and the docstring, so whatever")
print("overlap remains with the summary must flow through the body alone.")
