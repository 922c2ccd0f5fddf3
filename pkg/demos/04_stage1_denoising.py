"""Walkthrough: Stage I denoising objectives.

Shows the corruption schemes side by side (Full Mask, 80-10-10, and
deobfuscation with its mask/label alignment), then runs a short Stage I
training loop and plots the loss against the log-vocabulary starting point.

Run: python3 demos/04_stage1_denoising.py
"""

import math
import tempfile
import textwrap

import numpy as np

from sageforge.corpus import extract_functions, ingest_directory
from sageforge.denoiser import (
    MaskConfig,
    apply_80_10_10,
    apply_full_mask,
    collate_stage1,
    prepare_stage1_item,
    select_mask_positions,
)
from sageforge.synthcorpus import generate_corpus
from sageforge.tokenizer import default_specials, train_bpe
from sageforge.trainer import STAGE1, TrainConfig, train_stage1

workdir = tempfile.mkdtemp(prefix="sageforge_demo4_")
generate_corpus(workdir, n_files=80, seed=21)
files = list(ingest_directory(workdir))
tokenizer = train_bpe((f.content for f in files), vocab_size=4096,
                      specials=default_specials())
functions = [textwrap.dedent(fn.source_text)
             for f in files for fn in extract_functions(f)]
print(f"{len(functions)} functions, vocab {tokenizer.vocab_size}\n")

demo_fn = functions[0]
print("=" * 60)
print("corruption schemes on one function")
print("=" * 60)
print(demo_fn)
item = prepare_stage1_item(demo_fn, tokenizer, max_len=128)
rng = np.random.default_rng(4)
positions = select_mask_positions(item.maskable, 0.15, rng)
print(f"{len(item.maskable)} maskable positions, 15% rate -> {len(positions)} selected")

full = apply_full_mask(item.plain_ids, positions, tokenizer.mask_id)
print("\nFull Mask (every selected position becomes [MASK]):")
print("  " + tokenizer.decode(full.input_ids[1:-1]).replace("\n", "\n  "))

conv = apply_80_10_10(item.plain_ids, positions, rng,
                      np.arange(len(tokenizer.specials), tokenizer.vocab_size),
                      tokenizer.mask_id)
print("\n80-10-10 (random replacements can corrupt code structure):")
print("  " + tokenizer.decode(conv.input_ids[1:-1]).replace("\n", "\n  "))

if item.dobf_ids:
    print("\nDeobfuscation view (only identifiers masked, comments visible):")
    print("  " + tokenizer.decode(item.dobf_ids[1:-1]).replace("\n", "\n  "))
    labels = [label for _, label in item.dobf_labels]
    print(f"  {len(labels)} labels decode to: "
          f"{tokenizer.decode(labels[:12])!r} ...")

print("\n" + "=" * 60)
print("scheme mixing: deobfuscation and random masking, 50/50")
print("=" * 60)
batch = collate_stage1(functions[:400], tokenizer,
                       MaskConfig(scheme="full", rate=0.15, dobf_mix=0.5, max_len=128),
                       np.random.default_rng(0))
frac = sum(1 for s in batch.schemes if s == "dobf") / len(batch.schemes)
print(f"batch of {len(batch.schemes)}: {frac:.1%} deobfuscation examples")

print("\n" + "=" * 60)
print("a short Stage I run (tiny encoder)")
print("=" * 60)
config = TrainConfig(stage=STAGE1, steps=60, warmup_steps=6, batch_size=16,
                     base_lr=3e-4, max_len=128, seed=1,
                     mask=MaskConfig(max_len=128))
params, econf, report = train_stage1(functions, tokenizer, config)
print(f"vocab {econf.vocab_size}: ln(V) = {math.log(econf.vocab_size):.3f}")
for i in range(0, len(report.losses), 10):
    window = report.losses[i:i + 10]
    print(f"  steps {i:>3}-{i + len(window) - 1:<3} mean loss {np.mean(window):.3f}")
print(f"wall clock: {report.wall_clock_sec:.1f}s")
