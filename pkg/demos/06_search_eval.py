"""Walkthrough: zero-shot semantic-search evaluation.

Builds a code-to-code dataset from problem-grouped solution variants and a
text-to-code dataset from held-out pairs, embeds everything with a trained
model, and reports MAP / MRR against random-ranking baselines.

Run: python3 demos/06_search_eval.py  (a few minutes on CPU)
"""

import tempfile
import textwrap

import numpy as np

from sageforge.corpus import build_pairs, extract_functions, ingest_directory
from sageforge.denoiser import MaskConfig
from sageforge.searcheval import (
    SearchDataset,
    build_code2code_dataset,
    evaluate,
    write_search_dataset,
)
from sageforge.synthcorpus import generate_code2code_groups, generate_corpus
from sageforge.tokenizer import default_specials, train_bpe
from sageforge.trainer import STAGE1, STAGE2, TrainConfig, train_stage1, train_stage2

workdir = tempfile.mkdtemp(prefix="sageforge_demo6_")
generate_corpus(workdir + "/corpus", n_files=150, seed=8)
files = list(ingest_directory(workdir + "/corpus"))
tokenizer = train_bpe((f.content for f in files), vocab_size=6144,
                      specials=default_specials())
functions = [textwrap.dedent(fn.source_text)
             for f in files for fn in extract_functions(f)]
pairs, _ = build_pairs(files, tokenizer)
records = [(p.summary.text, p.positive_view) for p in pairs]

# hold out 50 pairs with distinct summaries for the text-to-code benchmark
rng = np.random.default_rng(13)
order = rng.permutation(len(records))
seen, holdout_idx = set(), []
for i in order:
    if records[i][0] not in seen:
        seen.add(records[i][0])
        holdout_idx.append(int(i))
    if len(holdout_idx) == 50:
        break
holdout = [records[i] for i in holdout_idx]
train_records = [records[i] for i in order if i not in set(holdout_idx)]
print(f"{len(train_records)} training pairs, {len(holdout)} held out")

stage1 = TrainConfig(stage=STAGE1, steps=200, warmup_steps=20, batch_size=32,
                     base_lr=3e-4, max_len=128, seed=5,
                     mask=MaskConfig(max_len=128), out_dir=workdir + "/ckpt")
_, _, report1 = train_stage1(functions, tokenizer, stage1)
stage2 = TrainConfig(stage=STAGE2, steps=200, warmup_steps=20, batch_size=64,
                     base_lr=1e-4, max_len=128, seed=6, eval_every=0)
params, econf, _ = train_stage2(train_records, tokenizer, stage2,
                                init_checkpoint=report1.final_checkpoint)
print("two-stage model trained\n")

print("=" * 60)
print("NL2Code: held-out summaries query held-out code")
print("=" * 60)
queries = [(f"q{i}", s) for i, (s, _) in enumerate(holdout)]
candidates = [(f"c{i}", code) for i, (_, code) in enumerate(holdout)]
relevance = {f"q{i}": {f"c{i}"} for i in range(len(holdout))}
nl_dataset = SearchDataset(queries, candidates, relevance)
nl_report = evaluate(params, econf, tokenizer, nl_dataset, task="nl2code")
random_mrr = sum(1 / r for r in range(1, len(holdout) + 1)) / len(holdout)
print(f"MRR {nl_report['mrr']:.4f} over {nl_report['num_queries']} queries "
      f"(random ranking would give {random_mrr:.4f})")

print("\n" + "=" * 60)
print("Code2Code: solution variants of the same problem")
print("=" * 60)
groups = generate_code2code_groups(30, seed=2)
c2c_dataset = build_code2code_dataset(groups, seed=3)
write_search_dataset(c2c_dataset, workdir + "/c2c")
print(f"dataset written to {workdir}/c2c "
      f"({len(c2c_dataset.queries)} queries, grouped by problem)")
c2c_report = evaluate(params, econf, tokenizer, c2c_dataset, task="code2code")
print(f"MAP {c2c_report['map']:.4f}, MRR {c2c_report['mrr']:.4f} "
      f"(query excluded from its own candidate pool)")

worst = sorted(c2c_report["per_query"].items(),
               key=lambda kv: kv[1]["average_precision"])[:3]
print("\nhardest queries by average precision:")
for qid, scores in worst:
    print(f"  {qid:<28} AP {scores['average_precision']:.3f}")
