"""Command-line entry point wiring the pipeline together:
pairs -> stats -> obfuscate -> tokenizer-train -> train -> eval -> report.

Exit codes: 0 success, 1 usage error (bad arguments or config), 2 runtime
error. All randomness flows from a single --seed. Each run logs its fully
resolved configuration; reports are written deterministically (wall-clock
timing goes to the log, not the artifact).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import textwrap
from dataclasses import asdict
from pathlib import Path

from . import corpus as corpus_mod
from . import encoder as enc
from . import searcheval, syntax
from .config import ConfigError, TRAIN_SCHEMA, load_config_file, merge_overrides, validate_schema
from .denoiser import MaskConfig
from .obfuscator import obfuscate
from .tokenizer import DEFAULT_VOCAB_SIZE, Tokenizer, default_specials, train_bpe
from .trainer import (
    STAGE1,
    STAGE2,
    STAGE2_SCRATCH,
    TrainConfig,
    train_stage1,
    train_stage2,
)

log = logging.getLogger("sageforge")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); the contract wants 1
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="sageforge", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--seed", type=int, default=0, help="root seed for all randomness")
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("pairs", help="build the (summary, hard positive) pair dataset")
    p.add_argument("--input", required=True, help="corpus root directory")
    p.add_argument("--lang", default="python")
    p.add_argument("--out", required=True, help="output JSONL path")
    p.add_argument("--report", help="filter-verdict histogram JSON path")
    p.add_argument("--tokenizer", help="tokenizer JSON (trained on the corpus when omitted)")

    p = sub.add_parser("stats", help="token taxonomy and lexical-overlap statistics")
    p.add_argument("--input", required=True)
    p.add_argument("--lang", default="python")
    p.add_argument("--out", required=True, help="stats JSON path")
    p.add_argument("--tokenizer", help="tokenizer JSON (trained on the corpus when omitted)")

    p = sub.add_parser("obfuscate", help="rename identifiers to placeholder tokens")
    p.add_argument("--input", required=True, help="source file")
    p.add_argument("--out", required=True, help="obfuscated source output")
    p.add_argument("--map", required=True, help="identifier map JSON output")

    p = sub.add_parser("tokenizer-train", help="train the BPE tokenizer")
    p.add_argument("--input", required=True)
    p.add_argument("--lang", default="python")
    p.add_argument("--out", required=True, help="tokenizer JSON path")
    p.add_argument("--vocab-size", type=int, default=DEFAULT_VOCAB_SIZE)
    p.add_argument("--placeholders", type=int, default=100,
                   help="identifier placeholders per family")

    p = sub.add_parser("train", help="run stage 1, 2, or 2-from-scratch training")
    p.add_argument("--stage", required=True, choices=["1", "2", "2-scratch"])
    p.add_argument("--config", required=True, help="TOML or JSON config file")
    p.add_argument("--out", required=True, help="output directory for checkpoints/reports")
    p.add_argument("--steps", type=int, help="override train.steps")
    p.add_argument("--batch-size", type=int, help="override train.batch_size")
    p.add_argument("--init", help="override train.init_checkpoint (stage 2)")

    p = sub.add_parser("eval", help="zero-shot semantic-search evaluation")
    p.add_argument("--task", required=True, choices=["nl2code", "code2code"])
    p.add_argument("--model", required=True, help="checkpoint path")
    p.add_argument("--data", required=True, help="dataset directory (three JSONL files)")
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--tokenizer", required=True)

    p = sub.add_parser("report", help="render a train/eval report to text + CSV")
    p.add_argument("--input", required=True, help="report JSON")
    p.add_argument("--out-prefix", required=True, help="writes PREFIX.txt and PREFIX.csv")
    return parser


# -- helpers -----------------------------------------------------------------------


def _load_or_train_tokenizer(args, files) -> Tokenizer:
    if getattr(args, "tokenizer", None):
        return Tokenizer.load(args.tokenizer)
    log.info("no tokenizer given; training one on the corpus (seed=%d)", args.seed)
    return train_bpe((f.content for f in files), vocab_size=DEFAULT_VOCAB_SIZE,
                     seed=args.seed, specials=default_specials())


def _write_json(path: str | Path, payload: dict) -> None:
    Path(path).write_text(
        json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )


# -- subcommands --------------------------------------------------------------------


def _cmd_pairs(args) -> int:
    files = list(corpus_mod.ingest_directory(args.input, args.lang))
    tokenizer = _load_or_train_tokenizer(args, files)
    report = corpus_mod.build_pair_dataset(files, tokenizer, args.out,
                                           report_path=args.report)
    log.info("pairs written to %s: %s", args.out, report.to_dict())
    return EXIT_OK


def _cmd_stats(args) -> int:
    files = list(corpus_mod.ingest_directory(args.input, args.lang))
    tokenizer = _load_or_train_tokenizer(args, files)
    distribution = syntax.token_distribution((f.content for f in files), tokenizer,
                                             args.lang)
    items = []
    data_of = lambda f: f.content.encode("utf-8")  # noqa: E731
    for file in files:
        data = data_of(file)
        for fn in corpus_mod.extract_functions(file):
            signature = data[fn.signature_span[0]:fn.signature_span[1]].decode("utf-8")
            body = data[fn.body_span[0]:fn.body_span[1]].decode("utf-8")
            summary = corpus_mod.extract_summary(fn.docstring, tokenizer)
            items.append((signature, body, fn.docstring,
                          summary.text if summary else None))
    overlap = syntax.overlap_report(items, tokenizer)
    _write_json(args.out, {
        "distribution": distribution.to_dict(),
        "lexical_overlap": overlap,
        "files": len(files),
        "functions": len(items),
    })
    log.info("stats written to %s", args.out)
    return EXIT_OK


def _cmd_obfuscate(args) -> int:
    source = Path(args.input).read_text(encoding="utf-8")
    result = obfuscate(source)
    Path(args.out).write_text(result.obfuscated_text, encoding="utf-8")
    Path(args.map).write_text(result.to_json() + "\n", encoding="utf-8")
    log.info("obfuscated %s -> %s (%d identifiers)", args.input, args.out,
             len(result.identifier_map))
    return EXIT_OK


def _cmd_tokenizer_train(args) -> int:
    files = list(corpus_mod.ingest_directory(args.input, args.lang))
    if not files:
        raise RuntimeError(f"no {args.lang} files under {args.input}")
    tokenizer = train_bpe((f.content for f in files), vocab_size=args.vocab_size,
                          seed=args.seed, specials=default_specials(args.placeholders))
    tokenizer.save(args.out)
    log.info("tokenizer (vocab %d) written to %s", tokenizer.vocab_size, args.out)
    return EXIT_OK


def _train_config_from(args, merged: dict) -> tuple[TrainConfig, dict]:
    stage = {"1": STAGE1, "2": STAGE2, "2-scratch": STAGE2_SCRATCH}[args.stage]
    train = merged.get("train", {})
    model = merged.get("model", {})
    mask_section = merged.get("mask", {})
    seq = merged.get("seq", {})
    mask = MaskConfig(
        scheme=mask_section.get("scheme", "full"),
        rate=mask_section.get("rate", 0.15),
        dobf_mix=mask_section.get("dobf_mix", 0.5),
        max_len=seq.get("max_len", model.get("max_len", 128)),
    )
    config = TrainConfig(
        stage=stage,
        steps=train.get("steps", 300 if stage == STAGE1 else 200),
        warmup_steps=train.get("warmup_steps",
                               max(1, train.get("steps", 300 if stage == STAGE1 else 200) // 10)),
        batch_size=train.get("batch_size", 32 if stage == STAGE1 else 64),
        base_lr=train.get("base_lr", 3e-4 if stage == STAGE1 else 1e-4),
        weight_decay=train.get("weight_decay", 0.01),
        grad_clip=train.get("grad_clip", 1.0),
        seed=args.seed,
        encoder_preset=model.get("preset", "tiny"),
        max_len=model.get("max_len", 128),
        dropout_rate=model.get("dropout", 0.1),
        temperature=train.get("temperature", 0.05),
        mask=mask,
        eval_every=train.get("eval_every", 50),
        checkpoint_every=train.get("checkpoint_every", 0),
        out_dir=args.out,
    )
    return config, merged


def _cmd_train(args) -> int:
    merged = merge_overrides(load_config_file(args.config), {
        "train": {"steps": args.steps, "batch_size": args.batch_size,
                  "init_checkpoint": args.init},
    })
    validate_schema(merged, TRAIN_SCHEMA)
    config, merged = _train_config_from(args, merged)
    log.info("resolved config: %s", json.dumps(
        asdict(config), sort_keys=True, default=str))

    data = merged.get("data", {})
    lang = data.get("lang", "python")
    tok_section = merged.get("tokenizer", {})
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    if config.stage == STAGE1:
        if "input" not in data:
            raise RuntimeError("stage 1 needs data.input (corpus directory)")
        files = list(corpus_mod.ingest_directory(data["input"], lang))
        if not files:
            raise RuntimeError(f"no {lang} files under {data['input']}")
        if tok_section.get("path"):
            tokenizer = Tokenizer.load(tok_section["path"])
        else:
            tokenizer = train_bpe(
                (f.content for f in files),
                vocab_size=tok_section.get("vocab_size", DEFAULT_VOCAB_SIZE),
                seed=args.seed,
                specials=default_specials(tok_section.get("placeholders", 100)),
            )
        tokenizer.save(out_dir / "tokenizer.json")
        texts = [
            textwrap.dedent(fn.source_text)
            for file in files
            for fn in corpus_mod.extract_functions(file)
        ]
        _, _, report = train_stage1(texts, tokenizer, config)
    else:
        if tok_section.get("path"):
            tokenizer = Tokenizer.load(tok_section["path"])
        else:
            raise RuntimeError("stage 2 needs tokenizer.path (from the stage 1 run)")
        if "pairs" in data:
            records = corpus_mod.read_pairs_jsonl(data["pairs"])
            pairs = [(r["summary"], r["code"]) for r in records]
        elif "input" in data:
            files = list(corpus_mod.ingest_directory(data["input"], lang))
            built, _ = corpus_mod.build_pairs(files, tokenizer)
            pairs = [(p.summary.text, p.positive_view) for p in built]
        else:
            raise RuntimeError("stage 2 needs data.pairs or data.input")
        init = merged.get("train", {}).get("init_checkpoint")
        if config.stage == STAGE2 and not init:
            raise RuntimeError("stage 2 needs train.init_checkpoint (or --init)")
        _, _, report = train_stage2(pairs, tokenizer, config, init_checkpoint=init)

    log.info("training done in %.1fs, skipped steps: %d",
             report.wall_clock_sec, report.skipped_steps)
    payload = report.to_dict()
    payload.pop("wall_clock_sec", None)  # keep artifacts byte-deterministic
    _write_json(out_dir / "report.json", payload)
    report.save_loss_csv(out_dir / "loss.csv")
    return EXIT_OK


def _cmd_eval(args) -> int:
    params, config = enc.load_checkpoint(args.model)
    tokenizer = Tokenizer.load(args.tokenizer)
    dataset = searcheval.read_search_dataset(args.data)
    report = searcheval.evaluate(params, config, tokenizer, dataset, args.task)
    _write_json(args.out, report)
    log.info("eval %s: mrr=%.4f map=%.4f over %d queries",
             args.task, report["mrr"], report["map"], report["num_queries"])
    return EXIT_OK


def _cmd_report(args) -> int:
    payload = json.loads(Path(args.input).read_text(encoding="utf-8"))
    prefix = Path(args.out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    csv_lines = []
    if "losses" in payload:  # training report
        losses = payload["losses"]
        lines.append("training report")
        lines.append(f"steps: {len(losses)}")
        if losses:
            lines.append(f"first loss: {losses[0]:.6f}")
            lines.append(f"final loss: {losses[-1]:.6f}")
        lines.append(f"skipped steps: {payload.get('skipped_steps', 0)}")
        for entry in payload.get("evals", []):
            lines.append(
                f"step {entry['step']}: in-batch accuracy {entry['in_batch_accuracy']:.4f}"
            )
        csv_lines.append("step,loss")
        csv_lines.extend(f"{i},{v}" for i, v in enumerate(losses))
    elif "per_query" in payload:  # eval report
        lines.append(f"eval report: {payload.get('task')}")
        lines.append(f"queries: {payload.get('num_queries')}")
        lines.append(f"candidates: {payload.get('num_candidates')}")
        lines.append(f"MRR: {payload['mrr']:.6f}")
        lines.append(f"MAP: {payload['map']:.6f}")
        csv_lines.append("qid,reciprocal_rank,average_precision")
        for qid in sorted(payload["per_query"]):
            row = payload["per_query"][qid]
            csv_lines.append(f"{qid},{row['reciprocal_rank']},{row['average_precision']}")
    else:
        raise RuntimeError("unrecognized report payload")
    Path(f"{prefix}.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    Path(f"{prefix}.csv").write_text("\n".join(csv_lines) + "\n", encoding="utf-8")
    log.info("rendered %s -> %s.txt / %s.csv", args.input, prefix, prefix)
    return EXIT_OK


_COMMANDS = {
    "pairs": _cmd_pairs,
    "stats": _cmd_stats,
    "obfuscate": _cmd_obfuscate,
    "tokenizer-train": _cmd_tokenizer_train,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "report": _cmd_report,
}


def dispatch(argv: list[str]) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help prints and exits 0
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # runtime failure
        print(f"error: {exc}", file=sys.stderr)
        if args.verbose:
            raise
        return EXIT_RUNTIME


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
