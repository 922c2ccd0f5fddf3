"""Zero-shot semantic-search evaluation: corpus embedding, cosine ranking,
MRR for text-to-code and MAP for code-to-code, plus representation-similarity
diagnostics.

Rankings sort by descending cosine similarity with ties broken by ascending
candidate id, which keeps reports reproducible. In code-to-code evaluation a
query is excluded from its own candidate pool, so trivially retrieving
yourself cannot inflate the score.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from . import encoder as enc
from .tokenizer import Tokenizer
from .trainer import pad_batch, wrap_encode

log = logging.getLogger(__name__)


class SearchEvalError(ValueError):
    pass


@dataclass
class SearchDataset:
    queries: list[tuple[str, str]]  # (query id, text or code)
    candidates: list[tuple[str, str]]  # (candidate id, code)
    relevance: dict[str, set[str]]

    def __post_init__(self):
        cand_ids = {cid for cid, _ in self.candidates}
        for qid, relevant in self.relevance.items():
            if not relevant:
                raise SearchEvalError(f"query {qid!r} has an empty relevance set")
            missing = relevant - cand_ids
            if missing:
                raise SearchEvalError(f"query {qid!r} references unknown candidates {missing}")


# -- embedding ------------------------------------------------------------------


def embed_corpus(
    params: dict[str, np.ndarray],
    config: enc.EncoderConfig,
    tokenizer: Tokenizer,
    items: Sequence[str],
    max_len: Optional[int] = None,
    batch_size: int = 64,
) -> np.ndarray:
    """Mean-pooled inference embeddings, one row per item, in item order."""
    if config.vocab_size != tokenizer.vocab_size:
        raise SearchEvalError("checkpoint vocabulary does not match the tokenizer")
    max_len = max_len or config.max_len
    rows = []
    for start in range(0, len(items), batch_size):
        chunk = items[start : start + batch_size]
        seqs = [wrap_encode(t, tokenizer, max_len) for t in chunk]
        ids, mask = pad_batch(seqs, tokenizer.pad_id)
        hidden, _ = enc.forward(params, config, ids, mask, train_mode=False)
        rows.append(enc.pool_mean(hidden, mask))
    return np.vstack(rows) if rows else np.zeros((0, config.model_dim))


def _unit_rows(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1)
    if np.any(norms == 0):
        raise SearchEvalError("zero-norm embedding row")
    return matrix / norms[:, None]


# -- ranking and metrics -----------------------------------------------------------


def rank(
    query_embedding: np.ndarray,
    candidate_matrix: np.ndarray,
    candidate_ids: Sequence[str],
) -> list[str]:
    """Candidate ids by descending cosine; ties broken by ascending id."""
    qn = np.linalg.norm(query_embedding)
    if qn == 0:
        raise SearchEvalError("zero-norm query embedding")
    sims = _unit_rows(candidate_matrix) @ (query_embedding / qn)
    order = sorted(range(len(candidate_ids)), key=lambda i: (-sims[i], candidate_ids[i]))
    return [candidate_ids[i] for i in order]


def reciprocal_rank(ranking: Sequence[str], relevant: set[str]) -> float:
    for position, cid in enumerate(ranking, start=1):
        if cid in relevant:
            return 1.0 / position
    return 0.0


def average_precision(ranking: Sequence[str], relevant: set[str]) -> float:
    hits = 0
    precision_sum = 0.0
    for position, cid in enumerate(ranking, start=1):
        if cid in relevant:
            hits += 1
            precision_sum += hits / position
    return precision_sum / len(relevant)


def _check_queries(rankings: dict[str, Sequence[str]], relevance: dict[str, set[str]]):
    for qid, relevant in relevance.items():
        if qid not in rankings:
            raise SearchEvalError(f"no ranking for query {qid!r}")
        if not relevant:
            raise SearchEvalError(f"query {qid!r} has an empty relevance set")


def mrr(rankings: dict[str, Sequence[str]], relevance: dict[str, set[str]]) -> float:
    """Mean reciprocal rank of the first relevant candidate."""
    _check_queries(rankings, relevance)
    if not relevance:
        raise SearchEvalError("no queries to score")
    return float(np.mean([
        reciprocal_rank(rankings[qid], relevant) for qid, relevant in relevance.items()
    ]))


def map_score(rankings: dict[str, Sequence[str]], relevance: dict[str, set[str]]) -> float:
    """Mean average precision across all relevant candidates."""
    _check_queries(rankings, relevance)
    if not relevance:
        raise SearchEvalError("no queries to score")
    return float(np.mean([
        average_precision(rankings[qid], relevant) for qid, relevant in relevance.items()
    ]))


# -- dataset evaluation --------------------------------------------------------------


def evaluate(
    params: dict[str, np.ndarray],
    config: enc.EncoderConfig,
    tokenizer: Tokenizer,
    dataset: SearchDataset,
    task: str,
    max_len: Optional[int] = None,
) -> dict:
    """Embed, rank, and score a dataset; task is 'nl2code' or 'code2code'."""
    if task not in ("nl2code", "code2code"):
        raise SearchEvalError(f"unknown task {task!r}")
    cand_ids = [cid for cid, _ in dataset.candidates]
    cand_matrix = embed_corpus(
        params, config, tokenizer, [c for _, c in dataset.candidates], max_len
    )
    query_matrix = embed_corpus(
        params, config, tokenizer, [q for _, q in dataset.queries], max_len
    )
    rankings: dict[str, list[str]] = {}
    for row, (qid, _) in enumerate(dataset.queries):
        ids, matrix = cand_ids, cand_matrix
        if task == "code2code" and qid in set(cand_ids):
            keep = [i for i, cid in enumerate(cand_ids) if cid != qid]
            ids = [cand_ids[i] for i in keep]
            matrix = cand_matrix[keep]
        rankings[qid] = rank(query_matrix[row], matrix, ids)
    per_query = {}
    for qid, relevant in dataset.relevance.items():
        per_query[qid] = {
            "reciprocal_rank": reciprocal_rank(rankings[qid], relevant),
            "average_precision": average_precision(rankings[qid], relevant),
        }
    report = {
        "task": task,
        "num_queries": len(dataset.relevance),
        "num_candidates": len(cand_ids),
        "mrr": mrr(rankings, dataset.relevance),
        "map": map_score(rankings, dataset.relevance),
        "per_query": per_query,
    }
    return report


def build_code2code_dataset(
    groups: dict[str, list[str]],
    seed: int = 0,
    max_solutions: int = 10,
) -> SearchDataset:
    """Problem-grouped solutions -> every solution queries for its siblings."""
    rng = np.random.default_rng(seed)
    queries: list[tuple[str, str]] = []
    candidates: list[tuple[str, str]] = []
    relevance: dict[str, set[str]] = {}
    for problem in sorted(groups):
        solutions = groups[problem]
        if len(solutions) < 2:
            log.warning("dropping problem %s with a single solution", problem)
            continue
        if len(solutions) > max_solutions:
            picked = sorted(rng.choice(len(solutions), size=max_solutions, replace=False))
            solutions = [solutions[i] for i in picked]
        ids = [f"{problem}::{i}" for i in range(len(solutions))]
        for sid, code in zip(ids, solutions):
            queries.append((sid, code))
            candidates.append((sid, code))
        for sid in ids:
            relevance[sid] = set(ids) - {sid}
    return SearchDataset(queries, candidates, relevance)


# -- similarity diagnostics ------------------------------------------------------------


def similarity_gap_report(
    params: dict[str, np.ndarray],
    config: enc.EncoderConfig,
    tokenizer: Tokenizer,
    pairs: Sequence[tuple[str, str]],
    code_groups: Optional[dict[str, list[str]]] = None,
    seed: int = 0,
    max_len: Optional[int] = None,
) -> dict:
    """Mean cosine of parallel pairs vs randomly re-matched pairs.

    With code_groups given, also reports the code-to-code analogue and the
    relative gap between code-code and text-code parallel similarities.
    """
    if len(pairs) < 20:
        raise SearchEvalError("similarity gap needs at least 20 pairs")
    rng = np.random.default_rng(seed)
    summaries = _unit_rows(embed_corpus(
        params, config, tokenizer, [s for s, _ in pairs], max_len))
    codes = _unit_rows(embed_corpus(
        params, config, tokenizer, [c for _, c in pairs], max_len))
    parallel = float((summaries * codes).sum(axis=1).mean())
    shift = int(rng.integers(1, len(pairs)))
    random_match = float((summaries * np.roll(codes, shift, axis=0)).sum(axis=1).mean())
    report = {
        "nl2code": {
            "parallel_mean": parallel,
            "random_mean": random_match,
            "gap": parallel - random_match,
        }
    }
    if code_groups:
        left, right = [], []
        for problem in sorted(code_groups):
            solutions = code_groups[problem]
            for a, b in zip(solutions, solutions[1:]):
                left.append(a)
                right.append(b)
        lm = _unit_rows(embed_corpus(params, config, tokenizer, left, max_len))
        rm = _unit_rows(embed_corpus(params, config, tokenizer, right, max_len))
        c_parallel = float((lm * rm).sum(axis=1).mean())
        shift = int(rng.integers(1, len(left))) if len(left) > 1 else 0
        c_random = float((lm * np.roll(rm, shift, axis=0)).sum(axis=1).mean())
        report["code2code"] = {
            "parallel_mean": c_parallel,
            "random_mean": c_random,
            "gap": c_parallel - c_random,
        }
        report["relative_gap_code2code_vs_nl2code"] = c_parallel - parallel
    return report


# -- JSONL dataset files ---------------------------------------------------------------


def write_search_dataset(dataset: SearchDataset, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "queries.jsonl", "w", encoding="utf-8") as fh:
        for qid, text in dataset.queries:
            fh.write(json.dumps({"qid": qid, "text": text}, ensure_ascii=False) + "\n")
    with open(out / "candidates.jsonl", "w", encoding="utf-8") as fh:
        for cid, code in dataset.candidates:
            fh.write(json.dumps({"cid": cid, "code": code}, ensure_ascii=False) + "\n")
    with open(out / "relevance.jsonl", "w", encoding="utf-8") as fh:
        for qid, _ in dataset.queries:
            if qid in dataset.relevance:
                fh.write(json.dumps(
                    {"qid": qid, "relevant": sorted(dataset.relevance[qid])},
                    ensure_ascii=False) + "\n")


def read_search_dataset(data_dir: str | Path) -> SearchDataset:
    data = Path(data_dir)
    queries = []
    with open(data / "queries.jsonl", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                queries.append((rec["qid"], rec["text"]))
    candidates = []
    with open(data / "candidates.jsonl", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                candidates.append((rec["cid"], rec["code"]))
    relevance = {}
    with open(data / "relevance.jsonl", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                relevance[rec["qid"]] = set(rec["relevant"])
    return SearchDataset(queries, candidates, relevance)
