"""Tests for ranking, MRR/MAP (against independent naive oracles), dataset
construction, and the similarity diagnostics plumbing."""

import numpy as np
import pytest

from sageforge.searcheval import (
    SearchDataset,
    SearchEvalError,
    average_precision,
    build_code2code_dataset,
    map_score,
    mrr,
    rank,
    read_search_dataset,
    reciprocal_rank,
    write_search_dataset,
)

RNG = np.random.default_rng(321)


# -- independent naive implementations (the oracles) ------------------------------


def naive_mrr(rankings, relevance):
    total = 0.0
    for qid, relevant in relevance.items():
        rr = 0.0
        for idx, cid in enumerate(rankings[qid]):
            if cid in relevant:
                rr = 1.0 / (idx + 1)
                break
        total += rr
    return total / len(relevance)


def naive_map(rankings, relevance):
    total = 0.0
    for qid, relevant in relevance.items():
        num_rel_seen = 0
        ap = 0.0
        for idx, cid in enumerate(rankings[qid]):
            if cid in relevant:
                num_rel_seen += 1
                ap += num_rel_seen / (idx + 1)
        total += ap / len(relevant)
    return total / len(relevance)


def _random_instance(rng, n_queries=20, n_candidates=15):
    cand_ids = [f"c{i}" for i in range(n_candidates)]
    rankings = {}
    relevance = {}
    for q in range(n_queries):
        qid = f"q{q}"
        perm = rng.permutation(n_candidates)
        rankings[qid] = [cand_ids[i] for i in perm]
        k = int(rng.integers(1, 4))
        relevance[qid] = set(rng.choice(cand_ids, size=k, replace=False))
    return rankings, relevance


# -- metric hand cases --------------------------------------------------------------


def test_mrr_hand_case():
    rankings = {
        "a": ["r", "x", "y"],
        "b": ["x", "r", "y"],
        "c": ["x", "y", "z", "r"],
    }
    relevance = {"a": {"r"}, "b": {"r"}, "c": {"r"}}
    assert mrr(rankings, relevance) == pytest.approx((1 + 1 / 2 + 1 / 4) / 3)


def test_mrr_all_rank_one():
    rankings = {f"q{i}": ["hit", "miss"] for i in range(5)}
    relevance = {f"q{i}": {"hit"} for i in range(5)}
    assert mrr(rankings, relevance) == 1.0


def test_map_hand_case():
    # relevant at ranks 1 and 3 of two relevant total -> (1/1 + 2/3) / 2
    ranking = ["r1", "x", "r2", "y"]
    assert average_precision(ranking, {"r1", "r2"}) == pytest.approx((1 + 2 / 3) / 2)


def test_map_all_relevant_first():
    rankings = {"q": ["a", "b", "c", "x"]}
    relevance = {"q": {"a", "b", "c"}}
    assert map_score(rankings, relevance) == 1.0


def test_metrics_match_naive_oracles():
    for trial in range(100):
        rng = np.random.default_rng(trial)
        rankings, relevance = _random_instance(rng)
        assert mrr(rankings, relevance) == pytest.approx(naive_mrr(rankings, relevance), abs=1e-15)
        assert map_score(rankings, relevance) == pytest.approx(naive_map(rankings, relevance), abs=1e-15)


def test_mrr_equals_map_with_single_relevant():
    for trial in range(20):
        rng = np.random.default_rng(1000 + trial)
        cand_ids = [f"c{i}" for i in range(12)]
        rankings, relevance = {}, {}
        for q in range(10):
            perm = rng.permutation(12)
            rankings[f"q{q}"] = [cand_ids[i] for i in perm]
            relevance[f"q{q}"] = {cand_ids[int(rng.integers(0, 12))]}
        assert mrr(rankings, relevance) == pytest.approx(map_score(rankings, relevance), abs=1e-15)


def test_empty_relevance_is_error():
    with pytest.raises(SearchEvalError):
        mrr({"q": ["a"]}, {"q": set()})


def test_missing_ranking_is_error():
    with pytest.raises(SearchEvalError):
        map_score({}, {"q": {"a"}})


def test_metric_invariant_to_relabeling():
    rng = np.random.default_rng(77)
    rankings, relevance = _random_instance(rng)
    mapping = {f"c{i}": f"z{i:03d}" for i in range(15)}
    rankings2 = {q: [mapping[c] for c in r] for q, r in rankings.items()}
    relevance2 = {q: {mapping[c] for c in rel} for q, rel in relevance.items()}
    assert mrr(rankings, relevance) == pytest.approx(mrr(rankings2, relevance2))
    assert map_score(rankings, relevance) == pytest.approx(map_score(rankings2, relevance2))


def test_reciprocal_rank_no_hit_is_zero():
    assert reciprocal_rank(["a", "b"], {"zzz"}) == 0.0


# -- ranking --------------------------------------------------------------------------


def test_rank_identical_candidate_first():
    query = np.array([1.0, 2.0, 3.0])
    cands = np.stack([np.array([3.0, -1.0, 0.0]), query * 2.0, np.array([0.0, 1.0, 0.0])])
    ranking = rank(query, cands, ["a", "b", "c"])
    assert ranking[0] == "b"


def test_rank_tie_broken_by_ascending_id():
    query = np.array([1.0, 0.0])
    cands = np.tile(query, (3, 1))
    assert rank(query, cands, ["m", "a", "z"]) == ["a", "m", "z"]


def test_rank_matches_bruteforce_sort():
    for trial in range(10):
        rng = np.random.default_rng(trial)
        query = rng.normal(size=6)
        cands = rng.normal(size=(5, 6))
        ids = [f"c{i}" for i in range(5)]
        got = rank(query, cands, ids)
        sims = {}
        for i in range(5):
            sims[ids[i]] = float(
                np.dot(query, cands[i]) / (np.linalg.norm(query) * np.linalg.norm(cands[i]))
            )
        expected = sorted(ids, key=lambda c: (-sims[c], c))
        assert got == expected


def test_rank_invariant_to_positive_rescaling():
    rng = np.random.default_rng(3)
    query = rng.normal(size=4)
    cands = rng.normal(size=(6, 4))
    ids = [f"c{i}" for i in range(6)]
    base = rank(query, cands, ids)
    scaled = cands.copy()
    scaled[2] *= 7.5
    assert rank(query, scaled, ids) == base


def test_rank_zero_norm_query_rejected():
    with pytest.raises(SearchEvalError):
        rank(np.zeros(3), np.ones((2, 3)), ["a", "b"])


# -- dataset construction ----------------------------------------------------------------


def test_build_code2code_three_problems():
    groups = {f"p{i}": [f"code {i} a", f"code {i} b"] for i in range(3)}
    ds = build_code2code_dataset(groups, seed=0)
    assert len(ds.queries) == 6
    for qid, relevant in ds.relevance.items():
        assert len(relevant) == 1
        assert qid not in relevant


def test_build_code2code_drops_singletons(caplog):
    import logging
    groups = {"solo": ["only one"], "pair": ["a", "b"]}
    with caplog.at_level(logging.WARNING, logger="sageforge.searcheval"):
        ds = build_code2code_dataset(groups, seed=0)
    assert len(ds.queries) == 2
    assert any("solo" in rec.message for rec in caplog.records)


def test_build_code2code_deterministic_sampling():
    groups = {"big": [f"s{i}" for i in range(30)], "pair": ["a", "b"]}
    a = build_code2code_dataset(groups, seed=9)
    b = build_code2code_dataset(groups, seed=9)
    assert a.queries == b.queries
    assert sum(1 for q, _ in a.queries if q.startswith("big")) == 10


def test_dataset_validates_relevance():
    with pytest.raises(SearchEvalError):
        SearchDataset([("q", "x")], [("c", "y")], {"q": {"nope"}})
    with pytest.raises(SearchEvalError):
        SearchDataset([("q", "x")], [("c", "y")], {"q": set()})


def test_search_dataset_files_round_trip(tmp_path):
    groups = {f"p{i}": [f"def f{i}(): return {i}", f"def g{i}(): return {i}+0"] for i in range(3)}
    ds = build_code2code_dataset(groups, seed=1)
    write_search_dataset(ds, tmp_path)
    assert (tmp_path / "queries.jsonl").exists()
    assert (tmp_path / "candidates.jsonl").exists()
    assert (tmp_path / "relevance.jsonl").exists()
    back = read_search_dataset(tmp_path)
    assert back.queries == ds.queries
    assert back.candidates == ds.candidates
    assert back.relevance == ds.relevance
