"""Session-scoped fixtures: the synthetic corpus, its tokenizer, and the
extracted function/pair datasets shared by integration and acceptance tests."""

import sys
import textwrap
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from sageforge.corpus import build_pairs, extract_functions, ingest_directory
from sageforge.synthcorpus import generate_corpus
from sageforge.tokenizer import default_specials, train_bpe


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("fixture_corpus")
    generate_corpus(root, n_files=200, seed=42)
    return root


@pytest.fixture(scope="session")
def corpus_files(corpus_dir):
    return list(ingest_directory(corpus_dir))


@pytest.fixture(scope="session")
def corpus_functions(corpus_files):
    return [fn for file in corpus_files for fn in extract_functions(file)]


@pytest.fixture(scope="session")
def corpus_function_texts(corpus_functions):
    return [textwrap.dedent(fn.source_text) for fn in corpus_functions]


@pytest.fixture(scope="session")
def corpus_tokenizer(corpus_files):
    return train_bpe((f.content for f in corpus_files), vocab_size=8192,
                     seed=0, specials=default_specials())


@pytest.fixture(scope="session")
def corpus_pairs(corpus_files, corpus_tokenizer):
    pairs, report = build_pairs(corpus_files, corpus_tokenizer)
    return pairs, report
