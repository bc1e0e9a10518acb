import json

import pytest


def make_doc(doc_id, sentences):
    """sentences: list of (text, mentions)."""
    return {
        "doc_id": doc_id,
        "sentences": [
            {"token_count": max(1, len(text.split())), "mentions": list(mentions),
             "text": text}
            for text, mentions in sentences
        ],
    }


def sample_corpus():
    """Two bags, one path each, with raw sentence text."""
    docs = [
        make_doc(0, [
            ("acme corp announced a new research division", [10]),
            ("the division works closely with orbital labs on sensors", [30]),
            ("unrelated filler sentence about weather patterns", []),
        ]),
        make_doc(1, [
            ("orbital labs builds satellite instruments", [30]),
            ("its flagship instrument ships to polar station nine", [20]),
        ]),
        make_doc(2, [
            ("rivera founded the institute in nineteen ninety", [11]),
            ("the institute partners with harbor university", [31]),
        ]),
        make_doc(3, [
            ("harbor university hosts the annual summit", [31]),
            ("the summit awards honor pioneering work", []),
            ("combinatorics lectures drew large crowds", [21]),
        ]),
    ]
    return {
        "entities": [10, 11, 20, 21, 30, 31],
        "relations": [0, 1],
        "documents": docs,
        "bags": [
            {"head": 10, "tail": 20, "relation": 0,
             "paths": [{"head_doc": 0, "tail_doc": 1, "bridges": [30]}]},
            {"head": 11, "tail": 21, "relation": None,
             "paths": [{"head_doc": 2, "tail_doc": 3, "bridges": [31]}]},
        ],
    }


@pytest.fixture
def corpus_file(tmp_path):
    path = tmp_path / "corpus.json"
    path.write_text(json.dumps(sample_corpus(), indent=1))
    return path
