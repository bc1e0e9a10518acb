"""Export pair-encoded sentence embeddings to the engine's binary format.

For every (document, target entity) pair used by any text path, each
sentence is encoded together with the document's target sentence. The two
sentences are concatenated in document order (the pair with itself for
the target sentence is fine), truncated to the encoder's token limit, and
the sequence-summary vector becomes that sentence's row. The output file
is the REICEMB1 format the engine loads directly.
"""
from __future__ import annotations

import json
import logging
import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .encoders import EMBED_DIM, get_encoder

log = logging.getLogger(__name__)

STORE_MAGIC = b"REICEMB1"


class DataError(ValueError):
    """The corpus is missing data the exporter needs (usually raw text)."""


@dataclass
class ExportJob:
    corpus: str | Path
    encoder_id: str
    out: str | Path
    device: str = "cpu"
    max_tokens: int = 512
    batch_size: int = 32


def load_corpus_json(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    for key in ("entities", "relations", "documents", "bags"):
        if key not in data:
            raise DataError(f"corpus JSON lacks top-level key {key!r}")
    return data


def target_pairs(data: dict) -> list[tuple[int, int]]:
    """Every (document id, target entity) pair referenced by a text path."""
    pairs = set()
    for bag in data["bags"]:
        for path in bag["paths"]:
            pairs.add((path["head_doc"], bag["head"]))
            pairs.add((path["tail_doc"], bag["tail"]))
    return sorted(pairs)


def _sentence_texts(doc: dict, doc_id: int) -> list[str]:
    texts = []
    for idx, sent in enumerate(doc["sentences"]):
        text = sent.get("text")
        if not text:
            raise DataError(f"document {doc_id} sentence {idx} has no text")
        texts.append(text)
    return texts


def _target_index(doc: dict, entity: int, doc_id: int) -> int:
    for idx, sent in enumerate(doc["sentences"]):
        if entity in sent["mentions"]:
            return idx
    raise DataError(f"target entity {entity} is not mentioned in document {doc_id}")


def _encode_document(encoder, texts: list[str], tgt_idx: int, batch_size: int):
    """One row per sentence: the [target, sentence] pair in document order."""
    pairs = []
    for m in range(len(texts)):
        if m < tgt_idx:
            pairs.append((texts[m], texts[tgt_idx]))
        else:
            pairs.append((texts[tgt_idx], texts[m]))
    rows = []
    truncated = 0
    for start in range(0, len(pairs), batch_size):
        matrix, cut = encoder.encode_pairs(pairs[start:start + batch_size])
        rows.append(matrix)
        truncated += cut
    return np.vstack(rows), truncated


def write_store(path, entries: dict[tuple[int, int], np.ndarray], dim: int) -> None:
    """Write the little-endian REICEMB1 store atomically (temp + rename)."""
    path = Path(path)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent or Path("."), suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(STORE_MAGIC)
            fh.write(struct.pack("<II", dim, len(entries)))
            for (doc_id, ent_id) in sorted(entries):
                matrix = entries[(doc_id, ent_id)]
                fh.write(struct.pack("<QQI", doc_id, ent_id, matrix.shape[0]))
                fh.write(np.ascontiguousarray(matrix, dtype="<f4").tobytes())
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def export(job: ExportJob) -> Path:
    """Run the export job; returns the output path."""
    data = load_corpus_json(job.corpus)
    encoder = get_encoder(job.encoder_id, job.max_tokens, job.device)
    docs = {d["doc_id"]: d for d in data["documents"]}

    entries = {}
    total_truncated = 0
    for doc_id, entity in target_pairs(data):
        if doc_id not in docs:
            raise DataError(f"bag references unknown document {doc_id}")
        doc = docs[doc_id]
        texts = _sentence_texts(doc, doc_id)
        tgt_idx = _target_index(doc, entity, doc_id)
        matrix, truncated = _encode_document(encoder, texts, tgt_idx, job.batch_size)
        total_truncated += truncated
        if matrix.shape != (len(texts), EMBED_DIM):
            raise DataError(
                f"encoder produced shape {matrix.shape} for document {doc_id}, "
                f"expected ({len(texts)}, {EMBED_DIM})")
        entries[(doc_id, entity)] = matrix
    if total_truncated:
        log.warning("%d sentence pairs exceeded %d tokens and were truncated",
                    total_truncated, job.max_tokens)
    write_store(job.out, entries, EMBED_DIM)
    return Path(job.out)
