"""Data model and I/O for bags, text paths, documents, and embedding stores.

A bag groups the text paths of one (head, tail) entity pair under a single
relation label (or no relation). Each path is a pair of documents that
share at least one bridge entity. Embeddings are keyed by
(document, target entity) because each sentence vector encodes the pair
[target sentence, sentence].
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

STORE_MAGIC = b"REICEMB1"


class StoreFormatError(ValueError):
    """Malformed embedding-store file; carries the failing byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class EntityNotFoundError(LookupError):
    """The requested entity is not mentioned anywhere in the document."""


@dataclass
class Sentence:
    index: int
    token_count: int
    mentions: list[int] = field(default_factory=list)
    is_evidence_oracle: bool | None = None


@dataclass
class Document:
    doc_id: int
    sentences: list[Sentence]

    def __post_init__(self):
        if not self.sentences:
            raise ValueError(f"document {self.doc_id} has no sentences")
        for pos, sent in enumerate(self.sentences):
            if sent.index != pos:
                raise ValueError(
                    f"document {self.doc_id}: sentence indices not contiguous at {pos}"
                )
            if sent.token_count < 1:
                raise ValueError(f"document {self.doc_id}: sentence {pos} has no tokens")
        self.entity_set = set()
        for sent in self.sentences:
            self.entity_set.update(sent.mentions)

    def __len__(self) -> int:
        return len(self.sentences)


@dataclass
class TextPath:
    head_doc: Document
    tail_doc: Document
    bridge_entities: set[int]


@dataclass
class Bag:
    head_entity: int
    tail_entity: int
    relation: int | None            # None encodes N/A
    paths: list[TextPath]
    path_oracle_labels: list[bool] | None = None   # True = positive path

    @property
    def is_na(self) -> bool:
        return self.relation is None


@dataclass
class Corpus:
    entities: list[int]
    relations: list[int]
    documents: dict[int, Document]
    bags: list[Bag]


class EmbeddingStore:
    """Per-(document, target entity) matrices of sentence embeddings.

    Matrices are float32, one row per sentence of the document.
    """

    def __init__(self, dim: int = 768):
        if dim < 1:
            raise ValueError("embedding dim must be positive")
        self.dim = dim
        self.entries: dict[tuple[int, int], np.ndarray] = {}

    def put(self, doc_id: int, target_entity: int, matrix: np.ndarray) -> None:
        matrix = np.asarray(matrix, dtype=np.float32)
        if matrix.ndim != 2 or matrix.shape[1] != self.dim:
            raise ValueError(
                f"embedding matrix for ({doc_id}, {target_entity}) has shape "
                f"{matrix.shape}, expected (*, {self.dim})"
            )
        if not np.all(np.isfinite(matrix)):
            raise ValueError(f"non-finite embeddings for ({doc_id}, {target_entity})")
        self.entries[(doc_id, target_entity)] = matrix

    def get(self, doc_id: int, target_entity: int) -> np.ndarray:
        return self.entries[(doc_id, target_entity)]

    def __contains__(self, key) -> bool:
        return key in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def __eq__(self, other) -> bool:
        if not isinstance(other, EmbeddingStore):
            return NotImplemented
        if self.dim != other.dim or set(self.entries) != set(other.entries):
            return False
        return all(np.array_equal(self.entries[k], other.entries[k]) for k in self.entries)


def target_sentence_index(doc: Document, entity: int) -> int:
    """Lowest sentence index whose mentions contain the entity."""
    for sent in doc.sentences:
        if entity in sent.mentions:
            return sent.index
    raise EntityNotFoundError(f"entity {entity} not mentioned in document {doc.doc_id}")


def validate_bag(bag: Bag) -> list[str]:
    """Check every path's structural conditions; violations are data, not faults."""
    violations = []
    if not bag.paths:
        violations.append("bag has no paths")
    for n, path in enumerate(bag.paths):
        if bag.head_entity not in path.head_doc.entity_set:
            violations.append(f"path {n}: head entity {bag.head_entity} missing from head document")
        if bag.tail_entity not in path.tail_doc.entity_set:
            violations.append(f"path {n}: tail entity {bag.tail_entity} missing from tail document")
        if not path.bridge_entities:
            violations.append(f"path {n}: empty bridge entity set")
        for ent in sorted(path.bridge_entities):
            if ent not in path.head_doc.entity_set or ent not in path.tail_doc.entity_set:
                violations.append(f"path {n}: bridge entity {ent} not shared by both documents")
    return violations


# ---------------------------------------------------------------------------
# Corpus JSON format
# ---------------------------------------------------------------------------

def corpus_to_json(corpus: Corpus) -> dict:
    docs = []
    for doc_id in sorted(corpus.documents):
        doc = corpus.documents[doc_id]
        sents = []
        for s in doc.sentences:
            entry = {"token_count": s.token_count, "mentions": list(s.mentions)}
            if s.is_evidence_oracle is not None:
                entry["evidence"] = bool(s.is_evidence_oracle)
            sents.append(entry)
        docs.append({"doc_id": doc_id, "sentences": sents})
    bags = []
    for bag in corpus.bags:
        entry = {
            "head": bag.head_entity,
            "tail": bag.tail_entity,
            "relation": bag.relation,
            "paths": [
                {
                    "head_doc": p.head_doc.doc_id,
                    "tail_doc": p.tail_doc.doc_id,
                    "bridges": sorted(p.bridge_entities),
                }
                for p in bag.paths
            ],
        }
        if bag.path_oracle_labels is not None:
            entry["path_labels"] = [bool(x) for x in bag.path_oracle_labels]
        bags.append(entry)
    return {
        "entities": list(corpus.entities),
        "relations": list(corpus.relations),
        "documents": docs,
        "bags": bags,
    }


def corpus_from_json(data: dict) -> Corpus:
    documents = {}
    for d in data["documents"]:
        sentences = [
            Sentence(
                index=i,
                token_count=s["token_count"],
                mentions=list(s["mentions"]),
                is_evidence_oracle=s.get("evidence"),
            )
            for i, s in enumerate(d["sentences"])
        ]
        documents[d["doc_id"]] = Document(doc_id=d["doc_id"], sentences=sentences)
    bags = []
    for b in data["bags"]:
        paths = [
            TextPath(
                head_doc=documents[p["head_doc"]],
                tail_doc=documents[p["tail_doc"]],
                bridge_entities=set(p["bridges"]),
            )
            for p in b["paths"]
        ]
        bags.append(
            Bag(
                head_entity=b["head"],
                tail_entity=b["tail"],
                relation=b["relation"],
                paths=paths,
                path_oracle_labels=b.get("path_labels"),
            )
        )
    return Corpus(
        entities=list(data["entities"]),
        relations=list(data["relations"]),
        documents=documents,
        bags=bags,
    )


def write_corpus(corpus: Corpus, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(corpus_to_json(corpus), fh, indent=1)
        fh.write("\n")


def load_corpus(path) -> Corpus:
    with open(path, encoding="utf-8") as fh:
        return corpus_from_json(json.load(fh))


# ---------------------------------------------------------------------------
# Embedding store binary format (little-endian):
#   magic "REICEMB1" | u32 dim | u32 n_entries
#   per entry: u64 doc_id | u64 target_entity_id | u32 M | M*dim float32
# ---------------------------------------------------------------------------

def write_embedding_store(store: EmbeddingStore, path) -> None:
    with open(path, "wb") as fh:
        fh.write(STORE_MAGIC)
        fh.write(struct.pack("<II", store.dim, len(store.entries)))
        for (doc_id, ent_id) in sorted(store.entries):
            matrix = store.entries[(doc_id, ent_id)]
            fh.write(struct.pack("<QQI", doc_id, ent_id, matrix.shape[0]))
            fh.write(np.ascontiguousarray(matrix, dtype="<f4").tobytes())


def load_embedding_store(path) -> EmbeddingStore:
    with open(path, "rb") as fh:
        blob = fh.read()
    offset = 0

    def take(n: int, what: str) -> bytes:
        nonlocal offset
        if offset + n > len(blob):
            raise StoreFormatError(f"truncated store file while reading {what}", offset)
        chunk = blob[offset:offset + n]
        offset += n
        return chunk

    magic = take(len(STORE_MAGIC), "magic")
    if magic != STORE_MAGIC:
        raise StoreFormatError(f"bad magic {magic!r}, expected {STORE_MAGIC!r}", 0)
    dim, n_entries = struct.unpack("<II", take(8, "header"))
    if dim < 1:
        raise StoreFormatError(f"invalid dim {dim}", 8)
    store = EmbeddingStore(dim)
    for _ in range(n_entries):
        entry_offset = offset
        doc_id, ent_id, m = struct.unpack("<QQI", take(20, "entry header"))
        if m < 1:
            raise StoreFormatError(f"entry ({doc_id}, {ent_id}) has zero rows", entry_offset)
        raw = take(m * dim * 4, f"embedding rows of ({doc_id}, {ent_id})")
        matrix = np.frombuffer(raw, dtype="<f4").reshape(m, dim).copy()
        if not np.all(np.isfinite(matrix)):
            raise StoreFormatError(f"non-finite values in entry ({doc_id}, {ent_id})", entry_offset)
        store.entries[(doc_id, ent_id)] = matrix
    if offset != len(blob):
        raise StoreFormatError("trailing bytes after last entry", offset)
    return store
