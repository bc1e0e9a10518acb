"""Synthetic planted-evidence corpus generation.

Each positive path hides exactly one evidence sentence in its head
document (mentioning the head and bridge entities) and one in its tail
document (bridge and tail entities), both far from the sentence that
contains the target entity. Evidence embeddings carry a per-relation
signature in a reserved coordinate block on top of Gaussian noise; every
other sentence is pure noise with distractor mentions. A selector can
therefore only expose the relation signal to the scoring head by actually
finding the planted sentences.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Bag, Corpus, Document, EmbeddingStore, Sentence, TextPath

# Magnitude of the planted per-relation signature (one reserved coordinate
# per relation, so relation r adds +1 to coordinate r of its evidence rows).
SIGNATURE_SCALE = 1.0

# Bridge mentions per evidence sentence; kept above the single mention of
# ordinary bridge sentences so that evidence-seeking selectors collect
# measurably more bridge mentions on positive bags.
EVIDENCE_BRIDGE_MENTIONS = 2

DISTRACTOR_POOL = 16


class ConfigError(ValueError):
    """Synthetic-corpus configuration violates an invariant."""


@dataclass
class SyntheticConfig:
    n_bags: int = 16
    n_relations: int = 4
    sentences_per_doc: int = 24
    paths_per_bag: int = 2
    dim: int = 48
    noise_sigma: float = 0.05
    na_bag_fraction: float = 0.5
    na_path_fraction: float = 0.25
    evidence_offset_min: int = 8
    tokens_per_sentence: int = 25
    seed: int = 7

    def validate(self) -> None:
        if self.n_bags < 1:
            raise ConfigError("n_bags must be >= 1")
        if self.n_relations < 2:
            raise ConfigError("n_relations must be >= 2")
        if self.sentences_per_doc < 2:
            raise ConfigError("sentences_per_doc must be >= 2")
        if self.paths_per_bag < 1:
            raise ConfigError("paths_per_bag must be >= 1")
        if self.dim < self.n_relations:
            raise ConfigError("dim must be >= n_relations (reserved signature block)")
        if self.noise_sigma <= 0:
            raise ConfigError("noise_sigma must be positive")
        if not 0 <= self.na_bag_fraction < 1:
            raise ConfigError("na_bag_fraction must be in [0, 1)")
        if not 0 <= self.na_path_fraction < 1:
            raise ConfigError("na_path_fraction must be in [0, 1)")
        if not 1 <= self.evidence_offset_min < self.sentences_per_doc:
            raise ConfigError("evidence_offset_min must be in [1, sentences_per_doc)")
        if self.tokens_per_sentence < 1:
            raise ConfigError("tokens_per_sentence must be >= 1")


def relation_signature(relation: int, dim: int) -> np.ndarray:
    """The fixed vector added to evidence embeddings of one relation."""
    u = np.zeros(dim)
    u[relation] = SIGNATURE_SCALE
    return u


def _build_document(cfg, rng, doc_id, target, bridge, planted_relation, distractors):
    """One document mentioning its target once and the bridge entity once.

    For a planted relation, the bridge mentions sit in the evidence
    sentence together with the target entity, at least
    evidence_offset_min sentences after the target sentence (keeping the
    target sentence the first mention of the target entity). Returns the
    document, the target index, and the evidence index (or None).
    """
    m = cfg.sentences_per_doc
    mentions = [[] for _ in range(m)]
    if planted_relation is not None:
        tgt_idx = int(rng.integers(0, m - cfg.evidence_offset_min))
        ev_idx = int(rng.integers(tgt_idx + cfg.evidence_offset_min, m))
        mentions[tgt_idx].append(target)
        mentions[ev_idx].extend([target] + [bridge] * EVIDENCE_BRIDGE_MENTIONS)
    else:
        tgt_idx = int(rng.integers(0, m))
        choices = [i for i in range(m) if i != tgt_idx]
        bridge_idx = choices[int(rng.integers(0, len(choices)))]
        ev_idx = None
        mentions[tgt_idx].append(target)
        mentions[bridge_idx].append(bridge)
    for i in range(m):
        for _ in range(int(rng.integers(0, 3))):
            mentions[i].append(int(distractors[rng.integers(0, len(distractors))]))
    sentences = [
        Sentence(
            index=i,
            token_count=cfg.tokens_per_sentence,
            mentions=mentions[i],
            is_evidence_oracle=(i == ev_idx),
        )
        for i in range(m)
    ]
    return Document(doc_id=doc_id, sentences=sentences), tgt_idx, ev_idx


def _embed_document(cfg, rng, planted_relation, ev_idx):
    z = rng.normal(0.0, cfg.noise_sigma, size=(cfg.sentences_per_doc, cfg.dim))
    if planted_relation is not None:
        z[ev_idx] += relation_signature(planted_relation, cfg.dim)
    return z.astype(np.float32)


def generate_synthetic(cfg: SyntheticConfig) -> tuple[Corpus, EmbeddingStore]:
    """Deterministic corpus + embedding store from the config (seed included)."""
    cfg.validate()
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))

    distractors = list(range(DISTRACTOR_POOL))
    next_entity = DISTRACTOR_POOL
    next_doc = 0

    n_na = int(round(cfg.n_bags * cfg.na_bag_fraction))
    na_flags = np.zeros(cfg.n_bags, dtype=bool)
    if n_na:
        na_flags[rng.choice(cfg.n_bags, size=n_na, replace=False)] = True

    documents: dict[int, Document] = {}
    bags: list[Bag] = []
    store = EmbeddingStore(cfg.dim)
    positive_seen = 0

    for bag_idx in range(cfg.n_bags):
        is_na = bool(na_flags[bag_idx])
        if is_na:
            relation = None
        else:
            relation = positive_seen % cfg.n_relations
            positive_seen += 1
        head = next_entity
        tail = next_entity + 1
        next_entity += 2

        paths = []
        labels = []
        for path_idx in range(cfg.paths_per_bag):
            bridge = next_entity
            next_entity += 1
            # every positive bag keeps at least one genuinely positive path
            if relation is None:
                positive_path = False
            elif path_idx == 0:
                positive_path = True
            else:
                positive_path = bool(rng.random() >= cfg.na_path_fraction)
            planted = relation if positive_path else None

            head_doc, _, ev_h = _build_document(
                cfg, rng, next_doc, head, bridge, planted, distractors)
            tail_doc, _, ev_t = _build_document(
                cfg, rng, next_doc + 1, tail, bridge, planted, distractors)
            next_doc += 2
            documents[head_doc.doc_id] = head_doc
            documents[tail_doc.doc_id] = tail_doc

            store.put(head_doc.doc_id, head, _embed_document(cfg, rng, planted, ev_h))
            store.put(tail_doc.doc_id, tail, _embed_document(cfg, rng, planted, ev_t))

            paths.append(TextPath(head_doc=head_doc, tail_doc=tail_doc,
                                  bridge_entities={bridge}))
            labels.append(positive_path)

        bags.append(Bag(head_entity=head, tail_entity=tail, relation=relation,
                        paths=paths, path_oracle_labels=labels))

    entities = list(range(next_entity))
    relations = list(range(cfg.n_relations))
    return Corpus(entities=entities, relations=relations,
                  documents=documents, bags=bags), store
