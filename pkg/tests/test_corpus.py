import json

import numpy as np
import pytest

from reic import corpus as cp
from reic.synth import ConfigError, SyntheticConfig, generate_synthetic


def make_doc(doc_id=0, mention_lists=((0,), (1,))):
    sentences = [
        cp.Sentence(index=i, token_count=10, mentions=list(m))
        for i, m in enumerate(mention_lists)
    ]
    return cp.Document(doc_id=doc_id, sentences=sentences)


class TestTargetSentenceIndex:
    def test_only_first_sentence(self):
        doc = make_doc(mention_lists=[(7,), ()])
        assert cp.target_sentence_index(doc, 7) == 0

    def test_first_mention_wins(self):
        doc = make_doc(mention_lists=[(), (), (), (7,), (), (), (), (7,)])
        assert cp.target_sentence_index(doc, 7) == 3

    def test_absent_entity(self):
        doc = make_doc()
        with pytest.raises(cp.EntityNotFoundError):
            cp.target_sentence_index(doc, 99)

    def test_returned_index_contains_entity(self, rng):
        for _ in range(50):
            m = int(rng.integers(2, 10))
            mention_lists = [
                list(rng.choice(5, size=rng.integers(0, 3), replace=False))
                for _ in range(m)
            ]
            entity = int(rng.integers(0, 5))
            mention_lists[int(rng.integers(0, m))].append(entity)
            doc = make_doc(mention_lists=mention_lists)
            idx = cp.target_sentence_index(doc, entity)
            assert entity in doc.sentences[idx].mentions
            assert all(entity not in s.mentions for s in doc.sentences[:idx])


class TestValidateBag:
    def test_well_formed_synthetic(self):
        corpus, _ = generate_synthetic(SyntheticConfig(n_bags=4, seed=1))
        for bag in corpus.bags:
            assert cp.validate_bag(bag) == []

    def test_empty_bridge_set(self):
        head = make_doc(0, [(1,), (3,)])
        tail = make_doc(1, [(2,), (3,)])
        bag = cp.Bag(1, 2, 0, [cp.TextPath(head, tail, set())])
        violations = cp.validate_bag(bag)
        assert len(violations) == 1 and "bridge" in violations[0]

    def test_unshared_bridge(self):
        head = make_doc(0, [(1,), (3,)])
        tail = make_doc(1, [(2,), (4,)])
        bag = cp.Bag(1, 2, 0, [cp.TextPath(head, tail, {3})])
        assert any("not shared" in v for v in cp.validate_bag(bag))

    def test_missing_target_entities(self):
        head = make_doc(0, [(9,), (3,)])
        tail = make_doc(1, [(2,), (3,)])
        bag = cp.Bag(1, 2, 0, [cp.TextPath(head, tail, {3})])
        assert any("head entity" in v for v in cp.validate_bag(bag))

    def test_generator_soundness_1000_bags(self):
        corpus, _ = generate_synthetic(
            SyntheticConfig(n_bags=1000, sentences_per_doc=12,
                            evidence_offset_min=4, dim=8, seed=3))
        assert sum(len(cp.validate_bag(bag)) for bag in corpus.bags) == 0


class TestSyntheticGenerator:
    def test_deterministic(self):
        cfg = SyntheticConfig(n_bags=6, seed=42)
        c1, s1 = generate_synthetic(cfg)
        c2, s2 = generate_synthetic(cfg)
        assert json.dumps(cp.corpus_to_json(c1)) == json.dumps(cp.corpus_to_json(c2))
        assert s1 == s2

    def test_different_seeds_differ(self):
        c1, _ = generate_synthetic(SyntheticConfig(n_bags=6, seed=1))
        c2, _ = generate_synthetic(SyntheticConfig(n_bags=6, seed=2))
        assert json.dumps(cp.corpus_to_json(c1)) != json.dumps(cp.corpus_to_json(c2))

    def test_na_fraction_zero_all_positive(self):
        corpus, _ = generate_synthetic(SyntheticConfig(n_bags=10, na_bag_fraction=0.0, seed=5))
        assert all(bag.relation is not None for bag in corpus.bags)

    def test_na_fraction_counts(self):
        corpus, _ = generate_synthetic(SyntheticConfig(n_bags=10, na_bag_fraction=0.5, seed=5))
        assert sum(bag.is_na for bag in corpus.bags) == 5

    def test_evidence_offset_scan(self):
        cfg = SyntheticConfig(n_bags=20, sentences_per_doc=60,
                              evidence_offset_min=20, seed=9)
        corpus, _ = generate_synthetic(cfg)
        checked = 0
        for bag in corpus.bags:
            for path, positive in zip(bag.paths, bag.path_oracle_labels):
                if not positive:
                    continue
                for doc, target in ((path.head_doc, bag.head_entity),
                                    (path.tail_doc, bag.tail_entity)):
                    tgt = cp.target_sentence_index(doc, target)
                    ev = [s.index for s in doc.sentences if s.is_evidence_oracle]
                    assert len(ev) == 1
                    assert abs(ev[0] - tgt) >= 20
                    checked += 1
        assert checked > 0

    def test_evidence_mentions_match_roles(self):
        corpus, _ = generate_synthetic(SyntheticConfig(n_bags=12, seed=11))
        for bag in corpus.bags:
            for path, positive in zip(bag.paths, bag.path_oracle_labels):
                bridge = next(iter(path.bridge_entities))
                head_ev = [s for s in path.head_doc.sentences if s.is_evidence_oracle]
                tail_ev = [s for s in path.tail_doc.sentences if s.is_evidence_oracle]
                if positive:
                    assert bag.head_entity in head_ev[0].mentions
                    assert bridge in head_ev[0].mentions
                    assert bag.tail_entity in tail_ev[0].mentions
                    assert bridge in tail_ev[0].mentions
                else:
                    assert not head_ev and not tail_ev

    def test_na_paths_have_no_signature(self):
        cfg = SyntheticConfig(n_bags=12, na_bag_fraction=0.5,
                              na_path_fraction=0.5, seed=13)
        corpus, store = generate_synthetic(cfg)
        for bag in corpus.bags:
            for path, positive in zip(bag.paths, bag.path_oracle_labels):
                z = store.get(path.head_doc.doc_id, bag.head_entity)
                # signature block is one unit spike; noise alone stays well below 0.5
                peak = float(np.abs(z[:, :cfg.n_relations]).max())
                if positive:
                    assert peak > 0.5
                else:
                    assert peak < 0.5

    def test_mentions_exist_in_entity_table(self):
        corpus, _ = generate_synthetic(SyntheticConfig(n_bags=10, seed=17))
        table = set(corpus.entities)
        for doc in corpus.documents.values():
            for sent in doc.sentences:
                assert set(sent.mentions) <= table

    def test_invalid_configs_rejected(self):
        with pytest.raises(ConfigError):
            generate_synthetic(SyntheticConfig(n_relations=1))
        with pytest.raises(ConfigError):
            generate_synthetic(SyntheticConfig(evidence_offset_min=24, sentences_per_doc=24))
        with pytest.raises(ConfigError):
            generate_synthetic(SyntheticConfig(na_bag_fraction=1.0))
        with pytest.raises(ConfigError):
            generate_synthetic(SyntheticConfig(dim=2, n_relations=4))


class TestCorpusJson:
    def test_round_trip(self, tmp_path):
        corpus, _ = generate_synthetic(SyntheticConfig(n_bags=5, seed=21))
        path = tmp_path / "corpus.json"
        cp.write_corpus(corpus, path)
        loaded = cp.load_corpus(path)
        assert json.dumps(cp.corpus_to_json(loaded)) == json.dumps(cp.corpus_to_json(corpus))

    def test_top_level_keys(self, tmp_path):
        corpus, _ = generate_synthetic(SyntheticConfig(n_bags=2, seed=21))
        path = tmp_path / "corpus.json"
        cp.write_corpus(corpus, path)
        data = json.loads(path.read_text())
        assert set(data) == {"entities", "relations", "documents", "bags"}
        sent = data["documents"][0]["sentences"][0]
        assert {"token_count", "mentions"} <= set(sent)


class TestEmbeddingStoreFormat:
    def _tiny_store(self):
        store = cp.EmbeddingStore(3)
        store.put(1, 2, np.arange(6, dtype=np.float32).reshape(2, 3))
        return store

    def test_round_trip_bit_exact(self, tmp_path):
        store = cp.EmbeddingStore(4)
        rng = np.random.default_rng(0)
        store.put(1, 2, rng.normal(size=(5, 4)).astype(np.float32))
        store.put(3, 4, rng.normal(size=(2, 4)).astype(np.float32))
        path = tmp_path / "emb.bin"
        cp.write_embedding_store(store, path)
        loaded = cp.load_embedding_store(path)
        assert loaded == store

    def test_exact_file_size(self, tmp_path):
        # magic + dim + count + (doc id, entity id, M) + 2*3 float32 rows
        path = tmp_path / "emb.bin"
        cp.write_embedding_store(self._tiny_store(), path)
        assert path.stat().st_size == 8 + 4 + 4 + (8 + 8 + 4) + 2 * 3 * 4

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "emb.bin"
        cp.write_embedding_store(self._tiny_store(), path)
        blob = bytearray(path.read_bytes())
        blob[:8] = b"NOTMAGIC"
        path.write_bytes(bytes(blob))
        with pytest.raises(cp.StoreFormatError, match="REICEMB1"):
            cp.load_embedding_store(path)

    def test_truncation_reports_offset(self, tmp_path):
        path = tmp_path / "emb.bin"
        cp.write_embedding_store(self._tiny_store(), path)
        blob = path.read_bytes()[:-5]
        path.write_bytes(blob)
        with pytest.raises(cp.StoreFormatError, match="byte"):
            cp.load_embedding_store(path)

    def test_trailing_bytes_rejected(self, tmp_path):
        path = tmp_path / "emb.bin"
        cp.write_embedding_store(self._tiny_store(), path)
        path.write_bytes(path.read_bytes() + b"xx")
        with pytest.raises(cp.StoreFormatError, match="trailing"):
            cp.load_embedding_store(path)

    def test_row_count_must_match_document(self):
        corpus, store = generate_synthetic(SyntheticConfig(n_bags=3, seed=2))
        for bag in corpus.bags:
            for path in bag.paths:
                z = store.get(path.head_doc.doc_id, bag.head_entity)
                assert z.shape[0] == len(path.head_doc)
