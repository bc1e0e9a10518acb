import json

import numpy as np
import pytest

from reic_exporter import cli
from reic_exporter.encoders import EncoderUnavailableError, HashedEncoder, get_encoder
from reic_exporter.export import DataError, ExportJob, export, load_corpus_json, target_pairs
from conftest import sample_corpus


class TestHashedEncoder:
    def test_deterministic_across_instances(self):
        pairs = [("alpha beta", "gamma"), ("gamma", "alpha beta")]
        a, _ = HashedEncoder("hash:x").encode_pairs(pairs)
        b, _ = HashedEncoder("hash:x").encode_pairs(pairs)
        assert np.array_equal(a, b)

    def test_encoder_id_changes_output(self):
        pairs = [("alpha beta", "gamma")]
        a, _ = HashedEncoder("hash:x").encode_pairs(pairs)
        b, _ = HashedEncoder("hash:y").encode_pairs(pairs)
        assert not np.array_equal(a, b)

    def test_word_order_observable(self):
        a, _ = HashedEncoder("hash").encode_pairs([("one two", "three")])
        b, _ = HashedEncoder("hash").encode_pairs([("two one", "three")])
        assert not np.array_equal(a, b)

    def test_truncation_counted(self):
        long_text = " ".join(f"tok{i}" for i in range(600))
        matrix, truncated = HashedEncoder("hash", max_tokens=512).encode_pairs(
            [(long_text, "short"), ("short", "short")])
        assert truncated == 1
        assert np.isfinite(matrix).all()

    def test_get_encoder_dispatch(self):
        assert isinstance(get_encoder("hash"), HashedEncoder)
        assert isinstance(get_encoder("hash:variant"), HashedEncoder)

    def test_missing_pretrained_model_fails_clearly(self):
        with pytest.raises(EncoderUnavailableError, match="not available locally"):
            get_encoder("no-such-model-anywhere")


class TestExport:
    def test_pair_enumeration_dedupes(self, corpus_file):
        data = load_corpus_json(corpus_file)
        assert target_pairs(data) == [(0, 10), (1, 20), (2, 11), (3, 21)]

    def test_export_writes_all_entries(self, corpus_file, tmp_path):
        out = tmp_path / "emb.bin"
        export(ExportJob(corpus=corpus_file, encoder_id="hash", out=out))
        blob = out.read_bytes()
        assert blob[:8] == b"REICEMB1"
        dim = int.from_bytes(blob[8:12], "little")
        n = int.from_bytes(blob[12:16], "little")
        assert dim == 768 and n == 4

    def test_byte_identical_reexport(self, corpus_file, tmp_path):
        a = tmp_path / "a.bin"
        b = tmp_path / "b.bin"
        export(ExportJob(corpus=corpus_file, encoder_id="hash", out=a))
        export(ExportJob(corpus=corpus_file, encoder_id="hash", out=b))
        assert a.read_bytes() == b.read_bytes()

    def test_batching_does_not_change_bytes(self, corpus_file, tmp_path):
        a = tmp_path / "a.bin"
        b = tmp_path / "b.bin"
        export(ExportJob(corpus=corpus_file, encoder_id="hash", out=a, batch_size=1))
        export(ExportJob(corpus=corpus_file, encoder_id="hash", out=b, batch_size=64))
        assert a.read_bytes() == b.read_bytes()

    def test_document_order_of_pairs_preserved(self, corpus_file, tmp_path):
        # sentences before the target are encoded as [sentence, target]
        data = load_corpus_json(corpus_file)
        enc = HashedEncoder("hash")
        doc = data["documents"][3]  # target entity 21 sits in sentence 2
        texts = [s["text"] for s in doc["sentences"]]
        forward, _ = enc.encode_pairs([(texts[0], texts[2])])
        backward, _ = enc.encode_pairs([(texts[2], texts[0])])
        assert not np.array_equal(forward, backward)

        out = tmp_path / "emb.bin"
        export(ExportJob(corpus=corpus_file, encoder_id="hash", out=out))
        from reic.corpus import load_embedding_store
        store = load_embedding_store(out)
        row0 = store.get(3, 21)[0]
        assert np.array_equal(row0, forward[0])
        assert not np.array_equal(row0, backward[0])

    def test_self_pair_row_valid(self, corpus_file, tmp_path):
        out = tmp_path / "emb.bin"
        export(ExportJob(corpus=corpus_file, encoder_id="hash", out=out))
        from reic.corpus import load_embedding_store
        store = load_embedding_store(out)
        enc = HashedEncoder("hash")
        data = load_corpus_json(corpus_file)
        tgt_text = data["documents"][0]["sentences"][0]["text"]
        expected, _ = enc.encode_pairs([(tgt_text, tgt_text)])
        assert np.array_equal(store.get(0, 10)[0], expected[0])

    def test_missing_text_is_data_error(self, tmp_path):
        data = sample_corpus()
        del data["documents"][0]["sentences"][1]["text"]
        path = tmp_path / "corpus.json"
        path.write_text(json.dumps(data))
        with pytest.raises(DataError, match="no text"):
            export(ExportJob(corpus=path, encoder_id="hash", out=tmp_path / "x.bin"))

    def test_unmentioned_target_is_data_error(self, tmp_path):
        data = sample_corpus()
        data["bags"][0]["head"] = 999
        data["entities"].append(999)
        path = tmp_path / "corpus.json"
        path.write_text(json.dumps(data))
        with pytest.raises(DataError, match="999"):
            export(ExportJob(corpus=path, encoder_id="hash", out=tmp_path / "x.bin"))

    def test_no_leftover_temp_files(self, corpus_file, tmp_path):
        out = tmp_path / "emb.bin"
        export(ExportJob(corpus=corpus_file, encoder_id="hash", out=out))
        assert [p.name for p in tmp_path.glob("*.tmp")] == []


class TestCli:
    def test_export_roundtrip(self, corpus_file, tmp_path, capsys):
        out = tmp_path / "emb.bin"
        assert cli.main(["--corpus", str(corpus_file), "--encoder", "hash",
                         "--out", str(out), "--batch", "2"]) == 0
        assert out.exists()
        assert "wrote" in capsys.readouterr().out

    def test_missing_corpus_file(self, tmp_path):
        assert cli.main(["--corpus", str(tmp_path / "nope.json"),
                         "--encoder", "hash", "--out", str(tmp_path / "o.bin")]) == 1

    def test_unavailable_encoder(self, corpus_file, tmp_path):
        assert cli.main(["--corpus", str(corpus_file),
                         "--encoder", "definitely-not-a-local-model",
                         "--out", str(tmp_path / "o.bin")]) == 1

    def test_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            cli.main(["--corpus", "x"])
        assert exc.value.code == 2
