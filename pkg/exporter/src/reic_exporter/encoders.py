"""Frozen sentence-pair encoders.

Two backends share one interface: encode a batch of token-ordered text
pairs into 768-dimensional vectors, never updating any weights.

- "hash" (or "hash:<variant>"): a deterministic feature-hashing encoder
  that needs no model files. Token vectors come from hashes of the token
  text, position-decay weighting keeps word order observable, and a fixed
  seeded projection mixes them. Exports are reproducible byte for byte.
- any other id: a pretrained bidirectional transformer loaded locally via
  the transformers library (first-position pooled output, frozen).
"""
from __future__ import annotations

import hashlib

import numpy as np

EMBED_DIM = 768


class EncoderUnavailableError(RuntimeError):
    """The requested encoder cannot be loaded in this environment."""


def _seed_from(text: str) -> int:
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "little")


class HashedEncoder:
    """Deterministic, dependency-free stand-in for a pretrained encoder."""

    def __init__(self, encoder_id: str, max_tokens: int = 512):
        self.encoder_id = encoder_id
        self.max_tokens = max_tokens
        rng = np.random.default_rng(_seed_from("projection:" + encoder_id))
        self._projection = rng.normal(0.0, 1.0 / np.sqrt(EMBED_DIM),
                                      size=(EMBED_DIM, EMBED_DIM))
        self._token_cache: dict[str, np.ndarray] = {}

    def tokenize(self, text: str) -> list[str]:
        return text.lower().split()

    def _token_vector(self, token: str) -> np.ndarray:
        vec = self._token_cache.get(token)
        if vec is None:
            rng = np.random.default_rng(_seed_from(self.encoder_id + ":" + token))
            vec = rng.normal(size=EMBED_DIM)
            self._token_cache[token] = vec
        return vec

    def encode_pairs(self, pairs) -> tuple[np.ndarray, int]:
        """Encode (first_text, second_text) pairs; returns (matrix, n_truncated)."""
        out = np.zeros((len(pairs), EMBED_DIM), dtype=np.float64)
        truncated = 0
        for row, (first, second) in enumerate(pairs):
            tokens = self.tokenize(first) + self.tokenize(second)
            if len(tokens) > self.max_tokens:
                tokens = tokens[:self.max_tokens]
                truncated += 1
            pooled = np.zeros(EMBED_DIM)
            for pos, token in enumerate(tokens):
                pooled += self._token_vector(token) / (1.0 + 0.05 * pos)
            pooled /= max(1, len(tokens))
            out[row] = np.tanh(self._projection @ pooled)
        return out.astype(np.float32), truncated


class TransformersEncoder:
    """Frozen pretrained transformer; first-position pooled output as the summary.

    Loads strictly from local files (the encoder must already be on disk);
    parameters are never updated.
    """

    def __init__(self, encoder_id: str, max_tokens: int = 512, device: str = "cpu"):
        try:
            import torch
            from transformers import AutoModel, AutoTokenizer
        except ImportError as exc:
            raise EncoderUnavailableError(
                "the transformers backend needs the torch and transformers "
                "packages; install them or use the 'hash' encoder"
            ) from exc
        try:
            self.tokenizer = AutoTokenizer.from_pretrained(encoder_id, local_files_only=True)
            self.model = AutoModel.from_pretrained(encoder_id, local_files_only=True)
        except Exception as exc:
            raise EncoderUnavailableError(
                f"encoder {encoder_id!r} is not available locally: {exc}"
            ) from exc
        self.torch = torch
        self.max_tokens = max_tokens
        self.device = device
        self.model.to(device)
        self.model.eval()

    def encode_pairs(self, pairs) -> tuple[np.ndarray, int]:
        firsts = [a for a, _ in pairs]
        seconds = [b for _, b in pairs]
        enc = self.tokenizer(firsts, seconds, padding=True, truncation="longest_first",
                             max_length=self.max_tokens, return_tensors="pt")

        lengths = self.tokenizer(firsts, seconds, truncation=False)["input_ids"]
        truncated = sum(1 for ids in lengths if len(ids) > self.max_tokens)
        enc = {k: v.to(self.device) for k, v in enc.items()}
        with self.torch.no_grad():
            hidden = self.model(**enc).last_hidden_state
        return hidden[:, 0, :].cpu().numpy().astype(np.float32), truncated


def get_encoder(encoder_id: str, max_tokens: int = 512, device: str = "cpu"):
    if encoder_id == "hash" or encoder_id.startswith("hash:"):
        return HashedEncoder(encoder_id, max_tokens)
    return TransformersEncoder(encoder_id, max_tokens, device)
