"""Heuristic input-construction baselines.

snippet_select grows a contiguous window around the target sentence until
the token cap; bridge_filter_select keeps the sentences with the most
bridge-entity mentions under a sentence and token budget.
"""
from __future__ import annotations

from dataclasses import dataclass

from .corpus import Document


@dataclass
class BaselineConfig:
    window: int = 1_000_000     # radius limit for snippet; effectively unbounded
    token_cap: int = 512
    filter_cap: int = 25

    def validate(self) -> None:
        if self.window < 0:
            raise ValueError("window must be >= 0")
        if self.token_cap < 1 or self.filter_cap < 1:
            raise ValueError("caps must be >= 1")


def snippet_select(doc: Document, tgt_idx: int, cfg: BaselineConfig) -> list[int]:
    """Contiguous sentence window around the target, in document order.

    Expands one sentence at a time, alternating after/before, stopping at
    the first sentence that would push the token total over the cap (or
    when the document or the radius limit is exhausted).
    """
    cfg.validate()
    if not 0 <= tgt_idx < len(doc):
        raise IndexError(f"tgt_idx {tgt_idx} out of range")
    kept = {tgt_idx}
    total = doc.sentences[tgt_idx].token_count
    after = tgt_idx + 1
    before = tgt_idx - 1
    take_after = True
    while True:
        after_ok = after < len(doc) and after - tgt_idx <= cfg.window
        before_ok = before >= 0 and tgt_idx - before <= cfg.window
        if not after_ok and not before_ok:
            break
        if take_after and after_ok:
            idx = after
        elif before_ok:
            idx = before
        else:
            idx = after
        if total + doc.sentences[idx].token_count > cfg.token_cap:
            break
        kept.add(idx)
        total += doc.sentences[idx].token_count
        if idx == after:
            after += 1
        else:
            before -= 1
        take_after = not take_after
    return sorted(kept)


def bridge_filter_select(doc: Document, bridge_entities, cfg: BaselineConfig,
                         tgt_idx: int) -> list[int]:
    """Sentences ranked by bridge-entity mention count, in document order.

    The caller includes the target entity in bridge_entities so its
    mentions count toward the score. Falls back to snippet_select when no
    sentence mentions any of the counted entities.
    """
    cfg.validate()
    bridge_entities = set(bridge_entities)
    counts = [sum(1 for e in s.mentions if e in bridge_entities) for s in doc.sentences]
    if not any(counts):
        return snippet_select(doc, tgt_idx, cfg)
    order = sorted(range(len(doc)), key=lambda i: (-counts[i], i))
    kept = []
    total = 0
    for idx in order:
        if len(kept) >= cfg.filter_cap:
            break
        tok = doc.sentences[idx].token_count
        if total + tok > cfg.token_cap:
            break
        kept.append(idx)
        total += tok
    if not kept:  # oversized top sentence; keep it alone like the cap floor rule
        kept = [order[0]]
    return sorted(kept)
