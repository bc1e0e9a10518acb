"""Iterative evidence-sentence selection.

The selection starts from the sentence containing the target entity,
feeds the embedding of each newly selected sentence through a recurrent
cell, scores every unselected sentence from [sentence embedding, hidden
state] with a two-layer feed-forward scorer, and samples the next
sentence from the masked softmax over those scores. The full trajectory
is recorded for policy-gradient backprop.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import nn
from .corpus import Document


@dataclass
class SelectorConfig:
    T: int = 15            # max selections after the target sentence
    token_cap: int = 512
    one_step: bool = False

    def validate(self) -> None:
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if self.token_cap < 1:
            raise ValueError("token_cap must be >= 1")


class PolicyNetwork:
    """Selection policy: recurrent cell plus two-layer feed-forward scorer.

    The scorer maps [embedding, hidden] -> hidden via tanh -> one logit.
    """

    def __init__(self, emb_dim: int = 768, hidden_dim: int = 512,
                 rng: np.random.Generator | None = None):
        self.emb_dim = emb_dim
        self.hidden_dim = hidden_dim
        self.scorer_hidden = nn.DenseLayer(emb_dim + hidden_dim, hidden_dim, rng)
        self.scorer_out = nn.DenseLayer(hidden_dim, 1, rng)
        self.cell = nn.RecurrentCell(emb_dim, hidden_dim, rng)

    def parameters(self):
        """List of (name, param, grad) triples in a fixed order."""
        return (self.scorer_hidden.parameters("scorer_hidden")
                + self.scorer_out.parameters("scorer_out")
                + self.cell.parameters("cell"))

    def new_trace(self) -> nn.TrajectoryTrace:
        return nn.TrajectoryTrace(self.scorer_hidden, self.scorer_out, self.cell)


@dataclass
class SelectionState:
    """Selected indices (target first), candidate mask, and trajectory info."""

    selected: list[int]
    mask: np.ndarray                 # True where still selectable
    rec_state: nn.RecurrentState
    logprob_sum: float
    trace: nn.TrajectoryTrace
    step_logprobs: list[float] = field(default_factory=list)


def _scorer_pass(net: PolicyNetwork, Z: np.ndarray, h: np.ndarray, mask: np.ndarray):
    """Logits and masked probabilities for all unselected sentences.

    Equivalent to a masked softmax over per-sentence logits, computed on
    the candidate rows only.
    """
    cand = np.flatnonzero(mask)
    if cand.size == 0:
        raise nn.EmptyCandidatesError("no unselected sentences to score")
    X = np.empty((cand.size, net.emb_dim + net.hidden_dim))
    X[:, :net.emb_dim] = Z[cand]
    X[:, net.emb_dim:] = h
    A = np.tanh(X @ net.scorer_hidden.w.T + net.scorer_hidden.b)
    logits = A @ net.scorer_out.w[0] + net.scorer_out.b[0]
    e = np.exp(logits - logits.max())
    p_cand = e / e.sum()
    probs = np.zeros(mask.size)
    probs[cand] = p_cand
    return cand, X, A, probs


def policy_logits(net: PolicyNetwork, Z: np.ndarray, rec_h: np.ndarray,
                  mask: np.ndarray) -> np.ndarray:
    """Masked selection probabilities over all sentences (zeros at masked)."""
    Z = np.asarray(Z, dtype=float)
    if Z.shape[0] != mask.size:
        raise ValueError(f"policy_logits: {Z.shape[0]} rows vs mask of {mask.size}")
    _, _, _, probs = _scorer_pass(net, Z, rec_h, mask)
    return probs


def _draw(probs: np.ndarray, rng: np.random.Generator) -> int:
    """Sample an index from a probability vector with exact zeros allowed."""
    cdf = np.cumsum(probs)
    idx = int(np.searchsorted(cdf, rng.random(), side="right"))
    if idx >= probs.size or probs[idx] == 0.0:
        idx = int(np.flatnonzero(probs)[-1])
    return idx


def select(net: PolicyNetwork, Z: np.ndarray, tgt_idx: int, cfg: SelectorConfig,
           rng: np.random.Generator | None = None, mode: str = "sample",
           forced=None) -> SelectionState:
    """Run the iterative selection loop from the target sentence.

    mode "sample" draws each next sentence from the masked softmax,
    "argmax" takes the most probable one. forced replays a fixed index
    sequence instead (used for gradient checks and exact enumeration).
    Stops early once every sentence is selected.
    """
    Z = np.asarray(Z, dtype=float)
    m_total = Z.shape[0]
    if not 0 <= tgt_idx < m_total:
        raise IndexError(f"tgt_idx {tgt_idx} out of range for {m_total} sentences")
    cfg.validate()

    mask = np.ones(m_total, dtype=bool)
    mask[tgt_idx] = False
    trace = net.new_trace()
    state = SelectionState(
        selected=[tgt_idx],
        mask=mask,
        rec_state=nn.RecurrentState.zeros(net.hidden_dim),
        logprob_sum=0.0,
        trace=trace,
    )
    z = Z[tgt_idx]
    for t in range(cfg.T):
        if not mask.any():
            break
        state.rec_state = nn.recurrent_step(net.cell, z, state.rec_state, trace)
        cand, X, A, probs = _scorer_pass(net, Z, state.rec_state.h, mask)
        if forced is not None:
            idx = int(forced[t])
            if not mask[idx]:
                raise ValueError(f"forced index {idx} already selected")
        elif mode == "argmax":
            idx = int(np.argmax(probs))
        elif mode == "sample":
            idx = _draw(probs, rng)
        else:
            raise ValueError(f"unknown selection mode {mode!r}")
        chosen_pos = int(np.flatnonzero(cand == idx)[0])
        trace.score_steps.append(nn.ScoreStepRecord(
            X=X, A=A, probs=probs[cand], chosen=chosen_pos,
            rec_index=len(trace.rec_steps) - 1, emb_dim=net.emb_dim))
        lp = float(np.log(probs[idx]))
        state.step_logprobs.append(lp)
        state.logprob_sum += lp
        state.selected.append(idx)
        mask[idx] = False
        z = Z[idx]
    return state


def select_one_step(net: PolicyNetwork, Z: np.ndarray, tgt_idx: int,
                    cfg: SelectorConfig, rng: np.random.Generator | None = None,
                    mode: str = "sample", forced=None) -> SelectionState:
    """Ablation variant: T draws without replacement from one distribution.

    The selection probabilities are computed once from the initial state
    (after the target embedding passes the recurrent cell) and only
    renormalized over the remaining sentences after each draw; the
    recurrent state is never updated again.
    """
    Z = np.asarray(Z, dtype=float)
    m_total = Z.shape[0]
    if not 0 <= tgt_idx < m_total:
        raise IndexError(f"tgt_idx {tgt_idx} out of range for {m_total} sentences")
    cfg.validate()

    mask = np.ones(m_total, dtype=bool)
    mask[tgt_idx] = False
    trace = net.new_trace()
    state = SelectionState(
        selected=[tgt_idx],
        mask=mask,
        rec_state=nn.RecurrentState.zeros(net.hidden_dim),
        logprob_sum=0.0,
        trace=trace,
    )
    if not mask.any():
        return state
    state.rec_state = nn.recurrent_step(net.cell, Z[tgt_idx], state.rec_state, trace)
    cand, X, A, probs_full = _scorer_pass(net, Z, state.rec_state.h, mask)
    p = probs_full[cand].copy()
    record = nn.OneStepScoreRecord(X=X, A=A, probs=p.copy(), chosen_seq=[],
                                   rec_index=0, emb_dim=net.emb_dim)
    trace.score_steps.append(record)

    remaining = p.copy()
    n_draws = min(cfg.T, cand.size)
    for t in range(n_draws):
        mass = remaining.sum()
        if forced is not None:
            idx = int(forced[t])
            pos = int(np.flatnonzero(cand == idx)[0])
            if remaining[pos] == 0.0:
                raise ValueError(f"forced index {idx} already selected")
        elif mode == "argmax":
            pos = int(np.argmax(remaining))
        elif mode == "sample":
            pos = _draw(remaining / mass, rng)
        else:
            raise ValueError(f"unknown selection mode {mode!r}")
        idx = int(cand[pos])
        lp = float(np.log(remaining[pos] / mass))
        record.chosen_seq.append(pos)
        state.step_logprobs.append(lp)
        state.logprob_sum += lp
        state.selected.append(idx)
        mask[idx] = False
        remaining[pos] = 0.0
    return state


def apply_token_cap(selection, doc: Document, cap: int) -> list[int]:
    """Longest prefix of the selection (in chosen order) within the token cap.

    The target sentence (first element) is always kept, even when it
    alone exceeds the cap.
    """
    if cap < 1:
        raise ValueError("token cap must be >= 1")
    kept = []
    total = 0
    for pos, idx in enumerate(selection):
        total += doc.sentences[idx].token_count
        if pos > 0 and total > cap:
            break
        kept.append(idx)
    return kept
