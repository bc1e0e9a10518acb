"""Toy relation-scoring heads over selected-sentence embeddings.

A path is represented by the concatenated means of its selected head-doc
and tail-doc embeddings. Two loss structures are supported: plain softmax
cross-entropy over relations plus a no-relation class ("end2end"), and a
multi-label global-threshold loss that pushes gold-relation scores above
a threshold and all others below it ("threshold").
"""
from __future__ import annotations

import numpy as np

from . import nn

VARIANTS = ("end2end", "threshold")


def path_representation(head_sel_emb: np.ndarray, tail_sel_emb: np.ndarray) -> np.ndarray:
    """Concat of the row-means of the two selected-embedding matrices."""
    head_sel_emb = np.asarray(head_sel_emb, dtype=float)
    tail_sel_emb = np.asarray(tail_sel_emb, dtype=float)
    if head_sel_emb.ndim != 2 or head_sel_emb.shape[0] == 0:
        raise ValueError("empty head selection")
    if tail_sel_emb.ndim != 2 or tail_sel_emb.shape[0] == 0:
        raise ValueError("empty tail selection")
    return np.concatenate([head_sel_emb.mean(axis=0), tail_sel_emb.mean(axis=0)])


class REHead:
    """Two-layer scorer from path representations to relation scores.

    The end2end variant appends one extra output for the no-relation
    class; the threshold variant scores exactly the relation vocabulary
    and carries a global threshold theta (trainable only when asked).
    """

    def __init__(self, variant: str, rep_dim: int, hidden_dim: int, n_relations: int,
                 theta: float = 0.0, rng: np.random.Generator | None = None,
                 train_theta: bool = False):
        if variant not in VARIANTS:
            raise ValueError(f"unknown head variant {variant!r}")
        self.variant = variant
        self.n_relations = n_relations
        out_dim = n_relations + 1 if variant == "end2end" else n_relations
        self.hidden = nn.DenseLayer(rep_dim, hidden_dim, rng)
        self.out = nn.DenseLayer(hidden_dim, out_dim, rng)
        self.theta_arr = np.array([float(theta)])
        self.gtheta = np.zeros(1)
        self.train_theta = train_theta

    @property
    def theta(self) -> float:
        return float(self.theta_arr[0])

    def parameters(self):
        params = self.hidden.parameters("head_hidden") + self.out.parameters("head_out")
        if self.train_theta:
            params.append(("theta", self.theta_arr, self.gtheta))
        return params


def score_relations(head: REHead, rep: np.ndarray, cache: dict | None = None) -> np.ndarray:
    """Raw relation scores for one path representation."""
    rep = np.asarray(rep, dtype=float)
    a = np.tanh(nn.linear_forward(head.hidden, rep))
    y = nn.linear_forward(head.out, a)
    if cache is not None:
        cache["rep"] = rep
        cache["a"] = a
    return y


def score_backward(head: REHead, cache: dict, dy: np.ndarray) -> None:
    """Accumulate scorer gradients for one cached forward pass."""
    a = cache["a"]
    head.out.gw += np.outer(dy, a)
    head.out.gb += dy
    da = head.out.w.T @ dy
    dpre = da * (1.0 - a ** 2)
    head.hidden.gw += np.outer(dpre, cache["rep"])
    head.hidden.gb += dpre


def aggregate_bag(path_scores) -> np.ndarray:
    """Elementwise maximum of the per-path score vectors."""
    if not path_scores:
        raise ValueError("aggregate_bag: no paths")
    out = np.array(path_scores[0], dtype=float)
    for y in path_scores[1:]:
        out = np.maximum(out, y)
    return out


def _logsumexp(values: np.ndarray) -> float:
    m = values.max()
    return float(m + np.log(np.sum(np.exp(values - m))))


def loss_threshold(y: np.ndarray, omega, theta: float) -> float:
    """Global-threshold multi-label loss, log-sum-exp stabilized.

    log(e^theta + sum_{r not in omega} e^{y_r})
      + log(e^{-theta} + sum_{r in omega} e^{-y_r})
    """
    y = np.asarray(y, dtype=float)
    omega = set(omega)
    in_mask = np.zeros(y.size, dtype=bool)
    for r in omega:
        if not 0 <= r < y.size:
            raise ValueError(f"relation {r} outside score vector of size {y.size}")
        in_mask[r] = True
    neg_terms = np.concatenate([[theta], y[~in_mask]])
    pos_terms = np.concatenate([[-theta], -y[in_mask]])
    return _logsumexp(neg_terms) + _logsumexp(pos_terms)


def loss_threshold_grad(y: np.ndarray, omega, theta: float):
    """(loss, d loss/d y, d loss/d theta) for the threshold loss."""
    y = np.asarray(y, dtype=float)
    omega = set(omega)
    in_mask = np.zeros(y.size, dtype=bool)
    for r in omega:
        in_mask[r] = True
    neg_terms = np.concatenate([[theta], y[~in_mask]])
    pos_terms = np.concatenate([[-theta], -y[in_mask]])
    lse_neg = _logsumexp(neg_terms)
    lse_pos = _logsumexp(pos_terms)
    w_neg = np.exp(neg_terms - lse_neg)   # softmax weights of the first log
    w_pos = np.exp(pos_terms - lse_pos)
    dy = np.zeros_like(y)
    dy[~in_mask] = w_neg[1:]
    dy[in_mask] = -w_pos[1:]
    dtheta = float(w_neg[0] - w_pos[0])
    return lse_neg + lse_pos, dy, dtheta


def loss_end2end(scores: np.ndarray, label: int) -> float:
    """Softmax cross-entropy over relations plus the no-relation class."""
    scores = np.asarray(scores, dtype=float)
    if not 0 <= label < scores.size:
        raise ValueError(f"label {label} outside score vector of size {scores.size}")
    return _logsumexp(scores) - float(scores[label])


def loss_end2end_grad(scores: np.ndarray, label: int):
    """(loss, d loss/d scores) for the cross-entropy loss."""
    scores = np.asarray(scores, dtype=float)
    if not 0 <= label < scores.size:
        raise ValueError(f"label {label} outside score vector of size {scores.size}")
    lse = _logsumexp(scores)
    p = np.exp(scores - lse)
    dy = p.copy()
    dy[label] -= 1.0
    return lse - float(scores[label]), dy
