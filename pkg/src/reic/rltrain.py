"""Reward computation, policy-gradient updates, and the joint training loop.

Per batch of bags: every document of every path goes through the
selector (embeddings are precomputed, so only the policy and the scoring
head train), selections are token-capped and scored, bag scores are the
elementwise max over paths, the head takes one optimizer step on the
batch loss, and the policy takes one REINFORCE step per path using that
path's own prediction scores as the reward.
"""
from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field

import numpy as np

from . import nn, rehead
from .baselines import BaselineConfig, bridge_filter_select, snippet_select
from .corpus import Corpus, EmbeddingStore, target_sentence_index
from .metrics import (
    RankedPrediction,
    SelectionRecord,
    bridge_mention_stats,
    best_f1,
    pr_auc,
    precision_at_k,
)
from .selector import PolicyNetwork, SelectorConfig, apply_token_cap, select, select_one_step

log = logging.getLogger(__name__)

CKPT_MAGIC = b"REICCKPT"
CKPT_VERSION = 1

SELECTORS = ("reic", "onestep", "snippet", "bridge")


class MissingEmbeddingError(KeyError):
    """An embedding-store entry required by the corpus is absent."""


@dataclass
class RewardConfig:
    lambda_positive: float = 10.0
    lambda_na: float = 1.0
    variant: str = "end2end"            # "end2end" or "threshold"
    clip_negative: bool | None = None   # None = variant default

    def validate(self) -> None:
        if self.lambda_positive <= 0 or self.lambda_na <= 0:
            raise ValueError("lambda weights must be positive")
        if self.variant not in rehead.VARIANTS:
            raise ValueError(f"unknown reward variant {self.variant!r}")

    def clip(self) -> bool:
        if self.clip_negative is None:
            return self.variant == "end2end"
        return self.clip_negative


@dataclass
class TrainConfig:
    lr_policy: float = 3e-3
    lr_re: float = 3e-5
    epochs: int = 4
    batch_size: int = 4
    grad_clip: float = 5.0
    master_seed: int = 0
    T: int = 15
    eval_mode: str = "argmax"           # "argmax" or "sample"
    token_cap: int = 512
    hidden_dim: int = 512
    head_hidden: int = 512
    selector: str = "reic"
    optimizer: str = "adamw"            # or "sgd" for the plain-update path
    theta: float = 0.0
    train_theta: bool = False
    snippet_window: int = 1_000_000
    filter_cap: int = 25
    epoch_eval: bool = False            # per-epoch metrics on the training corpus

    def validate(self) -> None:
        if self.lr_policy <= 0 or self.lr_re <= 0:
            raise ValueError("learning rates must be positive")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("bad epochs/batch_size")
        if self.selector not in SELECTORS:
            raise ValueError(f"unknown selector {self.selector!r}")
        if self.eval_mode not in ("argmax", "sample"):
            raise ValueError(f"unknown eval_mode {self.eval_mode!r}")
        if self.optimizer not in ("adamw", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


@dataclass
class TrainHistory:
    steps: list[int] = field(default_factory=list)
    rewards: list[float] = field(default_factory=list)
    reward_ema: list[float] = field(default_factory=list)
    re_losses: list[float] = field(default_factory=list)
    epochs: list[int] = field(default_factory=list)
    epoch_losses: list[float] = field(default_factory=list)
    epoch_metrics: list[dict] = field(default_factory=list)  # when epoch_eval is on

    EMA_FACTOR = 0.99

    def record(self, step, reward, re_loss, epoch) -> None:
        prev = self.reward_ema[-1] if self.reward_ema else reward
        self.steps.append(step)
        self.rewards.append(reward)
        self.reward_ema.append(self.EMA_FACTOR * prev + (1 - self.EMA_FACTOR) * reward)
        self.re_losses.append(re_loss)
        self.epochs.append(epoch)

    def to_csv(self) -> str:
        lines = ["step,reward,reward_ema,re_loss,epoch"]
        for k in range(len(self.steps)):
            lines.append(
                f"{self.steps[k]},{self.rewards[k]!r},{self.reward_ema[k]!r},"
                f"{self.re_losses[k]!r},{self.epochs[k]}"
            )
        return "\n".join(lines) + "\n"


def reward_end2end(y: np.ndarray, r_true, cfg: RewardConfig) -> float:
    """Margin-over-runner-up reward, scaled by the true score.

    lambda_r * (y_r - max_{i != r} y_i) / y_r, with the no-relation class
    as the last score entry; clipped at zero from below when configured.
    A zero true score makes the reward 0 (degenerate denominator).
    """
    y = np.asarray(y, dtype=float)
    idx = y.size - 1 if r_true is None else int(r_true)
    if not 0 <= idx < y.size:
        raise ValueError(f"relation {r_true} outside score vector of size {y.size}")
    lam = cfg.lambda_na if r_true is None else cfg.lambda_positive
    y_r = float(y[idx])
    if y_r == 0.0:
        log.warning("reward_end2end: true-relation score is 0; reward defined as 0")
        return 0.0
    others = np.delete(y, idx)
    # lambda multiplies last so rewards are exactly homogeneous in it
    r = lam * ((y_r - float(others.max())) / y_r)
    if cfg.clip() and r < 0.0:
        return 0.0
    return r


def reward_threshold(y: np.ndarray, r_true, theta: float, cfg: RewardConfig) -> float:
    """Distance-to-threshold reward for the global-threshold head.

    Positive relations earn lambda_pos * (y_r - theta); no-relation bags
    earn lambda_na * (theta - max_r y_r), rewarding suppression of every
    relation score.
    """
    y = np.asarray(y, dtype=float)
    if r_true is None:
        r = cfg.lambda_na * (theta - float(y.max()))
    else:
        idx = int(r_true)
        if not 0 <= idx < y.size:
            raise ValueError(f"relation {r_true} outside score vector of size {y.size}")
        r = cfg.lambda_positive * (float(y[idx]) - theta)
    if cfg.clip() and r < 0.0:
        return 0.0
    return r


def path_reward(y: np.ndarray, r_true, theta: float, cfg: RewardConfig) -> float:
    if cfg.variant == "threshold":
        return reward_threshold(y, r_true, theta, cfg)
    return reward_end2end(y, r_true, cfg)


def reinforce_update(net: PolicyNetwork, traces, reward: float,
                     opt: nn.OptState | None, cfg: TrainConfig) -> None:
    """One policy-gradient step from the trajectories of one path.

    Accumulates the gradient of reward * sum of trajectory log probs,
    clips the global norm, and applies the configured optimizer. A zero
    reward is a no-op on the parameters.
    """
    if reward == 0.0 or not any(t.score_steps for t in traces):
        for trace in traces:
            trace.consumed = True
        return
    for trace in traces:
        nn.backprop_trajectory(trace, -reward)  # descent on -reward*logprob
    names = [n for n, _, _ in net.parameters()]
    params = [p for _, p, _ in net.parameters()]
    grads = [g for _, _, g in net.parameters()]
    nn.clip_global_norm(grads, cfg.grad_clip)
    if cfg.optimizer == "sgd":
        nn.sgd_step(params, grads, cfg.lr_policy, names)
    else:
        nn.opt_step(params, grads, opt, cfg.lr_policy, names)


def _rng(*entropy) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(list(entropy)))


def _check_store_coverage(corpus: Corpus, store: EmbeddingStore) -> None:
    for bag in corpus.bags:
        for path in bag.paths:
            for doc, ent in ((path.head_doc, bag.head_entity),
                             (path.tail_doc, bag.tail_entity)):
                if (doc.doc_id, ent) not in store:
                    raise MissingEmbeddingError(
                        f"no embedding entry for (doc {doc.doc_id}, entity {ent})"
                    )


@dataclass
class _PathPass:
    """Forward results for one path inside a training batch."""

    bag_id: int
    path_id: int
    y: np.ndarray
    cache: dict
    traces: list
    records: list


def _select_for_doc(policy, store, doc, target, bag, path, tcfg, sel_cfg, base_cfg,
                    rng, mode):
    """Run the configured selector on one document; returns (capped, trace)."""
    Z = store.get(doc.doc_id, target).astype(float)
    tgt = target_sentence_index(doc, target)
    if tcfg.selector == "snippet":
        return snippet_select(doc, tgt, base_cfg), None
    if tcfg.selector == "bridge":
        counted = set(path.bridge_entities) | {target}
        return bridge_filter_select(doc, counted, base_cfg, tgt), None
    fn = select_one_step if tcfg.selector == "onestep" else select
    st = fn(policy, Z, tgt, sel_cfg, rng=rng, mode=mode)
    return apply_token_cap(st.selected, doc, sel_cfg.token_cap), st.trace


def _forward_path(policy, head, store, bag, bag_id, path, path_id, tcfg, sel_cfg,
                  base_cfg, rng_head, rng_tail, mode):
    sel_h, trace_h = _select_for_doc(policy, store, path.head_doc, bag.head_entity,
                                     bag, path, tcfg, sel_cfg, base_cfg, rng_head, mode)
    sel_t, trace_t = _select_for_doc(policy, store, path.tail_doc, bag.tail_entity,
                                     bag, path, tcfg, sel_cfg, base_cfg, rng_tail, mode)
    Zh = store.get(path.head_doc.doc_id, bag.head_entity).astype(float)
    Zt = store.get(path.tail_doc.doc_id, bag.tail_entity).astype(float)
    rep = rehead.path_representation(Zh[sel_h], Zt[sel_t])
    cache: dict = {}
    y = rehead.score_relations(head, rep, cache)
    records = [
        SelectionRecord(bag_id, path_id, "head", list(sel_h),
                        *_evidence_hits(path.head_doc, sel_h)),
        SelectionRecord(bag_id, path_id, "tail", list(sel_t),
                        *_evidence_hits(path.tail_doc, sel_t)),
    ]
    traces = [t for t in (trace_h, trace_t) if t is not None]
    return _PathPass(bag_id, path_id, y, cache, traces, records)


def _evidence_hits(doc, selected) -> tuple[int, int]:
    oracle = {s.index for s in doc.sentences if s.is_evidence_oracle}
    return len(oracle & set(selected)), len(oracle)


def _bag_loss_backward(head, bag, passes, scale):
    """Loss of one bag plus gradient accumulation through the max aggregation."""
    ys = [p.y for p in passes]
    bag_scores = rehead.aggregate_bag(ys)
    if head.variant == "threshold":
        omega = set() if bag.relation is None else {bag.relation}
        loss, dy_bag, dtheta = rehead.loss_threshold_grad(bag_scores, omega, head.theta)
        if head.train_theta:
            head.gtheta += scale * dtheta
    else:
        label = head.n_relations if bag.relation is None else bag.relation
        loss, dy_bag = rehead.loss_end2end_grad(bag_scores, label)
    winners = np.stack(ys).argmax(axis=0)  # first argmax path per coordinate
    per_path_dy = [np.zeros_like(bag_scores) for _ in passes]
    for coord, w in enumerate(winners):
        per_path_dy[w][coord] = dy_bag[coord] * scale
    for p, dy in zip(passes, per_path_dy):
        rehead.score_backward(head, p.cache, dy)
    return loss


def train(corpus: Corpus, store: EmbeddingStore, tcfg: TrainConfig,
          rcfg: RewardConfig):
    """Joint training of the selection policy and the scoring head.

    Returns (policy, head, history). Fully determined by the configs and
    master_seed.
    """
    tcfg.validate()
    rcfg.validate()
    _check_store_coverage(corpus, store)
    n_rel = len(corpus.relations)
    policy = PolicyNetwork(store.dim, tcfg.hidden_dim, _rng(tcfg.master_seed, 1))
    head = rehead.REHead(rcfg.variant, 2 * store.dim, tcfg.head_hidden, n_rel,
                         theta=tcfg.theta, rng=_rng(tcfg.master_seed, 2),
                         train_theta=tcfg.train_theta)
    opt_policy = nn.OptState([p for _, p, _ in policy.parameters()])
    opt_head = nn.OptState([p for _, p, _ in head.parameters()])
    sel_cfg = SelectorConfig(T=tcfg.T, token_cap=tcfg.token_cap,
                             one_step=tcfg.selector == "onestep")
    base_cfg = BaselineConfig(window=tcfg.snippet_window, token_cap=tcfg.token_cap,
                              filter_cap=tcfg.filter_cap)
    history = TrainHistory()
    learned_policy = tcfg.selector in ("reic", "onestep")

    step = 0
    for epoch in range(tcfg.epochs):
        order = np.arange(len(corpus.bags))
        _rng(tcfg.master_seed, 3, epoch).shuffle(order)
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, len(order), tcfg.batch_size):
            batch = order[start:start + tcfg.batch_size]
            passes: dict[int, list[_PathPass]] = {}
            for bag_id in batch:
                bag = corpus.bags[bag_id]
                passes[bag_id] = []
                for path_id, path in enumerate(bag.paths):
                    pp = _forward_path(
                        policy, head, store, bag, int(bag_id), path, path_id,
                        tcfg, sel_cfg, base_cfg,
                        _rng(tcfg.master_seed, 4, epoch, int(bag_id), path_id, 0),
                        _rng(tcfg.master_seed, 4, epoch, int(bag_id), path_id, 1),
                        "sample")
                    passes[bag_id].append(pp)

            # head update on the mean bag loss
            batch_loss = 0.0
            scale = 1.0 / len(batch)
            for bag_id in batch:
                batch_loss += scale * _bag_loss_backward(
                    head, corpus.bags[bag_id], passes[bag_id], scale)
            head_names = [n for n, _, _ in head.parameters()]
            head_params = [p for _, p, _ in head.parameters()]
            head_grads = [g for _, _, g in head.parameters()]
            nn.clip_global_norm(head_grads, tcfg.grad_clip)
            nn.opt_step(head_params, head_grads, opt_head, tcfg.lr_re, head_names)

            # per-path policy updates with that path's own scores as reward
            rewards = []
            for bag_id in batch:
                bag = corpus.bags[bag_id]
                for pp in passes[bag_id]:
                    r = path_reward(pp.y, bag.relation, head.theta, rcfg)
                    rewards.append(r)
                    if learned_policy:
                        reinforce_update(policy, pp.traces, r, opt_policy, tcfg)

            step += 1
            history.record(step, float(np.mean(rewards)), float(batch_loss), epoch)
            epoch_loss += batch_loss
            n_batches += 1
        if n_batches:
            history.epoch_losses.append(epoch_loss / n_batches)
        if tcfg.epoch_eval:
            metrics, _ = evaluate(policy, head, corpus, store, tcfg)
            history.epoch_metrics.append(metrics)
    return policy, head, history


def evaluate(policy: PolicyNetwork, head: rehead.REHead, corpus: Corpus,
             store: EmbeddingStore, tcfg: TrainConfig, p_at_ks=(50, 100)):
    """Bag-level ranked metrics plus selection statistics.

    Deterministic under eval_mode "argmax". Returns (metrics dict,
    selection records).
    """
    tcfg.validate()
    _check_store_coverage(corpus, store)
    sel_cfg = SelectorConfig(T=tcfg.T, token_cap=tcfg.token_cap,
                             one_step=tcfg.selector == "onestep")
    base_cfg = BaselineConfig(window=tcfg.snippet_window, token_cap=tcfg.token_cap,
                              filter_cap=tcfg.filter_cap)
    n_rel = len(corpus.relations)
    preds = []
    records = []
    recalls = []
    for bag_id, bag in enumerate(corpus.bags):
        ys = []
        for path_id, path in enumerate(bag.paths):
            pp = _forward_path(
                policy, head, store, bag, bag_id, path, path_id,
                tcfg, sel_cfg, base_cfg,
                _rng(tcfg.master_seed, 5, bag_id, path_id, 0),
                _rng(tcfg.master_seed, 5, bag_id, path_id, 1),
                tcfg.eval_mode)
            for trace in pp.traces:
                trace.consumed = True
            ys.append(pp.y)
            records.extend(pp.records)
            hits = sum(r.evidence_hits for r in pp.records)
            total = sum(r.evidence_total for r in pp.records)
            if total:
                recalls.append(hits / total)
        bag_scores = rehead.aggregate_bag(ys)
        for r in range(n_rel):
            preds.append(RankedPrediction(bag_id, r, float(bag_scores[r]),
                                          bag.relation == r))
    stats = bridge_mention_stats(records, corpus)
    out = {
        "auc": pr_auc(preds),
        "f1": best_f1(preds),
    }
    for k in p_at_ks:
        out[f"p_at_{k}"] = precision_at_k(preds, k)
    out["evidence_recall"] = float(np.mean(recalls)) if recalls else 0.0
    out["mean_bridge_mentions_pos"] = stats["mean_positive_bags"]
    out["mean_bridge_mentions_na"] = stats["mean_na_bags"]
    return out, records


# ---------------------------------------------------------------------------
# Checkpoints: magic | u32 version | u32 config_len | config utf-8 |
#   u32 n_tensors | per tensor: u32 name_len | name | u32 ndim | dims | f32 data
# ---------------------------------------------------------------------------

def _named_tensors(policy: PolicyNetwork, head: rehead.REHead):
    out = [("policy." + n, p) for n, p, _ in policy.parameters()]
    out += [("head." + n, p) for n, p, _ in head.parameters()]
    return out


def save_checkpoint(path, policy: PolicyNetwork, head: rehead.REHead,
                    config_text: str) -> None:
    tensors = _named_tensors(policy, head)
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC)
        cfg_bytes = config_text.encode("utf-8")
        fh.write(struct.pack("<II", CKPT_VERSION, len(cfg_bytes)))
        fh.write(cfg_bytes)
        fh.write(struct.pack("<I", len(tensors)))
        for name, arr in tensors:
            name_b = name.encode("utf-8")
            fh.write(struct.pack("<I", len(name_b)))
            fh.write(name_b)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_checkpoint(path):
    """Rebuild (policy, head, config_text) from a checkpoint file."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:8] != CKPT_MAGIC:
        raise ValueError(f"bad checkpoint magic {blob[:8]!r}, expected {CKPT_MAGIC!r}")
    offset = 8
    version, cfg_len = struct.unpack_from("<II", blob, offset)
    offset += 8
    if version != CKPT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    config_text = blob[offset:offset + cfg_len].decode("utf-8")
    offset += cfg_len
    (n_tensors,) = struct.unpack_from("<I", blob, offset)
    offset += 4
    tensors = {}
    for _ in range(n_tensors):
        (name_len,) = struct.unpack_from("<I", blob, offset)
        offset += 4
        name = blob[offset:offset + name_len].decode("utf-8")
        offset += name_len
        (ndim,) = struct.unpack_from("<I", blob, offset)
        offset += 4
        shape = struct.unpack_from(f"<{ndim}I", blob, offset)
        offset += 4 * ndim
        count = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(blob, dtype="<f4", count=count, offset=offset)
        offset += 4 * count
        tensors[name] = arr.reshape(shape).astype(float)

    hidden_dim, in_dim = tensors["policy.scorer_hidden.w"].shape
    emb_dim = in_dim - hidden_dim
    policy = PolicyNetwork(emb_dim, hidden_dim)
    head_out, head_hidden = tensors["head.head_out.w"].shape
    rep_dim = tensors["head.head_hidden.w"].shape[1]
    cfg_pairs = dict(
        line.split(" = ", 1) for line in config_text.splitlines()
        if line and not line.startswith("#")
    )
    variant = cfg_pairs.get("head", "end2end")
    n_rel = head_out - 1 if variant == "end2end" else head_out
    theta = float(cfg_pairs.get("theta", 0.0))
    train_theta = cfg_pairs.get("train_theta", "false") == "true"
    head = rehead.REHead(variant, rep_dim, head_hidden, n_rel, theta=theta,
                         train_theta=train_theta)
    for name, param, _ in policy.parameters():
        param[...] = tensors["policy." + name]
    for name, param, _ in head.parameters():
        param[...] = tensors["head." + name]
    return policy, head, config_text
