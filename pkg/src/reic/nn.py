"""Minimal dense numerical kernel.

Hand-written linear and LSTM layers with explicit gradient buffers,
masked softmax, backpropagation through whole selection trajectories
(including backprop through time across the recurrent steps), an
AdamW-style optimizer, and a central finite-difference gradient checker.

Everything operates on float64 numpy arrays. All forward ops are pure
functions of parameters and inputs.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class EmptyCandidatesError(ValueError):
    """Masked softmax was asked to normalize over zero unmasked entries."""


class TraceReplayError(RuntimeError):
    """A trajectory trace was backpropagated twice without a reset."""


class NonFiniteGradientError(RuntimeError):
    """A gradient buffer contained NaN or inf; training must abort."""


def _uniform_init(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    limit = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-limit, limit, size=shape)


class DenseLayer:
    """Fully connected layer y = W x + b with explicit grad buffers.

    With rng=None all weights start at zero (useful for tests); otherwise
    weights are uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) and biases zero.
    """

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator | None = None):
        self.in_dim = in_dim
        self.out_dim = out_dim
        if rng is None:
            self.w = np.zeros((out_dim, in_dim))
        else:
            self.w = _uniform_init(rng, (out_dim, in_dim), in_dim)
        self.b = np.zeros(out_dim)
        self.gw = np.zeros_like(self.w)
        self.gb = np.zeros_like(self.b)

    def parameters(self, prefix: str):
        return [(prefix + ".w", self.w, self.gw), (prefix + ".b", self.b, self.gb)]


def linear_forward(layer: DenseLayer, x: np.ndarray) -> np.ndarray:
    """W x + b for a vector x, or row-wise for a 2-D batch of inputs."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != layer.in_dim:
        raise ValueError(
            f"linear_forward: input dim {x.shape[-1]} != layer in_dim {layer.in_dim}"
        )
    return x @ layer.w.T + layer.b


def masked_softmax(logits: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Softmax over the positions where mask is True; exact zeros elsewhere.

    Stabilized by max subtraction. Raises EmptyCandidatesError on an
    all-False mask.
    """
    logits = np.asarray(logits, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    if logits.shape != mask.shape:
        raise ValueError(f"masked_softmax: shapes differ {logits.shape} vs {mask.shape}")
    if not mask.any():
        raise EmptyCandidatesError("masked_softmax: no unmasked candidates")
    active = logits[mask]
    e = np.exp(active - active.max())
    out = np.zeros_like(logits)
    out[mask] = e / e.sum()
    return out


@dataclass
class RecurrentState:
    """Hidden and cell vectors of the recurrent cell."""

    h: np.ndarray
    c: np.ndarray

    @classmethod
    def zeros(cls, hidden_dim: int) -> "RecurrentState":
        return cls(np.zeros(hidden_dim), np.zeros(hidden_dim))


class RecurrentCell:
    """Single LSTM cell with input/forget/output/candidate gates.

    Each gate has a weight matrix over the concatenated [x, h_prev] vector
    plus a bias, exposed as the fields w_i/w_f/w_o/w_g and b_i/b_f/b_o/b_g.
    Storage is one stacked [4*hidden, input+hidden] matrix so a step costs
    a single matmul; the per-gate fields are views into it. The
    forget-gate bias starts at +1 for stability.
    """

    GATES = ("i", "f", "o", "g")

    def __init__(self, input_dim: int, hidden_dim: int, rng: np.random.Generator | None = None):
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        u = input_dim + hidden_dim
        if rng is None:
            self.w_all = np.zeros((4 * hidden_dim, u))
        else:
            self.w_all = _uniform_init(rng, (4 * hidden_dim, u), u)
        self.b_all = np.zeros(4 * hidden_dim)
        self.gw_all = np.zeros_like(self.w_all)
        self.gb_all = np.zeros_like(self.b_all)
        for k, gate in enumerate(self.GATES):
            rows = slice(k * hidden_dim, (k + 1) * hidden_dim)
            setattr(self, "w_" + gate, self.w_all[rows])
            setattr(self, "b_" + gate, self.b_all[rows])
            setattr(self, "gw_" + gate, self.gw_all[rows])
            setattr(self, "gb_" + gate, self.gb_all[rows])
        self.b_f += 1.0

    def parameters(self, prefix: str):
        return [(prefix + ".w_all", self.w_all, self.gw_all),
                (prefix + ".b_all", self.b_all, self.gb_all)]


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # overflow of exp(-x) saturates to the correct limit 0
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-x))


@dataclass
class RecStepRecord:
    """Cached activations of one recurrent step, for the backward pass.

    sig holds the stacked sigmoid gate activations [i, f, o]; g is the
    tanh candidate gate.
    """

    u: np.ndarray        # concatenated [x, h_prev]
    c_prev: np.ndarray
    sig: np.ndarray      # [3*hidden] = i, f, o
    g: np.ndarray
    c: np.ndarray
    tanh_c: np.ndarray

    @property
    def i(self):
        hd = self.g.size
        return self.sig[:hd]

    @property
    def f(self):
        hd = self.g.size
        return self.sig[hd:2 * hd]

    @property
    def o(self):
        hd = self.g.size
        return self.sig[2 * hd:]


@dataclass
class ScoreStepRecord:
    """Cached scorer pass of one sampling step.

    X holds the per-candidate inputs [z_m, h], A the hidden activations,
    probs the masked-softmax output over the candidates, chosen the
    position of the sampled candidate within X, and rec_index the
    recurrent step that produced the h slice of X.
    """

    X: np.ndarray
    A: np.ndarray
    probs: np.ndarray
    chosen: int
    rec_index: int
    emb_dim: int


@dataclass
class OneStepScoreRecord:
    """Single scorer pass reused for several without-replacement draws."""

    X: np.ndarray
    A: np.ndarray
    probs: np.ndarray
    chosen_seq: list[int]
    rec_index: int
    emb_dim: int


@dataclass
class TrajectoryTrace:
    """Forward records of one selection trajectory plus the layers they used."""

    scorer_hidden: DenseLayer
    scorer_out: DenseLayer
    cell: RecurrentCell
    rec_steps: list = field(default_factory=list)
    score_steps: list = field(default_factory=list)
    consumed: bool = False


def recurrent_step(
    cell: RecurrentCell,
    x: np.ndarray,
    state: RecurrentState,
    trace: TrajectoryTrace | None = None,
) -> RecurrentState:
    """One LSTM step; appends its activation record to trace when given."""
    x = np.asarray(x, dtype=float)
    if x.shape != (cell.input_dim,):
        raise ValueError(f"recurrent_step: input shape {x.shape} != ({cell.input_dim},)")
    u = np.concatenate([x, state.h])
    pre = cell.w_all @ u
    pre += cell.b_all
    hd = cell.hidden_dim
    sig = _sigmoid(pre[:3 * hd])
    g = np.tanh(pre[3 * hd:])
    c = sig[hd:2 * hd] * state.c + sig[:hd] * g
    tanh_c = np.tanh(c)
    h = sig[2 * hd:] * tanh_c
    if trace is not None:
        trace.rec_steps.append(RecStepRecord(u, state.c, sig, g, c, tanh_c))
    return RecurrentState(h, c)


def recurrent_backward(
    cell: RecurrentCell,
    rec: RecStepRecord,
    dh: np.ndarray,
    dc: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Backward through one LSTM step.

    Accumulates parameter gradients on the cell and returns
    (dh_prev, dc_prev) for the preceding step.
    """
    hd = cell.hidden_dim
    i, f, o = rec.sig[:hd], rec.sig[hd:2 * hd], rec.sig[2 * hd:]
    dc_total = dc + dh * o * (1.0 - rec.tanh_c ** 2)
    dgates = np.concatenate([dc_total * rec.g, dc_total * rec.c_prev, dh * rec.tanh_c])
    dpre = np.concatenate([dgates * rec.sig * (1.0 - rec.sig),
                           dc_total * i * (1.0 - rec.g ** 2)])
    cell.gw_all += np.outer(dpre, rec.u)
    cell.gb_all += dpre
    du = cell.w_all.T @ dpre
    dh_prev = du[cell.input_dim:]
    dc_prev = dc_total * f
    return dh_prev, dc_prev


def _score_step_backward(trace: TrajectoryTrace, record, scale: float, dh_by_rec: np.ndarray):
    """Backprop the scorer part of one score record; accumulate dh per rec step."""
    dlogit = np.zeros(record.probs.shape[0])
    if isinstance(record, OneStepScoreRecord):
        # log prob of a without-replacement sequence from one fixed softmax:
        # sum_t [log p_{i_t} - log(mass of remaining candidates at t)]
        remaining = np.ones(record.probs.shape[0], dtype=bool)
        for pos in record.chosen_seq:
            mass = record.probs[remaining].sum()
            dlogit[pos] += scale
            dlogit[remaining] -= scale * record.probs[remaining] / mass
            remaining[pos] = False
    else:
        dlogit[record.chosen] += scale
        dlogit -= scale * record.probs

    w2 = trace.scorer_out.w  # [1, hidden]
    trace.scorer_out.gw += dlogit[None, :] @ record.A
    trace.scorer_out.gb += dlogit.sum()
    dA = dlogit[:, None] * w2[0][None, :]
    dpre = dA * (1.0 - record.A ** 2)
    trace.scorer_hidden.gw += dpre.T @ record.X
    trace.scorer_hidden.gb += dpre.sum(axis=0)
    dX = dpre @ trace.scorer_hidden.w
    dh_by_rec[record.rec_index] += dX[:, record.emb_dim:].sum(axis=0)


def backprop_trajectory(trace: TrajectoryTrace, objective_scale: float) -> None:
    """Accumulate d[objective_scale * sum_t log prob_t] into the grad buffers.

    Walks the score records, then backpropagates through time across the
    recurrent steps. A trace can only be replayed once.
    """
    if trace.consumed:
        raise TraceReplayError("trajectory trace already backpropagated")
    trace.consumed = True
    if not trace.score_steps:
        return
    hidden_dim = trace.cell.hidden_dim
    dh_by_rec = np.zeros((len(trace.rec_steps), hidden_dim))
    for record in trace.score_steps:
        _score_step_backward(trace, record, objective_scale, dh_by_rec)
    dh = np.zeros(hidden_dim)
    dc = np.zeros(hidden_dim)
    for k in range(len(trace.rec_steps) - 1, -1, -1):
        dh = dh + dh_by_rec[k]
        dh, dc = recurrent_backward(trace.cell, trace.rec_steps[k], dh, dc)


class OptState:
    """Adaptive-moment optimizer state (AdamW style, decoupled weight decay).

    Holds first/second moments aligned with a fixed parameter list plus a
    shared step count.
    """

    def __init__(self, params, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8, weight_decay: float = 0.0):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]


def _check_finite(grads, names=None):
    for idx, g in enumerate(grads):
        if not np.all(np.isfinite(g)):
            name = names[idx] if names else f"param[{idx}]"
            raise NonFiniteGradientError(f"non-finite gradient in {name}")


def opt_step(params, grads, opt: OptState, lr: float, names=None) -> None:
    """One bias-corrected adaptive-moment update; zeroes grads afterwards."""
    if lr <= 0:
        raise ValueError("opt_step: lr must be positive")
    _check_finite(grads, names)
    opt.t += 1
    bc1 = 1.0 - opt.beta1 ** opt.t
    bc2 = 1.0 - opt.beta2 ** opt.t
    for p, g, m, v in zip(params, grads, opt.m, opt.v):
        m *= opt.beta1
        m += (1.0 - opt.beta1) * g
        v *= opt.beta2
        v += (1.0 - opt.beta2) * g * g
        update = (m / bc1) / (np.sqrt(v / bc2) + opt.eps)
        if opt.weight_decay:
            p -= lr * opt.weight_decay * p
        p -= lr * update
        g[...] = 0.0


def sgd_step(params, grads, lr: float, names=None) -> None:
    """Plain gradient-descent update; zeroes grads afterwards."""
    _check_finite(grads, names)
    for p, g in zip(params, grads):
        p -= lr * g
        g[...] = 0.0


def clip_global_norm(grads, max_norm: float) -> float:
    """Scale all grads in place so their joint L2 norm is <= max_norm."""
    total = 0.0
    for g in grads:
        total += float(np.sum(g * g))
    norm = np.sqrt(total)
    if norm > max_norm and norm > 0:
        scale = max_norm / norm
        for g in grads:
            g *= scale
    return norm


def finite_diff_grad(f, params, eps: float = 1e-5):
    """Central-difference gradient of scalar f w.r.t. a list of arrays.

    Perturbs one coordinate at a time; f must be deterministic.
    """
    if eps <= 0:
        raise ValueError("finite_diff_grad: eps must be positive")
    grads = []
    for p in params:
        g = np.zeros_like(p)
        flat_p = p.ravel()
        flat_g = g.ravel()
        for k in range(flat_p.size):
            orig = flat_p[k]
            flat_p[k] = orig + eps
            hi = f()
            flat_p[k] = orig - eps
            lo = f()
            flat_p[k] = orig
            flat_g[k] = (hi - lo) / (2.0 * eps)
        grads.append(g)
    return grads
