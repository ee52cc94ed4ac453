"""Attention LSTM decoder with coverage and a copy mechanism, plus search."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .encoder import _param, glorot, init_lstm_params, lstm_cell, sub_params
from .tensor import Tensor
from .vocab import BOS_ID, EOS_ID, UNK_ID

log = logging.getLogger(__name__)

PROB_FLOOR = 1e-12


@dataclass
class DecoderConfig:
    hidden: int = 900
    embedding_dim: int = 300
    num_layers: int = 2
    attention_dim: int | None = None
    input_feeding: bool = True
    coverage_penalty: float = 0.0
    max_len: int = 250

    def __post_init__(self):
        if self.attention_dim is None:
            self.attention_dim = self.hidden
        if min(self.hidden, self.embedding_dim, self.num_layers, self.attention_dim) <= 0:
            raise ValueError("decoder dimensions must be positive")


@dataclass
class ExtendedVocab:
    """Target vocabulary ids plus ids ``base_size + k`` for copy-only source labels."""

    base_size: int
    oov: list[str] = field(default_factory=list)

    @classmethod
    def for_source(cls, labels, tgt_vocab):
        ext = cls(len(tgt_vocab))
        for label in labels:
            if label not in tgt_vocab and label not in ext.oov:
                ext.oov.append(label)
        return ext

    def __len__(self):
        return self.base_size + len(self.oov)

    def id(self, token, tgt_vocab):
        if token in tgt_vocab:
            return tgt_vocab.id(token)
        if token in self.oov:
            return self.base_size + self.oov.index(token)
        return UNK_ID

    def token(self, idx, tgt_vocab):
        if idx < self.base_size:
            return tgt_vocab.token(idx)
        return self.oov[idx - self.base_size]


@dataclass
class EncoderContext:
    """Encoder output as seen by the decoder (batched, padded)."""

    H: Tensor          # (B, N, C)
    HW: Tensor         # (B, N, A): H @ W_h, precomputed
    mask: np.ndarray   # (B, N) bool
    ext_ids: np.ndarray  # (B, N) extended-vocab id of each node's label
    ext_size: int

    def take(self, rows):
        rows = np.asarray(rows, dtype=np.int64)
        return EncoderContext(T.gather_rows(self.H, rows), T.gather_rows(self.HW, rows),
                              self.mask[rows], self.ext_ids[rows], self.ext_size)


@dataclass
class DecoderState:
    layers: list        # [(h, c)] per LSTM layer
    coverage: Tensor    # (B, N)
    context: Tensor     # (B, C)

    @classmethod
    def initial(cls, config, enc):
        B, N, C = enc.H.shape
        dtype = enc.H.dtype
        zeros = lambda *s: Tensor(np.zeros(s, dtype=dtype))  # noqa: E731
        layers = [(zeros(B, config.hidden), zeros(B, config.hidden)) for _ in range(config.num_layers)]
        return cls(layers, zeros(B, N), zeros(B, C))

    def take(self, rows):
        rows = np.asarray(rows, dtype=np.int64)
        pick = lambda t: T.gather_rows(t, rows)  # noqa: E731
        return DecoderState([(pick(h), pick(c)) for h, c in self.layers],
                            pick(self.coverage), pick(self.context))


@dataclass
class Hypothesis:
    tokens: list[int]
    score: float
    finished: bool = False
    state_row: int | None = None

    def normalized(self):
        return self.score / max(len(self.tokens), 1)


def init_decoder_params(config, tgt_vocab_size, context_dim, seed=1, dtype=np.float32):
    rng = np.random.default_rng(seed)
    params = {}
    H, E, A, C = config.hidden, config.embedding_dim, config.attention_dim, context_dim
    table = rng.uniform(-0.1, 0.1, size=(tgt_vocab_size, E)).astype(dtype)
    table[0] = 0.0
    _param(params, "decoder.embed", table)
    first_in = E + C if config.input_feeding else E
    for layer in range(config.num_layers):
        init_lstm_params(params, f"decoder.lstm{layer}", first_in if layer == 0 else H, H, rng, dtype)
    _param(params, "decoder.attn.Wh", glorot(rng, C, A, dtype))
    _param(params, "decoder.attn.Ws", glorot(rng, H, A, dtype))
    _param(params, "decoder.attn.wc", rng.uniform(-0.1, 0.1, size=A).astype(dtype))
    _param(params, "decoder.attn.b", np.zeros(A, dtype=dtype))
    _param(params, "decoder.attn.v", glorot(rng, A, 1, dtype))
    _param(params, "decoder.out.W", glorot(rng, H + C, tgt_vocab_size, dtype))
    _param(params, "decoder.out.b", np.zeros(tgt_vocab_size, dtype=dtype))
    _param(params, "decoder.pgen.W", glorot(rng, C + H + E, 1, dtype))
    _param(params, "decoder.pgen.b", np.zeros(1, dtype=dtype))
    return params


def make_context(H, mask, ext_ids, ext_size, params):
    return EncoderContext(H, H @ params["decoder.attn.Wh"], np.asarray(mask, dtype=bool),
                          np.asarray(ext_ids, dtype=np.int64), ext_size)


def attention(s, enc, coverage, params):
    """Coverage attention; returns ``(a, context)`` with ``a`` of shape (B, N).

    ``e_i = v . tanh(W_h h_i + W_s s + w_c c_i + b)``, ``a = softmax(e)`` over
    unmasked nodes, ``context = sum_i a_i h_i``.
    """
    B, N, C = enc.H.shape
    if coverage.shape != (B, N):
        raise T.ShapeError(f"attention: coverage shape {coverage.shape} vs nodes {(B, N)}")
    A = enc.HW.shape[-1]
    pre = (enc.HW
           + T.reshape(s @ params["decoder.attn.Ws"], (B, 1, A))
           + T.reshape(coverage, (B, N, 1)) * params["decoder.attn.wc"]
           + params["decoder.attn.b"])
    scores = T.reshape(T.tanh(pre) @ params["decoder.attn.v"], (B, N))
    a = T.softmax(scores, mask=enc.mask)
    context = T.reshape(T.reshape(a, (B, 1, N)) @ enc.H, (B, C))
    return a, context


def copy_distribution(p_vocab, a, p_gen, ext_ids, ext_size):
    """``p_gen * p_vocab(w) + (1 - p_gen) * sum of a_i over nodes labeled w``."""
    B, V = p_vocab.shape
    if p_gen.ndim == 1:
        p_gen = T.reshape(p_gen, (B, 1))
    values = T.concat([p_gen * p_vocab, (1.0 - p_gen) * a], axis=-1)
    index = np.concatenate([np.broadcast_to(np.arange(V), (B, V)), np.asarray(ext_ids)], axis=-1)
    return T.scatter_add(values, index, ext_size)


def decode_step(params, config, prev_tokens, state, enc):
    """One decoder step; returns ``(P, a, new_state)``.

    ``P`` is the distribution over the extended vocabulary and ``a`` the
    attention over source nodes. Previous tokens outside the base vocabulary
    (copied words) are embedded as UNK.
    """
    table = params["decoder.embed"]
    prev = np.asarray(prev_tokens, dtype=np.int64)
    prev = np.where(prev >= table.shape[0], UNK_ID, prev)
    x = T.gather_rows(table, prev)
    inp = T.concat([x, state.context], axis=-1) if config.input_feeding else x
    layers = []
    for layer, (h, c) in enumerate(state.layers):
        p = sub_params(params, f"decoder.lstm{layer}")
        h, c = lstm_cell(inp @ p["Wx"] + p["b"], h, c, p["Wh"])
        layers.append((h, c))
        inp = h
    s = inp
    a, context = attention(s, enc, state.coverage, params)
    logits = T.concat([s, context], axis=-1) @ params["decoder.out.W"] + params["decoder.out.b"]
    p_vocab = T.softmax(logits)
    p_gen = T.sigmoid(T.concat([context, s, x], axis=-1) @ params["decoder.pgen.W"]
                      + params["decoder.pgen.b"])
    P = copy_distribution(p_vocab, a, p_gen, enc.ext_ids, enc.ext_size)
    return P, a, DecoderState(layers, state.coverage + a, context)


def nll_loss(step_probs, targets, mask=None, floor=PROB_FLOOR):
    """``-sum_t log p(y_t)`` summed over time and averaged over the batch.

    ``step_probs`` is a list of (B, V) distributions, one per target position;
    ``targets`` is (B, T). Positions with ``mask == 0`` contribute nothing.
    Probabilities below ``floor`` are clamped before the log.
    """
    targets = np.asarray(targets, dtype=np.int64)
    if targets.ndim == 1:
        targets = targets[None, :]
    B, steps = targets.shape
    if len(step_probs) != steps:
        raise ValueError(f"nll_loss: {len(step_probs)} distributions for {steps} targets")
    total = None
    clamped = 0
    for t, P in enumerate(step_probs):
        if P.ndim == 1:
            P = T.reshape(P, (1, -1))
        p = T.pick(P, targets[:, t])
        live = np.ones(B, dtype=bool) if mask is None else np.asarray(mask[:, t], dtype=bool)
        clamped += int(np.sum((p.data < floor) & live))
        term = T.log(p, floor=floor)
        if mask is not None:
            term = term * np.asarray(mask[:, t], dtype=P.dtype)
        term = T.sum(term)
        total = term if total is None else total + term
    if clamped:
        log.warning("nll_loss: %d target probabilities clamped at %g", clamped, floor)
    return total * (-1.0 / B)


def coverage_loss(attns, coverages, mask=None):
    """``sum_t sum_i min(a_t_i, c_t_i)``, averaged over the batch."""
    total = None
    for t, (a, c) in enumerate(zip(attns, coverages)):
        term = T.sum(T.minimum(a, c), axis=-1)
        if mask is not None:
            term = term * np.asarray(mask[:, t], dtype=a.dtype)
        term = T.sum(term)
        total = term if total is None else total + term
    return total * (1.0 / attns[0].shape[0])


# -- search -------------------------------------------------------------------


def greedy_search(step_fn, state, batch_size, max_len, bos_id=BOS_ID, eos_id=EOS_ID):
    """Argmax decoding for a batch; sequences stop at EOS (which is dropped)."""
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    prev = np.full(batch_size, bos_id, dtype=np.int64)
    out = [[] for _ in range(batch_size)]
    done = np.zeros(batch_size, dtype=bool)
    for _ in range(max_len):
        probs, state = step_fn(prev, state)
        prev = np.argmax(probs, axis=-1)
        for b in np.flatnonzero(~done):
            if prev[b] == eos_id:
                done[b] = True
            else:
                out[b].append(int(prev[b]))
        if done.all():
            break
    return out


def beam_search(step_fn, state, beam_size, max_len, bos_id=BOS_ID, eos_id=EOS_ID):
    """Beam search over ``step_fn(prev_tokens, state) -> (probs (K, V), state)``.

    ``state`` must support ``take(rows)``. Hypotheses ending in EOS are set
    aside; the result is the finished hypothesis with the best
    length-normalized log-probability, or the best live one at ``max_len``.
    Returns the token list without EOS.
    """
    if beam_size < 1:
        raise ValueError("beam_size must be >= 1")
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    live = [Hypothesis([], 0.0, state_row=0)]
    finished = []
    for _ in range(max_len):
        prev = np.array([h.tokens[-1] if h.tokens else bos_id for h in live], dtype=np.int64)
        probs, state = step_fn(prev, state)
        logp = np.log(np.maximum(np.asarray(probs, dtype=np.float64), PROB_FLOOR))
        candidates = []
        for k, hyp in enumerate(live):
            top = np.argsort(-logp[k], kind="stable")[:beam_size]
            candidates += [(hyp.score + logp[k, w], k, int(w)) for w in top]
        candidates.sort(key=lambda c: -c[0])
        new_live = []
        for score, k, w in candidates:
            if len(new_live) == beam_size:
                break
            tokens = live[k].tokens + [w]
            if w == eos_id:
                finished.append(Hypothesis(tokens, score, finished=True))
            else:
                new_live.append(Hypothesis(tokens, score, state_row=k))
        if len(finished) >= beam_size or not new_live:
            live = new_live
            break
        state = state.take([h.state_row for h in new_live])
        for row, h in enumerate(new_live):
            h.state_row = row
        live = new_live
    pool = finished if finished else live
    best = max(pool, key=Hypothesis.normalized)
    return [t for t in best.tokens if t != eos_id]
