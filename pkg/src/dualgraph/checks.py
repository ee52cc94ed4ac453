"""Finite-difference gradient checks for every differentiable component.

Each ``check_*`` builds a small random float64 instance from ``seed``, reduces
the component's output to a scalar with fixed random weights, and returns the
largest relative error between reverse-mode and central-difference gradients.
Instances whose ReLU / LeakyReLU / ``min`` inputs fall near the kink are
redrawn, since finite differences are meaningless there.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .amr import AmrExample, parse_penman
from .data import make_batch
from .decoder import (DecoderConfig, attention, copy_distribution, coverage_loss,
                      init_decoder_params, make_context)
from .encoder import (EncoderConfig, as_adjacency, bilstm_encode, gat_layer,
                      gin_layer, ggnn_layer, init_graph_encoder_params, init_lstm_params, sub_params)
from .gradcheck import finite_difference, max_relative_error
from .model import Graph2Seq
from .tensor import Tensor
from .vocab import build_vocab

EPS = 1e-3
KINK_MARGIN = 1e-2


def _leaf(x):
    return Tensor(np.asarray(x, dtype=np.float64), requires_grad=True)


def _weighted_sum(out, weights):
    return T.sum(out * weights)


def compare(loss_fn, params, eps=EPS, max_coords=None, rng=None):
    """Max relative error of ``backward(loss_fn(params))`` against central differences."""
    for p in params.values():
        p.data = np.asarray(p.data, dtype=np.float64)
        p.grad = None
    T.backward(loss_fn(params))
    analytic = {k: (p.grad if p.grad is not None else np.zeros_like(p.data)) for k, p in params.items()}
    numeric = finite_difference(loss_fn, params, eps, max_coords, rng)
    return max_relative_error(analytic, numeric)


def random_in_neighbors(rng, n, m):
    edges = [(int(rng.integers(n)), int(rng.integers(n))) for _ in range(m)]
    ins = [[] for _ in range(n)]
    for src, dst in edges:
        ins[dst].append(src)
    return [tuple(x) for x in ins]


def _layer_instance(rng, kind, n=5, d=4, heads=1):
    cfg = EncoderConfig(kind, num_layers=1, graph_hidden=d, embedding_dim=d, gat_heads=heads)
    raw = {}
    init_graph_encoder_params(raw, "g", cfg, rng, np.float64)
    params = {k: _leaf(v.data + 0.1 * rng.standard_normal(v.shape)) for k, v in
              sub_params(raw, "g.layer0").items()}
    params["H"] = _leaf(rng.standard_normal((n, d)))
    return params, random_in_neighbors(rng, n, 2 * n)


def _near_kink(values):
    return bool(np.any(np.abs(values) < KINK_MARGIN))


def check_ggnn(seed):
    rng = np.random.default_rng(seed)
    params, ins = _layer_instance(rng, "ggnn")
    weights = rng.standard_normal(params["H"].shape)
    return compare(lambda p: _weighted_sum(ggnn_layer(p["H"], ins, p), weights), params)


def check_gat(seed, heads=1):
    rng = np.random.default_rng(seed)
    while True:
        params, ins = _layer_instance(rng, "gat", heads=heads)
        with T.no_grad():
            adj = as_adjacency(ins, params["H"].shape[0])
            Wh = params["H"].data @ params["W2"].data
            dh = Wh.shape[1] // heads
            Whh = Wh.reshape(len(Wh), heads, dh)
            a = params["a"].data
            s_dst = (Whh * a[:, :dh]).sum(-1)
            s_src = (Whh * a[:, dh:]).sum(-1)
            coo = adj.tocoo()
            dst = np.concatenate([np.arange(adj.shape[0]), coo.row])
            src = np.concatenate([np.arange(adj.shape[0]), coo.col])
            if not _near_kink(s_dst[dst] + s_src[src]):
                break
    weights = rng.standard_normal(params["H"].shape)
    return compare(lambda p: _weighted_sum(gat_layer(p["H"], ins, p, heads), weights), params)


def check_gin(seed):
    rng = np.random.default_rng(seed)
    while True:
        params, ins = _layer_instance(rng, "gin")
        adj = as_adjacency(ins, params["H"].shape[0])
        H = params["H"].data
        pre = (H + adj @ H) @ params["Wa"].data + params["ba"].data
        if not _near_kink(pre):
            break
    weights = rng.standard_normal(params["H"].shape)
    return compare(lambda p: _weighted_sum(gin_layer(p["H"], ins, p), weights), params)


def check_bilstm(seed, batch=2, n=4, d=2, hidden=2):
    rng = np.random.default_rng(seed)
    raw = {}
    init_lstm_params(raw, "bilstm.fwd", d, hidden, rng, np.float64)
    init_lstm_params(raw, "bilstm.bwd", d, hidden, rng, np.float64)
    params = {k: _leaf(v.data + 0.1 * rng.standard_normal(v.shape)) for k, v in raw.items()}
    params["R"] = _leaf(rng.standard_normal((batch, n, d)))
    lengths = rng.integers(1, n + 1, size=batch)
    lengths[0] = n
    mask = np.arange(n)[None, :] < lengths[:, None]
    weights = rng.standard_normal((batch, n, 2 * hidden)) * mask[..., None]
    return compare(lambda p: _weighted_sum(bilstm_encode(p["R"], mask, p), weights), params)


def check_attention(seed, batch=2, n=4, c=3, hidden=3, att=4):
    rng = np.random.default_rng(seed)
    cfg = DecoderConfig(hidden=hidden, embedding_dim=2, num_layers=1, attention_dim=att)
    raw = init_decoder_params(cfg, 6, c, seed, np.float64)
    params = {k: _leaf(v.data + 0.1 * rng.standard_normal(v.shape)) for k, v in raw.items()
              if k.startswith("decoder.attn.")}
    params["H"] = _leaf(rng.standard_normal((batch, n, c)))
    params["s"] = _leaf(rng.standard_normal((batch, hidden)))
    params["cov"] = _leaf(rng.uniform(0, 2, size=(batch, n)))
    mask = np.ones((batch, n), dtype=bool)
    mask[1, n - 1] = False
    w_a = rng.standard_normal((batch, n))
    w_c = rng.standard_normal((batch, c))

    def loss(p):
        enc = make_context(p["H"], mask, np.zeros((batch, n), dtype=np.int64), 6, p)
        a, ctx = attention(p["s"], enc, p["cov"], p)
        return _weighted_sum(a, w_a) + _weighted_sum(ctx, w_c)

    return compare(loss, params)


def check_copy(seed, batch=2, n=4, vocab=5, extra=2):
    rng = np.random.default_rng(seed)
    params = {
        "logits": _leaf(rng.standard_normal((batch, vocab))),
        "scores": _leaf(rng.standard_normal((batch, n))),
        "z": _leaf(rng.standard_normal((batch, 1))),
    }
    ext_ids = rng.integers(0, vocab + extra, size=(batch, n))
    ext_ids[:, 1] = ext_ids[:, 0]  # repeated labels must accumulate
    weights = rng.standard_normal((batch, vocab + extra))

    def loss(p):
        P = copy_distribution(T.softmax(p["logits"]), T.softmax(p["scores"]),
                              T.sigmoid(p["z"]), ext_ids, vocab + extra)
        return _weighted_sum(P, weights)

    return compare(loss, params)


def check_coverage_loss(seed, batch=2, steps=3, n=4):
    rng = np.random.default_rng(seed)
    while True:
        scores = rng.standard_normal((steps, batch, n))
        covs = rng.uniform(0, 1, (steps, batch, n))
        a = np.exp(scores) / np.exp(scores).sum(-1, keepdims=True)
        if not _near_kink(a - covs):
            break
    params = {"scores": _leaf(scores), "covs": _leaf(covs)}
    mask = np.ones((batch, steps), dtype=bool)
    mask[1, -1] = False

    def loss(p):
        attns = [T.softmax(p["scores"][t]) for t in range(steps)]
        return coverage_loss(attns, [p["covs"][t] for t in range(steps)], mask)

    return compare(loss, params)


E2E_GRAPH = "(w / want-01 :ARG0 (b / boy) :ARG1 (g / go-01 :ARG0 b :ARG4 (c / city)))"
E2E_TOKENS = "the boy wants to go to the city".split()


def end_to_end_model(seed, kind="ggnn"):
    example = AmrExample(parse_penman(E2E_GRAPH), E2E_TOKENS, "e2e", E2E_GRAPH)
    src, tgt = build_vocab([example])
    # keep "city" out of the target vocabulary so the copy path is exercised
    tgt = type(tgt)([t for t in tgt.to_lines() if t != "city"])
    enc = EncoderConfig(kind, num_layers=2, graph_hidden=3, embedding_dim=3,
                        lstm_hidden_per_direction=2, dropout_rate=0.0)
    # plain NLL: in a model this small a_t barely moves between steps, so the
    # optional min(a, c) coverage penalty sits on its kink (checked separately)
    dec = DecoderConfig(hidden=3, embedding_dim=3, num_layers=1, attention_dim=3)
    model = Graph2Seq(enc, dec, src, tgt, seed=seed, dtype=np.float64)
    rng = np.random.default_rng(seed)
    for p in model.params.values():
        p.data = p.data + 0.1 * rng.standard_normal(p.shape)
    return model, make_batch(model.prepare([example]))


def check_end_to_end(seed, max_coords=3):
    model, batch = end_to_end_model(seed)
    return compare(lambda p: model.loss(batch), model.params, max_coords=max_coords,
                   rng=np.random.default_rng(seed))


CHECKS = {
    "ggnn_layer": check_ggnn,
    "gat_layer": check_gat,
    "gin_layer": check_gin,
    "bilstm": check_bilstm,
    "attention": check_attention,
    "copy_distribution": check_copy,
    "coverage_loss": check_coverage_loss,
    "end_to_end_loss": check_end_to_end,
}


def run_gradcheck_suite(seeds=20, names=None):
    """Yield ``(name, worst relative error over seeds)`` for each component."""
    for name in names or CHECKS:
        yield name, max(CHECKS[name](seed) for seed in range(seeds))
