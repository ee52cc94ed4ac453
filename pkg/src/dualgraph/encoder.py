"""Dual graph encoder: GGNN / GAT / GIN stacks over both views, then a BiLSTM.

Tensors use the row-vector convention, so an affine map is ``x @ W + b`` with
``W`` of shape ``(in, out)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import tensor as T
from .tensor import Tensor

ENCODER_KINDS = ("ggnn", "gat", "gin")
DEFAULT_LAYERS = {"gin": 2, "gat": 5, "ggnn": 5}
ABLATIONS = ("bilstm_only", "td_only", "bu_only", "dual")


@dataclass
class EncoderConfig:
    encoder_kind: str = "ggnn"
    num_layers: int | None = None
    graph_hidden: int = 300
    embedding_dim: int = 300
    lstm_hidden_per_direction: int = 450
    dropout_rate: float = 0.3
    gat_heads: int = 1

    def __post_init__(self):
        if self.encoder_kind not in ENCODER_KINDS:
            raise ValueError(f"encoder_kind must be one of {ENCODER_KINDS}")
        if self.num_layers is None:
            self.num_layers = DEFAULT_LAYERS[self.encoder_kind]
        for name in ("num_layers", "graph_hidden", "embedding_dim",
                     "lstm_hidden_per_direction", "gat_heads"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.graph_hidden % self.gat_heads:
            raise ValueError("graph_hidden must be divisible by gat_heads")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")

    def fused_width(self, ablation="dual"):
        views = {"bilstm_only": 0, "td_only": 1, "bu_only": 1, "dual": 2}[ablation]
        return views * self.graph_hidden + self.embedding_dim

    @property
    def output_width(self):
        return 2 * self.lstm_hidden_per_direction


@dataclass
class NodeStates:
    """Per view-node states, rows in view-node id order."""

    e: Tensor
    h_t: Tensor | None
    h_b: Tensor | None
    r: Tensor
    h: Tensor | None = None


# -- parameters ---------------------------------------------------------------


def glorot(rng, fan_in, fan_out, dtype=np.float32):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(dtype)


def _param(params, name, value):
    params[name] = Tensor(value, requires_grad=True, name=name)


def init_lstm_params(params, prefix, input_dim, hidden, rng, dtype=np.float32):
    _param(params, f"{prefix}.Wx", glorot(rng, input_dim, 4 * hidden, dtype))
    _param(params, f"{prefix}.Wh", glorot(rng, hidden, 4 * hidden, dtype))
    b = np.zeros(4 * hidden, dtype=dtype)
    b[hidden:2 * hidden] = 1.0  # forget gate
    _param(params, f"{prefix}.b", b)


def init_graph_encoder_params(params, prefix, config, rng, dtype=np.float32):
    d, e = config.graph_hidden, config.embedding_dim
    _param(params, f"{prefix}.proj.W", glorot(rng, e, d, dtype))
    _param(params, f"{prefix}.proj.b", np.zeros(d, dtype=dtype))
    for layer in range(config.num_layers):
        p = f"{prefix}.layer{layer}"
        if config.encoder_kind == "ggnn":
            _param(params, f"{p}.W1", glorot(rng, d, d, dtype))
            _param(params, f"{p}.Wm", glorot(rng, d, 3 * d, dtype))
            _param(params, f"{p}.Uzr", glorot(rng, d, 2 * d, dtype))
            _param(params, f"{p}.Uc", glorot(rng, d, d, dtype))
            _param(params, f"{p}.b", np.zeros(3 * d, dtype=dtype))
        elif config.encoder_kind == "gat":
            heads = config.gat_heads
            _param(params, f"{p}.W2", glorot(rng, d, d, dtype))
            _param(params, f"{p}.a", glorot(rng, heads, 2 * (d // heads), dtype))
        else:
            _param(params, f"{p}.Wa", glorot(rng, d, d, dtype))
            _param(params, f"{p}.ba", np.zeros(d, dtype=dtype))
            _param(params, f"{p}.Wb", glorot(rng, d, d, dtype))
            _param(params, f"{p}.bb", np.zeros(d, dtype=dtype))


def init_encoder_params(config, src_vocab_size, ablation="dual", seed=0, dtype=np.float32):
    if ablation not in ABLATIONS:
        raise ValueError(f"ablation must be one of {ABLATIONS}")
    rng = np.random.default_rng(seed)
    params = {}
    table = rng.uniform(-0.1, 0.1, size=(src_vocab_size, config.embedding_dim)).astype(dtype)
    table[0] = 0.0
    _param(params, "embed.src", table)
    if ablation in ("dual", "td_only"):
        init_graph_encoder_params(params, "ge_t", config, rng, dtype)
    if ablation in ("dual", "bu_only"):
        init_graph_encoder_params(params, "ge_b", config, rng, dtype)
    width = config.fused_width(ablation)
    init_lstm_params(params, "bilstm.fwd", width, config.lstm_hidden_per_direction, rng, dtype)
    init_lstm_params(params, "bilstm.bwd", width, config.lstm_hidden_per_direction, rng, dtype)
    return params


def sub_params(params, prefix):
    """View of ``params`` under ``prefix.``, with the prefix stripped."""
    cut = len(prefix) + 1
    return {k[cut:]: v for k, v in params.items() if k.startswith(prefix + ".")}


# -- adjacency ----------------------------------------------------------------


def as_adjacency(in_neighbors, n=None):
    """Sparse matrix ``A`` with ``A[i, j]`` = number of edges ``j -> i``."""
    if sp.issparse(in_neighbors):
        return in_neighbors.tocsr()
    n = len(in_neighbors) if n is None else n
    rows = [i for i, srcs in enumerate(in_neighbors) for _ in srcs]
    cols = [j for srcs in in_neighbors for j in srcs]
    data = np.ones(len(rows), dtype=np.float32)
    return sp.csr_matrix((data, (rows, cols)), shape=(n, n))


def _edges_with_self_loops(adj):
    coo = adj.tocoo()
    n = adj.shape[0]
    mult = np.rint(coo.data).astype(np.int64)  # parallel edges each get a slot
    dst = np.concatenate([np.arange(n), np.repeat(coo.row, mult)]).astype(np.int64)
    src = np.concatenate([np.arange(n), np.repeat(coo.col, mult)]).astype(np.int64)
    return dst, src


def _check_width(op, H, W):
    if H.shape[-1] != W.shape[0]:
        raise T.ShapeError(f"{op}: state width {H.shape[-1]} does not match weight {W.shape}")


# -- layers -------------------------------------------------------------------


def gru_cell(x, h, p):
    """Gated recurrent unit with input ``x`` and previous state ``h``."""
    d = h.shape[-1]
    xm = x @ p["Wm"] + p["b"]
    hzr = h @ p["Uzr"]
    z = T.sigmoid(xm[..., :d] + hzr[..., :d])
    r = T.sigmoid(xm[..., d:2 * d] + hzr[..., d:])
    cand = T.tanh(xm[..., 2 * d:] + (r * h) @ p["Uc"])
    return h + z * (cand - h)


def ggnn_layer(H, in_neighbors, p):
    adj = as_adjacency(in_neighbors, H.shape[0])
    _check_width("ggnn_layer", H, p["W1"])
    messages = T.spmm(adj, H @ p["W1"])
    return gru_cell(messages, H, p)


def gat_attention(H, in_neighbors, p, heads=1, slope=0.2):
    """Attention coefficients over ``{i} + N(i)``; returns ``(alpha, dst, src, Wh)``."""
    adj = as_adjacency(in_neighbors, H.shape[0])
    _check_width("gat_layer", H, p["W2"])
    n = H.shape[0]
    Wh = H @ p["W2"]
    dh = Wh.shape[1] // heads
    Whh = T.reshape(Wh, (n, heads, dh))
    a_dst = p["a"][:, :dh]
    a_src = p["a"][:, dh:]
    s_dst = T.sum(Whh * a_dst, axis=-1)
    s_src = T.sum(Whh * a_src, axis=-1)
    dst, src = _edges_with_self_loops(adj)
    scores = T.leaky_relu(T.gather_rows(s_dst, dst) + T.gather_rows(s_src, src), slope)
    alpha = T.segment_softmax(scores, dst, n)
    return alpha, dst, src, Whh


def gat_layer(H, in_neighbors, p, heads=1, slope=0.2):
    alpha, dst, src, Whh = gat_attention(H, in_neighbors, p, heads, slope)
    n, _, dh = Whh.shape
    msgs = T.gather_rows(Whh, src) * T.reshape(alpha, (len(dst), heads, 1))
    return T.reshape(T.index_add_rows(msgs, dst, n), (n, heads * dh))


def gin_layer(H, in_neighbors, p):
    adj = as_adjacency(in_neighbors, H.shape[0])
    _check_width("gin_layer", H, p["Wa"])
    agg = H + T.spmm(adj, H)
    return T.relu(agg @ p["Wa"] + p["ba"]) @ p["Wb"] + p["bb"]


def graph_encode(E, adj, config, params, prefix, train=False, rng=None):
    """Run one graph encoder (projection plus ``num_layers`` layers) over ``adj``."""
    H = E @ params[f"{prefix}.proj.W"] + params[f"{prefix}.proj.b"]
    for layer in range(config.num_layers):
        p = sub_params(params, f"{prefix}.layer{layer}")
        if config.encoder_kind == "ggnn":
            H = ggnn_layer(H, adj, p)
        elif config.encoder_kind == "gat":
            H = gat_layer(H, adj, p, heads=config.gat_heads)
        else:
            H = gin_layer(H, adj, p)
        H = T.dropout(H, config.dropout_rate, rng, train=train)
    return H


def embed_nodes(view, vocab, table):
    """Embedding rows for each view node's label (UNK for unknown labels)."""
    ids = np.array([vocab.id(label) for label in view.node_labels], dtype=np.int64)
    return T.gather_rows(table, ids)


def fuse(config, params, E, adj_td, adj_bu, ablation="dual", train=False, rng=None):
    """Return ``(h_t, h_b, r)`` where ``r = [h_t | h_b | e]`` (missing views dropped)."""
    h_t = h_b = None
    parts = []
    if ablation in ("dual", "td_only"):
        h_t = graph_encode(E, adj_td, config, params, "ge_t", train, rng)
        parts.append(h_t)
    if ablation in ("dual", "bu_only"):
        h_b = graph_encode(E, adj_bu, config, params, "ge_b", train, rng)
        parts.append(h_b)
    parts.append(E)
    r = T.concat(parts, axis=-1) if len(parts) > 1 else E
    return h_t, h_b, r


def dual_encode(g_t, g_b, config, params, vocab, ablation="dual", train=False, rng=None):
    """Encode one graph's two views; ``g_b`` is normally ``reverse_view(g_t)``."""
    if g_t.num_nodes != g_b.num_nodes:
        raise ValueError(f"view node counts differ: {g_t.num_nodes} vs {g_b.num_nodes}")
    E = embed_nodes(g_t, vocab, params["embed.src"])
    adj_td = as_adjacency(g_t.in_neighbors)
    adj_bu = as_adjacency(g_b.in_neighbors)
    h_t, h_b, r = fuse(config, params, E, adj_td, adj_bu, ablation, train, rng)
    return NodeStates(e=E, h_t=h_t, h_b=h_b, r=r)


# -- recurrent encoder --------------------------------------------------------


def lstm_cell(x_proj, h, c, Wh):
    """One LSTM step given the precomputed input projection ``x @ Wx + b``.

    Gate order along the last axis is input, forget, candidate, output.
    """
    H = h.shape[-1]
    gates = x_proj + h @ Wh
    i = T.sigmoid(gates[..., :H])
    f = T.sigmoid(gates[..., H:2 * H])
    g = T.tanh(gates[..., 2 * H:3 * H])
    o = T.sigmoid(gates[..., 3 * H:])
    c_new = f * c + i * g
    return o * T.tanh(c_new), c_new


def run_lstm(X, mask, p, reverse=False):
    """Unidirectional LSTM over ``X`` of shape ``(B, N, D)`` with zero initial state.

    Padded steps (``mask == 0``) carry the previous state through unchanged, so
    with right padding the reverse direction starts at each sequence's last
    real element.
    """
    B, N, _ = X.shape
    hidden = p["Wh"].shape[0]
    dtype = X.dtype
    proj = X @ p["Wx"] + p["b"]
    h = T.Tensor(np.zeros((B, hidden), dtype=dtype))
    c = T.Tensor(np.zeros((B, hidden), dtype=dtype))
    outputs = [None] * N
    steps = range(N - 1, -1, -1) if reverse else range(N)
    for t in steps:
        h_new, c_new = lstm_cell(proj[:, t], h, c, p["Wh"])
        m = mask[:, t:t + 1]
        if m.all():
            h, c = h_new, c_new
        else:
            m = m.astype(dtype)
            h = h_new * m + h * (1.0 - m)
            c = c_new * m + c * (1.0 - m)
        outputs[t] = h
    return T.stack(outputs, axis=1)


def bilstm_encode(R, mask=None, params=None, prefix="bilstm"):
    """Bidirectional LSTM; output row ``i`` is ``[forward_i | backward_i]``.

    ``R`` is ``(N, D)`` for a single sequence or ``(B, N, D)`` with a ``(B, N)``
    mask for a padded batch.
    """
    single = R.ndim == 2
    if R.shape[-2] == 0:
        raise ValueError("bilstm_encode needs a nonempty sequence")
    if single:
        R = T.reshape(R, (1,) + R.shape)
    if mask is None:
        mask = np.ones(R.shape[:2], dtype=bool)
    fwd = run_lstm(R, mask, sub_params(params, f"{prefix}.fwd"))
    bwd = run_lstm(R, mask, sub_params(params, f"{prefix}.bwd"), reverse=True)
    out = T.concat([fwd, bwd], axis=-1)
    if single:
        out = T.reshape(out, out.shape[1:])
    return out


def encode_graph(view_t, view_b, config, params, vocab, ablation="dual", train=False, rng=None):
    """Full single-graph encoder: dual views, fusion, BiLSTM over DFS order."""
    from .amr import dfs_order

    states = dual_encode(view_t, view_b, config, params, vocab, ablation, train, rng)
    order = np.array(dfs_order(view_t), dtype=np.int64)
    h_seq = bilstm_encode(T.gather_rows(states.r, order), params=params)
    inverse = np.empty_like(order)
    inverse[order] = np.arange(len(order))
    states.h = T.gather_rows(h_seq, inverse)
    return states
