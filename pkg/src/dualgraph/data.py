"""Example preparation and padded batches."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .amr import dfs_order, levi_transform, reverse_view
from .decoder import ExtendedVocab
from .vocab import BOS_ID, EOS_ID, PAD_ID


@dataclass
class Prepared:
    """One example turned into ids: views, DFS order, copy vocabulary, targets."""

    view_t: object
    view_b: object
    order: np.ndarray        # DFS order of view nodes
    label_ids: np.ndarray    # source-vocab id per view node (view order)
    ext: ExtendedVocab
    node_ext_ids: np.ndarray  # extended id per node, in DFS order
    targets: np.ndarray      # extended ids of the sentence, then EOS
    tokens: list
    example: object = None

    @property
    def num_nodes(self):
        return len(self.order)


def prepare(example, src_vocab, tgt_vocab):
    view_t = levi_transform(example.graph)
    view_b = reverse_view(view_t)
    order = np.array(dfs_order(view_t), dtype=np.int64)
    labels = [view_t.node_labels[i] for i in order]
    ext = ExtendedVocab.for_source(labels, tgt_vocab)
    return Prepared(
        view_t=view_t,
        view_b=view_b,
        order=order,
        label_ids=np.array(src_vocab.encode(view_t.node_labels), dtype=np.int64),
        ext=ext,
        node_ext_ids=np.array([ext.id(lab, tgt_vocab) for lab in labels], dtype=np.int64),
        targets=np.array([ext.id(t, tgt_vocab) for t in example.tokens] + [EOS_ID], dtype=np.int64),
        tokens=list(example.tokens),
        example=example,
    )


@dataclass
class Batch:
    indices: list            # positions of the examples in the source list
    label_ids: np.ndarray    # (N_tot,) union of all graphs, view order per graph
    adj_td: sp.csr_matrix    # in-neighbor adjacency of the union, top-down
    adj_bu: sp.csr_matrix
    seq_index: np.ndarray    # (B, N_max) union row per DFS position; N_tot = padding
    node_mask: np.ndarray    # (B, N_max) bool
    node_ext_ids: np.ndarray  # (B, N_max)
    ext_size: int
    tgt_in: np.ndarray       # (B, T) previous tokens under teacher forcing
    tgt_out: np.ndarray      # (B, T)
    tgt_mask: np.ndarray     # (B, T) bool
    items: list

    @property
    def size(self):
        return len(self.items)

    @property
    def num_tokens(self):
        return int(self.tgt_mask.sum())


def make_batch(items, indices=None):
    B = len(items)
    n_max = max(p.num_nodes for p in items)
    t_max = max(len(p.targets) for p in items)
    offsets = np.cumsum([0] + [p.num_nodes for p in items])
    n_tot = int(offsets[-1])
    rows, cols = [], []
    seq_index = np.full((B, n_max), n_tot, dtype=np.int64)
    node_mask = np.zeros((B, n_max), dtype=bool)
    node_ext = np.full((B, n_max), PAD_ID, dtype=np.int64)
    tgt_in = np.full((B, t_max), PAD_ID, dtype=np.int64)
    tgt_out = np.full((B, t_max), PAD_ID, dtype=np.int64)
    tgt_mask = np.zeros((B, t_max), dtype=bool)
    for b, p in enumerate(items):
        off = offsets[b]
        for i, srcs in enumerate(p.view_t.in_neighbors):
            for j in srcs:
                rows.append(off + i)
                cols.append(off + j)
        n = p.num_nodes
        seq_index[b, :n] = off + p.order
        node_mask[b, :n] = True
        node_ext[b, :n] = p.node_ext_ids
        k = len(p.targets)
        tgt_out[b, :k] = p.targets
        tgt_in[b, 0] = BOS_ID
        tgt_in[b, 1:k] = p.targets[:-1]
        tgt_mask[b, :k] = True
    adj_td = sp.csr_matrix((np.ones(len(rows), dtype=np.float32), (rows, cols)), shape=(n_tot, n_tot))
    return Batch(
        indices=list(range(B)) if indices is None else list(indices),
        label_ids=np.concatenate([p.label_ids for p in items]),
        adj_td=adj_td,
        adj_bu=adj_td.T.tocsr(),
        seq_index=seq_index,
        node_mask=node_mask,
        node_ext_ids=node_ext,
        ext_size=max(len(p.ext) for p in items),
        tgt_in=tgt_in,
        tgt_out=tgt_out,
        tgt_mask=tgt_mask,
        items=list(items),
    )


def batch_indices(sizes, batch_size, rng=None, pool=10):
    """Split an epoch into batches of examples with similar node counts.

    The epoch order is a permutation drawn from ``rng`` (identity without
    one). Each pool of ``pool * batch_size`` consecutive examples is sorted by
    size and cut into batches; inside a batch, examples keep their order in
    the permutation. Returns ``(permutation, batches)``.
    """
    n = len(sizes)
    perm = rng.permutation(n) if rng is not None else np.arange(n)
    rank = np.empty(n, dtype=np.int64)
    rank[perm] = np.arange(n)
    batches = []
    span = batch_size * pool
    for start in range(0, n, span):
        chunk = sorted(perm[start:start + span], key=lambda i: (sizes[i], rank[i]))
        for k in range(0, len(chunk), batch_size):
            batches.append(sorted(chunk[k:k + batch_size], key=lambda i: rank[i]))
    if rng is not None:
        order = rng.permutation(len(batches))
        batches = [batches[i] for i in order]
    return perm, [[int(i) for i in b] for b in batches]
