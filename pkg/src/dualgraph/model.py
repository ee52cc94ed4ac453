"""The full graph-to-sequence model: dual encoder, BiLSTM, copy/coverage decoder."""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import numpy as np

from . import tensor as T
from .checkpoint import load_tensors, save_tensors
from .data import make_batch, prepare
from .decoder import (DecoderConfig, DecoderState, beam_search, coverage_loss, decode_step,
                      greedy_search, init_decoder_params, make_context, nll_loss)
from .encoder import EncoderConfig, bilstm_encode, fuse, init_encoder_params
from .tensor import Tensor
from .vocab import Vocabulary

META_SUFFIX = ".meta.json"


def count_parameters(params):
    """Total number of scalars across all named tensors."""
    return int(sum(np.prod(p.shape) for p in params.values()))


class Graph2Seq:
    """Parameters plus the forward computations that use them.

    ``ablation`` selects which graph encoders exist: ``bilstm_only``,
    ``td_only``, ``bu_only`` or ``dual``.
    """

    def __init__(self, enc_config, dec_config, src_vocab, tgt_vocab, ablation="dual",
                 seed=0, dtype=np.float32, params=None):
        self.enc_config = enc_config
        self.dec_config = dec_config
        self.src_vocab = src_vocab
        self.tgt_vocab = tgt_vocab
        self.ablation = ablation
        self.seed = seed
        if params is None:
            params = init_encoder_params(enc_config, len(src_vocab), ablation, seed, dtype)
            params.update(init_decoder_params(dec_config, len(tgt_vocab),
                                              enc_config.output_width, seed + 1, dtype))
        self.params = params

    # -- helpers ------------------------------------------------------------

    def prepare(self, examples):
        return [prepare(ex, self.src_vocab, self.tgt_vocab) for ex in examples]

    def set_embeddings(self, table):
        self.params["embed.src"].data = np.asarray(table, dtype=self.params["embed.src"].dtype)

    def astype(self, dtype):
        for p in self.params.values():
            p.data = p.data.astype(dtype)
        return self

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    # -- forward ------------------------------------------------------------

    def encode(self, batch, train=False, rng=None):
        """Encode a :class:`~dualgraph.data.Batch` into a decoder context."""
        p = self.params
        E = T.gather_rows(p["embed.src"], batch.label_ids)
        _, _, r = fuse(self.enc_config, p, E, batch.adj_td, batch.adj_bu,
                       self.ablation, train, rng)
        padded = T.concat([r, Tensor(np.zeros((1, r.shape[1]), dtype=r.dtype))], axis=0)
        seq = T.gather_rows(padded, batch.seq_index)
        H = bilstm_encode(seq, batch.node_mask, p)
        return make_context(H, batch.node_mask, batch.node_ext_ids, batch.ext_size, p)

    def loss(self, batch, train=False, rng=None):
        """Teacher-forced NLL (sum over time, mean over batch) for ``batch``."""
        enc = self.encode(batch, train, rng)
        state = DecoderState.initial(self.dec_config, enc)
        probs, attns, covs = [], [], []
        for t in range(batch.tgt_in.shape[1]):
            covs.append(state.coverage)
            P, a, state = decode_step(self.params, self.dec_config, batch.tgt_in[:, t], state, enc)
            probs.append(P)
            attns.append(a)
        loss = nll_loss(probs, batch.tgt_out, batch.tgt_mask)
        if self.dec_config.coverage_penalty > 0:
            loss = loss + self.dec_config.coverage_penalty * coverage_loss(attns, covs, batch.tgt_mask)
        return loss

    def _step_fn(self, enc):
        def step(prev, state):
            P, _, state = decode_step(self.params, self.dec_config, prev, state, enc)
            return P.data, state
        return step

    def greedy_ids(self, batch, max_len=None):
        max_len = max_len or self.dec_config.max_len
        with T.no_grad():
            enc = self.encode(batch)
            state = DecoderState.initial(self.dec_config, enc)
            return greedy_search(self._step_fn(enc), state, batch.size, max_len)

    def beam_ids(self, item, beam_size=5, max_len=None):
        max_len = max_len or self.dec_config.max_len
        with T.no_grad():
            enc = self.encode(make_batch([item]))
            state = _BeamState(DecoderState.initial(self.dec_config, enc), enc)

            def beam_step(prev, st):
                P, _, new = decode_step(self.params, self.dec_config, prev, st.dec, st.enc)
                return P.data, _BeamState(new, st.enc)

            return beam_search(beam_step, state, beam_size, max_len)

    def to_tokens(self, ids, item):
        return [item.ext.token(i, self.tgt_vocab) for i in ids]

    def generate(self, examples, beam_size=1, max_len=None, batch_size=20):
        """Decode sentences (token lists) for AMR examples."""
        items = self.prepare(examples)
        out = []
        if beam_size == 1:
            for k in range(0, len(items), batch_size):
                chunk = items[k:k + batch_size]
                for item, ids in zip(chunk, self.greedy_ids(make_batch(chunk), max_len)):
                    out.append(self.to_tokens(ids, item))
        else:
            for item in items:
                out.append(self.to_tokens(self.beam_ids(item, beam_size, max_len), item))
        return out

    # -- persistence --------------------------------------------------------

    def save(self, path):
        path = Path(path)
        save_tensors(path, self.params)
        meta = {
            "encoder": dataclasses.asdict(self.enc_config),
            "decoder": dataclasses.asdict(self.dec_config),
            "ablation": self.ablation,
            "seed": self.seed,
            "src_vocab": self.src_vocab.to_lines(),
            "tgt_vocab": self.tgt_vocab.to_lines(),
        }
        Path(str(path) + META_SUFFIX).write_text(json.dumps(meta, indent=1), encoding="utf-8")
        return path

    @classmethod
    def load(cls, path):
        meta = json.loads(Path(str(path) + META_SUFFIX).read_text(encoding="utf-8"))
        arrays = load_tensors(path)
        params = {k: Tensor(v, requires_grad=True, name=k) for k, v in arrays.items()}
        return cls(EncoderConfig(**meta["encoder"]), DecoderConfig(**meta["decoder"]),
                   Vocabulary(meta["src_vocab"]), Vocabulary(meta["tgt_vocab"]),
                   ablation=meta["ablation"], seed=meta["seed"], params=params)


@dataclasses.dataclass
class _BeamState:
    dec: DecoderState
    enc: object

    def take(self, rows):
        return _BeamState(self.dec.take(rows), self.enc.take(rows))
