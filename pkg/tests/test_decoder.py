import itertools
import logging
import math

import numpy as np
import pytest

from dualgraph import tensor as T
from dualgraph.data import make_batch
from dualgraph.decoder import (DecoderConfig, DecoderState, ExtendedVocab, Hypothesis, attention,
                              beam_search, copy_distribution, coverage_loss, decode_step, greedy_search,
                              init_decoder_params, make_context, nll_loss)
from dualgraph.synthetic import load_bundled
from dualgraph.tensor import Tensor
from dualgraph.vocab import BOS_ID, EOS_ID, UNK_ID, Vocabulary

import reference as ref
from test_acceptance import toy_model


def attn_params(c=3, hidden=4, att=5, seed=0):
    cfg = DecoderConfig(hidden=hidden, embedding_dim=2, num_layers=1, attention_dim=att)
    params = init_decoder_params(cfg, 6, c, seed, np.float64)
    rng = np.random.default_rng(seed)
    for p in params.values():
        p.data = p.data + 0.2 * rng.normal(size=p.shape)
    return params


def context(H, params, mask=None):
    B, N, _ = H.shape
    mask = np.ones((B, N), dtype=bool) if mask is None else mask
    return make_context(Tensor(H), mask, np.zeros((B, N), dtype=np.int64), 6, params)


class TestAttention:
    def test_equal_scores_give_mean(self):
        params = attn_params()
        params["decoder.attn.v"].data[:] = 0.0
        H = np.random.default_rng(0).normal(size=(1, 4, 3))
        a, ctx = attention(Tensor(np.ones((1, 4))), context(H, params), Tensor(np.zeros((1, 4))), params)
        np.testing.assert_allclose(a.data, 0.25)
        np.testing.assert_allclose(ctx.data[0], H[0].mean(0))

    def test_single_node(self):
        params = attn_params()
        H = np.random.default_rng(1).normal(size=(1, 1, 3))
        a, ctx = attention(Tensor(np.ones((1, 4))), context(H, params), Tensor(np.zeros((1, 1))), params)
        assert a.data.tolist() == [[1.0]]
        np.testing.assert_allclose(ctx.data, H[:, 0])

    def test_three_nodes_match_reference(self):
        params = attn_params(seed=2)
        rng = np.random.default_rng(2)
        H, s, cov = rng.normal(size=(1, 3, 3)), rng.normal(size=(1, 4)), rng.uniform(size=(1, 3))
        a, ctx = attention(Tensor(s), context(H, params), Tensor(cov), params)
        raw = {k.split(".")[-1]: v.data for k, v in params.items() if k.startswith("decoder.attn.")}
        want_a, want_ctx = ref.attention_ref(s[0], H[0], cov[0], raw)
        np.testing.assert_allclose(a.data[0], want_a, atol=1e-12)
        np.testing.assert_allclose(ctx.data[0], want_ctx, atol=1e-12)

    def test_masked_nodes_get_zero(self):
        params = attn_params()
        H = np.random.default_rng(3).normal(size=(1, 3, 3))
        mask = np.array([[True, True, False]])
        a, _ = attention(Tensor(np.ones((1, 4))), context(H, params, mask), Tensor(np.zeros((1, 3))), params)
        assert a.data[0, 2] == 0 and a.data.sum() == pytest.approx(1.0)

    def test_coverage_shape_error(self):
        params = attn_params()
        H = np.zeros((1, 3, 3))
        with pytest.raises(T.ShapeError, match="coverage"):
            attention(Tensor(np.ones((1, 4))), context(H, params), Tensor(np.zeros((1, 2))), params)


class TestCopy:
    def test_pgen_one(self):
        pv = np.array([[0.1, 0.2, 0.7]])
        P = copy_distribution(Tensor(pv), Tensor([[0.5, 0.5]]), Tensor([1.0]), [[1, 4]], 5).data
        np.testing.assert_allclose(P, [[0.1, 0.2, 0.7, 0.0, 0.0]])

    def test_pgen_zero_one_node(self):
        pv = np.array([[0.1, 0.2, 0.7]])
        P = copy_distribution(Tensor(pv), Tensor([[0.0, 1.0]]), Tensor([0.0]), [[1, 4]], 5).data
        np.testing.assert_allclose(P, [[0, 0, 0, 0, 1.0]])

    def test_shared_label_hand_arithmetic(self):
        pv = np.array([[0.25, 0.25, 0.5]])
        a = np.array([[0.3, 0.2, 0.5]])
        P = copy_distribution(Tensor(pv), Tensor(a), Tensor([0.6]), [[2, 2, 3]], 4).data
        # label 2: 0.6 * 0.5 + 0.4 * (0.3 + 0.2) = 0.5; label 3 (copy only): 0.4 * 0.5 = 0.2
        np.testing.assert_allclose(P, [[0.15, 0.15, 0.5, 0.2]])
        assert P.sum() == pytest.approx(1.0)


class TestExtendedVocab:
    def test_ids(self):
        tgt = Vocabulary(["the", "boy"])
        ext = ExtendedVocab.for_source(["boy", "want-01", ":ARG0", "want-01"], tgt)
        assert ext.oov == ["want-01", ":ARG0"] and len(ext) == 8
        assert ext.id("boy", tgt) == tgt.id("boy")
        assert ext.id(":ARG0", tgt) == 7 and ext.token(7, tgt) == ":ARG0"
        assert ext.id("cat", tgt) == UNK_ID


class TestDecodeStep:
    def setup_method(self):
        self.model, corpus = toy_model(3, dtype=np.float64)
        self.items = self.model.prepare(corpus[:3])
        self.batch = make_batch(self.items)
        self.enc = self.model.encode(self.batch)

    def run(self, steps):
        state = DecoderState.initial(self.model.dec_config, self.enc)
        attns = []
        assert np.all(state.coverage.data == 0)
        for t in range(steps):
            P, a, state = decode_step(self.model.params, self.model.dec_config,
                                      self.batch.tgt_in[:, t], state, self.enc)
            attns.append(a.data)
        return state, attns

    def test_coverage_accumulates(self):
        state, attns = self.run(3)
        np.testing.assert_array_equal(state.coverage.data, (attns[0] + attns[1]) + attns[2])

    def test_copied_previous_token_embeds_as_unk(self):
        state = DecoderState.initial(self.model.dec_config, self.enc)
        big = np.full(self.batch.size, self.batch.ext_size - 1)
        unk = np.full(self.batch.size, UNK_ID)
        P1, _, _ = decode_step(self.model.params, self.model.dec_config, big, state, self.enc)
        P2, _, _ = decode_step(self.model.params, self.model.dec_config, unk, state, self.enc)
        np.testing.assert_array_equal(P1.data, P2.data)

    def test_copy_only_ids_limited_to_own_sources(self):
        _, _ = self.run(1)
        state = DecoderState.initial(self.model.dec_config, self.enc)
        P, _, _ = decode_step(self.model.params, self.model.dec_config,
                              np.full(self.batch.size, BOS_ID), state, self.enc)
        base = len(self.model.tgt_vocab)
        for b, item in enumerate(self.items):
            own = base + len(item.ext.oov)
            assert np.all(P.data[b, own:] == 0)
            assert np.all(P.data[b, base:own] > 0)


class TestNll:
    def test_certain(self):
        P = [Tensor(np.array([[0.0, 1.0]])), Tensor(np.array([[1.0, 0.0]]))]
        assert nll_loss(P, [[1, 0]]).item() == 0.0

    def test_uniform(self):
        V, steps = 7, 4
        P = [Tensor(np.full((2, V), 1 / V)) for _ in range(steps)]
        assert nll_loss(P, np.zeros((2, steps), dtype=int)).item() == pytest.approx(steps * math.log(V))

    def test_two_step_hand_value(self):
        P = [Tensor(np.array([0.5, 0.5])), Tensor(np.array([0.5, 0.5]))]
        assert round(nll_loss(P, [0, 0]).item(), 4) == 1.3863

    def test_mask_and_batch_mean(self):
        P = [Tensor(np.array([[0.5, 0.5], [0.25, 0.75]]))] * 2
        mask = np.array([[1, 1], [1, 0]], dtype=bool)
        want = -(2 * math.log(0.5) + math.log(0.25)) / 2
        assert nll_loss(P, [[0, 0], [0, 0]], mask).item() == pytest.approx(want)

    def test_zero_probability_is_clamped(self, caplog):
        with caplog.at_level(logging.WARNING):
            loss = nll_loss([Tensor(np.array([[0.0, 1.0]]))], [[0]])
        assert loss.item() == pytest.approx(-math.log(1e-12))
        assert "clamped" in caplog.text


class TestCoveragePenalty:
    def test_hand_value(self):
        a = [Tensor(np.array([[0.5, 0.5]])), Tensor(np.array([[0.9, 0.1]]))]
        c = [Tensor(np.array([[0.0, 0.0]])), Tensor(np.array([[0.5, 0.5]]))]
        # step 0 contributes nothing; step 1: min(.9, .5) + min(.1, .5)
        assert coverage_loss(a, c).item() == pytest.approx(0.6)

    def test_off_by_default(self):
        assert DecoderConfig().coverage_penalty == 0.0


class ToyState:
    def __init__(self, history):
        self.history = history

    def take(self, rows):
        return ToyState([self.history[r] for r in rows])


A, B = 4, 5


def toy_step(prev, state):
    """Hand-set distributions over {pad, unk, bos, eos, A, B}: greedy takes A, A; best is B, A."""
    history = [h + [int(p)] for h, p in zip(state.history, prev)]
    probs = np.zeros((len(prev), 6))
    for k, h in enumerate(history):
        t = len(h) - 1
        if t == 0:
            probs[k, [A, B]] = [0.6, 0.4]
        elif t == 1:
            probs[k, [A, B]] = [0.5, 0.5] if h[-1] == A else [0.9, 0.1]
        elif t == 2:
            probs[k, [A, B]] = [0.7, 0.3]
        else:
            probs[k, EOS_ID] = 1.0
    return probs, ToyState(history)


class TestSearch:
    def test_exhaustive_oracle(self):
        table = {}
        for seq in itertools.product([A, B], repeat=3):
            p, state, prev = 1.0, ToyState([[]]), [BOS_ID]
            for w in seq:
                probs, state = toy_step(prev, state)
                p *= probs[0, w]
                prev = [w]
            table[seq] = p
        best = max(table, key=table.get)
        assert list(best) == [B, A, A]
        assert beam_search(toy_step, ToyState([[]]), 2, 10) == list(best)
        assert greedy_search(toy_step, ToyState([[]]), 1, 10)[0] == [A, A, A]
        assert beam_search(toy_step, ToyState([[]]), 1, 10) == [A, A, A]

    def test_deterministic_model_independent_of_beam(self):
        def step(prev, state):
            probs = np.zeros((len(prev), 6))
            for k, p in enumerate(prev):
                probs[k, {BOS_ID: A, A: B}.get(int(p), EOS_ID)] = 1.0
            return probs, state

        class S:
            def take(self, rows):
                return self

        outs = {tuple(beam_search(step, S(), k, 10)) for k in (1, 2, 5)}
        assert outs == {(A, B)}

    def test_max_len_fallback_and_errors(self):
        def step(prev, state):
            probs = np.full((len(prev), 6), 0.0)
            probs[:, A] = 1.0
            return probs, state

        class S:
            def take(self, rows):
                return self

        assert beam_search(step, S(), 3, 4) == [A] * 4
        with pytest.raises(ValueError):
            beam_search(step, S(), 3, 0)
        with pytest.raises(ValueError):
            beam_search(step, S(), 0, 3)
        with pytest.raises(ValueError):
            greedy_search(step, S(), 1, 0)

    def test_hypothesis_normalization(self):
        assert Hypothesis([4, 5], -3.0).normalized() == -1.5
        assert Hypothesis([], 0.0).normalized() == 0.0

    def test_model_beam_scores_are_monotone(self):
        model, corpus = toy_model(21)
        out = model.generate(corpus[:3], beam_size=4, max_len=8)
        assert len(out) == 3
