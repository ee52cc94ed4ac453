import math
import warnings

import pytest
from hypothesis import given, settings, strategies as st

from dualgraph.amr import AmrExample, parse_penman
from dualgraph.evaluation import (DEFAULT_BUCKETS, BucketSpec, adequacy, bleu, bucket_eval,
                                  bucket_table_tsv, corpus_adequacy, stem)


def example(penman, sentence):
    return AmrExample(parse_penman(penman), sentence.split(), "x", penman)


def path_graph(k):
    """A chain of k edges, so the diameter is k."""
    text = "(n0 / a"
    for i in range(1, k + 1):
        text += f" :ARG0 (n{i} / a"
    return text + ")" * (k + 1)


class TestBleu:
    def test_identity(self):
        assert bleu(["a b c d e"], ["a b c d e"]) == 100.0

    def test_no_overlap(self):
        assert bleu(["a b c d"], ["e f g h"]) == 0.0

    def test_lowercasing(self):
        assert bleu(["The Cat sat on the mat"], ["the cat sat on THE mat"]) == 100.0
        assert bleu(["The Cat sat on the mat"], ["the cat sat on THE mat"], lowercase=False) == 0.0

    def test_brevity_hand_value(self):
        # all precisions 1, hyp 6 tokens vs ref 7: BP = exp(1 - 7/6)
        assert bleu(["a b c d e f g"], ["a b c d e f"]) == pytest.approx(100 * math.exp(-1 / 6))

    def test_corpus_order_invariant(self):
        refs = ["the boy wants to go", "a cat sat on a mat", "dogs bark at night loudly"]
        hyps = ["the boy wants to leave", "a cat sat on the mat", "dogs bark at night"]
        assert bleu(refs, hyps) == pytest.approx(bleu(refs[::-1], hyps[::-1]), abs=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            bleu(["a"], ["a", "b"])

    def test_accepts_token_lists(self):
        assert bleu([["a", "b", "c", "d"]], ["a b c d"]) == 100.0


class TestBuckets:
    def setup_method(self):
        self.data = [example(path_graph(k), " ".join(["w"] * (k + 4))) for k in (3, 9, 15)]

    def test_hand_diameters_one_per_bucket(self):
        rows = bucket_eval(self.data, [ex.tokens for ex in self.data], "graph_diameter")
        assert [(r.bucket, r.count) for r in rows] == [("[0,7)", 1), ("[7,14)", 1), ("[14,20]", 1)]

    def test_single_bucket_leaves_others_empty(self):
        rows = bucket_eval(self.data, [ex.tokens for ex in self.data], "sentence_length")
        assert rows[0].count == 3 and rows[1].bleu is None and rows[2].bleu is None
        assert "\t-\t-" in bucket_table_tsv(rows)

    def test_baseline_equal_to_outputs_gives_zero_delta(self):
        outs = [ex.tokens for ex in self.data]
        rows = bucket_eval(self.data, outs, "graph_diameter", baseline=outs)
        assert all(r.delta_pct == 0.0 for r in rows)
        assert bucket_table_tsv(rows).splitlines()[1].endswith("+0.0%")

    def test_out_of_range_goes_to_nearest(self):
        data = [example(path_graph(25), "a b")]
        with pytest.warns(UserWarning, match="outside every bucket"):
            rows = bucket_eval(data, [["a", "b"]], DEFAULT_BUCKETS["graph_diameter"])
        assert [r.count for r in rows] == [0, 0, 1]

    def test_closed_last_bucket(self):
        spec = DEFAULT_BUCKETS["graph_diameter"]
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            assert spec.assign(20) == 2 and spec.assign(14) == 2 and spec.assign(7) == 1

    @given(st.lists(st.integers(0, 239), max_size=60))
    def test_partition_covers_each_value_once(self, values):
        spec = DEFAULT_BUCKETS["sentence_length"]
        hits = [sum(lo <= v < hi or (k == 2 and v == hi) for k, (lo, hi) in enumerate(spec.ranges))
                for v in values]
        assert all(h == 1 for h in hits)
        assert all(0 <= spec.assign(v) < 3 for v in values)

    def test_overlapping_ranges_rejected(self):
        with pytest.raises(ValueError):
            BucketSpec("x", [(0, 5), (4, 9)])


# stand-in for the running example: "there" and "of" are function words that
# no concept yields, and "person" surfaces as "students"
FIG1 = ("(h / have-03 :ARG0 (s / semester :mod (t / that)) "
        ":ARG1 (p / person :ARG0-of (s2 / study-01)))")


class TestAdequacy:
    def test_running_example(self):
        rep = adequacy(parse_penman(FIG1), "there were students of that semester")
        assert "there" in rep.added_tokens and "of" in rep.added_tokens
        assert "person" in rep.missing_concepts
        assert "semester" not in rep.missing_concepts and "that" not in rep.missing_concepts

    def test_exact_labels(self):
        g = parse_penman(FIG1)
        rep = adequacy(g, [n.label for n in g.nodes])
        assert rep.added_pct == 0.0 and rep.missing_pct == 0.0

    def test_hand_count(self):
        g = parse_penman("(w / want-01 :ARG0 (b / boy) :ARG1 (g / go-02 :ARG4 (c / city)) :time (n / now))")
        # 6 tokens: 2 function words, 4 content tokens covering want, boy, city
        rep = adequacy(g, "the boy wants to city city")
        assert rep.added_tokens == ["the", "to"] and rep.added_pct == pytest.approx(2 / 6)
        assert rep.missing_concepts == ["go-02", "now"] and rep.missing_pct == pytest.approx(2 / 5)

    def test_empty_sentence_flagged(self):
        rep = adequacy(parse_penman(FIG1), "")
        assert rep.flagged and rep.added_pct == 0.0 and rep.missing_pct == 1.0

    def test_stemmer(self):
        assert [stem(w) for w in ("want-01", "Wants", "wanted", "wanting", "makes", "is", "going")] == \
            ["want", "want", "want", "want", "mak", "is", "going"]

    @settings(max_examples=60)
    @given(st.lists(st.sampled_from(["boy", "wants", "the", "city", "go", "of", "x"]), min_size=1, max_size=8),
           st.sampled_from(["zzz", "qqq"]))
    def test_monotone(self, tokens, extra):
        g = parse_penman("(w / want-01 :ARG0 (b / boy) :ARG1 (g / go-02 :ARG4 (c / city)))")
        before = adequacy(g, tokens)
        assert adequacy(g, tokens + [extra]).added_pct >= before.added_pct
        matched = [k for k, t in enumerate(tokens) if t not in before.added_tokens]
        if matched:
            shorter = tokens[:matched[0]] + tokens[matched[0] + 1:]
            if shorter:
                assert adequacy(g, shorter).missing_pct >= before.missing_pct

    def test_corpus_micro_average(self):
        g = parse_penman("(b / boy)")
        rep = corpus_adequacy([g, g], ["boy the", "girl"])
        assert rep.added_pct == pytest.approx(2 / 3) and rep.missing_pct == pytest.approx(1 / 2)
