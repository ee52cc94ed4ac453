"""Corpus BLEU, bucketed analysis and added/missing-token adequacy."""

from __future__ import annotations

import math
import re
import warnings
from collections import Counter
from dataclasses import dataclass, field

from .amr import graph_stats


def _tokens(x, lowercase):
    toks = x.split() if isinstance(x, str) else list(x)
    return [t.lower() for t in toks] if lowercase else toks


def _ngrams(tokens, n):
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


@dataclass
class BleuStats:
    matches: list = field(default_factory=lambda: [0] * 4)
    totals: list = field(default_factory=lambda: [0] * 4)
    hyp_len: int = 0
    ref_len: int = 0

    def add(self, ref, hyp, max_n=4):
        self.hyp_len += len(hyp)
        self.ref_len += len(ref)
        for n in range(1, max_n + 1):
            h, r = _ngrams(hyp, n), _ngrams(ref, n)
            self.matches[n - 1] += sum(min(c, r[g]) for g, c in h.items())
            self.totals[n - 1] += max(len(hyp) - n + 1, 0)

    def score(self):
        if self.hyp_len == 0 or any(m == 0 for m in self.matches):
            return 0.0
        log_p = sum(math.log(m / t) for m, t in zip(self.matches, self.totals)) / len(self.matches)
        bp = 1.0 if self.hyp_len > self.ref_len else math.exp(1.0 - self.ref_len / self.hyp_len)
        return 100.0 * bp * math.exp(log_p)


def bleu(references, hypotheses, lowercase=True):
    """Corpus BLEU-4 without smoothing, in [0, 100].

    Each item is a whitespace-tokenized string or a token list. Clipped n-gram
    counts and lengths are summed over the corpus before combining.
    """
    if len(references) != len(hypotheses):
        raise ValueError(f"bleu: {len(references)} references vs {len(hypotheses)} hypotheses")
    stats = BleuStats()
    for ref, hyp in zip(references, hypotheses):
        stats.add(_tokens(ref, lowercase), _tokens(hyp, lowercase))
    return stats.score()


# -- bucketed analysis --------------------------------------------------------


@dataclass
class BucketSpec:
    """Half-open ``[low, high)`` intervals; the last one is closed."""

    key: str
    ranges: list

    def __post_init__(self):
        for (lo, hi), (lo2, _) in zip(self.ranges, self.ranges[1:]):
            if not lo < hi <= lo2:
                raise ValueError(f"bucket ranges must be ordered and disjoint: {self.ranges}")

    def labels(self):
        out = []
        for k, (lo, hi) in enumerate(self.ranges):
            closing = "]" if k == len(self.ranges) - 1 else ")"
            out.append(f"[{lo},{hi}{closing}")
        return out

    def assign(self, value):
        last = len(self.ranges) - 1
        for k, (lo, hi) in enumerate(self.ranges):
            if lo <= value < hi or (k == last and value == hi):
                return k
        nearest = min(range(len(self.ranges)),
                      key=lambda k: min(abs(value - self.ranges[k][0]), abs(value - self.ranges[k][1])))
        warnings.warn(f"{self.key}={value} lies outside every bucket; using {self.labels()[nearest]}")
        return nearest


DEFAULT_BUCKETS = {
    "graph_diameter": BucketSpec("graph_diameter", [(0, 7), (7, 14), (14, 20)]),
    "sentence_length": BucketSpec("sentence_length", [(0, 20), (20, 50), (50, 240)]),
    "max_out_degree": BucketSpec("max_out_degree", [(0, 4), (4, 9), (9, 18)]),
}


def bucket_value(example, key):
    if key == "sentence_length":
        return len(example.tokens)
    stats = graph_stats(example.graph)
    if key == "graph_diameter":
        return stats.diameter
    if key == "max_out_degree":
        return stats.max_out_degree
    raise ValueError(f"unknown bucket key {key!r}")


@dataclass
class BucketRow:
    bucket: str
    count: int
    bleu: float | None
    delta_pct: float | None


def bucket_eval(dataset, outputs, spec, baseline=None, lowercase=True):
    """Per-bucket BLEU of ``outputs`` against the dataset's reference tokens.

    With ``baseline`` outputs, each row also carries the relative change
    ``100 * (bleu - baseline_bleu) / baseline_bleu``. Empty buckets get no score.
    """
    if isinstance(spec, str):
        spec = DEFAULT_BUCKETS[spec]
    if len(outputs) != len(dataset):
        raise ValueError("outputs must align with the dataset")
    members = [[] for _ in spec.ranges]
    for i, ex in enumerate(dataset):
        members[spec.assign(bucket_value(ex, spec.key))].append(i)
    rows = []
    for label, idx in zip(spec.labels(), members):
        if not idx:
            rows.append(BucketRow(label, 0, None, None))
            continue
        refs = [dataset[i].tokens for i in idx]
        score = bleu(refs, [outputs[i] for i in idx], lowercase)
        delta = None
        if baseline is not None:
            base = bleu(refs, [baseline[i] for i in idx], lowercase)
            delta = 100.0 * (score - base) / base if base > 0 else None
        rows.append(BucketRow(label, len(idx), score, delta))
    return rows


def bucket_table_tsv(rows):
    lines = ["bucket\tcount\tbleu\tdelta_pct"]
    for r in rows:
        score = "-" if r.bleu is None else f"{r.bleu:.2f}"
        delta = "-" if r.delta_pct is None else f"{r.delta_pct:+.1f}%"
        lines.append(f"{r.bucket}\t{r.count}\t{score}\t{delta}")
    return "\n".join(lines) + "\n"


# -- adequacy -----------------------------------------------------------------

_SENSE = re.compile(r"-\d+$")
_SUFFIXES = ("ing", "ed", "es", "s")


def stem(word):
    """Crude lemma proxy: lowercase, drop sense tags and one inflectional suffix."""
    w = _SENSE.sub("", word.lower())
    for suf in _SUFFIXES:
        if w.endswith(suf) and len(w) - len(suf) >= 3:
            w = w[:-len(suf)]
            break
    if len(w) > 3 and w.endswith("e"):
        w = w[:-1]
    return w


@dataclass
class AdequacyReport:
    added_pct: float
    missing_pct: float
    added_tokens: list = field(default_factory=list)
    missing_concepts: list = field(default_factory=list)
    flagged: bool = False


def adequacy(graph, sentence):
    """Fractions of output tokens not in the graph (ADDED) and concepts not in the output (MISS).

    Concepts are the graph's node labels (constants included, relations
    excluded); matching compares :func:`stem` forms.
    """
    tokens = sentence.split() if isinstance(sentence, str) else list(sentence)
    concepts = [node.label for node in graph.nodes]
    if not tokens:
        return AdequacyReport(0.0, 1.0, [], concepts, flagged=True)
    concept_stems = {stem(c) for c in concepts}
    token_stems = {stem(t) for t in tokens}
    added = [t for t in tokens if stem(t) not in concept_stems]
    missing = [c for c in concepts if stem(c) not in token_stems]
    return AdequacyReport(len(added) / len(tokens), len(missing) / len(concepts), added, missing)


def corpus_adequacy(graphs, sentences):
    """Micro-averaged ADDED / MISS over a corpus."""
    added = tokens = missing = concepts = 0
    for g, s in zip(graphs, sentences):
        rep = adequacy(g, s)
        n_tok = len(s.split() if isinstance(s, str) else s)
        added += len(rep.added_tokens)
        tokens += n_tok
        missing += len(rep.missing_concepts)
        concepts += g.n
    return AdequacyReport(added / tokens if tokens else 0.0, missing / concepts if concepts else 1.0)
