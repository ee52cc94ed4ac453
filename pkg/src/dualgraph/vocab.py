"""Token vocabularies and pretrained embedding loading."""

from __future__ import annotations

from collections import Counter

import numpy as np

PAD, UNK, BOS, EOS = "<pad>", "<unk>", "<s>", "</s>"
SPECIALS = (PAD, UNK, BOS, EOS)
PAD_ID, UNK_ID, BOS_ID, EOS_ID = range(4)
DEFAULT_MAX_SIZE = 20000


class Vocabulary:
    """Dense token ids with the four specials at 0-3."""

    def __init__(self, tokens=(), max_size=DEFAULT_MAX_SIZE):
        self.max_size = max_size
        self.itos = list(SPECIALS)
        self.stoi = {t: i for i, t in enumerate(self.itos)}
        for tok in tokens:
            if tok not in self.stoi:
                self.stoi[tok] = len(self.itos)
                self.itos.append(tok)

    def __len__(self):
        return len(self.itos)

    def __contains__(self, token):
        return token in self.stoi

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.itos == other.itos

    def id(self, token):
        return self.stoi.get(token, UNK_ID)

    def token(self, idx):
        return self.itos[idx]

    def encode(self, tokens):
        return [self.id(t) for t in tokens]

    def to_lines(self):
        return [t for t in self.itos[len(SPECIALS):]]

    @classmethod
    def from_lines(cls, lines, max_size=DEFAULT_MAX_SIZE):
        return cls([ln.rstrip("\n") for ln in lines if ln.rstrip("\n")], max_size)

    @classmethod
    def from_counts(cls, counts, max_size=DEFAULT_MAX_SIZE):
        """Most frequent first; equal counts ordered lexicographically."""
        ranked = sorted((t for t in counts if t not in SPECIALS), key=lambda t: (-counts[t], t))
        return cls(ranked[:max_size], max_size)


def build_vocab(corpus, max_size=DEFAULT_MAX_SIZE):
    """Source vocabulary over Levi node labels, target vocabulary over sentence tokens."""
    from .amr import levi_transform

    if not corpus:
        raise ValueError("build_vocab needs a nonempty corpus")
    src, tgt = Counter(), Counter()
    for ex in corpus:
        src.update(levi_transform(ex.graph).node_labels)
        tgt.update(ex.tokens)
    return Vocabulary.from_counts(src, max_size), Vocabulary.from_counts(tgt, max_size)


def load_pretrained_embeddings(path, vocab, dim, seed=0, dtype=np.float32):
    """Embedding table for ``vocab`` seeded from a GloVe-style text file.

    Returns ``(table, coverage)`` where coverage is the fraction of vocabulary
    entries found in the file. Missing rows are uniform in (-0.1, 0.1); the PAD
    row is zero.
    """
    rng = np.random.default_rng(seed)
    table = rng.uniform(-0.1, 0.1, size=(len(vocab), dim)).astype(dtype)
    found = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").rstrip().split(" ")
            if parts == [""]:
                continue
            if len(parts) != dim + 1:
                raise ValueError(
                    f"{path}:{lineno}: expected {dim + 1} fields, found {len(parts)}")
            token = parts[0]
            if token in vocab.stoi:
                idx = vocab.stoi[token]
                table[idx] = np.asarray(parts[1:], dtype=np.float64)
                found.add(idx)
    table[PAD_ID] = 0.0
    return table, len(found) / len(vocab)
