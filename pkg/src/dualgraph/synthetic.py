"""Small synthetic AMR corpora with deterministic graph-to-sentence mappings."""

from __future__ import annotations

from importlib import resources

import numpy as np

from .amr import AmrExample, parse_penman, read_amr_corpus

NOUNS = ("boy", "girl", "dog", "cat", "bird", "teacher")
ADJECTIVES = ("big", "small", "red", "old")
VERBS = {"see-01": "sees", "chase-01": "chases", "like-01": "likes", "help-01": "helps"}
BARE = {"see-01": "see", "chase-01": "chase", "like-01": "like", "help-01": "help"}
NAMES = ("Kim", "Ana", "Olek", "Zhou")


def _noun_phrase(rng, var):
    """Return (penman, tokens, node count) for a noun, possibly modified or named."""
    roll = rng.random()
    if roll < 0.2:
        name = NAMES[rng.integers(len(NAMES))]
        return f"({var} / person :name ({var}n / name :op1 {name}))", [name], 3
    noun = NOUNS[rng.integers(len(NOUNS))]
    if roll < 0.6:
        adj = ADJECTIVES[rng.integers(len(ADJECTIVES))]
        return f"({var} / {noun} :mod ({var}m / {adj}))", ["the", adj, noun], 2
    return f"({var} / {noun})", ["the", noun], 1


def _clause(rng):
    verb = list(VERBS)[rng.integers(len(VERBS))]
    subj, subj_toks, ns = _noun_phrase(rng, "x")
    obj, obj_toks, no = _noun_phrase(rng, "y")
    if rng.random() < 0.25:
        # want-frame with a reentrant subject
        penman = f"(w / want-01 :ARG0 {subj} :ARG1 (v / {verb} :ARG0 x :ARG1 {obj}))"
        tokens = subj_toks + ["wants", "to", BARE[verb]] + obj_toks
        nodes = 2 + ns + no
    else:
        penman = f"(v / {verb} :ARG0 {subj} :ARG1 {obj})"
        tokens = subj_toks + [VERBS[verb]] + obj_toks
        nodes = 1 + ns + no
    if rng.random() < 0.3:
        penman = penman[:-1] + " :time (t / today))"
        tokens = tokens + ["today"]
        nodes += 1
    return penman, tokens, nodes


def make_synthetic_corpus(n=30, seed=7, max_nodes=10, max_tokens=12):
    """``n`` distinct examples; every sentence is a fixed function of its graph."""
    rng = np.random.default_rng(seed)
    seen, out = set(), []
    while len(out) < n:
        penman, tokens, nodes = _clause(rng)
        if penman in seen or nodes > max_nodes or len(tokens) > max_tokens:
            continue
        seen.add(penman)
        out.append(AmrExample(parse_penman(penman), tokens, f"syn{len(out)}", penman))
    return out


PATH_WORDS = ("alpha", "beta", "gamma", "delta", "omega", "sigma")


def make_path_corpus(n=24, seed=3, min_len=2, max_len=4):
    """Directed chains ``w1 -> w2 -> ...`` rendered as ``w1 then w2 then ...``.

    Each chain's reversal is included too, so the sentence is determined by
    edge direction, not by the set of concepts.
    """
    rng = np.random.default_rng(seed)
    seen, out = set(), []
    while len(out) < n:
        k = int(rng.integers(min_len, max_len + 1))
        words = [PATH_WORDS[i] for i in rng.choice(len(PATH_WORDS), size=k, replace=False)]
        for seq in (words, words[::-1]):
            key = tuple(seq)
            if key in seen or len(out) >= n:
                continue
            seen.add(key)
            penman = ""
            for depth, w in reversed(list(enumerate(seq))):
                inner = f" :next {penman}" if penman else ""
                penman = f"(n{depth} / {w}{inner})"
            tokens = " then ".join(seq).split()
            out.append(AmrExample(parse_penman(penman), tokens, f"path{len(out)}", penman))
    return out


def load_bundled(name):
    """Read a corpus shipped in ``dualgraph/data`` (``mini``, ``synthetic30``, ``paths``)."""
    files = {"mini": "mini_corpus.txt", "synthetic30": "synthetic30.txt", "paths": "paths.txt"}
    ref = resources.files("dualgraph").joinpath("data").joinpath(files[name])
    with resources.as_file(ref) as path:
        return read_amr_corpus(path)
