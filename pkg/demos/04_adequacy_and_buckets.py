"""
Looking past the BLEU score
===========================

Two analyses of generated text: BLEU split by graph diameter, and
added / missing tokens measured against the input concepts.
"""

import numpy as np

from dualgraph.evaluation import adequacy, bleu, bucket_eval, bucket_table_tsv, corpus_adequacy
from dualgraph.amr import AmrExample, parse_penman
from dualgraph.synthetic import PATH_WORDS, load_bundled

rng = np.random.default_rng(0)


def chain(k):
    """A k-edge chain, so its diameter is k; long enough to reach the upper buckets."""
    words = [PATH_WORDS[i % len(PATH_WORDS)] for i in range(k + 1)]
    penman = ""
    for depth, w in reversed(list(enumerate(words))):
        penman = f"(n{depth} / {w}{' :next ' + penman if penman else ''})"
    return AmrExample(parse_penman(penman), " then ".join(words).split(), f"chain{k}", penman)


data = load_bundled("synthetic30") + [chain(k) for k in range(7, 20)]


def corrupt(tokens, p):
    """Drop each token with probability p, a stand-in for a weaker system."""
    kept = [t for t in tokens if rng.random() >= p]
    return kept or tokens[:1]


system = [corrupt(ex.tokens, 0.1) for ex in data]
baseline = [corrupt(ex.tokens, 0.3) for ex in data]
refs = [ex.tokens for ex in data]
print(f"system BLEU {bleu(refs, system):.2f}, baseline BLEU {bleu(refs, baseline):.2f}\n")

print("# graph_diameter buckets")
print(bucket_table_tsv(bucket_eval(data, system, "graph_diameter", baseline=baseline)))

# adequacy on one example, token by token
ex = data[0]
rep = adequacy(ex.graph, ex.tokens)
print(" ".join(ex.tokens))
print(f"  added: {rep.added_tokens} ({rep.added_pct:.0%})")
print(f"  missing: {rep.missing_concepts} ({rep.missing_pct:.0%})")

for name, outs in (("reference", refs), ("system", system), ("baseline", baseline)):
    rep = corpus_adequacy([ex.graph for ex in data], outs)
    print(f"{name:>9}: ADDED {rep.added_pct:.1%}  MISS {rep.missing_pct:.1%}")
