"""
How big is each encoder configuration?
======================================

Parameter counts for the four ablations at full size (300-d graph states,
450 per BiLSTM direction, 900-d two-layer decoder), for each graph layer
type. The vocabulary comes from the synthetic corpus, so the embedding
tables are small; the gaps between rows are what matters.
"""

from dualgraph.decoder import DecoderConfig
from dualgraph.encoder import ABLATIONS, EncoderConfig
from dualgraph.model import Graph2Seq, count_parameters
from dualgraph.synthetic import load_bundled
from dualgraph.vocab import build_vocab

src, tgt = build_vocab(load_bundled("synthetic30"))
print(f"source vocab {len(src)}, target vocab {len(tgt)}\n")
print(f"{'encoder':8}" + "".join(f"{a:>14}" for a in ABLATIONS))
for kind in ("ggnn", "gat", "gin"):
    counts = [count_parameters(Graph2Seq(EncoderConfig(kind), DecoderConfig(), src, tgt,
                                         ablation=a).params) for a in ABLATIONS]
    print(f"{kind:8}" + "".join(f"{c / 1e6:13.2f}M" for c in counts))

# the dual model adds a second graph encoder and a wider BiLSTM input,
# and top-down and bottom-up cost exactly the same
