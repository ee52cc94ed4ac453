"""
From PENMAN text to the two graph views
=======================================

Parse one AMR, turn its labeled edges into relation nodes, then reverse
every edge to get the bottom-up view. Finish with corpus statistics.
"""

from dualgraph.amr import (corpus_stats, dfs_order, graph_stats, levi_transform, parse_penman,
                           reverse_view)
from dualgraph.synthetic import load_bundled

text = "(w / want-01 :ARG0 (b / boy) :ARG1 (g / go-01 :ARG0 b :ARG4 (c / city)))"
g = parse_penman(text)
print(f"{g.n} concepts, {g.m} labeled edges (the second :ARG0 into b is a reentrancy)")

# Levi view: concept nodes first, then one node per relation
top_down = levi_transform(g)
print(f"top-down view: {top_down.num_nodes} nodes = n + m, {top_down.num_edges} edges = 2m")
for src, dst in top_down.edge_list():
    print(f"  {top_down.node_labels[src]:>8} -> {top_down.node_labels[dst]}")

bottom_up = reverse_view(top_down)
print("bottom-up view has every arrow flipped:",
      set(bottom_up.edge_list()) == {(d, s) for s, d in top_down.edge_list()})

# the BiLSTM reads nodes in depth-first order
print("DFS order:", " ".join(top_down.node_labels[i] for i in dfs_order(top_down)))

s = graph_stats(g)
print(f"diameter {s.diameter}, max out-degree {s.max_out_degree}, DAG: {s.is_dag}")

# corpus-level report, the same TSV that `dualgraph stats` prints
print()
print(corpus_stats(load_bundled("mini")).to_tsv())
