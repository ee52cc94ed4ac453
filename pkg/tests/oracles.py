"""Independent recounts used to freeze golden values.

The bundled mini corpus is transcribed by hand here as edge lists (node ids
in PENMAN reading order, constants included), so nothing in this file goes
through the package parser.
"""

MINI_GRAPHS = {
    "mini.1": (2, [(0, 1)]),
    "mini.2": (1, []),
    "mini.3": (7, [(0, 1), (0, 2), (2, 1), (2, 3), (3, 4), (4, 5), (4, 6)]),
    "mini.4": (4, [(0, 1), (0, 2), (2, 3), (3, 2)]),
    "mini.5": (23, [
        (0, 1), (1, 2), (2, 3), (2, 4), (4, 5), (1, 6), (6, 7), (6, 8), (8, 9),
        (0, 10), (10, 11), (11, 12), (11, 13), (11, 14), (10, 15), (15, 16), (16, 17),
        (15, 18), (18, 17), (10, 19), (10, 20), (0, 21), (21, 22),
    ]),
}

# whitespace tokens of each "# ::snt" line, counted by hand
MINI_SENTENCE_LENGTHS = {"mini.1": 2, "mini.2": 3, "mini.3": 9, "mini.4": 8, "mini.5": 24}


def bfs_distances(n, edges, start):
    adj = {i: [] for i in range(n)}
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    dist = {start: 0}
    frontier = [start]
    while frontier:
        nxt = []
        for u in frontier:
            for w in adj[u]:
                if w not in dist:
                    dist[w] = dist[u] + 1
                    nxt.append(w)
        frontier = nxt
    return dist


def brute_force_diameter(n, edges):
    """Longest shortest path over all reachable (undirected) pairs."""
    return max(max(bfs_distances(n, edges, s).values()) for s in range(n))


def has_cycle(n, edges):
    succ = {i: [] for i in range(n)}
    for u, v in edges:
        succ[u].append(v)
    color = [0] * n

    def visit(u):
        color[u] = 1
        for w in succ[u]:
            if color[w] == 1 or (color[w] == 0 and visit(w)):
                return True
        color[u] = 2
        return False

    return any(color[u] == 0 and visit(u) for u in range(n))


def recount(graphs, lengths):
    """Statistics TSV in the documented layout, computed from edge lists."""
    nodes, edges, diam, maxout, degrees, dag = [], [], [], [], [], 0
    for n, es in graphs:
        nodes.append(n)
        edges.append(len(es))
        diam.append(brute_force_diameter(n, es))
        out = [0] * n
        deg = [0] * n
        for u, v in es:
            out[u] += 1
            deg[u] += 1
            deg[v] += 1
        maxout.append(max(out))
        degrees.extend(deg)
        dag += not has_cycle(n, es)

    def row(name, xs):
        return f"{name}\t{min(xs)}\t{sum(xs) / len(xs):.4f}\t{max(xs)}"

    def hist(name, xs):
        out = [f"# histogram {name}", "bucket_low\tbucket_high\tcount"]
        out += [f"{k}\t{k + 1}\t{xs.count(k)}" for k in range(max(xs) + 1)]
        return out

    lines = ["statistic\tmin\tmean\tmax",
             row("nodes", nodes), row("edges", edges), row("diameter", diam),
             row("degree", degrees), row("max_out_degree", maxout),
             row("sentence_length", lengths),
             f"dag_graphs\t{dag}", f"non_dag_graphs\t{len(graphs) - dag}"]
    lines += hist("diameter", diam) + hist("degree", degrees)
    return "\n".join(lines) + "\n"


def mini_recount():
    keys = sorted(MINI_GRAPHS)
    return recount([MINI_GRAPHS[k] for k in keys], [MINI_SENTENCE_LENGTHS[k] for k in keys])
