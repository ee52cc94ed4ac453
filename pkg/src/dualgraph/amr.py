"""AMR graphs: PENMAN parsing, Levi views, traversal order and corpus statistics."""

from __future__ import annotations

import io
import re
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Sequence

TOP_DOWN = "top_down"
BOTTOM_UP = "bottom_up"

_TOKEN_RE = re.compile(r'\s*(\(|\)|/|"(?:[^"\\]|\\.)*"|:[^\s()"]*|[^\s()/"]+)')
_VARIABLE_RE = re.compile(r"^[a-z]\d*$")


class PenmanError(ValueError):
    """Malformed PENMAN input; ``offset`` is the byte offset of the problem."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class UsageError(ValueError):
    pass


class AmrNode(NamedTuple):
    id: int
    variable: str | None
    label: str


class AmrEdge(NamedTuple):
    source: int
    relation: str
    target: int


@dataclass(frozen=True)
class AmrGraph:
    nodes: tuple[AmrNode, ...]
    edges: tuple[AmrEdge, ...]
    root: int

    def __post_init__(self):
        n = len(self.nodes)
        if not 0 <= self.root < n:
            raise ValueError(f"root {self.root} is not a node id")
        for e in self.edges:
            if not (0 <= e.source < n and 0 <= e.target < n):
                raise ValueError(f"edge {e} has an endpoint outside the graph")
        variables = [v.variable for v in self.nodes if v.variable is not None]
        if len(set(variables)) != len(variables):
            raise ValueError("duplicate variable names")

    @property
    def n(self):
        return len(self.nodes)

    @property
    def m(self):
        return len(self.edges)

    @property
    def labels(self):
        return [v.label for v in self.nodes]


@dataclass(frozen=True)
class GraphView:
    """Unlabeled directed graph over concept and relation nodes.

    View-node ids ``0 .. n_concepts-1`` are the original concepts; the rest are
    relation nodes, one per original edge, in edge order.
    """

    node_labels: tuple[str, ...]
    in_neighbors: tuple[tuple[int, ...], ...]
    out_neighbors: tuple[tuple[int, ...], ...]
    root: int
    kind: str
    n_concepts: int

    @property
    def num_nodes(self):
        return len(self.node_labels)

    @property
    def num_edges(self):
        return sum(len(x) for x in self.in_neighbors)

    def edge_list(self):
        return [(j, i) for i, srcs in enumerate(self.in_neighbors) for j in srcs]

    def is_relation(self, i):
        return i >= self.n_concepts


@dataclass(frozen=True)
class GraphStats:
    node_count: int
    edge_count: int
    diameter: int
    max_out_degree: int
    mean_degree: Fraction
    is_dag: bool
    degrees: tuple[int, ...] = field(default=(), repr=False)


@dataclass
class AmrExample:
    graph: AmrGraph
    tokens: list[str]
    id: str | None = None
    penman: str | None = None


# -- parsing ----------------------------------------------------------------


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            if text[pos:].strip() == "":
                break
            raise PenmanError(f"unexpected character {text[pos]!r}", _byte_offset(text, pos))
        tokens.append((m.group(1), m.start(1)))
        pos = m.end()
    return tokens


def _byte_offset(text, pos):
    return len(text[:pos].encode("utf-8"))


def _unquote(tok):
    if len(tok) >= 2 and tok[0] == '"' and tok[-1] == '"':
        return tok[1:-1].replace('\\"', '"')
    return tok


def parse_penman(text):
    """Parse one PENMAN expression into an :class:`AmrGraph`.

    Attribute constants become leaf nodes; a bare token naming a variable
    defined anywhere in the expression is a reentrancy edge.
    """
    tokens = _tokenize(text)
    if not tokens:
        raise PenmanError("empty input", _byte_offset(text, len(text)))
    defined = {tokens[i + 1][0] for i in range(len(tokens) - 1) if tokens[i][0] == "("}
    nodes, edges, var_ids = [], [], {}
    pos = 0

    def offset(i):
        if i < len(tokens):
            return _byte_offset(text, tokens[i][1])
        return _byte_offset(text, len(text))

    def peek():
        return tokens[pos][0] if pos < len(tokens) else None

    def take(expected=None):
        nonlocal pos
        if pos >= len(tokens):
            what = f"expected {expected!r}" if expected else "unexpected end of input"
            raise PenmanError(f"{what}: unbalanced parentheses", offset(pos))
        tok = tokens[pos][0]
        if expected is not None and tok != expected:
            raise PenmanError(f"expected {expected!r}, found {tok!r}", offset(pos))
        pos += 1
        return tok

    def parse_node():
        take("(")
        var_at = pos
        var = take()
        if var in "()/" or var.startswith(":"):
            raise PenmanError(f"expected a variable, found {var!r}", offset(var_at))
        if var in var_ids:
            raise PenmanError(f"variable {var!r} defined twice", offset(var_at))
        take("/")
        concept_at = pos
        concept = take()
        if concept in "()/" or concept.startswith(":"):
            raise PenmanError(f"expected a concept, found {concept!r}", offset(concept_at))
        node_id = len(nodes)
        var_ids[var] = node_id
        nodes.append(AmrNode(node_id, var, _unquote(concept)))
        while peek() is not None and peek().startswith(":"):
            role = take()
            slot = len(edges)
            edges.append(None)
            nxt = peek()
            if nxt == "(":
                target = parse_node()
            elif nxt is None or nxt in (")", "/") or nxt.startswith(":"):
                raise PenmanError(f"relation {role} has no value", offset(pos))
            else:
                value_at = pos
                value = take()
                if value in defined:
                    target = var_ids.get(value)
                    if target is None:
                        target = _forward_refs.setdefault(value, [])
                        target.append(slot)
                        edges[slot] = (node_id, role, value)
                        continue
                elif _VARIABLE_RE.match(value):
                    raise PenmanError(f"undefined variable {value!r}", offset(value_at))
                else:
                    target = len(nodes)
                    nodes.append(AmrNode(target, None, _unquote(value)))
            edges[slot] = (node_id, role, target)
        take(")")
        return node_id

    _forward_refs: dict[str, list[int]] = {}
    root = parse_node()
    if pos != len(tokens):
        if tokens[pos][0] == ")":
            raise PenmanError("unbalanced parentheses: extra ')'", offset(pos))
        raise PenmanError(f"trailing content {tokens[pos][0]!r}", offset(pos))
    for var, slots in _forward_refs.items():
        for slot in slots:
            src, role, _ = edges[slot]
            edges[slot] = (src, role, var_ids[var])
    return AmrGraph(
        nodes=tuple(nodes),
        edges=tuple(AmrEdge(*e) for e in edges),
        root=root,
    )


def read_amr_corpus(source):
    """Read AMR-release text: blank-line separated blocks, ``# ::snt`` sentences.

    ``source`` is a path or an open text stream.
    """
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        with open(source, encoding="utf-8") as fh:
            return read_amr_corpus(fh)
    examples = []
    comments, body = [], []

    def flush():
        if not body:
            comments.clear()
            return
        snt, ident = "", None
        for c in comments:
            if c.startswith("# ::snt "):
                snt = c[len("# ::snt "):]
            elif c.startswith("# ::snt"):
                snt = c[len("# ::snt"):]
            m = re.search(r"::id\s+(\S+)", c)
            if m:
                ident = m.group(1)
        text = "\n".join(body)
        examples.append(AmrExample(parse_penman(text), snt.split(), ident, text))
        comments.clear()
        body.clear()

    for line in source:
        line = line.rstrip("\n")
        if not line.strip():
            flush()
        elif line.lstrip().startswith("#"):
            if body:
                flush()
            comments.append(line.strip())
        else:
            body.append(line)
    flush()
    return examples


def write_amr_corpus(examples, stream=None):
    """Serialize examples (which must carry ``penman`` text) in release format."""
    out = stream if stream is not None else io.StringIO()
    for k, ex in enumerate(examples):
        if k:
            out.write("\n")
        if ex.id is not None:
            out.write(f"# ::id {ex.id}\n")
        out.write(f"# ::snt {' '.join(ex.tokens)}\n")
        out.write(ex.penman.strip() + "\n")
    return out.getvalue() if stream is None else None


# -- views ------------------------------------------------------------------


def levi_transform(g):
    """Turn each labeled edge into a relation node between two unlabeled edges."""
    n = g.n
    labels = list(g.labels) + [e.relation for e in g.edges]
    ins = [[] for _ in labels]
    outs = [[] for _ in labels]
    for k, e in enumerate(g.edges):
        r = n + k
        outs[e.source].append(r)
        ins[r].append(e.source)
        outs[r].append(e.target)
        ins[e.target].append(r)
    return GraphView(
        node_labels=tuple(labels),
        in_neighbors=tuple(map(tuple, ins)),
        out_neighbors=tuple(map(tuple, outs)),
        root=g.root,
        kind=TOP_DOWN,
        n_concepts=n,
    )


def reverse_view(v, check=True):
    """Reverse every edge of a top-down view, giving the bottom-up view."""
    if check and v.kind != TOP_DOWN:
        raise UsageError("reverse_view expects a top_down view")
    kind = BOTTOM_UP if v.kind == TOP_DOWN else TOP_DOWN
    return GraphView(
        node_labels=v.node_labels,
        in_neighbors=v.out_neighbors,
        out_neighbors=v.in_neighbors,
        root=v.root,
        kind=kind,
        n_concepts=v.n_concepts,
    )


def dfs_order(v):
    """Depth-first preorder from the root; unreachable nodes follow in id order."""
    if v.kind != TOP_DOWN:
        raise UsageError("dfs_order expects a top_down view")
    seen = [False] * v.num_nodes
    order = []
    stack = [v.root]
    while stack:
        i = stack.pop()
        if seen[i]:
            continue
        seen[i] = True
        order.append(i)
        stack.extend(j for j in reversed(v.out_neighbors[i]) if not seen[j])
    order.extend(i for i in range(v.num_nodes) if not seen[i])
    return order


# -- statistics ---------------------------------------------------------------


def _undirected(g):
    adj = [set() for _ in range(g.n)]
    for e in g.edges:
        if e.source != e.target:
            adj[e.source].add(e.target)
            adj[e.target].add(e.source)
    return adj


def _eccentricity(adj, start):
    dist = {start: 0}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for w in adj[u]:
            if w not in dist:
                dist[w] = dist[u] + 1
                queue.append(w)
    return max(dist.values())


def _is_dag(g):
    indeg = [0] * g.n
    succ = [[] for _ in range(g.n)]
    for e in g.edges:
        succ[e.source].append(e.target)
        indeg[e.target] += 1
    ready = [i for i in range(g.n) if indeg[i] == 0]
    done = 0
    while ready:
        u = ready.pop()
        done += 1
        for w in succ[u]:
            indeg[w] -= 1
            if indeg[w] == 0:
                ready.append(w)
    return done == g.n


def graph_stats(g):
    adj = _undirected(g)
    diameter = max(_eccentricity(adj, i) for i in range(g.n))
    out_deg = [0] * g.n
    deg = [0] * g.n
    for e in g.edges:
        out_deg[e.source] += 1
        deg[e.source] += 1
        deg[e.target] += 1
    return GraphStats(
        node_count=g.n,
        edge_count=g.m,
        diameter=diameter,
        max_out_degree=max(out_deg),
        mean_degree=Fraction(2 * g.m, g.n),
        is_dag=_is_dag(g),
        degrees=tuple(deg),
    )


@dataclass
class Summary:
    name: str
    min: int
    mean: float
    max: int


@dataclass
class CorpusReport:
    rows: list[Summary]
    dag_count: int
    non_dag_count: int
    histograms: dict[str, list[tuple[int, int, int]]]

    def row(self, name):
        return next(r for r in self.rows if r.name == name)

    def to_tsv(self):
        lines = ["statistic\tmin\tmean\tmax"]
        lines += [f"{r.name}\t{r.min}\t{r.mean:.4f}\t{r.max}" for r in self.rows]
        lines.append(f"dag_graphs\t{self.dag_count}")
        lines.append(f"non_dag_graphs\t{self.non_dag_count}")
        for name, hist in self.histograms.items():
            lines.append(f"# histogram {name}")
            lines.append("bucket_low\tbucket_high\tcount")
            lines += [f"{lo}\t{hi}\t{c}" for lo, hi, c in hist]
        return "\n".join(lines) + "\n"


def _summary(name, values):
    return Summary(name, min(values), sum(values) / len(values), max(values))


def _unit_histogram(values):
    counts = [0] * (max(values) + 1)
    for v in values:
        counts[v] += 1
    return [(k, k + 1, c) for k, c in enumerate(counts)]


def corpus_stats(corpus: Sequence):
    """Aggregate statistics over ``(graph, tokens)`` pairs or :class:`AmrExample`.

    Degree rows and the degree histogram count every node of every graph; the
    other rows count graphs (or sentences).
    """
    pairs = [(x.graph, x.tokens) if isinstance(x, AmrExample) else x for x in corpus]
    if not pairs:
        raise UsageError("corpus_stats needs a nonempty corpus")
    stats = [graph_stats(g) for g, _ in pairs]
    degrees = [d for s in stats for d in s.degrees]
    lengths = [len(t.split()) if isinstance(t, str) else len(t) for _, t in pairs]
    rows = [
        _summary("nodes", [s.node_count for s in stats]),
        _summary("edges", [s.edge_count for s in stats]),
        _summary("diameter", [s.diameter for s in stats]),
        _summary("degree", degrees),
        _summary("max_out_degree", [s.max_out_degree for s in stats]),
        _summary("sentence_length", lengths),
    ]
    dags = sum(s.is_dag for s in stats)
    return CorpusReport(
        rows=rows,
        dag_count=dags,
        non_dag_count=len(stats) - dags,
        histograms={
            "diameter": _unit_histogram([s.diameter for s in stats]),
            "degree": _unit_histogram(degrees),
        },
    )
