"""Random PENMAN strings with independently known node and edge counts."""

import numpy as np

CONCEPTS = ("want-01", "go-02", "boy", "girl", "city", "name", "and", "say-01", "big", "thing")
ROLES = (":ARG0", ":ARG1", ":ARG2", ":mod", ":op1", ":time", ":ARG0-of", ":name")
CONSTANTS = ("-", "+", "1", "42", '"Paris"', "imperative")


def random_penman(rng, max_nodes=30):
    """Return ``(text, n, m)``; ``n`` counts concepts and constants, ``m`` all edges.

    Builds a random tree of instances, then sprinkles constants and reentrant
    references (bare variable names, possibly pointing forward or to an
    ancestor, so cycles occur).
    """
    n_inst = int(rng.integers(1, max(2, max_nodes // 2) + 1))
    parent = [-1] + [int(rng.integers(0, k)) for k in range(1, n_inst)]
    children = [[] for _ in range(n_inst)]
    for k in range(1, n_inst):
        children[parent[k]].append(("node", k))
    n, m = n_inst, n_inst - 1
    budget = max_nodes - n_inst
    for k in range(n_inst):
        if budget > 0 and rng.random() < 0.3:
            children[k].append(("const", CONSTANTS[rng.integers(len(CONSTANTS))]))
            n += 1
            m += 1
            budget -= 1
        if rng.random() < 0.2:
            children[k].append(("ref", int(rng.integers(n_inst))))
            m += 1
    for kids in children:
        rng.shuffle(kids)

    def render(k):
        parts = [f"(x{k} / {CONCEPTS[rng.integers(len(CONCEPTS))]}"]
        for kind, val in children[k]:
            role = ROLES[rng.integers(len(ROLES))]
            if kind == "node":
                parts.append(f"{role} {render(val)}")
            elif kind == "const":
                parts.append(f"{role} {val}")
            else:
                parts.append(f"{role} x{val}")
        return " ".join(parts) + ")"

    return render(0), n, m


def random_corpus(seed, count, max_nodes=30):
    rng = np.random.default_rng(seed)
    return [random_penman(rng, max_nodes) for _ in range(count)]
