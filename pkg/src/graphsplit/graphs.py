"""Weighted undirected graphs and the matrices built from them.

Nodes are numbered ``1..n`` in every public interface (edge lists, JSON
files), matching the usual mathematical convention. Matrices are returned as
0-based numpy arrays.

Edges are always stored in canonical order: lexicographic in ``(i, j)`` with
``i < j``. Column ``e`` of an incidence matrix corresponds to the ``e``-th
edge in that order, and each edge is oriented from its lower to its higher
endpoint unless a flip mask says otherwise.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from numbers import Real
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import InvalidInputError

TOPOLOGIES = ("ring", "sequential", "star_first", "star_last", "complete")


def _canonical_edges(n, edges, what):
    seen = {}
    for edge in edges:
        try:
            i, j, w = edge
            i, j, w = int(i), int(j), float(w)
        except (TypeError, ValueError) as exc:
            raise InvalidInputError(f"bad {what} entry {edge!r}") from exc
        if i == j:
            raise InvalidInputError(f"self-loop at node {i}")
        if i > j:
            i, j = j, i
        if not (1 <= i and j <= n):
            raise InvalidInputError(f"edge ({i}, {j}) outside nodes 1..{n}")
        if not np.isfinite(w) or w <= 0:
            raise InvalidInputError(f"edge ({i}, {j}) needs a positive finite weight, got {w}")
        if (i, j) in seen:
            raise InvalidInputError(f"duplicate edge ({i}, {j})")
        seen[(i, j)] = w
    return tuple((i, j, seen[(i, j)]) for i, j in sorted(seen))


def _components(n, pairs):
    if n == 0:
        return 0
    rows = [i - 1 for i, _ in pairs]
    cols = [j - 1 for _, j in pairs]
    adj = coo_matrix((np.ones(len(pairs)), (rows, cols)), shape=(n, n))
    count, _ = connected_components(adj, directed=False)
    return int(count)


@dataclass(frozen=True)
class WeightedGraph:
    """Undirected graph on nodes ``1..n`` with positive edge weights."""

    n: int
    edges: tuple

    def __post_init__(self):
        if int(self.n) < 1:
            raise InvalidInputError("a graph needs at least one node")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "edges", _canonical_edges(self.n, self.edges, "edge"))

    @property
    def m(self):
        return len(self.edges)

    def pairs(self):
        return [(i, j) for i, j, _ in self.edges]

    @cached_property
    def _lookup(self):
        return {(i, j): w for i, j, w in self.edges}

    def weight(self, i, j):
        if i > j:
            i, j = j, i
        return self._lookup.get((i, j), 0.0)

    def has_edge(self, i, j):
        return self.weight(i, j) > 0.0

    def weight_matrix(self):
        W = np.zeros((self.n, self.n))
        for i, j, w in self.edges:
            W[i - 1, j - 1] = W[j - 1, i - 1] = w
        return W

    def adjacency(self):
        return (self.weight_matrix() > 0).astype(float)

    def neighbors(self, i):
        out = set()
        for a, b, _ in self.edges:
            if a == i:
                out.add(b)
            elif b == i:
                out.add(a)
        return out

    def is_connected(self):
        return _components(self.n, self.pairs()) == 1

    def full_subgraph(self):
        """The subgraph keeping every edge with the same weight."""
        return SubgraphWeights(self, self.edges)

    def to_dict(self):
        return {"n": self.n, "edges": [[i, j, w] for i, j, w in self.edges]}


@dataclass(frozen=True)
class SubgraphWeights:
    """Spanning subgraph of ``parent`` whose edge weights (mu squared) never exceed the parent's."""

    parent: WeightedGraph
    edges: tuple

    def __post_init__(self):
        edges = _canonical_edges(self.parent.n, self.edges, "subgraph edge")
        for i, j, mu2 in edges:
            w = self.parent.weight(i, j)
            if w == 0.0:
                raise InvalidInputError(f"subgraph edge ({i}, {j}) is not an edge of the parent graph")
            if mu2 > w * (1 + 1e-12):
                raise InvalidInputError(
                    f"subgraph weight {mu2} on ({i}, {j}) exceeds the parent weight {w}"
                )
        object.__setattr__(self, "edges", edges)

    @property
    def n(self):
        return self.parent.n

    @property
    def m(self):
        return len(self.edges)

    def pairs(self):
        return [(i, j) for i, j, _ in self.edges]

    def is_connected(self):
        return _components(self.n, self.pairs()) == 1

    def as_graph(self):
        return WeightedGraph(self.n, self.edges)

    def weight_matrix(self):
        return self.as_graph().weight_matrix()

    def to_dict(self):
        doc = self.parent.to_dict()
        doc["subgraph"] = [[i, j, mu2] for i, j, mu2 in self.edges]
        return doc


def build_topology(kind, n, weight_fn=1.0):
    """Build one of the named topologies on ``n`` nodes.

    ``weight_fn`` is either a positive constant or a callable ``(i, j) -> w``
    evaluated on 1-based endpoints with ``i < j``.
    """
    n = int(n)
    if kind not in TOPOLOGIES:
        raise InvalidInputError(f"unknown topology {kind!r}; expected one of {TOPOLOGIES}")
    minimum = 3 if kind == "ring" else 2
    if n < minimum:
        raise InvalidInputError(f"{kind} topology needs n >= {minimum}, got {n}")
    if kind == "sequential":
        pairs = [(i, i + 1) for i in range(1, n)]
    elif kind == "ring":
        pairs = [(i, i + 1) for i in range(1, n)] + [(1, n)]
    elif kind == "star_first":
        pairs = [(1, j) for j in range(2, n + 1)]
    elif kind == "star_last":
        pairs = [(i, n) for i in range(1, n)]
    else:
        pairs = [(i, j) for i in range(1, n) for j in range(i + 1, n + 1)]
    if isinstance(weight_fn, Real):
        const = float(weight_fn)
        weight_fn = lambda i, j: const  # noqa: E731
    return WeightedGraph(n, [(i, j, weight_fn(i, j)) for i, j in pairs])


def subgraph(parent, kind_or_pairs, mu2=None):
    """Convenience constructor for :class:`SubgraphWeights`.

    ``kind_or_pairs`` is a topology name or an explicit list of ``(i, j)``
    pairs. ``mu2`` is a constant, a callable ``(i, j) -> mu^2`` or ``None``
    to reuse the parent weights.
    """
    if isinstance(kind_or_pairs, str):
        pairs = build_topology(kind_or_pairs, parent.n).pairs()
    else:
        pairs = [(min(i, j), max(i, j)) for i, j in kind_or_pairs]
    if mu2 is None:
        fn = parent.weight
    elif isinstance(mu2, Real):
        fn = lambda i, j: float(mu2)  # noqa: E731
    else:
        fn = mu2
    return SubgraphWeights(parent, [(i, j, fn(i, j)) for i, j in pairs])


def _as_subgraph(g):
    if isinstance(g, SubgraphWeights):
        return g
    if isinstance(g, WeightedGraph):
        return g.full_subgraph()
    raise InvalidInputError(f"expected a graph, got {type(g).__name__}")


def incidence(gw, flip=None):
    """Weighted incidence matrix of a connected (sub)graph.

    Column ``e`` holds ``+sqrt(w_e)`` at the tail of edge ``e`` and
    ``-sqrt(w_e)`` at its head. By default the tail is the lower endpoint;
    ``flip[e] = True`` reverses edge ``e``.
    """
    gw = _as_subgraph(gw)
    if not gw.is_connected():
        raise InvalidInputError("incidence matrix requested for a disconnected graph")
    return _incidence_unchecked(gw.n, gw.edges, flip)


def _incidence_unchecked(n, edges, flip=None):
    M = np.zeros((n, len(edges)))
    flips = np.zeros(len(edges), dtype=bool) if flip is None else np.asarray(flip, dtype=bool)
    if flips.shape != (len(edges),):
        raise InvalidInputError("flip mask must have one entry per edge")
    for e, (i, j, w) in enumerate(edges):
        s = np.sqrt(w)
        tail, head = (j, i) if flips[e] else (i, j)
        M[tail - 1, e] = s
        M[head - 1, e] = -s
    return M


def degree_matrix(g):
    """Diagonal matrix of weighted degrees."""
    W = g.weight_matrix()
    return np.diag(W.sum(axis=1))


def laplacian(g):
    """Degree minus weight matrix; accepts a graph or a subgraph."""
    W = g.weight_matrix()
    return np.diag(W.sum(axis=1)) - W


def edge_offset(i, n):
    """Number of complete-graph edges whose lower endpoint precedes node ``i``."""
    return (i - 1) * (2 * n - i) // 2


def graph_from_dict(doc):
    """Parse ``{"n", "edges", "subgraph"?}``; returns ``(graph, subgraph)``."""
    try:
        g = WeightedGraph(int(doc["n"]), [tuple(e) for e in doc["edges"]])
    except (KeyError, TypeError) as exc:
        raise InvalidInputError(f"bad graph document: {exc}") from exc
    sub = doc.get("subgraph")
    gw = g.full_subgraph() if sub is None else SubgraphWeights(g, [tuple(e) for e in sub])
    return g, gw


def load_graph(path):
    return graph_from_dict(json.loads(Path(path).read_text()))


def save_graph(gw, path):
    Path(path).write_text(json.dumps(_as_subgraph(gw).to_dict()))
