"""Simple-graph representation and the matrix constructions derived from it.

A :class:`Graph` is a dense 0/1 adjacency matrix with zero diagonal,
symmetric when undirected.  From it we build degree vectors, the
combinatorial Laplacian ``diag(d) - A`` for undirected graphs, and the
oriented incidence matrix ``B`` for directed graphs.  Directed spectra use
the n-by-n Gram matrix ``B @ B.T`` so feature vectors keep a fixed length;
its nonzero eigenvalues agree with those of ``B.T @ B``.

Also provides the plain-text edge-list format used by the CLI:

    n <N> directed <0|1>
    i j            (one 1-indexed pair per line)
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


@dataclass(frozen=True)
class Graph:
    """A simple graph on ``n`` nodes with dense binary adjacency.

    Invariants enforced at construction: zero diagonal, entries in {0, 1},
    symmetry when undirected.  Instances are immutable; the adjacency array
    is set non-writeable so values are safe to share between workers.
    """

    n: int
    directed: bool
    adj: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("graph needs at least one node")
        a = np.ascontiguousarray(self.adj, dtype=np.uint8)
        if a.shape != (self.n, self.n):
            raise ValueError(f"adjacency must be {self.n}x{self.n}, got {a.shape}")
        if a.max(initial=0) > 1:
            raise ValueError("adjacency entries must be 0 or 1")
        if np.any(np.diag(a) != 0):
            raise ValueError("self-loops are not allowed")
        if not self.directed and not np.array_equal(a, a.T):
            raise ValueError("undirected adjacency must be symmetric")
        a.setflags(write=False)
        object.__setattr__(self, "adj", a)

    @classmethod
    def empty(cls, n: int, directed: bool = False) -> "Graph":
        return cls(n, directed, np.zeros((n, n), dtype=np.uint8))

    @classmethod
    def complete(cls, n: int) -> "Graph":
        a = np.ones((n, n), dtype=np.uint8)
        np.fill_diagonal(a, 0)
        return cls(n, False, a)

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]],
                   directed: bool = False) -> "Graph":
        """Build a graph from 0-indexed (i, j) pairs."""
        a = np.zeros((n, n), dtype=np.uint8)
        for i, j in edges:
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"edge ({i}, {j}) out of range for n={n}")
            if i == j:
                raise ValueError(f"self-loop at node {i}")
            a[i, j] = 1
            if not directed:
                a[j, i] = 1
        return cls(n, directed, a)

    def edge_count(self) -> int:
        s = int(self.adj.sum())
        return s if self.directed else s // 2

    def edges(self) -> list[tuple[int, int]]:
        """Edges in row-major scan order; undirected edges listed once as i < j."""
        if self.directed:
            ii, jj = np.nonzero(self.adj)
        else:
            ii, jj = np.nonzero(np.triu(self.adj))
        return list(zip(ii.tolist(), jj.tolist()))

    def __eq__(self, other):
        return (isinstance(other, Graph) and self.n == other.n
                and self.directed == other.directed
                and np.array_equal(self.adj, other.adj))


def degrees(g: Graph) -> np.ndarray:
    """Node degrees; for directed graphs the total (in + out) degree."""
    if g.directed:
        return (g.adj.sum(axis=1) + g.adj.sum(axis=0)).astype(np.int64)
    return g.adj.sum(axis=1).astype(np.int64)


def laplacian(g: Graph) -> np.ndarray:
    """Combinatorial Laplacian ``diag(d) - A`` of an undirected graph."""
    if g.directed:
        raise ValueError("laplacian() is for undirected graphs; "
                         "use directed_laplacian()")
    a = g.adj.astype(np.float64)
    return np.diag(a.sum(axis=1)) - a


def incidence(g: Graph) -> np.ndarray:
    """Oriented n-by-|E| incidence matrix of a directed graph.

    Column order follows a row-major scan of the adjacency matrix; the
    column of edge i -> j holds -1 at the tail i and +1 at the head j.
    """
    if not g.directed:
        raise ValueError("incidence() is for directed graphs")
    tails, heads = np.nonzero(g.adj)
    b = np.zeros((g.n, tails.size), dtype=np.float64)
    cols = np.arange(tails.size)
    b[tails, cols] = -1.0
    b[heads, cols] = 1.0
    return b


def directed_laplacian(g: Graph) -> np.ndarray:
    """Symmetric PSD matrix ``B @ B.T`` of a directed graph.

    Equals ``diag(d_out + d_in) - (A + A.T)``, which avoids forming B;
    the nonzero spectrum coincides with that of the |E|-by-|E| Gram matrix
    ``B.T @ B``.
    """
    if not g.directed:
        raise ValueError("directed_laplacian() is for directed graphs")
    a = g.adj.astype(np.float64)
    total = a.sum(axis=1) + a.sum(axis=0)
    return np.diag(total) - (a + a.T)


def connected_components(g: Graph) -> int:
    """Number of connected components of an undirected graph (union-find)."""
    if g.directed:
        raise ValueError("connected_components() is for undirected graphs")
    parent = np.arange(g.n)

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    ii, jj = np.nonzero(np.triu(g.adj))
    for i, j in zip(ii.tolist(), jj.tolist()):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
    return len({find(i) for i in range(g.n)})


def permute(g: Graph, perm: Sequence[int]) -> Graph:
    """Relabel nodes so that new node ``perm[i]`` is old node ``i``.

    ``perm`` must be a bijection on 0..n-1.
    """
    p = np.asarray(perm, dtype=np.int64)
    if p.shape != (g.n,) or not np.array_equal(np.sort(p), np.arange(g.n)):
        raise ValueError("perm must be a permutation of 0..n-1")
    a = np.zeros_like(g.adj)
    a[np.ix_(p, p)] = g.adj
    return Graph(g.n, g.directed, a)


class EdgeListError(ValueError):
    """Malformed edge-list text; carries the offending 1-based line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


def parse_edgelist(text: str) -> Graph:
    """Parse the plain-text edge-list format (1-indexed node pairs)."""
    lines = text.splitlines()
    if not lines:
        raise EdgeListError(1, "empty input, expected header 'n <N> directed <0|1>'")
    head = lines[0].split()
    if (len(head) != 4 or head[0] != "n" or head[2] != "directed"
            or head[3] not in ("0", "1")):
        raise EdgeListError(1, f"bad header {lines[0]!r}, "
                               "expected 'n <N> directed <0|1>'")
    try:
        n = int(head[1])
    except ValueError:
        raise EdgeListError(1, f"bad node count {head[1]!r}") from None
    if n < 1:
        raise EdgeListError(1, f"node count must be >= 1, got {n}")
    directed = head[3] == "1"

    a = np.zeros((n, n), dtype=np.uint8)
    for num, raw in enumerate(lines[1:], start=2):
        s = raw.strip()
        if not s:
            continue
        parts = s.split()
        if len(parts) != 2:
            raise EdgeListError(num, f"expected 'i j', got {raw!r}")
        try:
            i, j = int(parts[0]) - 1, int(parts[1]) - 1
        except ValueError:
            raise EdgeListError(num, f"non-integer endpoint in {raw!r}") from None
        if not (0 <= i < n and 0 <= j < n):
            raise EdgeListError(num, f"node index out of range 1..{n} in {raw!r}")
        if i == j:
            raise EdgeListError(num, f"self-loop at node {i + 1}")
        if a[i, j] or (not directed and a[j, i]):
            raise EdgeListError(num, f"duplicate edge {raw!r}")
        a[i, j] = 1
        if not directed:
            a[j, i] = 1
    return Graph(n, directed, a)


def read_edgelist(path) -> Graph:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_edgelist(fh.read())


def format_edgelist(g: Graph) -> str:
    """Canonical edge-list text: header then edges in row-major scan order."""
    out = [f"n {g.n} directed {1 if g.directed else 0}"]
    out.extend(f"{i + 1} {j + 1}" for i, j in g.edges())
    return "\n".join(out) + "\n"


def write_edgelist(g: Graph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_edgelist(g))
