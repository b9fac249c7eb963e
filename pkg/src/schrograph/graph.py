"""
Graphs, graphs with tails, chains and simplicial complexes.

Vertices are arbitrary hashable ids; their order of appearance fixes an
index. Every edge is stored with its canonical orientation, from the
endpoint with the lower index to the one with the higher index, and all
chain coefficients refer to that orientation.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from itertools import combinations
from typing import Hashable, Iterable, Sequence

import numpy as np

__all__ = [
    "Edge",
    "Graph",
    "Tail",
    "GraphWithTails",
    "BasisDecomposition",
    "Chain0",
    "Chain1",
    "SimplicialComplex",
    "validate",
    "boundary",
    "coboundary",
    "compute_basis",
    "is_cycle",
    "path_graph",
    "cycle_graph",
    "complete_graph",
]


@dataclass(frozen=True)
class Edge:
    id: Hashable
    u: Hashable
    v: Hashable


class Graph:
    """
    Finite graph with canonically oriented edges.

    Parameters
    ----------
    vertices : iterable
        Vertex ids, in index order.
    edges : iterable
        Either ``(u, v)`` pairs (ids are assigned 0, 1, ...) or
        ``(id, u, v)`` triples. Orientation is normalised to
        low index -> high index. Loops are rejected; parallel edges are kept.
    """

    def __init__(self, vertices: Iterable[Hashable], edges: Iterable = ()):
        self.vertices = tuple(vertices)
        self._vindex = {v: i for i, v in enumerate(self.vertices)}
        if len(self._vindex) != len(self.vertices):
            raise ValueError("duplicate vertex ids")
        canon = []
        for k, e in enumerate(edges):
            if isinstance(e, Edge):
                eid, u, v = e.id, e.u, e.v
            elif len(e) == 3:
                eid, u, v = e
            else:
                (u, v), eid = e, k
            if u not in self._vindex or v not in self._vindex:
                raise ValueError(f"edge {eid!r} references unknown vertex")
            if u == v:
                raise ValueError(f"edge {eid!r} is a loop at {u!r}")
            if self._vindex[u] > self._vindex[v]:
                u, v = v, u
            canon.append(Edge(eid, u, v))
        self.edges = tuple(canon)
        self._eindex = {e.id: i for i, e in enumerate(self.edges)}
        if len(self._eindex) != len(self.edges):
            raise ValueError("duplicate edge ids")

    def __repr__(self):
        return f"Graph(n_vertices={self.n_vertices}, n_edges={self.n_edges})"

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def index(self, v) -> int:
        return self._vindex[v]

    def edge_index(self, eid) -> int:
        try:
            return self._eindex[eid]
        except KeyError:
            raise KeyError(f"edge {eid!r} not in graph") from None

    def has_vertex(self, v) -> bool:
        return v in self._vindex

    def edge(self, eid) -> Edge:
        return self.edges[self.edge_index(eid)]

    def endpoints(self) -> np.ndarray:
        """(M, 2) array of endpoint indices, tail first."""
        if not self.edges:
            return np.zeros((0, 2), dtype=int)
        return np.array([[self._vindex[e.u], self._vindex[e.v]] for e in self.edges])

    def incidence(self) -> np.ndarray:
        """Signed N x M incidence matrix; column of u->v is +1 at v, -1 at u."""
        B = np.zeros((self.n_vertices, self.n_edges))
        for k, (i, j) in enumerate(self.endpoints()):
            B[i, k] -= 1.0
            B[j, k] += 1.0
        return B

    def unsigned_incidence(self) -> np.ndarray:
        return np.abs(self.incidence())

    def adjacency(self) -> np.ndarray:
        """Adjacency matrix counting parallel edges with multiplicity."""
        A = np.zeros((self.n_vertices, self.n_vertices))
        for i, j in self.endpoints():
            A[i, j] += 1.0
            A[j, i] += 1.0
        return A

    def degrees(self) -> np.ndarray:
        d = np.zeros(self.n_vertices, dtype=int)
        for i, j in self.endpoints():
            d[i] += 1
            d[j] += 1
        return d

    def degree(self, v) -> int:
        return int(self.degrees()[self._vindex[v]])

    def neighbors(self, v) -> list:
        """Distinct neighbours of ``v`` in index order."""
        i = self._vindex[v]
        out = set()
        for a, b in self.endpoints():
            if a == i:
                out.add(b)
            elif b == i:
                out.add(a)
        return [self.vertices[k] for k in sorted(out)]

    def incident_edges(self, v) -> list:
        return [e.id for e in self.edges if e.u == v or e.v == v]

    def edges_between(self, u, v) -> list:
        return [e.id for e in self.edges if {e.u, e.v} == {u, v}]

    def subgraph(self, vertices: Iterable) -> "Graph":
        keep = set(vertices)
        vs = [v for v in self.vertices if v in keep]
        es = [(e.id, e.u, e.v) for e in self.edges if e.u in keep and e.v in keep]
        return Graph(vs, es)

    def components(self) -> list[list]:
        seen: set = set()
        comps = []
        for v in self.vertices:
            if v in seen:
                continue
            comp, queue = [], deque([v])
            seen.add(v)
            while queue:
                x = queue.popleft()
                comp.append(x)
                for y in self.neighbors(x):
                    if y not in seen:
                        seen.add(y)
                        queue.append(y)
            comps.append(sorted(comp, key=self.index))
        return comps

    def is_connected(self) -> bool:
        return len(self.components()) <= 1

    def line_graph_adjacency(self) -> np.ndarray:
        """M x M matrix counting shared endpoints of distinct edges."""
        Bu = self.unsigned_incidence()
        S = Bu.T @ Bu
        np.fill_diagonal(S, 0.0)
        return S


@dataclass(frozen=True)
class Tail:
    """
    Semi-infinite chain attached at ``attach`` (its site n = 0).

    Sites n = 1, ..., free_from - 1 may carry arbitrary potentials and the
    couplings of edges (0, 1), ..., (free_from - 2, free_from - 1); from
    site ``free_from`` on the operator is the free one, coupling 1 and
    potential 0.
    """

    attach: Hashable
    free_from: int = 1
    potentials: tuple = ()
    couplings: tuple = ()

    def __post_init__(self):
        if self.free_from < 1:
            raise ValueError("free_from must be >= 1")
        n_pre = self.free_from - 1
        pots = tuple(float(x) for x in self.potentials) or (0.0,) * n_pre
        cps = tuple(float(x) for x in self.couplings) or (1.0,) * n_pre
        if len(pots) != n_pre or len(cps) != n_pre:
            raise ValueError(
                f"tail at {self.attach!r}: expected {n_pre} prefix potentials "
                f"and couplings, got {len(pots)} and {len(cps)}"
            )
        object.__setattr__(self, "potentials", pots)
        object.__setattr__(self, "couplings", cps)

    def potential(self, n: int) -> float:
        return self.potentials[n - 1] if 1 <= n < self.free_from else 0.0

    def coupling(self, n: int) -> float:
        """Coupling on the edge joining sites n - 1 and n (n >= 1)."""
        return self.couplings[n - 1] if 1 <= n < self.free_from else 1.0


def tail_vertex(j: int, n: int) -> tuple:
    return ("tail", j, n)


def tail_edge(j: int, n: int) -> tuple:
    return ("tail", j, n)


class GraphWithTails:
    """
    A finite core graph together with k tails.

    The attachment vertex of every tail belongs to the core. Degrees of core
    vertices count tail edges.
    """

    def __init__(self, core: Graph, tails: Sequence[Tail] = ()):
        self.core = core
        self.tails = tuple(t if isinstance(t, Tail) else Tail(*t) for t in tails)
        for t in self.tails:
            if not core.has_vertex(t.attach):
                raise ValueError(f"tail attached at unknown vertex {t.attach!r}")

    def __repr__(self):
        return f"GraphWithTails(core={self.core!r}, k={self.k})"

    @property
    def k(self) -> int:
        return len(self.tails)

    def degrees(self) -> np.ndarray:
        d = self.core.degrees().copy()
        for t in self.tails:
            d[self.core.index(t.attach)] += 1
        return d

    def window(self, depth: int) -> tuple[Graph, list[list]]:
        """
        Finite window: the core plus tail sites n = 1..depth.

        Returns the graph and, for every tail, its vertex ids for
        n = 0..depth. Tail vertices are appended after the core, so tail
        edges are oriented outward.
        """
        vs = list(self.core.vertices)
        es = [(e.id, e.u, e.v) for e in self.core.edges]
        paths = []
        for j, t in enumerate(self.tails):
            path = [t.attach]
            for n in range(1, depth + 1):
                v = tail_vertex(j, n)
                vs.append(v)
                es.append((tail_edge(j, n), path[-1], v))
                path.append(v)
            paths.append(path)
        return Graph(vs, es), paths


@dataclass
class BasisDecomposition:
    """Result of pruning the trees off a graph with tails."""

    basis: Graph
    nests: tuple
    trees: list = field(default_factory=list)
    edge_nests: tuple = ()
    pruned_order: tuple = ()

    @property
    def trivial(self) -> bool:
        return self.basis.n_vertices == 1


@dataclass(eq=False)
class Chain0:
    graph: Graph
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.shape != (self.graph.n_vertices,):
            raise ValueError("Chain0 length does not match vertex count")

    @classmethod
    def delta(cls, graph: Graph, v) -> "Chain0":
        x = np.zeros(graph.n_vertices)
        x[graph.index(v)] = 1.0
        return cls(graph, x)

    @classmethod
    def from_dict(cls, graph: Graph, coef: dict) -> "Chain0":
        x = np.zeros(graph.n_vertices, dtype=np.result_type(*coef.values(), float) if coef else float)
        for v, c in coef.items():
            x[graph.index(v)] = c
        return cls(graph, x)

    def __getitem__(self, v):
        return self.values[self.graph.index(v)]

    def dot(self, other: "Chain0"):
        return np.vdot(self.values, other.values)


@dataclass(eq=False)
class Chain1:
    """
    1-chain: one coefficient per edge, in its canonical orientation.

    ``chain.at(eid, u, v)`` reads the coefficient of the edge traversed from
    ``u`` to ``v``; the reversed traversal negates it.
    """

    graph: Graph
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.shape != (self.graph.n_edges,):
            raise ValueError("Chain1 length does not match edge count")

    @classmethod
    def from_dict(cls, graph: Graph, coef: dict) -> "Chain1":
        """``coef`` maps either ``eid`` or ``(eid, u, v)`` to a scalar."""
        x = np.zeros(graph.n_edges, dtype=complex if any(np.iscomplexobj(c) for c in coef.values()) else float)
        for key, c in coef.items():
            if isinstance(key, tuple) and len(key) == 3 and key[0] in graph._eindex:
                eid, u, v = key
                e = graph.edge(eid)
                if (u, v) == (e.v, e.u):
                    c = -c
                elif (u, v) != (e.u, e.v):
                    raise ValueError(f"{u!r}->{v!r} is not an orientation of edge {eid!r}")
                x[graph.edge_index(eid)] += c
            else:
                x[graph.edge_index(key)] += c
        return cls(graph, x)

    def at(self, eid, u=None, v=None):
        e = self.graph.edge(eid)
        c = self.values[self.graph.edge_index(eid)]
        if u is None or (u, v) == (e.u, e.v):
            return c
        if (u, v) == (e.v, e.u):
            return -c
        raise ValueError(f"{u!r}->{v!r} is not an orientation of edge {eid!r}")

    def __add__(self, other):
        return Chain1(self.graph, self.values + other.values)

    def __sub__(self, other):
        return Chain1(self.graph, self.values - other.values)

    def __mul__(self, s):
        return Chain1(self.graph, s * self.values)

    __rmul__ = __mul__

    def __neg__(self):
        return Chain1(self.graph, -self.values)

    def dot(self, other: "Chain1"):
        return np.vdot(self.values, other.values)


def validate(graph) -> list[str]:
    """
    List violated structural conditions; an empty list means valid.

    Accepts a :class:`Graph` or a :class:`GraphWithTails` (tail edges count
    towards degrees). Loops cannot be constructed, so the checks are the
    no-ends condition and tail bookkeeping.
    """
    issues = []
    if isinstance(graph, GraphWithTails):
        core, deg = graph.core, graph.degrees()
        for j, t in enumerate(graph.tails):
            if t.free_from < 1:
                issues.append(f"tail {j}: free_from must be >= 1")
    else:
        core, deg = graph, graph.degrees()
    for v, m in zip(core.vertices, deg):
        if m <= 1:
            issues.append(f"vertex {v!r} has degree {m} (graph has an end)")
    return issues


def boundary(chain: Chain1) -> Chain0:
    """(dW)_P = sum of coefficients of edges ending at P minus those starting at P."""
    return Chain0(chain.graph, chain.graph.incidence() @ chain.values)


def coboundary(chain: Chain0) -> Chain1:
    """Adjoint of :func:`boundary` for the delta-orthonormal pairing."""
    return Chain1(chain.graph, chain.graph.incidence().T @ chain.values)


def is_cycle(chain: Chain1, tol: float = 1e-9, ignore: Iterable = ()) -> tuple[bool, float]:
    """
    Check dW = 0 relative to the largest coefficient.

    Vertices in ``ignore`` are skipped; use it for the truncation tips of a
    tail window, where a chain that is constant along the tail would
    continue. Returns ``(is_cycle, max |dW| at the remaining vertices)``.
    """
    d = np.abs(boundary(chain).values)
    skip = [chain.graph.index(v) for v in ignore]
    if skip:
        d[skip] = 0.0
    resid = float(d.max()) if d.size else 0.0
    scale = float(np.abs(chain.values).max()) if chain.values.size else 0.0
    return resid <= tol * scale or resid == 0.0, resid


def compute_basis(g: GraphWithTails | Graph) -> BasisDecomposition:
    """
    Prune trees off the core to obtain the basis graph and its nests.

    Tail sites n >= 1 are removed first, then degree <= 1 vertices of the
    remaining finite graph are deleted one at a time, lowest index first,
    until none remain or a single vertex is left.
    """
    if isinstance(g, Graph):
        g = GraphWithTails(g, ())
    core = g.core
    alive = set(core.vertices)
    adj = {v: [] for v in core.vertices}
    for e in core.edges:
        adj[e.u].append(e.v)
        adj[e.v].append(e.u)

    def deg(v):
        return sum(1 for w in adj[v] if w in alive)

    order = []
    while len(alive) > 1:
        leaves = [v for v in core.vertices if v in alive and deg(v) <= 1]
        if not leaves:
            break
        alive.discard(leaves[0])
        order.append(leaves[0])

    basis = core.subgraph(alive)
    lost = set()
    for v in order:
        for w in adj[v]:
            if w in alive:
                lost.add(w)
    for t in g.tails:
        if t.attach in alive:
            lost.add(t.attach)
    nests = tuple(v for v in core.vertices if v in lost)

    removed = core.subgraph(order)
    trees = []
    for comp in removed.components():
        cs = set(comp)
        roots = sorted({w for v in comp for w in adj[v] if w in alive}, key=core.index)
        tails = [j for j, t in enumerate(g.tails) if t.attach in cs]
        trees.append({"vertices": comp, "nests": roots, "tails": tails})
    for j, t in enumerate(g.tails):
        if t.attach in alive:
            trees.append({"vertices": [], "nests": [t.attach], "tails": [j]})

    nest_set = set(nests)
    enests = [e.id for e in core.edges
              if not (e.u in alive and e.v in alive) and (e.u in nest_set or e.v in nest_set)]
    enests += [tail_edge(j, 1) for j, t in enumerate(g.tails) if t.attach in nest_set]
    return BasisDecomposition(basis, nests, trees, tuple(enests), tuple(order))


class SimplicialComplex:
    """
    Simplicial complex stored as sorted vertex tuples per dimension.

    Faces of stored simplices are added automatically. The face of a
    k-simplex obtained by deleting its i-th vertex carries sign (-1)^i.
    """

    def __init__(self, simplices: Iterable[Sequence]):
        faces: dict[int, set] = {}
        for s in simplices:
            s = tuple(sorted(s))
            if len(set(s)) != len(s):
                raise ValueError(f"degenerate simplex {s}")
            for r in range(1, len(s) + 1):
                for f in combinations(s, r):
                    faces.setdefault(r - 1, set()).add(f)
        self.dim = max(faces) if faces else -1
        self.simplices = {k: sorted(faces[k]) for k in faces}
        self._index = {k: {s: i for i, s in enumerate(v)} for k, v in self.simplices.items()}

    def __repr__(self):
        counts = [len(self.simplices[k]) for k in range(self.dim + 1)]
        return f"SimplicialComplex(f_vector={counts})"

    def n(self, k: int) -> int:
        return len(self.simplices.get(k, ()))

    def index(self, s) -> int:
        s = tuple(sorted(s))
        return self._index[len(s) - 1][s]

    def faces(self, s) -> list[tuple[tuple, int]]:
        """(face, sign) pairs of the codimension-1 faces of ``s``."""
        s = tuple(sorted(s))
        return [(s[:i] + s[i + 1:], (-1) ** i) for i in range(len(s))]

    def cofaces(self, f) -> list[tuple]:
        f = set(f)
        return [s for s in self.simplices.get(len(f), ()) if f <= set(s)]

    def boundary_matrix(self, k: int) -> np.ndarray:
        """Matrix of the boundary map from k-chains to (k-1)-chains."""
        D = np.zeros((self.n(k - 1), self.n(k)))
        if k <= 0:
            return D
        for j, s in enumerate(self.simplices.get(k, ())):
            for f, sgn in self.faces(s):
                D[self._index[k - 1][f], j] += sgn
        return D

    def coboundary_matrix(self, k: int) -> np.ndarray:
        """Matrix of the coboundary from k-chains to (k+1)-chains."""
        return self.boundary_matrix(k + 1).T

    def laplacian(self, k: int) -> np.ndarray:
        up = self.boundary_matrix(k + 1)
        down = self.boundary_matrix(k)
        return up @ up.T + down.T @ down

    @classmethod
    def from_graph(cls, graph: Graph) -> "SimplicialComplex":
        idx = [tuple(sorted((graph.index(e.u), graph.index(e.v)))) for e in graph.edges]
        return cls([(i,) for i in range(graph.n_vertices)] + idx)


def path_graph(n: int) -> Graph:
    return Graph(range(n), [(i, i + 1) for i in range(n - 1)])


def cycle_graph(n: int) -> Graph:
    return Graph(range(n), [(i, (i + 1) % n) for i in range(n)])


def complete_graph(n: int) -> Graph:
    return Graph(range(n), list(combinations(range(n), 2)))
