"""
Second-order (and higher) Schrodinger operators on vertices and edges.

An operator is a real symmetric matrix indexed by the vertices (or edges)
of a :class:`~schrograph.graph.Graph`. The diagonal holds the potential,
off-diagonal entries the couplings ``b[P, P']`` or ``d[R, R']``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.sparse.csgraph import shortest_path

from .graph import Chain0, Chain1, Graph, GraphWithTails

__all__ = [
    "VertexOperator",
    "EdgeOperator",
    "FreeSolutionBasis",
    "DeltaNormReport",
    "OrderInfo",
    "laplace_beltrami_vertex",
    "laplace_beltrami_edge",
    "apply",
    "free_basis",
    "classify_order",
    "delta_norm_bound",
    "extend_to_window",
]


class _SiteOperator:
    kind = "site"

    def __init__(self, graph: Graph, matrix):
        M = np.array(matrix, dtype=float)
        n = self._n_sites(graph)
        if M.shape != (n, n):
            raise ValueError(f"operator matrix must be {n}x{n}, got {M.shape}")
        if not np.array_equal(M, M.T):
            raise ValueError("operator coefficients must be symmetric")
        M.setflags(write=False)
        self.graph = graph
        self.matrix = M

    @staticmethod
    def _n_sites(graph):
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}(n_sites={self.n_sites})"

    @property
    def n_sites(self) -> int:
        return self.matrix.shape[0]

    @property
    def potential(self) -> np.ndarray:
        return np.diag(self.matrix).copy()

    @property
    def offdiag(self) -> np.ndarray:
        B = self.matrix.copy()
        np.fill_diagonal(B, 0.0)
        return B

    def shifted(self, c: float):
        """L + c * Id."""
        return type(self)(self.graph, self.matrix + c * np.eye(self.n_sites))

    def with_matrix(self, M):
        return type(self)(self.graph, M)

    def __call__(self, psi):
        return apply(self, psi)


class VertexOperator(_SiteOperator):
    """(L psi)_P = sum_P' b[P, P'] psi_P' with b symmetric and b[P, P] = V_P."""

    kind = "vertex"

    @staticmethod
    def _n_sites(graph):
        return graph.n_vertices

    @classmethod
    def from_coefficients(cls, graph: Graph, potential=None, couplings=None, default_coupling=1.0):
        """
        Build from a potential and per-edge couplings.

        ``couplings`` maps an edge id, or an unordered vertex pair, to b.
        Edges missing from it get ``default_coupling``; couplings of
        parallel edges add up. Pairs that are not edges give a
        higher-order operator.
        """
        n = graph.n_vertices
        M = np.zeros((n, n))
        couplings = dict(couplings or {})
        pairs = {}
        for key in list(couplings):
            if not graph._eindex.__contains__(key):
                u, v = key
                pairs[frozenset((u, v))] = couplings.pop(key)
        for e in graph.edges:
            if frozenset((e.u, e.v)) in pairs:
                continue
            b = couplings.pop(e.id, default_coupling)
            i, j = graph.index(e.u), graph.index(e.v)
            M[i, j] += b
            M[j, i] += b
        for key, b in pairs.items():
            u, v = tuple(key) if len(key) == 2 else (next(iter(key)),) * 2
            if u == v:
                raise ValueError(f"coupling of {u!r} with itself; use the potential")
            i, j = graph.index(u), graph.index(v)
            M[i, j] += b
            M[j, i] += b
        if potential is not None:
            if isinstance(potential, dict):
                for v, x in potential.items():
                    M[graph.index(v), graph.index(v)] = x
            else:
                M[np.diag_indices(n)] = np.asarray(potential, dtype=float)
        return cls(graph, M)

    def coupling(self, u, v) -> float:
        return float(self.matrix[self.graph.index(u), self.graph.index(v)])

    @cached_property
    def is_second_order(self) -> bool:
        return not np.any((self.offdiag != 0) & (self.graph.adjacency() == 0))

    def edge_weights(self) -> np.ndarray:
        """b[P, P'] shared evenly among the parallel edges joining P and P'."""
        A = self.graph.adjacency()
        ends = self.graph.endpoints()
        if ends.size == 0:
            return np.zeros(0)
        i, j = ends[:, 0], ends[:, 1]
        return self.matrix[i, j] / A[i, j]


class EdgeOperator(_SiteOperator):
    """(L psi)_R = sum_R' d[R, R'] psi_R' with d symmetric and d[R, R] = V_R."""

    kind = "edge"

    @staticmethod
    def _n_sites(graph):
        return graph.n_edges

    @classmethod
    def from_coefficients(cls, graph: Graph, potential=None, couplings=None, default_coupling=1.0):
        """
        ``couplings`` maps unordered pairs of edge ids to d; every other pair
        of edges sharing a vertex gets ``default_coupling``.
        """
        S = graph.line_graph_adjacency()
        M = np.where(S > 0, default_coupling, 0.0)
        for (r, s), d in (couplings or {}).items():
            i, j = graph.edge_index(r), graph.edge_index(s)
            M[i, j] = M[j, i] = d
        if potential is not None:
            if isinstance(potential, dict):
                for r, x in potential.items():
                    M[graph.edge_index(r), graph.edge_index(r)] = x
            else:
                M[np.diag_indices(graph.n_edges)] = np.asarray(potential, dtype=float)
        return cls(graph, M)

    def coupling(self, r, s) -> float:
        return float(self.matrix[self.graph.edge_index(r), self.graph.edge_index(s)])

    @cached_property
    def is_second_order(self) -> bool:
        return not np.any((self.offdiag != 0) & (self.graph.line_graph_adjacency() == 0))

    def shared_vertices(self, r, s) -> list:
        a, b = self.graph.edge(r), self.graph.edge(s)
        return [x for x in (a.u, a.v) if x in (b.u, b.v)]


def laplace_beltrami_vertex(g, shift: float = 0.0) -> VertexOperator:
    """
    Vertex Laplace-Beltrami: b = 1 on adjacent pairs, V_P = -m_P.

    With parallel edges the couplings add up. For a graph with tails the
    degrees count tail edges and the operator is returned on the core;
    ``shift=2`` makes it agree with the free operator on the tails.
    """
    if isinstance(g, GraphWithTails):
        graph, deg = g.core, g.degrees()
    else:
        graph, deg = g, g.degrees()
    M = graph.adjacency() - np.diag(deg.astype(float)) + shift * np.eye(graph.n_vertices)
    return VertexOperator(graph, M)


def laplace_beltrami_edge(graph: Graph, shift: float = 0.0) -> EdgeOperator:
    """Edge Laplace-Beltrami: d = 1 per shared vertex, V_R = -2."""
    M = graph.line_graph_adjacency() + (shift - 2.0) * np.eye(graph.n_edges)
    return EdgeOperator(graph, M)


def apply(op, psi):
    """Apply ``op`` to an array or a chain, returning the same kind."""
    if isinstance(psi, (Chain0, Chain1)):
        if psi.graph is not op.graph and psi.values.shape[0] != op.n_sites:
            raise ValueError("chain lives on a different graph")
        out = op.matrix @ psi.values
        return type(psi)(psi.graph, out)
    x = np.asarray(psi)
    if x.shape[0] != op.n_sites:
        raise ValueError(f"function has {x.shape[0]} values, operator acts on {op.n_sites} sites")
    return op.matrix @ x


@dataclass(frozen=True)
class FreeSolutionBasis:
    """
    Solutions of psi_{n-1} + psi_{n+1} = lam psi_n on a half line.

    ``a_plus`` is the root with |a_plus| >= 1; on the real interval
    [-2, 2] it is the one with non-negative imaginary part.
    """

    lam: complex
    a_plus: complex
    a_minus: complex
    degenerate: bool

    @property
    def real(self) -> bool:
        return np.isreal(self.lam) and abs(self.lam.real) > 2

    def _recur(self, n_max: int, x0, x1):
        n_max = max(int(n_max), 1)
        dtype = float if np.isreal(self.lam) else complex
        lam = self.lam.real if dtype is float else self.lam
        out = np.empty(n_max + 1, dtype=dtype)
        out[0], out[1] = x0, x1
        for n in range(1, n_max):
            out[n + 1] = lam * out[n] - out[n - 1]
        return out

    def C(self, n):
        n = np.asarray(n)
        return self._recur(n.max(initial=1), 1.0, 0.0)[n]

    def S(self, n):
        n = np.asarray(n)
        return self._recur(n.max(initial=1), 0.0, 1.0)[n]

    def psi_plus(self, n):
        return self._power(self.a_plus, n)

    def psi_minus(self, n):
        return self._power(self.a_minus, n)

    def _power(self, a, n):
        a = a.real if np.isreal(a) and np.isreal(self.lam) else a
        return np.power(a, np.asarray(n))

    def skew_plus_minus(self) -> complex:
        """Skew product of psi+ and psi- in the (C, S) coordinates: a_- - a_+."""
        return self.a_minus - self.a_plus


def free_basis(lam) -> FreeSolutionBasis:
    lam = complex(lam)
    s = np.sqrt(lam * lam - 4.0 + 0j)
    ap, am = (lam + s) / 2.0, (lam - s) / 2.0
    if abs(ap) < abs(am):
        ap, am = am, ap
    if abs(abs(ap) - abs(am)) <= 1e-14 * max(1.0, abs(ap)) and ap.imag < am.imag:
        ap, am = am, ap
    if lam.imag == 0.0 and abs(lam.real) > 2.0:
        ap, am = complex(ap.real, 0.0), complex(am.real, 0.0)
    degenerate = lam in (2.0, -2.0)
    return FreeSolutionBasis(lam, ap, am, degenerate)


@dataclass(frozen=True)
class OrderInfo:
    order: float
    finite_type: bool
    finite_order: bool
    max_interactions: int


def _site_distances(op) -> np.ndarray:
    if op.kind == "vertex":
        adj = op.graph.adjacency() > 0
    else:
        adj = op.graph.line_graph_adjacency() > 0
    return shortest_path(adj.astype(float), unweighted=True, directed=False)


def classify_order(op) -> OrderInfo:
    """
    Interaction radius as the longest shortest-path length, counted in
    edges, between two interacting sites. ``finite_order`` reports whether
    every site interacts with the same number of sites.
    """
    B = op.offdiag != 0
    counts = B.sum(axis=1)
    if not B.any():
        return OrderInfo(0, True, bool(np.all(counts == counts[0])) if counts.size else True, 0)
    dist = _site_distances(op)
    order = float(dist[B].max())
    if np.isfinite(order):
        order = int(order)
    return OrderInfo(order, True, bool(np.all(counts == counts[0])), int(counts.max()))


@dataclass(frozen=True)
class DeltaNormReport:
    M_L: float
    attained_at: object
    discrete_spectrum_guaranteed: bool


def delta_norm_bound(op, g: GraphWithTails | None = None) -> DeltaNormReport:
    """
    M_L = max over delta functions of ||L delta||^2.

    When ``g`` is given (vertex operators on a graph with tails) the tail
    couplings enter the attachment rows and tail sites are included.
    """
    M = op.matrix
    norms = (M ** 2).sum(axis=0)
    labels = list(op.graph.vertices if op.kind == "vertex" else [e.id for e in op.graph.edges])
    if g is not None:
        if op.kind != "vertex":
            raise ValueError("tails are supported for vertex operators only")
        norms = norms.copy()
        for j, t in enumerate(g.tails):
            norms[g.core.index(t.attach)] += t.coupling(1) ** 2
            # sites up to free_from are the only non-generic ones; beyond, ||L delta||^2 = 2
            for n in range(1, t.free_from + 1):
                v = t.coupling(n) ** 2 + t.potential(n) ** 2 + t.coupling(n + 1) ** 2
                norms = np.append(norms, v)
                labels.append(("tail", j, n))
    k = int(np.argmax(norms))
    M_L = float(norms[k])
    return DeltaNormReport(M_L, labels[k], M_L >= 4.0)


def extend_to_window(L: VertexOperator, g: GraphWithTails, depth: int) -> VertexOperator:
    """The operator on ``g.window(depth)`` with the tail coefficients filled in."""
    W, paths = g.window(depth)
    n = W.n_vertices
    M = np.zeros((n, n))
    m = g.core.n_vertices
    M[:m, :m] = L.matrix
    for j, t in enumerate(g.tails):
        path = paths[j]
        for s in range(1, depth + 1):
            a, b = W.index(path[s - 1]), W.index(path[s])
            M[a, b] = M[b, a] = t.coupling(s)
            M[b, b] = t.potential(s)
    return VertexOperator(W, M)
