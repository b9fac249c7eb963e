"""
Wronskian 1-chains of pairs of solutions and their homology classes.

Sign convention: for a vertex operator the coefficient on the edge
traversed from P to P' is ``b[P, P'] * (phi_P psi_P' - psi_P phi_P')``.
The same ordering is used for the edge, higher-order and simplicial
variants, so all four agree where they overlap. The overall sign of a
Wronskian is a convention.
"""

from __future__ import annotations

import warnings
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .graph import Chain1, Graph, GraphWithTails, SimplicialComplex, boundary, tail_edge
from .operators import EdgeOperator, VertexOperator

__all__ = [
    "NotASolutionWarning",
    "PathSelector",
    "KWronskianTable",
    "HomologyClass",
    "solution_residual",
    "wronskian_vertex",
    "wronskian_edge",
    "edge_wronskian_pairs",
    "wronskian_higher",
    "quantum_current",
    "simplicial_operator_class_check",
    "simplicial_wronskian",
    "fundamental_cycles",
    "homology_class",
]


class NotASolutionWarning(UserWarning):
    pass


def solution_residual(op, psi, lam, ignore_rows=()) -> float:
    """max |(L - lam) psi| relative to max |psi|."""
    r = np.abs(op.matrix @ psi - lam * psi)
    if len(ignore_rows):
        r[list(ignore_rows)] = 0.0
    scale = max(np.abs(psi).max(initial=0.0), 1e-300)
    return float(r.max(initial=0.0) / scale)


def _check_solutions(op, lam, tol, ignore_rows, *fns):
    if lam is None:
        return
    for f in fns:
        res = solution_residual(op, f, lam, ignore_rows)
        if res > tol:
            warnings.warn(
                f"input is not a solution: relative residual {res:.3e}; "
                "the Wronskian will not be a cycle",
                NotASolutionWarning,
                stacklevel=3,
            )


def wronskian_vertex(L: VertexOperator, phi, psi, lam=None, tol=1e-8, ignore_rows=()) -> Chain1:
    """
    Wronskian of two solutions of a second-order vertex operator.

    If ``lam`` is given the equation residual is checked and a
    :class:`NotASolutionWarning` is issued when it exceeds ``tol``.
    ``ignore_rows`` excludes truncation rows (tail tips) from that check.
    """
    if not L.is_second_order:
        raise ValueError("operator is not second order; use wronskian_higher")
    phi, psi = np.asarray(phi), np.asarray(psi)
    _check_solutions(L, lam, tol, ignore_rows, phi, psi)
    ends = L.graph.endpoints()
    if ends.size == 0:
        return Chain1(L.graph, np.zeros(0))
    i, j = ends[:, 0], ends[:, 1]
    w = L.edge_weights() * (phi[i] * psi[j] - psi[i] * phi[j])
    return Chain1(L.graph, w)


def edge_wronskian_pairs(L: EdgeOperator, phi, psi) -> dict:
    """
    The table W[(R, P)] = sum over R' meeting R at P of
    d[R, R'] (phi_R psi_R' - psi_R phi_R').

    A coupling between parallel edges is shared evenly between their two
    common vertices.
    """
    g = L.graph
    phi, psi = np.asarray(phi), np.asarray(psi)
    table = {}
    for e in g.edges:
        table[(e.id, e.u)] = 0.0
        table[(e.id, e.v)] = 0.0
    D = L.offdiag
    for a, b in zip(*np.nonzero(D)):
        ra, rb = g.edges[a], g.edges[b]
        shared = [x for x in (ra.u, ra.v) if x in (rb.u, rb.v)]
        if not shared:
            raise ValueError(f"edges {ra.id!r} and {rb.id!r} interact but share no vertex")
        term = D[a, b] * (phi[a] * psi[b] - psi[a] * phi[b]) / len(shared)
        for P in shared:
            table[(ra.id, P)] = table[(ra.id, P)] + term
    return table


def wronskian_edge(L: EdgeOperator, phi, psi, lam=None, tol=1e-8, ignore_rows=()) -> Chain1:
    """
    Edge-operator Wronskian as a 1-chain.

    The coefficient of edge R = (u -> v) is W[(R, v)], the value of R
    oriented towards v. Well-definedness needs W[(R, u)] = -W[(R, v)]; the
    largest violation, relative to the largest coefficient, is stored in
    the chain's ``endpoint_defect`` attribute and a warning is issued when
    it exceeds ``tol``.
    """
    if not L.is_second_order:
        raise ValueError("edge operator is not second order")
    phi, psi = np.asarray(phi), np.asarray(psi)
    _check_solutions(L, lam, tol, ignore_rows, phi, psi)
    table = edge_wronskian_pairs(L, phi, psi)
    g = L.graph
    head = np.array([table[(e.id, e.v)] for e in g.edges])
    tail = np.array([table[(e.id, e.u)] for e in g.edges])
    defect = np.abs(head + tail)
    if len(ignore_rows):
        defect[list(ignore_rows)] = 0.0
    # floor at the natural scale so a Wronskian that vanishes identically is not flagged
    natural = np.abs(phi).max(initial=0.0) * np.abs(psi).max(initial=0.0) * np.abs(L.offdiag).max(initial=0.0)
    scale = max(np.abs(head).max(initial=0.0), float(natural), 1e-300)
    rel = float(defect.max(initial=0.0) / scale)
    if rel > tol and scale > 1e-300:
        warnings.warn(
            f"W(R,P) + W(R,P') does not vanish (relative {rel:.3e}); inputs are not solutions",
            NotASolutionWarning,
            stacklevel=2,
        )
    chain = Chain1(g, head)
    chain.endpoint_defect = rel
    return chain


class PathSelector:
    """
    Deterministic simple paths between vertices.

    Breadth-first search visiting neighbours in index order, so the path is
    a shortest one with ties broken towards lower vertex indices. Paths are
    memoised per source vertex.
    """

    rule = "bfs-lowest-index"

    def __init__(self, graph: Graph):
        self.graph = graph
        n = graph.n_vertices
        self._nbrs = [[] for _ in range(n)]
        for k, (i, j) in enumerate(graph.endpoints()):
            self._nbrs[i].append((j, k, +1))
            self._nbrs[j].append((i, k, -1))
        for lst in self._nbrs:
            lst.sort()
        self._parents: dict[int, list] = {}

    def _bfs(self, s: int):
        if s not in self._parents:
            parent = [None] * self.graph.n_vertices
            parent[s] = (s, -1, 0)
            queue = deque([s])
            while queue:
                x = queue.popleft()
                for y, k, sgn in self._nbrs[x]:
                    if parent[y] is None:
                        parent[y] = (x, k, sgn)
                        queue.append(y)
            self._parents[s] = parent
        return self._parents[s]

    def path(self, i: int, j: int) -> list[tuple[int, int]]:
        """Edges (index, sign) of the path from vertex index i to j."""
        parent = self._bfs(i)
        if parent[j] is None:
            raise ValueError(
                f"vertices {self.graph.vertices[i]!r} and {self.graph.vertices[j]!r} are not connected"
            )
        out = []
        x = j
        while x != i:
            p, k, sgn = parent[x]
            out.append((k, sgn))
            x = p
        return out[::-1]

    def path_chain(self, i: int, j: int) -> np.ndarray:
        c = np.zeros(self.graph.n_edges)
        for k, sgn in self.path(i, j):
            c[k] += sgn
        return c


def wronskian_higher(L: VertexOperator, phi, psi, selector: PathSelector | None = None,
                     lam=None, tol=1e-8) -> Chain1:
    """
    Wronskian of a vertex operator of any finite order.

    Each interacting pair P < P' contributes b[P, P'] (phi_P psi_P' -
    psi_P phi_P') spread along the selected path from P to P'.
    """
    phi, psi = np.asarray(phi), np.asarray(psi)
    _check_solutions(L, lam, tol, (), phi, psi)
    if selector is None:
        selector = PathSelector(L.graph)
    B = L.offdiag
    dtype = np.result_type(phi, psi, float)
    W = np.zeros(L.graph.n_edges, dtype=dtype)
    for i, j in zip(*np.nonzero(np.triu(B, 1))):
        c = B[i, j] * (phi[i] * psi[j] - psi[i] * phi[j])
        W += c * selector.path_chain(i, j)
    return Chain1(L.graph, W)


def quantum_current(L, psi, lam=None, tol=1e-8, ignore_rows=()) -> Chain1:
    """W(psi, conj(psi)); purely imaginary, and a cycle for real lam."""
    psi = np.asarray(psi, dtype=complex)
    if isinstance(L, EdgeOperator):
        return wronskian_edge(L, psi, psi.conj(), lam, tol, ignore_rows)
    if L.is_second_order:
        return wronskian_vertex(L, psi, psi.conj(), lam, tol, ignore_rows)
    return wronskian_higher(L, psi, psi.conj(), lam=lam, tol=tol)


@dataclass
class KWronskianTable:
    """Values W[(S_k, S_{k-1})] for a k-simplex and one of its faces."""

    complex: SimplicialComplex
    k: int
    values: dict = field(default_factory=dict)

    def simplex_sums(self) -> dict:
        """Sum over the faces of every k-simplex."""
        out = {}
        for (s, f), w in self.values.items():
            out[s] = out.get(s, 0.0) + w
        return out

    def face_sums(self) -> dict:
        """Sum over the k-simplices sharing every (k-1)-face."""
        out = {}
        for (s, f), w in self.values.items():
            out[f] = out.get(f, 0.0) + w
        return out

    def max_residuals(self) -> tuple[float, float]:
        s = max((abs(v) for v in self.simplex_sums().values()), default=0.0)
        f = max((abs(v) for v in self.face_sums().values()), default=0.0)
        return s, f

    def scale(self) -> float:
        return max((abs(v) for v in self.values.values()), default=0.0)


def simplicial_operator_class_check(K: SimplicialComplex, k: int, matrix) -> None:
    """Raise unless k-simplices interact only through a common (k-1)-face."""
    M = np.asarray(matrix)
    simp = K.simplices.get(k, [])
    if M.shape != (len(simp), len(simp)):
        raise ValueError(f"operator must be {len(simp)}x{len(simp)} on {k}-chains")
    if not np.array_equal(M, M.T):
        raise ValueError("operator coefficients must be symmetric")
    for a, b in zip(*np.nonzero(M)):
        if a != b and len(set(simp[a]) & set(simp[b])) != k:
            raise ValueError(f"simplices {simp[a]} and {simp[b]} interact without a common face")


def simplicial_wronskian(K: SimplicialComplex, k: int, matrix, phi, psi, lam=None, tol=1e-8) -> KWronskianTable:
    """
    Wronskian table of two solutions of an operator on k-chains whose
    k-simplices interact only through common (k-1)-faces.

    W[(S, F)] = sum over S' != S containing F of b[S, S'] (phi_S psi_S' - psi_S phi_S').
    """
    M = np.asarray(matrix, dtype=float)
    simplicial_operator_class_check(K, k, M)
    phi, psi = np.asarray(phi), np.asarray(psi)
    if lam is not None:
        for f in (phi, psi):
            res = float(np.abs(M @ f - lam * f).max() / max(np.abs(f).max(), 1e-300))
            if res > tol:
                warnings.warn(f"input is not a solution: relative residual {res:.3e}",
                              NotASolutionWarning, stacklevel=2)
    simp = K.simplices[k]
    table = KWronskianTable(K, k)
    for a, s in enumerate(simp):
        for f, _ in K.faces(s):
            w = 0.0
            for s2 in K.cofaces(f):
                if s2 == s:
                    continue
                b = K.index(s2)
                w = w + M[a, b] * (phi[a] * psi[b] - psi[a] * phi[b])
            table.values[(s, f)] = w
    return table


def fundamental_cycles(graph: Graph) -> tuple[list, np.ndarray]:
    """
    Fundamental cycles of a breadth-first spanning forest.

    Returns the non-tree edge indices and a matrix whose columns are the
    cycles, each oriented along its non-tree edge.
    """
    sel = PathSelector(graph)
    tree = set()
    n = graph.n_vertices
    root = [None] * n
    for r in range(n):
        if root[r] is not None:
            continue
        for x, p in enumerate(sel._bfs(r)):
            if p is not None:
                root[x] = r
                if p[1] >= 0:
                    tree.add(p[1])
    non_tree = [k for k in range(graph.n_edges) if k not in tree]
    Z = np.zeros((graph.n_edges, len(non_tree)))
    ends = graph.endpoints()
    for c, k in enumerate(non_tree):
        i, j = ends[k]
        # close edge i -> j through the spanning tree: j -> root -> i
        Z[k, c] += 1.0
        Z[:, c] += sel.path_chain(root[i], i) - sel.path_chain(root[j], j)
    return non_tree, Z


@dataclass
class HomologyClass:
    alphas: np.ndarray
    alpha_sum: complex
    finite_chain: Chain1
    cycle_edges: list
    cycles: np.ndarray
    cycle_coords: np.ndarray
    residual: float

    def as_dict(self) -> dict:
        def enc(x):
            x = np.asarray(x)
            if np.iscomplexobj(x):
                return {"re": x.real.tolist(), "im": x.imag.tolist()}
            return x.tolist()

        g = self.finite_chain.graph
        return {
            "tail_alphas": enc(self.alphas),
            "alpha_sum": enc(self.alpha_sum),
            "finite_class": {
                "cycle_edges": [str(g.edges[k].id) for k in self.cycle_edges],
                "coords": enc(self.cycle_coords),
            },
            "residual": self.residual,
        }


def homology_class(W: Chain1, g: GraphWithTails, tol: float = 1e-8) -> HomologyClass:
    """
    Split a cycle on a tail window into tail coefficients and a finite class.

    ``W`` must live on ``g.window(depth)`` for some depth >= 1. The tail
    coefficient alpha_j is the (constant) coefficient of tail j's edges
    oriented outward. The core part minus sum_p alpha_p (path from the
    first tail's attachment to tail p's) is a cycle of the core, returned in
    fundamental-cycle coordinates.
    """
    G = W.graph
    k = g.k
    alphas = np.zeros(k, dtype=W.values.dtype)
    scale = max(float(np.abs(W.values).max(initial=0.0)), 1e-300)
    for j in range(k):
        vals = []
        n = 1
        while G._eindex.get(tail_edge(j, n)) is not None:
            vals.append(W.values[G.edge_index(tail_edge(j, n))])
            n += 1
        if not vals:
            raise ValueError("chain does not live on a tail window")
        vals = np.asarray(vals)
        if np.abs(vals - vals[-1]).max() > tol * scale + 1e-12:
            raise ValueError(f"chain is not eventually constant along tail {j}")
        alphas[j] = vals[-1]
    core = g.core
    fin = np.array([W.values[G.edge_index(e.id)] for e in core.edges], dtype=W.values.dtype)
    X = np.zeros(core.n_edges, dtype=W.values.dtype)
    if k:
        sel = PathSelector(core)
        a0 = core.index(g.tails[0].attach)
        for p in range(1, k):
            X = X + alphas[p] * sel.path_chain(a0, core.index(g.tails[p].attach))
    R = fin - X
    non_tree, Z = fundamental_cycles(core)
    coords = R[non_tree] if non_tree else np.zeros(0, dtype=R.dtype)
    resid = float(np.abs(R - Z @ coords).max(initial=0.0)) + float(abs(alphas.sum()))
    return HomologyClass(alphas, alphas.sum(), Chain1(core, fin), non_tree, Z, coords, resid)
