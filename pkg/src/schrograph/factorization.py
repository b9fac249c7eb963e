"""
Factorizations L + C = Q Q^+ (vertices) and L + C = Q^+ Q + U (edges).

The coupling map is stored as a table c[(edge id, vertex)] = c_{R:P}, with
(Q^+ psi)_R = sum_P c_{R:P} psi_P and (Q phi)_P = sum_R c_{R:P} phi_R.
Complex entries mean a formal factorization; products are never
conjugated.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .graph import Graph
from .operators import EdgeOperator, VertexOperator

__all__ = [
    "FactorizationError",
    "DegenerateVertex",
    "IncompatibleFactorization",
    "CompatibilityReport",
    "FactorizationResult",
    "factorize_edge",
    "factorize_vertex_tree",
    "find_positive_C",
    "PositiveSearch",
    "reconstruct",
    "coupling_matrix",
]

COMPAT_TOL = 1e-8


class FactorizationError(ValueError):
    pass


class DegenerateVertex(FactorizationError):
    pass


@dataclass
class CompatibilityReport:
    """Cross-product constraints d_{RR'} d_{R''R'''} = d_{RR''} d_{R'R'''} at vertices with m_P > 3."""

    tol: float = COMPAT_TOL
    vertices: dict = field(default_factory=dict)

    @property
    def max_residual(self) -> float:
        return max((r for rows in self.vertices.values() for _, r in rows), default=0.0)

    @property
    def ok(self) -> bool:
        return self.max_residual <= self.tol

    def failing(self) -> list:
        return [v for v, rows in self.vertices.items() if any(r > self.tol for _, r in rows)]


class IncompatibleFactorization(FactorizationError):
    def __init__(self, report: CompatibilityReport):
        self.report = report
        super().__init__(
            f"compatibility fails at {report.failing()} (max relative residual {report.max_residual:.3e})"
        )


@dataclass
class FactorizationResult:
    kind: str
    graph: Graph
    c: dict
    C: float
    U: dict | None = None
    special: bool = False
    compatibility: CompatibilityReport | None = None
    interior: tuple = ()
    root: object = None
    unresolved: dict = field(default_factory=dict)

    @property
    def real(self) -> bool:
        return all(np.isreal(x) for x in self.c.values())

    @property
    def squares(self) -> dict:
        return {key: complex(x) ** 2 for key, x in self.c.items()}

    @property
    def positive(self) -> bool:
        """All c^2 real and strictly positive (a real factorization)."""
        return all(abs(s.imag) <= 1e-14 * max(1.0, abs(s)) and s.real > 0 for s in self.squares.values())

    def as_dict(self) -> dict:
        def enc(z):
            z = complex(z)
            return z.real if z.imag == 0 else {"re": z.real, "im": z.imag}

        out = {
            "kind": self.kind,
            "C": self.C,
            "c": [{"edge": str(r), "vertex": str(p), "value": enc(x)} for (r, p), x in self.c.items()],
            "real": self.real,
            "positive": self.positive,
            "special": self.special,
        }
        if self.U is not None:
            out["U"] = {str(r): float(u) for r, u in self.U.items()}
        if self.compatibility is not None:
            out["compatibility"] = {
                str(v): [{"edges": [str(x) for x in q], "residual": r} for q, r in rows]
                for v, rows in self.compatibility.vertices.items()
            }
        if self.unresolved:
            out["unresolved_rows"] = {str(v): enc(r) for v, r in self.unresolved.items()}
        return out


def _sqrt(x):
    x = complex(x)
    if x.imag == 0 and x.real >= 0:
        return float(np.sqrt(x.real))
    return complex(np.sqrt(x))


def _clean(z):
    z = complex(z)
    return z.real if z.imag == 0 else z


def _vertex_couplings(L: EdgeOperator, P, edges: list) -> dict:
    """d_{R:R'} at P: the operator coupling, split evenly when R, R' share two vertices."""
    G = L.graph
    d = {}
    for r, s in combinations(edges, 2):
        shared = len(L.shared_vertices(r, s))
        d[(r, s)] = d[(s, r)] = L.matrix[G.edge_index(r), G.edge_index(s)] / shared
    return d


def _solve_vertex(P, edges, d, tol):
    m = len(edges)
    if m == 1:
        return {edges[0]: 0.0}, []
    if m == 2:
        r, s = edges
        c = _sqrt(d[(r, s)])
        if c == 0:
            return {r: 0.0, s: 0.0}, []
        return {r: c, s: _clean(d[(r, s)] / c)}, []
    for (r, s) in d:
        if d[(r, s)] == 0:
            raise DegenerateVertex(f"zero coupling d between edges {r!r} and {s!r} at vertex {P!r}")
    r0, r1, r2 = edges[:3]
    c0 = _sqrt(d[(r0, r1)] * d[(r0, r2)] / d[(r1, r2)])
    if m == 3:
        return {r0: c0, r1: _clean(d[(r0, r1)] / c0), r2: _clean(d[(r0, r2)] / c0)}, []
    # m > 3: magnitudes by least squares in log|c|, phases from the first edge
    pairs = list(combinations(range(m), 2))
    A = np.zeros((len(pairs), m))
    y = np.zeros(len(pairs))
    for row, (i, j) in enumerate(pairs):
        A[row, i] = A[row, j] = 1.0
        y[row] = np.log(abs(d[(edges[i], edges[j])]))
    logc = np.linalg.lstsq(A, y, rcond=None)[0]
    mag = np.exp(logc)
    phase0 = c0 / abs(c0)
    c = {r0: _clean(mag[0] * phase0)}
    for i in range(1, m):
        q = d[(r0, edges[i])] / c[r0]
        c[edges[i]] = _clean(mag[i] * q / abs(q))
    compat = []
    for a, b, e, f in combinations(edges, 4):
        prods = [((a, b, e, f), d[(a, b)] * d[(e, f)]),
                 ((a, e, b, f), d[(a, e)] * d[(b, f)]),
                 ((a, f, b, e), d[(a, f)] * d[(b, e)])]
        for (q1, x1), (_, x2) in combinations(prods, 2):
            compat.append((q1, abs(x1 - x2) / max(abs(x1), abs(x2))))
    return c, compat


def factorize_edge(L: EdgeOperator, C: float = 0.0, special: bool = False, tol: float = 1e-10,
                   compat_tol: float = COMPAT_TOL) -> FactorizationResult:
    """
    Local factorization of an edge operator, one vertex at a time.

    At a vertex with m_P = 2 the single product equation is solved with
    c = c' = sqrt(d); with m_P = 3 by the closed form
    c_R^2 = d_{RR'} d_{RR''} / d_{R'R''}; with m_P > 3 by least squares in
    log-magnitudes, after which the cross-product constraints must hold
    to ``compat_tol`` (relative) or :class:`IncompatibleFactorization` is
    raised. A vertex met by a single edge imposes nothing and gets c = 0.

    Parameters
    ----------
    L : EdgeOperator
        Second-order edge operator.
    C : float
        Additive constant.
    special : bool
        Require the remainder potential U to be constant (to ``tol``).
    """
    if not L.is_second_order:
        raise FactorizationError("edge factorization needs a second-order operator")
    G = L.graph
    c = {}
    report = CompatibilityReport(compat_tol)
    for P in G.vertices:
        edges = G.incident_edges(P)
        if not edges:
            continue
        d = _vertex_couplings(L, P, edges)
        cs, compat = _solve_vertex(P, edges, d, tol)
        if len(edges) > 3:
            report.vertices[P] = compat
        for r, x in cs.items():
            c[(r, P)] = x
    if not report.ok:
        raise IncompatibleFactorization(report)
    U = {}
    for k, e in enumerate(G.edges):
        u = L.matrix[k, k] + C - complex(c[(e.id, e.u)]) ** 2 - complex(c[(e.id, e.v)]) ** 2
        U[e.id] = _clean(u)
    vals = np.array([complex(u) for u in U.values()])
    is_special = bool(vals.size == 0 or np.abs(vals - vals[0]).max() <= tol * max(1.0, np.abs(vals).max()))
    if special and not is_special:
        raise FactorizationError(
            f"remainder potential is not constant (spread {np.ptp(vals.real):.3e}); no special factorization"
        )
    return FactorizationResult("edge", G, c, float(C), U, is_special, report)


def _tree_order(G: Graph, vertices: list, root):
    """Parent edges (toward ``root``) and a leaves-first order for a tree on ``vertices``."""
    vs = set(vertices)
    inner = [e for e in G.edges if e.u in vs and e.v in vs]
    if len(inner) != len(vs) - 1:
        raise FactorizationError("subgraph is not a tree (edge count differs from |V| - 1)")
    adj = {v: [] for v in vs}
    for e in inner:
        adj[e.u].append((e.v, e.id))
        adj[e.v].append((e.u, e.id))
    parent = {root: None}
    order = [root]
    q = deque([root])
    while q:
        x = q.popleft()
        for y, eid in sorted(adj[x], key=lambda t: G.index(t[0])):
            if y not in parent:
                parent[y] = (x, eid)
                order.append(y)
                q.append(y)
    if len(order) != len(vs):
        raise FactorizationError("subgraph is not connected")
    return parent, order[::-1], adj, inner


def factorize_vertex_tree(L: VertexOperator, subtree, root, boundary: dict | None = None,
                          C: float = 0.0) -> FactorizationResult:
    """
    Special formal factorization of a vertex operator on a tree, swept from
    the leaves toward ``root``.

    Parameters
    ----------
    L : VertexOperator
        Second-order operator with nonzero couplings on the tree.
    subtree : iterable
        Vertex ids of the tree (a subgraph of ``L.graph``).
    root : hashable
        The initial vertex P0.
    boundary : dict, optional
        Values c_{R:P} keyed by (edge id, P). At a leaf P other than the
        root it fixes the coefficient of the tree edge at P; for edges
        leaving the tree it gives the outside coefficient at P. A leaf
        without data is resolved by its own potential equation.
    C : float
        Additive constant.

    Returns
    -------
    FactorizationResult
        ``interior`` lists the vertices whose rows are reproduced exactly;
        ``unresolved`` records the potential-equation defect at the root
        and at leaves whose coefficient was given.
    """
    G = L.graph
    vertices = list(subtree.vertices) if isinstance(subtree, Graph) else list(subtree)
    if root not in vertices:
        raise FactorizationError(f"root {root!r} is not in the subtree")
    boundary = dict(boundary or {})
    parent, order, adj, inner = _tree_order(G, vertices, root)
    vs = set(vertices)
    for e in inner:
        if L.matrix[G.index(e.u), G.index(e.v)] == 0:
            raise DegenerateVertex(f"zero coupling on tree edge {e.id!r}")
    c = {}
    given = set()
    for (eid, P), x in boundary.items():
        c[(eid, P)] = _clean(x)
        given.add((eid, P))
    for P in vs:
        for eid in G.incident_edges(P):
            e = G.edge(eid)
            if (e.u in vs and e.v in vs):
                continue
            if (e.id, P) not in c:
                raise FactorizationError(f"missing boundary coefficient for edge {e.id!r} at {P!r}")
    unresolved = {}
    for P in order:
        if P == root:
            continue
        par, eid = parent[P]
        if (eid, P) in given:
            c_in = c[(eid, P)]
        else:
            rest = sum(complex(c[(r, P)]) ** 2 for r in G.incident_edges(P) if r != eid)
            c_in = _sqrt(L.matrix[G.index(P), G.index(P)] + C - rest)
            c[(eid, P)] = c_in
        if c_in == 0:
            raise DegenerateVertex(f"c vanishes on edge {eid!r} at {P!r}; product equation unsolvable")
        c[(eid, par)] = _clean(L.matrix[G.index(P), G.index(par)] / complex(c_in))
    interior = []
    for P in vertices:
        row = L.matrix[G.index(P), G.index(P)] + C - sum(
            complex(c[(r, P)]) ** 2 for r in G.incident_edges(P))
        leaf_given = P != root and (parent[P][1], P) in given
        if P == root or leaf_given:
            unresolved[P] = _clean(row)
        else:
            interior.append(P)
    res = FactorizationResult("vertex", G, c, float(C), None, True, None, tuple(interior), root, unresolved)
    return res


class _NotPositive:
    positive = False


_NOT_POSITIVE = _NotPositive()


@dataclass
class PositiveSearch:
    found: bool
    C: float | None
    result: FactorizationResult | None
    evaluations: int
    history: list = field(default_factory=list)


def find_positive_C(L: VertexOperator, subtree, root, cap_factor: float = 2.0 ** 40,
                    bisect_steps: int = 60) -> PositiveSearch:
    """
    Search for a constant C giving an all-positive special factorization on
    a tree, with boundary data c^2 = C at the leaves.

    C is doubled from max|V| + 1 until the sweep is positive, then bisected
    down between the last failure and the first success. The returned C is
    a certificate (the factorization at C is positive), not a proven minimum.
    """
    G = L.graph
    vertices = list(subtree.vertices) if isinstance(subtree, Graph) else list(subtree)
    parent, _, adj, _ = _tree_order(G, vertices, root)
    leaves = [P for P in vertices if P != root and len(adj[P]) == 1]
    V = np.array([L.matrix[G.index(P), G.index(P)] for P in vertices])
    C0 = float(np.abs(V).max(initial=0.0)) + 1.0
    history = []

    def attempt(Cv):
        bd = {(parent[P][1], P): np.sqrt(Cv) for P in leaves}
        try:
            r = factorize_vertex_tree(L, vertices, root, bd, Cv)
        except DegenerateVertex:
            history.append((Cv, False))
            return _NOT_POSITIVE
        history.append((Cv, r.positive))
        return r

    C = C0
    r = attempt(C)
    while not r.positive:
        C *= 2.0
        if C > cap_factor * C0:
            return PositiveSearch(False, None, None, len(history), history)
        r = attempt(C)
    lo = C / 2.0 if C > C0 else None
    if lo is not None:
        best = (C, r)
        hi = C
        for _ in range(bisect_steps):
            mid = 0.5 * (lo + hi)
            rm = attempt(mid)
            if rm.positive:
                hi, best = mid, (mid, rm)
            else:
                lo = mid
            if hi - lo <= 1e-12 * hi:
                break
        C, r = best
    return PositiveSearch(True, C, r, len(history), history)


def coupling_matrix(result: FactorizationResult) -> np.ndarray:
    """K[R, P] = c_{R:P} (edges x vertices), so Q^+ = K and Q = K^T."""
    G = result.graph
    K = np.zeros((G.n_edges, G.n_vertices), dtype=complex)
    for (r, P), x in result.c.items():
        K[G.edge_index(r), G.index(P)] = x
    return K


def reconstruct(result: FactorizationResult, L=None) -> tuple[np.ndarray, float]:
    """
    Compose the factorized operator and compare it with L + C.

    Edge results give Q^+ Q + U; vertex results give Q Q^+ restricted to
    the tree's vertices. If ``L`` is given the max entrywise deviation from
    L + C is returned (for tree results: over interior rows and tree
    columns), otherwise NaN.
    """
    G = result.graph
    K = coupling_matrix(result)
    if result.kind == "edge":
        M = K @ K.T + np.diag([complex(result.U[e.id]) for e in G.edges])
        if L is None:
            return M, float("nan")
        return M, float(np.abs(M - (L.matrix + result.C * np.eye(G.n_edges))).max(initial=0.0))
    vs = [P for P in G.vertices if any(key[1] == P for key in result.c)]
    idx = [G.index(P) for P in vs]
    tree_edges = [k for k, e in enumerate(G.edges) if (e.id, e.u) in result.c and (e.id, e.v) in result.c]
    Kt = K[tree_edges][:, idx]
    M = Kt.T @ Kt
    # diagonal carries every edge at P, including those leaving the tree
    M[np.diag_indices(len(idx))] = (K[:, idx] ** 2).sum(axis=0)
    if L is None:
        return M, float("nan")
    rows = [vs.index(P) for P in result.interior]
    target = L.matrix[np.ix_(idx, idx)] + result.C * np.eye(len(idx))
    dev = np.abs(M - target)[rows]
    return M, float(dev.max(initial=0.0))
