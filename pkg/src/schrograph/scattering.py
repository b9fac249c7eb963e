"""
Scattering theory on graphs with tails.

A vertex operator ``L`` lives on the core of a :class:`GraphWithTails`;
each tail carries the free operator psi_{n-1} + psi_{n+1} from its
``free_from`` site on. On tail j a solution is alpha_j C_n + beta_j S_n,
so global solutions determine a subspace T_lam of the 2k-dimensional space
of asymptotic vectors ``(alpha_1, beta_1, ..., alpha_k, beta_k)`` with skew
form <C_j, S_p> = delta_jp.

Everything here reduces to one finite linear system per lambda: the
equations at the core and at tail sites n <= n0 = free_from, with
unknowns at tail sites n <= n0 + 1 tied to the asymptotic coordinates by
two matching rows per tail.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import GraphWithTails, compute_basis
from .operators import EdgeOperator, VertexOperator, extend_to_window, free_basis
from .wronskian import homology_class, wronskian_vertex

__all__ = [
    "SingularLambda",
    "AsymptoticSymplecticSpace",
    "TailSystem",
    "LagrangianPlane",
    "ScatteringMatrix",
    "NormalEigenvalue",
    "MaslovTally",
    "ExceptionalEigenvalue",
    "SingularValue",
    "SurvivalStats",
    "SpectrumReport",
    "scattering_data",
    "check_lagrangian",
    "to_plus_minus",
    "scattering_matrix",
    "s_of_a_form",
    "monodromy_matrix",
    "jost_determinant",
    "normal_spectrum",
    "maslov_crossings",
    "exceptional_spectrum",
    "exceptional_spectrum_edge",
    "singular_lambda_scan",
    "perturbation_experiment",
    "spectrum_report",
    "truncated_eigenvalues",
]

RANK_TOL = 1e-10
AMBIGUITY_BAND = (1e-10, 1e-7)


class SingularLambda(ValueError):
    """Raised where a map between half-bases of the asymptotic space does not exist."""


@dataclass(frozen=True)
class AsymptoticSymplecticSpace:
    k: int

    @property
    def labels(self) -> list[str]:
        return [f"{x}_{j + 1}" for j in range(self.k) for x in ("C", "S")]

    def form(self) -> np.ndarray:
        J = np.zeros((2 * self.k, 2 * self.k))
        for j in range(self.k):
            J[2 * j, 2 * j + 1] = 1.0
            J[2 * j + 1, 2 * j] = -1.0
        return J

    def skew(self, x, y):
        """Bilinear (not sesquilinear) skew product."""
        x, y = np.asarray(x), np.asarray(y)
        return x[0::2] @ y[1::2] - x[1::2] @ y[0::2]


class TailSystem:
    """
    Column/row layout of the truncated solution system for ``(L, g)``.

    Columns: core vertices, then for each tail its sites 1..n0+1, then
    per-tail asymptotic unknowns. Rows: equations at the core vertices, at
    tail sites 1..n0, then two matching rows per tail.
    """

    def __init__(self, L: VertexOperator, g: GraphWithTails):
        if not isinstance(L, VertexOperator):
            raise TypeError("scattering needs a VertexOperator on the core graph")
        if L.graph is not g.core and L.n_sites != g.core.n_vertices:
            raise ValueError("operator does not live on the core of g")
        if not L.is_second_order:
            raise ValueError("scattering needs a second-order operator")
        self.L, self.g = L, g
        self.m = g.core.n_vertices
        self.n0 = [t.free_from for t in g.tails]
        self.site_col = []
        c = self.m
        for n0 in self.n0:
            self.site_col.append(c)
            c += n0 + 1
        self.n_sites = c
        self.n_site_rows = self.m + sum(self.n0)

    def col(self, j: int, n: int) -> int:
        """Column of tail j site n (n = 0 is the attachment vertex)."""
        if n == 0:
            return self.g.core.index(self.g.tails[j].attach)
        return self.site_col[j] + n - 1

    def _site_block(self, lam) -> np.ndarray:
        dtype = complex if np.iscomplexobj(lam) and np.imag(lam) != 0 else float
        lam = lam if dtype is complex else float(np.real(lam))
        A = np.zeros((self.n_site_rows, self.n_sites), dtype=dtype)
        A[: self.m, : self.m] = self.L.matrix - lam * np.eye(self.m)
        r = self.m
        for j, t in enumerate(self.g.tails):
            A[self.col(j, 0), self.col(j, 1)] += t.coupling(1)
            for n in range(1, self.n0[j] + 1):
                A[r, self.col(j, n - 1)] = t.coupling(n)
                A[r, self.col(j, n)] = t.potential(n) - lam
                A[r, self.col(j, n + 1)] = t.coupling(n + 1)
                r += 1
        return A

    def matrix(self, lam, mode="asym", vanish=None) -> np.ndarray:
        """
        The homogeneous system at ``lam``.

        mode ``"asym"``: unknowns (alpha_j, beta_j) with psi_n = alpha C_n + beta S_n.
        mode ``"jost"``: one unknown kappa_j with psi_n = kappa a_-^n (square system).
        ``vanish=i`` (asym mode) forces tail i to vanish identically.
        """
        A = self._site_block(lam)
        k = self.g.k
        if mode == "asym":
            fb = free_basis(lam)
            n_asym = 2 * k
        elif mode == "jost":
            fb = free_basis(lam)
            n_asym = k
        else:
            raise ValueError(f"unknown mode {mode!r}")
        dtype = complex if (np.iscomplexobj(A) or (mode == "jost" and np.imag(fb.a_minus) != 0)
                            or (mode == "asym" and np.imag(fb.lam) != 0)) else float
        M = np.zeros((A.shape[0] + 2 * k, self.n_sites + n_asym), dtype=dtype)
        M[: A.shape[0], : self.n_sites] = A
        r = A.shape[0]
        for j in range(k):
            for n in (self.n0[j], self.n0[j] + 1):
                M[r, self.col(j, n)] = 1.0
                if mode == "asym":
                    M[r, self.n_sites + 2 * j] = -fb.C(n)
                    M[r, self.n_sites + 2 * j + 1] = -fb.S(n)
                else:
                    a = fb.a_minus if dtype is complex else fb.a_minus.real
                    M[r, self.n_sites + j] = -(a ** n)
                r += 1
        if vanish is not None:
            drop = [self.n_sites + 2 * vanish, self.n_sites + 2 * vanish + 1]
            M = np.delete(M, drop, axis=1)
        return M

    def extend(self, x, lam, depth: int, mode="asym", vanish=None) -> np.ndarray:
        """Extend a null vector of :meth:`matrix` to the vertices of ``g.window(depth)``."""
        x = np.asarray(x)
        if vanish is not None:
            x = np.insert(x, [self.n_sites + 2 * vanish] * 2, 0.0)
        fb = free_basis(lam)
        W, paths = self.g.window(depth)
        out = np.zeros(W.n_vertices, dtype=np.result_type(x, float))
        out[: self.m] = x[: self.m]
        for j, path in enumerate(paths):
            n0 = self.n0[j]
            for n in range(1, depth + 1):
                if n <= n0 + 1:
                    val = x[self.col(j, n)]
                elif mode == "asym":
                    a, b = x[self.n_sites + 2 * j], x[self.n_sites + 2 * j + 1]
                    val = a * fb.C(n) + b * fb.S(n)
                else:
                    val = x[self.n_sites + j] * fb.a_minus ** n
                if not np.iscomplexobj(out):
                    val = np.real(val)
                out[W.index(path[n])] = val
        return out


def _null_space(M, rel_tol=RANK_TOL, band=AMBIGUITY_BAND):
    """Null space by SVD; returns (basis, flagged, candidate dimensions)."""
    _, s, Vh = np.linalg.svd(M)
    n = M.shape[1]
    full = np.zeros(n)
    full[: len(s)] = s
    smax = full.max(initial=0.0) or 1.0
    rel = full / smax
    dim = int(np.sum(rel <= rel_tol))
    loose = int(np.sum(rel <= band[1]))
    flagged = loose != dim
    order = np.argsort(rel)
    null = Vh.conj().T[:, np.sort(order[:dim])] if dim else np.zeros((n, 0), dtype=Vh.dtype)
    return null, flagged, (dim, loose)


@dataclass
class LagrangianPlane:
    """
    A subspace of the asymptotic symplectic space.

    ``basis`` has 2k rows ordered (alpha_1, beta_1, ..., alpha_k, beta_k).
    ``solutions`` (when produced by :func:`scattering_data`) holds the
    corresponding null vectors of the truncated system, one per column.
    """

    basis: np.ndarray
    lam: complex
    solution_dim: int = 0
    flagged: bool = False
    candidate_dims: tuple = ()
    rank_tol: float = RANK_TOL
    max_skew: float = float("nan")
    solutions: np.ndarray | None = None
    system: TailSystem | None = field(default=None, repr=False)
    null_basis: np.ndarray | None = field(default=None, repr=False)

    @property
    def k(self) -> int:
        return self.basis.shape[0] // 2

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def solution_on_window(self, col: int, depth: int) -> np.ndarray:
        return self.system.extend(self.solutions[:, col], self.lam, depth)


def scattering_data(L: VertexOperator, g: GraphWithTails, lam, rel_tol=RANK_TOL) -> LagrangianPlane:
    """
    The space T_lam of asymptotic vectors of global solutions.

    ``solution_dim`` counts all solutions, including those vanishing on
    every tail; ``dim`` counts their asymptotic vectors.
    """
    sysm = TailSystem(L, g)
    M = sysm.matrix(lam, "asym")
    null, flagged, cand = _null_space(M, rel_tol)
    P = null[sysm.n_sites:, :]
    if P.shape[1]:
        U, s, Vh = np.linalg.svd(P, full_matrices=False)
        r = int(np.sum(s > rel_tol * max(s.max(initial=0.0), 1e-300))) if s.size else 0
        basis = U[:, :r]
        sols = null @ Vh.conj().T[:, :r] / s[:r]
    else:
        basis = np.zeros((2 * g.k, 0))
        sols = np.zeros((M.shape[1], 0))
    if not np.iscomplexobj(M):
        basis, sols = basis.real, sols.real
    plane = LagrangianPlane(basis, complex(lam), null.shape[1], flagged, cand, rel_tol,
                            solutions=sols, system=sysm, null_basis=null)
    plane.max_skew = check_lagrangian(plane)[0]
    return plane


def check_lagrangian(plane: LagrangianPlane) -> tuple[float, bool]:
    """
    Largest skew product between basis columns, and whether the plane has
    dimension k (half the ambient dimension).
    """
    X = plane.basis
    J = AsymptoticSymplecticSpace(plane.k).form()
    G = X.T @ J @ X
    return float(np.abs(G).max(initial=0.0)), X.shape[1] == plane.k


def to_plus_minus(basis, lam) -> tuple[np.ndarray, np.ndarray]:
    """
    Rewrite asymptotic columns alpha C + beta S as x psi+ + y psi-.

    Returns the plus block X and minus block Y (each k x d).
    """
    fb = free_basis(lam)
    ap, am = fb.a_plus, fb.a_minus
    if fb.degenerate:
        raise SingularLambda("psi+ and psi- coincide at lam = +-2")
    alpha, beta = basis[0::2, :], basis[1::2, :]
    X = (beta - am * alpha) / (ap - am)
    Y = (ap * alpha - beta) / (ap - am)
    return X, Y


@dataclass
class ScatteringMatrix:
    S: np.ndarray
    lam: float
    unitarity_residual: float
    symmetry_residual: float

    def check(self, tol=1e-8) -> bool:
        return self.unitarity_residual <= tol and self.symmetry_residual <= tol


def scattering_matrix(plane: LagrangianPlane, cond_max: float = 1e10) -> ScatteringMatrix:
    """
    S(lam) with basis e_l = psi+_l + sum_j S[j, l] psi-_j of T_lam.

    Needs real lam with |lam| < 2 and a k-dimensional plane. Raises
    :class:`SingularLambda` when the psi+ block is not invertible.
    """
    lam = complex(plane.lam)
    if lam.imag != 0 or not abs(lam.real) < 2:
        raise ValueError(f"scattering matrix needs real |lam| < 2, got {lam}")
    if plane.dim != plane.k:
        raise SingularLambda(f"plane has dimension {plane.dim}, expected {plane.k}")
    X, Y = to_plus_minus(plane.basis.astype(complex), lam.real)
    if np.linalg.cond(X) > cond_max:
        raise SingularLambda(f"psi+ block is singular at lam = {lam.real}")
    S = Y @ np.linalg.inv(X)
    k = S.shape[0]
    unit = float(np.abs(S.conj().T @ S - np.eye(k)).max())
    sym = float(np.abs(S - S.T).max())
    return ScatteringMatrix(S, lam.real, unit, sym)


def _simultaneous_diag(S):
    """Real orthogonal Q with Q^T S Q diagonal, for symmetric unitary S."""
    R, I = S.real, S.imag
    best = None
    for c in (0.5772156649, 1.4142135623, -0.3183098862, 2.7182818284):
        _, Q = np.linalg.eigh(R + c * I)
        D = Q.T @ S @ Q
        off = np.abs(D - np.diag(np.diag(D))).max()
        if best is None or off < best[0]:
            best = (off, Q, D)
        if off < 1e-12:
            break
    return best[1], np.diag(best[2])


def s_of_a_form(plane_or_S) -> tuple[np.ndarray, float]:
    """
    Unitary A with S = A A^T, so that conj(A) psi+ + A psi- is a real basis
    of T_lam. Returns A and ||A A^T - S||_max.
    """
    if isinstance(plane_or_S, LagrangianPlane):
        S = scattering_matrix(plane_or_S).S
    else:
        S = np.asarray(plane_or_S, dtype=complex)
    Q, d = _simultaneous_diag(S)
    A = Q @ np.diag(np.exp(0.5j * np.angle(d)))
    return A, float(np.abs(A @ A.T - S).max())


def monodromy_matrix(plane: LagrangianPlane, cond_max: float = 1e10) -> np.ndarray:
    """
    For k = 2: the map (alpha_1, beta_1) -> (alpha_2, beta_2) whose graph is
    T_lam. Raises :class:`SingularLambda` where T_lam contains a solution
    vanishing on the first tail.
    """
    if plane.k != 2 or plane.dim != 2:
        raise ValueError("monodromy needs k = 2 and a 2-dimensional plane")
    X, Y = plane.basis[0:2], plane.basis[2:4]
    if np.linalg.cond(X) > cond_max:
        raise SingularLambda(f"no monodromy from tail 1 to tail 2 at lam = {plane.lam}")
    return Y @ np.linalg.inv(X)


def jost_determinant(L: VertexOperator, g: GraphWithTails, lam, system: TailSystem | None = None):
    """
    (sign, log|det|) of the square system whose null vectors are solutions
    decaying like a_-^n on every tail. For real |lam| > 2 it is real and its
    zeros are the normal eigenvalues; it vanishes exactly where T_lam meets
    span{psi-}.
    """
    sysm = system or TailSystem(L, g)
    return np.linalg.slogdet(sysm.matrix(lam, "jost"))


def _bisect(f, a, b, fa, xtol):
    """Sign-change bisection; f returns a sign."""
    while b - a > xtol:
        c = 0.5 * (a + b)
        fc = f(c)
        if fc == 0:
            return c
        if fc == fa:
            a, fa = c, fc
        else:
            b = c
    return 0.5 * (a + b)


def _scan_roots(f, window, grid, xtol):
    a, b = window
    xs = np.linspace(a, b, int(grid))
    signs = [f(x) for x in xs]
    roots, pattern = [], []
    for i in range(len(xs) - 1):
        s0, s1 = signs[i], signs[i + 1]
        if s0 == 0:
            roots.append(float(xs[i]))
            pattern.append((float(xs[i]), float(xs[i]), 0, 0))
        elif s1 != 0 and s0 != s1:
            roots.append(float(_bisect(f, xs[i], xs[i + 1], s0, xtol)))
            pattern.append((float(xs[i]), float(xs[i + 1]), int(s0), int(s1)))
    if signs and signs[-1] == 0:
        roots.append(float(xs[-1]))
        pattern.append((float(xs[-1]), float(xs[-1]), 0, 0))
    return roots, pattern


@dataclass
class NormalEigenvalue:
    lam: float
    residual: float
    decay_ratio: float
    a_minus: float
    multiplicity: int
    eigenfunction: np.ndarray = field(repr=False)
    verified: bool = True


def _check_window(window):
    a, b = sorted(float(x) for x in window)
    if not (a >= 2 or b <= -2):
        raise ValueError(f"window {window} must lie inside |lam| > 2")
    if a == 2 or b == -2:
        a, b = (a + 1e-9, b) if a == 2 else (a, b - 1e-9)
    return a, b


def normal_spectrum(L: VertexOperator, g: GraphWithTails, window, grid: int = 400,
                    xtol: float = 1e-10, depth: int = 40, tol: float = 1e-9) -> list[NormalEigenvalue]:
    """
    Eigenvalues in a real window inside |lam| > 2.

    Scans the sign of :func:`jost_determinant`, refines sign changes by
    bisection, then rebuilds each eigenfunction on a tail window of
    ``depth`` sites and checks its equation residual and its decay ratio
    against |a_-|.
    """
    a, b = _check_window(window)
    sysm = TailSystem(L, g)

    def sign(x):
        return float(np.real(np.linalg.slogdet(sysm.matrix(x, "jost"))[0]))

    roots, _ = _scan_roots(sign, (a, b), grid, xtol)
    Lw = extend_to_window(L, g, depth)
    W, paths = g.window(depth)
    tips = [W.index(p[-1]) for p in paths]
    out = []
    for lam in roots:
        M = sysm.matrix(lam, "jost")
        _, s, Vh = np.linalg.svd(M)
        mult = max(1, int(np.sum(s <= 1e-7 * s.max())))
        x = Vh[-1].conj()
        psi = sysm.extend(x, lam, depth, mode="jost")
        psi = psi / np.abs(psi).max()
        r = np.abs(Lw.matrix @ psi - lam * psi)
        r[tips] = 0.0
        am = free_basis(lam).a_minus.real
        ratios = []
        for p in paths:
            u, v = abs(psi[W.index(p[-3])]), abs(psi[W.index(p[-2])])
            if u > 1e-300:
                ratios.append(v / u)
        ratio = max(ratios) if ratios else 0.0
        res = float(r.max())
        ok = res <= tol and (not ratios or abs(ratio - abs(am)) <= 1e-6 or max(
            abs(psi[W.index(p[-1])]) for p in paths) <= 1e-12)
        out.append(NormalEigenvalue(lam, res, ratio, am, mult, psi, ok))
    return out


@dataclass
class MaslovTally:
    window: tuple
    count: int
    pattern: list

    @property
    def signed(self) -> int:
        return sum(1 if s0 < s1 else -1 for _, _, s0, s1 in self.pattern if s0 != s1)


def maslov_crossings(L: VertexOperator, g: GraphWithTails, window, grid: int = 400,
                     xtol: float = 1e-10) -> MaslovTally:
    """
    Crossings of the curve lam -> T_lam with the cycle of Lagrangian planes
    meeting span{psi-}, detected as sign changes of the Jost determinant.
    ``pattern`` lists (left, right, sign_left, sign_right) per crossing.
    """
    a, b = _check_window(window)
    sysm = TailSystem(L, g)

    def sign(x):
        return float(np.real(np.linalg.slogdet(sysm.matrix(x, "jost"))[0]))

    roots, pattern = _scan_roots(sign, (a, b), grid, xtol)
    return MaslovTally((a, b), len(roots), pattern)


@dataclass
class ExceptionalEigenvalue:
    lam: float
    eigenfunction: dict
    nest_residual: float
    residual: float
    drowned: bool
    window_vector: np.ndarray = field(repr=False, default=None)


def _constrained_eigen(M, U, K, tol):
    """
    Eigenpairs of M restricted to index set U whose eigenvectors also
    annihilate the rows K (restricted to U). Degenerate clusters are handled
    by taking the null space of the constraint on the whole eigenspace.
    """
    if not len(U):
        return []
    MUU = M[np.ix_(U, U)]
    MKU = M[np.ix_(K, U)] if len(K) else np.zeros((0, len(U)))
    scale = max(np.abs(M).max(), 1.0)
    w, V = np.linalg.eigh(MUU)
    out = []
    i = 0
    while i < len(w):
        j = i + 1
        while j < len(w) and w[j] - w[i] <= 1e-9 * scale:
            j += 1
        E = V[:, i:j]
        lam = float(w[i:j].mean())
        C = MKU @ E
        if C.shape[0] == 0:
            out.append((lam, E, 0.0))
        else:
            _, s, Vh = np.linalg.svd(C)
            s_full = np.zeros(E.shape[1])
            s_full[: len(s)] = s
            keep = s_full <= tol * scale
            if keep.any():
                Z = Vh.conj().T[:, keep]
                phi = E @ Z
                out.append((lam, phi, float(np.abs(MKU @ phi).max())))
        i = j
    return out


def exceptional_spectrum(L: VertexOperator, g: GraphWithTails, tol: float = 1e-8) -> list[ExceptionalEigenvalue]:
    """
    Eigenvalues whose eigenfunctions vanish identically on every tail.

    Solves the Dirichlet problem on the basis graph with the nests removed
    and keeps eigenvectors whose nest rows vanish. Each survivor is
    extended by zero and checked on a tail window.
    """
    dec = compute_basis(g)
    if dec.trivial:
        return []
    core = g.core
    basis_idx = [core.index(v) for v in dec.basis.vertices]
    nest_idx = [core.index(q) for q in dec.nests]
    U = [i for i in basis_idx if i not in nest_idx]
    Lw = extend_to_window(L, g, 2)
    scale = max(np.abs(L.matrix).max(), 1.0)
    out = []
    for lam, Phi, nres in _constrained_eigen(L.matrix, U, nest_idx, tol):
        for c in range(Phi.shape[1]):
            phi = Phi[:, c]
            x = np.zeros(Lw.n_sites)
            x[U] = phi
            res = float(np.abs(Lw.matrix @ x - lam * x).max())
            if res > tol * scale:
                continue
            ef = {core.vertices[i]: float(phi[a]) for a, i in enumerate(U)}
            out.append(ExceptionalEigenvalue(lam, ef, nres, res, abs(lam) <= 2, x))
    return out


def exceptional_spectrum_edge(Le: EdgeOperator, g: GraphWithTails, tol: float = 1e-8) -> list[ExceptionalEigenvalue]:
    """
    Edge-operator version: ``Le`` lives on the edges of ``g.window(1)``
    (the core edges and the first edge of every tail). Eigenfunctions live
    on the edges of the basis graph and vanish on the edge-nests.
    """
    dec = compute_basis(g)
    W, _ = g.window(1)
    if Le.graph.n_edges != W.n_edges:
        raise ValueError("edge operator must live on g.window(1)")
    G = Le.graph
    U = [G.edge_index(e.id) for e in dec.basis.edges]
    K = [G.edge_index(r) for r in dec.edge_nests]
    out = []
    scale = max(np.abs(Le.matrix).max(), 1.0)
    for lam, Phi, nres in _constrained_eigen(Le.matrix, U, K, tol):
        for c in range(Phi.shape[1]):
            x = np.zeros(G.n_edges)
            x[U] = Phi[:, c]
            res = float(np.abs(Le.matrix @ x - lam * x).max())
            if res > tol * scale:
                continue
            ef = {G.edges[i].id: float(Phi[a, c]) for a, i in enumerate(U)}
            out.append(ExceptionalEigenvalue(lam, ef, nres, res, abs(lam) <= 2, x))
    return out


@dataclass
class SingularValue:
    lam: float
    phi1: np.ndarray = field(repr=False)
    phi2: np.ndarray = field(repr=False)
    tail_alphas: np.ndarray = None
    alpha_sum: float = 0.0
    finite_class: np.ndarray = None
    cycle_edges: list = None
    wronskian: object = field(default=None, repr=False)
    residual: float = 0.0


def _vanish_sign(sysm, vanish):
    def f(x):
        return float(np.real(np.linalg.slogdet(sysm.matrix(x, "asym", vanish=vanish))[0]))
    return f


def singular_lambda_scan(L: VertexOperator, g: GraphWithTails, window=(-2.0, 2.0), grid: int = 400,
                         xtol: float = 1e-13, depth: int = 6, normalize_at=None,
                         off_axis: float | None = None) -> list[SingularValue]:
    """
    Values of lambda where T_lam contains a solution vanishing on one tail
    (k = 2), i.e. where the tail-to-tail monodromy does not exist.

    Real roots come from sign changes of the determinant of the square
    system forcing tail 1 to vanish. For each, the two witnesses phi_1
    (zero on tail 1) and phi_2 (zero on tail 2) are built on a window of
    ``depth`` sites, optionally normalised to 1 at ``normalize_at``, and
    their Wronskian is split into tail coefficients and a finite class.
    With ``off_axis`` set, complex roots are also searched by Newton
    iteration from seeds at that imaginary offset.
    """
    if g.k != 2:
        raise ValueError("singular values are defined here for k = 2 tails")
    sysm = TailSystem(L, g)
    roots, _ = _scan_roots(_vanish_sign(sysm, 0), window, grid, xtol)
    lams = [complex(r) for r in roots]
    if off_axis:
        lams += [z for z in _complex_roots(sysm, window, off_axis) if abs(z.imag) > 1e-8]
    W, paths = g.window(depth)
    Lw = extend_to_window(L, g, depth)
    tips = [W.index(p[-1]) for p in paths]
    out = []
    for lam in lams:
        lam_eval = lam.real if lam.imag == 0 else lam
        wit = []
        for i in (0, 1):
            M = sysm.matrix(lam_eval, "asym", vanish=i)
            _, _, Vh = np.linalg.svd(M)
            x = Vh[-1].conj()
            phi = sysm.extend(x, lam_eval, depth, vanish=i)
            if normalize_at is not None:
                phi = phi / phi[W.index(normalize_at)]
            else:
                phi = phi / phi[np.argmax(np.abs(phi))]
            wit.append(phi)
        Wr = wronskian_vertex(Lw, wit[0], wit[1])
        rows = [r for r in range(W.n_vertices) if r not in tips]
        res = max(float(np.abs((Lw.matrix @ p - lam_eval * p)[rows]).max()) for p in wit)
        try:
            hc = homology_class(Wr, g)
            alphas, asum, coords, edges = hc.alphas, hc.alpha_sum, hc.cycle_coords, hc.cycle_edges
        except ValueError:
            alphas = asum = coords = edges = None
        out.append(SingularValue(lam_eval, wit[0], wit[1], alphas, asum, coords, edges, Wr, res))
    return out


def _complex_roots(sysm, window, off_axis, n_seeds=24, iters=60):
    """Newton iteration on det of the tail-1-vanishing system from complex seeds."""
    def det(z):
        return np.linalg.det(sysm.matrix(z, "asym", vanish=0))

    found = []
    a, b = window
    for x0 in np.linspace(a, b, n_seeds):
        for sgn in (1, -1):
            z = complex(x0, sgn * off_axis)
            for _ in range(iters):
                f = det(z)
                h = 1e-7 * max(1.0, abs(z))
                df = (det(z + h) - det(z - h)) / (2 * h)
                if df == 0:
                    break
                step = f / df
                z -= step
                if abs(step) < 1e-14:
                    break
            if a - 1e-9 <= z.real <= b + 1e-9 and abs(det(z)) < 1e-9 and \
                    not any(abs(z - w) < 1e-7 for w in found):
                found.append(z)
    return found


@dataclass
class SurvivalStats:
    trials: int
    survivals: int
    magnitude: float
    mode: str
    eigenvalues: list = field(default_factory=list)

    @property
    def fraction(self) -> float:
        return self.survivals / self.trials if self.trials else float("nan")


def perturbation_experiment(L: VertexOperator, g: GraphWithTails, magnitude: float, trials: int = 100,
                            seed: int = 0, symmetry=None, tol: float = 1e-8) -> SurvivalStats:
    """
    Perturb the nonzero core coefficients of ``L`` at random and count the
    trials in which exceptional eigenvalues survive.

    ``symmetry`` is an optional vertex permutation (dict id -> id); the
    perturbation is then averaged over the group it generates, so the
    perturbed operator keeps that symmetry.
    """
    rng = np.random.default_rng(seed)
    M0 = L.matrix
    mask = (M0 != 0) | np.eye(M0.shape[0], dtype=bool)
    perms = [np.arange(M0.shape[0])]
    if symmetry is not None:
        core = g.core
        p = np.array([core.index(symmetry.get(v, v)) for v in core.vertices])
        q = p.copy()
        while not np.array_equal(q, perms[0]):
            perms.append(q)
            q = p[q]
    survivals, eigs = 0, []
    for _ in range(trials):
        X = rng.uniform(-1.0, 1.0, size=M0.shape)
        X = np.triu(X) + np.triu(X, 1).T
        X = np.where(mask, X, 0.0)
        if len(perms) > 1:
            X = sum(X[np.ix_(pp, pp)] for pp in perms) / len(perms)
        Lp = L.with_matrix(M0 + magnitude * X)
        ex = exceptional_spectrum(Lp, g, tol)
        eigs.append([e.lam for e in ex])
        survivals += bool(ex)
    return SurvivalStats(trials, survivals, magnitude, "symmetric" if symmetry else "generic", eigs)


@dataclass
class SpectrumReport:
    normal: list
    exceptional: list
    singular: list
    maslov: dict


def spectrum_report(L: VertexOperator, g: GraphWithTails, bound: float | None = None,
                    grid: int = 400, singular_grid: int = 400) -> SpectrumReport:
    """Normal, exceptional and singular spectrum plus Maslov tallies on I- and I+."""
    if bound is None:
        bound = float(np.abs(L.matrix).sum(axis=1).max(initial=0.0)) + 2.5
    windows = {"I-": (-bound, -2.0), "I+": (2.0, bound)}
    normal, maslov = [], {}
    for name, w in windows.items():
        if w[1] - w[0] <= 0:
            continue
        normal += normal_spectrum(L, g, w, grid)
        maslov[name] = maslov_crossings(L, g, w, grid)
    singular = singular_lambda_scan(L, g, (-2.0, 2.0), singular_grid) if g.k == 2 else []
    normal.sort(key=lambda e: e.lam)
    return SpectrumReport(normal, exceptional_spectrum(L, g), singular, maslov)


def truncated_eigenvalues(L: VertexOperator, g: GraphWithTails, depth: int) -> tuple[np.ndarray, np.ndarray]:
    """Dense eigenpairs of the operator cut off after ``depth`` tail sites (Dirichlet)."""
    return np.linalg.eigh(extend_to_window(L, g, depth).matrix)
