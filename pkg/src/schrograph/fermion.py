"""
Real fermionic quadratic forms

    L = sum_{p<q} A_pq a_p a_q + sum_{p,q} B_pq a*_p a_q + sum_{p<q} C_pq a*_p a*_q + const,

with ``a_p`` creation and ``a*_p`` annihilation operators, A antisymmetric,
B symmetric and C = -A (self-adjointness). In the basis a+ = a* + a,
a- = a* - a the form is -(1/2) sum D_pq a+_p a-_q + const' with D = A + B,
so its spectrum is a constant plus the subset sums of the singular
values of D.

The exact oracle is the 2^n-dimensional Fock representation on the
ordered basis a_{j1} ... a_{jk} eta, j1 < ... < jk.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from itertools import combinations

import numpy as np
import scipy.sparse as sp

__all__ = [
    "FermionicQuadraticForm",
    "FockSpace",
    "BogolyubovTransform",
    "DMatrixCheck",
    "BogolyubovCheck",
    "build_fock",
    "d_matrix",
    "singular_values",
    "predicted_spectrum",
    "bogolyubov_apply",
    "diagonalize",
    "diagonalize_symmetric",
    "random_form",
    "random_transform",
    "MAX_MODES",
]

MAX_MODES = 12


@dataclass(frozen=True)
class FermionicQuadraticForm:
    A: np.ndarray
    B: np.ndarray
    const: float = 0.0

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.atleast_2d(np.asarray(self.B, dtype=float))
        if A.shape != B.shape or A.shape[0] != A.shape[1]:
            raise ValueError(f"A and B must be square of equal size, got {A.shape} and {B.shape}")
        if np.any(A + A.T != 0):
            raise ValueError("A must be antisymmetric")
        if np.any(B - B.T != 0):
            raise ValueError("B must be symmetric")
        A.setflags(write=False)
        B.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "const", float(self.const))

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def C(self) -> np.ndarray:
        return -self.A

    @classmethod
    def from_D(cls, D, const: float = 0.0) -> "FermionicQuadraticForm":
        """Split D into antisymmetric and symmetric parts."""
        D = np.asarray(D, dtype=float)
        A = 0.5 * (D - D.T)
        B = 0.5 * (D + D.T)
        return cls(A, B, const)


class FockSpace:
    """
    Creation and annihilation operators on 2^n states indexed by bitmask;
    bit j set means a_j occurs in the ordered product.
    """

    def __init__(self, n: int):
        if n > MAX_MODES:
            raise ValueError(f"{n} modes exceeds the limit of {MAX_MODES} (dimension {2 ** MAX_MODES})")
        self.n = n
        self.dim = 2 ** n

    @cached_property
    def create(self) -> list:
        states = np.arange(self.dim)
        ops = []
        for p in range(self.n):
            free = (states >> p) & 1 == 0
            src = states[free]
            below = np.array([bin(s & ((1 << p) - 1)).count("1") for s in src])
            sign = np.where(below % 2 == 0, 1.0, -1.0)
            ops.append(sp.csr_matrix((sign, (src | (1 << p), src)), shape=(self.dim, self.dim)))
        return ops

    @cached_property
    def annihilate(self) -> list:
        return [a.T.tocsr() for a in self.create]

    def car_residual(self) -> float:
        """Max deviation from the canonical anticommutation relations."""
        a, b = self.create, self.annihilate
        eye = sp.identity(self.dim, format="csr")
        worst = 0.0
        for p in range(self.n):
            for q in range(self.n):
                r1 = a[p] @ a[q] + a[q] @ a[p]
                r2 = b[p] @ a[q] + a[q] @ b[p] - (eye if p == q else 0 * eye)
                for r in (r1, r2):
                    if r.nnz:
                        worst = max(worst, float(np.abs(r.data).max()))
        return worst

    def quadratic(self, form: FermionicQuadraticForm) -> sp.csr_matrix:
        a, b = self.create, self.annihilate
        L = form.const * sp.identity(self.dim, format="csr")
        for p, q in combinations(range(self.n), 2):
            if form.A[p, q] != 0:
                L = L + form.A[p, q] * (a[p] @ a[q]) + form.C[p, q] * (b[p] @ b[q])
        for p in range(self.n):
            for q in range(self.n):
                if form.B[p, q] != 0:
                    L = L + form.B[p, q] * (b[p] @ a[q])
        return L.tocsr()


def build_fock(form: FermionicQuadraticForm, space: FockSpace | None = None) -> np.ndarray:
    """Dense 2^n x 2^n matrix of the form in the ordered exterior-algebra basis."""
    space = space or FockSpace(form.n)
    return space.quadratic(form).toarray()


@dataclass
class DMatrixCheck:
    D: np.ndarray
    scale: float
    constant: float
    residual: float


def d_matrix(form: FermionicQuadraticForm, space: FockSpace | None = None) -> DMatrixCheck:
    """
    D = A + B, checked against the Fock representation.

    The composition sum_pq D_pq a+_p a-_q is fitted to the Fock matrix of
    the form without its constant as ``scale * composition + constant * Id``;
    ``residual`` is the max entrywise misfit.
    """
    D = form.A + form.B
    space = space or FockSpace(form.n)
    a, b = space.create, space.annihilate
    comp = sp.csr_matrix((space.dim, space.dim))
    for p in range(form.n):
        for q in range(form.n):
            if D[p, q] != 0:
                comp = comp + D[p, q] * ((b[p] + a[p]) @ (b[q] - a[q]))
    X = comp.toarray()
    L0 = build_fock(FermionicQuadraticForm(form.A, form.B, 0.0), space)
    if not np.any(X):
        const = float(np.trace(L0)) / space.dim
        return DMatrixCheck(D, 0.0, const, float(np.abs(L0 - const * np.eye(space.dim)).max()))
    design = np.stack([X.ravel(), np.eye(space.dim).ravel()], axis=1)
    (s, c), *_ = np.linalg.lstsq(design, L0.ravel(), rcond=None)
    resid = float(np.abs(L0 - s * X - c * np.eye(space.dim)).max())
    return DMatrixCheck(D, float(s), float(c), resid)


def singular_values(D) -> np.ndarray:
    """Singular values of D, descending."""
    return np.linalg.svd(np.asarray(D, dtype=float), compute_uv=False)


def _subset_sums(mu) -> np.ndarray:
    sums = np.zeros(1)
    for m in mu:
        sums = np.concatenate([sums, sums + m])
    return sums


def predicted_spectrum(form: FermionicQuadraticForm) -> tuple[np.ndarray, np.ndarray, float]:
    """
    Spectrum predicted from mu = singular values of D = A + B.

    Returns ``(spectrum, mu, shift)``: the sorted subset sums of mu plus
    the shift fixed by matching the trace of the Fock matrix. The trace
    is known in closed form: tr L = 2^n const + 2^(n-1) tr B.
    """
    n = form.n
    mu = singular_values(form.A + form.B)
    sums = _subset_sums(mu)
    trace = 2.0 ** n * form.const + 2.0 ** (n - 1) * float(np.trace(form.B))
    shift = (trace - float(sums.sum())) / 2.0 ** n
    return np.sort(sums + shift), mu, shift


@dataclass
class BogolyubovTransform:
    """a_p = sum_q P_pq b_q + sum_q Q_pq b*_q with O+ = P + Q and O- = P - Q orthogonal."""

    P: np.ndarray
    Q: np.ndarray

    @property
    def O_plus(self) -> np.ndarray:
        return self.P + self.Q

    @property
    def O_minus(self) -> np.ndarray:
        return self.P - self.Q

    @classmethod
    def from_orthogonals(cls, O_plus, O_minus) -> "BogolyubovTransform":
        O_plus, O_minus = np.asarray(O_plus, float), np.asarray(O_minus, float)
        return cls(0.5 * (O_plus + O_minus), 0.5 * (O_plus - O_minus))

    def orthogonality_residual(self) -> float:
        n = self.P.shape[0]
        return max(float(np.abs(O.T @ O - np.eye(n)).max(initial=0.0)) for O in (self.O_plus, self.O_minus))

    def b_operators(self, space: FockSpace) -> tuple[list, list]:
        """New creation b_q and annihilation b*_q built from the a's."""
        a, ad = space.create, space.annihilate
        n = self.P.shape[0]
        ap = [ad[p] + a[p] for p in range(n)]
        am = [ad[p] - a[p] for p in range(n)]
        bp = [sum(self.O_plus[p, q] * ap[p] for p in range(n)) for q in range(n)]
        bm = [sum(self.O_minus[p, q] * am[p] for p in range(n)) for q in range(n)]
        b = [0.5 * (x - y) for x, y in zip(bp, bm)]
        bd = [0.5 * (x + y) for x, y in zip(bp, bm)]
        return b, bd


@dataclass
class BogolyubovCheck:
    form: FermionicQuadraticForm
    D_prime: np.ndarray
    rule_residual: float
    spectrum_deviation: float | None


def bogolyubov_apply(form: FermionicQuadraticForm, t: BogolyubovTransform, tol: float = 1e-10,
                     check_spectrum: bool = True) -> BogolyubovCheck:
    """
    Rewrite the form in the operators b of the transform.

    With a+ = O+ b+ and a- = O- b-, D' = O+^T D O-, i.e. D = O+ D' O-^T.
    The constant is adjusted so both forms have the same trace. With
    ``check_spectrum`` the Fock spectra of the two forms are compared.
    """
    if t.orthogonality_residual() > tol:
        raise ValueError(f"O+ and O- are not orthogonal (residual {t.orthogonality_residual():.3e})")
    D = form.A + form.B
    Dp = t.O_plus.T @ D @ t.O_minus
    rule = float(np.abs(t.O_plus @ Dp @ t.O_minus.T - D).max(initial=0.0))
    new = FermionicQuadraticForm.from_D(Dp)
    const = form.const + 0.5 * (np.trace(form.B) - np.trace(new.B))
    new = FermionicQuadraticForm(new.A, new.B, const)
    dev = None
    if check_spectrum:
        e0 = np.linalg.eigvalsh(build_fock(form))
        e1 = np.linalg.eigvalsh(build_fock(new))
        dev = float(np.abs(e0 - e1).max())
    return BogolyubovCheck(new, Dp, rule, dev)


def diagonalize(form: FermionicQuadraticForm, check_spectrum: bool = False):
    """
    Bogolyubov transform making D' diagonal and nonnegative.

    From the singular value decomposition D = U diag(mu) V^T, take O+ = U
    and O- = V. Returns the transform, mu (descending) and the check.
    """
    D = form.A + form.B
    U, mu, Vt = np.linalg.svd(D)
    t = BogolyubovTransform.from_orthogonals(U, Vt.T)
    return t, mu, bogolyubov_apply(form, t, check_spectrum=check_spectrum)


def diagonalize_symmetric(form: FermionicQuadraticForm):
    """
    For A = 0 one orthogonal matrix suffices: D = W diag(w) W^T, and
    O+ = W, O- = W diag(sign w) differ only by column signs.
    """
    if np.any(form.A != 0):
        raise ValueError("single-orthogonal diagonalization needs A = 0")
    w, W = np.linalg.eigh(form.B)
    s = np.where(w < 0, -1.0, 1.0)
    t = BogolyubovTransform.from_orthogonals(W, W * s)
    return t, np.abs(w), bogolyubov_apply(form, t, check_spectrum=False)


def random_form(n: int, rng: np.random.Generator, scale: float = 1.0, const: float | None = None):
    X = rng.normal(scale=scale, size=(n, n))
    Y = rng.normal(scale=scale, size=(n, n))
    c = float(rng.normal()) if const is None else const
    return FermionicQuadraticForm(X - X.T, Y + Y.T, c)


def random_transform(n: int, rng: np.random.Generator) -> BogolyubovTransform:
    from scipy.stats import ortho_group

    if n == 1:
        return BogolyubovTransform.from_orthogonals([[rng.choice([-1.0, 1.0])]], [[rng.choice([-1.0, 1.0])]])
    return BogolyubovTransform.from_orthogonals(ortho_group.rvs(n, random_state=rng),
                                                ortho_group.rvs(n, random_state=rng))
