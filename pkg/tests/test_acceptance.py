"""
End-to-end acceptance checks, one test per criterion.

Each test records a verdict in ``conftest.ACCEPTANCE`` before asserting,
and the terminal summary prints one PASS/FAIL line per criterion.
"""

import time

import numpy as np
import pytest

from schrograph import (IncompatibleFactorization, SingularLambda, delta_norm_bound, diagonalize, exceptional_spectrum, extend_to_window,
                        factorize_edge, find_positive_C, homology_class, is_cycle, laplace_beltrami_edge,
                        laplace_beltrami_vertex, normal_spectrum, perturbation_experiment, predicted_spectrum,
                        random_form, reconstruct, s_of_a_form, scattering_data, scattering_matrix,
                        simplicial_wronskian, singular_lambda_scan, truncated_eigenvalues, wronskian_edge,
                        wronskian_vertex, build_fock, Graph, VertexOperator, EdgeOperator, cycle_graph)
from schrograph.fixtures import triangle_two_tails_joint, triangle_two_tails_split, get_fixture, tetrahedron_boundary

from conftest import ACCEPTANCE, degenerate_pair, random_connected_graph, random_tailed, z3_cover


def record(n, ok, msg):
    ACCEPTANCE[n] = (bool(ok), msg)
    assert ok, msg


def test_criterion_01_cycle_law():
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    counts = {"vertex": 0, "edge": 0}
    worst = 0.0
    while min(counts.values()) < 500:
        G, L, E = z3_cover(rng, int(rng.integers(1, 9)))
        for kind, op, wfn in (("vertex", L, wronskian_vertex), ("edge", E, wronskian_edge)):
            if op.n_sites > 30:
                continue
            pair = degenerate_pair(op.matrix)
            if pair is None:
                continue
            lam, f, h = pair
            W = wfn(op, f, h, lam=lam)
            scale = np.abs(W.values).max()
            if scale == 0:
                continue
            worst = max(worst, is_cycle(W)[1] / scale)
            counts[kind] += 1
    dt = time.perf_counter() - t0
    record(1, worst <= 1e-9 and dt <= 60,
           f"{counts['vertex']} vertex + {counts['edge']} edge instances, max |dW|/|W| = {worst:.2e}, {dt:.1f} s")


def test_criterion_02_simplicial_law():
    K, k, M = tetrahedron_boundary()
    lam, f, h = degenerate_pair(M)
    s, fs = simplicial_wronskian(K, k, M, f, h, lam=lam).max_residuals()
    record(2, s <= 1e-10 and fs <= 1e-10, f"lambda = {lam:.3g}, residuals {s:.2e}, {fs:.2e}")


def _sweep(seed=303, n_instances=200):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_instances):
        g, L = random_tailed(rng, prefix=True)
        for zone in ("scatter", "normal", "complex"):
            lam = {"scatter": rng.uniform(-1.98, 1.98),
                   "normal": rng.choice([-1, 1]) * rng.uniform(2.05, 6),
                   "complex": complex(rng.uniform(-4, 4), rng.uniform(0.1, 2))}[zone]
            out.append((zone, g, L, lam, scattering_data(L, g, lam)))
    return out


@pytest.fixture(scope="module")
def sweep():
    return _sweep()


def test_criterion_03_lagrangian(sweep):
    full = [p for (_, g, _, _, p) in sweep if p.dim == g.k]
    worst = max(p.max_skew for p in full)
    flagged = sum(p.flagged for *_, p in sweep)
    record(3, worst <= 1e-9 and len(full) > 0,
           f"{len(sweep) // 3} graphs x 3 zones, {len(full)} full planes, max skew {worst:.2e}, "
           f"flagged {flagged}/{len(sweep)}")


def test_criterion_04_scattering_matrix(sweep):
    worst_u = worst_s = worst_a = 0.0
    used = 0
    for zone, g, L, lam, plane in sweep:
        if zone != "scatter" or plane.dim != g.k:
            continue
        try:
            S = scattering_matrix(plane)
        except SingularLambda:
            continue
        used += 1
        worst_u = max(worst_u, S.unitarity_residual)
        worst_s = max(worst_s, S.symmetry_residual)
        worst_a = max(worst_a, s_of_a_form(S.S)[1])
    inst = get_fixture("free_line")
    anti = 0.0
    for lam in np.linspace(-1.9, 1.9, 50):
        S = scattering_matrix(scattering_data(inst.vertex_operator, inst.graph, lam)).S
        anti = max(anti, abs(S[0, 0]), abs(S[1, 1]), abs(abs(S[0, 1]) - 1), abs(abs(S[1, 0]) - 1))
        worst_a = max(worst_a, s_of_a_form(S)[1])
    ok = worst_u <= 1e-8 and worst_s <= 1e-8 and anti <= 1e-10 and worst_a <= 1e-9 and used > 0
    record(4, ok, f"{used} points: unitarity {worst_u:.2e}, symmetry {worst_s:.2e}, "
                  f"free-line antidiagonal {anti:.2e}, AA^t residual {worst_a:.2e}")


def test_criterion_05_exceptional():
    inst = get_fixture("triangle_tail_exceptional")
    L, g = inst.vertex_operator, inst.graph
    a, b, c, w = 1.0, 2.0, 1.0, 2.0
    found = exceptional_spectrum(L, g)
    ok = len(found) == 1
    msg = f"{len(found)} exceptional eigenvalue(s)"
    if ok:
        ex = found[0]
        err = abs(ex.lam - (w - b * c / a))
        n_core = g.core.n_vertices
        tail = float(np.abs(ex.window_vector[n_core:]).max())
        evals, _ = truncated_eigenvalues(L, g, 60)
        trunc = float(np.min(np.abs(evals - ex.lam)))
        ok = err <= 1e-10 and tail <= 1e-12 and trunc <= 1e-8
        msg += f", |lam - (w - bc/a)| = {err:.1e}, tail {tail:.1e}, 60-site truncation {trunc:.1e}"
    record(5, ok, msg)


def test_criterion_06_singular_lambda():
    parts = []
    u, v, c = 0.0, 1.0, 0.5
    inst = triangle_two_tails_joint(1.0, 1.5, c, u, v, 0.0)
    found = singular_lambda_scan(inst.vertex_operator, inst.graph)
    poly = max((abs((u - s.lam) * (v - s.lam) - c * c) for s in found), default=np.inf)
    wr = max((float(np.abs(s.wronskian.values).max()) for s in found), default=np.inf)
    case1 = len(found) == 2 and poly <= 1e-10 and wr <= 1e-10
    parts.append(f"shared-vertex tails {'ok' if case1 else 'bad'} (poly {poly:.1e}, W {wr:.1e})")

    a, b, c = 2.0, 1.0, 1.0
    inst = triangle_two_tails_split(a, b, c)
    (sv,) = singular_lambda_scan(inst.vertex_operator, inst.graph, normalize_at="A")
    lam_ok = abs(sv.lam - b * c / a) <= 1e-10
    coef = abs(abs(sv.finite_class[0]) - b * c / a) if sv.finite_class is not None and len(sv.finite_class) == 1 \
        else np.inf
    coef_ok = coef <= 1e-9 and np.abs(sv.tail_alphas).max() <= 1e-10
    parts.append(f"split tails lambda* = {sv.lam:.6g} vs stated bc/a = {b * c / a:.6g} "
                 f"({'ok' if lam_ok else 'mismatch: computed value is w - bc/a'})")
    parts.append(f"split tails class coefficient {'ok' if coef_ok else 'bad'} ({coef:.1e})")
    record(6, case1 and lam_ok and coef_ok, "; ".join(parts))


def test_criterion_07_genericity():
    inst = get_fixture("triangle_tail_z2")
    L, g = inst.vertex_operator, inst.graph
    gen = perturbation_experiment(L, g, 1e-2, trials=100, seed=7, tol=1e-8)
    sym = perturbation_experiment(L, g, 1e-2, trials=100, seed=7, tol=1e-8, symmetry={"A": "B", "B": "A"})
    record(7, gen.survivals == 0 and sym.survivals == 100,
           f"generic {gen.survivals}/100 survive, symmetric {sym.survivals}/100 survive")


def test_criterion_08_delta_norm():
    rng = np.random.default_rng(808)
    exact = True
    for _ in range(20):
        g = random_connected_graph(rng, int(rng.integers(3, 15)))
        m = g.degrees()
        i, j = g.endpoints().T
        exact &= delta_norm_bound(laplace_beltrami_vertex(g, shift=2)).M_L == max(m + (m - 2) ** 2)
        exact &= delta_norm_bound(laplace_beltrami_edge(g, shift=2)).M_L == max(m[i] - 1 + m[j] - 1)
    inst = get_fixture("k4_tails")
    L, g = inst.vertex_operator, inst.graph
    flag = delta_norm_bound(L, g).discrete_spectrum_guaranteed
    eig = normal_spectrum(L, g, (-14.0, -2.0)) + normal_spectrum(L, g, (2.0, 14.0))
    w, _ = truncated_eigenvalues(L, g, 60)
    dev = max((float(np.min(np.abs(w - e.lam))) for e in eig), default=np.inf)
    ok = bool(exact) and flag and len(eig) >= 1 and dev <= 1e-6
    record(8, ok, f"closed forms exact on 20 graphs: {bool(exact)}; K4+tails flag {flag}, "
                  f"{len(eig)} normal eigenvalue(s) {[round(e.lam, 6) for e in eig]}, truncation dev {dev:.1e}")


def test_criterion_09_factorization():
    tri = laplace_beltrami_edge(cycle_graph(3))
    r_tri = reconstruct(factorize_edge(tri), tri)[1]
    star3 = Graph(range(4), [(f"e{i}", 0, i) for i in range(1, 4)])
    E3 = EdgeOperator.from_coefficients(star3, np.zeros(3), {("e1", "e2"): 2.0, ("e1", "e3"): 3.0, ("e2", "e3"): 6.0})
    r_3 = reconstruct(factorize_edge(E3), E3)[1]
    star4 = Graph(range(5), [(f"e{i}", 0, i) for i in range(1, 5)])
    d4 = {(f"e{i}", f"e{j}"): (2.0 if (i, j) == (1, 2) else 1.0) for i in range(1, 5) for j in range(i + 1, 5)}
    try:
        factorize_edge(EdgeOperator.from_coefficients(star4, np.zeros(4), d4))
        rejected, comp = False, 0.0
    except IncompatibleFactorization as exc:
        rejected, comp = True, exc.report.max_residual
    rng = np.random.default_rng(909)
    tree = Graph(range(10), [(int(rng.integers(0, i)), i) for i in range(1, 10)])
    L = VertexOperator.from_coefficients(tree, rng.normal(size=10),
                                         {e.id: float(rng.uniform(0.3, 1.5)) for e in tree.edges})
    s = find_positive_C(L, list(range(10)), 0)
    r_tree = reconstruct(s.result, L)[1] if s.found else np.inf
    ok = r_tri <= 1e-10 and r_3 <= 1e-10 and rejected and comp > 0 and s.found and s.result.positive \
        and r_tree <= 1e-10
    record(9, ok, f"triangle {r_tri:.1e}, degree-3 {r_3:.1e}, degree-4 rejected {rejected} "
                  f"(compatibility residual {comp:.2e}), 10-vertex tree C = {s.C:.4g} positive "
                  f"{s.found and s.result.positive}, residual {r_tree:.1e}")


def test_criterion_10_fermion():
    rng = np.random.default_rng(1010)
    t0 = time.perf_counter()
    worst = orth = 0.0
    for i in range(200):
        n = 1 + i % 6
        f = random_form(n, rng)
        spec = predicted_spectrum(f)[0]
        fock = np.linalg.eigvalsh(build_fock(f))
        worst = max(worst, float(np.abs(spec - fock).max()))
        t, _, _ = diagonalize(f)
        orth = max(orth, t.orthogonality_residual())
    dt = time.perf_counter() - t0
    record(10, worst <= 1e-9 and orth <= 1e-10 and dt <= 120,
           f"200 forms n=1..6: spectrum dev {worst:.2e}, orthogonality {orth:.2e}, {dt:.1f} s")


def test_criterion_11_tail_sum_vs_skew():
    rng = np.random.default_rng(1111)
    worst, done, tries = 0.0, 0, 0
    while done < 100 and tries < 2000:
        tries += 1
        g, L = random_tailed(rng, k=int(rng.integers(2, 6)), prefix=True)
        lam = rng.uniform(-1.95, 1.95)
        plane = scattering_data(L, g, lam)
        if plane.dim < 2 or plane.flagged:
            continue
        depth = max(t.free_from for t in g.tails) + 4
        Lw = extend_to_window(L, g, depth)
        W, paths = g.window(depth)
        tips = [W.index(p[-1]) for p in paths]
        f, h = plane.solution_on_window(0, depth), plane.solution_on_window(1, depth)
        Wr = wronskian_vertex(Lw, f, h, lam=lam, ignore_rows=tips)
        hc = homology_class(Wr, g)
        x, y = plane.basis[:, 0], plane.basis[:, 1]
        skew = x[0::2] * y[1::2] - x[1::2] * y[0::2]
        scale = max(1.0, float(np.abs(Wr.values).max()))
        worst = max(worst, float(np.abs(hc.alphas - skew).max()) / scale,
                    abs(hc.alpha_sum - skew.sum()) / scale)
        done += 1
    record(11, done >= 100 and worst <= 1e-9, f"{done} instances, max discrepancy {worst:.2e}")
