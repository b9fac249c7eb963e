import numpy as np
import pytest
from hypothesis import given, strategies as st

from schrograph import (AsymptoticSymplecticSpace, LagrangianPlane, SingularLambda, check_lagrangian,
                        exceptional_spectrum, exceptional_spectrum_edge, extend_to_window, free_basis,
                        laplace_beltrami_edge, maslov_crossings, monodromy_matrix, normal_spectrum,
                        perturbation_experiment, s_of_a_form, scattering_data, scattering_matrix,
                        singular_lambda_scan, spectrum_report, to_plus_minus, truncated_eigenvalues)
from schrograph.fixtures import triangle_two_tails_joint, triangle_two_tails_split, get_fixture, triangle_tail

from conftest import random_tailed


def fx(name):
    inst = get_fixture(name)
    return inst.vertex_operator, inst.graph


def test_skew_form():
    J = AsymptoticSymplecticSpace(3).form()
    assert np.array_equal(J, -J.T) and abs(abs(np.linalg.det(J)) - 1) < 1e-15


def test_check_lagrangian_examples():
    C = np.zeros((4, 2))
    C[0, 0] = C[2, 1] = 1.0
    assert check_lagrangian(LagrangianPlane(C, 0.0))[0] == 0.0
    CS = np.zeros((4, 2))
    CS[0, 0] = CS[1, 1] = 1.0
    assert check_lagrangian(LagrangianPlane(CS, 0.0))[0] == 1.0


def test_free_line_plane_is_everything():
    L, g = fx("free_line")
    plane = scattering_data(L, g, 0.3)
    assert plane.dim == 2 and plane.solution_dim == 2 and not plane.flagged


@pytest.mark.parametrize("lam", [-1.7, -0.2, 0.5, 1.9])
def test_free_line_reflectionless(lam):
    L, g = fx("free_line")
    S = scattering_matrix(scattering_data(L, g, lam))
    assert abs(S.S[0, 0]) < 1e-10 and abs(S.S[1, 1]) < 1e-10
    assert abs(abs(S.S[0, 1]) - 1) < 1e-10 and abs(abs(S.S[1, 0]) - 1) < 1e-10
    A, res = s_of_a_form(S.S)
    assert res <= 1e-10
    assert np.abs(A.conj().T @ A - np.eye(2)).max() < 1e-10


def test_s_of_a_identity():
    A, res = s_of_a_form(np.eye(3))
    assert res < 1e-15 and np.abs(A @ A.T - np.eye(3)).max() < 1e-15


def test_triangle_tail_generic_one_dimensional():
    L, g = fx("triangle_tail_generic")
    for lam in np.linspace(-1.9, 1.9, 15):
        plane = scattering_data(L, g, lam)
        assert plane.dim == 1
        S = scattering_matrix(plane)
        assert S.S.shape == (1, 1) and abs(abs(S.S[0, 0]) - 1) < 1e-10


def test_triangle_tail_dimension_jump_at_exceptional():
    L, g = fx("triangle_tail_exceptional")
    plane = scattering_data(L, g, 0.0)
    assert plane.solution_dim == 2 and plane.dim == 1
    assert scattering_data(L, g, 0.3).solution_dim == 1


def test_plus_minus_roundtrip():
    lam = 0.6
    fb = free_basis(lam)
    B = np.array([[1.0], [0.0]])
    X, Y = to_plus_minus(B, lam)
    # C = x psi+ + y psi-, psi+- = C + a+- S
    assert abs(X[0, 0] + Y[0, 0] - 1) < 1e-14
    assert abs(X[0, 0] * fb.a_plus + Y[0, 0] * fb.a_minus) < 1e-14
    with pytest.raises(SingularLambda):
        to_plus_minus(B, 2.0)


def test_scattering_matrix_domain_error():
    L, g = fx("free_line")
    with pytest.raises(ValueError):
        scattering_matrix(scattering_data(L, g, 2.5))


@given(st.integers(0, 2**32 - 1), st.sampled_from(["scatter", "normal", "complex"]))
def test_lagrangian_property(seed, zone):
    rng = np.random.default_rng(seed)
    g, L = random_tailed(rng, prefix=True)
    lam = {"scatter": rng.uniform(-1.98, 1.98),
           "normal": rng.choice([-1, 1]) * rng.uniform(2.05, 6),
           "complex": complex(rng.uniform(-4, 4), rng.uniform(0.1, 2))}[zone]
    plane = scattering_data(L, g, lam)
    if plane.dim == g.k:
        assert plane.max_skew <= 1e-9


@given(st.integers(0, 2**32 - 1), st.floats(-1.95, 1.95))
def test_unitary_symmetric(seed, lam):
    rng = np.random.default_rng(seed)
    g, L = random_tailed(rng, prefix=True)
    plane = scattering_data(L, g, lam)
    if plane.dim != g.k:
        return
    try:
        S = scattering_matrix(plane)
    except SingularLambda:
        return
    assert S.check(1e-8)
    A, res = s_of_a_form(S.S)
    assert res <= 1e-9


def test_truncation_doubling_is_stable():
    L, g = fx("triangle_tail_generic")
    from schrograph import GraphWithTails, Tail
    g2 = GraphWithTails(g.core, [Tail(t.attach, 3, (0.0, 0.0), (1.0, 1.0)) for t in g.tails])
    S1 = scattering_matrix(scattering_data(L, g, 0.7)).S
    S2 = scattering_matrix(scattering_data(L, g2, 0.7)).S
    assert np.abs(S1 - S2).max() < 1e-12


def test_s_continuity_on_grid():
    # the fixture has a narrow resonance near -0.78, so the Lipschitz
    # constant is estimated on a fine grid and checked on a finer one
    L, g = fx("triangle_tail_generic")

    def max_jump(n):
        lams = np.linspace(-1.9, 1.9, n)
        Ss = [scattering_matrix(scattering_data(L, g, x)).S for x in lams]
        return max(np.abs(a - b).max() for a, b in zip(Ss, Ss[1:])), lams[1] - lams[0]

    j1, h1 = max_jump(1500)
    j2, h2 = max_jump(3000)
    lip = j1 / h1
    assert j2 <= 1.1 * lip * h2


def test_free_line_no_normal_spectrum():
    L, g = fx("free_line")
    assert normal_spectrum(L, g, (2.0, 8.0)) == []
    assert normal_spectrum(L, g, (-8.0, -2.0)) == []
    assert maslov_crossings(L, g, (2.0, 8.0)).count == 0


def test_normal_window_must_avoid_scattering_zone():
    L, g = fx("free_line")
    with pytest.raises(ValueError):
        normal_spectrum(L, g, (1.0, 3.0))


def test_deep_triangle_normal_eigenvalue_vs_truncation():
    L, g = fx("triangle_tail_deep")
    eig = normal_spectrum(L, g, (2.0, 15.0))
    assert any(e.lam > 2 for e in eig)
    w, _ = truncated_eigenvalues(L, g, 60)
    for e in eig:
        assert e.verified and e.residual <= 1e-9
        assert np.min(np.abs(w - e.lam)) <= 1e-6
        assert abs(e.decay_ratio - abs(e.a_minus)) <= 1e-6


def test_single_tail_poles_match_normal_roots():
    # for k = 1 the normal eigenvalues are where the psi+ coefficient of T_lam vanishes
    L, g = fx("triangle_tail_deep")
    for e in normal_spectrum(L, g, (2.0, 15.0)):
        plane = scattering_data(L, g, e.lam)
        X, _ = to_plus_minus(plane.basis, e.lam)
        assert abs(X[0, 0]) <= 1e-8 * np.abs(plane.basis).max()


@pytest.mark.parametrize("name", ["triangle_tail_generic", "triangle_tail_deep", "k4_tails", "triangle_two_tails_joint"])
def test_maslov_at_least_eigenvalue_count(name):
    L, g = fx(name)
    for w in ((-14.0, -2.0), (2.0, 14.0)):
        n = sum(e.verified for e in normal_spectrum(L, g, w))
        assert maslov_crossings(L, g, w).count >= n


def test_exceptional_triangle_formula():
    a, b, c, u, v, w = 1.0, 2.0, 1.0, 0.0, 0.5, 2.0
    inst = triangle_tail(a, b, c, u, v, w)
    (ex,) = exceptional_spectrum(inst.vertex_operator, inst.graph)
    assert abs(ex.lam - (w - b * c / a)) < 1e-12
    assert abs(ex.lam - (v - a * c / b)) < 1e-12
    assert ex.eigenfunction.get("0", 0.0) == 0.0 and ex.drowned


def test_exceptional_z2_brute_force():
    L, g = fx("triangle_tail_z2")
    (ex,) = exceptional_spectrum(L, g)
    # bordered 3x3 system with psi_0 = 0 and the tail value 0
    M = L.matrix
    rows = np.vstack([M - ex.lam * np.eye(3), [1.0, 0, 0]])
    _, s, Vh = np.linalg.svd(rows)
    assert s[-1] < 1e-12
    phi = Vh[-1] / Vh[-1][1]
    assert np.allclose(phi, [0, 1, -1], atol=1e-12)
    assert abs(ex.lam - (-1.0)) < 1e-12
    assert np.max(np.abs(ex.window_vector[3:])) <= 1e-12


def test_exceptional_case2_empty():
    inst = triangle_two_tails_split()
    assert exceptional_spectrum(inst.vertex_operator, inst.graph) == []


def test_exceptional_trivial_basis_empty():
    from schrograph import GraphWithTails, Tail, VertexOperator, path_graph
    g = GraphWithTails(path_graph(3), [Tail(0), Tail(2)])
    assert exceptional_spectrum(VertexOperator.from_coefficients(g.core, np.zeros(3)), g) == []


def test_exceptional_edge_operator():
    # triangle with one tail: edge operator on the three triangle edges plus the first tail edge
    L, g = fx("triangle_tail_generic")
    W, _ = g.window(1)
    Le = laplace_beltrami_edge(W)
    found = exceptional_spectrum_edge(Le, g)
    for ex in found:
        x = ex.window_vector
        assert np.abs(Le.matrix @ x - ex.lam * x).max() < 1e-10
        assert x[W.edge_index(("tail", 0, 1))] == 0.0


def test_singular_case1():
    a, b, c, u, v, w = 1.0, 1.5, 0.5, 0.0, 1.0, 0.0
    inst = triangle_two_tails_joint(a, b, c, u, v, w)
    found = singular_lambda_scan(inst.vertex_operator, inst.graph)
    expected = sorted(np.roots([1, -(u + v), u * v - c * c]).real)
    got = sorted(s.lam for s in found)
    assert np.allclose(got, expected, atol=1e-10)
    for s in found:
        assert np.abs(s.wronskian.values).max() <= 1e-10


def test_singular_case2_and_monodromy():
    a, b, c, w = 2.0, 1.0, 1.0, 0.0
    inst = triangle_two_tails_split(a, b, c, w=w)
    L, g = inst.vertex_operator, inst.graph
    (s,) = singular_lambda_scan(L, g, normalize_at="A")
    assert abs(s.lam - (w - b * c / a)) < 1e-10
    plane = scattering_data(L, g, s.lam)
    with pytest.raises(SingularLambda):
        monodromy_matrix(plane)
    M = monodromy_matrix(scattering_data(L, g, s.lam + 0.3))
    assert M.shape == (2, 2)


def test_singular_free_line_none():
    L, g = fx("free_line")
    assert singular_lambda_scan(L, g) == []


def test_singular_needs_two_tails():
    L, g = fx("triangle_tail_generic")
    with pytest.raises(ValueError):
        singular_lambda_scan(L, g)


def test_perturbation_generic_and_symmetric():
    L, g = fx("triangle_tail_z2")
    gen = perturbation_experiment(L, g, 0.1, trials=100, seed=1)
    assert gen.survivals == 0
    sym = perturbation_experiment(L, g, 0.1, trials=100, seed=1, symmetry={"A": "B", "B": "A"})
    assert sym.survivals == 100
    zero = perturbation_experiment(L, g, 0.0, trials=5)
    assert zero.fraction == 1.0


def test_spectrum_report_k4():
    L, g = fx("k4_tails")
    rep = spectrum_report(L, g, bound=14.0)
    lams = [e.lam for e in rep.normal]
    w, _ = truncated_eigenvalues(L, g, 60)
    assert lams and all(np.min(np.abs(w - x)) <= 1e-6 for x in lams)
    assert set(rep.maslov) == {"I-", "I+"}
