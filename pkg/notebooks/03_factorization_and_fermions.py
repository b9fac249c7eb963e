"""
Factorizing L + C into a product of first-order operators, and the
spectrum of a quadratic fermionic form from singular values.
"""

import numpy as np

from schrograph import (VertexOperator, build_fock, cycle_graph, diagonalize, factorize_edge, find_positive_C,
                        laplace_beltrami_edge, path_graph, predicted_spectrum, reconstruct)
from schrograph.fixtures import fermion_form

L = laplace_beltrami_edge(cycle_graph(3))
r = factorize_edge(L, C=0.0)
print("triangle edge operator: c =", r.c, " U =", r.U, " residual", reconstruct(r, L)[1])

P = VertexOperator.from_coefficients(path_graph(6), np.zeros(6))
s = find_positive_C(P, list(range(6)), 0)
print(f"path of 6: smallest positive C found {s.C:.6f}, residual {reconstruct(s.result, P)[1]:.1e}")

f = fermion_form(3)
spec, mu, shift = predicted_spectrum(f)
fock = np.linalg.eigvalsh(build_fock(f))
print("singular values mu:", np.round(mu, 6))
print("predicted vs Fock max deviation:", np.abs(spec - fock).max())
t, mu2, chk = diagonalize(f)
print("diagonalized D':\n", np.round(chk.D_prime, 10))
print("orthogonality residual:", t.orthogonality_residual())
