"""
Scattering on graphs with tails.

The free line is reflectionless; a triangle with one tail has a 1x1
scattering matrix of unit modulus. The tuned triangle also carries an
exceptional eigenvalue whose eigenfunction never reaches the tail.
"""

import numpy as np

from schrograph import (exceptional_spectrum, normal_spectrum, s_of_a_form, scattering_data, scattering_matrix,
                        truncated_eigenvalues)
from schrograph.fixtures import get_fixture

line = get_fixture("free_line")
for lam in (-1.5, 0.0, 1.2):
    S = scattering_matrix(scattering_data(line.vertex_operator, line.graph, lam))
    A, res = s_of_a_form(S.S)
    print(f"free line lambda={lam:+.2f}  S=\n{np.round(S.S, 6)}\n  unitarity {S.unitarity_residual:.1e}, "
          f"S = A A^t residual {res:.1e}")

tri = get_fixture("triangle_tail_generic")
for lam in np.linspace(-1.8, 1.8, 7):
    S = scattering_matrix(scattering_data(tri.vertex_operator, tri.graph, lam)).S
    print(f"triangle lambda={lam:+.2f}  S = {S[0, 0]:.6f}  |S| = {abs(S[0, 0]):.12f}")

ex = get_fixture("triangle_tail_exceptional")
for e in exceptional_spectrum(ex.vertex_operator, ex.graph):
    print(f"exceptional eigenvalue {e.lam:.6f}, eigenfunction {e.eigenfunction}, drowned={e.drowned}")

deep = get_fixture("triangle_tail_deep")
for e in normal_spectrum(deep.vertex_operator, deep.graph, (2.0, 15.0)):
    w, _ = truncated_eigenvalues(deep.vertex_operator, deep.graph, 60)
    print(f"normal eigenvalue {e.lam:.10f}, nearest truncated {w[np.argmin(abs(w - e.lam))]:.10f}, "
          f"decay ratio {e.decay_ratio:.6f}")
