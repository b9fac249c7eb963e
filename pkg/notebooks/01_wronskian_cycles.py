"""
Wronskians of degenerate eigenvectors are cycles.

Builds a small graph with a threefold rotation symmetry, takes two
eigenvectors sharing an eigenvalue, and checks that their Wronskian has
zero boundary for both the vertex and the edge operator.
"""

import numpy as np

from schrograph import Graph, is_cycle, laplace_beltrami_edge, laplace_beltrami_vertex, wronskian_edge, wronskian_vertex

# prism: two triangles joined by rungs
G = Graph(range(6), [(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3), (0, 3), (1, 4), (2, 5)])
L = laplace_beltrami_vertex(G)
w, V = np.linalg.eigh(L.matrix)
print("vertex spectrum:", np.round(w, 6))

i = int(np.flatnonzero(np.diff(w) < 1e-9)[0])
lam, f, h = w[i], V[:, i], V[:, i + 1]
W = wronskian_vertex(L, f, h, lam=lam)
print(f"lambda = {lam:.6f}")
print("W on edges:", np.round(W.values, 6))
print("cycle check:", is_cycle(W))

E = laplace_beltrami_edge(G)
print("edge operator has", E.n_sites, "sites")
we, Ve = np.linalg.eigh(E.matrix)
print("edge spectrum:", np.round(we, 6))
# in a multiplicity-3 eigenspace some pairs have W = 0 identically; take one that does not
for j in np.flatnonzero(np.diff(we) < 1e-9):
    We = wronskian_edge(E, Ve[:, j], Ve[:, j + 1], lam=we[j])
    if np.abs(We.values).max() > 1e-8:
        print(f"edge lambda = {we[j]:.6f}, cycle check: {is_cycle(We)}, endpoint defect {We.endpoint_defect:.1e}")
        break

# the same vector twice gives the zero chain
print("W(f, f) == 0:", not wronskian_vertex(L, f, f).values.any())
