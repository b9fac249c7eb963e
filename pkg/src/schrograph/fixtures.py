"""Named test instances covering the worked examples."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fermion import FermionicQuadraticForm
from .graph import Graph, SimplicialComplex
from .io import Instance, parse_instance

__all__ = ["Fixture", "FIXTURES", "fixture_names", "get_fixture", "triangle_tail", "triangle_two_tails_joint",
           "triangle_two_tails_split", "tetrahedron_boundary", "fermion_form"]


@dataclass
class Fixture:
    name: str
    description: str
    kind: str
    build: object = field(repr=False)
    params: dict = field(default_factory=dict)

    def __call__(self):
        return self.build(**self.params)


def _graph_doc(vertices: dict, edges: list, tails: list, name: str) -> dict:
    return {
        "name": name,
        "vertices": [{"id": v, "potential": p} for v, p in vertices.items()],
        "edges": [{"id": i, "u": u, "v": v, "b": b} for i, (u, v, b) in enumerate(edges)],
        "tails": [{"attach": t, "free_from": 1} for t in tails],
    }


def free_line() -> Instance:
    """One vertex with two tails: the free operator on the whole line."""
    return parse_instance(_graph_doc({"0": 0.0}, [], ["0", "0"], "free_line"))


def triangle_tail(a=1.0, b=1.0, c=1.0, u=0.0, v=0.0, w=0.0, name="triangle_tail") -> Instance:
    """
    Triangle [0AB] with one tail at 0.

    Couplings b_{0A} = a, b_{0B} = b, b_{AB} = c; potentials u, v, w at
    0, A, B. An exceptional eigenvalue w - bc/a exists when it equals
    v - ac/b.
    """
    return parse_instance(_graph_doc({"0": u, "A": v, "B": w},
                                     [("0", "A", a), ("0", "B", b), ("A", "B", c)], ["0"], name))


def triangle_two_tails_joint(a=1.0, b=1.5, c=0.5, u=0.0, v=1.0, w=0.0) -> Instance:
    """
    Triangle [0AB] with both tails at 0; b_{0A} = a, b_{0B} = b, b_{AB} = c,
    potentials w, u, v at 0, A, B. Singular values solve (u - lam)(v - lam) = c^2.
    """
    return parse_instance(_graph_doc({"0": w, "A": u, "B": v},
                                     [("0", "A", a), ("0", "B", b), ("A", "B", c)], ["0", "0"],
                                     "triangle_two_tails_joint"))


def triangle_two_tails_split(a=2.0, b=1.0, c=1.0, u=0.0, v=0.0, w=0.0) -> Instance:
    """
    Triangle [0_1 0_2 A] with a tail at each of 0_1, 0_2; b_{0_1 0_2} = a,
    b_{0_1 A} = b, b_{0_2 A} = c, potentials u, v, w. The singular value is
    w - bc/a.
    """
    return parse_instance(_graph_doc({"01": u, "02": v, "A": w},
                                     [("01", "02", a), ("01", "A", b), ("02", "A", c)], ["01", "02"],
                                     "triangle_two_tails_split"))


def k4_tails() -> Instance:
    """Complete graph on four vertices, one tail per vertex, L = Laplace-Beltrami + 2 (degree 4)."""
    verts = {str(i): -4.0 + 2.0 for i in range(4)}
    edges = [(str(i), str(j), 1.0) for i in range(4) for j in range(i + 1, 4)]
    return parse_instance(_graph_doc(verts, edges, [str(i) for i in range(4)], "k4_tails"))


def tetrahedron_boundary():
    """
    Boundary of a tetrahedron as a 2-complex with the operator J - I on its
    four triangles (every pair shares an edge); lam = -1 is triple.
    """
    K = SimplicialComplex([(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)])
    M = np.ones((4, 4)) - np.eye(4)
    return K, 2, M


def fermion_form(n: int) -> FermionicQuadraticForm:
    """A fixed nondegenerate form on n modes."""
    rng = np.random.default_rng(1000 + n)
    X = rng.normal(size=(n, n))
    Y = rng.normal(size=(n, n))
    return FermionicQuadraticForm(X - X.T, Y + Y.T, 0.0)


FIXTURES = {
    f.name: f
    for f in [
        Fixture("free_line", "single vertex with two free tails", "graph", free_line),
        Fixture("triangle_tail_generic", "triangle with one tail, generic couplings", "graph", triangle_tail,
                dict(a=1.0, b=1.3, c=0.7, u=0.2, v=-0.4, w=0.5, name="triangle_tail_generic")),
        Fixture("triangle_tail_exceptional", "triangle with one tail tuned to an exceptional eigenvalue at 0",
                "graph", triangle_tail, dict(a=1.0, b=2.0, c=1.0, u=0.0, v=0.5, w=2.0,
                                             name="triangle_tail_exceptional")),
        Fixture("triangle_tail_z2", "mirror-symmetric triangle with one tail (a = b, v = w)", "graph",
                triangle_tail, dict(a=1.0, b=1.0, c=2.0, u=0.0, v=1.0, w=1.0, name="triangle_tail_z2")),
        Fixture("triangle_tail_deep", "triangle with one tail and potential 10 at the nest", "graph",
                triangle_tail, dict(a=1.0, b=1.0, c=1.0, u=10.0, v=0.0, w=0.0, name="triangle_tail_deep")),
        Fixture("triangle_two_tails_joint", "triangle with two tails at one vertex", "graph", triangle_two_tails_joint),
        Fixture("triangle_two_tails_split", "triangle with tails at two vertices", "graph", triangle_two_tails_split),
        Fixture("k4_tails", "complete graph K4 with a tail at every vertex (degree 4)", "graph", k4_tails),
        Fixture("tetrahedron_boundary", "2-skeleton of a tetrahedron, operator on triangles", "simplicial",
                tetrahedron_boundary),
    ]
    + [Fixture(f"fermion_n{n}", f"quadratic fermionic form on {n} modes", "fermion", fermion_form, {"n": n})
       for n in range(1, 5)]
}


def fixture_names() -> list[str]:
    return list(FIXTURES)


def get_fixture(name: str):
    try:
        return FIXTURES[name]()
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}; known: {', '.join(FIXTURES)}") from None
