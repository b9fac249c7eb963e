"""
JSON input and output.

Graph schema::

    {"vertices": [{"id": ..., "potential": ...}],
     "edges": [{"id": ..., "u": ..., "v": ..., "b": ...}],
     "tails": [{"attach": ..., "free_from": 1, "potentials": [...], "couplings": [...]}]}

Edge-operator inputs may add ``"V_R"`` per edge and a ``"d"`` table of
``{"r": ..., "s": ..., "value": ...}`` entries.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import Graph, GraphWithTails, Tail
from .operators import EdgeOperator, VertexOperator, laplace_beltrami_edge

__all__ = ["SchemaError", "Instance", "parse_instance", "load_instance", "instance_to_json", "jsonable"]


class SchemaError(ValueError):
    """Input does not match the graph schema; the message names the offending field."""


@dataclass
class Instance:
    graph: GraphWithTails
    vertex_operator: VertexOperator
    edge_operator: EdgeOperator | None = None
    name: str = ""

    def shifted(self, c: float) -> "Instance":
        if not c:
            return self
        eop = self.edge_operator.shifted(c) if self.edge_operator is not None else None
        return Instance(self.graph, self.vertex_operator.shifted(c), eop, self.name)

    def edge_operator_or_default(self) -> EdgeOperator:
        return self.edge_operator if self.edge_operator is not None else laplace_beltrami_edge(self.graph.core)


def _num(x, where):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise SchemaError(f"{where}: expected a number, got {x!r}")
    return float(x)


def _id(x, where):
    if isinstance(x, (str, int)) and not isinstance(x, bool):
        return x
    raise SchemaError(f"{where}: ids must be strings or integers, got {x!r}")


def parse_instance(data: dict, name: str = "") -> Instance:
    """Build an :class:`Instance` from a decoded JSON document."""
    if not isinstance(data, dict):
        raise SchemaError("top level: expected an object")
    for key in data:
        if key not in ("vertices", "edges", "tails", "d", "name", "description"):
            raise SchemaError(f"top level: unknown field {key!r}")
    verts = data.get("vertices")
    if not isinstance(verts, list) or not verts:
        raise SchemaError("vertices: expected a nonempty list")
    ids, pots = [], {}
    for i, v in enumerate(verts):
        if not isinstance(v, dict) or "id" not in v:
            raise SchemaError(f"vertices[{i}]: expected an object with an 'id'")
        vid = _id(v["id"], f"vertices[{i}].id")
        if vid in pots:
            raise SchemaError(f"vertices[{i}].id: duplicate id {vid!r}")
        ids.append(vid)
        pots[vid] = _num(v.get("potential", 0.0), f"vertices[{i}].potential")
    edges, bs, vrs = [], {}, {}
    for i, e in enumerate(data.get("edges", [])):
        if not isinstance(e, dict):
            raise SchemaError(f"edges[{i}]: expected an object")
        for f in ("u", "v"):
            if f not in e:
                raise SchemaError(f"edges[{i}]: missing field {f!r}")
            if e[f] not in pots:
                raise SchemaError(f"edges[{i}].{f}: unknown vertex {e[f]!r}")
        eid = _id(e.get("id", i), f"edges[{i}].id")
        if eid in bs:
            raise SchemaError(f"edges[{i}].id: duplicate id {eid!r}")
        edges.append((eid, e["u"], e["v"]))
        bs[eid] = _num(e.get("b", 1.0), f"edges[{i}].b")
        if "V_R" in e:
            vrs[eid] = _num(e["V_R"], f"edges[{i}].V_R")
    tails = []
    for i, t in enumerate(data.get("tails", [])):
        if not isinstance(t, dict) or "attach" not in t:
            raise SchemaError(f"tails[{i}]: expected an object with 'attach'")
        if t["attach"] not in pots:
            raise SchemaError(f"tails[{i}].attach: unknown vertex {t['attach']!r}")
        ff = t.get("free_from", 1)
        if not isinstance(ff, int) or isinstance(ff, bool) or ff < 1:
            raise SchemaError(f"tails[{i}].free_from: expected an integer >= 1")
        try:
            tails.append(Tail(t["attach"], ff,
                              tuple(_num(x, f"tails[{i}].potentials") for x in t.get("potentials", ())),
                              tuple(_num(x, f"tails[{i}].couplings") for x in t.get("couplings", ()))))
        except ValueError as exc:
            raise SchemaError(f"tails[{i}]: {exc}") from None
    try:
        core = Graph(ids, edges)
    except ValueError as exc:
        raise SchemaError(f"edges: {exc}") from None
    g = GraphWithTails(core, tails)
    L = VertexOperator.from_coefficients(core, [pots[v] for v in ids], bs)
    eop = None
    if vrs or "d" in data:
        d = {}
        for i, row in enumerate(data.get("d", [])):
            try:
                r, s = row["r"], row["s"]
            except (KeyError, TypeError):
                raise SchemaError(f"d[{i}]: expected an object with 'r', 's', 'value'") from None
            for f, x in (("r", r), ("s", s)):
                if x not in bs:
                    raise SchemaError(f"d[{i}].{f}: unknown edge {x!r}")
            d[(r, s)] = _num(row.get("value"), f"d[{i}].value")
        eop = EdgeOperator.from_coefficients(core, [vrs.get(e.id, 0.0) for e in core.edges], d)
    return Instance(g, L, eop, name or str(data.get("name", "")))


def load_instance(path) -> Instance:
    """Read an instance from a JSON file; decode errors report line and column."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise SchemaError(f"{path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    try:
        return parse_instance(data, name=p.stem)
    except SchemaError as exc:
        raise SchemaError(f"{path}: {exc}") from None


def instance_to_json(inst: Instance) -> dict:
    g, L = inst.graph, inst.vertex_operator
    core = g.core
    out = {
        "vertices": [{"id": v, "potential": float(L.matrix[i, i])} for i, v in enumerate(core.vertices)],
        "edges": [],
        "tails": [],
    }
    w = L.edge_weights()
    for k, e in enumerate(core.edges):
        row = {"id": e.id, "u": e.u, "v": e.v, "b": float(w[k])}
        if inst.edge_operator is not None:
            row["V_R"] = float(inst.edge_operator.matrix[k, k])
        out["edges"].append(row)
    for t in g.tails:
        row = {"attach": t.attach, "free_from": t.free_from}
        if t.free_from > 1:
            row["potentials"] = list(t.potentials)
            row["couplings"] = list(t.couplings)
        out["tails"].append(row)
    if inst.edge_operator is not None:
        E = inst.edge_operator.matrix
        out["d"] = [{"r": core.edges[i].id, "s": core.edges[j].id, "value": float(E[i, j])}
                    for i in range(core.n_edges) for j in range(i + 1, core.n_edges) if E[i, j] != 0]
    if inst.name:
        out["name"] = inst.name
    return out


def jsonable(x):
    """Recursively convert numpy scalars/arrays, complex numbers and tuple keys for json.dumps."""
    if isinstance(x, dict):
        return {str(k) if not isinstance(k, str) else k: jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return jsonable(x.tolist())
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (complex, np.complexfloating)):
        z = complex(x)
        return z.real if z.imag == 0 else {"re": z.real, "im": z.imag}
    if isinstance(x, np.floating):
        return float(x)
    return x
