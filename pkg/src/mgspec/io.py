"""Graph files: JSON documents with vertices, edges and vertex conditions.

Example::

    {
      "vertices": ["a", "b"],
      "edges": [{"id": "e", "from": "a", "to": "b", "length": 1.0}],
      "conditions": {
        "a": {"family": "dirichlet"},
        "b": {"P": [[[0, 0]]], "L": [[[1, 0]]]}
      }
    }

Matrices are lists of rows whose entries are ``[re, im]`` pairs.  Unknown
keys anywhere are rejected.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .conditions import (
    ABCondition,
    VertexCondition,
    decompose_lagrangian,
    from_AB,
    make_delta,
    make_delta_prime,
    make_dirichlet,
    make_kirchhoff,
    make_neumann,
)
from .errors import MgspecError, ParseError, SchemaError
from .graph import MetricGraph, build_graph, vertex_star

TOP_KEYS = {"vertices", "edges", "conditions"}
EDGE_KEYS = {"id", "from", "to", "length"}
FAMILIES = {
    "dirichlet": (make_dirichlet, False),
    "neumann": (make_neumann, False),
    "kirchhoff": (make_kirchhoff, False),
    "delta": (make_delta, True),
    "delta_prime": (make_delta_prime, True),
}
CONDITION_FORMS = ({"family"}, {"family", "alpha"}, {"P", "L"}, {"A", "B"}, {"lagrangian"})


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def decode_matrix(obj, where: str) -> np.ndarray:
    """``[[[re, im], ...], ...]`` to an array; real dtype when all imaginary parts vanish."""
    if not isinstance(obj, list) or not obj or not all(isinstance(r, list) for r in obj):
        raise SchemaError(f"{where}: matrix must be a nonempty list of rows")
    ncol = len(obj[0])
    out = np.empty((len(obj), ncol), dtype=complex)
    for i, row in enumerate(obj):
        if len(row) != ncol:
            raise SchemaError(f"{where}: row {i} has {len(row)} entries, expected {ncol}")
        for j, z in enumerate(row):
            if not (isinstance(z, list) and len(z) == 2 and all(_is_number(t) for t in z)):
                raise SchemaError(f"{where}[{i}][{j}]: entries must be [re, im] pairs of numbers")
            out[i, j] = complex(z[0], z[1])
    if not np.all(np.isfinite(out)):
        raise SchemaError(f"{where}: entries must be finite")
    return out.real.copy() if np.all(out.imag == 0) else out


def encode_matrix(m) -> list:
    m = np.atleast_2d(np.asarray(m))
    return [[[float(z.real), float(z.imag)] for z in row] for row in m.astype(complex)]


def _decode_vertex_id(v, where):
    if isinstance(v, bool) or not isinstance(v, (str, int)):
        raise SchemaError(f"{where}: ids must be strings or integers")
    return v


def _condition(spec, v, degree) -> VertexCondition:
    where = f"conditions[{v!r}]"
    if not isinstance(spec, dict):
        raise SchemaError(f"{where}: expected an object")
    keys = set(spec)
    if keys not in CONDITION_FORMS:
        unknown = sorted(keys - {"family", "alpha", "P", "L", "A", "B", "lagrangian"})
        bad = unknown[0] if unknown else ", ".join(sorted(keys))
        raise SchemaError(f"{where}: unexpected key(s) {bad!r}")
    if "family" in keys:
        fam = spec["family"]
        if fam not in FAMILIES:
            raise SchemaError(f"{where}.family: unknown family {fam!r}")
        make, needs_alpha = FAMILIES[fam]
        if needs_alpha != ("alpha" in keys):
            raise SchemaError(f"{where}.alpha: {'required' if needs_alpha else 'not allowed'} for {fam!r}")
        if needs_alpha:
            alpha = spec["alpha"]
            if not _is_number(alpha) or not math.isfinite(alpha):
                raise SchemaError(f"{where}.alpha: must be a finite number")
            return make(float(alpha), degree)
        return make(degree)
    if keys == {"P", "L"}:
        return VertexCondition(decode_matrix(spec["P"], where + ".P"), decode_matrix(spec["L"], where + ".L"))
    if keys == {"A", "B"}:
        return from_AB(ABCondition(decode_matrix(spec["A"], where + ".A"), decode_matrix(spec["B"], where + ".B")))
    return decompose_lagrangian(decode_matrix(spec["lagrangian"], where + ".lagrangian"))


def parse_document(doc) -> tuple[MetricGraph, dict]:
    if not isinstance(doc, dict):
        raise SchemaError("top level must be an object")
    for key in doc:
        if key not in TOP_KEYS:
            raise SchemaError(f"unknown top-level key {key!r}")
    for key in sorted(TOP_KEYS):
        if key not in doc:
            raise SchemaError(f"missing top-level key {key!r}")
    if not isinstance(doc["vertices"], list):
        raise SchemaError("vertices: expected a list")
    vertices = [_decode_vertex_id(v, "vertices") for v in doc["vertices"]]
    if not isinstance(doc["edges"], list):
        raise SchemaError("edges: expected a list")
    edges = []
    for i, e in enumerate(doc["edges"]):
        if not isinstance(e, dict):
            raise SchemaError(f"edges[{i}]: expected an object")
        for key in e:
            if key not in EDGE_KEYS:
                raise SchemaError(f"edges[{i}]: unknown key {key!r}")
        for key in ("id", "from", "length"):
            if key not in e:
                raise SchemaError(f"edges[{i}]: missing key {key!r}")
        length = e["length"]
        if not (_is_number(length) or length == "inf"):
            raise SchemaError(f"edges[{i}].length: must be a number or \"inf\"")
        edges.append({k: _decode_vertex_id(e[k], f"edges[{i}].{k}") if k != "length" else e[k] for k in e})
    g = build_graph(vertices=vertices, edges=edges)

    raw = doc["conditions"]
    if not isinstance(raw, dict):
        raise SchemaError("conditions: expected an object keyed by vertex id")
    by_name = {str(v): v for v in g.vertices}
    for key in raw:
        if key not in by_name:
            raise SchemaError(f"conditions: unknown vertex {key!r}")
    conditions = {}
    for name, v in by_name.items():
        if name not in raw:
            raise SchemaError(f"conditions: missing vertex {name!r}")
        degree = vertex_star(g, v).degree
        try:
            vc = _condition(raw[name], v, degree)
        except SchemaError:
            raise
        except MgspecError as exc:
            raise type(exc)(f"vertex {v!r}: {exc}") from exc
        if vc.degree != degree:
            raise SchemaError(f"conditions[{name!r}]: size {vc.degree} does not match degree {degree}")
        conditions[v] = vc.with_vertex(v)
    return g, conditions


def parse_graph_file(path) -> tuple[MetricGraph, dict]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path}: not valid UTF-8 at byte {exc.start}") from exc
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return parse_document(doc)


def to_document(g: MetricGraph, conditions) -> dict:
    """Graph plus conditions in explicit ``(P, L)`` form."""
    doc = g.to_dict()
    doc["conditions"] = {str(v): {"P": encode_matrix(conditions[v].P), "L": encode_matrix(conditions[v].L)}
                         for v in g.vertices}
    return doc


def write_graph_file(path, g: MetricGraph, conditions) -> None:
    Path(path).write_text(json.dumps(to_document(g, conditions), indent=2) + "\n", encoding="utf-8")
