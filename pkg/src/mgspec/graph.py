"""Metric graph data model.

A metric graph is a set of vertices and oriented edges.  Every edge has a
start vertex and a length in ``(0, inf]``; finite edges also have an end
vertex.  Loops and parallel edges are allowed.  Functions live on the
edges, each identified with the interval ``(0, length)``.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping

from .errors import (
    Disconnected,
    DanglingIncidence,
    DuplicateId,
    EndpointOnInfiniteEdge,
    IsolatedVertex,
    MissingEndpointOnFiniteEdge,
    NonPositiveLength,
    UnknownVertex,
)

START = "start"
END = "end"


def id_key(x):
    """Sort key for vertex/edge ids that tolerates mixing ints and strings."""
    if isinstance(x, int) and not isinstance(x, bool):
        return (0, x, "")
    return (1, 0, str(x))


@dataclass(frozen=True)
class Edge:
    id: Hashable
    length: float
    start: Hashable
    end: Hashable | None = None

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.length)

    @property
    def is_loop(self) -> bool:
        return self.end is not None and self.end == self.start


@dataclass(frozen=True)
class EdgeEnd:
    edge: Hashable
    tag: str
    t: float

    @property
    def sign(self) -> int:
        """+1 at an edge start (t = 0), -1 at an edge end (t = length)."""
        return 1 if self.tag == START else -1


@dataclass(frozen=True)
class VertexStar:
    vertex: Hashable
    ends: tuple[EdgeEnd, ...]

    @property
    def degree(self) -> int:
        return len(self.ends)


@dataclass(frozen=True)
class MetricGraph:
    vertices: tuple
    edges: tuple[Edge, ...]
    u_min: float
    _stars: dict = field(default=None, repr=False, compare=False)
    _edge_index: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        stars = {v: [] for v in self.vertices}
        for e in self.edges:
            stars[e.start].append(EdgeEnd(e.id, START, 0.0))
            if e.end is not None:
                stars[e.end].append(EdgeEnd(e.id, END, e.length))
        frozen = {}
        for v, ends in stars.items():
            ends.sort(key=lambda ee: (id_key(ee.edge), ee.tag != START))
            frozen[v] = VertexStar(v, tuple(ends))
        object.__setattr__(self, "_stars", frozen)
        object.__setattr__(self, "_edge_index", {e.id: e for e in self.edges})

    def edge(self, edge_id) -> Edge:
        return self._edge_index[edge_id]

    def degree(self, v) -> int:
        return vertex_star(self, v).degree

    @property
    def finite_edges(self) -> tuple[Edge, ...]:
        return tuple(e for e in self.edges if not e.is_infinite)

    @property
    def infinite_edges(self) -> tuple[Edge, ...]:
        return tuple(e for e in self.edges if e.is_infinite)

    def to_dict(self) -> dict:
        """Plain description accepted back by :func:`build_graph`."""
        edges = []
        for e in self.edges:
            d = {"id": e.id, "from": e.start, "length": "inf" if e.is_infinite else e.length}
            if e.end is not None:
                d["to"] = e.end
            edges.append(d)
        return {"vertices": list(self.vertices), "edges": edges}


def _edge_from_description(item) -> Edge:
    if isinstance(item, Edge):
        return item
    if isinstance(item, Mapping):
        length = item["length"]
        if isinstance(length, str) and length.lower() in ("inf", "infinity"):
            length = math.inf
        return Edge(item["id"], float(length), item["from"], item.get("to"))
    eid, length, start, *rest = item
    return Edge(eid, float(length), start, rest[0] if rest else None)


def build_graph(spec: Mapping | None = None, *, vertices: Iterable | None = None,
                edges: Iterable | None = None) -> MetricGraph:
    """Validate a graph description and return a :class:`MetricGraph`.

    ``spec`` is a mapping with ``vertices`` (ids) and ``edges``; each edge is
    a mapping ``{id, from, to?, length}`` (length may be ``"inf"``), an
    :class:`Edge`, or a tuple ``(id, length, start[, end])``.  The same data
    may be passed as keyword arguments instead.
    """
    if spec is not None:
        vertices = spec["vertices"]
        edges = spec["edges"]
    vertex_list = list(vertices)
    if len(set(vertex_list)) != len(vertex_list):
        raise DuplicateId("vertex ids must be unique")
    vset = set(vertex_list)
    edge_list = [_edge_from_description(item) for item in edges]
    if len({e.id for e in edge_list}) != len(edge_list):
        raise DuplicateId("edge ids must be unique")

    for e in edge_list:
        if not e.length > 0 or math.isnan(e.length):
            raise NonPositiveLength(f"edge {e.id!r} has length {e.length}")
        if e.start not in vset:
            raise DanglingIncidence(f"edge {e.id!r} starts at unknown vertex {e.start!r}")
        if e.is_infinite:
            if e.end is not None:
                raise EndpointOnInfiniteEdge(f"infinite edge {e.id!r} must not have an end vertex")
        else:
            if e.end is None:
                raise MissingEndpointOnFiniteEdge(f"finite edge {e.id!r} has no end vertex")
            if e.end not in vset:
                raise DanglingIncidence(f"edge {e.id!r} ends at unknown vertex {e.end!r}")

    adjacency = {v: set() for v in vset}
    for e in edge_list:
        adjacency[e.start].add(e.end if e.end is not None else e.start)
        if e.end is not None:
            adjacency[e.end].add(e.start)
    touched = {e.start for e in edge_list} | {e.end for e in edge_list if e.end is not None}
    for v in vertex_list:
        if v not in touched:
            raise IsolatedVertex(f"vertex {v!r} has no incident edge")
    if not vertex_list:
        raise IsolatedVertex("graph has no vertices")

    seen = {vertex_list[0]}
    queue = deque(seen)
    while queue:
        v = queue.popleft()
        for w in adjacency[v]:
            if w not in seen:
                seen.add(w)
                queue.append(w)
    if len(seen) != len(vset):
        missing = sorted(vset - seen, key=id_key)
        raise Disconnected(f"vertices {missing!r} are not reachable from {vertex_list[0]!r}")

    u_min = min(e.length for e in edge_list)
    return MetricGraph(
        vertices=tuple(sorted(vertex_list, key=id_key)),
        edges=tuple(sorted(edge_list, key=lambda e: id_key(e.id))),
        u_min=u_min,
    )


def vertex_star(g: MetricGraph, v) -> VertexStar:
    """Edge-ends incident to ``v`` in canonical order (edge id, start before end)."""
    try:
        return g._stars[v]
    except KeyError:
        raise UnknownVertex(f"unknown vertex {v!r}") from None


def check_bounded_geometry(g: MetricGraph, u: float):
    """Return ``(ok, witness)``; ``witness`` is the first edge shorter than ``u``."""
    for e in g.edges:
        if e.length < u:
            return False, e
    return True, None


def degree_sum_identity(g: MetricGraph) -> bool:
    total = sum(vertex_star(g, v).degree for v in g.vertices)
    return total == 2 * len(g.finite_edges) + len(g.infinite_edges)


# small constructors used by the experiments and tests

def interval_graph(length: float, left="a", right="b", edge_id="e") -> MetricGraph:
    return build_graph(vertices=[left, right], edges=[(edge_id, length, left, right)])


def path_graph(lengths: Iterable[float]) -> MetricGraph:
    """Vertices ``v0 .. vn`` joined by edges ``e0 .. e(n-1)`` of the given lengths."""
    lengths = list(lengths)
    verts = [f"v{i}" for i in range(len(lengths) + 1)]
    edges = [(f"e{i:03d}", l, verts[i], verts[i + 1]) for i, l in enumerate(lengths)]
    return build_graph(vertices=verts, edges=edges)


def star_graph(n: int, leaf_length: float = 1.0, center="c") -> MetricGraph:
    """``n`` edges oriented outward from ``center`` to leaves ``l000 ..``."""
    leaves = [f"l{i:03d}" for i in range(n)]
    edges = [(f"e{i:03d}", leaf_length, center, leaves[i]) for i in range(n)]
    return build_graph(vertices=[center, *leaves], edges=edges)
