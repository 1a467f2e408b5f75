"""Random instances for property checks and the certificate suite."""

from __future__ import annotations

import numpy as np

from .conditions import ABCondition, VertexCondition, hermitian_part
from .graph import MetricGraph, build_graph, vertex_star


def _gaussian(rng, shape, complex_):
    z = rng.standard_normal(shape)
    if complex_:
        z = z + 1j * rng.standard_normal(shape)
    return z


def random_unitary(d, rng, complex_=True):
    q, r = np.linalg.qr(_gaussian(rng, (d, d), complex_))
    ph = np.diag(r)
    return q * (ph / np.abs(ph))


def random_condition(d, rng, complex_=True, spectrum=(-3.0, 3.0), rank=None) -> VertexCondition:
    """Random projection of random rank and a Hermitian L on its complement.

    The eigenvalues of L on ``ran(1 - P)`` are uniform in ``spectrum``.
    """
    if rank is None:
        rank = int(rng.integers(0, d + 1))
    U = random_unitary(d, rng, complex_)
    Pb, W = U[:, :rank], U[:, rank:]
    mu = rng.uniform(*spectrum, size=d - rank)
    P = hermitian_part(Pb @ Pb.conj().T)
    L = hermitian_part((W * mu) @ W.conj().T)
    return VertexCondition(P, L)


def random_ab_pair(d, rng, complex_=True, variant=None) -> ABCondition:
    """Random self-adjoint ``(A, B)`` with ``A B*`` Hermitian and full rank.

    Either ``A = M (U - I), B = i M (U + I)`` for a unitary ``U`` (some
    eigenvalues pinned at -1 so that ``ker B`` is nontrivial), or
    ``A = M (P - L), B = M (1 - P)`` from a random ``(P, L)``.  ``M`` is a
    random invertible matrix.
    """
    if variant is None:
        variant = "unitary" if complex_ and rng.random() < 0.5 else "projection"
    M = _gaussian(rng, (d, d), complex_) + 2 * np.eye(d)
    if variant == "unitary":
        V = random_unitary(d, rng, True)
        theta = rng.uniform(-np.pi, np.pi, size=d)
        pinned = rng.integers(0, d + 1)
        theta[:pinned] = np.pi
        U = (V * np.exp(1j * theta)) @ V.conj().T
        A0, B0 = U - np.eye(d), 1j * (U + np.eye(d))
    else:
        vc = random_condition(d, rng, complex_)
        A0, B0 = vc.P - vc.L, np.eye(d) - vc.P
    return ABCondition(M @ A0, M @ B0)


def random_graph(rng, max_edges=10, length_range=(1.0, 3.0), allow_loops=True) -> MetricGraph:
    """Connected multigraph: random spanning tree plus random extra edges."""
    m = int(rng.integers(1, max_edges + 1))
    n_vertices = int(rng.integers(1 if allow_loops else 2, m + 2))
    n_vertices = min(n_vertices, m + 1)
    if n_vertices == 1 and not allow_loops:
        n_vertices = 2
    verts = [f"v{i:02d}" for i in range(n_vertices)]
    edges = []
    for i in range(1, n_vertices):
        j = int(rng.integers(0, i))
        edges.append((verts[j], verts[i]) if rng.random() < 0.5 else (verts[i], verts[j]))
    while len(edges) < max(m, n_vertices - 1):
        a, b = rng.integers(0, n_vertices, size=2)
        if a == b and not allow_loops:
            continue
        edges.append((verts[a], verts[b]))
    lengths = rng.uniform(*length_range, size=len(edges))
    return build_graph(vertices=verts, edges=[
        (f"e{k:02d}", float(l), a, b) for k, ((a, b), l) in enumerate(zip(edges, lengths))
    ])


def random_conditions(g: MetricGraph, rng, complex_=True, spectrum=(-3.0, 3.0)) -> dict:
    return {
        v: random_condition(vertex_star(g, v).degree, rng, complex_, spectrum).with_vertex(v)
        for v in g.vertices
    }
