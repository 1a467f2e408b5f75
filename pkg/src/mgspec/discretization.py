"""Finite element discretization of the quadratic form on a metric graph.

Each edge carries a uniform P1 mesh with its own nodes; nothing is shared
between edges, so the discrete space is a subspace of the decoupled space
``W^{1,2}`` and vertex coupling enters only through the trace.  The form

    h[f] = |f'|^2 + sum_v <L_v tr_v f, tr_v f>

becomes ``A = K + T* L T`` on the subspace ``ran C = {x : P_v T_v x = 0}``.

A finite-difference "strong" operator is provided for identity checks, and
piecewise polynomials give exactly integrable test functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .conditions import check_BCS, to_lagrangian
from .errors import DimensionMismatch, MeshTooCoarse, MissingCondition, SolverBreakdown
from .graph import START, MetricGraph, vertex_star


@dataclass(frozen=True)
class EdgeMesh:
    edge: object
    length: float
    n: int
    truncated: bool = False

    @property
    def h(self) -> float:
        return self.length / (self.n - 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.length, self.n)


def default_truncation(g: MetricGraph) -> float:
    return 20.0 * g.u_min if math.isfinite(g.u_min) else 20.0


def build_meshes(g: MetricGraph, h_max: float, T_trunc: float | None = None) -> list[EdgeMesh]:
    """Uniform meshes with ``max(2, ceil(l / h_max) + 1)`` nodes per edge.

    Infinite edges are cut at ``T_trunc`` (default ``20 u_min``) and flagged.
    """
    if not h_max > 0:
        raise ValueError("h_max must be positive")
    if T_trunc is None:
        T_trunc = default_truncation(g)
    if g.infinite_edges and math.isfinite(g.u_min) and T_trunc < g.u_min:
        raise ValueError(f"truncation length {T_trunc} is below u_min = {g.u_min}")
    meshes = []
    for e in g.edges:
        length = T_trunc if e.is_infinite else e.length
        # guard against l / h_max landing a hair above an integer
        n = max(2, math.ceil(length / h_max - 1e-9) + 1)
        meshes.append(EdgeMesh(e.id, float(length), n, e.is_infinite))
    return meshes


@dataclass(frozen=True)
class TraceRow:
    vertex: object
    edge: object
    tag: str
    sign: int
    dof: int
    inner: tuple  # nodes moving inward from the vertex
    h: float


@dataclass(eq=False)
class DofMap:
    """Global numbering: the nodes of each edge are consecutive, edges in id order."""

    graph: MetricGraph
    meshes: list
    offsets: dict = field(init=False)
    n_dofs: int = field(init=False)
    rows: list = field(init=False)
    vertex_rows: dict = field(init=False)
    artificial_ends: list = field(init=False)

    def __post_init__(self):
        self.mesh_of = {m.edge: m for m in self.meshes}
        self.offsets = {}
        n = 0
        for e in self.graph.edges:
            self.offsets[e.id] = n
            n += self.mesh_of[e.id].n
        self.n_dofs = n
        self.rows = []
        self.vertex_rows = {}
        for v in self.graph.vertices:
            first = len(self.rows)
            for ee in vertex_star(self.graph, v).ends:
                m = self.mesh_of[ee.edge]
                off = self.offsets[ee.edge]
                if ee.tag == START:
                    dof, inner = off, (off + 1, off + 2, off + 3)
                else:
                    dof, inner = off + m.n - 1, (off + m.n - 2, off + m.n - 3, off + m.n - 4)
                inner = tuple(i for i in inner if off <= i < off + m.n)
                self.rows.append(TraceRow(v, ee.edge, ee.tag, ee.sign, dof, inner, m.h))
            self.vertex_rows[v] = slice(first, len(self.rows))
        self.artificial_ends = [self.offsets[m.edge] + m.n - 1 for m in self.meshes if m.truncated]

    @property
    def n_trace(self) -> int:
        return len(self.rows)

    def endpoint_dofs(self) -> np.ndarray:
        return np.array(sorted([r.dof for r in self.rows] + self.artificial_ends), dtype=int)

    def interior_dofs(self) -> np.ndarray:
        mask = np.ones(self.n_dofs, dtype=bool)
        mask[self.endpoint_dofs()] = False
        return np.flatnonzero(mask)

    def edge_slice(self, edge_id) -> slice:
        off = self.offsets[edge_id]
        return slice(off, off + self.mesh_of[edge_id].n)

    def trace_operator(self) -> sp.csr_matrix:
        n = self.n_trace
        return sp.csr_matrix((np.ones(n), (np.arange(n), [r.dof for r in self.rows])),
                             shape=(n, self.n_dofs))

    def derivative_operator(self) -> sp.csr_matrix:
        """Ingoing one-sided second-order derivative ``(-3 x0 + 4 x1 - x2) / (2h)``."""
        rows, cols, vals = [], [], []
        for i, r in enumerate(self.rows):
            if len(r.inner) < 2:
                raise MeshTooCoarse(f"edge {r.edge!r} needs at least 3 nodes for derivative traces")
            for dof, w in zip((r.dof, r.inner[0], r.inner[1]), (-3.0, 4.0, -1.0)):
                rows.append(i)
                cols.append(dof)
                vals.append(w / (2 * r.h))
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.n_trace, self.n_dofs))

    def sample(self, funcs) -> np.ndarray:
        """Nodal values of per-edge callables ``{edge_id: f(t)}``."""
        dtype = complex if any(np.iscomplexobj(f(np.zeros(1))) for f in funcs.values()) else float
        x = np.zeros(self.n_dofs, dtype=dtype)
        for m in self.meshes:
            if m.edge in funcs:
                x[self.edge_slice(m.edge)] = funcs[m.edge](m.nodes)
        return x


def _edge_matrices(meshes):
    """Block-diagonal P1 stiffness and consistent mass matrices."""
    K_blocks, M_blocks = [], []
    for m in meshes:
        n, h = m.n, m.h
        main = np.full(n, 2.0)
        main[[0, -1]] = 1.0
        off = np.ones(n - 1)
        K_blocks.append(sp.diags([-off / h, main / h, -off / h], [-1, 0, 1]))
        M_blocks.append(sp.diags([off * h / 6, main * h / 3, off * h / 6], [-1, 0, 1]))
    return sp.block_diag(K_blocks, format="csr"), sp.block_diag(M_blocks, format="csr")


@dataclass(eq=False)
class DiscreteProblem:
    graph: MetricGraph
    meshes: list
    conditions: dict
    dofs: DofMap
    K: sp.csr_matrix
    M: sp.csr_matrix
    T: sp.csr_matrix
    L_blk: sp.csr_matrix
    P_blk: sp.csr_matrix
    C: sp.csr_matrix
    S: float

    @property
    def A(self) -> sp.csr_matrix:
        return (self.K + self.T.T @ self.L_blk @ self.T).tocsr()

    @property
    def h_max(self) -> float:
        return max(m.h for m in self.meshes)

    @property
    def truncated(self) -> bool:
        return any(m.truncated for m in self.meshes)

    @property
    def n_reduced(self) -> int:
        return self.C.shape[1]

    def reduced(self):
        """``(C* A C, C* M C)``."""
        Ch = self.C.conj().T.tocsr()
        return (Ch @ self.A @ self.C).tocsc(), (Ch @ self.M @ self.C).tocsc()

    def form(self, x, y=None) -> complex:
        """``h[x, y] = <x', y'> + sum_v <L_v tr x, tr y>`` (conjugate-linear in ``y``)."""
        y = x if y is None else y
        return np.vdot(y, self.A @ x)

    def trace(self, x) -> np.ndarray:
        return trace_of(x, self)

    def at_vertex(self, vec, v) -> np.ndarray:
        return vec[self.dofs.vertex_rows[v]]


def _validate_conditions(g, conditions):
    for v in g.vertices:
        if v not in conditions:
            raise MissingCondition(f"no boundary condition for vertex {v!r}")
        d = vertex_star(g, v).degree
        if conditions[v].degree != d:
            raise DimensionMismatch(f"condition at {v!r} has size {conditions[v].degree}, vertex degree is {d}")


def assemble_form(g: MetricGraph, meshes, conditions) -> DiscreteProblem:
    """Stiffness, mass, trace and constraint matrices for ``(g, conditions)``."""
    _validate_conditions(g, conditions)
    dofs = DofMap(g, list(meshes))
    K, M = _edge_matrices(dofs.meshes)
    T = dofs.trace_operator()
    cplx = any(np.iscomplexobj(conditions[v].P) for v in g.vertices)
    dtype = complex if cplx else float

    L_blocks, P_blocks = [], []
    c_rows, c_cols, c_vals = [], [], []
    interior = dofs.interior_dofs()
    c_rows.extend(interior)
    c_cols.extend(range(len(interior)))
    c_vals.extend(np.ones(len(interior)))
    col = len(interior)
    for v in g.vertices:
        vc = conditions[v]
        L_blocks.append(sp.csr_matrix(vc.L.astype(dtype)))
        P_blocks.append(sp.csr_matrix(vc.P.astype(dtype)))
        _, Q = vc.bases()
        ends = [r.dof for r in dofs.rows[dofs.vertex_rows[v]]]
        for j in range(Q.shape[1]):
            for i, dof in enumerate(ends):
                if Q[i, j] != 0:
                    c_rows.append(dof)
                    c_cols.append(col)
                    c_vals.append(Q[i, j])
            col += 1
    C = sp.csr_matrix((np.asarray(c_vals, dtype=dtype), (c_rows, c_cols)), shape=(dofs.n_dofs, col))
    return DiscreteProblem(
        graph=g, meshes=dofs.meshes, conditions=dict(conditions), dofs=dofs,
        K=K, M=M, T=T,
        L_blk=sp.block_diag(L_blocks, format="csr"),
        P_blk=sp.block_diag(P_blocks, format="csr"),
        C=C, S=check_BCS(conditions),
    )


def trace_of(x, problem) -> np.ndarray:
    """Boundary values in global trace order (vertex, then canonical star order)."""
    dofs = problem.dofs if isinstance(problem, DiscreteProblem) else problem
    return np.asarray(x)[[r.dof for r in dofs.rows]]


def signed_derivative_trace_of(x, problem) -> np.ndarray:
    """Ingoing derivatives from one-sided second-order differences."""
    dofs = problem.dofs if isinstance(problem, DiscreteProblem) else problem
    return dofs.derivative_operator() @ np.asarray(x)


def dump_matrices(problem: DiscreteProblem, directory) -> list[Path]:
    """Write K, M, T, L, P, C and A as ``row col re im`` coordinate text files."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for name in ("K", "M", "T", "L_blk", "P_blk", "C", "A"):
        mat = sp.coo_matrix(getattr(problem, name))
        order = np.lexsort((mat.col, mat.row))
        path = directory / f"{name}.txt"
        with path.open("w") as fh:
            fh.write(f"# {mat.shape[0]} {mat.shape[1]}\n")
            for i in order:
                z = complex(mat.data[i])
                fh.write(f"{mat.row[i]} {mat.col[i]} {z.real:.17g} {z.imag:.17g}\n")
        written.append(path)
    return written


# strong operator

@dataclass(eq=False)
class StrongOperator:
    """``-f''`` by central differences on interior nodes.

    Endpoint values are not unknowns: ``extend`` solves the discrete vertex
    conditions (one-sided derivatives) for them, and truncation caps are 0.
    ``H`` maps interior values to ``-f''`` at interior nodes; ``H_full``
    adds endpoint rows from a one-sided second-order stencil.
    """

    problem: DiscreteProblem
    interior: np.ndarray
    extend: sp.csr_matrix
    H: sp.csr_matrix
    H_full: sp.csr_matrix

    def full(self, x_int) -> np.ndarray:
        return self.extend @ x_int

    def pairing(self, f_int, g_int) -> complex:
        """Mass-weighted ``<H f, g>``."""
        g = self.extend @ g_int
        return np.vdot(g, self.problem.M @ (self.H_full @ f_int))


def _second_difference(dofs: DofMap) -> sp.csr_matrix:
    rows, cols, vals = [], [], []
    for m in dofs.meshes:
        off, n, h2 = dofs.offsets[m.edge], m.n, m.h ** 2
        for k in range(1, n - 1):
            rows += [off + k] * 3
            cols += [off + k - 1, off + k, off + k + 1]
            vals += [-1 / h2, 2 / h2, -1 / h2]
        for end, step in ((off, 1), (off + n - 1, -1)):
            # -(2 x0 - 5 x1 + 4 x2 - x3) / h^2
            rows += [end] * 4
            cols += [end + j * step for j in range(4)]
            vals += [-2 / h2, 5 / h2, -4 / h2, 1 / h2]
    return sp.csr_matrix((vals, (rows, cols)), shape=(dofs.n_dofs, dofs.n_dofs))


def assemble_strong(problem: DiscreteProblem) -> StrongOperator:
    dofs = problem.dofs
    if any(m.n < 4 for m in dofs.meshes):
        raise MeshTooCoarse("the strong operator needs at least 4 nodes per edge")
    interior = dofs.interior_dofs()
    pos = np.full(dofs.n_dofs, -1)
    pos[interior] = np.arange(len(interior))
    dtype = problem.C.dtype
    rows = list(interior)
    cols = list(range(len(interior)))
    vals = [1.0] * len(interior)
    for v in problem.graph.vertices:
        vc = problem.conditions[v]
        vrows = dofs.rows[dofs.vertex_rows[v]]
        Pb, W = vc.bases()
        scale = np.array([3.0 / (2 * r.h) for r in vrows])
        # P e = 0 and W*(L e - str) = 0 with str = (-3 e + 4 a - b) / (2h)
        BE = np.vstack([Pb.conj().T, W.conj().T @ (vc.L + np.diag(scale))]) if W.size else Pb.conj().T
        if np.linalg.cond(BE) > 1e12:
            raise SolverBreakdown(f"discrete vertex condition at {v!r} is singular at this mesh width")
        BEinv = np.linalg.inv(BE)
        for i, r in enumerate(vrows):
            for nb, w in ((r.inner[0], 4.0), (r.inner[1], -1.0)):
                rhs = np.zeros(len(vrows), dtype=BEinv.dtype)
                if W.size:
                    rhs[Pb.shape[1]:] = W.conj().T[:, i] * w / (2 * r.h)
                coef = BEinv @ rhs
                for j, rr in enumerate(vrows):
                    if coef[j] != 0:
                        rows.append(rr.dof)
                        cols.append(pos[nb])
                        vals.append(coef[j])
    vals = np.asarray(vals)
    if dtype != complex:
        vals = vals.real
    extend = sp.csr_matrix((vals, (rows, cols)), shape=(dofs.n_dofs, len(interior)))
    D2 = _second_difference(dofs)
    H_full = (D2 @ extend).tocsr()
    return StrongOperator(problem, interior, extend, H_full[interior].tocsr(), H_full)


# piecewise polynomials

def hermite_cubic(a, b, c, d, length) -> np.polynomial.Polynomial:
    """Cubic with ``p(0) = a, p'(0) = b, p(l) = c, p'(l) = d``."""
    l = length
    return np.polynomial.Polynomial([
        a,
        b,
        -((2 * b + d) / l + 3 * (a - c) / l ** 2),
        2 * (a - c) / l ** 3 + (b + d) / l ** 2,
    ])


@dataclass(eq=False)
class PiecewisePolynomial:
    """One polynomial per edge on ``[0, effective length]``."""

    dofs: DofMap
    pieces: dict

    def sample(self) -> np.ndarray:
        return self.dofs.sample(self.pieces)

    def derivative(self, m=1) -> "PiecewisePolynomial":
        return PiecewisePolynomial(self.dofs, {e: p.deriv(m) for e, p in self.pieces.items()})

    def trace(self) -> np.ndarray:
        return np.array([self.pieces[r.edge](0.0 if r.tag == START else self.dofs.mesh_of[r.edge].length)
                         for r in self.dofs.rows])

    def signed_derivative_trace(self) -> np.ndarray:
        d = self.derivative()
        return np.array([r.sign * d.pieces[r.edge](0.0 if r.tag == START else self.dofs.mesh_of[r.edge].length)
                         for r in self.dofs.rows])

    def inner(self, other, edge=None) -> complex:
        """``sum_e int f_e conj(g_e)`` by Gauss-Legendre on every mesh element.

        Four points per element integrate degree 7 exactly, which covers
        products of cubics.
        """
        xg, wg = np.polynomial.legendre.leggauss(4)
        total = 0.0
        edges = [edge] if edge is not None else list(self.pieces)
        for e in edges:
            m = self.dofs.mesh_of[e]
            left = m.nodes[:-1]
            t = (left[:, None] + m.h * (xg[None, :] + 1) / 2).ravel()
            w = np.tile(wg * m.h / 2, len(left))
            total = total + np.sum(w * self.pieces[e](t) * np.conj(other.pieces[e](t)))
        return total

    def norm2(self, edge=None) -> float:
        return float(np.real(self.inner(self, edge)))


def random_piecewise_cubic(dofs: DofMap, rng, complex_=True) -> PiecewisePolynomial:
    """Random cubic per edge; truncation caps get zero value and derivative."""
    pieces = {}
    for m in dofs.meshes:
        z = rng.standard_normal(4) + (1j * rng.standard_normal(4) if complex_ else 0)
        a, b, c, d = z
        if m.truncated:
            c = d = 0
        pieces[m.edge] = hermite_cubic(a, b, c, d, m.length)
    return PiecewisePolynomial(dofs, pieces)


def random_domain_cubic(problem: DiscreteProblem, rng, complex_=True) -> PiecewisePolynomial:
    """Random piecewise cubic satisfying every vertex condition exactly.

    Boundary data ``(tr_v, str_v)`` is drawn from the Lagrangian subspace of
    each vertex, then each edge gets the Hermite cubic matching it.
    """
    dofs = problem.dofs
    x = np.zeros(dofs.n_trace, dtype=complex)
    y = np.zeros(dofs.n_trace, dtype=complex)
    for v in problem.graph.vertices:
        G = to_lagrangian(problem.conditions[v]).basis
        d = G.shape[1]
        z = rng.standard_normal(d) + (1j * rng.standard_normal(d) if complex_ else 0)
        xy = G @ z
        sl = dofs.vertex_rows[v]
        x[sl], y[sl] = xy[:d], xy[d:]
    if not complex_:
        x, y = x.real, y.real
    ends = {}
    for i, r in enumerate(dofs.rows):
        # convert ingoing derivative to d/dt
        ends[(r.edge, r.tag)] = (x[i], r.sign * y[i])
    pieces = {}
    for m in dofs.meshes:
        a, b = ends[(m.edge, "start")]
        c, d = ends.get((m.edge, "end"), (0.0, 0.0))
        pieces[m.edge] = hermite_cubic(a, b, c, d, m.length)
    return PiecewisePolynomial(dofs, pieces)


# cubic boundary matching

def extension_support(g: MetricGraph, v, dofs: DofMap | None = None) -> float:
    lengths = [(dofs.mesh_of[ee.edge].length if dofs else g.edge(ee.edge).length)
               for ee in vertex_star(g, v).ends]
    u = g.u_min if math.isfinite(g.u_min) else min(lengths)
    return min(u / 2, min(lengths) / 2)


def cubic_extension(x, y, v, problem) -> np.ndarray:
    """DOF vector with boundary data ``(x, y)`` at ``v``, supported near ``v``.

    On each incident edge-end a cubic in the inward coordinate matches the
    value and ingoing derivative at the vertex and vanishes to first order
    at distance ``s``; elsewhere the result is zero.
    """
    dofs = problem.dofs if isinstance(problem, DiscreteProblem) else problem
    g = dofs.graph
    s = extension_support(g, v, dofs)
    rows = dofs.rows[dofs.vertex_rows[v]]
    x = np.asarray(x)
    y = np.asarray(y)
    out = np.zeros(dofs.n_dofs, dtype=np.result_type(x, y, float))
    for i, r in enumerate(rows):
        m = dofs.mesh_of[r.edge]
        p = hermite_cubic(x[i], y[i], 0.0, 0.0, s)
        t = m.nodes
        tau = t if r.tag == START else m.length - t
        inside = tau <= s
        sl = dofs.edge_slice(r.edge)
        seg = out[sl]
        seg[inside] += p(tau[inside])
        out[sl] = seg
    return out


def discrete_w22_norm(x, problem) -> float:
    """``(|f|^2 + |f'|^2 + |f''|^2)^(1/2)`` from nodal values, trapezoid weights."""
    dofs = problem.dofs if isinstance(problem, DiscreteProblem) else problem
    total = 0.0
    for m in dofs.meshes:
        f = np.asarray(x)[dofs.edge_slice(m.edge)]
        h = m.h
        w = np.full(m.n, h)
        w[[0, -1]] = h / 2
        d1 = np.gradient(f, h, edge_order=2)
        d2 = np.gradient(d1, h, edge_order=2)
        total += np.sum(w * (np.abs(f) ** 2 + np.abs(d1) ** 2 + np.abs(d2) ** 2))
    return math.sqrt(total)


def vertex_continuous_multiplier(problem, values: dict, rng=None) -> np.ndarray:
    """Nodal function equal to ``values[v]`` on every edge-end at ``v``.

    Between the ends each edge interpolates linearly with a random bump, so
    the function is generally not constant along edges.
    """
    dofs = problem.dofs
    ends = {(r.edge, r.tag): values[r.vertex] for r in dofs.rows}
    phi = np.zeros(dofs.n_dofs, dtype=complex)
    for m in dofs.meshes:
        t = m.nodes / m.length
        a = ends[(m.edge, "start")]
        b = ends.get((m.edge, "end"), 0.0)
        bump = rng.standard_normal() if rng is not None else 0.0
        phi[dofs.edge_slice(m.edge)] = a * (1 - t) + b * t + bump * t * (1 - t)
    return phi


__all__ = [
    "EdgeMesh", "DofMap", "DiscreteProblem", "StrongOperator", "PiecewisePolynomial",
    "build_meshes", "assemble_form", "assemble_strong", "trace_of", "signed_derivative_trace_of",
    "cubic_extension", "hermite_cubic", "random_piecewise_cubic", "random_domain_cubic",
    "discrete_w22_norm", "dump_matrices", "default_truncation",
]
