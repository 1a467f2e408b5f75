import math

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings, strategies as st

from mgspec.conditions import make_delta, make_dirichlet, make_kirchhoff, make_neumann, make_robin
from mgspec.discretization import (
    PiecewisePolynomial,
    assemble_form,
    assemble_strong,
    build_meshes,
    cubic_extension,
    discrete_w22_norm,
    dump_matrices,
    hermite_cubic,
    random_domain_cubic,
    random_piecewise_cubic,
    signed_derivative_trace_of,
    trace_of,
    vertex_continuous_multiplier,
)
from mgspec.errors import DimensionMismatch, MeshTooCoarse, MissingCondition
from mgspec.graph import build_graph, interval_graph, path_graph
from mgspec.sampling import random_conditions, random_graph


def interval_problem(left, right, h_max=0.1, length=1.0):
    g = interval_graph(length)
    return assemble_form(g, build_meshes(g, h_max), {"a": left, "b": right})


def test_mesh_sizes():
    g = interval_graph(1.0)
    (m,) = build_meshes(g, 0.5)
    np.testing.assert_allclose(m.nodes, [0, 0.5, 1])
    assert build_meshes(g, 1e-3)[0].n == 1001
    g = build_graph(vertices=["o"], edges=[("e", "inf", "o")])
    (m,) = build_meshes(g, 0.01, T_trunc=20.0)
    assert m.truncated and m.length == 20.0 and m.n == 2001 and m.h <= 0.01


def test_mesh_width_bound():
    g = path_graph([0.37, 1.0, 2.9])
    for m in build_meshes(g, 0.07):
        assert m.h <= 0.07 + 1e-15
        assert np.all(np.diff(m.nodes) > 0)


def test_dirichlet_interval_removes_endpoints():
    p = interval_problem(make_dirichlet(1), make_dirichlet(1))
    n = p.dofs.n_dofs
    assert p.n_reduced == n - 2
    assert np.all(p.T @ p.C.toarray() == 0)
    Ar, _ = p.reduced()
    np.testing.assert_allclose(Ar.toarray(), p.K.toarray()[1:-1, 1:-1])


def test_neumann_interval_is_unconstrained():
    p = interval_problem(make_neumann(1), make_neumann(1))
    assert p.n_reduced == p.dofs.n_dofs
    assert p.L_blk.nnz == 0
    np.testing.assert_allclose(abs(p.C.toarray()).sum(axis=0), 1)
    np.testing.assert_allclose((p.A - p.K).toarray(), 0)


def test_kirchhoff_split_identifies_endpoints():
    g = path_graph([0.5, 0.5])
    conds = {"v0": make_dirichlet(1), "v1": make_kirchhoff(2), "v2": make_dirichlet(1)}
    p = assemble_form(g, build_meshes(g, 0.1), conds)
    sl = p.dofs.vertex_rows["v1"]
    block = (p.T @ p.C).toarray()[sl]
    cols = np.flatnonzero(np.abs(block).sum(axis=0))
    assert len(cols) == 1
    v = block[:, cols[0]]
    np.testing.assert_allclose(abs(v), 1 / math.sqrt(2))
    assert v[0] == pytest.approx(v[1])


def test_missing_and_mismatched_conditions():
    g = interval_graph(1.0)
    with pytest.raises(MissingCondition):
        assemble_form(g, build_meshes(g, 0.1), {"a": make_dirichlet(1)})
    with pytest.raises(DimensionMismatch):
        assemble_form(g, build_meshes(g, 0.1), {"a": make_dirichlet(1), "b": make_kirchhoff(2)})


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), complex_=st.booleans())
def test_problem_invariants(seed, complex_):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, max_edges=6)
    p = assemble_form(g, build_meshes(g, 0.2), random_conditions(g, rng, complex_))
    K, M, A = p.K.toarray(), p.M.toarray(), p.A.toarray()
    assert np.array_equal(K, K.T) and np.array_equal(M, M.T)
    assert np.abs(A - A.conj().T).max() <= 1e-12
    assert np.linalg.eigvalsh(M).min() > 0
    assert np.linalg.eigvalsh(K).min() > -1e-10
    T = p.T.toarray()
    assert np.all(T.sum(axis=1) == 1) and set(np.unique(T)) <= {0.0, 1.0}
    C = p.C.toarray()
    np.testing.assert_allclose(C.conj().T @ C, np.eye(C.shape[1]), atol=1e-12)
    assert np.abs(p.P_blk @ (p.T @ C)).max() <= 1e-12
    _, Mr = p.reduced()
    assert np.linalg.eigvalsh(Mr.toarray()).min() > 0


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_vertex_continuous_multiplier_keeps_constraints(seed):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, max_edges=6)
    p = assemble_form(g, build_meshes(g, 0.2), random_conditions(g, rng, True))
    x = p.C @ (rng.standard_normal(p.n_reduced) + 1j * rng.standard_normal(p.n_reduced))
    values = {v: complex(*rng.standard_normal(2)) for v in g.vertices}
    phi = vertex_continuous_multiplier(p, values, rng)
    assert np.abs(p.P_blk @ (p.T @ (phi * x))).max() <= 1e-12


def test_traces_of_simple_functions():
    g = interval_graph(1.0)
    p = assemble_form(g, build_meshes(g, 0.1), {"a": make_neumann(1), "b": make_neumann(1)})
    t = p.meshes[0].nodes
    np.testing.assert_allclose(trace_of(np.ones_like(t), p), [1, 1])
    np.testing.assert_allclose(signed_derivative_trace_of(np.ones_like(t), p), [0, 0], atol=1e-12)
    np.testing.assert_allclose(trace_of(t, p), [0, 1])
    np.testing.assert_allclose(signed_derivative_trace_of(t, p), [1, -1])
    d = signed_derivative_trace_of(t ** 2, p)
    assert abs(d[0]) < 1e-12
    assert d[1] == pytest.approx(-2.0)


def test_derivative_trace_needs_three_nodes():
    g = interval_graph(1.0)
    p = assemble_form(g, build_meshes(g, 1.0), {"a": make_neumann(1), "b": make_neumann(1)})
    with pytest.raises(MeshTooCoarse):
        signed_derivative_trace_of(np.zeros(2), p)


def test_strong_dirichlet_closed_form():
    N = 50
    p = interval_problem(make_dirichlet(1), make_dirichlet(1), h_max=1 / N)
    H = assemble_strong(p).H.toarray()
    ev = np.sort(np.linalg.eigvalsh(H))
    k = np.arange(1, N)
    np.testing.assert_allclose(ev, 2 * N ** 2 * (1 - np.cos(k * math.pi / N)), rtol=1e-12)


def test_strong_needs_four_nodes():
    p = interval_problem(make_dirichlet(1), make_dirichlet(1), h_max=0.5)
    with pytest.raises(MeshTooCoarse):
        assemble_strong(p)


def test_strong_extension_satisfies_discrete_robin():
    p = interval_problem(make_robin(2.0), make_robin(-1.0), h_max=0.05)
    so = assemble_strong(p)
    x = so.full(np.random.default_rng(1).standard_normal(len(so.interior)))
    tr, dtr = trace_of(x, p), signed_derivative_trace_of(x, p)
    np.testing.assert_allclose(dtr, [2.0 * tr[0], -1.0 * tr[1]], atol=1e-10)


def test_hermite_cubic_matches_endpoint_data():
    p = hermite_cubic(1.0, 0.0, 0.0, 0.0, 1.0)
    np.testing.assert_allclose(p.coef, [1, 0, -3, 2])
    rng = np.random.default_rng(3)
    a, b, c, d = rng.standard_normal(4)
    q = hermite_cubic(a, b, c, d, 1.7)
    dq = q.deriv()
    np.testing.assert_allclose([q(0), dq(0), q(1.7), dq(1.7)], [a, b, c, d], atol=1e-12)


def test_quadrature_matches_symbolic_integration():
    rng = np.random.default_rng(5)
    g = random_graph(rng, max_edges=6)
    p = assemble_form(g, build_meshes(g, 0.3), random_conditions(g, rng))
    f = random_piecewise_cubic(p.dofs, rng)
    h = random_piecewise_cubic(p.dofs, rng)
    expected = 0
    for e, pe in f.pieces.items():
        prod = pe * np.polynomial.Polynomial(np.conj(h.pieces[e].coef))
        integral = prod.integ()
        expected += integral(p.dofs.mesh_of[e].length) - integral(0)
    assert abs(f.inner(h) - expected) < 1e-10 * max(1, abs(expected))


def test_domain_cubic_satisfies_conditions():
    rng = np.random.default_rng(7)
    g = random_graph(rng, max_edges=8)
    conds = random_conditions(g, rng)
    p = assemble_form(g, build_meshes(g, 0.3), conds)
    f = random_domain_cubic(p, rng)
    tr, st_ = f.trace(), f.signed_derivative_trace()
    for v in g.vertices:
        sl = p.dofs.vertex_rows[v]
        res = conds[v].residual(tr[sl], st_[sl])
        assert max(res) < 1e-10


def _smooth_domain_function(p, rng):
    # cubics alone make the P1 identity exact in the interior; add a bump
    # vanishing to first order at both ends
    x = random_domain_cubic(p, rng).sample()
    for m in p.meshes:
        t = m.nodes
        c = complex(*rng.standard_normal(2))
        x[p.dofs.edge_slice(m.edge)] += c * np.sin(math.pi * t / m.length) ** 2 * np.cos(3 * t)
    return x


def _consistency_defect(g, conds, h, seed, count=4):
    """Frobenius norm of the defect matrix over ``count`` domain functions.

    Single pairs can have a small leading coefficient; the aggregate shows
    the order cleanly.
    """
    p = assemble_form(g, build_meshes(g, h), conds)
    so = assemble_strong(p)
    rng = np.random.default_rng(seed)
    fs = [_smooth_domain_function(p, rng)[so.interior] for _ in range(count)]
    D = np.array([[so.pairing(f, q) - p.form(so.full(f), so.full(q)) for q in fs] for f in fs])
    return np.linalg.norm(D)


@pytest.mark.parametrize("seed", range(5))
def test_form_operator_consistency_is_second_order(seed):
    rng = np.random.default_rng(100 + seed)
    g = path_graph([1.0, 1.5])
    conds = random_conditions(g, rng, True, spectrum=(-1, 1))
    d1 = _consistency_defect(g, conds, 0.004, seed)
    d2 = _consistency_defect(g, conds, 0.002, seed)
    assert d1 / d2 == pytest.approx(4.0, rel=0.2)


def test_cubic_extension_examples():
    g = interval_graph(2.0)
    p = assemble_form(g, build_meshes(g, 0.01), {"a": make_neumann(1), "b": make_neumann(1)})
    assert not np.any(cubic_extension([0.0], [0.0], "a", p))
    x = cubic_extension([1.0], [0.0], "a", p)
    t = p.meshes[0].nodes
    np.testing.assert_allclose(x, np.where(t <= 1, 1 - 3 * t ** 2 + 2 * t ** 3, 0), atol=1e-14)


def test_cubic_extension_recovers_boundary_data():
    rng = np.random.default_rng(11)
    g = path_graph([1.0, 1.2, 2.0])
    conds = {"v0": make_neumann(1), "v1": make_delta(1.0, 2), "v2": make_kirchhoff(2), "v3": make_neumann(1)}
    errs = []
    for h in (0.01, 0.005):
        p = assemble_form(g, build_meshes(g, h), conds)
        sl = p.dofs.vertex_rows["v1"]
        x, y = rng.standard_normal(2), rng.standard_normal(2)
        f = cubic_extension(x, y, "v1", p)
        np.testing.assert_allclose(trace_of(f, p)[sl], x, atol=1e-14)
        errs.append(np.abs(signed_derivative_trace_of(f, p)[sl] - y).max() / np.abs(y).max())
    assert errs[1] < errs[0] / 3 and errs[1] < 1e-3


def test_cubic_extension_norm_grows_as_support_shrinks():
    rng = np.random.default_rng(13)
    constants = []
    for length in (4.0, 2.0, 1.0, 0.5):
        g = interval_graph(length)
        p = assemble_form(g, build_meshes(g, length / 400), {"a": make_neumann(1), "b": make_neumann(1)})
        ratios = []
        for _ in range(50):
            x, y = rng.standard_normal(1), rng.standard_normal(1)
            f = cubic_extension(x, y, "a", p)
            ratios.append(discrete_w22_norm(f, p) / (np.linalg.norm(x) + np.linalg.norm(y)))
        constants.append(max(ratios))
    assert all(a < b for a, b in zip(constants, constants[1:]))


def test_dump_matrices(tmp_path):
    p = interval_problem(make_robin(1.0), make_dirichlet(1), h_max=0.5)
    paths = dump_matrices(p, tmp_path)
    assert {q.name for q in paths} >= {"K.txt", "M.txt", "A.txt", "C.txt"}
    lines = (tmp_path / "K.txt").read_text().splitlines()
    assert lines[0] == "# 3 3"
    r, c, re, im = lines[1].split()
    assert (int(r), int(c), float(re), float(im)) == (0, 0, 2.0, 0.0)


def test_dense_pencil_eigenvalues_robin():
    from mgspec.secular import robin_interval_eigenvalues
    p = interval_problem(make_robin(1.0), make_robin(1.0), h_max=2e-3)
    A, M = p.reduced()
    ev = sla.eigh(A.toarray(), M.toarray(), eigvals_only=True, subset_by_index=[0, 2])
    np.testing.assert_allclose(ev, robin_interval_eigenvalues(1.0, 1.0, 3), rtol=1e-4)


def test_piecewise_polynomial_derivative_trace_sign():
    g = interval_graph(1.0)
    p = assemble_form(g, build_meshes(g, 0.5), {"a": make_neumann(1), "b": make_neumann(1)})
    f = PiecewisePolynomial(p.dofs, {"e": np.polynomial.Polynomial([0, 1])})
    np.testing.assert_allclose(f.trace(), [0, 1])
    np.testing.assert_allclose(f.signed_derivative_trace(), [1, -1])
