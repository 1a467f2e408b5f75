import math

import numpy as np
import pytest

from mgspec.analysis import (
    bounded_L_example_check,
    certificate_bound,
    delta_prime_truncation_experiment,
    delta_truncation_experiment,
    greens_defect,
    greens_identity_suite,
    kirchhoff_transparency_test,
    lower_bound_certificate,
    oracle_agreement,
    solve_graph,
    spectrum,
    trace_inequality_suite,
)
from mgspec.conditions import (
    make_delta,
    make_delta_prime,
    make_dirichlet,
    make_kirchhoff,
    make_neumann,
    make_robin,
)
from mgspec.discretization import DofMap, PiecewisePolynomial, assemble_form, build_meshes, hermite_cubic
from mgspec.errors import KTooLarge, ZeroAlpha
from mgspec.graph import build_graph, interval_graph, star_graph
from mgspec.sampling import random_conditions, random_graph
from mgspec.secular import interval_eigenvalues, robin_interval_eigenvalues, star_delta_eigenvalues

DIRICHLET = {"a": make_dirichlet(1), "b": make_dirichlet(1)}


def p1_dirichlet_eigenvalues(N, k):
    # P1 elements with consistent mass on a uniform mesh of [0, 1]
    theta = np.arange(1, k + 1) * math.pi / N
    return 6 * N ** 2 * (1 - np.cos(theta)) / (2 + np.cos(theta))


def test_dirichlet_interval_spectrum():
    _, rep = solve_graph(interval_graph(1.0), DIRICHLET, 1e-3, 5)
    exact = (np.arange(1, 6) * math.pi) ** 2
    assert np.all(np.abs(rep.eigenvalues - exact) / exact <= 1e-4)
    np.testing.assert_allclose(rep.eigenvalues, p1_dirichlet_eigenvalues(1000, 5), rtol=1e-9)
    assert np.all(np.diff(rep.eigenvalues) > 0)


def test_neumann_interval_spectrum():
    _, rep = solve_graph(interval_graph(1.0), {"a": make_neumann(1), "b": make_neumann(1)}, 1e-3, 5)
    assert abs(rep.eigenvalues[0]) <= 1e-8
    exact = (np.arange(1, 5) * math.pi) ** 2
    assert np.all(np.abs(rep.eigenvalues[1:] - exact) / exact <= 1e-4)


def test_robin_interval_matches_secular_roots():
    g = interval_graph(1.0)
    _, rep = solve_graph(g, {"a": make_robin(1.0), "b": make_robin(1.0)}, 1e-3, 3)
    oracle = robin_interval_eigenvalues(1.0, 1.0, 3)
    assert np.all(np.abs(rep.eigenvalues - oracle) / oracle <= 1e-4)


def test_second_order_mesh_convergence():
    exact = (np.arange(1, 6) * math.pi) ** 2
    errs = []
    for h in (1e-2, 5e-3):
        _, rep = solve_graph(interval_graph(1.0), DIRICHLET, h, 5)
        errs.append(np.abs(rep.eigenvalues - exact) / exact)
    np.testing.assert_allclose(errs[0] / errs[1], 4.0, rtol=0.2)


def test_dense_and_shift_invert_agree():
    rng = np.random.default_rng(4)
    g = random_graph(rng, max_edges=5)
    p = assemble_form(g, build_meshes(g, 0.02), random_conditions(g, rng, True))
    dense = spectrum(p, 6, dense_limit=10 ** 6)
    sparse = spectrum(p, 6, dense_limit=0)
    assert dense.method == "dense" and sparse.method == "shift-invert"
    np.testing.assert_allclose(sparse.eigenvalues, dense.eigenvalues, rtol=1e-9, atol=1e-9)


def test_spectrum_is_deterministic():
    rng = np.random.default_rng(8)
    g = random_graph(rng, max_edges=5)
    conds = random_conditions(g, rng, True)
    p = assemble_form(g, build_meshes(g, 0.005), conds)
    a = spectrum(p, 4)
    b = spectrum(assemble_form(g, build_meshes(g, 0.005), conds), 4)
    assert a.method == "shift-invert"
    assert np.array_equal(a.eigenvalues, b.eigenvalues)


def test_k_too_large():
    p = assemble_form(interval_graph(1.0), build_meshes(interval_graph(1.0), 0.25), DIRICHLET)
    with pytest.raises(KTooLarge):
        spectrum(p, 4)


def test_eigenvectors_satisfy_constraints():
    rng = np.random.default_rng(9)
    g = random_graph(rng, max_edges=5)
    p = assemble_form(g, build_meshes(g, 0.05), random_conditions(g, rng, True))
    rep = spectrum(p, 3)
    assert np.abs(p.P_blk @ (p.T @ rep.vectors)).max() < 1e-12
    gram = rep.vectors.conj().T @ (p.M @ rep.vectors)
    np.testing.assert_allclose(gram, np.eye(3), atol=1e-10)


def test_certificate_kirchhoff_graph():
    g = star_graph(3)
    conds = {v: make_neumann(1) for v in g.vertices}
    conds["c"] = make_kirchhoff(3)
    _, rep = solve_graph(g, conds, 0.01, 2)
    cert = lower_bound_certificate(g, conds, rep)
    assert cert.S == 0 and cert.bound == 0
    assert cert.passed and rep.lambda_min >= -1e-8


def test_certificate_double_robin():
    g = interval_graph(1.0)
    conds = {"a": make_robin(-4.0), "b": make_robin(-4.0)}
    _, rep = solve_graph(g, conds, 1e-3, 2)
    cert = lower_bound_certificate(g, conds, rep)
    assert (cert.S, cert.epsilon, cert.bound) == (4.0, 0.125, -128.0)
    oracle = robin_interval_eigenvalues(-4.0, 1.0, 1)[0]
    assert rep.lambda_min == pytest.approx(oracle, rel=1e-4)
    assert cert.passed and oracle >= cert.bound


def test_certificate_delta_star():
    g = star_graph(3)
    conds = {v: make_dirichlet(1) for v in g.vertices}
    conds["c"] = make_delta(-4.0, 3)
    _, rep = solve_graph(g, conds, 1e-3, 1)
    cert = lower_bound_certificate(g, conds, rep)
    assert cert.S == pytest.approx(4 / 3)
    assert cert.epsilon == pytest.approx(3 / 8)
    assert cert.bound == pytest.approx(-128 / 9)
    oracle = star_delta_eigenvalues(-4.0, 3, 1.0, 1)[0]
    assert rep.lambda_min == pytest.approx(oracle, rel=1e-4)
    assert cert.passed


def test_certificate_bound_formula():
    assert certificate_bound(0.0, 2.0) == (2.0, 0.0)
    assert certificate_bound(1.0, 2.0) == (0.5, -8.0)
    assert certificate_bound(0.1, 2.0) == (2.0, pytest.approx(-0.2))


@pytest.mark.parametrize("s", [0.5, 2.0])
def test_scaling_of_robin_family(s):
    alpha, length = 1.5, 1.0
    base = robin_interval_eigenvalues(alpha, length, 3)
    scaled = robin_interval_eigenvalues(alpha / s, length * s, 3)
    np.testing.assert_allclose(scaled, base / s ** 2, rtol=1e-10)
    g = interval_graph(length * s)
    _, rep = solve_graph(g, {"a": make_robin(alpha / s), "b": make_robin(alpha / s)}, 1e-3 * s, 3)
    np.testing.assert_allclose(rep.eigenvalues, base / s ** 2, rtol=1e-4)


def test_greens_suite_on_ten_edge_graph():
    rng = np.random.default_rng(21)
    g = random_graph(rng, max_edges=10)
    while len(g.edges) < 10:
        g = random_graph(rng, max_edges=10)
    meshes = build_meshes(g, 0.1)
    rep = greens_identity_suite(g, meshes, conditions=random_conditions(g, rng, True))
    assert rep.passed and rep.max_defect <= 1e-8 and rep.domain_defect <= 1e-8


def test_greens_defect_trivial_cases():
    g = interval_graph(1.0)
    dofs = DofMap(g, build_meshes(g, 0.1))
    rng = np.random.default_rng(0)
    f = PiecewisePolynomial(dofs, {"e": hermite_cubic(*rng.standard_normal(4), 1.0)})
    assert abs(greens_defect(f, f)) < 1e-12
    # zero value and derivative at both ends: boundary form vanishes, so must the bulk side
    bump = PiecewisePolynomial(dofs, {"e": np.polynomial.Polynomial([0, 0, 1, -2, 1])})
    q = PiecewisePolynomial(dofs, {"e": hermite_cubic(*(rng.standard_normal(4) + 1j * rng.standard_normal(4)), 1.0)})
    bulk = q.inner(bump.derivative(2)) - q.derivative(2).inner(bump)
    assert abs(bulk) < 1e-12 and abs(greens_defect(q, bump)) < 1e-12


def test_greens_suite_with_infinite_edge():
    g = build_graph(vertices=["o", "p"], edges=[("e", 1.0, "o", "p"), ("t", "inf", "p")])
    rep = greens_identity_suite(g, build_meshes(g, 0.1), n_pairs=20,
                                conditions={"o": make_robin(2.0), "p": make_delta(1.0, 2)})
    assert rep.passed


def test_trace_inequality_small_run():
    rng = np.random.default_rng(2)
    g = random_graph(rng, max_edges=4)
    rep = trace_inequality_suite(g, build_meshes(g, 0.5), n_functions=50)
    assert rep.passed and rep.edge_checks > 0 and rep.graph_checks == 50 * len(
        {min(a, g.u_min) for a in (0.1, 0.5, g.u_min)})


def test_delta_collapse_kirchhoff_star_is_flat():
    rep = delta_truncation_experiment(0.0, [2, 4, 8], h_max=5e-3)
    np.testing.assert_allclose(rep.values, math.pi ** 2 / 4, rtol=1e-4)
    np.testing.assert_allclose(rep.values[0], interval_eigenvalues("dirichlet", "dirichlet", 2.0, 1)[0], rtol=1e-4)
    np.testing.assert_allclose(rep.values, rep.oracle, rtol=1e-4)


def test_delta_collapse_resolvent_approaches_decoupled_value():
    for alpha in (0.0, 1.0):
        rep = delta_truncation_experiment(alpha, [2, 4, 8, 16], h_max=5e-3)
        gaps = np.abs(rep.resolvent - rep.resolvent_limit)
        assert np.all(np.diff(gaps) < 0)


def test_delta_prime_collapse():
    rep = delta_prime_truncation_experiment(1.0, [2, 4, 8], h_max=5e-3)
    assert rep.passed
    np.testing.assert_allclose(rep.values, rep.oracle, rtol=1e-4)
    assert delta_prime_truncation_experiment(1.0, [2], leaf_length=2.0, h_max=5e-3).limit == pytest.approx(
        rep.limit / 4)


def test_delta_prime_single_edge_matches_robin_oracle():
    g = star_graph(1)
    conds = {"c": make_delta_prime(1.0, 1), "l000": make_dirichlet(1)}
    _, rep = solve_graph(g, conds, 1e-3, 3)
    oracle = interval_eigenvalues(("robin", 1.0), "dirichlet", 1.0, 3)
    np.testing.assert_allclose(rep.eigenvalues, oracle, rtol=1e-4)


def test_delta_prime_zero_alpha():
    with pytest.raises(ZeroAlpha):
        delta_prime_truncation_experiment(0.0, [2])


@pytest.mark.parametrize("a, b", [(1.0, 1.0), (0.3, 0.7), (1.0, 2.0)])
def test_kirchhoff_transparency(a, b):
    rep = kirchhoff_transparency_test(a, b)
    assert rep.passed
    np.testing.assert_allclose(rep.split, rep.exact, rtol=1e-4)


def test_bounded_L():
    rep = bounded_L_example_check(64)
    assert rep.passed
    assert rep.norms[0] == pytest.approx((1 + math.sqrt(2)) / 4, rel=1e-14)
    assert np.all(np.diff(rep.norms) >= -1e-15)


def test_oracle_agreement_richardson():
    g = interval_graph(1.0)
    rep = oracle_agreement(g, {"a": make_robin(2.0), "b": make_robin(2.0)},
                           robin_interval_eigenvalues(2.0, 1.0, 3), h_max=1e-2)
    assert np.all(rep.rel_error("extrapolated") < rep.rel_error() / 100)
