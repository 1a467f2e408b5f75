"""Spectra of the discretized operator and the verification experiments."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from .conditions import (
    bordered_geometric_matrix,
    check_BCS,
    make_delta,
    make_delta_prime,
    make_dirichlet,
    make_kirchhoff,
    opnorm,
)
from .discretization import (
    DofMap,
    assemble_form,
    build_meshes,
    random_domain_cubic,
    random_piecewise_cubic,
)
from .errors import KTooLarge, SolverBreakdown
from .graph import interval_graph, path_graph, star_graph, vertex_star
from .report import Row
from .secular import star_delta_eigenvalues, star_delta_prime_eigenvalues

DENSE_LIMIT = 1000
RESIDUAL_TOL = 1e-8


# spectrum

def certificate_bound(S: float, u: float) -> tuple[float, float]:
    """``(eps, bound)`` with ``eps = min(u, 1/(2S))`` and ``bound = -4S/eps``."""
    if S <= 0:
        return u, 0.0
    eps = min(u, 1.0 / (2.0 * S))
    return eps, -4.0 * S / eps


def solver_shift(problem) -> float:
    """Shift making ``A + shift M`` positive definite."""
    _, bound = certificate_bound(problem.S, problem.graph.u_min)
    return -bound + 1.0


@dataclass
class SpectrumReport:
    eigenvalues: np.ndarray
    residuals: np.ndarray
    vectors: np.ndarray = field(repr=False)
    h_max: float
    n_dofs: int
    n_reduced: int
    truncated: bool
    method: str

    @property
    def lambda_min(self) -> float:
        return float(self.eigenvalues[0])

    def rows(self, experiment="spectrum"):
        out = [Row(experiment, f"lambda_{i + 1}", lam, None, res, True)
               for i, (lam, res) in enumerate(zip(self.eigenvalues, self.residuals))]
        out.append(Row(experiment, "h_max", self.h_max))
        out.append(Row(experiment, "n_reduced", self.n_reduced))
        out.append(Row(experiment, "truncated", self.truncated))
        return out


def _start_vector(n, dtype):
    # deterministic and not orthogonal to low modes
    v = 1.0 + 0.5 * np.sin(np.arange(n) * 1.3)
    return v.astype(dtype)


def spectrum(problem, k: int = 5, dense_limit: int = DENSE_LIMIT) -> SpectrumReport:
    """Lowest ``k`` eigenvalues of the pencil ``(C* A C, C* M C)``.

    Dense generalized ``eigh`` for small reduced size, shift-invert Lanczos
    around ``-shift`` otherwise.  The pencil is symmetric-definite, so the
    eigenvalues are real and returned ascending with ``M``-normalized
    vectors mapped back to the full DOF space.
    """
    A, M = problem.reduced()
    n = A.shape[0]
    if k < 1:
        raise ValueError("k must be at least 1")
    if k > n:
        raise KTooLarge(f"requested {k} eigenvalues but the reduced space has dimension {n}")
    if n <= dense_limit or k >= n - 1:
        method = "dense"
        try:
            lam, Y = sla.eigh(A.toarray(), M.toarray(), subset_by_index=[0, k - 1])
        except np.linalg.LinAlgError as exc:
            raise SolverBreakdown(f"dense eigensolver failed: {exc}") from exc
    else:
        method = "shift-invert"
        sigma = -solver_shift(problem)
        try:
            lam, Y = spla.eigsh(A, k=k, M=M, sigma=sigma, which="LM",
                                v0=_start_vector(n, A.dtype), tol=0, maxiter=20 * n)
        except (spla.ArpackError, spla.ArpackNoConvergence, RuntimeError) as exc:
            raise SolverBreakdown(f"shift-invert Lanczos failed at shift {sigma}: {exc}") from exc
        order = np.argsort(lam)
        lam, Y = lam[order], Y[:, order]
        # M-normalize, fix phase for reproducibility
        Y = Y / np.sqrt(np.real(np.einsum("ij,ij->j", Y.conj(), M @ Y)))
    idx = np.argmax(np.abs(Y), axis=0)
    phase = Y[idx, np.arange(Y.shape[1])]
    Y = Y * (np.abs(phase) / phase)
    R = A @ Y - (M @ Y) * lam
    residuals = np.linalg.norm(R, axis=0)
    scale = spla.norm(A, 1) + np.abs(lam) * spla.norm(M, 1)
    bad = residuals > RESIDUAL_TOL * scale
    if np.any(bad):
        raise SolverBreakdown(
            f"{method} solver residuals {residuals[bad]} exceed tolerance for eigenvalues {lam[bad]}")
    if not np.iscomplexobj(Y) or np.abs(Y.imag).max() == 0:
        Y = np.real(Y)
    return SpectrumReport(
        eigenvalues=np.asarray(lam, dtype=float),
        residuals=residuals,
        vectors=problem.C @ Y,
        h_max=problem.h_max,
        n_dofs=problem.dofs.n_dofs,
        n_reduced=n,
        truncated=problem.truncated,
        method=method,
    )


def solve_graph(g, conditions, h_max, k=5, T_trunc=None):
    problem = assemble_form(g, build_meshes(g, h_max, T_trunc), conditions)
    return problem, spectrum(problem, k)


# lower bound

@dataclass
class LowerBoundCertificate:
    S: float
    u: float
    epsilon: float
    bound: float
    lambda_min: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.lambda_min >= self.bound - self.tol

    def rows(self, experiment="certify-lower-bound"):
        return [
            Row(experiment, "S", self.S),
            Row(experiment, "u", self.u),
            Row(experiment, "epsilon", self.epsilon),
            Row(experiment, "lambda_min", self.lambda_min, self.bound,
                self.lambda_min - self.bound, self.passed),
        ]


def lower_bound_certificate(g, conditions, report: SpectrumReport, tol=None) -> LowerBoundCertificate:
    """Check ``lambda_min >= -4S/eps`` with ``eps = min(u, 1/(2S))``."""
    S = check_BCS(conditions)
    u = g.u_min
    eps, bound = certificate_bound(S, u)
    if tol is None:
        tol = 1e-6 * (1 + abs(bound))
    return LowerBoundCertificate(S, u, eps, bound, report.lambda_min, tol)


# Green's identity

@dataclass
class GreensReport:
    n_pairs: int
    max_defect: float
    domain_defect: float | None
    tol: float

    @property
    def passed(self) -> bool:
        ok = self.max_defect <= self.tol
        if self.domain_defect is not None:
            ok = ok and self.domain_defect <= self.tol
        return ok

    def rows(self, experiment="check-greens-identity"):
        out = [Row(experiment, f"boundary_form_defect[{self.n_pairs}]", self.max_defect, 0.0,
                   self.max_defect, self.max_defect <= self.tol)]
        if self.domain_defect is not None:
            out.append(Row(experiment, f"domain_symmetry_defect[{self.n_pairs}]", self.domain_defect, 0.0,
                           self.domain_defect, self.domain_defect <= self.tol))
        return out


def _minus_second(f):
    d2 = f.derivative(2)
    return type(f)(f.dofs, {e: -p for e, p in d2.pieces.items()})


def greens_defect(f, g) -> complex:
    """``<f,-g''> - <-f'',g>`` minus the boundary form, all computed exactly."""
    lhs = f.inner(_minus_second(g)) - _minus_second(f).inner(g)
    rhs = np.vdot(g.signed_derivative_trace(), f.trace()) - np.vdot(g.trace(), f.signed_derivative_trace())
    return lhs - rhs


def greens_identity_suite(g, meshes, n_pairs=100, conditions=None, seed=0, tol=1e-8) -> GreensReport:
    """Green's identity on random piecewise cubics with arbitrary endpoint data.

    With ``conditions`` the symmetry ``<f,-g''> = <-f'',g>`` is also checked
    on cubics satisfying every vertex condition.
    """
    rng = np.random.default_rng(seed)
    dofs = DofMap(g, list(meshes))
    worst = 0.0
    for _ in range(n_pairs):
        f = random_piecewise_cubic(dofs, rng)
        h = random_piecewise_cubic(dofs, rng)
        worst = max(worst, abs(greens_defect(f, h)))
    domain = None
    if conditions is not None:
        problem = assemble_form(g, meshes, conditions)
        domain = 0.0
        for _ in range(n_pairs):
            f = random_domain_cubic(problem, rng)
            h = random_domain_cubic(problem, rng)
            domain = max(domain, abs(f.inner(_minus_second(h)) - _minus_second(f).inner(h)))
    return GreensReport(n_pairs, worst, domain, tol)


# Sobolev trace inequality

@dataclass
class TraceInequalityReport:
    n_functions: int
    edge_checks: int
    edge_violations: int
    vertex_checks: int
    vertex_violations: int
    graph_checks: int
    graph_violations: int
    worst_slack: float

    @property
    def passed(self) -> bool:
        return self.edge_violations == self.vertex_violations == self.graph_violations == 0

    def rows(self, experiment="trace-inequality"):
        return [
            Row(experiment, "edge_violations", self.edge_violations, 0, self.edge_checks, self.edge_violations == 0),
            Row(experiment, "vertex_violations", self.vertex_violations, 0, self.vertex_checks,
                self.vertex_violations == 0),
            Row(experiment, "graph_violations", self.graph_violations, 0, self.graph_checks,
                self.graph_violations == 0),
        ]


def trace_inequality_suite(g, meshes, n_functions=1000, a_values=(0.1, 0.5, None), seed=0):
    """Count violations of ``|f(0)|^2 <= (2/a)|f|^2 + a|f'|^2`` for random cubics.

    ``None`` in ``a_values`` stands for the edge length.  Both ends of every
    edge are checked.  The vertex and graph sums carry the extra factor 2 and
    use ``eps <= u_min``.
    """
    rng = np.random.default_rng(seed)
    dofs = DofMap(g, list(meshes))
    lengths = {m.edge: m.length for m in dofs.meshes}
    u = min(lengths.values())
    eps_values = sorted({min(a if a is not None else u, u) for a in a_values})
    incident = {v: sorted({ee.edge for ee in vertex_star(g, v).ends}, key=str) for v in g.vertices}
    counts = dict(edge=[0, 0], vertex=[0, 0], graph=[0, 0])
    worst = math.inf

    def check(kind, lhs, rhs):
        nonlocal worst
        counts[kind][0] += 1
        worst = min(worst, rhs - lhs)
        if lhs > rhs:
            counts[kind][1] += 1

    for _ in range(n_functions):
        f = random_piecewise_cubic(dofs, rng)
        df = f.derivative()
        n0 = {e: f.norm2(e) for e in lengths}
        n1 = {e: df.norm2(e) for e in lengths}
        for e, l in lengths.items():
            for a in a_values:
                a = l if a is None else a
                if a > l:
                    continue
                rhs = 2 / a * n0[e] + a * n1[e]
                check("edge", abs(f.pieces[e](0.0)) ** 2, rhs)
                check("edge", abs(f.pieces[e](l)) ** 2, rhs)
        tr2 = np.abs(f.trace()) ** 2
        for eps in eps_values:
            local = {e: 2 / eps * n0[e] + eps * n1[e] for e in lengths}
            for v in g.vertices:
                check("vertex", tr2[dofs.vertex_rows[v]].sum(), 2 * sum(local[e] for e in incident[v]))
            check("graph", tr2.sum(), 2 * sum(local.values()))
    return TraceInequalityReport(n_functions, *counts["edge"], *counts["vertex"], *counts["graph"], worst)


# infinite-degree truncations

def _center_resolvent(problem, shift=1.0):
    """``<(H + shift)^{-1} f, f>`` for ``f = sin(pi t / l)`` on the first edge only."""
    m = problem.meshes[0]
    f = np.zeros(problem.dofs.n_dofs)
    f[problem.dofs.edge_slice(m.edge)] = np.sin(math.pi * m.nodes / m.length)
    A, M = problem.reduced()
    Ch = problem.C.conj().T
    b = Ch @ (problem.M @ f)
    y = spla.spsolve((A + shift * M).tocsc(), b)
    return float(np.real(np.vdot(b, y)))


@dataclass
class TrendReport:
    experiment: str
    parameter: str
    n_list: list
    values: np.ndarray
    oracle: np.ndarray
    limit: float
    tol_trend: float
    strict: bool
    resolvent: np.ndarray | None = None
    resolvent_limit: float | None = None

    @property
    def distances(self) -> np.ndarray:
        return np.abs(self.values - self.limit)

    @property
    def monotone(self) -> bool:
        d = self.distances
        if self.strict:
            return bool(np.all(np.diff(d) < 0))
        slack = 1e-4 * abs(self.limit)
        return bool(np.all(np.diff(d) <= slack))

    @property
    def final_close(self) -> bool:
        return bool(self.distances[-1] <= self.tol_trend * abs(self.limit))

    @property
    def passed(self) -> bool:
        return self.monotone and self.final_close

    def rows(self):
        ex, par = self.experiment, self.parameter
        out = []
        for n, lam, orc in zip(self.n_list, self.values, self.oracle):
            out.append(Row(ex, f"{par};n={n};lambda_1", lam, orc, abs(lam - orc) / abs(orc), None))
            out.append(Row(ex, f"{par};n={n};distance_to_limit", abs(lam - self.limit), 0.0, None, None))
        if self.resolvent is not None:
            for n, r in zip(self.n_list, self.resolvent):
                out.append(Row(ex, f"{par};n={n};resolvent", r, self.resolvent_limit,
                               abs(r - self.resolvent_limit), None))
        out.append(Row(ex, f"{par};monotone", self.monotone, True, None, self.monotone))
        out.append(Row(ex, f"{par};final", self.values[-1], self.limit,
                       self.distances[-1] / abs(self.limit), self.final_close))
        return out


def delta_truncation_experiment(alpha, n_list, leaf_length=1.0, h_max=2e-3, tol_trend=0.05) -> TrendReport:
    """Ground state of the star with central delta coupling and Dirichlet leaves.

    Compared with ``(pi/l)^2``, the ground state of the star decoupled by a
    Dirichlet center.  Also reports the localized resolvent
    ``<(H_n + c)^{-1} f, f>`` with ``f = sin(pi t/l)`` on one leaf, whose
    decoupled value is ``(l/2) / ((pi/l)^2 + c)``.
    """
    n_list = list(n_list)
    limit = (math.pi / leaf_length) ** 2
    # one shift for every n: above the certified bound of any degree
    a = max(0.0, -alpha)
    shift = 1.0 + max(4 * a / leaf_length, 8 * a ** 2)
    values, oracle, resolvent = [], [], []
    for n in n_list:
        g = star_graph(n, leaf_length)
        conds = {v: make_dirichlet(1) for v in g.vertices}
        conds["c"] = make_delta(alpha, n)
        problem, rep = solve_graph(g, conds, h_max, k=1)
        values.append(rep.lambda_min)
        oracle.append(star_delta_eigenvalues(alpha, n, leaf_length, 1)[0])
        resolvent.append(_center_resolvent(problem, shift))
    res_limit = (leaf_length / 2) / (limit + shift)
    return TrendReport("delta-collapse", f"alpha={alpha:g}", n_list, np.array(values), np.array(oracle),
                       limit, tol_trend, strict=True, resolvent=np.array(resolvent), resolvent_limit=res_limit)


def delta_prime_truncation_experiment(alpha, n_list, leaf_length=1.0, h_max=2e-3, tol_trend=0.05) -> TrendReport:
    """Ground state with central delta-prime coupling against the Neumann-center value ``(pi/(2l))^2``."""
    make_delta_prime(alpha, 1)  # ZeroAlpha before any work
    n_list = list(n_list)
    limit = (math.pi / (2 * leaf_length)) ** 2
    values, oracle = [], []
    for n in n_list:
        g = star_graph(n, leaf_length)
        conds = {v: make_dirichlet(1) for v in g.vertices}
        conds["c"] = make_delta_prime(alpha, n)
        _, rep = solve_graph(g, conds, h_max, k=1)
        values.append(rep.lambda_min)
        oracle.append(star_delta_prime_eigenvalues(alpha, n, leaf_length, 1)[0])
    return TrendReport("delta-prime-collapse", f"alpha={alpha:g}", n_list, np.array(values), np.array(oracle),
                       limit, tol_trend, strict=False)


# Kirchhoff transparency

@dataclass
class TransparencyReport:
    a: float
    b: float
    split: np.ndarray
    whole: np.ndarray
    exact: np.ndarray
    tol: float

    @property
    def rel_diff(self) -> np.ndarray:
        return np.abs(self.split - self.whole) / np.abs(self.whole)

    @property
    def passed(self) -> bool:
        return bool(np.all(self.rel_diff <= self.tol))

    def rows(self, experiment="kirchhoff-transparency"):
        out = []
        for i, (s, w, x, r) in enumerate(zip(self.split, self.whole, self.exact, self.rel_diff)):
            par = f"a={self.a:g};b={self.b:g};lambda_{i + 1}"
            out.append(Row(experiment, par + ";split", s, w, r, r <= self.tol))
            out.append(Row(experiment, par + ";whole", w, x, abs(w - x) / x, None))
        return out


def kirchhoff_transparency_test(a, b, h_max=1e-3, k=5, tol=1e-4) -> TransparencyReport:
    """``[0,a]`` and ``[0,b]`` joined by Kirchhoff versus ``[0,a+b]``, Dirichlet outer ends."""
    split_g = path_graph([a, b])
    conds = {"v0": make_dirichlet(1), "v1": make_kirchhoff(2), "v2": make_dirichlet(1)}
    _, split = solve_graph(split_g, conds, h_max, k)
    whole_g = interval_graph(a + b)
    _, whole = solve_graph(whole_g, {"a": make_dirichlet(1), "b": make_dirichlet(1)}, h_max, k)
    exact = (np.arange(1, k + 1) * math.pi / (a + b)) ** 2
    return TransparencyReport(a, b, split.eigenvalues, whole.eigenvalues, exact, tol)


# bounded coupling of infinite degree

@dataclass
class BoundedLReport:
    sizes: np.ndarray
    norms: np.ndarray
    hermitian_defects: np.ndarray

    @property
    def passed(self) -> bool:
        return bool(np.all(self.norms <= 1.0) and np.all(self.hermitian_defects == 0))

    def rows(self, experiment="bounded-L"):
        return [Row(experiment, f"n={n}", nrm, 1.0, hd, bool(nrm <= 1.0 and hd == 0))
                for n, nrm, hd in zip(self.sizes, self.norms, self.hermitian_defects)]


def bounded_L_example_check(n_max=64) -> BoundedLReport:
    sizes = np.arange(2, n_max + 1)
    norms, defects = [], []
    for n in sizes:
        m = bordered_geometric_matrix(int(n))
        norms.append(opnorm(m))
        defects.append(float(np.abs(m - m.T).max()))
    return BoundedLReport(sizes, np.array(norms), np.array(defects))


# oracle agreement with Richardson extrapolation

@dataclass
class OracleReport:
    label: str
    coarse: np.ndarray
    fine: np.ndarray
    h: tuple
    oracle: np.ndarray

    @property
    def extrapolated(self) -> np.ndarray:
        h1, h2 = self.h
        return (h1 ** 2 * self.fine - h2 ** 2 * self.coarse) / (h1 ** 2 - h2 ** 2)

    def rel_error(self, which="coarse") -> np.ndarray:
        vals = self.extrapolated if which == "extrapolated" else getattr(self, which)
        return np.abs(vals - self.oracle) / np.maximum(np.abs(self.oracle), 1.0)

    def rows(self, experiment="oracle", tol=1e-4, tol_extrapolated=1e-6):
        out = []
        for i in range(len(self.oracle)):
            par = f"{self.label};lambda_{i + 1}"
            e1 = self.rel_error()[i]
            e2 = self.rel_error("extrapolated")[i]
            out.append(Row(experiment, par, self.coarse[i], self.oracle[i], e1, e1 <= tol))
            out.append(Row(experiment, par + ";extrapolated", self.extrapolated[i], self.oracle[i], e2,
                           e2 <= tol_extrapolated))
        return out


def oracle_agreement(g, conditions, oracle, h_max=1e-3, k=3, label="") -> OracleReport:
    """FEM at ``h`` and ``h/2`` against oracle eigenvalues, with extrapolation.

    Errors are measured relative to ``max(|lambda|, 1)`` so that an
    eigenvalue near zero does not blow up the relative scale.
    """
    p1, r1 = solve_graph(g, conditions, h_max, k)
    p2, r2 = solve_graph(g, conditions, h_max / 2, k)
    return OracleReport(label, r1.eigenvalues, r2.eigenvalues, (p1.h_max, p2.h_max), np.asarray(oracle)[:k])

