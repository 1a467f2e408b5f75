"""Vertex boundary conditions.

A local self-adjoint condition at a vertex of degree ``d`` is a pair
``(P, L)``: an orthogonal projection ``P`` on ``C^d`` and a Hermitian ``L``
living on ``ran(1 - P)``.  A function ``f`` satisfies it when

    P tr(f) = 0        and        L tr(f) = (1 - P) str(f'),

where ``tr`` collects boundary values and ``str`` the ingoing
derivatives over the vertex star.  ``L`` is stored as a full ``d x d``
matrix that vanishes on ``ran P``.

Equivalent descriptions handled here: pairs ``(A, B)``
with ``A tr + B str = 0``, and Lagrangian subspaces of ``C^d + C^d`` with
respect to the form ``Omega(x, y) = <x2, y1> - <x1, y2>``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Mapping, NamedTuple

import numpy as np

from .errors import (
    DecompositionMismatch,
    DependentColumns,
    InvalidCondition,
    NonFiniteDegree,
    NonHermitianABstar,
    NotLagrangian,
    RankDeficient,
    SingularConversion,
    ZeroAlpha,
)

TAU_ALG = 1e-10
SUBSPACE_TOL = 1e-8
# eigenvalues of P below this are treated as kernel directions
KERNEL_THRESHOLD = 1e-8


def opnorm(a) -> float:
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))


def hermitian_part(a):
    return (a + a.conj().T) / 2


def _as_matrix(a, name):
    a = np.atleast_2d(np.asarray(a))
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidCondition(f"{name} must be a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidCondition(f"{name} has non-finite entries")
    return a


def projection_bases(P):
    """Orthonormal bases ``(range, kernel)`` of a (near) orthogonal projection."""
    w, v = np.linalg.eigh(hermitian_part(P))
    kernel = w < KERNEL_THRESHOLD
    return v[:, ~kernel], v[:, kernel]


@dataclass(frozen=True, eq=False)
class VertexCondition:
    P: np.ndarray
    L: np.ndarray
    vertex: Hashable | None = None

    def __post_init__(self):
        P = _as_matrix(self.P, "P")
        L = _as_matrix(self.L, "L")
        if P.shape != L.shape:
            raise InvalidCondition(f"P has shape {P.shape} but L has shape {L.shape}")
        dtype = np.result_type(P, L, float)
        object.__setattr__(self, "P", P.astype(dtype))
        object.__setattr__(self, "L", L.astype(dtype))
        bad = {k: v for k, v in self.defects().items() if v > TAU_ALG}
        if bad:
            where = f" at vertex {self.vertex!r}" if self.vertex is not None else ""
            raise InvalidCondition(f"invariants violated{where}: {bad}")

    @property
    def degree(self) -> int:
        return self.P.shape[0]

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.P)

    def defects(self) -> dict:
        P, L = self.P, self.L
        return {
            "P_hermitian": opnorm(P - P.conj().T),
            "P_idempotent": opnorm(P @ P - P),
            "L_hermitian": opnorm(L - L.conj().T),
            "PL": opnorm(P @ L),
            "LP": opnorm(L @ P),
        }

    def with_vertex(self, vertex) -> "VertexCondition":
        return VertexCondition(self.P, self.L, vertex)

    def bases(self):
        """Orthonormal bases of ``ran P`` and ``ran(1 - P)``."""
        return projection_bases(self.P)

    def residual(self, x, y) -> tuple[float, float]:
        """Defects ``|P x|`` and ``|L x - (1 - P) y|`` for boundary data ``(x, y)``."""
        x = np.asarray(x)
        y = np.asarray(y)
        Q = np.eye(self.degree) - self.P
        return (float(np.linalg.norm(self.P @ x)),
                float(np.linalg.norm(self.L @ x - Q @ y)))


def _check_degree(d):
    if isinstance(d, float) and math.isinf(d):
        raise NonFiniteDegree("only finite vertex degrees are representable")
    if isinstance(d, bool) or int(d) != d:
        raise NonFiniteDegree(f"degree must be a positive integer, got {d!r}")
    if d < 1:
        raise ValueError(f"degree must be >= 1, got {d}")
    return int(d)


def make_dirichlet(d) -> VertexCondition:
    d = _check_degree(d)
    return VertexCondition(np.eye(d), np.zeros((d, d)))


def make_neumann(d) -> VertexCondition:
    d = _check_degree(d)
    return VertexCondition(np.zeros((d, d)), np.zeros((d, d)))


def make_delta(alpha: float, d) -> VertexCondition:
    """Continuity plus ``sum of ingoing derivatives = alpha * f(v)``.

    ``P = I - J/d`` and ``L = (alpha/d) J/d`` with ``J`` the all-ones matrix,
    so ``L`` acts as multiplication by ``alpha/d`` on constant vectors.
    """
    d = _check_degree(d)
    avg = np.full((d, d), 1.0 / d)
    return VertexCondition(np.eye(d) - avg, (float(alpha) / d) * avg)


def make_kirchhoff(d) -> VertexCondition:
    return make_delta(0.0, d)


def make_robin(alpha: float) -> VertexCondition:
    """Degree-one condition ``f'_in = alpha f``."""
    return make_delta(alpha, 1)


def make_delta_prime(alpha: float, d) -> VertexCondition:
    """Every ingoing derivative equals ``(sum of boundary values) / alpha``."""
    d = _check_degree(d)
    if alpha == 0:
        raise ZeroAlpha("delta-prime condition needs a nonzero coupling")
    return VertexCondition(np.zeros((d, d)), np.ones((d, d)) / float(alpha))


def bordered_geometric_matrix(n: int) -> np.ndarray:
    """``n x n`` truncation of the bounded infinite-degree coupling.

    First row and column are ``1/2, 1/4, 1/8, ...``; everything else is 0.
    """
    m = np.zeros((n, n))
    col = 0.5 ** np.arange(1, n + 1)
    m[0, :] = col
    m[:, 0] = col
    return m


# positive / negative parts

@dataclass(frozen=True, eq=False)
class SplitL:
    L_plus: np.ndarray
    L_minus: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def split_L(vc: VertexCondition) -> SplitL:
    """Spectral splitting ``L = L+ + L-``; a zero eigenvalue goes to ``L+``."""
    _, W = vc.bases()
    mu, V = np.linalg.eigh(hermitian_part(W.conj().T @ vc.L @ W))
    U = W @ V
    pos = mu >= 0
    L_plus = (U[:, pos] * mu[pos]) @ U[:, pos].conj().T
    L_minus = (U[:, ~pos] * mu[~pos]) @ U[:, ~pos].conj().T
    zero = np.zeros_like(vc.L)
    return SplitL(L_plus + zero, L_minus + zero, mu, U)


def lowest_eigenvalue(vc: VertexCondition) -> float:
    """Smallest eigenvalue of ``L`` on ``ran(1 - P)`` (``+inf`` if that space is 0)."""
    mu = split_L(vc).eigenvalues
    return float(mu[0]) if mu.size else math.inf


def check_BCS(conditions) -> float:
    """Smallest ``S >= 0`` with ``<L- x, x> >= -S |x|^2`` at every vertex."""
    if isinstance(conditions, Mapping):
        conditions = conditions.values()
    S = 0.0
    for vc in conditions:
        S = max(S, -lowest_eigenvalue(vc))
    return S


# (A, B) pairs

@dataclass(frozen=True, eq=False)
class ABCondition:
    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A))
        B = np.atleast_2d(np.asarray(self.B))
        if A.shape != B.shape or A.shape[0] != A.shape[1]:
            raise InvalidCondition(f"A and B must be square of equal size, got {A.shape}, {B.shape}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def degree(self) -> int:
        return self.A.shape[0]

    def relation_basis(self) -> np.ndarray:
        """Orthonormal basis of ``{(x, y) : A x + B y = 0}`` as a ``2d x d`` matrix."""
        AB = np.hstack([self.A, self.B])
        _, s, vh = np.linalg.svd(AB)
        rank = int(np.sum(s > TAU_ALG * max(s[0], 1e-300)))
        return vh[rank:].conj().T

    def hermitian_defect(self) -> float:
        M = self.A @ self.B.conj().T
        scale = max(opnorm(np.hstack([self.A, self.B])) ** 2, 1e-300)
        return opnorm(M - M.conj().T) / scale


def from_AB(A, B=None) -> VertexCondition:
    """Convert ``A tr + B str = 0`` into ``(P, L)`` form.

    ``P`` projects onto ``ker B``; on ``W = ran(1 - P)`` the relation reads
    ``(1 - P) str = -(B|W)^+ A tr``, hence ``L = -W (BW)^+ A W W*``.
    The result is checked to describe the same relation as ``(A, B)``.
    """
    ab = A if isinstance(A, ABCondition) else ABCondition(A, B)
    A, B = ab.A, ab.B
    d = ab.degree
    s_all = np.linalg.svd(np.hstack([A, B]), compute_uv=False)
    scale = s_all[0] if s_all.size else 0.0
    if scale == 0 or np.sum(s_all > TAU_ALG * scale) < d:
        raise RankDeficient(f"rank [A B] < {d}")
    if ab.hermitian_defect() > TAU_ALG:
        raise NonHermitianABstar(f"A B* is not Hermitian (defect {ab.hermitian_defect():.3g})")

    u, s, vh = np.linalg.svd(B)
    rank_b = int(np.sum(s > TAU_ALG * scale))
    W = vh[:rank_b].conj().T
    N = vh[rank_b:].conj().T
    P = N @ N.conj().T
    if rank_b:
        if s[rank_b - 1] < SUBSPACE_TOL * s[0]:
            raise SingularConversion(
                f"B restricted to (ker B)^perp is ill-conditioned (sigma_min/sigma_max = {s[rank_b - 1] / s[0]:.3g})")
        BW = B @ W
        Lw = -np.linalg.pinv(BW) @ A @ W
        L = W @ Lw @ W.conj().T
    else:
        L = np.zeros_like(P)
    P, L = hermitian_part(P), hermitian_part(L)
    if not (np.iscomplexobj(A) or np.iscomplexobj(B)):
        P, L = P.real, L.real
    vc = VertexCondition(P, L)
    dist = subspace_distance(ab.relation_basis(), to_lagrangian(vc).basis)
    if dist > SUBSPACE_TOL:
        raise DecompositionMismatch(f"(A, B) and (P, L) relations differ by {dist:.3g}")
    return vc


def to_AB(vc: VertexCondition) -> ABCondition:
    """An ``(A, B)`` pair for a ``(P, L)`` condition: ``A = P - L``, ``B = 1 - P``."""
    return ABCondition(vc.P - vc.L, np.eye(vc.degree) - vc.P)


# Lagrangian subspaces

def orthonormalize(basis, tol=TAU_ALG) -> np.ndarray:
    basis = np.asarray(basis)
    if basis.shape[1] == 0:
        return basis
    u, s, _ = np.linalg.svd(basis, full_matrices=False)
    if s[-1] <= tol * max(s[0], 1e-300):
        raise DependentColumns("basis columns are linearly dependent")
    return u


def subspace_distance(U, V) -> float:
    """Sine of the largest principal angle; 1 when dimensions differ."""
    U = orthonormalize(U)
    V = orthonormalize(V)
    if U.shape != V.shape:
        return 1.0
    if U.shape[1] == 0:
        return 0.0
    return opnorm(U @ U.conj().T - V @ V.conj().T)


@dataclass(frozen=True, eq=False)
class LagrangianSubspace:
    basis: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.basis)
        if b.ndim != 2 or b.shape[0] % 2:
            raise ValueError(f"basis must be a 2d x m matrix, got shape {b.shape}")
        object.__setattr__(self, "basis", b)

    @property
    def d(self) -> int:
        return self.basis.shape[0] // 2

    @property
    def dim(self) -> int:
        return self.basis.shape[1]


class LagrangianCheck(NamedTuple):
    ok: bool
    defect: float
    dim: int


def symplectic_gram(basis) -> np.ndarray:
    """Matrix of ``Omega(g_i, g_j)`` for the columns of ``basis``."""
    b = np.asarray(basis)
    d = b.shape[0] // 2
    X, Y = b[:d], b[d:]
    return (X.conj().T @ Y - Y.conj().T @ X).T


def is_lagrangian(G, tol=TAU_ALG) -> LagrangianCheck:
    """Isotropy plus maximal dimension; ``defect`` is ``max |Omega(g_i, g_j)|``."""
    b = G.basis if isinstance(G, LagrangianSubspace) else np.asarray(G)
    d = b.shape[0] // 2
    if b.shape[1]:
        s = np.linalg.svd(b, compute_uv=False)
        if s[-1] <= TAU_ALG * s[0]:
            raise DependentColumns("basis columns are linearly dependent")
    defect = float(np.max(np.abs(symplectic_gram(b)))) if b.shape[1] else 0.0
    scale = max(1.0, opnorm(b) ** 2)
    return LagrangianCheck(b.shape[1] == d and defect <= tol * scale, defect, b.shape[1])


def to_lagrangian(vc: VertexCondition) -> LagrangianSubspace:
    """``G = {(q, L q + p) : q in ran(1 - P), p in ran P}``, orthonormal basis."""
    Pb, W = vc.bases()
    top = np.hstack([W, np.zeros_like(Pb)])
    bottom = np.hstack([vc.L @ W, Pb])
    return LagrangianSubspace(orthonormalize(np.vstack([top, bottom])))


def decompose_lagrangian(G) -> VertexCondition:
    """Recover ``(P, L)`` from a Lagrangian subspace.

    ``ran P`` is the set of ``p`` with ``(0, p) in G``; on its complement
    ``L w = (1 - P) y`` for the unique ``(w, y) in G``.
    """
    G = G if isinstance(G, LagrangianSubspace) else LagrangianSubspace(G)
    check = is_lagrangian(G)
    if not check.ok:
        raise NotLagrangian(f"not Lagrangian (dim {check.dim}, d {G.d}, defect {check.defect:.3g})")
    b = orthonormalize(G.basis)
    d = G.d
    X, Y = b[:d], b[d:]
    u, s, vh = np.linalg.svd(X)
    r = int(np.sum(s > SUBSPACE_TOL))
    kernel_coeffs = vh[r:].conj().T
    Pb = orthonormalize(Y @ kernel_coeffs) if kernel_coeffs.shape[1] else np.zeros((d, 0), b.dtype)
    P = Pb @ Pb.conj().T
    Q = np.eye(d) - P
    X_pinv = vh[:r].conj().T @ np.diag(1.0 / s[:r]) @ u[:, :r].conj().T
    L = Q @ hermitian_part(Q @ Y @ X_pinv @ Q) @ Q
    if not np.iscomplexobj(G.basis):
        P, L = P.real, L.real
    vc = VertexCondition(hermitian_part(P), L)
    dist = subspace_distance(to_lagrangian(vc).basis, b)
    if dist > SUBSPACE_TOL:
        raise DecompositionMismatch(f"round trip differs by {dist:.3g}")
    return vc

