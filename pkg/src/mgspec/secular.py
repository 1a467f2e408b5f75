"""Transcendental eigenvalue oracles for intervals and equilateral stars.

Eigenvalues are roots of small matching determinants built from the
fundamental solutions of ``-f'' = lam f``:

    c(x) = cos(sqrt(lam) x),   s(x) = sin(sqrt(lam) x) / sqrt(lam),

continued analytically to ``lam <= 0`` (cosh/sinh, and ``1, x`` at 0), so
every determinant is an entire function of ``lam`` and has no spurious
poles.  Roots are bracketed on a fine grid and refined by bisection.

Nothing here touches the finite element code; it is the reference the
discretization is checked against.
"""

from __future__ import annotations

import math

import numpy as np


def fundamental(lam, x):
    """``(c(x), s(x))`` for an array of spectral parameters ``lam``."""
    lam = np.asarray(lam, dtype=float)
    c = np.empty_like(lam)
    s = np.empty_like(lam)
    pos = lam > 0
    neg = lam < 0
    zero = ~(pos | neg)
    k = np.sqrt(lam[pos])
    c[pos] = np.cos(k * x)
    s[pos] = np.sin(k * x) / k
    kap = np.sqrt(-lam[neg])
    c[neg] = np.cosh(kap * x)
    s[neg] = np.sinh(kap * x) / kap
    c[zero] = 1.0
    s[zero] = x
    return c, s


def bisect(f, a, b, rtol=1e-15, maxiter=200):
    fa = f(a)
    fb = f(b)
    if fa == 0:
        return a
    if fb == 0:
        return b
    if np.sign(fa) == np.sign(fb):
        raise ValueError("root is not bracketed")
    for _ in range(maxiter):
        m = 0.5 * (a + b)
        if m in (a, b) or abs(b - a) <= rtol * max(abs(m), 1e-300):
            return m
        fm = f(m)
        if fm == 0:
            return m
        if np.sign(fm) == np.sign(fa):
            a, fa = m, fm
        else:
            b, fb = m, fm
    return 0.5 * (a + b)


def scan_roots(det, count, length, lower, points_per_mode=400, max_doublings=8):
    """Lowest ``count`` roots of ``det`` on ``[lower, ...)``.

    The grid is uniform in ``sqrt(-lam)`` below zero and in ``sqrt(lam)``
    above, where a mode occupies roughly ``pi / length`` in the root.
    """
    scalar = lambda lam: float(det(np.array([lam]))[0])
    k_hi = (count + 3) * math.pi / length
    for _ in range(max_doublings):
        n_pos = points_per_mode * (count + 3)
        kneg = np.linspace(math.sqrt(max(-lower, 0.0)), 0.0, 20000, endpoint=False)
        kpos = np.linspace(0.0, k_hi, n_pos)
        grid = np.concatenate([-kneg ** 2, kpos ** 2])
        vals = det(grid)
        roots = list(grid[vals == 0])
        nz = np.flatnonzero(vals != 0)
        sv = np.sign(vals[nz])
        for i in np.flatnonzero((sv[:-1] != sv[1:]) & (np.diff(nz) == 1)):
            roots.append(bisect(scalar, grid[nz[i]], grid[nz[i + 1]]))
        roots.sort()
        if len(roots) >= count:
            return np.array(roots[:count])
        k_hi *= 2
    raise RuntimeError(f"found only {len(roots)} of {count} roots")


def _end_rows(end):
    """End condition ``a f + b f'_in = 0`` as ``(a, b)``."""
    kind, *param = end if isinstance(end, tuple) else (end,)
    if kind == "dirichlet":
        return 1.0, 0.0
    if kind == "neumann":
        return 0.0, 1.0
    if kind == "robin":
        # f'_in = alpha f
        return float(param[0]), -1.0
    raise ValueError(f"unknown end condition {end!r}")


def interval_determinant(end0, end1, length):
    a0, b0 = _end_rows(end0)
    a1, b1 = _end_rows(end1)

    def det(lam):
        c, s = fundamental(lam, length)
        # f = A c + B s;  f(0) = A, f'_in(0) = B;  f'_in(l) = A lam s - B c
        return a0 * (a1 * s - b1 * c) - b0 * (a1 * c + b1 * np.asarray(lam) * s)

    return det


def _lower_bound(coefficients, length):
    m = max([abs(x) for x in coefficients] + [0.0])
    return -4.0 * m ** 2 - 4.0 * m / length - 1.0


def interval_eigenvalues(end0, end1, length, count):
    """Lowest eigenvalues of ``-f''`` on ``[0, length]``.

    Ends are ``"dirichlet"``, ``"neumann"`` or ``("robin", alpha)`` meaning
    ``f'_in = alpha f`` with the ingoing derivative.
    """
    alphas = [e[1] for e in (end0, end1) if isinstance(e, tuple)]
    det = interval_determinant(end0, end1, length)
    return scan_roots(det, count, length, _lower_bound(alphas, length))


def robin_interval_eigenvalues(alpha, length, count):
    """Same Robin coupling ``alpha`` at both ends."""
    return interval_eigenvalues(("robin", alpha), ("robin", alpha), length, count)


def _merge(sym, other, count):
    return np.sort(np.concatenate([sym, other]))[:count]


def star_delta_eigenvalues(alpha, n, leaf_length, count):
    """Star of ``n`` equal edges, delta coupling at the center, Dirichlet leaves.

    Symmetric modes ``f_e = A sin(k (l - t))`` solve ``n c(l) + alpha s(l) = 0``;
    the ``n - 1`` dimensional family with vanishing center value gives the
    Dirichlet interval values ``(m pi / l)^2``.
    """
    det = lambda lam: n * fundamental(lam, leaf_length)[0] + alpha * fundamental(lam, leaf_length)[1]
    sym = scan_roots(det, count, leaf_length, _lower_bound([alpha], leaf_length))
    m = np.arange(1, count + 1)
    other = np.repeat((m * math.pi / leaf_length) ** 2, n - 1)
    return _merge(sym, other, count)


def star_delta_prime_eigenvalues(alpha, n, leaf_length, count):
    """Star of ``n`` equal edges, delta-prime coupling at the center, Dirichlet leaves.

    Symmetric modes solve ``alpha c(l) + n s(l) = 0``; modes with vanishing
    value sum have zero ingoing derivatives, giving ``((m - 1/2) pi / l)^2``.
    """
    det = lambda lam: alpha * fundamental(lam, leaf_length)[0] + n * fundamental(lam, leaf_length)[1]
    sym = scan_roots(det, count, leaf_length, _lower_bound([n / alpha], leaf_length))
    m = np.arange(1, count + 1)
    other = np.repeat(((m - 0.5) * math.pi / leaf_length) ** 2, n - 1)
    return _merge(sym, other, count)
