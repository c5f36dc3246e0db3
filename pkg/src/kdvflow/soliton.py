"""Potentials from soliton data via the Cauchy-matrix determinant.

The potential is q(x) = -2 (log det G(x))'' with

    G(x)_ij = delta_ij + sqrt(m_i m_j)/(eta_i+eta_j) * exp(-x(eta_i+eta_j)).

G'(x) = -v v^T for v_i = sqrt(m_i) exp(-x eta_i), so every x-derivative of
log det G reduces to polynomials in the bilinear forms

    s_ab = (D^a v)^T G^-1 (D^b v),      D = diag(eta),

with the closed derivative rule s_ab' = -s_{a+1,b} - s_{a,b+1} + s_a0*s_0b.
These polynomials are generated once at import time, so all potential
derivatives are analytic (no numeric differentiation on the core path).
"""

from __future__ import annotations

import numpy as np

from .errors import NonRealGroupElement, QuadratureUnderResolved
from .measures import SolitonData, SpectralMeasure

_ORDER_NAMES = ("q", "q_x", "q_xx", "q_xxx")


# -- differential algebra on the s_ab variables ------------------------------

def _poly_diff(p):
    """Apply d/dx using s_ab' = -s_{a+1,b} - s_{a,b+1} + s_{a0} s_{0b}."""
    out = {}

    def add(mono, c):
        out[mono] = out.get(mono, 0.0) + c

    for mono, c in p.items():
        for i, (a, b) in enumerate(mono):
            rest = mono[:i] + mono[i + 1:]
            add(tuple(sorted(rest + (tuple(sorted((a + 1, b))),))), -c)
            add(tuple(sorted(rest + (tuple(sorted((a, b + 1))),))), -c)
            add(tuple(sorted(rest + ((0, a), (0, b)))), c)
    return {m: c for m, c in out.items() if c != 0.0}


def _build_q_polys():
    # F' = -s00; q = -2 F''
    f1 = {((0, 0),): -1.0}
    derivs = [f1]
    for _ in range(4):
        derivs.append(_poly_diff(derivs[-1]))
    # q, q_x, q_xx, q_xxx = -2 * (F'', F''', F'''', F''''')
    return [{m: -2.0 * c for m, c in d.items()} for d in derivs[1:]]


_Q_POLYS = _build_q_polys()
_MAX_AB = 4


def _eval_poly(poly, s):
    """Evaluate a monomial dict on a stack of s_ab tables, shape (P, 5, 5)."""
    out = np.zeros(s.shape[0])
    for mono, c in poly.items():
        term = np.full(s.shape[0], c)
        for (a, b) in mono:
            term = term * s[:, a, b]
        out += term
    return out


# -- Gram evaluation ----------------------------------------------------------

def gram_evaluation(s: SolitonData, x: float):
    """G(x), v(x) and D = diag(eta) at a single position (diagnostic)."""
    eta, m = s.eta, s.m
    E = np.exp(-x * eta)
    v = np.sqrt(m) * E
    C = np.sqrt(np.outer(m, m)) / np.add.outer(eta, eta)
    G = np.eye(s.n) + C * np.outer(E, E)
    return G, v, np.diag(eta)


def _s_tables(s: SolitonData, x):
    """s_ab tables for all requested positions, shape (P, 5, 5).

    Everything is evaluated through the rescaled system

        s_ab = eta^a . B_x^-1 . eta^b,   B_x = diag(e^{2 x eta} / m) + K,

    with K the Cauchy kernel 1/(eta_i + eta_j).  The diagonal absorbs the
    entire dynamic range of the norming constants (soliton gases carry m's
    across dozens of decades), so no entry ever overflows; diagonal values
    are capped, which switches far-departed solitons off benignly.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    eta, m = s.eta, s.m
    n = s.n
    K = 1.0 / np.add.outer(eta, eta)
    powers = eta[None, :] ** np.arange(_MAX_AB + 1)[:, None]  # (5, n)
    expo = 2.0 * np.outer(x, eta) - np.log(m)[None, :]
    diag = np.exp(np.minimum(expo, 460.0))
    B = K[None] + np.zeros((x.size, n, n))
    idx = np.arange(n)
    B[:, idx, idx] += diag
    Y = np.linalg.solve(B, np.broadcast_to(powers.T[None], (x.size, n, _MAX_AB + 1)).copy())
    return np.einsum("ia,pib->pab", powers.T, Y)


def _mp_solve_columns(B, cols):
    """One LU factorization, then substitution per right-hand column.

    B = P L U, so L U x = P^T b; rmap[i] is the row of P carrying e_i.
    """
    import mpmath as mp

    P, L, U = mp.lu(B)
    n = B.rows
    rmap = [next(r for r in range(n) if P[r, i] == 1) for i in range(n)]
    outs = []
    for b in cols:
        y = [mp.mpf(0)] * n
        for i in range(n):
            acc = b[rmap[i]]
            for j in range(i):
                acc -= L[i, j] * y[j]
            y[i] = acc
        xcol = [mp.mpf(0)] * n
        for i in range(n - 1, -1, -1):
            acc = y[i]
            for j in range(i + 1, n):
                acc -= U[i, j] * xcol[j]
            xcol[i] = acc / U[i, i]
        outs.append(xcol)
    return outs


def _s_tables_mp(s: SolitonData, x, max_ab=_MAX_AB):
    """Extended-precision s_ab tables for soliton gases (see spectral)."""
    import mpmath as mp
    from .spectral import _mp_dps

    eta, m = s.eta, s.m
    n = s.n
    logm = np.log(m)
    out = np.zeros((x.size, _MAX_AB + 1, _MAX_AB + 1))
    with mp.workdps(_mp_dps(s)):
        me = [mp.mpf(float(e)) for e in eta]
        K = mp.matrix(n, n)
        for i in range(n):
            for j in range(n):
                K[i, j] = 1 / (me[i] + me[j])
        pows = [[me[i] ** a for i in range(n)] for a in range(max_ab + 1)]
        for pidx, xx in enumerate(x):
            B = K.copy()
            for i in range(n):
                expo = 2.0 * float(xx) * float(eta[i]) - float(logm[i])
                B[i, i] += mp.e ** mp.mpf(min(expo, 1200.0))
            sols = _mp_solve_columns(B, pows)
            for a in range(max_ab + 1):
                for b in range(a, max_ab + 1):
                    val = float(mp.fsum(pows[a][i] * sols[b][i] for i in range(n)))
                    out[pidx, a, b] = val
                    out[pidx, b, a] = val
    return out


def potential_eval(s: SolitonData, x, orders=("q",)):
    """Potential and x-derivatives at positions x (scalar or array).

    orders is any subset of {"q", "q_x", "q_xx", "q_xxx"}; returns a dict
    mapping each requested name to values shaped like x.
    """
    from .spectral import _needs_mp

    orders = set(orders)
    bad = orders - set(_ORDER_NAMES)
    if bad:
        raise ValueError("unknown derivative orders: %s" % sorted(bad))
    scalar = np.isscalar(x) or np.ndim(x) == 0
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    if s.n == 0:
        res = {name: np.zeros_like(xa) for name in orders}
    else:
        if _needs_mp(s):
            max_ab = max(_ORDER_NAMES.index(name) for name in orders) + 1
            tables = _s_tables_mp(s, xa, max_ab)
        else:
            tables = _s_tables(s, xa)
        res = {}
        for name in orders:
            res[name] = _eval_poly(_Q_POLYS[_ORDER_NAMES.index(name)], tables)
    if scalar:
        res = {k: float(v[0]) for k, v in res.items()}
    return res


def dress(s: SolitonData, g) -> SolitonData:
    """Apply a group element: eta fixed, m_i -> m_i * g(eta_i)^2.

    Multiplication runs factor by factor so that dressing by a product
    equals sequential dressing bit for bit.
    """
    if not g.is_real:
        raise NonRealGroupElement("dressing requires a real group element")
    m = s.m.astype(complex).copy()
    for f in g.factors:
        vals = f.eval_at(s.eta.astype(complex))
        m *= vals * vals
    if np.any(np.abs(m.imag) > 1e-12 * np.abs(m.real)):
        raise NonRealGroupElement("dressed norming constants came out complex")
    return SolitonData(s.eta.copy(), m.real)


# -- Fredholm-determinant cross check -----------------------------------------

def _f_kernel(sigma: SpectralMeasure, s, t):
    """F(s,t) = sum_j sigma_j (e^{xi(s+t)} - e^{xi|s-t|})/(2 xi)."""
    s = np.asarray(s)[:, None]
    t = np.asarray(t)[None, :]
    total = np.zeros(np.broadcast_shapes(s.shape, t.shape))
    for xi, w in zip(sigma.xi, sigma.weight):
        if abs(xi) < 1e-13:
            total += w * 0.5 * (s + t - np.abs(s - t))
        else:
            total += w * (np.exp(xi * (s + t)) - np.exp(xi * np.abs(s - t))) / (2.0 * xi)
    return total


def _logdet_f(sigma, x, nodes):
    u, w = np.polynomial.legendre.leggauss(nodes)
    t = 0.5 * x * (u + 1.0)
    wt = 0.5 * x * w
    sw = np.sqrt(wt)
    K = _f_kernel(sigma, t, t) * np.outer(sw, sw)
    sign, logdet = np.linalg.slogdet(np.eye(nodes) + K)
    if sign <= 0:
        raise QuadratureUnderResolved("Fredholm determinant lost positivity")
    return logdet


def fredholm_potential(sigma: SpectralMeasure, x: float, nodes: int = 64):
    """q(x) = -2 d^2/dx^2 log det(I + F^x) by Nystrom quadrature.

    Diagnostic route only: Gauss-Legendre on [0,x], five-point second
    difference with step 1e-3.  Raises QuadratureUnderResolved when
    doubling the node count moves the value by more than 1e-6.
    """
    if x <= 0:
        raise ValueError("fredholm_potential requires x > 0")
    if sigma.n == 0:
        return 0.0
    h = 1e-3

    def second_diff(nn):
        vals = [_logdet_f(sigma, x + k * h, nn) for k in (-2, -1, 0, 1, 2)]
        return (-vals[0] + 16 * vals[1] - 30 * vals[2] + 16 * vals[3] - vals[4]) / (12 * h * h)

    d2 = second_diff(nodes)
    d2_fine = second_diff(2 * nodes)
    if abs(d2_fine - d2) * 2.0 > 1e-6:
        raise QuadratureUnderResolved(
            "node doubling moved q by %.3g" % (2.0 * abs(d2_fine - d2))
        )
    return -2.0 * d2_fine
