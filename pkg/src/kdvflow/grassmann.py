"""Finite-order matrix model of a Grassmannian point.

A point W is stored through the operator A mapping the analytic half to
the co-analytic half of its graph decomposition.  Column n of the N x N
matrix holds the coefficients of A e_n on z^-1 ... z^-N.  Columns 0 and 1
are the generating functions Phi = A e_0 and Psi = A e_1; the remaining
columns follow from the two-term recursion

    A e_{n+2} = shift2(A e_n) - (A e_n)_1 Psi - (A e_n)_2 Phi,

where (f)_k is the z^-k coefficient and shift2 drops two leading entries.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NearSingular, OrderMismatch, ReconstructionFailed
from .measures import SpectralMeasure, moment_vector

_DET_GATE = 1e-12


@dataclass(frozen=True)
class TruncatedW:
    order: int
    A: np.ndarray
    measure: SpectralMeasure | None = field(default=None, compare=False)

    def __post_init__(self):
        n = self.order
        if n < 8 or (n & (n - 1)) != 0:
            raise ValueError("order must be a power of two, at least 8")
        if self.A.shape != (n, n):
            raise ValueError("A must be order x order")

    @property
    def phi(self):
        return self.A[:, 0]

    @property
    def psi(self):
        return self.A[:, 1]

    @property
    def a1(self):
        return self.A[0, 0]

    @property
    def is_real(self):
        return not np.iscomplexobj(self.A) or float(np.abs(self.A.imag).max()) < 1e-13


@dataclass(frozen=True)
class PiSample:
    z: complex
    matrix: np.ndarray
    delta: complex


def eval_hminus(coeffs, z):
    """Evaluate sum_k c_k z^-k for a coefficient vector (c_1, ..., c_N)."""
    w = 1.0 / np.asarray(z, dtype=complex)
    out = np.zeros_like(w)
    for c in coeffs[::-1]:
        out = (out + c) * w
    return out


def even_part(coeffs):
    """w-plane coefficients of f_e: f_e(w) = sum_m e[m] w^-(m+1)."""
    return coeffs[1::2]


def odd_part(coeffs):
    """w-plane coefficients of f_o: f_o(w) = sum_m o[m] w^-(m+1)."""
    return coeffs[0::2]


def from_generating(phi, psi, order: int, measure=None) -> TruncatedW:
    """Build all columns from Phi and Psi via the recursion."""
    phi = np.asarray(phi)
    psi = np.asarray(psi)
    dtype = complex if (np.iscomplexobj(phi) or np.iscomplexobj(psi)) else float
    A = np.zeros((order, order), dtype=dtype)
    A[: phi.size, 0] = phi[:order]
    A[: psi.size, 1] = psi[:order]
    for n in range(order - 2):
        col = A[:, n]
        nxt = np.zeros(order, dtype=dtype)
        nxt[:-2] = col[2:]
        nxt -= col[0] * A[:, 1] + col[1] * A[:, 0]
        A[:, n + 2] = nxt
    return TruncatedW(order, A, measure)


def from_measure(sigma: SpectralMeasure, order: int) -> TruncatedW:
    """Canonical model of a finite measure: Phi = 0, psi_k = -c_{k-1}."""
    psi = -moment_vector(sigma, order)
    return from_generating(np.zeros(order), psi, order, measure=sigma)


def pi_sample(W: TruncatedW, z) -> PiSample:
    """Evaluate Pi(z) = [[1+Phi_e, Psi_e], [Phi_o, 1+Psi_o]] at |z| >= 1."""
    z = complex(z)
    if abs(z) < 1.0 - 1e-12:
        raise ValueError("pi_sample requires |z| >= 1")
    pe = complex(eval_hminus(even_part(W.phi), z))
    po = complex(eval_hminus(odd_part(W.phi), z))
    se = complex(eval_hminus(even_part(W.psi), z))
    so = complex(eval_hminus(odd_part(W.psi), z))
    mat = np.array([[1.0 + pe, se], [po, 1.0 + so]])
    delta = mat[0, 0] * mat[1, 1] - mat[0, 1] * mat[1, 0]
    if abs(delta) < _DET_GATE:
        raise NearSingular("Pi sample is numerically singular at z=%s" % z)
    return PiSample(z, mat, delta)


def pi_series(W: TruncatedW, nterms: int):
    """w-plane series of the four Pi entries, index k <-> w^-k.

    Returns (p11, p12, p21, p22) arrays of length nterms with p11[0] = 1,
    p22[0] = 1 (the identity part) and the H-minus tails after.
    """
    nterms = min(nterms, W.order // 2)
    def tail(c):
        out = np.zeros(nterms, dtype=c.dtype)
        out[1: 1 + min(nterms - 1, c.size)] = c[: nterms - 1]
        return out

    p11 = tail(even_part(W.phi)); p11[0] = 1.0
    p12 = tail(even_part(W.psi))
    p21 = tail(odd_part(W.phi))
    p22 = tail(odd_part(W.psi)); p22[0] = 1.0
    return p11, p12, p21, p22


def coordinates(W: TruncatedW, u, grid_factor: int = 4):
    """Disk coordinates (gamma, delta) of f = u + A u, u in truncated H+.

    Applies Pi^-1 to the even/odd split of f on a circle grid and inverse
    discrete Fourier transforms back to Taylor coefficients.
    """
    u = np.asarray(u, dtype=complex)
    if u.size > W.order:
        raise ValueError("u longer than the truncation order")
    uu = np.zeros(W.order, dtype=complex)
    uu[: u.size] = u
    minus = W.A @ uu                    # H- coefficients of A u
    M = grid_factor * W.order
    theta = 2.0 * np.pi * np.arange(M) / M
    w = np.exp(1j * theta)
    r = np.exp(0.5j * theta)

    def phi_at(zz):
        plus = np.polynomial.polynomial.polyval(zz, uu)
        return plus + eval_hminus(minus, zz)

    fp, fm = phi_at(r), phi_at(-r)
    fe = 0.5 * (fp + fm)
    fo = 0.5 * (fp - fm) / r
    p11 = 1.0 + eval_hminus(even_part(W.phi), w)
    p12 = eval_hminus(even_part(W.psi), w)
    p21 = eval_hminus(odd_part(W.phi), w)
    p22 = 1.0 + eval_hminus(odd_part(W.psi), w)
    det = p11 * p22 - p12 * p21
    gam = (p22 * fe - p12 * fo) / det
    dlt = (-p21 * fe + p11 * fo) / det
    gcoef = np.fft.fft(gam) / M
    dcoef = np.fft.fft(dlt) / M
    keep = W.order // 2 + 1
    gcoef, dcoef = gcoef[:keep], dcoef[:keep]

    # reconstruction residual in L2 on the circle
    zz = np.exp(1j * np.pi * np.arange(2 * M) / M)
    ww = zz * zz
    gv = np.polynomial.polynomial.polyval(ww, gcoef)
    dv = np.polynomial.polynomial.polyval(ww, dcoef)
    lhs = gv * (1.0 + eval_hminus(W.phi, zz)) + dv * (zz + eval_hminus(W.psi, zz))
    rhs = np.polynomial.polynomial.polyval(zz, uu) + eval_hminus(minus, zz)
    resid = float(np.sqrt(np.mean(np.abs(lhs - rhs) ** 2)))
    if resid > 1e-6:
        raise ReconstructionFailed("coordinate residual %.3g" % resid)
    return gcoef, dcoef, resid


def hs_distance(W1: TruncatedW, W2: TruncatedW):
    """Hilbert-Schmidt distance, Frobenius norm of the A difference."""
    if W1.order != W2.order:
        raise OrderMismatch("orders %d and %d differ" % (W1.order, W2.order))
    return float(np.linalg.norm(W1.A - W2.A))


def hs_distance_quadrature(W1: TruncatedW, W2: TruncatedW, grid_factor: int = 4):
    """Second route to the distance: double circle quadrature of the
    difference quotient of tPi(theta)^-1 tPi(phi), trapezoid on offset
    grids.  The transposed-matrix convention is the one that reproduces
    the Frobenius norm exactly (checked against hs_distance on fixtures);
    it matches the convention of the dual identity in pi-inverse form.
    """
    if W1.order != W2.order:
        raise OrderMismatch("orders %d and %d differ" % (W1.order, W2.order))
    M = grid_factor * W1.order
    th = 2.0 * np.pi * np.arange(M) / M
    ph = th + np.pi / M
    zt, zp = np.exp(1j * th), np.exp(1j * ph)

    def stack(W, zz):
        p11 = 1.0 + eval_hminus(even_part(W.phi), zz)
        p12 = eval_hminus(even_part(W.psi), zz)
        p21 = eval_hminus(odd_part(W.phi), zz)
        p22 = 1.0 + eval_hminus(odd_part(W.psi), zz)
        return np.stack([np.stack([p11, p12], -1), np.stack([p21, p22], -1)], -2)

    def ratio(W):
        Pt = stack(W, zt)
        Pp = stack(W, zp)
        det = Pt[:, 0, 0] * Pt[:, 1, 1] - Pt[:, 0, 1] * Pt[:, 1, 0]
        inv = np.empty_like(Pt)
        inv[:, 0, 0], inv[:, 1, 1] = Pt[:, 1, 1], Pt[:, 0, 0]
        inv[:, 0, 1], inv[:, 1, 0] = -Pt[:, 0, 1], -Pt[:, 1, 0]
        inv /= det[:, None, None]
        # tPi(th)^-1 tPi(ph) = transpose of Pi(ph) Pi(th)^-1
        return np.einsum("lab,jbc->jlac", Pp, inv)

    diff = ratio(W1) - ratio(W2)
    den = zt[:, None] - zp[None, :]
    val = np.sum(np.abs(diff) ** 2, axis=(-1, -2)) / np.abs(den) ** 2
    return float(np.sqrt(val.sum() / (M * M)))


def reflect_dual(W: TruncatedW, which: str) -> TruncatedW:
    """Reflection x -> -x or the dual point; both are involutions.

    reflect flips entry (k, n) by (-1)^(n+k); dual is the negated
    conjugate transpose in the depth/column index identification.
    """
    if which == "reflect":
        depth = np.arange(1, W.order + 1)
        col = np.arange(W.order)
        signs = np.outer((-1.0) ** depth, (-1.0) ** col)
        meas = None
        if W.measure is not None:
            meas = SpectralMeasure(-W.measure.xi, W.measure.weight)
        return TruncatedW(W.order, W.A * signs, meas)
    if which == "dual":
        return TruncatedW(W.order, -np.conj(W.A).T)
    raise ValueError("which must be 'reflect' or 'dual'")
