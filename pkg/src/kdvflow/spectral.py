"""Weyl functions, Baker-Akhiezer functions and measure recovery.

Two independent routes to the Weyl function coexist on purpose: the
algebraic one through stored coefficient series (weyl_M, soliton_m) and a
direct Schrodinger shooting integration (schrodinger_m).  They must agree
on fixtures, which is the main spectral acceptance gate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BlowUp, BoundaryPoint, PhiPole, PoleHit, PoleNotIsolated
from .grassmann import TruncatedW, eval_hminus
from .measures import SolitonData, SpectralMeasure, eval_m
from .soliton import potential_eval
from . import tau as taumod


@dataclass(frozen=True)
class WeylSample:
    z: complex
    M: complex
    m_plus: complex
    m_minus: complex


@dataclass(frozen=True)
class BAFunctionSample:
    x: float
    z: complex
    f: complex
    fprime: complex


def weyl_M(W: TruncatedW, z) -> WeylSample:
    """M(z) = -(z + Psi(z))/(1 + Phi(z)) - a1.

    Measure-built points evaluate the rational form exactly; otherwise the
    stored series is used, which converges for |z| > 1.  The half-line
    functions satisfy m_plus(-z^2) = M(z) and m_minus(-z^2) = -M(-z).
    """
    z = complex(z)
    if W.measure is not None:
        M = eval_m(W.measure, z)
        Mm = eval_m(W.measure, -z)
    else:
        denom = 1.0 + complex(eval_hminus(W.phi, z))
        if abs(denom) < 1e-12:
            raise PhiPole("1 + Phi vanishes at z=%s" % z)
        M = -(z + complex(eval_hminus(W.psi, z))) / denom - complex(W.a1)
        denom_m = 1.0 + complex(eval_hminus(W.phi, -z))
        if abs(denom_m) < 1e-12:
            raise PhiPole("1 + Phi vanishes at z=%s" % (-z))
        Mm = -(-z + complex(eval_hminus(W.psi, -z))) / denom_m - complex(W.a1)
    return WeylSample(z, M, M, -Mm)


def soliton_m(s: SolitonData, z):
    """Closed-form Weyl function of an n-soliton, rational in z.

    Built from the decaying Jost solution written through the Gram matrix:
    with w = G(0)^-1 v(0),

        N(z)  = 1 - sum_j (w_j v_j)/(z + eta_j),
        M(z)  = -z + N'(0)/N(0)(z),

    where ' is the spatial derivative, evaluated exactly from the rank-one
    structure.  Poles of M are the atoms of the representing measure, so
    this is the evaluator of choice on the real interval (-1, 1).
    """
    if s.n == 0:
        return -np.asarray(z, dtype=complex) if np.ndim(z) else -complex(z)
    p, r, eta, dps = _soliton_m_state(s)
    if dps is None:
        z = np.asarray(z, dtype=complex)
        den = z[..., None] + eta
        N = 1.0 - np.sum(p / den, axis=-1)
        Nd = -np.sum(r / den, axis=-1)
        out = -z + Nd / N
        return out if out.shape else complex(out)
    import mpmath as mp

    def one(zz):
        with mp.workdps(dps):
            zc = mp.mpc(complex(zz))
            N = 1 - mp.fsum(p[j] / (zc + mp.mpf(float(eta[j]))) for j in range(s.n))
            Nd = -mp.fsum(r[j] / (zc + mp.mpf(float(eta[j]))) for j in range(s.n))
            return complex(-zc + Nd / N)

    if np.ndim(z):
        return np.array([one(zz) for zz in np.ravel(z)]).reshape(np.shape(z))
    return one(z)


def _needs_mp(s: SolitonData):
    """Dense soliton gases sit in an exponentially skewed coordinate chart:
    the Cauchy-kernel solves cancel ~n + log10(m-spread) digits, beyond
    double precision for more than a handful of atoms."""
    if s.n <= 6:
        return False
    return True


def _mp_dps(s: SolitonData):
    spread = float(np.ptp(np.log10(s.m))) if s.n else 0.0
    return int(40 + s.n + 0.6 * spread)


_STATE_CACHE = {}


def _soliton_m_state(s: SolitonData):
    """(w.v, (w.v)', eta) at x = 0 for the Jost representation.

    Solved through B = diag(1/m) + K with K the Cauchy kernel, in which
    the norming-constant scale cancels from every intermediate:

        p = B^-1 1,   r = -B^-1 eta + (sum p) p - eta * p.

    Gases run in extended precision (the p's reach 1e13 with alternating
    signs; the rational function they represent is tame, its partial
    fraction coefficients are not).  States are cached per data set.
    """
    key = (s.eta.tobytes(), s.m.tobytes())
    hit = _STATE_CACHE.get(key)
    if hit is not None:
        return hit
    eta, m = s.eta, s.m
    if not _needs_mp(s):
        K = 1.0 / np.add.outer(eta, eta)
        B = K + np.diag(np.exp(np.minimum(-np.log(m), 460.0)))
        sol = np.linalg.solve(B, np.stack([np.ones(s.n), eta], axis=1))
        p = sol[:, 0]
        r = -sol[:, 1] + p.sum() * p - eta * p
        state = (p, r, eta, None)
    else:
        import mpmath as mp

        dps = _mp_dps(s)
        n = s.n
        logm = np.log(m)
        with mp.workdps(dps):
            B = mp.matrix(n, n)
            for i in range(n):
                ei = mp.mpf(float(eta[i]))
                for j in range(n):
                    B[i, j] = 1 / (ei + mp.mpf(float(eta[j])))
                B[i, i] += mp.e ** (-mp.mpf(float(logm[i])))
            s1 = mp.lu_solve(B, mp.matrix([1] * n))
            s2 = mp.lu_solve(B, mp.matrix([float(e) for e in eta]))
            p = [s1[i] for i in range(n)]
            sp = mp.fsum(p)
            r = [-s2[i] + sp * p[i] - mp.mpf(float(eta[i])) * p[i] for i in range(n)]
        state = (p, r, eta, dps)
    if len(_STATE_CACHE) > 16:
        _STATE_CACHE.clear()
    _STATE_CACHE[key] = state
    return state


def soliton_moments(s: SolitonData, count: int):
    """Moments c_0..c_{count-1} of the representing measure, via the
    large-z expansion of M(z) + z = N'/N."""
    if s.n == 0:
        return np.zeros(count)
    p, r, eta, dps = _soliton_m_state(s)
    if dps is None:
        # 1/(z+eta) = sum_k (-eta)^k z^-k-1
        pows = (-eta[None, :]) ** np.arange(count)[:, None]
        a = -(pows * p).sum(axis=1)      # series of N - 1, coeff of z^-k-1
        b = -(pows * r).sum(axis=1)      # series of N'
        # divide: (b0 z^-1 + b1 z^-2 + ...) / (1 + a0 z^-1 + ...)
        c = np.empty(count)
        for k in range(count):
            acc = b[k]
            for j in range(k):
                acc -= c[j] * a[k - 1 - j]
            c[k] = acc
        return c
    import mpmath as mp

    with mp.workdps(dps):
        me = [mp.mpf(float(e)) for e in eta]
        a = [-mp.fsum(p[j] * (-me[j]) ** k for j in range(s.n)) for k in range(count)]
        b = [-mp.fsum(r[j] * (-me[j]) ** k for j in range(s.n)) for k in range(count)]
        c = []
        for k in range(count):
            acc = b[k]
            for j in range(k):
                acc -= c[j] * a[k - 1 - j]
            c.append(acc)
        return np.array([float(x) for x in c])


def reflectionless_residual(source, xi: float):
    """|m_+ + conj(m_-)| at xi + i0, evaluated as |M(i sqrt(xi)) - conj(M(-i sqrt(xi)))|.

    Vanishes identically for real-coefficient rational Weyl functions.
    Accepts a SpectralMeasure, SolitonData or TruncatedW.
    """
    if not 0.0 < xi <= 1.0:
        raise ValueError("xi must lie in (0, 1]")
    r = 1j * np.sqrt(xi)
    if isinstance(source, SpectralMeasure):
        a, b = eval_m(source, r), eval_m(source, -r)
    elif isinstance(source, SolitonData):
        a, b = soliton_m(source, r), soliton_m(source, -r)
    else:
        a, b = weyl_M(source, r).M, weyl_M(source, -r).M
    return abs(a - np.conj(b))


def schrodinger_m(q, lam: float, L: float = 40.0, step: float = 1e-3):
    """Shooting value m_+ = f'(0)/f(0) of -f'' + q f = lam f.

    Integrates backward from x = L with decaying data f = 1, f' = -kappa,
    classical fixed-step fourth order.  lam must sit below the spectrum.
    """
    if lam >= 0:
        raise ValueError("lam must be negative")
    kappa = np.sqrt(-lam)
    nsteps = int(round(L / step))
    h = -L / nsteps
    xs = np.linspace(L, 0.0, nsteps + 1)
    mids = xs[:-1] + 0.5 * h
    qx = np.asarray(q(xs), dtype=float)
    qm = np.asarray(q(mids), dtype=float)
    f, fp = 1.0, -kappa
    for i in range(nsteps):
        c0, cm, c1 = qx[i] - lam, qm[i] - lam, qx[i + 1] - lam
        k1f, k1p = fp, c0 * f
        k2f, k2p = fp + 0.5 * h * k1p, cm * (f + 0.5 * h * k1f)
        k3f, k3p = fp + 0.5 * h * k2p, cm * (f + 0.5 * h * k2f)
        k4f, k4p = fp + h * k3p, c1 * (f + h * k3f)
        f += h * (k1f + 2 * k2f + 2 * k3f + k4f) / 6.0
        fp += h * (k1p + 2 * k2p + 2 * k3p + k4p) / 6.0
        if abs(f) > 1e150:
            raise BlowUp("solution overflowed; lam inside the spectrum?")
    return fp / f


def baker_akhiezer(W: TruncatedW, x: float, z, tol: float = 1e-9) -> BAFunctionSample:
    """f(x,z) = e^{-xz} tau_{shift(x)^-1 W}(q_z) via the cocycle.

    The ratio tau_W(shift(x) q_z)/tau_W(shift(x)) carries the normalized
    value; fprime comes from a five-point stencil in x.
    """
    z = complex(z)

    def val(xx):
        t_num = complex(taumod.tau_det(W, taumod.shift(xx) * taumod.q_factor(z), tol)[0])
        t_den = complex(taumod.tau_det(W, taumod.shift(xx), tol)[0])
        if abs(t_den) < 1e-10:
            raise taumod.TauVanishes("tau(shift) vanished at x=%g" % xx)
        return np.exp(-xx * z) * t_num / t_den

    h = 1e-4
    f = val(x)
    stencil = [val(x + k * h) for k in (-2, -1, 1, 2)]
    fprime = (stencil[0] - 8 * stencil[1] + 8 * stencil[2] - stencil[3]) / (12 * h)
    return BAFunctionSample(x, z, f, fprime)


def ba_a1(W: TruncatedW, x: float, zeta: float = 32.0, tol: float = 1e-9):
    """a1(x) from the large-z limit zeta (tau-ratio - 1), Richardson in zeta."""

    def u(zz):
        t_num = complex(taumod.tau_det(W, taumod.shift(x) * taumod.q_factor(zz), tol)[0])
        t_den = complex(taumod.tau_det(W, taumod.shift(x), tol)[0])
        return zz * (t_num / t_den - 1.0)

    return (8.0 * u(4 * zeta) - 6.0 * u(2 * zeta) + u(zeta)) / 3.0


def omega(z, intervals):
    """Harmonic measure of a union of intervals seen from z in C+."""
    z = complex(z)
    if z.imag <= 0:
        raise BoundaryPoint("omega requires Im z > 0")
    x, y = z.real, z.imag
    total = 0.0
    for (a, b) in intervals:
        if b < a:
            a, b = b, a
        total += (np.arctan((b - x) / y) - np.arctan((a - x) / y)) / np.pi
    return float(total)


def negate_intervals(intervals):
    return [(-b, -a) for (a, b) in intervals]


def vd_integral(m, interval, intervals_s, nodes: int = 64, y0: float = 1e-4):
    """Gauss-Legendre quadrature of  int_A omega_{m(xi + i y0)}(S) dxi.

    Returns (value, offset_sensitivity) where the second entry reports the
    change when y0 is halved.
    """
    a, b = interval
    u, w = np.polynomial.legendre.leggauss(nodes)
    xs = 0.5 * (b - a) * u + 0.5 * (a + b)
    ws = 0.5 * (b - a) * w

    def integral(yy):
        vals = [omega(complex(m(complex(x, yy))), intervals_s) for x in xs]
        return float(np.dot(ws, vals))

    v = integral(y0)
    v2 = integral(0.5 * y0)
    return v, abs(v - v2)


def measure_from_weyl(m, resolution: float = 1e-4, support=(-1.0, 1.0)) -> SpectralMeasure:
    """Recover a finite atomic measure from its rational Weyl function.

    Scans 1/(m(z)+z) for sign changes on the support interval, separates
    genuine poles (where |m+z| blows up) from zeros of m+z, bisects each
    pole to 1e-12 and weighs it by the symmetrized residue.
    """
    lo, hi = support
    n = int(np.ceil((hi - lo) / resolution))
    xs = np.linspace(lo + 0.5 * resolution, hi - 0.5 * resolution, n)

    def h(x):
        try:
            v = complex(m(complex(x, 0.0)))
        except PoleHit:
            return 0.0
        g = (v + x).real
        return np.inf if g == 0.0 else 1.0 / g

    hv = np.array([h(x) for x in xs])
    positions = []
    for i in range(n - 1):
        if not (np.isfinite(hv[i]) and np.isfinite(hv[i + 1])):
            continue
        if hv[i] == 0.0 or hv[i] * hv[i + 1] >= 0:
            continue
        a, b = xs[i], xs[i + 1]
        fa = hv[i]
        for _ in range(80):
            mid = 0.5 * (a + b)
            fm = h(mid)
            if fm == 0.0:
                a = b = mid
                break
            if not np.isfinite(fm):
                break
            if fa * fm <= 0:
                b = mid
            else:
                a, fa = mid, fm
            if b - a < 1e-12:
                break
        root = 0.5 * (a + b)
        # pole of m <=> |m + z| large at the located point
        try:
            near = abs(complex(m(complex(root, 0.0))) + root)
        except PoleHit:
            near = np.inf
        if near > 1e3:
            positions.append(root)
    if not positions:
        return SpectralMeasure(np.empty(0), np.empty(0))
    positions = np.asarray(positions)
    delta = 1e-5
    weights = []
    for xi in positions:
        right = delta * complex(m(complex(xi + delta, 0.0)))
        left = -delta * complex(m(complex(xi - delta, 0.0)))
        wgt = 0.5 * (right + left).real
        if wgt <= 0:
            raise PoleNotIsolated("non-positive residue %.3g at %.6f" % (wgt, xi))
        weights.append(wgt)
    sigma = SpectralMeasure(positions, np.asarray(weights))
    # constructor enforces the strict weighted-mass bound
    for z in (1.7, 2.3, 3.1, 0.5j + 1.2, 5.0):
        back = eval_m(sigma, z)
        ref = complex(m(complex(z)))
        if abs(back - ref) > 1e-6 * max(1.0, abs(ref)):
            raise PoleNotIsolated(
                "round trip failed at z=%s: %.3g" % (z, abs(back - ref))
            )
    return sigma
