"""Finite spectral measures on (-1,1) and their soliton coordinates.

A measure is a finite list of atoms (xi_j, sigma_j) with xi_j in (-1,1),
sigma_j > 0 and sum sigma_j/(1-xi_j^2) < 1.  Such a measure encodes a
reflectionless potential; the bridge to soliton coordinates goes through
the zeros of the rational function

    Delta(z) = 1 + sum_j sigma_j / (xi_j^2 - z),

one zero mu_j per distinct squared position plus one above the largest,
with eta_j = sqrt(mu_j) the soliton decay rates.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConstraintViolated, DegenerateMeasure, PoleHit

_BISECT_TOL = 1e-15
_SQ_DISTINCT_TOL = 1e-12


@dataclass(frozen=True)
class SpectralMeasure:
    """Finite atomic measure on (-1,1), atoms sorted by position."""

    xi: np.ndarray
    weight: np.ndarray

    def __post_init__(self):
        xi = np.atleast_1d(np.asarray(self.xi, dtype=float))
        w = np.atleast_1d(np.asarray(self.weight, dtype=float))
        if xi.shape != w.shape:
            raise ValueError("positions and weights must have equal length")
        order = np.argsort(xi)
        xi, w = xi[order], w[order]
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "weight", w)
        if xi.size:
            if np.any(np.abs(xi) >= 1.0):
                raise ConstraintViolated("atom positions must lie in (-1,1)")
            if np.any(np.diff(xi) <= 0):
                raise ValueError("atom positions must be distinct")
            if np.any(w <= 0):
                raise ValueError("atom weights must be positive")
            if self.weighted_mass() >= 1.0:
                raise ConstraintViolated(
                    "sum of weight/(1-xi^2) must be strictly below 1, got %.6g"
                    % self.weighted_mass()
                )

    @property
    def n(self):
        return self.xi.size

    def weighted_mass(self):
        """sum_j sigma_j/(1-xi_j^2); must stay strictly below 1."""
        if not self.xi.size:
            return 0.0
        return float(np.sum(self.weight / (1.0 - self.xi**2)))

    def total_mass(self):
        return float(np.sum(self.weight))


@dataclass(frozen=True)
class SolitonData:
    """Decay rates eta_i and norming constants m_i, sorted by eta."""

    eta: np.ndarray
    m: np.ndarray

    def __post_init__(self):
        eta = np.atleast_1d(np.asarray(self.eta, dtype=float))
        m = np.atleast_1d(np.asarray(self.m, dtype=float))
        if eta.shape != m.shape:
            raise ValueError("eta and m must have equal length")
        order = np.argsort(eta)
        eta, m = eta[order], m[order]
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "m", m)
        if eta.size:
            if np.any(eta <= 0) or np.any(eta >= 1):
                raise ValueError("decay rates must lie in (0,1)")
            if np.any(np.diff(eta) <= 0):
                raise ValueError("decay rates must be distinct")
            if np.any(m <= 0):
                raise ValueError("norming constants must be positive")

    @property
    def n(self):
        return self.eta.size


def empty_measure():
    return SpectralMeasure(np.empty(0), np.empty(0))


def empty_soliton():
    return SolitonData(np.empty(0), np.empty(0))


def eval_m(sigma: SpectralMeasure, z):
    """Weyl function M(z) = -z - sum_j sigma_j/(xi_j - z).

    Maps the open upper half plane into the lower half plane (-M is
    Herglotz) and is real on the real axis away from the atoms.
    """
    z = complex(z)
    if sigma.n == 0:
        return -z
    d = sigma.xi - z
    if np.any(np.abs(d) < 1e-14):
        raise PoleHit("evaluation point coincides with an atom position")
    return -z - complex(np.sum(sigma.weight / d))


def eval_delta(sigma: SpectralMeasure, z):
    """Delta(z) = 1 + sum_j sigma_j/(xi_j^2 - z); tends to 1 at infinity."""
    z = complex(z)
    if sigma.n == 0:
        return 1.0 + 0j
    d = sigma.xi**2 - z
    if np.any(np.abs(d) < 1e-14):
        raise PoleHit("evaluation point coincides with a squared atom position")
    return 1.0 + complex(np.sum(sigma.weight / d))


def _delta_real(sigma, x):
    return 1.0 + np.sum(sigma.weight / (sigma.xi**2 - x))


def _bisect(f, lo, hi):
    flo = f(lo)
    fhi = f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0:
        raise ValueError("no sign change in bracket [%g, %g]" % (lo, hi))
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if hi - lo < _BISECT_TOL * max(1.0, abs(mid)):
            break
        fm = f(mid)
        if fm == 0.0:
            return mid
        if flo * fm < 0:
            hi = mid
        else:
            lo, flo = mid, fm
    return 0.5 * (lo + hi)


def delta_zeros(sigma: SpectralMeasure):
    """All zeros 0 < mu_1 < ... < mu_n of Delta, by bracketed bisection.

    Delta is strictly increasing between consecutive poles xi_(k)^2 and
    changes sign across each gap, so every bracket holds exactly one zero;
    the top zero sits between the largest pole and 1.
    """
    if sigma.n == 0:
        raise ValueError("delta_zeros requires a non-empty measure")
    sq = np.unique(sigma.xi**2)
    span = max(1.0, sq[-1])
    eps = 1e-14 * span
    f = lambda x: _delta_real(sigma, x)
    zeros = []
    for k in range(len(sq) - 1):
        zeros.append(_bisect(f, sq[k] + eps, sq[k + 1] - eps))
    zeros.append(_bisect(f, sq[-1] + eps, 1.0))
    return np.asarray(zeros)


def norming_constants(sigma: SpectralMeasure) -> SolitonData:
    """Soliton coordinates (eta_i, m_i) of a finite measure.

    eta_i = sqrt(mu_i) with mu_i the zeros of Delta, and

      m_i = prod_j (eta_i+xi_j)(eta_i+eta_j)
            / ( prod_{j!=i} (eta_i-eta_j) * prod_j (eta_i-xi_j) ),

    which is positive; zero interlacing keeps every factor off zero.
    """
    if sigma.n == 0:
        raise ValueError("norming_constants requires a non-empty measure")
    sq = sigma.xi**2
    if np.any(np.abs(np.subtract.outer(sq, sq)[~np.eye(sigma.n, dtype=bool)]) < _SQ_DISTINCT_TOL):
        raise DegenerateMeasure("two atoms share a squared position")
    eta = np.sqrt(delta_zeros(sigma))
    xi = sigma.xi
    m = np.empty_like(eta)
    for i in range(eta.size):
        num = np.prod(eta[i] + xi) * np.prod(eta[i] + eta)
        den = np.prod(eta[i] - eta[np.arange(eta.size) != i]) * np.prod(eta[i] - xi)
        m[i] = num / den
    if np.any(m <= 0):
        raise DegenerateMeasure("norming constant came out non-positive")
    return SolitonData(eta, m)


def moments(sigma: SpectralMeasure, k: int):
    """k-th moment sum_j sigma_j xi_j^k."""
    if sigma.n == 0:
        return 0.0
    return float(np.sum(sigma.weight * sigma.xi ** k))


def moment_vector(sigma: SpectralMeasure, count: int):
    """Moments 0..count-1 as an array (vectorized helper)."""
    if sigma.n == 0:
        return np.zeros(count)
    return (sigma.weight[None, :] * sigma.xi[None, :] ** np.arange(count)[:, None]).sum(axis=1)


def discretize_ac(xs, density, n_atoms: int) -> SpectralMeasure:
    """Equal-mass discretization of a tabulated density on [-a,a], a < 1.

    Splits the mass into n_atoms equal bins and places each bin's mass at
    its mass centroid.  Centroid placement keeps the (1-xi^2)^-1 weighted
    mass of the output below that of the input (the weight is convex), and
    preserves moments 0 and 1 exactly bin by bin.
    """
    xs = np.asarray(xs, dtype=float)
    rho = np.asarray(density, dtype=float)
    if xs.ndim != 1 or xs.size < 2 or xs.shape != rho.shape:
        raise ValueError("density must be tabulated on a 1-d grid")
    if np.any(np.abs(xs) >= 1.0):
        raise ConstraintViolated("density support must stay inside (-1,1)")
    if np.any(rho < 0):
        raise ValueError("density must be nonnegative")
    fine = np.linspace(xs[0], xs[-1], max(4096, 16 * xs.size))
    rf = np.interp(fine, xs, rho)
    total = np.trapz(rf, fine)
    if total <= 0:
        return empty_measure()
    wmass = np.trapz(rf / (1.0 - fine**2), fine)
    if wmass >= 1.0:
        raise ConstraintViolated(
            "input density violates the weighted-mass bound: %.6g >= 1" % wmass
        )
    # cumulative mass on the fine grid, then equal-mass bin edges
    seg = 0.5 * (rf[1:] + rf[:-1]) * np.diff(fine)
    cdf = np.concatenate([[0.0], np.cumsum(seg)])
    edges = np.interp(np.linspace(0.0, total, n_atoms + 1), cdf, fine)
    xi = np.empty(n_atoms)
    w = np.empty(n_atoms)
    xmid = 0.5 * (fine[1:] + fine[:-1])
    for k in range(n_atoms):
        sel = (xmid >= edges[k]) & (xmid <= edges[k + 1])
        mass = np.sum(seg[sel])
        if mass <= 0:
            # degenerate empty bin; place midpoint with tiny mass share
            xi[k] = 0.5 * (edges[k] + edges[k + 1])
            w[k] = total / n_atoms
            continue
        xi[k] = np.sum(seg[sel] * xmid[sel]) / mass
        w[k] = mass
    w *= total / np.sum(w)
    return SpectralMeasure(xi, w)


# -- file formats ------------------------------------------------------------
# Numbers are stored as decimal strings (17 significant digits) so files do
# not drift across platforms.


def _num(x):
    return "%.17g" % float(x)


def save_measure(sigma: SpectralMeasure, path):
    doc = {"atoms": [{"xi": _num(x), "weight": _num(w)} for x, w in zip(sigma.xi, sigma.weight)]}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_measure(path) -> SpectralMeasure:
    with open(path) as fh:
        doc = json.load(fh)
    atoms = doc.get("atoms", [])
    if not atoms:
        return empty_measure()
    xi = np.array([float(a["xi"]) for a in atoms])
    w = np.array([float(a["weight"]) for a in atoms])
    return SpectralMeasure(xi, w)


def save_soliton(s: SolitonData, path):
    doc = {"pairs": [{"eta": _num(e), "m": _num(m)} for e, m in zip(s.eta, s.m)]}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_soliton(path) -> SolitonData:
    with open(path) as fh:
        doc = json.load(fh)
    pairs = doc.get("pairs", [])
    if not pairs:
        return empty_soliton()
    eta = np.array([float(p["eta"]) for p in pairs])
    m = np.array([float(p["m"]) for p in pairs])
    return SolitonData(eta, m)
