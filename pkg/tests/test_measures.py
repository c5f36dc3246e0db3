import numpy as np
import pytest

from kdvflow.errors import ConstraintViolated, DegenerateMeasure, PoleHit
from kdvflow.measures import (
    SpectralMeasure,
    delta_zeros,
    discretize_ac,
    empty_measure,
    eval_delta,
    eval_m,
    load_measure,
    load_soliton,
    moments,
    norming_constants,
    save_measure,
    save_soliton,
)


def test_eval_m_values(sigma_a):
    assert eval_m(empty_measure(), 2.0) == -2.0
    assert abs(eval_m(sigma_a, 1.0) - (-0.75)) < 1e-15
    assert abs(eval_m(sigma_a, 2.0) - (-1.875)) < 1e-15


def test_eval_m_conjugate_symmetry(sigma_b):
    for z in (1.5 + 0.7j, -0.3 + 2.0j, 0.1 + 0.2j):
        assert abs(eval_m(sigma_b, np.conj(z)) - np.conj(eval_m(sigma_b, z))) == 0.0


def test_eval_m_pole_hit(sigma_a):
    with pytest.raises(PoleHit):
        eval_m(sigma_a, 0.0)


def test_eval_m_herglotz(sigma_a, sigma_b, rng):
    # -M maps the upper half plane into the upper half plane
    for _ in range(100):
        z = complex(rng.uniform(-3, 3), rng.uniform(1e-3, 3))
        for sig in (sigma_a, sigma_b):
            assert (-eval_m(sig, z)).imag > 0


def test_eval_m_reflection(sigma_b):
    mirrored = SpectralMeasure(-sigma_b.xi, sigma_b.weight)
    for z in (2.0, 1.0 + 1.0j, 0.7):
        assert abs(eval_m(mirrored, -z) + eval_m(sigma_b, z)) < 1e-14


def test_eval_delta(sigma_a):
    assert abs(eval_delta(sigma_a, 4.0) - 0.9375) < 1e-15
    assert eval_delta(empty_measure(), 1.7 + 0.3j) == 1.0
    assert abs(eval_delta(sigma_a, 0.25)) < 1e-13


def test_delta_zeros_single(sigma_a):
    mu = delta_zeros(sigma_a)
    assert mu.shape == (1,)
    assert abs(mu[0] - 0.25) < 1e-13


def test_delta_zeros_two_atom(sigma_b):
    # independent oracle: the common-denominator numerator z^2 - 0.45 z + 0.0284
    expected = np.sort(np.roots([1.0, -0.45, 0.0284]).real)
    mu = delta_zeros(sigma_b)
    assert np.abs(mu - expected).max() < 1e-13
    assert all(abs(eval_delta(sigma_b, m + 1e-30j)) < 1e-12 for m in mu)


def test_delta_zero_closed_form():
    for w in (0.1, 0.5, 0.9):
        sig = SpectralMeasure([0.0], [w])
        assert abs(delta_zeros(sig)[0] - w) < 1e-13


def test_delta_zeros_interlace(sigma_b):
    sq = np.sort(sigma_b.xi**2)
    mu = delta_zeros(sigma_b)
    assert sq[0] < mu[0] < sq[1] < mu[1] < 1.0


def test_norming_single(sigma_a, nc_a):
    assert abs(nc_a.eta[0] - 0.5) < 1e-13
    assert abs(nc_a.m[0] - 1.0) < 1e-12


def test_norming_single_closed_form():
    for xi, w in ((0.3, 0.2), (-0.4, 0.1)):
        s = norming_constants(SpectralMeasure([xi], [w]))
        eta = np.sqrt(xi * xi + w)
        assert abs(s.eta[0] - eta) < 1e-13
        assert abs(s.m[0] - (eta + xi) * 2 * eta / (eta - xi)) < 1e-11


def test_norming_positive(nc_b):
    assert np.all(nc_b.m > 0)
    assert np.all(np.diff(nc_b.eta) > 0)


def test_norming_degenerate_rejected():
    sym = SpectralMeasure([-0.3, 0.3], [0.1, 0.1])
    with pytest.raises(DegenerateMeasure):
        norming_constants(sym)


def test_moments(sigma_a, sigma_b):
    assert moments(sigma_a, 0) == 0.25
    assert moments(sigma_a, 1) == 0.0
    assert abs(moments(sigma_b, 1) - 0.04) < 1e-15
    assert abs(moments(sigma_b, 2) - 0.028) < 1e-15


def test_constraint_validation():
    with pytest.raises(ConstraintViolated):
        SpectralMeasure([0.0], [1.0])
    with pytest.raises(ConstraintViolated):
        SpectralMeasure([0.9, 0.95], [0.1, 0.05])


def test_discretize_single_bin():
    xs = np.linspace(-0.5, 0.5, 101)
    sig = discretize_ac(xs, np.full_like(xs, 0.3), 1)
    assert sig.n == 1
    assert abs(sig.xi[0]) < 1e-12
    assert abs(sig.weight[0] - 0.3) < 1e-12


def test_discretize_zero_density():
    xs = np.linspace(-0.5, 0.5, 11)
    assert discretize_ac(xs, np.zeros_like(xs), 4).n == 0


def test_discretize_mass_and_bound():
    xs = np.linspace(-0.5, 0.5, 401)
    rho = 0.3 * (1.0 + 0.05 * xs)
    sig = discretize_ac(xs, rho, 40)
    assert sig.n == 40
    total = np.trapz(rho, xs)
    assert abs(sig.total_mass() - total) < 1e-12
    input_weighted = np.trapz(rho / (1 - xs**2), xs)
    assert sig.weighted_mass() <= input_weighted + 1e-12


def test_discretize_moment_convergence():
    xs = np.linspace(-0.5, 0.5, 801)
    rho = 0.3 * (1.0 + 0.4 * xs * xs)
    exact = [np.trapz(rho * xs**k, xs) for k in range(3)]
    errs = []
    for n in (10, 40):
        sig = discretize_ac(xs, rho, n)
        errs.append(max(abs(moments(sig, k) - exact[k]) for k in range(3)))
    # moments 0..2 converge at least like O(1/N)
    assert errs[1] < errs[0] / 2 + 1e-12
    assert errs[1] < 1e-3


def test_discretize_constraint_violated():
    xs = np.linspace(-0.9, 0.9, 301)
    with pytest.raises(ConstraintViolated):
        discretize_ac(xs, np.full_like(xs, 1.5), 10)


def test_file_roundtrip(tmp_path, sigma_b, nc_b):
    mp = tmp_path / "m.json"
    save_measure(sigma_b, mp)
    back = load_measure(mp)
    assert np.array_equal(back.xi, sigma_b.xi)
    assert np.array_equal(back.weight, sigma_b.weight)
    sp = tmp_path / "s.json"
    save_soliton(nc_b, sp)
    back = load_soliton(sp)
    assert np.array_equal(back.eta, nc_b.eta)
    assert np.array_equal(back.m, nc_b.m)


def test_ode_shot_roundtrip(sigma_b, nc_b):
    # norming constants verified against the Schrodinger shooting oracle
    from kdvflow.soliton import potential_eval
    from kdvflow.spectral import schrodinger_m

    q = lambda xs: potential_eval(nc_b, xs)["q"]
    for lam in (-1.0, -1.44, -2.25, -4.0, -6.25):
        got = schrodinger_m(q, lam)
        want = eval_m(sigma_b, np.sqrt(-lam)).real
        assert abs(got - want) / abs(want) < 1e-4
