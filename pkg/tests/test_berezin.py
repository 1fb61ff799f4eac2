import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bergman_lab import berezin as bz
from bergman_lab import kernel, weights
from bergman_lab.errors import NotInXError

from conftest import disk_points

FOCK = weights.make_fock()
POWER2 = weights.make_radial_power(2)
QUARTIC = weights.make_quartic_perturbation(0.1)


@pytest.mark.parametrize("w", [FOCK, POWER2, QUARTIC], ids=lambda w: w.name)
@pytest.mark.parametrize("z0", [0j, 0.5 - 0.2j, 1.3j, 2.0])
def test_mass_is_one(w, z0):
    ev = bz.berezin(kernel.build_space(w, 12.0, 12), z0)
    assert bz.mass(ev) == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("n", [1, 3, 20])
def test_fock_origin_density(n, rng):
    m = 7.0
    ev = bz.berezin(kernel.build_space(FOCK, m, n), 0j)
    z = disk_points(rng, 50, 2.0)
    assert np.allclose(bz.density(ev, z), m * np.exp(-m * np.abs(z) ** 2), rtol=1e-12)


def test_density_at_base_point_is_one_point():
    b = kernel.build_space(QUARTIC, 10.0, 10)
    ev = bz.berezin(b, 0.4 + 0.1j)
    assert bz.density(ev, 0.4 + 0.1j) == pytest.approx(kernel.one_point(b, 0.4 + 0.1j), rel=1e-13)
    assert ev.one_point_z0 == pytest.approx(kernel.one_point(b, 0.4 + 0.1j), rel=1e-13)


def test_transform_examples():
    m = 9.0
    ev = bz.berezin(kernel.build_space(FOCK, m, 9), 0j)
    assert bz.transform(ev, lambda z: np.ones(z.shape)) == pytest.approx(1.0, abs=1e-6)
    assert bz.transform(ev, lambda z: np.full(z.shape, -2.5)) == pytest.approx(-2.5, abs=1e-6)
    assert bz.transform(ev, lambda z: np.abs(z) ** 2) == pytest.approx(1 / m, abs=1e-6)


def test_normalized_density_fock_origin(rng):
    ev = bz.berezin(kernel.build_space(FOCK, 13.0, 5), 0j)
    z = disk_points(rng, 50, 3.0)
    assert np.allclose(bz.normalized_density(ev, z), np.exp(-np.abs(z) ** 2), rtol=1e-12)


def test_normalized_density_mass():
    ev = bz.berezin(kernel.build_space(QUARTIC, 16.0, 16), 0.3)
    q = bz.rescaled_quadrature()
    assert q.integrate(bz.normalized_density(ev, q.nodes)) == pytest.approx(1.0, abs=1e-6)


def test_normalized_density_at_zero_tends_to_one():
    gaps = []
    for m in (8, 16, 32, 64):
        ev = bz.berezin(kernel.build_space(QUARTIC, m, m), 0.3)
        gaps.append(abs(bz.normalized_density(ev, 0j) - 1.0))
    assert all(a > b for a, b in zip(gaps, gaps[1:]))


def test_not_in_x():
    ev = bz.berezin(kernel.build_space(POWER2, 8.0, 8), 0j)
    with pytest.raises(NotInXError):
        bz.normalized_density(ev, 0.1)
    with pytest.raises(NotInXError):
        bz.tv_to_gaussian(ev)


@pytest.mark.parametrize("m", [5, 50])
def test_tv_exact_gaussian(m):
    for n in (1, 4, 30):
        assert bz.tv_to_gaussian(bz.berezin(kernel.build_space(FOCK, m, n), 0j)) <= 1e-6


@settings(max_examples=15)
@given(m=st.sampled_from([5.0, 50.0]), n=st.integers(1, 80))
def test_tv_exact_gaussian_any_n(m, n):
    assert bz.tv_to_gaussian(bz.berezin(kernel.build_space(FOCK, m, n), 0j)) <= 1e-6


def test_tv_range_and_trend():
    tvs = []
    for m in (16, 64):
        tv = bz.tv_to_gaussian(bz.berezin(kernel.build_space(QUARTIC, m, m), 0.3))
        assert 0 <= tv <= 2
        tvs.append(tv)
    assert tvs[1] < tvs[0]
    # far outside the droplet the blow-up is not Gaussian at all
    far = bz.tv_to_gaussian(bz.berezin(kernel.build_space(FOCK, 16, 16), 2.0))
    assert 0.5 < far <= 2


def test_mass_outside_trivial():
    ev = bz.berezin(kernel.build_space(FOCK, 10.0, 10), 0.2)
    assert bz.mass_outside(ev, lambda z: np.zeros(z.shape, bool)) == 0.0
    assert bz.mass_outside(ev, lambda z: np.ones(z.shape, bool)) == pytest.approx(1.0, abs=1e-6)


def test_mass_outside_decays():
    out = []
    for m in (40, 80):
        ev = bz.berezin(kernel.build_space(FOCK, m, m), 0j)
        q = kernel.default_quadrature(FOCK, m, m, breakpoints=(1.2,))
        out.append(bz.mass_outside(ev, lambda z: np.abs(z) > 1.2, q))
    assert out[0] >= 5 * out[1]


def test_dirac_concentration():
    f = lambda z: np.abs(z - 0.1)
    z0 = 0.3
    gaps = []
    for m in (16, 32, 64):
        ev = bz.berezin(kernel.build_space(QUARTIC, m, m), z0)
        gaps.append(abs(bz.transform(ev, f) - f(np.array(z0))))
    assert all(a > b for a, b in zip(gaps, gaps[1:]))


def test_exterior_vanishing():
    # f lives off a neighbourhood of the unit disk; z0 = 1.5 sits inside its support
    f = lambda z: np.clip((np.abs(z) - 1.3) / 0.1, 0.0, 1.0)
    vals = []
    for m in (16, 32, 64):
        ev = bz.berezin(kernel.build_space(FOCK, m, m), 1.5)
        q = kernel.default_quadrature(FOCK, m, m, breakpoints=(1.3, 1.4), r_max=4.0, oversample=2)
        vals.append(bz.transform(ev, f, q))
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 1e-3
