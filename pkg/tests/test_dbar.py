import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from bergman_lab import dbar, kernel, numerics, potential, weights
from bergman_lab.errors import InvalidArgumentError

R = 0.3


@pytest.fixture(scope="module")
def bump():
    return dbar.SmoothBump(R)


@pytest.fixture(scope="module")
def bump_quad():
    return numerics.build_radial_quadrature(R, 24, 192, panels=12)


def _radial_mass(f, r):
    r = min(r, f.radius)
    return quad(lambda s: 2 * s * f(np.array(s + 0j)).real, 0, r, epsabs=1e-14)[0]


def test_largest_int_below():
    assert dbar.largest_int_below(3.0) == 2
    assert dbar.largest_int_below(3.5) == 3
    assert dbar.largest_int_below(-0.5) == -1


def test_bump_shape(bump):
    assert bump(np.array(0j)) == pytest.approx(1.0)
    z = np.array([0.3, 0.31j, -1.0])
    assert np.all(bump(z) == 0)
    with pytest.raises(InvalidArgumentError):
        dbar.SmoothBump(0.0)


def test_cauchy_zero(bump_quad):
    w = np.array([0.1, 0.5j, 2.0])
    assert np.all(dbar.cauchy_transform(lambda z: np.zeros(z.shape), bump_quad, w) == 0)


def test_cauchy_radial_oracle(bump, bump_quad):
    for w in (0.05 + 0.02j, 0.15j, -0.25, 0.4 + 0.1j, 2.0):
        exact = _radial_mass(bump, abs(w)) / w
        got = dbar.cauchy_transform(bump, bump_quad, np.array([w]))[0]
        assert abs(got - exact) <= 1e-2 * abs(exact)


def test_cauchy_far_field(bump, bump_quad):
    mass = _radial_mass(bump, R)
    for w in (5.0, 20j, -40 + 30j):
        got = dbar.cauchy_transform(bump, bump_quad, np.array([w]))[0]
        assert abs(got * w - mass) <= 1e-10


def test_cauchy_dbar_recovers_f(bump, bump_quad):
    # weak form: circle integral of Cf equals 2i times the integral of f over the disk;
    # pointwise differences would see the cell-scale exclusion noise
    k, rho = 128, 0.03
    t = 2 * np.pi * np.arange(k) / k
    disk = numerics.build_radial_quadrature(rho, 16, 64, panels=2)
    for w0 in (0.05 + 0.05j, -0.1j, 0.15):
        pts = w0 + rho * np.exp(1j * t)
        circ = 2 * np.pi * np.mean(dbar.cauchy_transform(bump, bump_quad, pts) * 1j * rho * np.exp(1j * t))
        avg = disk.integrate(bump(disk.nodes + w0)) / rho**2
        assert abs(circ / (2j * np.pi * rho**2) - avg) <= 1e-2


@pytest.fixture(scope="module")
def fock_setup():
    w = weights.make_fock()
    m, n = 8.0, 8
    basis = kernel.build_space(w, m, n)
    q = kernel.default_quadrature(w, m, n, breakpoints=(R,))
    return w, basis, q


def test_project_basis_vectors(fock_setup):
    _, basis, q = fock_setup
    eb = kernel.weighted_basis(basis, q.nodes)
    for k in (0, 3, 7):
        coeffs = dbar.bergman_project(basis, eb[:, k], q, weighted=True)
        target = np.zeros(basis.n)
        target[k] = 1
        assert np.max(np.abs(coeffs - target)) <= 1e-10


def test_project_orthogonal_radial(fock_setup, bump):
    _, basis, q = fock_setup
    coeffs = dbar.bergman_project(basis, lambda z: np.conj(z) * bump(z), q)
    assert np.max(np.abs(coeffs)) <= 1e-12


def test_project_idempotent(fock_setup, bump):
    _, basis, q = fock_setup
    c1 = dbar.bergman_project(basis, lambda z: np.conj(z) ** 2 * bump(z - 0.1) + z, q)
    pw = dbar.projection_weighted_eval(basis, c1, q.nodes)
    c2 = dbar.bergman_project(basis, pw, q, weighted=True)
    assert np.max(np.abs(c2 - c1)) <= 1e-10 * max(1.0, np.max(np.abs(c1)))


def test_minimal_solution_zero(fock_setup):
    _, basis, q = fock_setup
    sol = dbar.minimal_solution(basis, lambda z: np.zeros(z.shape), q)
    assert sol.norm_sq == 0 and np.all(sol.values == 0)


@pytest.fixture(scope="module")
def shifted_solution(fock_setup):
    _, basis, q = fock_setup
    f = dbar.SmoothBump(R, center=0.2 + 0.1j)
    return dbar.minimal_solution(basis, f, q)


def test_minimal_solution_orthogonal(shifted_solution):
    assert shifted_solution.orthogonality_residual <= 1e-7
    assert shifted_solution.norm_sq <= shifted_solution.particular_norm_sq


def test_minimal_solution_is_minimal(fock_setup, shifted_solution, rng):
    _, basis, q = fock_setup
    eb = kernel.weighted_basis(basis, q.nodes)
    base = shifted_solution.norm_sq
    for _ in range(20):
        c = 0.1 * (rng.normal(size=basis.n) + 1j * rng.normal(size=basis.n))
        assert dbar.weighted_norm_sq(q, shifted_solution.weighted_nodes + eb @ c) >= base


def test_minimal_solution_eval_points(fock_setup, shifted_solution):
    _, basis, q = fock_setup
    f = dbar.SmoothBump(R, center=0.2 + 0.1j)
    idx = np.array([5, 500, 5000])
    sol = dbar.minimal_solution(basis, f, q, eval_points=q.nodes[idx])
    assert np.allclose(sol.values, shifted_solution.values[idx], rtol=1e-6, atol=1e-12)


def _records(desc, m_list, n_rule=lambda m: m):
    w = weights.weight_from_descriptor(desc)
    eq = potential.radial_equilibrium_result(w, 1.0)
    f = dbar.SmoothBump(R)
    params = dbar.bound_params(w, eq, f, 1.0, 0.5)
    out = []
    for m in m_list:
        n = n_rule(m)
        basis = kernel.build_space(w, m, n)
        q = kernel.default_quadrature(w, m, n, breakpoints=(R,))
        out.append(dbar.verify_cor_bh(basis, f, params, eq, q))
    return params, eq, out


@pytest.mark.parametrize("desc", [{"kind": "fock"}, {"kind": "quartic", "c": 0.1}])
def test_bound_holds_in_regime(desc):
    params, eq, recs = _records(desc, (8, 16, 32))
    assert dbar.check_growth_compatibility(params, eq)
    for r in recs:
        assert r["regime_ok"]
        assert 0 < r["ratio"] <= 1
        assert r["orthogonality_residual"] <= 1e-6
    json.dumps(recs)


def test_ratio_stays_bounded():
    _, _, recs = _records({"kind": "fock"}, (8, 16, 32, 64))
    ratios = [r["ratio"] for r in recs]
    assert max(ratios) <= 1
    assert ratios[-1] <= 2 * ratios[-2]


def test_bound_zero_data(fock_setup):
    w, basis, q = fock_setup
    eq = potential.radial_equilibrium_result(w, 1.0)
    f = dbar.SmoothBump(R, amplitude=0.0)
    params = dbar.bound_params(w, eq, dbar.SmoothBump(R), 1.0, 0.5)
    rec = dbar.verify_cor_bh(basis, f, params, eq, q)
    assert rec["lhs"] == rec["rhs"] == rec["ratio"] == 0.0


def test_out_of_regime_flagged():
    _, _, recs = _records({"kind": "fock"}, (16,), n_rule=lambda m: 4)
    assert not recs[0]["regime_ok"]
    _, _, recs = _records({"kind": "fock"}, (1.5,), n_rule=lambda m: 2)
    assert not recs[0]["regime_ok"]


def test_support_outside_droplet_flagged(fock_setup):
    w, basis, q = fock_setup
    eq = potential.radial_equilibrium_result(w, 1.0)
    f = dbar.SmoothBump(0.3, center=1.2)
    params = dbar.bound_params(w, eq, f, 1.0, 0.5)
    assert not dbar.verify_cor_bh(basis, f, params, eq, q)["regime_ok"]


def test_params_validation():
    with pytest.raises(InvalidArgumentError):
        dbar.DbarBoundParams(M0=0, bpar=0.5, q_tau=0, c_tau=1, a=1, tau=1)
    p = dbar.DbarBoundParams(M0=1.0, bpar=0.5, q_tau=0, c_tau=1, a=1, tau=0.5)
    assert p.m0 == 4.0


@given(M0=st.floats(0.2, 4), ratio=st.floats(0.05, 0.95))
def test_growth_compatibility_fock(M0, ratio):
    eq = potential.radial_equilibrium_result(weights.make_fock(), 1.0)
    p = dbar.DbarBoundParams(M0=M0, bpar=ratio * M0, q_tau=0, c_tau=1, a=1, tau=1.0)
    assert dbar.check_growth_compatibility(p, eq)
    bad = dbar.DbarBoundParams(M0=M0, bpar=1.5 * M0, q_tau=0, c_tau=1, a=1, tau=1.0)
    assert not dbar.check_growth_compatibility(bad, eq)
