import math

import numpy as np
import pytest
from scipy.ndimage import binary_dilation

from bergman_lab import potential, weights
from bergman_lab.errors import DomainTooSmallError, GrowthViolationError, InvalidArgumentError, SolverFailureError

from conftest import disk_points

FOCK = weights.make_fock()
POWER2 = weights.make_radial_power(2)
QUARTIC = weights.make_quartic_perturbation(0.1)
H = 0.02


@pytest.fixture(scope="module")
def fock_psor():
    return potential.psor_obstacle_solve(FOCK, 1.0, potential.GridSpec(extent=3.0, spacing=H))


@pytest.fixture(scope="module")
def power2_psor():
    return potential.psor_obstacle_solve(POWER2, 1.0, {"extent": 2.0, "spacing": H})


def test_radial_radius_examples():
    assert potential.radial_droplet_radius(FOCK, 0.49) == pytest.approx(0.7, abs=1e-12)
    assert potential.radial_droplet_radius(POWER2, 1.0) == pytest.approx(0.5**0.25, abs=1e-12)
    radii = [potential.radial_droplet_radius(QUARTIC, t) for t in (0.25, 0.5, 1.0, 2.0)]
    assert all(a < b for a, b in zip(radii, radii[1:]))


def test_radial_radius_errors():
    slow = weights.Weight.from_function(lambda z: np.log1p(np.abs(z) ** 2), 0.5, radial_profile=lambda r: np.log1p(r**2))
    with pytest.raises(GrowthViolationError):
        potential.radial_droplet_radius(slow, 2.0)
    with pytest.raises(InvalidArgumentError):
        potential.radial_droplet_radius(FOCK, 0.0)
    with pytest.raises(InvalidArgumentError):
        potential.radial_droplet_radius(weights.Weight.from_function(lambda z: np.abs(z) ** 2, 1.0), 1.0)


def test_radial_equilibrium_examples(rng):
    assert potential.radial_equilibrium(FOCK, 1.0, 2.0) == pytest.approx(1 + math.log(4), abs=1e-12)
    for w in (FOCK, POWER2, QUARTIC):
        R = potential.radial_droplet_radius(w, 1.0)
        inside = potential.radial_equilibrium(w, 1.0, R * (1 - 1e-12))
        outside = potential.radial_equilibrium(w, 1.0, R * (1 + 1e-12))
        assert inside == pytest.approx(outside, abs=1e-9)
        z = disk_points(rng, 30, R * 0.99)
        assert np.allclose(potential.radial_equilibrium(w, 1.0, z), w.Q(z))


@pytest.mark.parametrize("w", [FOCK, POWER2, QUARTIC], ids=lambda w: w.name)
def test_radial_equilibrium_is_minorant_with_log_growth(w, rng):
    z = disk_points(rng, 500, 6.0)
    assert np.all(potential.radial_equilibrium(w, 1.0, z) <= w.Q(z) + 1e-12)
    far = [potential.radial_equilibrium(w, 1.0, r) - math.log(r * r) for r in (10.0, 100.0, 1e4)]
    assert max(far) - min(far) < 1e-9


def test_fock_tau_formula(rng):
    tau = 0.6
    z = 1.0 + disk_points(rng, 50, 0.2)
    z = z[np.abs(z) ** 2 > tau]
    assert np.allclose(potential.radial_equilibrium(FOCK, tau, z), tau + tau * np.log(np.abs(z) ** 2 / tau))


def test_psor_fock_radius_and_mass(fock_psor):
    assert abs(fock_psor.droplet_radius - 1.0) <= 2 * H
    assert abs(fock_psor.solver_diagnostics["mass"] - 1.0) <= 1e-3


def test_psor_power2(power2_psor):
    assert abs(power2_psor.droplet_radius - 0.5**0.25) <= 2 * H
    assert abs(power2_psor.solver_diagnostics["mass"] - 1.0) <= 1e-3


def test_psor_obstacle_inequality(fock_psor):
    q = FOCK.Q(fock_psor.grid_nodes())
    assert np.all(fock_psor.grid_values <= q + 1e-12)


def test_psor_harmonic_off_droplet(fock_psor, power2_psor):
    for res in (fock_psor, power2_psor):
        h = res.spacing
        lap = potential.discrete_laplacian(res.grid_values, h) * h * h
        grown = binary_dilation(res.droplet_mask, iterations=2)[1:-1, 1:-1]
        tol = potential.GridSpec().tol
        assert np.max(np.abs(lap[~grown])) <= 10 * tol


def test_psor_agrees_with_radial(fock_psor, rng):
    z = disk_points(rng, 300, 2.8)
    assert np.max(np.abs(fock_psor.eval_Qhat(z) - potential.radial_equilibrium(FOCK, 1.0, z))) <= 5e-3


def test_psor_c11_signature(fock_psor):
    u, h, mask = fock_psor.grid_values, fock_psor.spacing, fock_psor.droplet_mask
    fwd = (u[2:, 1:-1] - u[1:-1, 1:-1]) / h
    bwd = (u[1:-1, 1:-1] - u[:-2, 1:-1]) / h
    edge = mask[1:-1, 1:-1] & ~(mask[2:, 1:-1] & mask[:-2, 1:-1])
    jumps = np.abs(fwd - bwd)[edge]
    assert jumps.size > 0
    assert np.max(jumps) <= 10 * h


def test_psor_growth_and_far_field(fock_psor):
    vals = [fock_psor.eval_Qhat(r) - math.log(r * r) for r in (2.0, 2.5, 10.0, 1e3)]
    assert max(vals) - min(vals) < 5e-3


def test_psor_quartic_coarse(rng):
    res = potential.psor_obstacle_solve(QUARTIC, 1.0, {"extent": 2.0, "spacing": 0.04})
    R = potential.radial_droplet_radius(QUARTIC, 1.0)
    assert abs(res.droplet_radius - R) <= 2 * 0.04
    z = disk_points(rng, 200, 1.8)
    assert np.max(np.abs(res.eval_Qhat(z) - potential.radial_equilibrium(QUARTIC, 1.0, z))) <= 2e-2


def test_psor_domain_too_small():
    with pytest.raises(DomainTooSmallError):
        potential.psor_obstacle_solve(FOCK, 1.0, {"extent": 1.04, "spacing": 0.04})


def test_psor_solver_failure():
    with pytest.raises(SolverFailureError) as info:
        potential.psor_obstacle_solve(FOCK, 1.0, {"extent": 2.0, "spacing": 0.04, "max_iter": 3})
    assert info.value.iterations == 3


def test_constants():
    q, c = potential.constants(potential.radial_equilibrium_result(FOCK, 1.0), FOCK)
    assert q == pytest.approx(1.0, abs=1e-10) and c == pytest.approx(0.25, abs=1e-10)
    q, c = potential.constants(potential.radial_equilibrium_result(FOCK, 0.25), FOCK)
    assert q == pytest.approx(0.25, abs=1e-10) and c == pytest.approx(1.25**-2, abs=1e-10)
    qs = [potential.constants(potential.radial_equilibrium_result(QUARTIC, t), QUARTIC)[0] for t in (0.3, 0.6, 1.2)]
    assert qs == sorted(qs)


def test_constants_from_grid(fock_psor):
    q, c = potential.constants(fock_psor, FOCK)
    assert q == pytest.approx(1.0, abs=3 * H) and c == pytest.approx(0.25, abs=3 * H)


def test_result_helpers(fock_psor):
    assert fock_psor.in_droplet(np.array([0.2, 1.5, 10.0])).tolist() == [True, False, False]
    assert fock_psor.interior_distance(0.5, FOCK) == pytest.approx(0.5, abs=2 * H)
    assert fock_psor.interior_distance(1.5, FOCK) == 0.0
    radial = potential.radial_equilibrium_result(POWER2, 1.0)
    # Delta Q vanishes at the origin, so X excludes it
    assert radial.interior_distance(0.3, POWER2) == pytest.approx(0.3)
    lines = fock_psor.to_csv().splitlines()
    assert lines[0] == "x,y,Qhat,in_droplet"
    assert len(lines) == 1 + fock_psor.grid_x.size ** 2
    with pytest.raises(InvalidArgumentError):
        radial.to_csv()
