"""Acceptance suite: each criterion is a function returning measured metrics and a verdict."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import berezin as bz
from . import dbar, expansion, fock, kernel, numerics, potential, weights

DEFAULT_SEED = 20240601


@dataclass(frozen=True)
class CriterionResult:
    number: int
    name: str
    passed: bool
    metrics: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        detail = " ".join(f"{k}={_fmt(v)}" for k, v in self.metrics.items())
        return f"[{status}] criterion {self.number:2d} {self.name}: {detail}"


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v)
    if isinstance(v, (float, np.floating)):
        return f"{v:.6g}"
    if isinstance(v, (list, tuple)):
        return "[" + ",".join(_fmt(x) for x in v) + "]"
    return str(v)


def criterion_1() -> CriterionResult:
    disk = numerics.build_radial_quadrature(1.0, 16, 64)
    area = float(np.real(disk.integrate(np.ones(len(disk)))))
    errs = []
    for m in (1, 4, 25):
        quad = numerics.build_radial_quadrature(math.sqrt(45.0 / m), 24, 16, panels=4)
        val = float(np.real(quad.integrate(np.exp(-m * np.abs(quad.nodes) ** 2))))
        errs.append(abs(val - 1.0 / m))
    ok = abs(area - 1) <= 1e-10 and max(errs) <= 1e-8
    return CriterionResult(1, "normalization", ok, {"disk_area_error": abs(area - 1), "gaussian_errors": errs})


def _random_disk_points(rng, count, radius):
    r = radius * np.sqrt(rng.uniform(size=count))
    return r * np.exp(2j * np.pi * rng.uniform(size=count))


def criterion_2(seed: int = DEFAULT_SEED) -> CriterionResult:
    rng = np.random.default_rng(seed)
    fock_w = weights.make_fock()
    worst = []
    for m, n in ((4, 4), (10, 12), (30, 30)):
        z = _random_disk_points(rng, 200, 2.0)
        w = _random_disk_points(rng, 200, 2.0)
        basis = kernel.build_space(fock_w, m, n, method="radial")
        approx = kernel.kernel_eval(basis, z, w)
        exact = fock.fock_kernel(m, n, z, w)
        worst.append(float(np.max(np.abs(approx - exact) / np.abs(exact))))
    return CriterionResult(2, "fock closed form", max(worst) <= 1e-7, {"max_relative_error": worst})


MASS_WEIGHTS = (("fock", {"kind": "fock"}), ("power2", {"kind": "radial_power", "p": 2}), ("quartic", {"kind": "quartic", "c": 0.1}))
MASS_POINTS = (0j, 0.4 + 0.3j, 1.5 + 0j)


def criterion_3() -> CriterionResult:
    worst = 0.0
    count = 0
    for _, desc in MASS_WEIGHTS:
        w = weights.weight_from_descriptor(desc)
        for m in (8, 16, 32):
            basis = kernel.build_space(w, m, m)
            for z0 in MASS_POINTS:
                ev = bz.berezin(basis, z0)
                worst = max(worst, abs(bz.mass(ev) - 1.0))
                count += 1
    return CriterionResult(3, "berezin mass", worst <= 1e-6, {"cases": count, "max_mass_error": worst})


def criterion_4() -> CriterionResult:
    fock_w = weights.make_fock()
    tvs = []
    for m in (5, 50):
        for n in (1, 2, 7, 40):
            tvs.append(bz.tv_to_gaussian(bz.berezin(kernel.build_space(fock_w, m, n), 0j)))
    return CriterionResult(4, "exact gaussian", max(tvs) <= 1e-6, {"max_tv": max(tvs)})


def _quartic_series(z0=0.3, tau=1.0, m_list=(16, 32, 64)):
    w = weights.make_quartic_perturbation(0.1)
    res, tvs = [], []
    for m in m_list:
        basis = kernel.build_space(w, m, max(1, round(m * tau)))
        res.append(float(expansion.diag_residual(basis, w, z0)))
        tvs.append(bz.tv_to_gaussian(bz.berezin(basis, z0)))
    return list(m_list), res, tvs


def criterion_5() -> CriterionResult:
    ms, res, _ = _quartic_series()
    scaled = [r * m for r, m in zip(res, ms)]
    ok = all(s <= 2 * scaled[0] for s in scaled) and all(a > b for a, b in zip(res, res[1:]))
    return CriterionResult(5, "diagonal expansion", ok, {"m": ms, "residual": res, "m_times_residual": scaled})


def criterion_6() -> CriterionResult:
    ms, _, tvs = _quartic_series()
    ok = all(a > b for a, b in zip(tvs, tvs[1:]))
    return CriterionResult(6, "gaussian convergence", ok, {"m": ms, "tv": tvs})


def criterion_7(z0: complex = 0.5, radius: float = 1.2) -> CriterionResult:
    fock_w = weights.make_fock()
    ms = (20, 40, 80)
    masses = []
    for m in ms:
        basis = kernel.build_space(fock_w, m, m)
        ev = bz.berezin(basis, z0)
        quad = kernel.default_quadrature(fock_w, m, m, breakpoints=(radius,))
        masses.append(bz.mass_outside(ev, lambda z: np.abs(z) > radius, quad))
    factors = [a / b for a, b in zip(masses, masses[1:])]
    logs = np.log(masses)
    fit = np.polyfit(ms, logs, 1)
    pred = np.polyval(fit, ms)
    r2 = 1 - np.sum((logs - pred) ** 2) / np.sum((logs - logs.mean()) ** 2)
    ok = min(factors) >= 5 and r2 >= 0.9
    return CriterionResult(7, "droplet concentration", ok, {"mass_outside": masses, "factors": factors, "r2": float(r2)})


def criterion_8() -> CriterionResult:
    metrics = {}
    ok = True
    for label, w in (("fock", weights.make_fock()), ("quartic", weights.make_quartic_perturbation(0.1))):
        eq = potential.radial_equilibrium_result(w, 1.0)
        slopes = []
        for m in (16, 64):
            basis = kernel.build_space(w, m, m)
            dist = np.linspace(0.02, eq.droplet_radius, 40)
            slopes.append(expansion.offdiag_profile(basis, 0j, 1.0, dist, eq).fitted_slope)
        ok &= slopes[0] < 0 and slopes[1] < 0 and abs(slopes[1]) >= 1.5 * abs(slopes[0])
        metrics[f"{label}_slopes"] = slopes
    return CriterionResult(8, "off-diagonal damping", bool(ok), metrics)


def criterion_9(spacing: float = 0.02, extent: float = 2.0) -> CriterionResult:
    spec = potential.GridSpec(extent=extent, spacing=spacing)
    res_f = potential.psor_obstacle_solve(weights.make_fock(), 1.0, spec)
    res_p = potential.psor_obstacle_solve(weights.make_radial_power(2), 1.0, spec)
    target_p = 0.5**0.25
    ok = (
        abs(res_f.droplet_radius - 1.0) <= 2 * spacing
        and abs(res_f.solver_diagnostics["mass"] - 1.0) <= 1e-3
        and abs(res_p.droplet_radius - target_p) <= 2 * spacing
    )
    return CriterionResult(
        9,
        "obstacle solver",
        ok,
        {
            "fock_radius": res_f.droplet_radius,
            "fock_mass": res_f.solver_diagnostics["mass"],
            "power2_radius": res_p.droplet_radius,
            "power2_target": target_p,
        },
    )


def szego_relative_error(l: int, x: float) -> float:
    direct = numerics.log_trunc_exp(l, l * x)
    approx = fock.szego_asymptotic(l, x).log_magnitude
    return abs(math.expm1(approx - float(direct)))


def criterion_10() -> CriterionResult:
    e200, e400 = szego_relative_error(200, 2.0), szego_relative_error(400, 2.0)
    return CriterionResult(10, "szego asymptotics", e200 <= 2e-2 and e400 < e200, {"err_200": e200, "err_400": e400})


def criterion_11() -> CriterionResult:
    z0 = 1.5
    diffs = [abs(fock.pv_moment(10, 12, j, z0) - fock.pv_moment_quadrature(10, 12, j, z0)) for j in (1, 2)]
    limit = abs(fock.pv_moment(50, 50, 1, z0) - 1 / z0)
    ok = max(diffs) <= 1e-6 and limit <= 1e-3
    return CriterionResult(11, "fock moments", ok, {"closed_vs_quadrature": diffs, "limit_error": limit})


def criterion_12() -> CriterionResult:
    spec = fock.HarmonicMeasureSpec(tau=1.0, z0=1.5)
    f = fock.boundary_matched_test_function(1.0)
    rows = fock.th5_experiment(spec, f, [16, 32, 64, 128, 256], n_rule=lambda m: m)
    gaps = {int(r[0]): r[4] for r in rows}
    ok = gaps[256] < gaps[64] and gaps[256] <= 5e-2
    return CriterionResult(12, "harmonic measure", ok, {"gap_64": gaps[64], "gap_256": gaps[256]})


def dbar_records(m_list=(8, 16, 32), bump_radius=0.3, M0=1.0, bpar=0.5, tau=1.0):
    out = []
    for desc in ({"kind": "fock"}, {"kind": "quartic", "c": 0.1}):
        w = weights.weight_from_descriptor(desc)
        eq = potential.radial_equilibrium_result(w, tau)
        f = dbar.SmoothBump(bump_radius)
        params = dbar.bound_params(w, eq, f, M0, bpar)
        for m in m_list:
            n = m
            basis = kernel.build_space(w, m, n)
            quad = kernel.default_quadrature(w, m, n, breakpoints=(bump_radius,))
            rec = dbar.verify_cor_bh(basis, f, params, eq, quad)
            rec["growth_compatible"] = dbar.check_growth_compatibility(params, eq)
            out.append(rec)
    return out


def criterion_13() -> CriterionResult:
    recs = dbar_records()
    in_regime = [r for r in recs if r["regime_ok"] and r["growth_compatible"]]
    ok = bool(in_regime) and all(r["ratio"] <= 1 and r["orthogonality_residual"] <= 1e-6 for r in in_regime)
    return CriterionResult(
        13,
        "dbar bound",
        ok,
        {
            "in_regime": len(in_regime),
            "max_ratio": max(r["ratio"] for r in recs),
            "max_orth_residual": max(r["orthogonality_residual"] for r in recs),
        },
    )


CRITERIA = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
    10: criterion_10,
    11: criterion_11,
    12: criterion_12,
    13: criterion_13,
}


def run_all(numbers=None) -> list[CriterionResult]:
    numbers = sorted(CRITERIA) if numbers is None else numbers
    return [CRITERIA[k]() for k in numbers]
