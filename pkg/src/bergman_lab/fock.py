"""Closed-form Bargmann-Fock machinery (Q = |z|^2) and the exterior harmonic-measure experiment."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import DegreeError, InvalidArgumentError
from .numerics import (
    LogValue,
    PlanarQuadrature,
    build_radial_quadrature,
    log_lower_incomplete_gamma,
    log_trunc_exp,
    log_trunc_exp_complex,
)


def fock_kernel_log(m: float, n: int, z, w) -> LogValue:
    """log form of K_{m,n}(z,w) = m E_{n-1}(m z conj(w))."""
    if n < 1:
        raise InvalidArgumentError("n must be >= 1")
    arg = m * np.asarray(z, dtype=complex) * np.conj(np.asarray(w, dtype=complex))
    logmag, phase = log_trunc_exp_complex(n - 1, arg)
    return LogValue(logmag + math.log(m), phase)


def fock_kernel(m: float, n: int, z, w):
    val = fock_kernel_log(m, n, z, w).value()
    return val[()] if np.ndim(val) == 0 else val


def fock_log_density(m: float, n: int, z0: complex, z):
    """log of m |E_{n-1}(m z conj z0)|^2 e^{-m|z|^2} / E_{n-1}(m|z0|^2)."""
    z = np.asarray(z, dtype=complex)
    logmag, _ = log_trunc_exp_complex(n - 1, m * z * np.conj(z0))
    return math.log(m) + 2 * logmag - m * np.abs(z) ** 2 - log_trunc_exp(n - 1, m * abs(z0) ** 2)


def fock_density(m: float, n: int, z0: complex, z):
    return np.exp(fock_log_density(m, n, z0, z))


@dataclass(frozen=True)
class FockMomentResult:
    j: int
    m: float
    n: int
    z0: complex
    value: complex
    method: str


def _check_moment_args(n, j, z0):
    if z0 == 0:
        raise InvalidArgumentError("moment needs z0 != 0")
    if j < 0:
        raise InvalidArgumentError("moment order must be >= 0")
    if n <= j:
        raise DegreeError(f"need n >= j + 1 (n={n}, j={j})")


def pv_moment(m: float, n: int, j: int, z0: complex) -> complex:
    """p.v. integral of z^{-j} against the Fock Berezin measure at z0, in closed form."""
    z0 = complex(z0)
    _check_moment_args(n, j, z0)
    x = m * abs(z0) ** 2
    ratio = math.exp(log_trunc_exp(j - 1, x) - log_trunc_exp(n - 1, x)) if j > 0 else 0.0
    return z0 ** (-j) * (1.0 - ratio)


def pv_moment_quadrature(m: float, n: int, j: int, z0: complex, quadrature: PlanarQuadrature | None = None) -> complex:
    """Same moment by a symmetric radial-angular rule (the z^{-j} singularity cancels ring by ring)."""
    z0 = complex(z0)
    _check_moment_args(n, j, z0)
    if quadrature is None:
        r_max = abs(z0) + math.sqrt(120.0 / m) + 1.0
        quadrature = build_radial_quadrature(r_max, 24, 2 * n + j + 16, panels=int(math.ceil(r_max * math.sqrt(m))))
    z = quadrature.nodes
    vals = z ** (-j) * fock_density(m, n, z0, z)
    return complex(quadrature.integrate(vals))


def restricted_moment(m: float, n: int, nu: int, z0: complex, r: float) -> complex:
    """p.v. integral of z^{-nu} over the disk D(0; r) against the Fock Berezin measure at z0."""
    z0 = complex(z0)
    _check_moment_args(n, nu, z0)
    if not r > 0:
        raise InvalidArgumentError("radius must be positive")
    x = m * abs(z0) ** 2
    j = np.arange(nu, n)
    lig = log_lower_incomplete_gamma(j - nu + 1, m * r * r)
    log_terms = j * math.log(x) - gammaln(j + 1) - gammaln(j - nu + 1) + lig
    total = logsumexp(log_terms) - log_trunc_exp(n - 1, x)
    return z0 ** (-nu) * math.exp(total)


def szego_asymptotic(l: int, x: float, margin: float = 0.05) -> LogValue:
    """Leading term of E_l(l x) for x > 1: (2 pi l)^{-1/2} (e x)^l x/(x-1)."""
    if l < 1:
        raise InvalidArgumentError("l must be >= 1")
    if not x > 1 + margin:
        raise InvalidArgumentError(f"x must exceed 1 + {margin}")
    logv = -0.5 * math.log(2 * math.pi * l) + l * (1 + math.log(x)) + math.log(x / (x - 1))
    return LogValue(logv, 1.0)


# ---------------------------------------------------------------------------
# exterior harmonic measure of the droplet disk


@dataclass(frozen=True)
class HarmonicMeasureSpec:
    tau: float
    z0: complex
    boundary_samples: int = 1024

    def __post_init__(self):
        if not abs(self.z0) ** 2 > self.tau:
            raise InvalidArgumentError("z0 must lie outside the droplet disk")


def harmonic_extension(spec: HarmonicMeasureSpec, f: Callable) -> float:
    """Value at z0 of the bounded harmonic extension of f from the circle |z| = sqrt(tau)."""
    R = math.sqrt(spec.tau)
    z0 = complex(spec.z0)
    theta = 2 * np.pi * np.arange(spec.boundary_samples) / spec.boundary_samples
    zeta = R * np.exp(1j * theta)
    poisson = (abs(z0) ** 2 - spec.tau) / np.abs(z0 - zeta) ** 2
    return float(np.real(np.mean(np.asarray(f(zeta)) * poisson)))


class ExteriorPolynomialFunction:
    """A bounded function equal to Re u(1/z) for |z| >= inner_radius, u a polynomial.

    ``coefficients[k]`` multiplies z^{-k}. Knowing this form lets Berezin transforms use
    closed-form moments for the exterior part.
    """

    def __init__(self, func: Callable, coefficients, inner_radius: float):
        self.func = func
        self.coefficients = tuple(complex(c) for c in coefficients)
        self.inner_radius = float(inner_radius)

    def __call__(self, z):
        return self.func(z)

    def exterior_form(self, z):
        z = np.asarray(z, dtype=complex)
        return np.real(sum(c * z ** (-k) for k, c in enumerate(self.coefficients)))


def boundary_matched_test_function(tau: float) -> ExteriorPolynomialFunction:
    """Re(conj z / max(|z|^2, tau/4)): equals Re(1/z) for |z| >= sqrt(tau)/2, bounded elsewhere."""

    def f(z):
        z = np.asarray(z, dtype=complex)
        return np.real(np.conj(z) / np.maximum(np.abs(z) ** 2, tau / 4))

    return ExteriorPolynomialFunction(f, (0.0, 1.0), math.sqrt(tau) / 2)


def _exterior_deviation(m: float, n: int, z0: complex, f: "ExteriorPolynomialFunction") -> float:
    """Berezin transform of f at z0 minus Re u(1/z0), assembled from small terms only.

    The exterior part contributes -Re sum_k c_k z0^{-k} E_{k-1}/E_{n-1} (closed-form p.v.
    moments); the inner disk remainder (f - Re u(1/z)) is integrated by quadrature.
    """
    x = m * abs(z0) ** 2
    log_en = log_trunc_exp(n - 1, x)
    defect = 0.0
    for k, c in enumerate(f.coefficients):
        if k == 0 or c == 0:
            continue
        defect -= np.real(c * z0 ** (-k)) * math.exp(log_trunc_exp(k - 1, x) - log_en)
    rho = f.inner_radius
    n_ang = int(8 * math.ceil((2 * n + 2 * len(f.coefficients) + 16) / 8))
    inner = build_radial_quadrature(rho, 24, n_ang, panels=int(math.ceil(rho * math.sqrt(m))))
    z = inner.nodes
    remainder = (np.asarray(f(z)) - f.exterior_form(z)) * fock_density(m, n, z0, z)
    return float(defect + np.real(inner.integrate(remainder)))


def fock_transform(m: float, n: int, z0: complex, f: Callable, quadrature: PlanarQuadrature | None = None) -> float:
    """Berezin transform of ``f`` at z0 for the Fock weight.

    For an ExteriorPolynomialFunction the exterior part is integrated in closed form and
    only the remainder on the inner disk goes through a quadrature.
    """
    z0 = complex(z0)
    if isinstance(f, ExteriorPolynomialFunction) and len(f.coefficients) <= n:
        return float(f.exterior_form(z0)) + _exterior_deviation(m, n, z0, f)
    if quadrature is None:
        raise InvalidArgumentError("a quadrature is required for a general test function")
    z = quadrature.nodes
    return float(np.real(quadrature.integrate(np.asarray(f(z)) * fock_density(m, n, z0, z))))


def th5_quadrature(m: float, n: int, z0: complex, tau: float) -> PlanarQuadrature:
    """Radial rule resolving the Fock Berezin measure at an exterior point z0."""
    r_max = max(abs(z0), math.sqrt(tau)) + math.sqrt(200.0 / m) + 0.5
    panels = int(math.ceil(r_max * math.sqrt(m) / 1.5))
    n_ang = int(8 * math.ceil((2 * n + 64) / 8))
    return build_radial_quadrature(r_max, 16, n_ang, panels=panels, breakpoints=(math.sqrt(tau) / 2,))


def th5_experiment(spec: HarmonicMeasureSpec, f: Callable, m_list, tau: float | None = None, n_rule=None):
    """Rows (m, n, berezin_value, harmonic_value, gap) with n = round(m tau) by default.

    When ``f`` is an ExteriorPolynomialFunction whose inner radius lies inside the droplet,
    its harmonic extension at z0 is Re u(1/z0) exactly and the gap is computed from small
    terms, so it stays meaningful far below machine epsilon.
    """
    tau = spec.tau if tau is None else tau
    z0 = complex(spec.z0)
    if n_rule is None:
        n_rule = lambda m: max(1, int(round(m * tau)))
    exact = isinstance(f, ExteriorPolynomialFunction) and f.inner_radius < math.sqrt(tau)
    harmonic = float(f.exterior_form(z0)) if exact else harmonic_extension(spec, f)
    rows = []
    for m in m_list:
        n = n_rule(m)
        if exact and len(f.coefficients) <= n:
            dev = _exterior_deviation(m, n, z0, f)
            rows.append((float(m), int(n), harmonic + dev, harmonic, abs(dev)))
            continue
        bval = fock_transform(m, n, z0, f, th5_quadrature(m, n, z0, tau))
        rows.append((float(m), int(n), bval, harmonic, abs(bval - harmonic)))
    return rows
