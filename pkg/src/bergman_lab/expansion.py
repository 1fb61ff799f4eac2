"""First order approximating kernel (m b0 + b1) e^{m psi}, diagonal expansion and decay diagnostics."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .berezin import berezin, log_density
from .errors import DomainError, InvalidArgumentError, NotInXError, UnsupportedWeightError
from .kernel import BergmanSpaceBasis, one_point
from .numerics import LogValue
from .weights import Weight, fd_laplacian

UNDERFLOW_LOG = -700.0


def _psi(weight: Weight):
    if weight.psi is None:
        raise UnsupportedWeightError(f"weight {weight.name} has no bivariate extension psi")
    return weight.psi


def b0(weight: Weight, z, w):
    """d1 d2 psi at (z, w); on the anti-diagonal b0(z, conj z) = Delta Q(z)."""
    return _psi(weight).d1d2(z, w)


def b1(weight: Weight, z, w):
    """(1/2) d1 d2 log(d1 d2 psi), via the quotient of mixed partials."""
    psi = _psi(weight)
    base = psi.d1d2(z, w)
    if np.any(base == 0):
        raise DomainError("b0 vanishes; b1 undefined there")
    return (psi.d11d22(z, w) * base - psi.d11d2(z, w) * psi.d1d22(z, w)) / (2 * base**2)


@dataclass(frozen=True)
class ExpansionEvaluator:
    weight: Weight
    m: float

    def __post_init__(self):
        _psi(self.weight)


def approx_kernel_log(ev: ExpansionEvaluator, z, w) -> LogValue:
    """K_m^1(z,w) e^{-m(Q(z)+Q(w))/2} in log form."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    wb = np.conj(w)
    amp = ev.m * b0(ev.weight, z, wb) + b1(ev.weight, z, wb)
    expo = ev.m * ev.weight.psi.eval(z, wb) - 0.5 * ev.m * (ev.weight.Q(z) + ev.weight.Q(w))
    mag = np.abs(amp)
    with np.errstate(divide="ignore"):
        logm = np.log(mag) + expo.real
    phase = np.where(mag > 0, amp / np.where(mag > 0, mag, 1), 1.0) * np.exp(1j * expo.imag)
    if logm.ndim == 0:
        return LogValue(float(logm), complex(phase))
    return LogValue(logm, phase)


def half_laplacian_log_laplacian(weight: Weight, z):
    """(1/2) Delta log Delta Q, exact through b1 when psi is known, else by differences."""
    z = np.asarray(z, dtype=complex)
    if weight.psi is not None:
        return np.real(b1(weight, z, np.conj(z)))
    # nested differences: the inner step keeps round-off well below the outer h^2
    lap = lambda x: fd_laplacian(weight.Q, x, h=2e-3)
    return 0.5 * fd_laplacian(lambda x: np.log(lap(x)), z, h=1e-2)


def diag_expansion(weight: Weight, m: float, z):
    """m Delta Q(z) + (1/2) Delta log Delta Q(z)."""
    z = np.asarray(z, dtype=complex)
    lap = weight.laplacian(z)
    if np.any(lap <= 0):
        raise NotInXError("Delta Q vanishes at an evaluation point")
    val = m * lap + half_laplacian_log_laplacian(weight, z)
    return float(val) if np.ndim(val) == 0 else val


def diag_residual(basis: BergmanSpaceBasis, weight: Weight, z):
    """|K_{m,n}(z,z) e^{-mQ(z)} - (m Delta Q + (1/2) Delta log Delta Q)|."""
    val = np.abs(one_point(basis, z) - diag_expansion(weight, basis.m, z))
    return float(val) if np.ndim(val) == 0 else val


def offdiag_weighted_error(basis: BergmanSpaceBasis, weight: Weight, z, w):
    """|K_{m,n}(z,w) - K_m^1(z,w)| e^{-m(Q(z)+Q(w))/2}."""
    from .kernel import weighted_kernel

    exact = weighted_kernel(basis, z, w).value()
    approx = approx_kernel_log(ExpansionEvaluator(weight, basis.m), z, w).value()
    return np.abs(exact - approx)


@dataclass(frozen=True, eq=False)
class OffDiagReport:
    z0: complex
    ray_direction: complex
    m: float
    distances: np.ndarray
    log_density: np.ndarray
    compensation: np.ndarray
    fitted_slope: float
    d_K: float
    a_K: float

    @property
    def profile(self) -> np.ndarray:
        return self.log_density + self.compensation

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["distance", "log_density", "compensation"])
        for t, ld, cp in zip(self.distances, self.log_density, self.compensation):
            writer.writerow([f"{t:.17g}", f"{ld:.17g}", f"{cp:.17g}"])
        return buf.getvalue()


def offdiag_profile(basis: BergmanSpaceBasis, z0: complex, direction: complex, distances, equilibrium) -> OffDiagReport:
    """Compensated log Berezin density along a ray, with an OLS slope against sqrt(m) min(d_K, t)."""
    z0 = complex(z0)
    direction = complex(direction) / abs(direction)
    distances = np.asarray(distances, dtype=float)
    if np.any(distances <= 0) or np.any(np.diff(distances) <= 0):
        raise InvalidArgumentError("distances must be positive and increasing")
    d_K = equilibrium.interior_distance(z0, basis.weight)
    if not d_K > 0:
        raise InvalidArgumentError(f"z0={z0} is not interior to the droplet")
    weight = basis.weight
    disk = z0 + (d_K / 2) * np.sqrt(np.linspace(0, 1, 9))[:, None] * np.exp(2j * np.pi * np.arange(16) / 16)[None, :]
    a_K = float(np.min(weight.laplacian(disk.ravel())))

    z = z0 + distances * direction
    ld = log_density(berezin(basis, z0), z)
    comp = basis.m * (weight.Q(z) - equilibrium.eval_Qhat(z))
    x = math.sqrt(basis.m) * np.minimum(d_K, distances)
    prof = ld + comp
    ref = float(log_density(berezin(basis, z0), np.array(z0)))
    keep = (distances <= d_K) & (ld > UNDERFLOW_LOG + ref)
    if keep.sum() < 2:
        raise InvalidArgumentError("fewer than two usable samples inside d_K")
    slope = float(np.polyfit(x[keep], prof[keep], 1)[0])
    return OffDiagReport(z0, direction, basis.m, distances, ld, comp, slope, float(d_K), a_K)
