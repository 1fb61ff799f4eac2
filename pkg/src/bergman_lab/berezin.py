"""Berezin densities and transforms, the blown-up density and convergence diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import NotInXError
from .kernel import BergmanSpaceBasis, default_quadrature, log_one_point, weighted_kernel
from .numerics import PlanarQuadrature, build_radial_quadrature

TV_RADIUS = 8.0


@dataclass(frozen=True, eq=False)
class BerezinEvaluator:
    basis: BergmanSpaceBasis
    z0: complex
    log_one_point_z0: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "z0", complex(self.z0))
        object.__setattr__(self, "log_one_point_z0", float(log_one_point(self.basis, self.z0)))

    @property
    def one_point_z0(self) -> float:
        return math.exp(self.log_one_point_z0)

    @property
    def blowup_scale(self) -> float:
        """sqrt(m Delta Q(z0)); raises NotInXError when Delta Q(z0) <= 0."""
        lap = float(self.basis.weight.laplacian(np.array(self.z0)))
        if not lap > 0:
            raise NotInXError(f"Laplacian of Q vanishes at z0={self.z0}")
        return math.sqrt(self.basis.m * lap)


@dataclass(frozen=True)
class GaussianReference:
    """Standard Gaussian e^{-|z|^2} dA, a probability measure."""

    def density(self, z):
        z = np.asarray(z)
        return np.exp(-(z.real**2 + z.imag**2))


def berezin(basis: BergmanSpaceBasis, z0: complex) -> BerezinEvaluator:
    return BerezinEvaluator(basis, z0)


def log_density(ev: BerezinEvaluator, z):
    lv = weighted_kernel(ev.basis, z, ev.z0)
    return 2 * lv.log_magnitude - ev.log_one_point_z0


def density(ev: BerezinEvaluator, z):
    """|K(z,z0)|^2 e^{-mQ(z)} / K(z0,z0)."""
    val = np.exp(log_density(ev, z))
    return float(val) if np.ndim(val) == 0 else val


def default_berezin_quadrature(ev: BerezinEvaluator, breakpoints=()) -> PlanarQuadrature:
    """Plane rule centred at 0, sized for the whole Berezin measure of ``ev``."""
    b = ev.basis
    r0 = abs(ev.z0)
    quad = default_quadrature(b.weight, b.m, b.n, breakpoints=breakpoints)
    if r0 < 0.8 * quad.r_max:
        return quad
    return default_quadrature(b.weight, b.m, b.n, breakpoints=breakpoints, r_max=r0 + quad.r_max)


def transform(ev: BerezinEvaluator, f: Callable, quadrature: PlanarQuadrature | None = None) -> float:
    """Berezin transform: the average of ``f`` against the Berezin density at z0."""
    if quadrature is None:
        quadrature = default_berezin_quadrature(ev)
    nodes = quadrature.nodes
    return float(np.real(quadrature.integrate(f(nodes) * density(ev, nodes))))


def mass(ev: BerezinEvaluator, quadrature: PlanarQuadrature | None = None) -> float:
    return transform(ev, lambda z: np.ones(np.shape(z)), quadrature)


def normalized_density(ev: BerezinEvaluator, z):
    """Density blown up at z0 by sqrt(m Delta Q(z0)), a probability density in z."""
    s = ev.blowup_scale
    z = np.asarray(z, dtype=complex)
    val = density(ev, ev.z0 + z / s) / s**2
    return float(val) if np.ndim(val) == 0 else val


def rescaled_quadrature(n_radial: int = 24, n_angular: int = 128, panels: int = 8) -> PlanarQuadrature:
    return build_radial_quadrature(TV_RADIUS, n_radial, n_angular, panels=panels)


def tv_to_gaussian(ev: BerezinEvaluator, quadrature: PlanarQuadrature | None = None) -> float:
    """L^1 distance between the blown-up density and e^{-|z|^2}, in rescaled coordinates."""
    if quadrature is None:
        quadrature = rescaled_quadrature()
    z = quadrature.nodes
    diff = np.abs(normalized_density(ev, z) - GaussianReference().density(z))
    return float(quadrature.integrate(diff))


def mass_outside(ev: BerezinEvaluator, region_indicator: Callable, quadrature: PlanarQuadrature | None = None) -> float:
    """Berezin mass of the region where ``region_indicator`` is true."""
    return transform(ev, lambda z: np.asarray(region_indicator(z), dtype=float), quadrature)
