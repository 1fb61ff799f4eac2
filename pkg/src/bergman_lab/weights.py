"""Weights Q with derivatives, growth data and the bivariate extension psi(z, w)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InvalidArgumentError, ConfigError


@dataclass(frozen=True)
class BivariateAnalytic:
    """Holomorphic psi(z, w) with psi(z, conj z) = Q(z), plus the mixed partials we need.

    Naming: ``d1`` differentiates in the first slot, ``d2`` in the second, so ``d11d2`` is
    d1^2 d2 psi and so on.
    """

    eval: Callable
    d1: Callable
    d2: Callable
    d1d2: Callable
    d11d2: Callable
    d1d22: Callable
    d11d22: Callable


@dataclass(frozen=True)
class Weight:
    name: str
    Q: Callable
    laplacian: Callable
    growth_rho: float
    is_radial: bool = False
    radial_profile: Callable | None = None
    radial_derivative: Callable | None = None
    psi: BivariateAnalytic | None = None
    descriptor: dict = field(default_factory=dict)

    def __call__(self, z):
        return self.Q(z)

    @property
    def min_Q(self) -> float:
        # all built-in weights attain their minimum at the origin
        return float(self.Q(np.array(0j)))

    @classmethod
    def from_function(cls, Q: Callable, growth_rho: float, *, name="custom", radial_profile=None):
        """Weight from Q alone; the Laplacian is synthesized by central differences."""

        def laplacian(z):
            z = np.asarray(z, dtype=complex)
            h = 1e-5 * np.maximum(1.0, np.abs(z))
            return (Q(z + h) + Q(z - h) + Q(z + 1j * h) + Q(z - 1j * h) - 4 * Q(z)) / (4 * h * h)

        radial_derivative = None
        if radial_profile is not None:

            def radial_derivative(r):
                h = 1e-6 * np.maximum(1.0, r)
                return (radial_profile(r + h) - radial_profile(r - h)) / (2 * h)

        return cls(
            name=name,
            Q=Q,
            laplacian=laplacian,
            growth_rho=growth_rho,
            is_radial=radial_profile is not None,
            radial_profile=radial_profile,
            radial_derivative=radial_derivative,
        )


def _abs2(z):
    z = np.asarray(z, dtype=complex)
    return z.real**2 + z.imag**2


def make_fock() -> Weight:
    """Bargmann-Fock weight Q(z) = |z|^2."""
    zero = lambda z, w: np.zeros(np.broadcast(np.asarray(z), np.asarray(w)).shape, dtype=complex)
    one = lambda z, w: np.ones(np.broadcast(np.asarray(z), np.asarray(w)).shape, dtype=complex)
    psi = BivariateAnalytic(
        eval=lambda z, w: np.asarray(z) * np.asarray(w),
        d1=lambda z, w: np.asarray(w) + 0 * np.asarray(z),
        d2=lambda z, w: np.asarray(z) + 0 * np.asarray(w),
        d1d2=one,
        d11d2=zero,
        d1d22=zero,
        d11d22=zero,
    )
    return Weight(
        name="fock",
        Q=_abs2,
        laplacian=lambda z: np.ones(np.shape(z)),
        growth_rho=1.0,
        is_radial=True,
        radial_profile=lambda r: np.asarray(r, dtype=float) ** 2,
        radial_derivative=lambda r: 2 * np.asarray(r, dtype=float),
        psi=psi,
        descriptor={"kind": "fock"},
    )


def make_radial_power(p: int) -> Weight:
    """Q(z) = |z|^(2p); Laplacian p^2 |z|^(2(p-1)), psi(z, w) = (zw)^p."""
    if int(p) != p or p < 1:
        raise InvalidArgumentError(f"radial power needs an integer p >= 1, got {p}")
    p = int(p)

    def spow(z, w, k):
        s = np.asarray(z, dtype=complex) * np.asarray(w, dtype=complex)
        if k < 0:
            raise ZeroDivisionError
        return s**k

    def d11d22(z, w):
        return p**2 * (p - 1) ** 2 * spow(z, w, p - 2) if p >= 2 else 0 * spow(z, w, 0)

    def d11d2(z, w):
        return p**2 * (p - 1) * spow(z, w, p - 2) * w if p >= 2 else 0 * spow(z, w, 0)

    def d1d22(z, w):
        return p**2 * (p - 1) * spow(z, w, p - 2) * z if p >= 2 else 0 * spow(z, w, 0)

    psi = BivariateAnalytic(
        eval=lambda z, w: spow(z, w, p),
        d1=lambda z, w: p * spow(z, w, p - 1) * w,
        d2=lambda z, w: p * spow(z, w, p - 1) * z,
        d1d2=lambda z, w: p**2 * spow(z, w, p - 1),
        d11d2=d11d2,
        d1d22=d1d22,
        d11d22=d11d22,
    )
    return Weight(
        name=f"radial_power(p={p})",
        Q=lambda z: _abs2(z) ** p,
        laplacian=lambda z: p**2 * _abs2(z) ** (p - 1),
        growth_rho=math.inf,
        is_radial=True,
        radial_profile=lambda r: np.asarray(r, dtype=float) ** (2 * p),
        radial_derivative=lambda r: 2 * p * np.asarray(r, dtype=float) ** (2 * p - 1),
        psi=psi,
        descriptor={"kind": "radial_power", "p": p},
    )


def make_quartic_perturbation(c: float) -> Weight:
    """Q(z) = |z|^2 + c |z|^4, strictly subharmonic on the whole plane for c > 0."""
    if not c > 0:
        raise InvalidArgumentError(f"quartic perturbation needs c > 0, got {c}")
    c = float(c)

    def s_(z, w):
        return np.asarray(z, dtype=complex) * np.asarray(w, dtype=complex)

    psi = BivariateAnalytic(
        eval=lambda z, w: s_(z, w) + c * s_(z, w) ** 2,
        d1=lambda z, w: np.asarray(w) * (1 + 2 * c * s_(z, w)),
        d2=lambda z, w: np.asarray(z) * (1 + 2 * c * s_(z, w)),
        d1d2=lambda z, w: 1 + 4 * c * s_(z, w),
        d11d2=lambda z, w: 4 * c * np.asarray(w) + 0 * s_(z, w),
        d1d22=lambda z, w: 4 * c * np.asarray(z) + 0 * s_(z, w),
        d11d22=lambda z, w: 4 * c + 0 * s_(z, w),
    )
    return Weight(
        name=f"quartic(c={c:g})",
        Q=lambda z: _abs2(z) + c * _abs2(z) ** 2,
        laplacian=lambda z: 1 + 4 * c * _abs2(z),
        growth_rho=math.inf,
        is_radial=True,
        radial_profile=lambda r: np.asarray(r, dtype=float) ** 2 + c * np.asarray(r, dtype=float) ** 4,
        radial_derivative=lambda r: 2 * np.asarray(r, dtype=float) + 4 * c * np.asarray(r, dtype=float) ** 3,
        psi=psi,
        descriptor={"kind": "quartic", "c": c},
    )


def weight_from_descriptor(desc: dict) -> Weight:
    """Build a weight from {"kind": "fock" | "radial_power" | "quartic", "p": int, "c": real}."""
    if not isinstance(desc, dict) or "kind" not in desc:
        raise ConfigError("weight descriptor needs a 'kind' field", ("weight",))
    kind = desc["kind"]
    if kind == "fock":
        return make_fock()
    if kind == "radial_power":
        if "p" not in desc:
            raise ConfigError("radial_power needs 'p'", ("weight", "p"))
        return make_radial_power(desc["p"])
    if kind == "quartic":
        if "c" not in desc:
            raise ConfigError("quartic needs 'c'", ("weight", "c"))
        return make_quartic_perturbation(desc["c"])
    raise ConfigError(f"unknown weight kind {kind!r}", ("weight", "kind"))


def fd_laplacian(func: Callable, z, h: float = 1e-4):
    """Five-point Laplacian with the 1/4 normalization, Delta = d dbar."""
    z = np.asarray(z, dtype=complex)
    return (func(z + h) + func(z - h) + func(z + 1j * h) + func(z - 1j * h) - 4 * func(z)) / (4 * h * h)
