"""Cauchy transform, Bergman projection onto H_{m,n}, the norm-minimal dbar solution and its bound."""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from typing import Callable

import numpy as np

from .errors import InvalidArgumentError
from .kernel import BergmanSpaceBasis, weighted_basis
from .numerics import PlanarQuadrature, stable_sum

_CHUNK = 512


def largest_int_below(x: float) -> int:
    """]x[: the largest integer strictly smaller than x."""
    return int(math.ceil(x)) - 1


class SmoothBump:
    """C-infinity bump exp(1 - 1/(1 - |z-c|^2/R^2)) on D(c; R), optionally times a polynomial."""

    def __init__(self, radius: float, center: complex = 0j, factor: Callable | None = None, amplitude: float = 1.0):
        if not radius > 0:
            raise InvalidArgumentError("bump radius must be positive")
        self.radius = float(radius)
        self.center = complex(center)
        self.factor = factor
        self.amplitude = float(amplitude)

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        s = np.abs(z - self.center) ** 2 / self.radius**2
        inside = s < 1
        out = np.zeros(z.shape, dtype=complex)
        out[inside] = self.amplitude * np.exp(1.0 - 1.0 / (1.0 - s[inside]))
        if self.factor is not None:
            out = out * self.factor(z)
        return out

    def support_samples(self, k: int = 64) -> np.ndarray:
        r = self.radius * np.sqrt(np.linspace(0, 1, 17))
        return (self.center + r[:, None] * np.exp(2j * np.pi * np.arange(k) / k)[None, :]).ravel()


def cauchy_transform(f, quadrature: PlanarQuadrature, w):
    """Cf(w) = int f(z) / (w - z) dA(z) by quadrature.

    Nodes closer to w than half their cell size are dropped; the kernel averages to zero
    over a disk centred at w, so this is the disk-corrected value.
    """
    values = f(quadrature.nodes) if callable(f) else np.asarray(f)
    active = values != 0
    src = quadrature.nodes[active]
    fw = values[active] * quadrature.weights[active]
    excl = 0.5 * np.sqrt(np.pi * quadrature.weights[active])
    w = np.asarray(w, dtype=complex)
    flat = w.ravel()
    out = np.zeros(flat.shape, dtype=complex)
    for s in range(0, flat.size, _CHUNK):
        diff = flat[s : s + _CHUNK, None] - src[None, :]
        near = np.abs(diff) < excl[None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            kern = np.where(near, 0.0, 1.0 / np.where(near, 1.0, diff))
        out[s : s + _CHUNK] = kern @ fw
    return out.reshape(w.shape)


def _weighted_values(basis, quadrature, u, weighted):
    z = quadrature.nodes
    vals = u(z) if callable(u) else np.asarray(u)
    if weighted:
        return vals
    return vals * np.exp(-0.5 * basis.m * basis.weight.Q(z))


def bergman_project(basis: BergmanSpaceBasis, u, quadrature: PlanarQuadrature, *, weighted: bool = False) -> np.ndarray:
    """Coefficients <u, e_j>_{mQ}, j < n, of the orthogonal projection onto H_{m,n}.

    ``u`` is a callable or samples at the quadrature nodes; with ``weighted=True`` the
    samples are taken to be u e^{-mQ/2} already.
    """
    uw = _weighted_values(basis, quadrature, u, weighted) * quadrature.weights
    z = quadrature.nodes
    coeffs = np.zeros(basis.n, dtype=complex)
    parts = []
    for s in range(0, z.size, 4096):
        eb = weighted_basis(basis, z[s : s + 4096])
        parts.append(eb.conj().T @ uw[s : s + 4096])
    parts = np.array(parts)
    for j in range(basis.n):
        coeffs[j] = stable_sum(parts[:, j])
    return coeffs


def projection_weighted_eval(basis: BergmanSpaceBasis, coeffs, z):
    """(P u)(z) e^{-mQ(z)/2} from projection coefficients."""
    return weighted_basis(basis, z) @ np.asarray(coeffs)


def weighted_norm_sq(quadrature: PlanarQuadrature, weighted_values) -> float:
    return float(np.real(quadrature.integrate(np.abs(weighted_values) ** 2)))


@dataclass(frozen=True, eq=False)
class MinimalSolution:
    """u* = Cf - P(Cf): values at evaluation points plus norms on the quadrature."""

    values: np.ndarray
    weighted_nodes: np.ndarray
    coefficients: np.ndarray
    norm_sq: float
    particular_norm_sq: float
    orthogonality_residual: float


def minimal_solution(
    basis: BergmanSpaceBasis,
    f,
    quadrature: PlanarQuadrature,
    eval_points=None,
    *,
    source_quadrature: PlanarQuadrature | None = None,
) -> MinimalSolution:
    src = quadrature if source_quadrature is None else source_quadrature
    z = quadrature.nodes
    decay = np.exp(-0.5 * basis.m * basis.weight.Q(z))
    cf_w = cauchy_transform(f, src, z) * decay
    coeffs = bergman_project(basis, cf_w, quadrature, weighted=True)
    ustar_w = cf_w - projection_weighted_eval(basis, coeffs, z)
    norm_sq = weighted_norm_sq(quadrature, ustar_w)
    residual_coeffs = bergman_project(basis, ustar_w, quadrature, weighted=True)
    scale = math.sqrt(norm_sq) if norm_sq > 0 else 1.0
    if eval_points is None:
        values = ustar_w / decay
    else:
        ep = np.asarray(eval_points, dtype=complex)
        ep_decay = np.exp(-0.5 * basis.m * basis.weight.Q(ep))
        values = cauchy_transform(f, src, ep) - projection_weighted_eval(basis, coeffs, ep.ravel()).reshape(ep.shape) / ep_decay
    return MinimalSolution(
        values=values,
        weighted_nodes=ustar_w,
        coefficients=coeffs,
        norm_sq=norm_sq,
        particular_norm_sq=weighted_norm_sq(quadrature, cf_w),
        orthogonality_residual=float(np.max(np.abs(residual_coeffs))) / scale,
    )


@dataclass(frozen=True)
class DbarBoundParams:
    M0: float
    bpar: float
    q_tau: float
    c_tau: float
    a: float
    tau: float

    def __post_init__(self):
        if not (self.M0 > 0 and self.bpar > 0 and self.tau > 0):
            raise InvalidArgumentError("M0, bpar and tau must be positive")

    @property
    def m0(self) -> float:
        return max(2 * self.M0, (1 + self.M0) / self.tau)


def bound_params(weight, equilibrium, support: SmoothBump, M0: float, bpar: float) -> DbarBoundParams:
    """Constants for the bound: q_tau, c_tau from the droplet and a = inf Delta Q over supp f."""
    from .potential import constants

    q, c = constants(equilibrium, weight)
    a = float(np.min(weight.laplacian(support.support_samples())))
    return DbarBoundParams(M0=M0, bpar=bpar, q_tau=q, c_tau=c, a=a, tau=equilibrium.tau)


def check_growth_compatibility(params: DbarBoundParams, equilibrium, radii=None) -> bool:
    """bpar log(1+|z|^2) <= M0 Qhat_tau(z) on sampled rings."""
    if radii is None:
        radii = np.concatenate([np.linspace(0.01, 3, 60), np.geomspace(3, 1e4, 30)])
    ring = np.exp(2j * np.pi * np.arange(32) / 32)
    z = (np.asarray(radii)[:, None] * ring[None, :]).ravel()
    return bool(np.all(params.bpar * np.log1p(np.abs(z) ** 2) <= params.M0 * equilibrium.eval_Qhat(z) + 1e-12))


def verify_cor_bh(
    basis: BergmanSpaceBasis,
    f: SmoothBump,
    params: DbarBoundParams,
    equilibrium,
    quadrature: PlanarQuadrature,
) -> dict:
    """lhs = ||u*||^2, rhs = 2 e^{M0 q_tau} / (a m + bpar c_tau) ||f||^2, and the regime flag."""
    m, n, tau = basis.m, basis.n, equilibrium.tau
    threshold = (m - params.M0) * tau + params.bpar
    samples = f.support_samples()
    support_ok = bool(np.all(equilibrium.in_droplet(samples)) and np.all(basis.weight.laplacian(samples) > 0))
    regime_ok = bool(
        n >= largest_int_below(threshold) > 0 and m >= params.m0 and support_ok and params.a > 0
    )
    decay = np.exp(-0.5 * m * basis.weight.Q(quadrature.nodes))
    fvals = f(quadrature.nodes)
    f_norm_sq = weighted_norm_sq(quadrature, fvals * decay)
    if f_norm_sq == 0:
        lhs = rhs = ratio = 0.0
        residual = 0.0
    else:
        sol = minimal_solution(basis, fvals, quadrature)
        lhs = sol.norm_sq
        rhs = 2 * math.exp(params.M0 * params.q_tau) / (params.a * m + params.bpar * params.c_tau) * f_norm_sq
        ratio = lhs / rhs
        residual = sol.orthogonality_residual
    return {
        "weight": basis.weight.name,
        "m": float(m),
        "n": int(n),
        "tau": float(tau),
        "lhs": float(lhs),
        "rhs": float(rhs),
        "ratio": float(ratio),
        "regime_ok": regime_ok,
        "orthogonality_residual": float(residual),
        "params": asdict(params),
    }
