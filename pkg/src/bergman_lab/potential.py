"""Equilibrium potential (largest subharmonic minorant of Q with growth tau log|z|^2) and droplet."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numba
import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import (
    DomainTooSmallError,
    GrowthViolationError,
    InvalidArgumentError,
    SolverFailureError,
)
from .weights import Weight


@dataclass(frozen=True, eq=False)
class EquilibriumResult:
    tau: float
    eval_Qhat: Callable
    q_tau: float
    c_tau: float
    droplet_radius: float | None = None
    droplet_mask: np.ndarray | None = None
    grid_x: np.ndarray | None = None
    grid_values: np.ndarray | None = None
    solver_diagnostics: dict = field(default_factory=dict)

    @property
    def spacing(self) -> float | None:
        return None if self.grid_x is None else float(self.grid_x[1] - self.grid_x[0])

    def grid_nodes(self) -> np.ndarray:
        xx, yy = np.meshgrid(self.grid_x, self.grid_x, indexing="ij")
        return xx + 1j * yy

    def in_droplet(self, z):
        z = np.asarray(z, dtype=complex)
        if self.droplet_mask is None:
            return np.abs(z) <= self.droplet_radius
        h = self.spacing
        i = np.rint((z.real - self.grid_x[0]) / h).astype(int)
        j = np.rint((z.imag - self.grid_x[0]) / h).astype(int)
        inside = (i >= 0) & (j >= 0) & (i < self.grid_x.size) & (j < self.grid_x.size)
        out = np.zeros(z.shape, dtype=bool)
        out[inside] = self.droplet_mask[i[inside], j[inside]]
        return out

    def interior_distance(self, z0: complex, weight: Weight) -> float:
        """dist(z0, C minus (droplet intersect X)); 0 when z0 is not interior."""
        z0 = complex(z0)
        if self.droplet_mask is None:
            d = self.droplet_radius - abs(z0)
            # radial weights with a degenerate Laplacian at the origin exclude 0 from X
            if not float(weight.laplacian(np.array(0j))) > 0:
                d = min(d, abs(z0))
            return max(d, 0.0)
        nodes = self.grid_nodes()
        good = self.droplet_mask & (weight.laplacian(nodes) > 0)
        if not self.in_droplet(np.array(z0)):
            return 0.0
        return float(np.min(np.abs(nodes[~good] - z0)))

    def to_csv(self) -> str:
        if self.grid_x is None:
            raise InvalidArgumentError("no grid attached to this result")
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["x", "y", "Qhat", "in_droplet"])
        for i, x in enumerate(self.grid_x):
            for j, y in enumerate(self.grid_x):
                writer.writerow([f"{x:.17g}", f"{y:.17g}", f"{self.grid_values[i, j]:.17g}", int(self.droplet_mask[i, j])])
        return buf.getvalue()


# ---------------------------------------------------------------------------
# radial weights


def radial_droplet_radius(weight: Weight, tau: float) -> float:
    """Solve r Q'(r)/2 = tau by bisection (the droplet is the closed disk of that radius)."""
    if not weight.is_radial or weight.radial_derivative is None:
        raise InvalidArgumentError("radial droplet needs a radial weight")
    if not tau > 0:
        raise InvalidArgumentError("tau must be positive")
    g = lambda r: float(r * weight.radial_derivative(r) / 2.0)
    lo, hi = 0.0, 1.0
    while g(hi) < tau:
        hi *= 2.0
        if hi > 1e6:
            raise GrowthViolationError(f"no droplet radius for tau={tau}")
    for _ in range(200):
        if hi - lo <= 1e-13 * max(1.0, hi):
            break
        mid = 0.5 * (lo + hi)
        if g(mid) < tau:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def radial_equilibrium(weight: Weight, tau: float, z, radius: float | None = None):
    """Q inside the droplet disk, Q(R) + tau log(|z|^2/R^2) outside."""
    R = radial_droplet_radius(weight, tau) if radius is None else radius
    z = np.asarray(z, dtype=complex)
    r = np.abs(z)
    outside = float(weight.radial_profile(R)) + tau * (2 * np.log(np.maximum(r, 1e-300)) - 2 * math.log(R))
    val = np.where(r <= R, weight.Q(z), outside)
    return float(val) if val.ndim == 0 else val


def radial_equilibrium_result(weight: Weight, tau: float) -> EquilibriumResult:
    R = radial_droplet_radius(weight, tau)
    q_tau = float(weight.radial_profile(R))
    return EquilibriumResult(
        tau=float(tau),
        eval_Qhat=lambda z: radial_equilibrium(weight, tau, z, radius=R),
        q_tau=q_tau,
        c_tau=(1.0 + R * R) ** -2,
        droplet_radius=R,
        solver_diagnostics={"method": "radial"},
    )


# ---------------------------------------------------------------------------
# projected SOR


@dataclass(frozen=True)
class GridSpec:
    extent: float = 3.0
    spacing: float = 0.02
    omega: float = 1.8
    max_iter: int = 200_000
    tol: float = 1e-8
    mass_tol: float = 1e-5

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        return cls(**{k: d[k] for k in d if k in cls.__dataclass_fields__})


@numba.njit(cache=True)
def _psor_sweeps(u, obstacle, omega, max_iter, tol):
    n = u.shape[0]
    delta = 0.0
    for it in range(max_iter):
        delta = 0.0
        for i in range(1, n - 1):
            for j in range(1, n - 1):
                avg = 0.25 * (u[i - 1, j] + u[i + 1, j] + u[i, j - 1] + u[i, j + 1])
                new = u[i, j] + omega * (avg - u[i, j])
                if new > obstacle[i, j]:
                    new = obstacle[i, j]
                d = abs(new - u[i, j])
                if d > delta:
                    delta = d
                u[i, j] = new
        if delta < tol:
            return it + 1, delta
    return max_iter, delta


def discrete_laplacian(u: np.ndarray, h: float) -> np.ndarray:
    """Five-point Laplacian with the 1/4 normalization on interior nodes."""
    return (u[:-2, 1:-1] + u[2:, 1:-1] + u[1:-1, :-2] + u[1:-1, 2:] - 4 * u[1:-1, 1:-1]) / (4 * h * h)


def equilibrium_mass(u: np.ndarray, h: float) -> float:
    """Sum of Delta_h u times the cell area h^2 / pi over interior nodes."""
    return float(math.fsum((discrete_laplacian(u, h) * (h * h / math.pi)).ravel()))


def psor_obstacle_solve(weight: Weight, tau: float, grid_spec: GridSpec | dict | None = None) -> EquilibriumResult:
    """Discrete obstacle problem for Qhat_tau by projected SOR.

    Boundary data tau log|z|^2 + c; the constant c is found by a secant iteration on the
    equilibrium mass identity (total discrete Laplacian mass equal to tau).
    """
    if grid_spec is None:
        grid_spec = GridSpec()
    elif isinstance(grid_spec, dict):
        grid_spec = GridSpec.from_dict(grid_spec)
    if not tau > 0:
        raise InvalidArgumentError("tau must be positive")
    h = grid_spec.spacing
    k = int(round(grid_spec.extent / h))
    x = h * np.arange(-k, k + 1)
    xx, yy = np.meshgrid(x, x, indexing="ij")
    z = xx + 1j * yy
    obstacle = np.ascontiguousarray(weight.Q(z), dtype=float)
    log_growth = tau * np.log(np.maximum(np.abs(z), h / 4) ** 2)
    border = np.zeros(z.shape, dtype=bool)
    border[[0, -1], :] = True
    border[:, [0, -1]] = True

    u = None
    sweeps = 0

    def solve(c):
        nonlocal u, sweeps
        target = np.minimum(obstacle, log_growth + c)
        if u is None:
            u = target.copy()
        else:
            u = np.minimum(obstacle, u + (c - solve.last_c))
        u[border] = log_growth[border] + c
        if np.any(u[border] > obstacle[border] + 1e-12):
            raise DomainTooSmallError("boundary data exceed the obstacle; enlarge the grid")
        it, delta = _psor_sweeps(u, obstacle, grid_spec.omega, grid_spec.max_iter, grid_spec.tol)
        sweeps += it
        if delta >= grid_spec.tol:
            raise SolverFailureError("projected SOR did not converge", delta, it)
        solve.last_c = c
        return equilibrium_mass(u, h) - tau

    solve.last_c = 0.0
    # initial bracket: with c below the far-field minimum of Q - tau log|z|^2 there is contact
    inner = np.abs(z) < 0.5 * grid_spec.extent
    c_hi = float(np.min((obstacle - log_growth)[border]))
    c0 = float(np.min((obstacle - log_growth)[inner & (np.abs(z) > h)]))
    c0 = min(c0, c_hi - 0.5)
    c1 = c0 + 0.25
    f0 = solve(c0)
    f1 = solve(c1)
    outer = 2
    while abs(f1) > grid_spec.mass_tol:
        if f1 == f0:
            raise SolverFailureError("mass identity is flat in the boundary constant", abs(f1), sweeps)
        c2 = c1 - f1 * (c1 - c0) / (f1 - f0)
        c2 = min(c2, c_hi - 1e-9)
        c0, f0 = c1, f1
        c1 = c2
        f1 = solve(c1)
        outer += 1
        if outer > 60:
            raise SolverFailureError("boundary constant iteration did not converge", abs(f1), sweeps)

    thresh = 1e-6 * (1.0 + np.abs(obstacle))
    mask = (obstacle - u) <= thresh
    ring = np.zeros_like(mask)
    ring[1, :] = ring[-2, :] = ring[:, 1] = ring[:, -2] = True
    if np.any(mask & (ring | border)):
        raise DomainTooSmallError("droplet reaches the boundary ring of the grid")
    # X trimming: strict subharmonicity
    mask &= weight.laplacian(z) > 0

    c_final = c1
    interp = RegularGridInterpolator((x, x), u, method="linear", bounds_error=False, fill_value=None)

    def eval_Qhat(w):
        w = np.asarray(w, dtype=complex)
        out = np.asarray(interp(np.stack([w.real.ravel(), w.imag.ravel()], axis=-1))).reshape(w.shape)
        far = (np.abs(w.real) > x[-1]) | (np.abs(w.imag) > x[-1])
        out = np.where(far, tau * np.log(np.maximum(np.abs(w), 1e-300) ** 2) + c_final, out)
        return float(out) if out.ndim == 0 else out

    count = int(mask.sum())
    zin = z[mask]
    residual = np.abs(discrete_laplacian(u, h)) * h * h
    return EquilibriumResult(
        tau=float(tau),
        eval_Qhat=eval_Qhat,
        q_tau=float(np.max(obstacle[mask])) if count else float("nan"),
        c_tau=float(np.min((1 + np.abs(zin) ** 2) ** -2)) if count else float("nan"),
        droplet_radius=math.sqrt(count * h * h / math.pi),
        droplet_mask=mask,
        grid_x=x,
        grid_values=u,
        solver_diagnostics={
            "method": "psor",
            "sweeps": sweeps,
            "outer_iterations": outer,
            "boundary_constant": c_final,
            "mass": equilibrium_mass(u, h),
            "max_radius": float(np.max(np.abs(zin))) if count else 0.0,
            "final_update": float(grid_spec.tol),
            "laplacian_residual": residual,
        },
    )


def constants(result: EquilibriumResult, weight: Weight) -> tuple[float, float]:
    """(q_tau, c_tau) = (sup of Q, inf of (1+|z|^2)^-2) over the droplet."""
    if result.droplet_mask is None:
        R = result.droplet_radius
        r = R * np.sqrt(np.linspace(0, 1, 65))
        samples = (r[:, None] * np.exp(2j * np.pi * np.arange(64) / 64)[None, :]).ravel()
    else:
        samples = result.grid_nodes()[result.droplet_mask]
    q = float(np.max(weight.Q(samples)))
    c = float(np.min((1 + np.abs(samples) ** 2) ** -2))
    return q, c
