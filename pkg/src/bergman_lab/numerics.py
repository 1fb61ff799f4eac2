"""Planar quadrature (dA = dx dy / pi), log-domain values and stable special functions."""

from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .errors import InvalidArgumentError

_DETERMINISTIC = False


def deterministic_enabled() -> bool:
    return _DETERMINISTIC


def set_deterministic(enabled: bool) -> None:
    """Toggle exactly-rounded (order independent) reductions in quadrature sums."""
    global _DETERMINISTIC
    _DETERMINISTIC = bool(enabled)


@contextlib.contextmanager
def deterministic_reductions(enabled: bool = True):
    previous = _DETERMINISTIC
    set_deterministic(enabled)
    try:
        yield
    finally:
        set_deterministic(previous)


def stable_sum(values) -> complex | float:
    """Sum a 1-D array; exactly rounded when deterministic reductions are on."""
    values = np.asarray(values)
    if not _DETERMINISTIC:
        return values.sum()
    if np.iscomplexobj(values):
        return complex(math.fsum(values.real), math.fsum(values.imag))
    return math.fsum(values)


@dataclass(frozen=True)
class LogValue:
    """A number stored as log|x| plus a unit phase (or sign); zero has log_magnitude -inf.

    Fields may be numpy arrays of matching shape for vectorized results.
    """

    log_magnitude: float | np.ndarray
    phase: complex | np.ndarray = 1.0

    @classmethod
    def from_value(cls, x) -> "LogValue":
        x = np.asarray(x)
        mag = np.abs(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            logm = np.log(mag)
            phase = np.where(mag > 0, x / np.where(mag > 0, mag, 1), 1.0)
        if logm.ndim == 0:
            return cls(float(logm), complex(phase) if np.iscomplexobj(x) else float(phase))
        return cls(logm, phase)

    def value(self):
        return self.phase * np.exp(self.log_magnitude)

    def __mul__(self, other: "LogValue") -> "LogValue":
        return LogValue(self.log_magnitude + other.log_magnitude, self.phase * other.phase)

    def __truediv__(self, other: "LogValue") -> "LogValue":
        return LogValue(self.log_magnitude - other.log_magnitude, self.phase / other.phase)


@dataclass(frozen=True, eq=False)
class PlanarQuadrature:
    """Nodes and positive weights for integrals against dA = dx dy / pi."""

    nodes: np.ndarray
    weights: np.ndarray
    r_max: float
    scheme: str
    center: complex = 0j
    # tensor structure, kept for reuse by radial integrals
    radial_nodes: np.ndarray | None = field(default=None, repr=False)
    radial_weights: np.ndarray | None = field(default=None, repr=False)
    n_angular: int | None = None
    spacing: float | None = None

    def __post_init__(self):
        if self.nodes.shape != self.weights.shape:
            raise InvalidArgumentError("node count must equal weight count")
        if not np.all(self.weights > 0):
            raise InvalidArgumentError("quadrature weights must be positive")

    def __len__(self) -> int:
        return self.nodes.size

    def integrate(self, values):
        """Integrate pointwise samples (array aligned with ``nodes``) or a callable."""
        if callable(values):
            values = values(self.nodes)
        values = np.broadcast_to(np.asarray(values), self.nodes.shape)
        return stable_sum(values * self.weights)

    def cell_radius(self) -> np.ndarray:
        """Radius of the disk whose dA-area equals each node's weight."""
        return np.sqrt(self.weights)


def gauss_legendre_panels(breaks, n_per_panel: int):
    """Composite Gauss-Legendre nodes/weights on consecutive intervals given by ``breaks``."""
    x, w = np.polynomial.legendre.leggauss(n_per_panel)
    nodes, weights = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        half = 0.5 * (b - a)
        nodes.append(a + half * (x + 1.0))
        weights.append(half * w)
    return np.concatenate(nodes), np.concatenate(weights)


def build_radial_quadrature(
    r_max: float,
    n_radial: int,
    n_angular: int,
    *,
    center: complex = 0j,
    breakpoints=(),
    panels: int = 1,
) -> PlanarQuadrature:
    """Gauss-Legendre in radius times the uniform angular rule on the disk D(center; r_max).

    ``n_radial`` nodes are used on every radial panel. Panels are ``panels`` equal pieces
    of [0, r_max], further split at ``breakpoints`` (useful for integrands with a jump).
    Weights carry the r dr Jacobian and the 1/pi normalization of dA.
    """
    if not r_max > 0:
        raise InvalidArgumentError(f"r_max must be positive, got {r_max}")
    if n_radial < 2 or n_angular < 4:
        raise InvalidArgumentError("need n_radial >= 2 and n_angular >= 4")
    breaks = set(np.linspace(0.0, r_max, int(panels) + 1).tolist())
    breaks.update(float(b) for b in breakpoints if 0 < b < r_max)
    breaks = np.array(sorted(breaks))
    r, wr = gauss_legendre_panels(breaks, n_radial)
    theta = 2 * np.pi * np.arange(n_angular) / n_angular
    nodes = center + (r[:, None] * np.exp(1j * theta)[None, :]).ravel()
    # (1/pi) * r dr * (2 pi / n_angular)
    weights = np.repeat(wr * r * (2.0 / n_angular), n_angular)
    return PlanarQuadrature(
        nodes=nodes,
        weights=weights,
        r_max=float(r_max),
        scheme="radial-tensor",
        center=complex(center),
        radial_nodes=r,
        radial_weights=wr,
        n_angular=int(n_angular),
    )


def build_grid_quadrature(extent: float, spacing: float, *, center: complex = 0j) -> PlanarQuadrature:
    """Midpoint rule on the square [-extent, extent]^2 (cell centres as nodes)."""
    if not extent > 0 or not spacing > 0:
        raise InvalidArgumentError("extent and spacing must be positive")
    k = int(round(2 * extent / spacing))
    x = -extent + spacing * (np.arange(k) + 0.5)
    xx, yy = np.meshgrid(x, x, indexing="ij")
    nodes = center + (xx + 1j * yy).ravel()
    weights = np.full(nodes.shape, spacing**2 / np.pi)
    return PlanarQuadrature(
        nodes=nodes,
        weights=weights,
        r_max=float(extent * math.sqrt(2)),
        scheme="cartesian-grid",
        center=complex(center),
        spacing=float(spacing),
    )


# ---------------------------------------------------------------------------
# truncated exponentials E_k(x) = sum_{j<=k} x^j / j!


def trunc_exp_log(k: int, x: float) -> LogValue:
    """log E_k(x) for real x >= 0, by streaming log-sum-exp (nondecreasing in k)."""
    if k < 0:
        return LogValue(-math.inf, 1.0)
    if x < 0:
        raise InvalidArgumentError("trunc_exp_log needs x >= 0")
    return LogValue(float(log_trunc_exp(k, x)), 1.0)


def log_trunc_exp(k: int, x):
    """Vectorized log E_k(x), x >= 0; returns -inf for k < 0 (E_{-1} = 0)."""
    x = np.asarray(x, dtype=float)
    if k < 0:
        return np.full(x.shape, -np.inf) if x.ndim else -np.inf
    with np.errstate(divide="ignore"):
        logx = np.log(x)
    acc = np.zeros(x.shape)
    for j in range(1, k + 1):
        term = j * logx - math.lgamma(j + 1) if j else 0.0
        acc = np.logaddexp(acc, np.where(x > 0, term, -np.inf))
    return acc if acc.ndim else float(acc)


def log_trunc_exp_complex(k: int, w):
    """log|E_k(w)| and arg-phase of E_k(w) for complex w (vectorized).

    Small arguments (|w| <= 30) are summed directly with Neumaier compensation; larger
    ones are summed relative to the dominant term so nothing overflows.
    """
    w = np.asarray(w, dtype=complex)
    shape = w.shape
    w = w.ravel()
    logmag = np.empty(w.shape)
    phase = np.empty(w.shape, dtype=complex)
    if k < 0:
        return np.full(shape, -np.inf), np.ones(shape, dtype=complex)

    small = np.abs(w) <= 30.0
    if np.any(small):
        ws = w[small]
        total = np.ones(ws.shape, dtype=complex)
        comp = np.zeros(ws.shape, dtype=complex)
        term = np.ones(ws.shape, dtype=complex)
        for j in range(1, k + 1):
            term = term * ws / j
            t = total + term
            big = np.abs(total) >= np.abs(term)
            comp += np.where(big, (total - t) + term, (term - t) + total)
            total = t
        total = total + comp
        mag = np.abs(total)
        with np.errstate(divide="ignore"):
            logmag[small] = np.log(mag)
        phase[small] = np.where(mag > 0, total / np.where(mag > 0, mag, 1.0), 1.0)

    large = ~small
    if np.any(large):
        wl = w[large]
        lr = np.log(np.abs(wl))
        arg = np.angle(wl)
        jstar = np.minimum(np.floor(np.abs(wl)), k)
        shift = jstar * lr - gammaln(jstar + 1)
        total = np.zeros(wl.shape, dtype=complex)
        for j in range(0, k + 1):
            total += np.exp(j * lr - math.lgamma(j + 1) - shift + 1j * j * arg)
        mag = np.abs(total)
        with np.errstate(divide="ignore"):
            logmag[large] = np.log(mag) + shift
        phase[large] = np.where(mag > 0, total / np.where(mag > 0, mag, 1.0), 1.0)
    return logmag.reshape(shape), phase.reshape(shape)


# ---------------------------------------------------------------------------
# lower incomplete gamma for integer order


def log_lower_incomplete_gamma(a, x: float):
    """log of int_0^x s^(a-1) e^(-s) ds for integer a >= 1 (vectorized in a)."""
    if x < 0:
        raise InvalidArgumentError("lower_incomplete_gamma needs x >= 0")
    a = np.asarray(a)
    if np.any(a < 1) or np.any(a != np.floor(a)):
        raise InvalidArgumentError("order a must be a positive integer")
    scalar = a.ndim == 0
    a = np.atleast_1d(a).astype(int)
    out = np.empty(a.shape)
    if x == 0:
        out[:] = -np.inf
        return float(out[0]) if scalar else out
    logx = math.log(x)
    for idx, ai in enumerate(a):
        if x < ai + 1:
            # gamma(a,x) = x^a e^-x sum_k x^k / (a (a+1) ... (a+k))
            term = 1.0 / ai
            total = term
            k = 1
            while term > 1e-17 * total:
                term *= x / (ai + k)
                total += term
                k += 1
            out[idx] = ai * logx - x + math.log(total)
        else:
            upper = math.exp(log_trunc_exp(int(ai) - 1, x) - x)  # regularized upper tail
            out[idx] = math.lgamma(ai) + math.log1p(-upper)
    return float(out[0]) if scalar else out


def lower_incomplete_gamma(a: int, x: float) -> float:
    """int_0^x s^(a-1) e^(-s) ds for a positive integer ``a``."""
    return math.exp(log_lower_incomplete_gamma(a, x))


def logsumexp_complex(log_terms: np.ndarray, axis: int = -1) -> LogValue:
    """log of a sum of complex exponentials exp(log_terms), reduced along ``axis``."""
    shift = np.max(log_terms.real, axis=axis, keepdims=True)
    shift = np.where(np.isfinite(shift), shift, 0.0)
    total = np.sum(np.exp(log_terms - shift), axis=axis)
    mag = np.abs(total)
    with np.errstate(divide="ignore"):
        logm = np.log(mag) + np.squeeze(shift, axis=axis)
    phase = np.where(mag > 0, total / np.where(mag > 0, mag, 1.0), 1.0)
    return LogValue(logm, phase)
