"""Orthonormal structure of H_{m,n} (polynomials of degree < n in L^2(e^{-mQ} dA)) and its kernel."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.special import logsumexp

from .errors import ConditioningError, InvalidArgumentError
from .numerics import LogValue, PlanarQuadrature, build_radial_quadrature, gauss_legendre_panels
from .weights import Weight, weight_from_descriptor

CONDITION_CUTOFF = 1e12
_CHUNK = 4096


def _radial_Q(weight: Weight, r):
    r = np.asarray(r, dtype=float)
    if weight.radial_profile is not None:
        return weight.radial_profile(r)
    theta = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    return np.min(weight.Q(r[..., None] * np.exp(1j * theta)), axis=-1)


def default_r_max(weight: Weight, m: float, n: int, margin: float = 80.0) -> float:
    """Truncation radius beyond which every weighted moment of degree < n is negligible.

    Requires m Q(r) - 2(n-1) log r to exceed both 80 + m min Q and 80 + its own minimum,
    so the tail is tiny relative to the peak of the largest moment integrand.
    """
    rs = np.linspace(1e-3, 60.0, 60000)
    g = m * _radial_Q(weight, rs) - 2 * (n - 1) * np.log(rs)
    threshold = margin + max(m * weight.min_Q, float(np.min(g)))
    below = np.nonzero(g < threshold)[0]
    if below.size == 0:
        return float(rs[0])
    if below[-1] + 1 >= rs.size:
        raise InvalidArgumentError("weight grows too slowly for a finite truncation radius")
    return float(rs[below[-1] + 1])


def _peak_radius(weight: Weight, m: float, n: int) -> float:
    rs = np.linspace(1e-3, 10.0, 10000)
    g = 2 * max(n - 1, 0) * np.log(rs) - m * _radial_Q(weight, rs)
    return float(rs[np.argmax(g)])


def default_quadrature(
    weight: Weight, m: float, n: int, *, breakpoints=(), r_max: float | None = None, oversample: float = 1.0
) -> PlanarQuadrature:
    """Radial tensor rule centred at 0, resolving the length scale 1/sqrt(m Delta Q) and degree 2(n-1)."""
    if r_max is None:
        r_max = default_r_max(weight, m, n)
    r_peak = max(_peak_radius(weight, m, n), 1.0 / math.sqrt(m))
    probe = np.linspace(0.0, min(r_max, 1.5 * r_peak + 0.5), 200)
    lap = float(np.max(weight.laplacian(probe.astype(complex))))
    scale = math.sqrt(m * max(lap, 1e-3))
    dr = min(0.5, 2.0 / scale) / oversample
    panels = int(math.ceil(r_max / dr))
    n_ang = max(64, 2 * n + 16, int(math.ceil(4 * math.pi * r_peak * scale * oversample)))
    n_ang = int(8 * math.ceil(n_ang / 8))
    return build_radial_quadrature(r_max, 16, n_ang, panels=panels, breakpoints=breakpoints)


@dataclass(frozen=True, eq=False)
class BergmanSpaceBasis:
    """Orthonormal basis data for H_{m,n}.

    Radial weights store log h_j with h_j = int |z|^{2j} e^{-mQ} dA (basis z^j / sqrt(h_j)).
    Other weights store the Cholesky factor of the unit-diagonal Gram matrix of the
    scaled monomials z^j / s_j.
    """

    weight: Weight
    m: float
    n: int
    radial_log_norms: np.ndarray | None = None
    general_factor: np.ndarray | None = None
    log_scales: np.ndarray | None = None
    permutation: np.ndarray | None = None
    quadrature: PlanarQuadrature | None = field(default=None, repr=False)
    condition_number: float | None = None

    def __post_init__(self):
        if (self.radial_log_norms is None) == (self.general_factor is None):
            raise InvalidArgumentError("exactly one of radial_log_norms / general_factor must be set")

    @property
    def is_radial(self) -> bool:
        return self.radial_log_norms is not None


def radial_log_moments(weight: Weight, m: float, n: int, r_max: float | None = None) -> np.ndarray:
    """log h_j, j < n, by composite Gauss-Legendre in radius, summed in log domain."""
    if r_max is None:
        r_max = default_r_max(weight, m, n)
    r, wr = gauss_legendre_panels(np.linspace(0.0, r_max, 257), 16)
    logr = np.log(r)
    base = np.log(2.0 * wr) + logr - m * weight.radial_profile(r)
    j = np.arange(n)[:, None]
    return logsumexp(base[None, :] + 2 * j * logr[None, :], axis=1)


def build_space(
    weight: Weight, m: float, n: int, quadrature: PlanarQuadrature | None = None, *, method: str = "auto"
) -> BergmanSpaceBasis:
    if n < 1:
        raise InvalidArgumentError("n must be >= 1")
    if not m > 0:
        raise InvalidArgumentError("m must be positive")
    if method not in ("auto", "radial", "general"):
        raise InvalidArgumentError(f"unknown method {method!r}")
    use_radial = method == "radial" or (method == "auto" and weight.is_radial)
    if use_radial:
        if weight.radial_profile is None:
            raise InvalidArgumentError("radial construction needs a radial profile")
        log_h = radial_log_moments(weight, m, n)
        return BergmanSpaceBasis(weight, float(m), int(n), radial_log_norms=log_h, quadrature=quadrature)
    if quadrature is None:
        quadrature = default_quadrature(weight, m, n)
    return _build_general(weight, float(m), int(n), quadrature)


def _scaled_monomials(z, log_scales, mQ_half):
    """Rows z^j e^{-mQ/2} / s_j, evaluated through logarithms."""
    z = np.asarray(z, dtype=complex)
    n = log_scales.size
    with np.errstate(divide="ignore"):
        logz = np.log(z)
    j = np.arange(n)
    logt = j[None, :] * logz[:, None] - log_scales[None, :] - mQ_half[:, None]
    logt[:, 0] = -log_scales[0] - mQ_half
    out = np.exp(logt)
    out[~np.isfinite(logt)] = 0.0
    return out


def _build_general(weight, m, n, quadrature):
    z = quadrature.nodes
    mQ = m * weight.Q(z)
    logq = np.log(quadrature.weights)
    with np.errstate(divide="ignore"):
        logabs = np.log(np.abs(z))
    j = np.arange(n)
    diag_terms = logq[None, :] + 2 * j[:, None] * np.where(np.isfinite(logabs), logabs, -np.inf)[None, :] - mQ[None, :]
    diag_terms[0] = logq - mQ
    log_scales = 0.5 * logsumexp(diag_terms, axis=1)
    phi = _scaled_monomials(z, log_scales, 0.5 * mQ) * np.sqrt(quadrature.weights)[:, None]
    gram = phi.conj().T @ phi
    gram = 0.5 * (gram + gram.conj().T)
    cond = float(np.linalg.cond(gram))
    perm = None
    try:
        factor = scipy.linalg.cholesky(gram, lower=True)
    except np.linalg.LinAlgError:
        c, piv, rank, info = scipy.linalg.lapack.zpstrf(gram, lower=1)
        if rank < n:
            raise ConditioningError("scaled Gram matrix is not positive definite", cond, int(rank))
        factor = np.tril(c)
        perm = piv - 1
    if cond > CONDITION_CUTOFF:
        raise ConditioningError("scaled Gram matrix too ill-conditioned", cond, n)
    return BergmanSpaceBasis(
        weight,
        m,
        n,
        general_factor=factor,
        log_scales=log_scales,
        permutation=perm,
        quadrature=quadrature,
        condition_number=cond,
    )


def weighted_basis(basis: BergmanSpaceBasis, z) -> np.ndarray:
    """Matrix of e_j(z) e^{-mQ(z)/2}, shape z.shape + (n,)."""
    z = np.asarray(z, dtype=complex)
    flat = z.ravel()
    mQ_half = 0.5 * basis.m * basis.weight.Q(flat)
    if basis.is_radial:
        out = _scaled_monomials(flat, 0.5 * basis.radial_log_norms, mQ_half)
    else:
        phi = _scaled_monomials(flat, basis.log_scales, mQ_half)
        if basis.permutation is not None:
            phi = phi[:, basis.permutation]
        x = scipy.linalg.solve_triangular(basis.general_factor, phi.conj().T, lower=True)
        out = x.conj().T
    return out.reshape(z.shape + (basis.n,))


def weighted_kernel(basis: BergmanSpaceBasis, z, w) -> LogValue:
    """K_{m,n}(z,w) e^{-m(Q(z)+Q(w))/2} as (log magnitude, phase); broadcasts z against w."""
    z, w = np.broadcast_arrays(np.asarray(z, dtype=complex), np.asarray(w, dtype=complex))
    shape = z.shape
    z, w = z.ravel(), w.ravel()
    if basis.is_radial:
        logmag, phase = _radial_weighted_kernel(basis, z, w)
    else:
        logmag = np.empty(z.shape)
        phase = np.empty(z.shape, dtype=complex)
        for s in range(0, z.size, _CHUNK):
            ez = weighted_basis(basis, z[s : s + _CHUNK])
            ew = weighted_basis(basis, w[s : s + _CHUNK])
            val = np.sum(ez * ew.conj(), axis=1)
            mag = np.abs(val)
            with np.errstate(divide="ignore"):
                logmag[s : s + _CHUNK] = np.log(mag)
            phase[s : s + _CHUNK] = np.where(mag > 0, val / np.where(mag > 0, mag, 1), 1.0)
    return LogValue(logmag.reshape(shape), phase.reshape(shape))


def _radial_weighted_kernel(basis, z, w):
    # term j: j log z + j log conj(w) - log h_j - m(Q(z)+Q(w))/2
    log_h = basis.radial_log_norms
    with np.errstate(divide="ignore"):
        lz = np.log(z)
        lw = np.log(np.conj(w))
    lzw = lz + lw
    base = -0.5 * basis.m * (basis.weight.Q(z) + basis.weight.Q(w))
    zero = ~np.isfinite(lzw.real)
    lzw = np.where(zero, 0.0, lzw)

    def log_term(j):
        t = j * lzw - log_h[j] + base
        if j > 0:
            t = np.where(zero, -np.inf, t)
        return t

    shift = np.full(z.shape, -np.inf)
    for j in range(basis.n):
        shift = np.maximum(shift, log_term(j).real)
    shift = np.where(np.isfinite(shift), shift, 0.0)
    total = np.zeros(z.shape, dtype=complex)
    comp = np.zeros(z.shape, dtype=complex)
    for j in range(basis.n):
        term = np.exp(log_term(j) - shift)
        t = total + term
        comp += np.where(np.abs(total) >= np.abs(term), (total - t) + term, (term - t) + total)
        total = t
    total = total + comp
    mag = np.abs(total)
    with np.errstate(divide="ignore"):
        logmag = np.log(mag) + shift
    phase = np.where(mag > 0, total / np.where(mag > 0, mag, 1.0), 1.0)
    return logmag, phase


def kernel_eval(basis: BergmanSpaceBasis, z, w):
    """K_{m,n}(z, w) (unweighted; may overflow for large m |z|^2, prefer weighted_kernel)."""
    lv = weighted_kernel(basis, z, w)
    z, w = np.broadcast_arrays(np.asarray(z, dtype=complex), np.asarray(w, dtype=complex))
    unweight = 0.5 * basis.m * (basis.weight.Q(z) + basis.weight.Q(w))
    val = lv.phase * np.exp(lv.log_magnitude + unweight)
    return val[()] if np.ndim(val) == 0 else val


def one_point(basis: BergmanSpaceBasis, z):
    """K_{m,n}(z,z) e^{-mQ(z)}."""
    lv = weighted_kernel(basis, z, z)
    val = np.exp(lv.log_magnitude)
    return float(val) if np.ndim(val) == 0 else val


def log_one_point(basis: BergmanSpaceBasis, z):
    return weighted_kernel(basis, z, z).log_magnitude


# ---------------------------------------------------------------------------
# serialization


def basis_to_json(basis: BergmanSpaceBasis) -> str:
    record = {"weight": basis.weight.descriptor, "m": basis.m, "n": basis.n}
    if basis.is_radial:
        record["radial_log_norms"] = basis.radial_log_norms.tolist()
    else:
        record["general_factor"] = {
            "real": basis.general_factor.real.tolist(),
            "imag": basis.general_factor.imag.tolist(),
        }
        record["log_scales"] = basis.log_scales.tolist()
        if basis.permutation is not None:
            record["permutation"] = basis.permutation.tolist()
    return json.dumps(record, sort_keys=True)


def basis_from_json(text: str) -> BergmanSpaceBasis:
    record = json.loads(text)
    weight = weight_from_descriptor(record["weight"])
    if "radial_log_norms" in record:
        return BergmanSpaceBasis(
            weight, record["m"], record["n"], radial_log_norms=np.array(record["radial_log_norms"])
        )
    factor = np.array(record["general_factor"]["real"]) + 1j * np.array(record["general_factor"]["imag"])
    perm = np.array(record["permutation"]) if "permutation" in record else None
    return BergmanSpaceBasis(
        weight,
        record["m"],
        record["n"],
        general_factor=factor,
        log_scales=np.array(record["log_scales"]),
        permutation=perm,
    )
