"""Heat Green operator on the periodic box and whole-space kernel diagnostics.

``heat_solve`` is the solution operator of ``u_t - rho Lap u = g`` with
``u(., 0) = 0``.  Each Fourier mode obeys a scalar linear ODE which is
advanced by the exponential integrator that is exact when the forcing is
piecewise linear in time between grid nodes.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
import math
import warnings

import numpy as np
from scipy import integrate
from scipy.signal import fftconvolve

from .fields import (
    DomainSpec,
    SpaceTimeField,
    SpectralField,
    SpectralVectorField,
    TimeGrid,
    _axis_index,
    _deriv,
)


@dataclass(frozen=True)
class HeatParams:
    rho: float = 1.0

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError(f"viscosity must be positive, got {self.rho}")


@dataclass(frozen=True)
class KernelSample:
    offset: float
    gap: float
    value: float
    weighted: float


def _rho(hp) -> float:
    return hp.rho if isinstance(hp, HeatParams) else HeatParams(float(hp)).rho


def duhamel_weights(lam: np.ndarray, h: float):
    """Return ``(E, a, b)`` with ``u_{n+1} = E u_n + a g_n + b g_{n+1}``.

    Exact for ``u' = -lam u + g`` when g is linear on ``[t_n, t_{n+1}]``.
    """
    z = np.asarray(lam, dtype=float) * h
    small = z < 1e-3
    zs = np.where(small, 1.0, z)
    E = np.exp(-z)
    phi1 = np.where(small, 1 - z / 2 + z**2 / 6 - z**3 / 24, -np.expm1(-zs) / zs)
    psi = np.where(
        small,
        0.5 - z / 6 + z**2 / 24 - z**3 / 120 + z**4 / 720,
        (zs + np.expm1(-zs)) / zs**2,
    )
    b = h * psi
    a = h * phi1 - b
    return E, a, b


def duhamel(forcing: np.ndarray, lam: np.ndarray, h: float, start: np.ndarray | None = None) -> np.ndarray:
    """March mode-wise Duhamel integrals along axis 0 of ``forcing``."""
    E, a, b = duhamel_weights(lam, h)
    out = np.empty_like(forcing, dtype=complex)
    out[0] = 0.0 if start is None else start
    for n in range(forcing.shape[0] - 1):
        out[n + 1] = E * out[n] + a * forcing[n] + b * forcing[n + 1]
    return out


def heat_solve(forcing: SpaceTimeField, hp) -> SpaceTimeField:
    """Apply the Green operator: solve the forced heat equation from rest."""
    lam = _rho(hp) * forcing.domain.k2
    return forcing.with_coeffs(duhamel(forcing.coeffs, lam, forcing.grid.h))


def grad_green(forcing: SpaceTimeField, hp, axis: int) -> SpaceTimeField:
    """``d/dx_axis`` of :func:`heat_solve`, formed on the Duhamel coefficients."""
    i = _axis_index(axis)
    u = heat_solve(forcing, hp)
    return u.with_coeffs(_deriv(u.coeffs, forcing.domain, i))


def heat_flow(a: SpectralVectorField, hp, tg: TimeGrid) -> SpaceTimeField:
    """Free heat evolution of the initial field ``a`` on the nodes of ``tg``."""
    if not np.all(np.isfinite(a.coeffs)):
        raise ValueError("initial field is not finite")
    lam = _rho(hp) * a.domain.k2
    decay = np.exp(-lam[None] * tg.nodes[:, None, None, None])
    c = a.coeffs if a.coeffs.ndim == 4 else a.coeffs[None]
    return SpaceTimeField(tg, a.domain, decay[:, None] * c[None])


def _inv_lap_coeffs(c: np.ndarray, dom: DomainSpec) -> np.ndarray:
    k2 = dom.k2.copy()
    N = dom.modes
    k2[N, N, N] = 1.0
    out = -c / k2
    out[..., N, N, N] = 0.0
    return out


def inverse_laplacian(f: SpectralField, tol: float = 1e-12) -> SpectralField:
    """Zero-mean solution of ``Lap u = f``; a nonzero mean of f is dropped with a warning."""
    if abs(f.mean) > tol * max(1.0, float(np.max(np.abs(f.coeffs)))):
        warnings.warn(f"inverse_laplacian: input mean {f.mean:.3e} removed (solvability gauge)", stacklevel=2)
    return SpectralField(f.domain, _inv_lap_coeffs(f.coeffs, f.domain))


# --------------------------------------------------------------------------
# whole-space kernel bounds

def whole_space_kernel(offset, gap: float, hp) -> float:
    """``(4 pi rho gap)^(-3/2) exp(-|offset|^2 / (4 rho gap))``."""
    if not gap > 0:
        raise ValueError(f"time gap must be positive, got {gap}")
    rho = _rho(hp)
    r2 = float(np.sum(np.asarray(offset, dtype=float) ** 2))
    return (4 * math.pi * rho * gap) ** -1.5 * math.exp(-r2 / (4 * rho * gap))


def _kernel_grid(r: np.ndarray, gap: np.ndarray, rho: float):
    phi = (4 * math.pi * rho * gap) ** -1.5 * np.exp(-(r**2) / (4 * rho * gap))
    grad = phi * r / (2 * rho * gap)
    return phi, grad


ESTIMATES = ("2.9", "2.10")


def kernel_sup_closed_form(mu: float, estimate_id: str, hp) -> float:
    """Exact supremum over all (offset, gap) of the weighted kernel.

    With ``s = r^2 / (4 rho gap)`` the weighted value depends on s only and
    peaks at ``s = a``; both estimates scale as ``rho^(-mu)``.
    """
    rho = _rho(hp)
    if estimate_id == "2.9":
        a = (3 - 2 * mu) / 2
        pref = math.pi**-1.5 * (4 * rho) ** -mu
    elif estimate_id == "2.10":
        a = (5 - 2 * mu) / 2
        pref = math.pi**-1.5 * 4 ** (1 - mu) / 2 * rho**-mu
    else:
        raise ValueError(f"unknown estimate {estimate_id!r}")
    return pref * (a / math.e) ** a


@dataclass
class KernelEstimate:
    mu: float
    estimate_id: str
    constant: float
    argmax: KernelSample
    gaps: np.ndarray
    offsets: np.ndarray
    weighted: np.ndarray

    def write_csv(self, path) -> None:
        """Columns: mu, estimate_id, gap, offset, weighted_value, running_sup."""
        flat = self.weighted.ravel()
        G, R = np.meshgrid(self.gaps, self.offsets, indexing="ij")
        running = np.maximum.accumulate(flat)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["mu", "estimate_id", "gap", "offset", "weighted_value", "running_sup"])
            for g, r, v, s in zip(G.ravel(), R.ravel(), flat, running):
                w.writerow([repr(self.mu), self.estimate_id, repr(float(g)), repr(float(r)), repr(float(v)), repr(float(s))])


def default_sample_plan(n_gap: int = 200, n_offset: int = 200):
    gaps = np.logspace(-4, 0, n_gap)
    offsets = np.logspace(-3, math.log10(math.pi), n_offset)
    return gaps, offsets


def kernel_estimate_constant(mu: float, estimate_id: str, hp, plan=None) -> KernelEstimate:
    """Empirical constant of the kernel bound over a (gap, offset) sample plan.

    For ``"2.9"`` the weighted value is ``Phi gap^mu r^(3 - 2 mu)``, valid for
    ``0 < mu < 1``; for ``"2.10"`` it is ``|grad Phi| gap^mu r^(4 - 2 mu)``,
    valid for ``1/2 < mu < 1``.
    """
    if estimate_id == "2.9":
        if not 0 < mu < 1:
            raise ValueError(f"estimate 2.9 needs 0 < mu < 1, got {mu}")
    elif estimate_id == "2.10":
        if not 0.5 < mu < 1:
            raise ValueError(f"estimate 2.10 needs 1/2 < mu < 1, got {mu}")
    else:
        raise ValueError(f"unknown estimate {estimate_id!r}")
    rho = _rho(hp)
    gaps, offsets = default_sample_plan() if plan is None else (np.asarray(plan[0]), np.asarray(plan[1]))
    G, R = np.meshgrid(gaps, offsets, indexing="ij")
    phi, grad = _kernel_grid(R, G, rho)
    if estimate_id == "2.9":
        kern, weighted = phi, phi * G**mu * R ** (3 - 2 * mu)
    else:
        kern, weighted = grad, grad * G**mu * R ** (3 - (2 * mu - 1))
    idx = np.unravel_index(np.argmax(weighted), weighted.shape)
    best = KernelSample(float(R[idx]), float(G[idx]), float(kern[idx]), float(weighted[idx]))
    return KernelEstimate(mu, estimate_id, float(weighted[idx]), best, gaps, offsets, weighted)


# --------------------------------------------------------------------------
# Riesz-type potentials on a cube

def cell_self_integral(lam: float) -> float:
    """``int over [-1/2, 1/2]^3 of |y|^(lam - 3) dy``, reduced to the six faces."""
    if not 0 < lam < 3:
        raise ValueError("lambda must lie in (0, 3)")
    val, _ = integrate.dblquad(
        lambda z, y: (0.25 + y * y + z * z) ** ((lam - 3) / 2), -0.5, 0.5, -0.5, 0.5, epsabs=1e-13, epsrel=1e-12
    )
    return 3.0 / lam * val


def _potential_kernel(M: int, spacing: float, lam: float) -> np.ndarray:
    d = np.arange(-(M - 1), M) * spacing
    X, Y, Z = np.meshgrid(d, d, d, indexing="ij")
    r = np.sqrt(X**2 + Y**2 + Z**2)
    r[M - 1, M - 1, M - 1] = 1.0
    K = spacing**3 * r ** (lam - 3)
    K[M - 1, M - 1, M - 1] = spacing**lam * cell_self_integral(lam)
    return K


def sobolev_potential(f: np.ndarray, spacing: float, lam: float, method: str = "fft", cap: int = 24) -> np.ndarray:
    """``u(x) = int f(xi) |x - xi|^(lam - 3) dxi`` on a cubic sample grid.

    The integral is the cell-centred sum over grid nodes; the singular self
    cell uses the exact integral of the kernel over one cell.  ``method="direct"``
    evaluates the double sum pointwise and refuses grids larger than ``cap``;
    ``method="fft"`` evaluates the identical sum as a linear convolution.
    """
    f = np.asarray(f, dtype=float)
    if f.ndim != 3 or len(set(f.shape)) != 1:
        raise ValueError("expected a cubic sample array")
    if not 0 < lam < 3:
        raise ValueError("lambda must lie in (0, 3)")
    M = f.shape[0]
    K = _potential_kernel(M, spacing, lam)
    if method == "fft":
        full = fftconvolve(f, K, mode="full")
        return full[M - 1 : 2 * M - 1, M - 1 : 2 * M - 1, M - 1 : 2 * M - 1]
    if method != "direct":
        raise ValueError(f"unknown method {method!r}")
    if M > cap:
        raise ValueError(f"grid {M}^3 exceeds the direct-summation cap {cap}^3")
    out = np.empty_like(f)
    idx = np.arange(M)
    for i in idx:
        for j in idx:
            for k in idx:
                sub = K[M - 1 + i - idx[:, None, None], M - 1 + j - idx[None, :, None], M - 1 + k - idx[None, None, :]]
                out[i, j, k] = np.sum(sub * f)
    return out


def sobolev_exponent(p: float, lam: float) -> float:
    """``q = 3p / (3 - p lam)`` for ``0 < lam < 3/p``."""
    if not 0 < lam < 3 / p:
        raise ValueError(f"need 0 < lambda < 3/p, got lambda={lam}, p={p}")
    return 3 * p / (3 - p * lam)
