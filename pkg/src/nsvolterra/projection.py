"""Weyl (Helmholtz) decomposition on the periodic box and the pressure operator.

On the torus the pressure representation collapses to

    grad p = -grad Lap^{-1} div w,

so ``w + grad p`` is the Leray projection of ``w``.  The mean mode is a
constant vector: divergence free and not a gradient, so it stays with the
solenoidal part.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import DomainSpec, SpaceTimeField, SpectralField, SpectralVectorField


@dataclass(frozen=True)
class DecompositionResult:
    solenoidal: SpectralVectorField
    gradient: SpectralVectorField
    potential: SpectralField


def _gradient_part(c: np.ndarray, dom: DomainSpec) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(grad q, q)`` with ``q = Lap^{-1} div v`` for coefficients ``c[..., 3, K, K, K]``."""
    k1, k2_, k3 = dom.wavenumbers
    kk = np.stack(np.broadcast_arrays(k1, k2_, k3))
    k2 = dom.k2.copy()
    N = dom.modes
    k2[N, N, N] = 1.0
    kdotv = np.sum(kk * c, axis=-4)
    q = -1j * kdotv / k2
    q[..., N, N, N] = 0.0
    grad = 1j * kk * q[..., None, :, :, :]
    return grad, q


def weyl_decompose(v: SpectralVectorField) -> DecompositionResult:
    grad, q = _gradient_part(v.coeffs, v.domain)
    g = SpectralVectorField(v.domain, grad)
    return DecompositionResult(v - g, g, SpectralField(v.domain, q))


def leray_project(v: SpectralVectorField) -> SpectralVectorField:
    return weyl_decompose(v).solenoidal


def pressure_gradient_from_w(w: SpaceTimeField, hp=None) -> SpaceTimeField:
    """``grad p`` at every time node, for ``u_t - rho Lap u - grad p = w``.

    ``hp`` is accepted for interface symmetry; the operator does not depend on it.
    """
    if not w.is_vector:
        raise ValueError("pressure gradient needs a vector field")
    grad, _ = _gradient_part(w.coeffs, w.domain)
    return w.with_coeffs(-grad)


def pressure_potential(w_snapshot: SpectralVectorField) -> SpectralField:
    """Zero-mean ``p = -Lap^{-1} div w``."""
    _, q = _gradient_part(w_snapshot.coeffs, w_snapshot.domain)
    return SpectralField(w_snapshot.domain, -q)


def pressure_potential_series(w: SpaceTimeField) -> SpaceTimeField:
    """:func:`pressure_potential` at every time node, as a scalar space-time field."""
    _, q = _gradient_part(w.coeffs, w.domain)
    return SpaceTimeField(w.grid, w.domain, -q[:, None])
