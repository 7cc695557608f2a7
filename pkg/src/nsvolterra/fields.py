"""Fourier representation of scalar and vector fields on a periodic box.

A field is stored as the complex coefficients ``c(k)`` of

    u(x) = sum_k c(k) exp(i kappa(k) . x),   kappa_i = 2 pi k_i / L_i,

for integer wave vectors with ``|k_i| <= N``.  Coefficient arrays use centered
indexing: ``coeffs[..., k1 + N, k2 + N, k3 + N]``.  Real-valued fields carry
conjugate-symmetric coefficients.

Most functions accept the dataclass wrappers below; the underscore-prefixed
array helpers work on raw coefficient stacks with arbitrary leading axes and
are what the solver uses on whole space-time blocks.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
import json
import math

import numpy as np
import scipy.fft as sfft

_AXES = (-3, -2, -1)


@dataclass(frozen=True)
class DomainSpec:
    """Periodic box ``prod_i [0, L_i)`` with mode cutoff and collocation grid.

    Parameters
    ----------
    modes : int
        Cutoff N; coefficients kept for ``|k_i| <= N``.
    grid : int, optional
        Collocation points M per axis.  Must satisfy ``M >= 2N + 1`` so the
        transform pair is exact.  Defaults to ``3N + 1``, the 2/3-rule size.
    lengths : tuple of float
        Box edge lengths.
    """

    modes: int = 8
    grid: int | None = None
    lengths: tuple[float, float, float] = (2 * math.pi, 2 * math.pi, 2 * math.pi)

    def __post_init__(self):
        if int(self.modes) != self.modes or self.modes < 1:
            raise ValueError(f"modes must be a positive integer, got {self.modes}")
        if self.grid is None:
            object.__setattr__(self, "grid", 3 * self.modes + 1)
        if self.grid < 2 * self.modes + 1:
            raise ValueError(
                f"grid size {self.grid} too small for cutoff {self.modes}; need >= {2 * self.modes + 1}"
            )
        lengths = tuple(float(v) for v in self.lengths)
        if len(lengths) != 3 or min(lengths) <= 0:
            raise ValueError(f"box lengths must be three positive numbers, got {self.lengths}")
        object.__setattr__(self, "lengths", lengths)

    @property
    def size(self) -> int:
        return 2 * self.modes + 1

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.size,) * 3

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    @property
    def dealias_grid(self) -> int:
        return max(self.grid, 3 * self.modes + 1)

    @cached_property
    def integer_modes(self) -> np.ndarray:
        return np.arange(-self.modes, self.modes + 1)

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable ``kappa_i`` arrays of shape (K,1,1), (1,K,1), (1,1,K)."""
        k = self.integer_modes.astype(float)
        out = []
        for axis, L in enumerate(self.lengths):
            shape = [1, 1, 1]
            shape[axis] = self.size
            out.append((2 * math.pi / L * k).reshape(shape))
        return tuple(out)

    @cached_property
    def k2(self) -> np.ndarray:
        kx, ky, kz = self.wavenumbers
        return kx**2 + ky**2 + kz**2

    def nodes(self, grid: int | None = None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Collocation coordinates, ``indexing='ij'``."""
        M = self.grid if grid is None else grid
        axes = [np.arange(M) * L / M for L in self.lengths]
        return tuple(np.meshgrid(*axes, indexing="ij"))

    def to_header(self) -> dict:
        return {"modes": self.modes, "grid": self.grid, "lengths": list(self.lengths)}

    @classmethod
    def from_header(cls, d: dict) -> "DomainSpec":
        lengths = d["lengths"]
        if isinstance(lengths, str):
            lengths = json.loads(lengths)
        return cls(modes=int(d["modes"]), grid=int(d["grid"]), lengths=tuple(float(x) for x in lengths))


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_n = n h`` on ``[0, T]`` with ``h = T / steps``."""

    horizon: float
    steps: int

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValueError(f"steps must be a positive integer, got {self.steps}")

    @property
    def h(self) -> float:
        return self.horizon / self.steps

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.steps + 1)

    def __len__(self):
        return self.steps + 1


@dataclass(frozen=True)
class TimeSeries:
    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (len(self.grid),):
            raise ValueError(f"expected {len(self.grid)} values, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("time series contains non-finite values")
        object.__setattr__(self, "values", vals)

    @property
    def t(self) -> np.ndarray:
        return self.grid.nodes

    def __len__(self):
        return len(self.values)


def _frozen(x) -> np.ndarray:
    """Read-only complex array; writable inputs are copied so the caller's array stays usable."""
    c = np.asarray(x, dtype=complex)
    if c.flags.writeable:
        c = c.copy()
        c.setflags(write=False)
    return c


def _check_hermitian(coeffs: np.ndarray, tol: float = 1e-10) -> None:
    flipped = np.conj(coeffs[..., ::-1, ::-1, ::-1])
    scale = max(float(np.max(np.abs(coeffs), initial=0.0)), 1.0)
    if np.max(np.abs(coeffs - flipped), initial=0.0) > tol * scale:
        raise ValueError("coefficients are not conjugate symmetric (field is not real)")


@dataclass(frozen=True, eq=False)
class SpectralField:
    domain: DomainSpec
    coeffs: np.ndarray

    def __post_init__(self):
        c = _frozen(self.coeffs)
        if c.shape != self.domain.shape:
            raise ValueError(f"coefficient shape {c.shape} does not match domain {self.domain.shape}")
        _check_hermitian(c)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, domain: DomainSpec) -> "SpectralField":
        return cls(domain, np.zeros(domain.shape, dtype=complex))

    def mode(self, k) -> complex:
        N = self.domain.modes
        return complex(self.coeffs[k[0] + N, k[1] + N, k[2] + N])

    @property
    def mean(self) -> float:
        return float(self.coeffs[(self.domain.modes,) * 3].real)

    def __add__(self, other):
        return SpectralField(self.domain, self.coeffs + other.coeffs)

    def __sub__(self, other):
        return SpectralField(self.domain, self.coeffs - other.coeffs)

    def __neg__(self):
        return SpectralField(self.domain, -self.coeffs)

    def __mul__(self, alpha):
        return SpectralField(self.domain, alpha * self.coeffs)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class SpectralVectorField:
    domain: DomainSpec
    coeffs: np.ndarray

    def __post_init__(self):
        c = _frozen(self.coeffs)
        if c.shape != (3,) + self.domain.shape:
            raise ValueError(f"vector coefficients must have shape (3,)+{self.domain.shape}, got {c.shape}")
        _check_hermitian(c)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, domain: DomainSpec) -> "SpectralVectorField":
        return cls(domain, np.zeros((3,) + domain.shape, dtype=complex))

    @classmethod
    def from_components(cls, comps) -> "SpectralVectorField":
        comps = list(comps)
        dom = comps[0].domain
        if any(c.domain != dom for c in comps) or len(comps) != 3:
            raise ValueError("need three components on one domain")
        return cls(dom, np.stack([c.coeffs for c in comps]))

    def component(self, i: int) -> SpectralField:
        return SpectralField(self.domain, self.coeffs[i])

    @property
    def components(self) -> tuple[SpectralField, SpectralField, SpectralField]:
        return tuple(self.component(i) for i in range(3))

    def __add__(self, other):
        return SpectralVectorField(self.domain, self.coeffs + other.coeffs)

    def __sub__(self, other):
        return SpectralVectorField(self.domain, self.coeffs - other.coeffs)

    def __neg__(self):
        return SpectralVectorField(self.domain, -self.coeffs)

    def __mul__(self, alpha):
        return SpectralVectorField(self.domain, alpha * self.coeffs)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class SpaceTimeField:
    """Snapshots on every node of a TimeGrid.

    ``coeffs`` has shape ``(Nt + 1, C) + domain.shape`` with C = 3 for vector
    fields and C = 1 for scalar fields.
    """

    grid: TimeGrid
    domain: DomainSpec
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = _frozen(self.coeffs)
        if c.ndim != 5 or c.shape[0] != len(self.grid) or c.shape[2:] != self.domain.shape:
            raise ValueError(
                f"space-time coefficients must have shape ({len(self.grid)}, C)+{self.domain.shape}, got {c.shape}"
            )
        if c.shape[1] not in (1, 3):
            raise ValueError("component count must be 1 or 3")
        object.__setattr__(self, "coeffs", c)

    @property
    def ncomp(self) -> int:
        return self.coeffs.shape[1]

    @property
    def is_vector(self) -> bool:
        return self.ncomp == 3

    def snapshot(self, n: int):
        if self.is_vector:
            return SpectralVectorField(self.domain, self.coeffs[n])
        return SpectralField(self.domain, self.coeffs[n, 0])

    @classmethod
    def zeros(cls, grid: TimeGrid, domain: DomainSpec, ncomp: int = 3) -> "SpaceTimeField":
        return cls(grid, domain, np.zeros((len(grid), ncomp) + domain.shape, dtype=complex))

    @classmethod
    def from_snapshots(cls, grid: TimeGrid, snaps) -> "SpaceTimeField":
        snaps = list(snaps)
        if len(snaps) != len(grid):
            raise ValueError(f"need {len(grid)} snapshots, got {len(snaps)}")
        dom = snaps[0].domain
        if any(s.domain != dom for s in snaps):
            raise ValueError("snapshots must share one domain")
        data = [s.coeffs if s.coeffs.ndim == 4 else s.coeffs[None] for s in snaps]
        return cls(grid, dom, np.stack(data))

    @classmethod
    def separable(cls, grid: TimeGrid, amplitude, shape) -> "SpaceTimeField":
        """``a(t) * phi(x)`` for a callable or array ``a`` and a fixed field ``phi``."""
        a = amplitude(grid.nodes) if callable(amplitude) else np.asarray(amplitude, dtype=float)
        c = shape.coeffs if shape.coeffs.ndim == 4 else shape.coeffs[None]
        return cls(grid, shape.domain, a[:, None, None, None, None] * c[None])

    def with_coeffs(self, coeffs) -> "SpaceTimeField":
        return SpaceTimeField(self.grid, self.domain, coeffs)

    def __add__(self, other):
        return self.with_coeffs(self.coeffs + other.coeffs)

    def __sub__(self, other):
        return self.with_coeffs(self.coeffs - other.coeffs)

    def __neg__(self):
        return self.with_coeffs(-self.coeffs)

    def __mul__(self, alpha):
        return self.with_coeffs(alpha * self.coeffs)

    __rmul__ = __mul__


# --------------------------------------------------------------------------
# array-level transforms

def _samples(coeffs: np.ndarray, N: int, M: int) -> np.ndarray:
    """Real samples on an M^3 grid from centered coefficients (leading axes kept)."""
    lead = coeffs.shape[:-3]
    half = np.zeros(lead + (M, M, M // 2 + 1), dtype=complex)
    pos = np.arange(-N, N + 1) % M
    half[..., pos[:, None, None], pos[None, :, None], np.arange(N + 1)[None, None, :]] = coeffs[..., N:]
    return sfft.irfftn(half, s=(M, M, M), axes=_AXES, norm="forward")


def _coeffs(samples: np.ndarray, N: int) -> np.ndarray:
    """Centered coefficients with ``|k_i| <= N`` from real samples (leading axes kept)."""
    M = samples.shape[-1]
    half = sfft.rfftn(samples, axes=_AXES, norm="forward")
    pos = np.arange(-N, N + 1) % M
    K = 2 * N + 1
    out = np.empty(samples.shape[:-3] + (K, K, K), dtype=complex)
    out[..., N:] = half[..., pos[:, None, None], pos[None, :, None], np.arange(N + 1)[None, None, :]]
    out[..., :N] = np.conj(out[..., ::-1, ::-1, N + 1:][..., ::-1])
    # the k3 = 0 plane came straight from rfftn; make it exactly symmetric
    plane = out[..., N]
    out[..., N] = 0.5 * (plane + np.conj(plane[..., ::-1, ::-1]))
    return out


def _deriv(coeffs: np.ndarray, dom: DomainSpec, axis: int) -> np.ndarray:
    return 1j * dom.wavenumbers[axis] * coeffs


def _grad(coeffs: np.ndarray, dom: DomainSpec) -> np.ndarray:
    """Gradient stack: new axis inserted before the three spatial axes."""
    return np.stack([_deriv(coeffs, dom, a) for a in range(3)], axis=-4)


def _product(a: np.ndarray, b: np.ndarray, dom: DomainSpec) -> np.ndarray:
    Mp = dom.dealias_grid
    N = dom.modes
    return _coeffs(_samples(a, N, Mp) * _samples(b, N, Mp), N)


def _convect(a: np.ndarray, b: np.ndarray, dom: DomainSpec) -> np.ndarray:
    """Dealiased ``sum_j a_j d_j b_i`` for vector stacks of shape (..., 3, K, K, K)."""
    N, Mp = dom.modes, dom.dealias_grid
    a_phys = _samples(a, N, Mp)
    grad_b = _samples(_grad(b, dom), N, Mp)  # (..., 3_i, 3_j, M, M, M)
    out = np.einsum("...jxyz,...ijxyz->...ixyz", a_phys, grad_b, optimize=True)
    return _coeffs(out, N)


def _convect_solenoidal(u: np.ndarray, dom: DomainSpec) -> np.ndarray:
    """``(u . grad) u`` written as ``div(u u^T)``; valid when ``div u = 0``.

    Needs three inverse and six forward transforms instead of twelve and three.
    """
    N, Mp = dom.modes, dom.dealias_grid
    phys = _samples(u, N, Mp)
    iu, ju = np.triu_indices(3)
    prods = _coeffs(phys[..., iu, :, :, :] * phys[..., ju, :, :, :], N)
    out = np.zeros_like(u, dtype=complex)
    for n, (i, j) in enumerate(zip(iu, ju)):
        out[..., i, :, :, :] += _deriv(prods[..., n, :, :, :], dom, j)
        if i != j:
            out[..., j, :, :, :] += _deriv(prods[..., n, :, :, :], dom, i)
    return out


def _sq_norms(coeffs: np.ndarray, dom: DomainSpec) -> np.ndarray:
    """Per-component ``int |u_i|^2 dx`` via Parseval (sums the last three axes)."""
    return dom.volume * np.sum(np.abs(coeffs) ** 2, axis=_AXES)


def _p_integrals(coeffs: np.ndarray, dom: DomainSpec, p: float) -> np.ndarray:
    """Per-component ``int |u_i|^p dx`` (``p = inf`` gives the max)."""
    if p == 2:
        return _sq_norms(coeffs, dom)
    vals = np.abs(_samples(coeffs, dom.modes, dom.grid))
    if np.isinf(p):
        return np.max(vals, axis=_AXES)
    return dom.volume * np.mean(vals**p, axis=_AXES)


# --------------------------------------------------------------------------
# public operations

def to_physical(f, grid: int | None = None) -> np.ndarray:
    """Samples of a scalar or vector field on the collocation grid."""
    M = f.domain.grid if grid is None else grid
    if M < 2 * f.domain.modes + 1:
        raise ValueError(f"grid size {M} cannot represent cutoff {f.domain.modes}")
    return _samples(f.coeffs, f.domain.modes, M)


def to_spectral(samples, domain: DomainSpec):
    """Inverse of :func:`to_physical`; modes beyond the cutoff are dropped.

    Accepts ``(M, M, M)`` samples (scalar) or ``(3, M, M, M)`` (vector).
    """
    samples = np.asarray(samples, dtype=float)
    M = samples.shape[-1]
    if samples.shape[-3:] != (M, M, M) or samples.ndim not in (3, 4):
        raise ValueError(f"expected cubic sample array, got shape {samples.shape}")
    if M < 2 * domain.modes + 1:
        raise ValueError(f"grid size {M} cannot represent cutoff {domain.modes}")
    c = _coeffs(samples, domain.modes)
    if samples.ndim == 3:
        return SpectralField(domain, c)
    if samples.shape[0] != 3:
        raise ValueError("vector samples need a leading axis of length 3")
    return SpectralVectorField(domain, c)


def _axis_index(axis: int) -> int:
    if axis not in (1, 2, 3):
        raise ValueError(f"axis must be 1, 2 or 3, got {axis}")
    return axis - 1


def derivative(f: SpectralField, axis: int) -> SpectralField:
    """Partial derivative along ``x_axis`` (axes numbered 1..3)."""
    return SpectralField(f.domain, _deriv(f.coeffs, f.domain, _axis_index(axis)))


def gradient(f: SpectralField) -> SpectralVectorField:
    return SpectralVectorField(f.domain, _grad(f.coeffs, f.domain))


def divergence(v: SpectralVectorField) -> SpectralField:
    dom = v.domain
    c = sum(_deriv(v.coeffs[i], dom, i) for i in range(3))
    return SpectralField(dom, c)


def laplacian(f: SpectralField) -> SpectralField:
    return SpectralField(f.domain, -f.domain.k2 * f.coeffs)


def pointwise_product(a: SpectralField, b: SpectralField) -> SpectralField:
    """Dealiased product: multiply on the padded grid, keep ``|k_i| <= N``."""
    if a.domain != b.domain:
        raise ValueError("factors live on different domains")
    return SpectralField(a.domain, _product(a.coeffs, b.coeffs, a.domain))


def spatial_norm(v, p: float = 2) -> float:
    """``sum_i (int |v_i|^p dx)^(1/p)``; a scalar field counts as one component."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    c = v.coeffs if v.coeffs.ndim == 4 else v.coeffs[None]
    I = _p_integrals(c, v.domain, p)
    return float(np.sum(I if np.isinf(p) else I ** (1.0 / p)))


def time_integral(values: np.ndarray, grid: TimeGrid, axis: int = 0):
    """Composite trapezoid over the whole grid."""
    return np.trapezoid(values, dx=grid.h, axis=axis)


def mixed_norm_from_integrals(I: np.ndarray, grid: TimeGrid, p: float, r: float) -> float:
    """L_{p,r} norm from per-node spatial integrals ``I[n, i] = int |u_i|^p``."""
    spatial = I ** (1.0 / p)
    return float(np.sum(time_integral(spatial**r, grid) ** (1.0 / r)))


def mixed_norm(u: SpaceTimeField, p: float, r: float) -> float:
    """``sum_i [ int_0^T (int |u_i|^p dx)^(r/p) dt ]^(1/r)`` with trapezoid in time."""
    if p < 1 or r < 1:
        raise ValueError("exponents must be >= 1")
    I = _p_integrals(u.coeffs, u.domain, p)
    return mixed_norm_from_integrals(I, u.grid, p, r)


def mixed_norm_samples(samples: np.ndarray, grid: TimeGrid, domain: DomainSpec, p: float, r: float) -> float:
    """Same as :func:`mixed_norm` for physical samples of shape (Nt+1, C, M, M, M)."""
    I = domain.volume * np.mean(np.abs(samples) ** p, axis=_AXES)
    return mixed_norm_from_integrals(I, grid, p, r)


def time_derivative(coeffs: np.ndarray, h: float) -> np.ndarray:
    """Second-order differences along axis 0 (central inside, one-sided at the ends)."""
    if coeffs.shape[0] < 3:
        raise ValueError("need at least three time nodes for a time derivative")
    return np.gradient(coeffs, h, axis=0, edge_order=2)


def norm_W21(u: SpaceTimeField, rho: float | None = None) -> float:
    """W_2^{2,1}(Q_T) norm: L2 norms of u, u_t, all u_{x_j} and all u_{x_j x_l}.

    ``rho`` is accepted for call-compatibility and does not enter the norm.
    """
    if len(u.grid) < 3:
        raise ValueError("norm_W21 needs at least two time steps")
    dom = u.domain
    c = u.coeffs
    k2 = dom.k2
    dens = np.abs(c) ** 2 * (1 + k2 + k2**2) + np.abs(time_derivative(c, u.grid.h)) ** 2
    per_node = dom.volume * np.sum(dens, axis=(1, 2, 3, 4))
    return float(math.sqrt(time_integral(per_node, u.grid)))


def norm_series(u: SpaceTimeField) -> np.ndarray:
    """Component-summed L2(Omega) norm at every time node."""
    return np.sum(np.sqrt(_sq_norms(u.coeffs, u.domain)), axis=1)
