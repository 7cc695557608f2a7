"""Fractional integrals with the weakly singular kernel ``(t - tau)^(-mu)``.

All integrals use product integration on a uniform grid: the smooth factor
is interpolated piecewise linearly and each cell is integrated exactly
against the kernel.  No ``1/Gamma`` normalisation is applied, so

    J^mu u(t) = int_0^t u(tau) (t - tau)^(-mu) dtau.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np
from scipy import special

from .fields import TimeSeries

SOLVER_MU_MIN = 5.0 / 8.0


@dataclass(frozen=True)
class FracOrder:
    mu: float

    def __post_init__(self):
        if not 0.0 < self.mu < 1.0:
            raise ValueError(f"fractional order must lie in (0, 1), got {self.mu}")

    def require_solver_range(self) -> "FracOrder":
        if not SOLVER_MU_MIN <= self.mu < 1.0:
            raise ValueError(f"order {self.mu} outside [5/8, 1)")
        return self


def _order(mu) -> float:
    return FracOrder(float(mu.mu if isinstance(mu, FracOrder) else mu)).mu


@dataclass(frozen=True)
class GammaConstant:
    mu1: float
    mu2: float
    value: float


@lru_cache(maxsize=64)
def _weights(n: int, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Product-trapezoid weights for ``int_0^{t_m} (t_m - s)^(alpha-1) u(s) ds``.

    Returns ``(c, a0)`` scaled by ``alpha (alpha + 1) / h^alpha``: ``c[m]`` is the
    weight of ``u_{j}`` when ``m = n - j >= 0`` and ``j >= 1``; ``a0[m]`` is the
    weight of ``u_0`` at output node ``m``.
    """
    m = np.arange(n + 1, dtype=float)
    ap1 = alpha + 1.0
    c = np.empty(n + 1)
    c[0] = 1.0
    mm = m[1:]
    c[1:] = (mm + 1) ** ap1 - 2 * mm**ap1 + (mm - 1) ** ap1
    a0 = np.zeros(n + 1)
    a0[1:] = (mm - 1) ** ap1 - (mm - 1 - alpha) * mm**alpha
    c.setflags(write=False)
    a0.setflags(write=False)
    return c, a0


def product_integral(values: np.ndarray, h: float, alpha: float) -> np.ndarray:
    """``int_0^{t_n} (t_n - s)^(alpha - 1) u(s) ds`` at every node, ``alpha > 0``.

    ``values`` may carry trailing axes; integration runs along axis 0.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    u = np.asarray(values, dtype=float)
    n = u.shape[0] - 1
    c, a0 = _weights(n, float(alpha))
    flat = u.reshape(n + 1, -1)
    out = np.empty_like(flat)
    for col in range(flat.shape[1]):
        uc = flat[:, col]
        conv = np.convolve(c, uc)[: n + 1] - c * uc[0]
        out[:, col] = conv + a0 * uc[0]
    out[0] = 0.0
    scale = h**alpha / (alpha * (alpha + 1.0))
    return (scale * out).reshape(u.shape)


def frac_integral(u: TimeSeries, mu) -> TimeSeries:
    """``J^mu u`` by product integration; ``J^mu u(0) = 0``."""
    mu = _order(mu)
    return TimeSeries(u.grid, product_integral(u.values, u.grid.h, 1.0 - mu))


def abel_invert(f: TimeSeries, mu, tol: float = 1e-8) -> TimeSeries:
    """Solve ``J^mu u = f`` for u.

    The density u is sought piecewise linear on the grid.  For such a density
    the inversion formula

        u(t) = sin(pi mu)/pi * d/dt int_0^t f(tau) (t - tau)^(mu - 1) dtau

    can be carried out in closed form: composing the two kernels gives
    ``pi / sin(pi mu) * int_0^t u``, whose derivative is u itself.  So the
    inverse reduces to matching nodal values, which is a lower-triangular
    solve with the product-integration weights.  The one free value u(0) is
    fixed by linear extrapolation from u(t_1), u(t_2).
    """
    mu = _order(mu)
    vals = f.values
    scale_ref = max(float(np.max(np.abs(vals))), 1.0)
    if abs(vals[0]) > tol * scale_ref:
        raise ValueError(f"f(0) = {vals[0]:.3g} is not zero; no solution of the Abel equation in this class")
    n = len(vals) - 1
    alpha = 1.0 - mu
    h = f.grid.h
    c, a0 = _weights(n, alpha)
    rhs = vals * alpha * (alpha + 1.0) / h**alpha
    u = np.zeros(n + 1)
    if n == 1:
        # u0 = u1: a0[1] u + u = rhs
        u[:] = rhs[1] / (a0[1] + 1.0)
        return TimeSeries(f.grid, u)
    # nodes 1, 2 together with u0 - 2 u1 + u2 = 0
    A = np.array(
        [
            [a0[1], c[0], 0.0],
            [a0[2], c[1], c[0]],
            [1.0, -2.0, 1.0],
        ]
    )
    u[:3] = np.linalg.solve(A, [rhs[1], rhs[2], 0.0])
    for m in range(3, n + 1):
        # row m: a0[m] u0 + sum_{j=1}^{m} c[m-j] u_j
        acc = a0[m] * u[0] + np.dot(c[m - 1 : 0 : -1], u[1:m])
        u[m] = (rhs[m] - acc) / c[0]
    return TimeSeries(f.grid, u)


def abel_inner_integral(f: TimeSeries, mu) -> TimeSeries:
    """``int_0^t f(tau) (t - tau)^(mu - 1) dtau`` by product integration."""
    mu = _order(mu)
    return TimeSeries(f.grid, product_integral(f.values, f.grid.h, mu))


def gamma_ratio(mu1: float, mu2: float) -> float:
    """``Gamma(1-mu1) Gamma(1-mu2) / Gamma(2-mu1-mu2)`` through log-Gamma."""
    if not (mu1 < 1 and mu2 < 1):
        raise ValueError("orders must be < 1")
    a, b = 1.0 - mu1, 1.0 - mu2
    sign = special.gammasgn(a) * special.gammasgn(b) * special.gammasgn(a + b)
    return float(sign * math.exp(special.gammaln(a) + special.gammaln(b) - special.gammaln(a + b)))


def composition_constant(mu1: float, mu2: float) -> GammaConstant:
    """Constant of ``J^mu1 J^mu2 g = C * int g (t - tau)^(1 - mu1 - mu2)``."""
    return GammaConstant(float(mu1), float(mu2), gamma_ratio(mu1, mu2))


def composition_rhs(g: TimeSeries, mu1: float, mu2: float) -> TimeSeries:
    """Right-hand side of the composition identity, evaluated by product integration."""
    C = gamma_ratio(mu1, mu2)
    alpha = 2.0 - mu1 - mu2
    return TimeSeries(g.grid, C * product_integral(g.values, g.grid.h, alpha))


def f_mu_transform(fsq: TimeSeries, mu) -> TimeSeries:
    """``2 / Gamma^{mu}_{1-mu} * J^mu(fsq)``."""
    mu = _order(mu)
    if np.any(fsq.values < 0):
        raise ValueError("f^2 series must be nonnegative")
    C = gamma_ratio(1.0 - mu, mu)
    out = 2.0 / C * product_integral(fsq.values, fsq.grid.h, 1.0 - mu)
    return TimeSeries(fsq.grid, np.maximum(out, 0.0))


def sample_Lplus(g: TimeSeries, mu) -> TimeSeries:
    """``int_0^t g^2(tau) (t - tau)^(mu - 1) dtau``, a member of the L^+_{1-mu} class."""
    mu = _order(mu)
    if np.any(g.values < 0):
        raise ValueError("g must be nonnegative")
    out = product_integral(g.values**2, g.grid.h, mu)
    return TimeSeries(g.grid, np.maximum(out, 0.0))


def hl_exponent(p: float, mu) -> float:
    """Target exponent ``q = p / (1 - p (1 - mu))`` of the Hardy-Littlewood bound."""
    mu = _order(mu)
    upper = 1.0 / (1.0 - mu)
    if not 1.0 < p < upper:
        raise ValueError(f"p must lie in (1, {upper:g}) for mu = {mu}, got {p}")
    return p / (1.0 - p * (1.0 - mu))


def beta_function(a: float, b: float) -> float:
    return float(math.exp(special.betaln(a, b)))


def beta_gap(b1: float, k: float, s: float, mu) -> float:
    """``2 b1^2 - k B(1 - s - mu, mu)``; negative once k passes the threshold."""
    mu = _order(mu)
    if not 0.0 < s + mu < 1.0:
        raise ValueError(f"s + mu must lie in (0, 1), got {s + mu}")
    return 2.0 * b1**2 - k * beta_function(1.0 - s - mu, mu)


def beta_gap_threshold(b1: float, s: float, mu) -> float:
    """Smallest k with ``beta_gap(b1, k, s, mu) <= 0``."""
    mu = _order(mu)
    if not 0.0 < s + mu < 1.0:
        raise ValueError(f"s + mu must lie in (0, 1), got {s + mu}")
    return 2.0 * b1**2 / beta_function(1.0 - s - mu, mu)
