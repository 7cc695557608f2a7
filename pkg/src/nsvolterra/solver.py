"""Volterra fixed-point solver for the incompressible Navier-Stokes system.

The unknown is the auxiliary field ``w = u_t - rho Lap u - grad p``.  Given w,
the pressure gradient is ``-(gradient part of w)`` and the velocity is

    u = G(w + grad p),                                  (recovery)

which is divergence free because ``w + grad p`` is the Leray projection of w.
Substituting u back into the momentum equation gives the fixed point

    w = f - sigma * K(w),   K(w) = (u . grad) u,        (fixed point)

with ``sigma = +1`` for the standard form ``u_t - rho Lap u + (u.grad)u + grad P = f``
and ``sigma = -1`` for the variant with the convection sign flipped.  In both
conventions the physical pressure is ``P = -p``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from .fields import (
    DomainSpec,
    SpaceTimeField,
    SpectralVectorField,
    TimeGrid,
    TimeSeries,
    _convect,
    _convect_solenoidal,
    _sq_norms,
    divergence,
    norm_series,
    time_derivative,
    to_spectral,
)
from .fraccalc import FracOrder
from .greenop import HeatParams, duhamel, heat_flow, heat_solve
from .projection import _gradient_part

SIGNS = {"standard": 1.0, "paper": -1.0}
THETA_FLOOR = 1.0 / 16.0


class ConvergenceError(RuntimeError):
    """Picard iteration failed; carries the last update norm and a divergence flag."""

    def __init__(self, message: str, last_update: float, diverging: bool, iterations: int):
        super().__init__(message)
        self.last_update = last_update
        self.diverging = diverging
        self.iterations = iterations


@dataclass(frozen=True)
class SolveConfig:
    rho: float = 1.0
    horizon: float = 1.0
    steps: int = 64
    domain: DomainSpec = field(default_factory=lambda: DomainSpec(8))
    tol: float = 1e-10
    max_iter: int = 100
    theta: float = 1.0
    sign: str = "standard"
    mu: float = 5.0 / 8.0
    block: int | None = None

    def __post_init__(self):
        HeatParams(self.rho)
        TimeGrid(self.horizon, self.steps)
        FracOrder(self.mu).require_solver_range()
        if not self.tol > 0:
            raise ValueError("tolerance must be positive")
        if not 0 < self.theta <= 1:
            raise ValueError("relaxation factor must lie in (0, 1]")
        if self.sign not in SIGNS:
            raise ValueError(f"sign must be one of {sorted(SIGNS)}, got {self.sign!r}")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.steps % self.block_length:
            raise ValueError(f"block length {self.block_length} does not divide {self.steps}")

    @property
    def block_length(self) -> int:
        return self.steps if self.block is None else int(self.block)

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid(self.horizon, self.steps)

    @property
    def heat(self) -> HeatParams:
        return HeatParams(self.rho)

    @property
    def sigma(self) -> float:
        return SIGNS[self.sign]

    def with_(self, **kw) -> "SolveConfig":
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d.update(kw)
        return SolveConfig(**d)


@dataclass(frozen=True, eq=False)
class SolutionBundle:
    w: SpaceTimeField
    grad_p: SpaceTimeField
    p: SpaceTimeField
    u: SpaceTimeField
    iterations: int
    updates: tuple
    w_norm: TimeSeries
    f_norm: TimeSeries
    p_norm: TimeSeries
    residual: TimeSeries
    budget: TimeSeries
    truncation_estimate: TimeSeries | None  # None below six time nodes
    fixed_point_residual: float
    converged: bool = True
    sign: str = "standard"
    background: SpaceTimeField | None = None

    def summary(self) -> dict:
        return {
            "iterations": self.iterations,
            "final_update": self.updates[-1] if self.updates else 0.0,
            "converged": self.converged,
            "sign": self.sign,
            "fixed_point_residual": self.fixed_point_residual,
            "max_residual": float(np.max(self.residual.values)),
            "max_budget": float(np.max(self.budget.values)),
            "w_L2": _l2_series(self.w_norm),
            "f_L2": _l2_series(self.f_norm),
        }


def _l2_series(s: TimeSeries) -> float:
    return float(math.sqrt(np.trapezoid(s.values**2, dx=s.grid.h)))


# --------------------------------------------------------------------------
# operators

def nonlinear_term(u: SpaceTimeField) -> SpaceTimeField:
    """``(u . grad) u`` per time node, dealiased."""
    if not u.is_vector:
        raise ValueError("convection needs a vector field")
    return u.with_coeffs(_convect(u.coeffs, u.coeffs, u.domain))


def _project(c: np.ndarray, dom: DomainSpec) -> np.ndarray:
    grad, _ = _gradient_part(c, dom)
    return c - grad


def recover_velocity(w: SpaceTimeField, cfg: SolveConfig) -> SpaceTimeField:
    """``u = G(w + grad p)``; divergence free, zero at t = 0."""
    return heat_solve(w.with_coeffs(_project(w.coeffs, w.domain)), cfg.heat)


def apply_Kp(w: SpaceTimeField, cfg: SolveConfig) -> SpaceTimeField:
    """``(v . grad) v`` with ``v = G(w + grad p)``."""
    return nonlinear_term(recover_velocity(w, cfg))


def _l2(c: np.ndarray, dom: DomainSpec, h: float) -> float:
    """Full vector L2(Q) norm of a coefficient block (trapezoid in time)."""
    per_node = np.sum(_sq_norms(c, dom), axis=1)
    if len(per_node) == 1:
        return float(math.sqrt(per_node[0] * h))
    return float(math.sqrt(np.trapezoid(per_node, dx=h)))


def _picard(f: SpaceTimeField, cfg: SolveConfig, background: np.ndarray | None):
    """Damped Picard iteration marched over causal time blocks.

    Returns ``(w_coeffs, u_coeffs, iterations, updates)`` where ``u`` includes
    the background flow when one is supplied.
    """
    dom, h = f.domain, f.grid.h
    lam = cfg.rho * dom.k2
    sigma = cfg.sigma
    fc = f.coeffs
    n_nodes = fc.shape[0]
    w = fc.copy()
    v = np.zeros_like(fc)
    updates: list[float] = []
    iterations = 0
    L = cfg.block_length
    f_scale = [_l2(fc[b : b + L + 1], dom, h) for b in range(0, n_nodes - 1, L)]
    for s in range(0, n_nodes - 1, L):
        e = s + L
        theta = cfg.theta
        prev = math.inf
        for _ in range(cfg.max_iter):
            iterations += 1
            vb = duhamel(_project(w[s : e + 1], dom), lam, h, start=v[s])
            ub = vb if background is None else vb + background[s : e + 1]
            target = fc[s : e + 1] - sigma * _convect_solenoidal(ub, dom)
            if not np.all(np.isfinite(target)):
                raise ConvergenceError(
                    f"non-finite iterate in block [{s}, {e}] at iteration {iterations}",
                    math.nan, True, iterations,
                )
            # the block's first node was settled by the previous block
            diff = target - w[s : e + 1]
            if s > 0:
                diff[0] = 0.0
            scale = max(_l2(target, dom, h), f_scale[s // L], 1e-300)
            upd = _l2(diff, dom, h) / scale
            if not math.isfinite(upd):
                raise ConvergenceError("update norm overflowed", math.inf, True, iterations)
            updates.append(upd)
            if upd > prev and theta > THETA_FLOOR:
                theta = max(theta / 2, THETA_FLOOR)
            prev = upd
            w[s : e + 1] += theta * diff
            if upd < cfg.tol:
                break
        else:
            diverging = len(updates) > 1 and updates[-1] > updates[0]
            raise ConvergenceError(
                f"no convergence in block [{s}, {e}] after {cfg.max_iter} iterations "
                f"(last relative update {updates[-1]:.3e})",
                updates[-1], diverging, iterations,
            )
        v[s : e + 1] = duhamel(_project(w[s : e + 1], dom), lam, h, start=v[s])
    u = v if background is None else v + background
    return w, u, iterations, updates


def _assemble(w, u, f: SpaceTimeField, cfg: SolveConfig, iterations, updates, background) -> SolutionBundle:
    dom = f.domain
    grad, q = _gradient_part(w, dom)
    W = f.with_coeffs(w)
    GP = f.with_coeffs(-grad)
    P = SpaceTimeField(f.grid, dom, -q[:, None])
    U = f.with_coeffs(u)
    conv = _convect(u, u, dom)
    fp = w - (f.coeffs - cfg.sigma * conv)
    fp_rel = _l2(fp, dom, f.grid.h) / max(_l2(w, dom, f.grid.h), 1e-300)
    res, bud, rich = _residual_and_budget(U, GP, W, f, cfg, conv)
    return SolutionBundle(
        w=W, grad_p=GP, p=P, u=U,
        iterations=iterations, updates=tuple(updates),
        w_norm=TimeSeries(f.grid, norm_series(W)),
        f_norm=TimeSeries(f.grid, norm_series(f)),
        p_norm=TimeSeries(f.grid, norm_series(GP)),
        residual=res, budget=bud, truncation_estimate=rich,
        fixed_point_residual=float(fp_rel),
        sign=cfg.sign,
        background=None if background is None else f.with_coeffs(background),
    )


def _check_forcing(f: SpaceTimeField, cfg: SolveConfig) -> None:
    if not f.is_vector:
        raise ValueError("forcing must be a vector field")
    if f.grid != cfg.grid or f.domain != cfg.domain:
        raise ValueError("forcing grids do not match the configuration")
    if not np.all(np.isfinite(f.coeffs)):
        raise ValueError("forcing contains non-finite values")


def picard_solve(f: SpaceTimeField, cfg: SolveConfig) -> SolutionBundle:
    """Solve the fixed point for w from rest, starting at ``w = f``."""
    _check_forcing(f, cfg)
    w, u, its, upd = _picard(f, cfg, None)
    return _assemble(w, u, f, cfg, its, upd, None)


def solve_inhomogeneous(f: SpaceTimeField, a: SpectralVectorField, cfg: SolveConfig, div_tol: float = 1e-10) -> SolutionBundle:
    """Solve with initial data ``a``: ``u = heat_flow(a) + G(w + grad p)``.

    The fixed point becomes ``w = f - sigma (u0 + v).grad (u0 + v)``, which
    expands into the background forcing, the linear coupling terms and the
    quadratic term of the zero-data problem.
    """
    _check_forcing(f, cfg)
    if a.domain != cfg.domain:
        raise ValueError("initial data lives on a different domain")
    div = float(np.max(np.abs(divergence(a).coeffs)))
    if div > div_tol * max(1.0, float(np.max(np.abs(a.coeffs)))):
        raise ValueError(f"initial data is not divergence free (max |div| coefficient {div:.3e})")
    if not np.any(a.coeffs):
        return picard_solve(f, cfg)
    u0 = heat_flow(a, cfg.heat, cfg.grid).coeffs
    w, u, its, upd = _picard(f, cfg, u0)
    return _assemble(w, u, f, cfg, its, upd, u0)


# --------------------------------------------------------------------------
# strong-form residual

def _strong_form(u: np.ndarray, grad_p: np.ndarray, f: np.ndarray, dom, rho, sigma, h, conv=None):
    if conv is None:
        conv = _convect(u, u, dom)
    ut = time_derivative(u, h)
    return ut + rho * dom.k2 * u + sigma * conv - grad_p - f


def _coarse_derivative(u: np.ndarray, h: float) -> np.ndarray:
    """Same difference formulas with step 2h, on the even and odd subsequences."""
    out = np.empty_like(u)
    out[0::2] = np.gradient(u[0::2], 2 * h, axis=0, edge_order=2)
    out[1::2] = np.gradient(u[1::2], 2 * h, axis=0, edge_order=2)
    return out


def _residual_and_budget(U, GP, W, f, cfg, conv):
    """Strong-form residual per node, the error budget, and a Richardson estimate.

    The residual splits exactly into two parts:

    * the difference-quotient error ``D_h u - u'``.  The integrator trajectory
      satisfies ``u' = rho Lap u + (w + grad p)`` at every node, so this part is
      computable without approximation;
    * the fixed-point defect ``w - f + sigma (u.grad)u``.

    The budget is the sum of their norms.  The strong-form residual is built
    from the stored pressure gradient and the forcing, so a residual above the
    budget flags an inconsistency between the two formulations.  The
    Richardson comparison of the h and 2h differences is returned as an
    independent estimate of the first part.
    """
    dom, h = U.domain, U.grid.h
    u = U.coeffs
    r = _strong_form(u, GP.coeffs, f.coeffs, dom, cfg.rho, cfg.sigma, h, conv)
    res = norm_series(U.with_coeffs(r))
    du = time_derivative(u, h)
    exact_du = -cfg.rho * dom.k2 * u + _project(W.coeffs, dom)
    trunc = norm_series(U.with_coeffs(du - exact_du))
    defect = norm_series(W.with_coeffs(W.coeffs - f.coeffs + cfg.sigma * conv))
    floor = 1e-12 * max(1.0, float(np.max(norm_series(U))), float(np.max(norm_series(f))))
    if u.shape[0] >= 6:  # both subsequences need three nodes
        # D_2h - D_h is about 3x the error of D_h for smooth trajectories
        rich = TimeSeries(U.grid, norm_series(U.with_coeffs((_coarse_derivative(u, h) - du) / 3.0)))
    else:
        rich = None
    return TimeSeries(U.grid, res), TimeSeries(U.grid, trunc + defect + floor), rich


def nse_residual(bundle: SolutionBundle, f: SpaceTimeField, cfg: SolveConfig) -> TimeSeries:
    """``|| u_t - rho Lap u + sigma (u.grad)u - grad p - f ||`` per node.

    ``grad p`` is the stored pressure gradient, so ``-grad p`` is the gradient
    of the physical pressure.
    """
    if len(bundle.u.grid) < 3:
        raise ValueError("need at least two time steps")
    r = _strong_form(bundle.u.coeffs, bundle.grad_p.coeffs, f.coeffs, f.domain, cfg.rho, cfg.sigma, f.grid.h)
    return TimeSeries(f.grid, norm_series(f.with_coeffs(r)))


# --------------------------------------------------------------------------
# manufactured solutions

FAMILIES = ("abc_decay", "abc_ramp")


@dataclass(frozen=True)
class ManufacturedSpec:
    """``u* = eps * phi(t) * (sin x2, sin x3, sin x1)`` with zero pressure.

    ``abc_decay``: ``phi = exp(-rate t)``; ``abc_ramp``: ``phi = t exp(-rate t)``,
    which starts from rest.
    """

    family: str = "abc_decay"
    amplitude: float = 0.1
    rate: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown manufactured family {self.family!r}; known: {', '.join(FAMILIES)}")

    def profile(self, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        e = np.exp(-self.rate * t)
        if self.family == "abc_decay":
            return e, -self.rate * e
        return t * e, (1 - self.rate * t) * e


def _abc_fields(dom: DomainSpec) -> tuple[SpectralVectorField, SpectralVectorField]:
    """The shape ``A`` and its self-convection ``(A . grad) A``, both divergence free."""
    if any(abs(L - 2 * math.pi) > 1e-12 for L in dom.lengths):
        raise ValueError("manufactured families are defined on the 2*pi box")
    x1, x2, x3 = dom.nodes()
    A = to_spectral(np.stack([np.sin(x2), np.sin(x3), np.sin(x1)]), dom)
    NA = to_spectral(np.stack([np.sin(x3) * np.cos(x2), np.sin(x1) * np.cos(x3), np.sin(x2) * np.cos(x1)]), dom)
    return A, NA


def manufactured_forcing(spec: ManufacturedSpec, cfg: SolveConfig, convection: bool = True):
    """Return ``(f, u*, p*)`` consistent with the configured sign convention.

    ``convection=False`` drops the quadratic part of f, giving the Stokes data
    for the same u*.
    """
    tg = cfg.grid
    A, NA = _abc_fields(cfg.domain)
    phi, dphi = spec.profile(tg.nodes)
    eps = spec.amplitude
    u_star = SpaceTimeField.separable(tg, eps * phi, A)
    f = SpaceTimeField.separable(tg, eps * (dphi + cfg.rho * phi), A)
    if convection:
        f = f + SpaceTimeField.separable(tg, cfg.sigma * eps**2 * phi**2, NA)
    p_star = SpaceTimeField.zeros(tg, cfg.domain, ncomp=1)
    return f, u_star, p_star


def initial_data(spec: ManufacturedSpec, cfg: SolveConfig) -> SpectralVectorField:
    A, _ = _abc_fields(cfg.domain)
    phi, _ = spec.profile(np.zeros(1))
    return A * float(spec.amplitude * phi[0])


def velocity_error(u: SpaceTimeField, u_star: SpaceTimeField) -> float:
    """Full vector L2(Q_T) distance."""
    return _l2(u.coeffs - u_star.coeffs, u.domain, u.grid.h)
