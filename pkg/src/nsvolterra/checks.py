"""Named verification checks, shared by the command line and the test suite.

Operator checks need no solver output.  Bundle checks take a solved bundle
together with its forcing, configuration and initial data.
"""
from __future__ import annotations

import math

import numpy as np

from .fields import DomainSpec, SpectralVectorField, TimeGrid, TimeSeries, _sq_norms, divergence, to_spectral
from .fraccalc import abel_invert, composition_constant, f_mu_transform, frac_integral, product_integral, sample_Lplus
from .greenop import HeatParams, heat_flow, kernel_estimate_constant, kernel_sup_closed_form
from .inequalities import (
    HarnessConfig,
    InequalityReport,
    build_riccati_chain,
    check_32_34,
    check_324,
    check_apriori,
    check_hopf,
    check_key_inequality,
    hl_harness,
    k_rule,
    mixed_norm_harness,
    norms_from_bundle,
    product_bound_harness,
    random_forcing,
    sobolev_harness,
)
from .projection import leray_project, pressure_gradient_from_w


def _report(identifier, passed, **constants) -> InequalityReport:
    return InequalityReport(identifier, None, None, constants, 0.0, bool(passed))


def abel_roundtrip(steps: int = 2048, tol: float = 1e-4) -> InequalityReport:
    grid = TimeGrid(1.0, steps)
    t = grid.nodes
    worst = 0.0
    for mu in (5 / 8, 3 / 4):
        for u in (np.ones_like(t), t, np.sin(3 * t)):
            back = abel_invert(frac_integral(TimeSeries(grid, u), mu), mu)
            worst = max(worst, float(np.max(np.abs(back.values - u))))
    return _report("abel_roundtrip", worst < tol, max_error=worst, tolerance=tol)


def composition_2_14(steps: int = 1024, tol: float = 1e-3) -> InequalityReport:
    grid = TimeGrid(1.0, steps)
    t = grid.nodes
    one = TimeSeries(grid, np.ones_like(t))
    errs = {}
    for mu1, mu2 in ((0.5, 0.5), (0.6, 0.3)):
        nested = frac_integral(frac_integral(one, mu2), mu1).values
        C = composition_constant(mu1, mu2).value
        a = 2 - mu1 - mu2
        exact = C * t**a / a
        errs[f"{mu1},{mu2}"] = float(np.max(np.abs(nested - exact)) / np.max(np.abs(exact)))
    return _report("composition_2_14", max(errs.values()) < tol, relative_errors=list(errs.values()), tolerance=tol)


def f_mu_identity_3_18(samples: int = 20, steps: int = 1024, mu: float = 5 / 8, seed: int = 0, tol: float = 1e-3):
    rng = np.random.default_rng(seed)
    grid = TimeGrid(1.0, steps)
    t = grid.nodes
    worst, violations = 0.0, 0
    for _ in range(samples):
        a = rng.uniform(0.2, 1.0, 4)
        freq = rng.uniform(0.5, 4.0, 4)
        g = np.abs(np.sum(a[:, None] * np.cos(freq[:, None] * t + rng.uniform(0, 6.3, 4)[:, None]), axis=0)) + 0.1
        F = f_mu_transform(sample_Lplus(TimeSeries(grid, g), mu), mu).values
        exact = 2 * product_integral(g**2, grid.h, 1.0)
        worst = max(worst, float(np.max(np.abs(F - exact)) / np.max(np.abs(exact))))
        violations += int(np.sum(np.diff(F) < 0))
    return _report("f_mu_identity_3_18", worst < tol and violations == 0,
                   max_relative_error=worst, monotonicity_violations=violations, tolerance=tol)


def projection_2_17(samples: int = 100, modes: int = 8, seed: int = 0) -> InequalityReport:
    """``div(w + grad p) = 0`` and ``int ||grad p||^2 <= c int ||w||^2`` on random w."""
    rng = np.random.default_rng(seed)
    dom = DomainSpec(modes)
    grid = TimeGrid(1.0, 2)
    worst_div, worst_c = 0.0, 0.0
    for _ in range(samples):
        w = random_forcing(rng, dom, grid, modes=modes)
        gp = pressure_gradient_from_w(w)
        s = w + gp
        div = max(float(np.max(np.abs(divergence(s.snapshot(n)).coeffs))) for n in range(len(grid)))
        ratio = float(np.sum(_sq_norms(gp.coeffs, dom)) / np.sum(_sq_norms(w.coeffs, dom)))
        worst_div, worst_c = max(worst_div, div), max(worst_c, ratio)
    return _report("projection_2_17", worst_div < 1e-13 and worst_c <= 3.0, max_divergence=worst_div, fitted_c=worst_c)


def heat_semigroup(modes: int = 6, seed: int = 0) -> InequalityReport:
    rng = np.random.default_rng(seed)
    dom = DomainSpec(modes)
    a = leray_project(to_spectral(rng.standard_normal((3,) + (dom.grid,) * 3), dom))
    hp = HeatParams(0.7)
    full = heat_flow(a, hp, TimeGrid(1.0, 10)).coeffs[-1]
    half = heat_flow(a, hp, TimeGrid(0.4, 4)).snapshot(4)
    rest = heat_flow(half, hp, TimeGrid(0.6, 6)).coeffs[-1]
    err = float(np.max(np.abs(full - rest)))
    return _report("heat_semigroup", err < 1e-13, max_error=err)


def kernel_bound(estimate_id: str, mu: float = 5 / 8) -> InequalityReport:
    est = kernel_estimate_constant(mu, estimate_id, HeatParams(1.0))
    exact = kernel_sup_closed_form(mu, estimate_id, HeatParams(1.0))
    ok = math.isfinite(est.constant) and est.constant <= exact * (1 + 1e-9) and est.constant >= 0.99 * exact
    return _report(f"kernel_{estimate_id.replace('.', '_')}", ok, sampled=est.constant, closed_form=exact,
                   argmax_gap=est.argmax.gap, argmax_offset=est.argmax.offset)


OPERATOR_CHECKS = {
    "abel_roundtrip": abel_roundtrip,
    "composition_2_14": composition_2_14,
    "f_mu_identity_3_18": f_mu_identity_3_18,
    "projection_2_17": projection_2_17,
    "heat_semigroup": heat_semigroup,
    "kernel_2_9": lambda: kernel_bound("2.9"),
    "kernel_2_10": lambda: kernel_bound("2.10"),
    "hl_prop3a": lambda: hl_harness(HarnessConfig(), np.random.default_rng(0)),
    "sobolev_prop4a": lambda: sobolev_harness(HarnessConfig(), np.random.default_rng(0)),
    "mixed_2_11": lambda: _both(mixed_norm_harness(HarnessConfig(), np.random.default_rng(0)), "mixed_2_11"),
    "product_2_12": lambda: product_bound_harness(HarnessConfig(), np.random.default_rng(0), 5 / 8),
}

SELFTEST = ("abel_roundtrip", "composition_2_14", "f_mu_identity_3_18", "projection_2_17",
            "heat_semigroup", "kernel_2_9", "kernel_2_10")


def _both(reports, identifier) -> InequalityReport:
    consts = {r.identifier: r.constants for r in reports}
    return InequalityReport(identifier, None, None, consts, min(r.margin for r in reports), all(r.passed for r in reports))


# --------------------------------------------------------------------------
# checks on solved bundles

def _chain(bundle, f, cfg):
    w, fn, p = norms_from_bundle(bundle, f)
    _, r34 = check_32_34(w, fn, p, cfg.mu)
    k = k_rule(r34.constants["b1"], cfg.mu)
    return build_riccati_chain(w, fn, cfg.mu, k)


def residual_budget(bundle, f, cfg, factor: float = 3.0) -> InequalityReport:
    r, b = bundle.residual.values, bundle.budget.values
    worst = float(np.max(r / b))
    return InequalityReport("residual_budget", bundle.residual, bundle.budget,
                            {"max_ratio": worst, "factor": factor}, float(np.min(factor * b - r)), worst <= factor)


def _ineq(bundle, f, cfg, which):
    w, fn, p = norms_from_bundle(bundle, f)
    r32, r34 = check_32_34(w, fn, p, cfg.mu)
    return r32 if which == "3.2" else r34


BUNDLE_CHECKS = {
    "apriori_2_21": lambda b, f, cfg, a: check_apriori(b, f),
    "ineq_3_2": lambda b, f, cfg, a: _ineq(b, f, cfg, "3.2"),
    "ineq_3_4": lambda b, f, cfg, a: _ineq(b, f, cfg, "3.4"),
    "key_3_25": lambda b, f, cfg, a: check_key_inequality(_chain(b, f, cfg)),
    "gronwall_3_24": lambda b, f, cfg, a: check_324(_chain(b, f, cfg)),
    "hopf_4_4": lambda b, f, cfg, a: check_hopf(b, f, a if a is not None else _zero_like(b), cfg.rho),
    "residual_budget": lambda b, f, cfg, a: residual_budget(b, f, cfg),
}


def _zero_like(bundle):
    return SpectralVectorField.zeros(bundle.u.domain)


KNOWN_CHECKS = tuple(OPERATOR_CHECKS) + tuple(BUNDLE_CHECKS)
