import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nsvolterra import checks
from nsvolterra.fields import DomainSpec, SpaceTimeField, SpectralVectorField, TimeGrid, TimeSeries, spatial_norm, to_spectral
from nsvolterra.fraccalc import beta_gap, frac_integral
from nsvolterra.inequalities import (
    SQRT2,
    HarnessConfig,
    InequalityReport,
    _random_forcing_factory,
    boundedness_harnesses,
    build_riccati_chain,
    check_32_34,
    check_324,
    check_apriori,
    check_bilinear,
    check_hopf,
    check_key_inequality,
    gronwall_bound,
    hl_harness,
    k_rule,
    norms_from_bundle,
    product_bound_harness,
    random_forcing,
    sobolev_harness,
    w21_norm,
)
from nsvolterra.projection import leray_project
from nsvolterra.solver import SolveConfig, picard_solve, solve_inhomogeneous

from conftest import chain_bundle, random_bundle
from oracles import random_coeffs


def ts(n, fn, T=1.0):
    g = TimeGrid(T, n)
    return TimeSeries(g, fn(g.nodes))


# --------------------------------------------------------------------------
# reports

def test_report_serialisation(tmp_path):
    g = TimeGrid(1.0, 2)
    rep = InequalityReport("x", TimeSeries(g, np.zeros(3)), TimeSeries(g, np.ones(3)), {"c": np.float64(2.0), "bad": math.inf}, 1.0, True)
    d = json.loads(rep.to_json())
    assert d == {"identifier": "x", "constants": {"c": 2.0, "bad": "inf"}, "margin": 1.0, "pass": True, "notes": ""}
    rep.write_csv(tmp_path / "r.csv")
    assert (tmp_path / "r.csv").read_text().splitlines()[0] == "t,lhs,rhs"
    with pytest.raises(ValueError):
        InequalityReport("y", None, None).write_csv(tmp_path / "s.csv")


# --------------------------------------------------------------------------
# norm series

def test_norms_from_bundle():
    b, f, cfg = random_bundle(0)
    w, fn, p = norms_from_bundle(b, f)
    for n in (0, 10, 64):
        assert w.values[n] == pytest.approx(spatial_norm(b.w.snapshot(n)), rel=1e-13)
        assert fn.values[n] == pytest.approx(spatial_norm(f.snapshot(n)), rel=1e-13)
        assert p.values[n] == pytest.approx(spatial_norm(b.grad_p.snapshot(n)), rel=1e-13, abs=1e-300)
    other = SpaceTimeField.zeros(TimeGrid(1.0, 8), cfg.domain)
    with pytest.raises(ValueError):
        norms_from_bundle(b, other)


def test_norms_of_zero_and_stationary_bundles():
    cfg = SolveConfig(steps=8, domain=DomainSpec(3))
    zero = picard_solve(SpaceTimeField.zeros(cfg.grid, cfg.domain), cfg)
    assert all(not np.any(s.values) for s in norms_from_bundle(zero, SpaceTimeField.zeros(cfg.grid, cfg.domain)))
    x1, _, _ = cfg.domain.nodes()
    z = np.zeros_like(x1)
    A = 0.3
    shape = to_spectral(np.stack([A * np.sin(x1), z, z]), cfg.domain)
    f = SpaceTimeField.separable(cfg.grid, np.ones(9), shape)
    w, _, _ = norms_from_bundle(picard_solve(f, cfg), f)
    assert np.allclose(w.values, A * math.sqrt(4 * math.pi**3), rtol=1e-13)


# --------------------------------------------------------------------------
# first-stage inequalities

def test_bilinear_zero_and_range():
    dom = DomainSpec(3)
    g = SpaceTimeField.zeros(TimeGrid(1.0, 8), dom)
    rep = check_bilinear(g, 5 / 8)
    assert rep.passed and not np.any(rep.lhs.values)
    with pytest.raises(ValueError):
        check_bilinear(g, 0.5)


def test_bilinear_homogeneous():
    dom = DomainSpec(4)
    g = random_forcing(np.random.default_rng(1), dom, TimeGrid(1.0, 16), modes=4)
    b1 = check_bilinear(g, 5 / 8).constants["b"]
    b2 = check_bilinear(g * 7.0, 5 / 8).constants["b"]
    assert b2 == pytest.approx(b1, rel=1e-12)


def test_bilinear_stable_under_refinement():
    rng = np.random.default_rng(2)
    dom = DomainSpec(8)
    makers = [_random_forcing_factory(rng, dom, modes=4) for _ in range(50)]
    fitted = []
    for n in (16, 32):
        grid = TimeGrid(1.0, n)
        reps = [check_bilinear(m(grid), 5 / 8) for m in makers]
        assert all(r.passed and math.isfinite(r.constants["b"]) for r in reps)
        fitted.append(max(r.constants["b"] for r in reps))
    assert abs(fitted[1] / fitted[0] - 1) <= 0.2


def test_growth_bounds_degenerate_and_homogeneity():
    f = ts(32, lambda t: 1 + t)
    zero = ts(32, np.zeros_like)
    r32, r34 = check_32_34(f, f, zero, 5 / 8)
    assert r32.passed and r34.passed
    assert r32.constants["b"] == 0 and r34.constants["b1"] == 0
    w = ts(32, lambda t: 1 + t + t**2)
    p = ts(32, lambda t: 0.5 * t)
    base = check_32_34(w, f, p, 5 / 8)[1].constants["c_34pp"]
    p3 = TimeSeries(p.grid, 3 * p.values)
    assert check_32_34(w, f, p3, 5 / 8)[1].constants["c_34pp"] == pytest.approx(9 * base, rel=1e-12)
    with pytest.raises(ValueError):
        check_32_34(w, f, TimeSeries(p.grid, -p.values), 5 / 8)
    with pytest.raises(ValueError):
        check_32_34(w, ts(16, np.ones_like), p, 5 / 8)


def test_growth_bounds_on_bundle():
    b, f, cfg = random_bundle(0)
    r32, r34 = check_32_34(*norms_from_bundle(b, f), 5 / 8)
    assert r32.passed and r34.passed
    assert math.isfinite(r32.constants["b"]) and math.isfinite(r34.constants["b1"])
    assert r34.constants["c_34pp"] <= 3


def test_k_rule():
    b1 = 4.0
    mu = 5 / 8
    k = k_rule(b1, mu)
    assert beta_gap(b1, k, (1 - mu) / 2, mu) < 0
    assert k_rule(0.0, mu) == 1.0


# --------------------------------------------------------------------------
# Riccati chain

def test_chain_closed_forms():
    mu, k = 5 / 8, 2.0
    zero = ts(64, np.zeros_like, 2.0)
    f = ts(64, np.ones_like, 2.0)
    ch = build_riccati_chain(zero, f, mu, k, z0=1.5)
    assert not np.any(ch.w1.values) and np.all(ch.z.values == 1.5)
    one = ts(256, np.ones_like, 2.0)
    ch = build_riccati_chain(one, one, mu, k)
    t = one.grid.nodes
    assert np.max(np.abs(ch.z.values - np.exp(-k * t ** (2 - mu) / ((1 - mu) * (2 - mu))))) < 1e-12
    assert ch.w1.values[0] == 0
    with pytest.raises(ValueError):
        build_riccati_chain(one, f, mu, 0.0)
    with pytest.raises(ValueError):
        build_riccati_chain(one, f, 0.5, 1.0)


def test_chain_z_integral_against_quadrature():
    """Second order overall, and much faster on the first cell where z has its cusp."""
    from scipy.integrate import quad
    from scipy.special import beta
    mu, k = 3 / 4, 1.5
    a = 2 - mu
    # exponent for w^2 = t (1+t)^2 = t + 2t^2 + t^3, termwise Beta integrals
    expo = lambda t: k / (1 - mu) * sum(c * beta(m + 1, a) * t ** (m + a) for m, c in ((1, 1), (2, 2), (3, 1)))
    first, last = [], []
    for n in (64, 128, 256):
        w = ts(n, lambda t: np.sqrt(t) * (1 + t), 2.0)
        zi = build_riccati_chain(w, w, mu, k).z_integral.values
        for idx, out in ((1, first), (n, last)):
            t = w.grid.nodes[idx]
            exact = quad(lambda s: math.exp(-expo(s)), 0, t, epsabs=1e-15)[0]
            out.append(abs(zi[idx] - exact))
    assert all(e0 / e1 > 3.5 for e0, e1 in zip(last, last[1:]))
    assert all(e0 / e1 > 12 for e0, e1 in zip(first, first[1:]))


def test_chain_f_integral_closed_form():
    mu = 5 / 8
    f = ts(128, np.ones_like, 2.0)
    ch = build_riccati_chain(ts(128, np.zeros_like, 2.0), f, mu, 1.0)
    # F = 2/C * t^(1-mu)/(1-mu), integral 2/C * t^(2-mu)/((1-mu)(2-mu))
    from nsvolterra.fraccalc import gamma_ratio
    C = gamma_ratio(1 - mu, mu)
    t = f.grid.nodes
    assert np.max(np.abs(ch.F_integral.values - 2 / C * t ** (2 - mu) / ((1 - mu) * (2 - mu)))) < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0, 5), min_size=5, max_size=40), st.sampled_from([5 / 8, 3 / 4, 7 / 8, 15 / 16]), st.floats(0.1, 10))
def test_chain_z_nonincreasing(values, mu, k):
    w = TimeSeries(TimeGrid(2.0, len(values) - 1), np.array(values))
    ch = build_riccati_chain(w, w, mu, k)
    assert ch.z.values[0] == 1.0
    assert np.all(np.diff(ch.z.values) <= 0)


def test_key_inequality_zero_w():
    f = ts(64, lambda t: 1 + t, 2.0)
    ch = build_riccati_chain(ts(64, np.zeros_like, 2.0), f, 5 / 8, 3.0)
    rep = check_key_inequality(ch)
    assert rep.passed and rep.margin > 0
    assert rep.notes == ""


def test_key_inequality_needs_extended_grid():
    f = ts(63, np.ones_like, 2.0)
    ch = build_riccati_chain(f, f, 5 / 8, 1.0)
    assert ch.t1 is None
    with pytest.raises(ValueError, match="2T"):
        check_key_inequality(ch)


@pytest.mark.parametrize("seed", [0, 1])
def test_key_inequality_on_bundle(seed):
    b, f, cfg = chain_bundle(seed)
    ch = checks._chain(b, f, cfg)
    rep = check_key_inequality(ch)
    assert rep.passed
    assert 0 < ch.t1 < 1 < ch.t2 < 2
    assert ch.bisection_residual < 1e-10
    assert np.all(np.diff(ch.z.values) <= 0)
    c = rep.constants
    assert c["mean_value_lhs"] <= c["mean_value_rhs"]
    assert c["exponent_bound_lhs"] <= c["exponent_bound_rhs"]


def test_z_derivative_at_origin_vanishes():
    d = [abs(checks._chain(*chain_bundle(0, n)).dz0) for n in (64, 128, 256)]
    assert d[0] > d[1] > d[2]
    assert d[2] < 1e-3


# --------------------------------------------------------------------------
# Gronwall step

def test_gronwall_closed_forms():
    g = TimeGrid(1.0, 2000)
    t = g.nodes
    forcing = TimeSeries(g, np.cos(t))
    y = gronwall_bound(forcing, TimeSeries(g, np.zeros_like(t)))
    assert np.max(np.abs(y.values - np.sin(t))) < 1e-7
    y = gronwall_bound(TimeSeries(g, np.zeros_like(t)), TimeSeries(g, np.full_like(t, 0.7)), y0=2.0)
    assert np.max(np.abs(y.values - 2 * np.exp(0.7 * t))) < 1e-12
    # y' - a y = 1 with a = 1: y = e^t - 1
    y = gronwall_bound(TimeSeries(g, np.ones_like(t)), TimeSeries(g, np.ones_like(t)))
    assert np.max(np.abs(y.values - np.expm1(t))) < 1e-6


def test_gronwall_reproduces_chain_lower_bound_formula():
    b, f, cfg = chain_bundle(0, 64)
    ch = checks._chain(b, f, cfg)
    rep = check_324(ch)
    t = ch.grid.nodes
    closed = ch.z0 * t * np.exp(-ch.k * ch.F_integral.values)
    assert np.max(np.abs(rep.rhs.values - closed)) < 1e-5


@pytest.mark.xfail(strict=True, reason="the Gronwall lower bound sits ~0.2% above z2 near t = 2T for this forcing; see decisions ledger")
def test_gronwall_step_on_bundle():
    b, f, cfg = chain_bundle(0)
    assert check_324(checks._chain(b, f, cfg)).passed


# --------------------------------------------------------------------------
# a priori and Hopf

def test_apriori_zero_forcing():
    cfg = SolveConfig(steps=8, domain=DomainSpec(3))
    f = SpaceTimeField.zeros(cfg.grid, cfg.domain)
    rep = check_apriori(picard_solve(f, cfg), f)
    assert rep.passed and rep.constants["ratio"] == 0.0
    assert rep.constants["threshold"] == SQRT2 == math.sqrt(2)


def test_apriori_small_data():
    ratios = []
    for amp in (0.05, 0.1, 0.2):
        b, f, cfg = random_bundle(1, amplitude=amp, modes=4, steps=32)
        rep = check_apriori(b, f)
        assert rep.passed
        ratios.append(rep.constants["ratio"])
    dev = [abs(r - 1) for r in ratios]
    # deviation from 1 grows with the amplitude
    assert dev[0] < dev[1] < dev[2] < 0.2


def test_hopf_zero_data_and_w21():
    dom = DomainSpec(3)
    x1, _, _ = dom.nodes()
    z = np.zeros_like(x1)
    a = to_spectral(np.stack([np.sin(x1), z, z]), dom)
    # ||a|| + ||d1 a1|| = 2 sqrt(4 pi^3)
    assert w21_norm(a) == pytest.approx(2 * math.sqrt(4 * math.pi**3), rel=1e-13)


def test_hopf_on_inhomogeneous_solve():
    cfg = SolveConfig(steps=32, domain=DomainSpec(4))
    rng = np.random.default_rng(3)
    a = leray_project(SpectralVectorField(cfg.domain, random_coeffs(rng, 4, (3,)))) * 1e-5
    f = random_forcing(rng, cfg.domain, cfg.grid, amplitude=0.1)
    b = solve_inhomogeneous(f, a, cfg)
    rep = check_hopf(b, f, a, cfg.rho)
    assert rep.passed
    # a is scaled so that its W21 norm is comparable to the forcing and the fit is not trivial
    assert 0 < rep.constants["c"] < math.inf
    assert rep.constants["a_W21"] == pytest.approx(w21_norm(a))
    # with f = 0 the initial-data term alone must carry the bound
    zero = SpaceTimeField.zeros(cfg.grid, cfg.domain)
    rep0 = check_hopf(solve_inhomogeneous(zero, a, cfg), zero, a, cfg.rho)
    assert rep0.passed and rep0.constants["c"] == 0.0


# --------------------------------------------------------------------------
# harnesses

def test_harness_config_rejects_empty():
    for name in ("samples", "field_samples", "pairs"):
        with pytest.raises(ValueError):
            HarnessConfig(**{name: 0})


def test_hl_harness():
    rep = hl_harness(HarnessConfig(), np.random.default_rng(0))
    assert rep.constants["q"] == pytest.approx(8)
    assert math.isfinite(rep.constants["fine"]) and rep.passed


def test_hl_harness_integrates_in_time():
    """The fitted constant is a supremum, so it dominates the closed form for g = 1."""
    mu = 5 / 8
    q = 8.0
    # ||t^(1-mu)/(1-mu)||_{L8(0,1)} / ||1||_{L2(0,1)}
    one = (1 / (1 - mu)) * (1 / (q * (1 - mu) + 1)) ** (1 / q)
    c = hl_harness(HarnessConfig(), np.random.default_rng(0)).constants["fine"]
    assert one < c < 10 * one
    from nsvolterra.inequalities import _random_time_functions
    funcs = _random_time_functions(np.random.default_rng(0), 4)
    grid = TimeGrid(1.0, 512)
    g = funcs(grid.nodes)
    assert g.shape == (513, 4)
    for j in range(4):
        Jg = frac_integral(TimeSeries(grid, g[:, j]), mu).values
        num = np.trapezoid(np.abs(Jg) ** q, dx=grid.h) ** (1 / q)
        den = np.trapezoid(g[:, j] ** 2, dx=grid.h) ** 0.5
        assert num / den <= c * (1 + 1e-12)


def test_hl_harness_reproducible_across_seeds():
    c = [hl_harness(HarnessConfig(samples=200), np.random.default_rng(s)).constants["fine"] for s in (0, 1, 2)]
    assert max(c) / min(c) <= 1.25


def test_sobolev_harness():
    rep = sobolev_harness(HarnessConfig(samples=100), np.random.default_rng(0))
    assert rep.constants["q"] == pytest.approx(12)
    assert rep.passed


def test_product_bound_both_orders():
    cfg = HarnessConfig(pairs=10)
    for mu in (5 / 8, 3 / 4):
        rep = product_bound_harness(cfg, np.random.default_rng(0), mu)
        assert rep.passed and math.isfinite(rep.constants["c"])


def test_boundedness_harness_set():
    reps = boundedness_harnesses(HarnessConfig(samples=50, field_samples=3, pairs=5))
    assert [r.identifier for r in reps] == ["prop3a", "prop4a", "2.11a", "2.11b", "2.12.2", "2.12.2"]
    assert all(r.passed for r in reps)


def test_mu_sequence_trend():
    """Chain constants over the finite mu sequence; trends are reported, no limit is claimed.

    The key inequality holds at 5/8 and 3/4; at 7/8 and 15/16 with the same k it
    fails at t = 2T by a refinement-stable margin, so only finiteness is asserted there.
    """
    b, f, cfg = chain_bundle(0, 64)
    w, fn, p = norms_from_bundle(b, f)
    for mu in (5 / 8, 3 / 4, 7 / 8, 15 / 16):
        r32, r34 = check_32_34(w, fn, p, mu)
        assert math.isfinite(r34.constants["b1"])
        ch = build_riccati_chain(w, fn, mu, k_rule(r34.constants["b1"], mu))
        rep = check_key_inequality(ch)
        print(f"mu={mu:.4f} k={ch.k:.3g} margin={rep.margin:.3e} pass={rep.passed}")
        assert math.isfinite(rep.margin)
        if mu <= 3 / 4:
            assert rep.passed


def test_batched_potential_matches_single_sample_route():
    from nsvolterra.greenop import sobolev_potential
    from nsvolterra.inequalities import _potential_batch, _random_bumps
    x = (np.arange(6) + 0.5) / 6
    fs = _random_bumps(np.random.default_rng(0), 3)(x)
    batch = _potential_batch(fs, 1 / 6, 1.25)
    for f, u in zip(fs, batch):
        assert np.allclose(u, sobolev_potential(f, 1 / 6, 1.25, method="direct"), rtol=1e-12, atol=1e-12)
