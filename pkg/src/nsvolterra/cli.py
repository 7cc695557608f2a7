"""Command-line scenario runner.

    nsvolterra solve    --config run.ini --out results/
    nsvolterra verify   --config run.ini --out results/ [--checks a,b]
    nsvolterra converge --config run.ini --out results/
    nsvolterra selftest

Exit codes: 0 success, 1 a verification check failed, 2 configuration error,
3 non-convergence, 4 I/O error.  File layouts are described in SCHEMA.md.
"""
from __future__ import annotations

import argparse
import configparser
from dataclasses import dataclass, field
import logging
import math
import os
import re
import sys

import numpy as np

from . import checks
from .export import load_bundle, save_bundle, write_csv, write_json, write_snapshot, read_snapshot
from .fields import DomainSpec, SpaceTimeField, SpectralVectorField, to_spectral
from .inequalities import check_apriori, random_forcing
from .projection import leray_project
from .solver import (
    FAMILIES,
    ConvergenceError,
    ManufacturedSpec,
    SolveConfig,
    THETA_FLOOR,
    initial_data,
    manufactured_forcing,
    picard_solve,
    solve_inhomogeneous,
    velocity_error,
)

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_DIVERGED, EXIT_IO = 0, 1, 2, 3, 4

log = logging.getLogger("nsvolterra")


class ConfigError(ValueError):
    pass


FORCING_KINDS = ("zero", "manufactured", "single_mode", "random", "file")
INITIAL_KINDS = ("zero", "manufactured", "random", "file")


@dataclass
class Scenario:
    name: str
    cfg: SolveConfig
    forcing: dict
    initial: dict
    checks: list = field(default_factory=list)
    out: str = "out"
    seed: int = 0
    levels: list = field(default_factory=lambda: [32, 64, 128])
    snapshots: str = "final"


# --------------------------------------------------------------------------
# configuration

def _line_index(path: str) -> dict:
    """Map (section, key) to its line number, for error messages."""
    where, section = {}, None
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            s = line.strip()
            m = re.match(r"\[([^\]]+)\]", s)
            if m:
                section = m.group(1).strip()
                where[(section, None)] = n
            elif section and s and s[0] not in "#;":
                key = re.split(r"[=:]", s, maxsplit=1)[0].strip().lower()
                where[(section, key)] = n
    return where


class _Reader:
    def __init__(self, parser: configparser.ConfigParser, path: str):
        self.p = parser
        self.path = path
        self.lines = _line_index(path)

    def fail(self, section, key, msg):
        line = self.lines.get((section, key)) or self.lines.get((section, None))
        anchor = f"{self.path}:{line}" if line else self.path
        raise ConfigError(f"{anchor}: [{section}] {key}: {msg}")

    def get(self, section, key, conv=str, default=None):
        if not self.p.has_option(section, key):
            return default
        raw = self.p.get(section, key)
        try:
            return conv(raw)
        except ValueError as exc:
            self.fail(section, key, f"cannot parse {raw!r} ({exc})")

    def items(self, section):
        return dict(self.p.items(section)) if self.p.has_section(section) else {}


def _int_list(raw: str) -> list[int]:
    return [int(x) for x in re.split(r"[,\s]+", raw.strip()) if x]


def _name_list(raw: str) -> list[str]:
    return [x for x in re.split(r"[,\s]+", raw.strip()) if x]


def _optional_int(raw: str):
    return None if raw.strip().lower() in ("", "none") else int(raw)


KNOWN_KEYS = {
    "run": {"name", "seed", "out", "snapshots"},
    "solver": {"rho", "horizon", "steps", "modes", "grid", "tol", "max_iter", "theta", "sign", "mu", "block"},
    "forcing": {"kind", "family", "amplitude", "rate", "mode", "component", "path", "modes"},
    "initial": {"kind", "amplitude", "path", "modes"},
    "verify": {"checks"},
    "converge": {"levels"},
}


def load_scenario(path: str) -> Scenario:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except FileNotFoundError:
        raise ConfigError(f"{path}: configuration file not found") from None
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    r = _Reader(parser, path)
    for section in parser.sections():
        if section not in KNOWN_KEYS:
            r.fail(section, None, "unknown section")
        for key in parser.options(section):
            if key not in KNOWN_KEYS[section]:
                r.fail(section, key, "unknown key")

    modes = r.get("solver", "modes", int, 8)
    grid = r.get("solver", "grid", _optional_int, None)
    try:
        dom = DomainSpec(modes, grid)
    except ValueError as exc:
        r.fail("solver", "modes", str(exc))
    kw = dict(
        rho=r.get("solver", "rho", float, 1.0),
        horizon=r.get("solver", "horizon", float, 1.0),
        steps=r.get("solver", "steps", int, 64),
        domain=dom,
        tol=r.get("solver", "tol", float, 1e-10),
        max_iter=r.get("solver", "max_iter", int, 100),
        theta=r.get("solver", "theta", float, 1.0),
        sign=r.get("solver", "sign", str, "standard"),
        mu=r.get("solver", "mu", float, 5 / 8),
        block=r.get("solver", "block", _optional_int, None),
    )
    try:
        cfg = SolveConfig(**kw)
    except ValueError as exc:
        r.fail("solver", None, str(exc))

    forcing = r.items("forcing") or {"kind": "zero"}
    forcing.setdefault("kind", "zero")
    if forcing["kind"] not in FORCING_KINDS:
        r.fail("forcing", "kind", f"unknown kind {forcing['kind']!r}; known: {', '.join(FORCING_KINDS)}")
    if forcing["kind"] == "manufactured" and forcing.get("family", "abc_ramp") not in FAMILIES:
        r.fail("forcing", "family", f"unknown family {forcing['family']!r}")
    initial = r.items("initial") or {"kind": "zero"}
    initial.setdefault("kind", "zero")
    if initial["kind"] not in INITIAL_KINDS:
        r.fail("initial", "kind", f"unknown kind {initial['kind']!r}; known: {', '.join(INITIAL_KINDS)}")
    for sec, spec in (("forcing", forcing), ("initial", initial)):
        for key in ("amplitude", "rate"):
            if key in spec:
                try:
                    float(spec[key])
                except ValueError:
                    r.fail(sec, key, f"cannot parse {spec[key]!r} as a number")

    names = r.get("verify", "checks", _name_list, [])
    for n in names:
        if n not in checks.KNOWN_CHECKS:
            r.fail("verify", "checks", f"unknown check {n!r}")
    levels = r.get("converge", "levels", _int_list, [32, 64, 128])
    return Scenario(
        name=r.get("run", "name", str, os.path.splitext(os.path.basename(path))[0]),
        cfg=cfg,
        forcing=forcing,
        initial=initial,
        checks=names,
        out=r.get("run", "out", str, "out"),
        seed=r.get("run", "seed", int, 0),
        levels=levels,
        snapshots=r.get("run", "snapshots", str, "final"),
    )


# --------------------------------------------------------------------------
# scenario inputs

def _manufactured(spec: dict) -> ManufacturedSpec:
    return ManufacturedSpec(spec.get("family", "abc_ramp"), float(spec.get("amplitude", 0.1)), float(spec.get("rate", 1.0)))


def build_forcing(sc: Scenario, cfg: SolveConfig | None = None):
    """Return ``(f, u_star)``; ``u_star`` is None unless the forcing is manufactured."""
    cfg = cfg or sc.cfg
    spec = sc.forcing
    kind = spec["kind"]
    grid, dom = cfg.grid, cfg.domain
    amp = float(spec.get("amplitude", 0.1))
    if kind == "zero":
        return SpaceTimeField.zeros(grid, dom), None
    if kind == "manufactured":
        f, u_star, _ = manufactured_forcing(_manufactured(spec), cfg)
        return f, u_star
    if kind == "random":
        rng = np.random.default_rng(sc.seed)
        return random_forcing(rng, dom, grid, amplitude=amp, modes=int(spec.get("modes", 2))), None
    if kind == "single_mode":
        k = _int_list(spec.get("mode", "1 0 0"))
        comp = int(spec.get("component", 2)) - 1
        if len(k) != 3 or any(abs(x) > dom.modes for x in k) or not 0 <= comp < 3:
            raise ConfigError(f"[forcing] mode {k} / component {comp + 1} not representable")
        c = np.zeros((3,) + dom.shape, dtype=complex)
        N = dom.modes
        c[comp, k[0] + N, k[1] + N, k[2] + N] += amp / 2
        c[comp, N - k[0], N - k[1], N - k[2]] += amp / 2
        return SpaceTimeField.separable(grid, np.ones(len(grid)), SpectralVectorField(dom, c)), None
    shape = read_snapshot(spec["path"])
    if shape.domain != dom or not isinstance(shape, SpectralVectorField):
        raise ConfigError(f"[forcing] {spec['path']}: snapshot domain does not match the solver domain")
    return SpaceTimeField.separable(grid, np.ones(len(grid)), shape), None


def build_initial(sc: Scenario, cfg: SolveConfig | None = None) -> SpectralVectorField | None:
    cfg = cfg or sc.cfg
    spec = sc.initial
    kind = spec["kind"]
    dom = cfg.domain
    if kind == "zero":
        return None
    if kind == "manufactured":
        if sc.forcing["kind"] != "manufactured":
            raise ConfigError("[initial] kind = manufactured needs manufactured forcing")
        return initial_data(_manufactured(sc.forcing), cfg)
    if kind == "random":
        rng = np.random.default_rng(sc.seed + 1)
        amp = float(spec.get("amplitude", 0.1))
        a = leray_project(to_spectral(rng.standard_normal((3,) + (dom.grid,) * 3), dom))
        keep = int(spec.get("modes", 2))
        c = np.array(a.coeffs)
        N = dom.modes
        mask = np.zeros(dom.shape, dtype=bool)
        mask[N - keep : N + keep + 1, N - keep : N + keep + 1, N - keep : N + keep + 1] = True
        c[:, ~mask] = 0
        a = SpectralVectorField(dom, c)
        norm = math.sqrt(float(np.sum(np.abs(c) ** 2)) * dom.volume)
        return a * (amp / norm) if norm > 0 else a
    a = read_snapshot(spec["path"])
    if a.domain != dom or not isinstance(a, SpectralVectorField):
        raise ConfigError(f"[initial] {spec['path']}: snapshot domain does not match the solver domain")
    return a


def _solve(f, a, cfg):
    if a is None:
        return picard_solve(f, cfg)
    return solve_inhomogeneous(f, a, cfg)


def _config_summary(cfg: SolveConfig) -> dict:
    return {
        "rho": cfg.rho, "horizon": cfg.horizon, "steps": cfg.steps, "modes": cfg.domain.modes,
        "grid": cfg.domain.grid, "tol": cfg.tol, "max_iter": cfg.max_iter, "theta": cfg.theta,
        "sign": cfg.sign, "mu": cfg.mu, "block": cfg.block_length,
    }


def _snapshot_indices(spec: str, n_nodes: int) -> list[int]:
    spec = spec.strip().lower()
    if spec == "none":
        return []
    if spec == "final":
        return [n_nodes - 1]
    if spec == "all":
        return list(range(n_nodes))
    idx = _int_list(spec)
    if any(not 0 <= i < n_nodes for i in idx):
        raise ConfigError(f"[run] snapshots: indices must lie in [0, {n_nodes - 1}]")
    return idx


# --------------------------------------------------------------------------
# subcommands

def run_solve(sc: Scenario) -> int:
    cfg = sc.cfg
    f, u_star = build_forcing(sc)
    a = build_initial(sc)
    os.makedirs(sc.out, exist_ok=True)
    summary = {"name": sc.name, "seed": sc.seed, "config": _config_summary(cfg), "theta_floor": THETA_FLOOR}
    try:
        bundle = _solve(f, a, cfg)
    except ConvergenceError as exc:
        summary.update({"converged": False, "iterations": exc.iterations, "final_update": exc.last_update,
                        "diverging": exc.diverging, "message": str(exc)})
        write_json(os.path.join(sc.out, "summary.json"), _clean(summary))
        log.error("%s", exc)
        return EXIT_DIVERGED
    summary.update(bundle.summary())
    summary["apriori_ratio"] = check_apriori(bundle, f).constants["ratio"]
    if u_star is not None:
        summary["velocity_error_L2"] = velocity_error(bundle.u, u_star)
    t = cfg.grid.nodes
    rows = zip(t, bundle.w_norm.values, bundle.f_norm.values, bundle.p_norm.values, bundle.residual.values)
    write_csv(os.path.join(sc.out, "norms.csv"), ["t", "w", "f", "p", "residual"],
              [[repr(float(x)) for x in row] for row in rows])
    snapdir = os.path.join(sc.out, "snapshots")
    idx = _snapshot_indices(sc.snapshots, len(cfg.grid))
    if idx:
        os.makedirs(snapdir, exist_ok=True)
    for n in idx:
        for label, fld in (("u", bundle.u), ("w", bundle.w), ("p", bundle.p)):
            write_snapshot(os.path.join(snapdir, f"{label}_{n:05d}.txt"), fld.snapshot(n), time=float(t[n]))
    save_bundle(os.path.join(sc.out, "bundle.npz"), bundle, f, cfg, a)
    write_json(os.path.join(sc.out, "summary.json"), _clean(summary))
    log.info("converged in %d iterations, max residual %.3e", bundle.iterations, summary["max_residual"])
    return EXIT_OK


def run_verify(sc: Scenario, names: list[str]) -> int:
    unknown = [n for n in names if n not in checks.KNOWN_CHECKS]
    if unknown:
        raise ConfigError(f"unknown check(s): {', '.join(unknown)}")
    reports = []
    loaded = None
    for n in names:
        if n in checks.OPERATOR_CHECKS:
            rep = checks.OPERATOR_CHECKS[n]()
        else:
            if loaded is None:
                path = os.path.join(sc.out, "bundle.npz")
                if not os.path.exists(path):
                    raise FileNotFoundError(f"{path}: no solver artifacts; run 'solve' first")
                loaded = load_bundle(path)
            bundle, f, cfg, a = loaded
            # mu only steers the diagnostics, so the scenario's value wins
            cfg = cfg.with_(mu=sc.cfg.mu)
            rep = checks.BUNDLE_CHECKS[n](bundle, f, cfg, a)
        rep.identifier = n
        reports.append(rep)
        log.info("%-20s %s", n, "pass" if rep.passed else "FAIL")
    os.makedirs(sc.out, exist_ok=True)
    write_json(os.path.join(sc.out, "reports.json"), _clean({"seed": sc.seed, "reports": [r.to_dict() for r in reports]}))
    return EXIT_OK if all(r.passed for r in reports) else EXIT_CHECK_FAILED


def run_convergence(sc: Scenario, levels: list[int]) -> int:
    if len(levels) < 2:
        raise ConfigError("[converge] levels: at least two refinement levels are required")
    if sc.forcing["kind"] != "manufactured":
        raise ConfigError("[forcing] kind: convergence study needs manufactured forcing")
    spec = _manufactured(sc.forcing)
    rows, errors = [], []
    for n in levels:
        cfg = sc.cfg.with_(steps=n, block=None)
        f, u_star, _ = manufactured_forcing(spec, cfg)
        a = initial_data(spec, cfg)
        try:
            bundle = _solve(f, a if np.any(a.coeffs) else None, cfg)
        except ConvergenceError as exc:
            log.error("level Nt=%d: %s", n, exc)
            return EXIT_DIVERGED
        err = velocity_error(bundle.u, u_star)
        order = math.log2(errors[-1] / err) if errors and err > 0 else None
        errors.append(err)
        rows.append([n, cfg.domain.modes, repr(err), "" if order is None else repr(order)])
        log.info("Nt=%-5d error=%.4e order=%s", n, err, "-" if order is None else f"{order:.3f}")
    os.makedirs(sc.out, exist_ok=True)
    write_csv(os.path.join(sc.out, "convergence.csv"), ["Nt", "N", "error_L2", "order"], rows)
    orders = [float(r[3]) for r in rows[1:]]
    write_json(os.path.join(sc.out, "convergence.json"), _clean({
        "name": sc.name, "seed": sc.seed, "family": spec.family, "levels": levels, "errors": errors,
        "orders": orders, "monotone": all(b < a for a, b in zip(errors, errors[1:])),
        "min_order": min(orders),
    }))
    return EXIT_OK


def run_selftest(sc: Scenario) -> int:
    return run_verify(sc, list(checks.SELFTEST))


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


# --------------------------------------------------------------------------
# entry point

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario file (INI syntax, see SCHEMA.md)")
    common.add_argument("--out", help="output directory (overrides [run] out)")
    common.add_argument("--seed", type=int, help="random seed (overrides [run] seed)")
    common.add_argument("--mu", type=float, help="fractional order used by the diagnostics")
    common.add_argument("--sign", choices=("standard", "paper"), help="convection sign convention")
    common.add_argument("--quiet", action="store_true", help="suppress progress messages")
    p = argparse.ArgumentParser(prog="nsvolterra", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="solve a scenario and write artifacts")
    v = sub.add_parser("verify", parents=[common], help="run verification checks")
    v.add_argument("--checks", help="comma-separated check identifiers (overrides [verify] checks)")
    c = sub.add_parser("converge", parents=[common], help="temporal convergence study")
    c.add_argument("--levels", help="comma-separated Nt values (overrides [converge] levels)")
    sub.add_parser("selftest", parents=[common], help="quick operator self-tests")
    return p


def _scenario(args) -> Scenario:
    if args.config:
        sc = load_scenario(args.config)
    else:
        if args.command in ("solve", "converge"):
            raise ConfigError(f"'{args.command}' needs --config")
        sc = Scenario("default", SolveConfig(), {"kind": "zero"}, {"kind": "zero"})
    if args.out:
        sc.out = args.out
    if args.seed is not None:
        sc.seed = args.seed
    over = {}
    if args.mu is not None:
        over["mu"] = args.mu
    if args.sign is not None:
        over["sign"] = args.sign
    if over:
        try:
            sc.cfg = sc.cfg.with_(**over)
        except ValueError as exc:
            raise ConfigError(f"command line: {exc}") from None
    return sc


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s", stream=sys.stderr)
    try:
        sc = _scenario(args)
        if args.command == "solve":
            return run_solve(sc)
        if args.command == "verify":
            names = _name_list(args.checks) if args.checks is not None else sc.checks
            return run_verify(sc, names)
        if args.command == "converge":
            levels = sc.levels
            if args.levels is not None:
                try:
                    levels = _int_list(args.levels)
                except ValueError:
                    raise ConfigError(f"--levels: cannot parse {args.levels!r}") from None
            return run_convergence(sc, levels)
        return run_selftest(sc)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
