"""On-disk formats: field snapshots, norm CSVs, JSON summaries and bundle archives.

Every writer goes through a temporary file in the target directory followed by
``os.replace``, so readers never observe a partial file.
"""
from __future__ import annotations

import contextlib
import csv
import io
import json
import os
import tempfile

import numpy as np

from .fields import DomainSpec, SpaceTimeField, SpectralField, SpectralVectorField
from .solver import SolutionBundle, SolveConfig, _assemble

SNAPSHOT_COLUMNS = "kx ky kz component re im"


@contextlib.contextmanager
def atomic_write(path, mode: str = "w"):
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, mode, newline="" if "b" not in mode else None) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def write_json(path, obj) -> None:
    with atomic_write(path) as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")


def write_csv(path, header, rows) -> None:
    with atomic_write(path) as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        out.writerows(rows)


# --------------------------------------------------------------------------
# snapshots

def format_snapshot(field, time: float | None = None) -> str:
    """Plain-text coefficient listing; only the ``k3 >= 0`` half is written.

    The remaining coefficients follow from conjugate symmetry.
    """
    dom = field.domain
    c = field.coeffs if field.coeffs.ndim == 4 else field.coeffs[None]
    buf = io.StringIO()
    for key, value in dom.to_header().items():
        buf.write(f"# {key} = {value}\n")
    buf.write(f"# components = {c.shape[0]}\n")
    if time is not None:
        buf.write(f"# time = {float(time)!r}\n")
    buf.write(SNAPSHOT_COLUMNS + "\n")
    N = dom.modes
    ks = range(-N, N + 1)
    for comp in range(c.shape[0]):
        for kx in ks:
            for ky in ks:
                for kz in range(0, N + 1):
                    v = c[comp, kx + N, ky + N, kz + N]
                    buf.write(f"{kx} {ky} {kz} {comp + 1} {float(v.real)!r} {float(v.imag)!r}\n")
    return buf.getvalue()


def write_snapshot(path, field, time: float | None = None) -> None:
    text = format_snapshot(field, time)
    with atomic_write(path) as fh:
        fh.write(text)


def read_snapshot(path):
    """Inverse of :func:`write_snapshot`; returns a scalar or vector field."""
    header: dict[str, str] = {}
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, sep, value = line[1:].partition("=")
                if not sep:
                    raise ValueError(f"{path}:{lineno}: malformed header line")
                header[key.strip()] = value.strip()
            elif line == SNAPSHOT_COLUMNS:
                continue
            else:
                parts = line.split()
                if len(parts) != 6:
                    raise ValueError(f"{path}:{lineno}: expected 6 columns, got {len(parts)}")
                rows.append(parts)
    dom = DomainSpec.from_header(header)
    ncomp = int(header.get("components", "3"))
    N = dom.modes
    c = np.zeros((ncomp,) + dom.shape, dtype=complex)
    for kx, ky, kz, comp, re, im in rows:
        kx, ky, kz, comp = int(kx), int(ky), int(kz), int(comp) - 1
        v = complex(float(re), float(im))
        c[comp, kx + N, ky + N, kz + N] = v
        c[comp, N - kx, N - ky, N - kz] = np.conj(v)
    if ncomp == 1:
        return SpectralField(dom, c[0])
    return SpectralVectorField(dom, c)


# --------------------------------------------------------------------------
# bundles

def _cfg_dict(cfg: SolveConfig) -> dict:
    return {
        "rho": cfg.rho, "horizon": cfg.horizon, "steps": cfg.steps,
        "tol": cfg.tol, "max_iter": cfg.max_iter, "theta": cfg.theta,
        "sign": cfg.sign, "mu": cfg.mu, "block": cfg.block,
        "domain": cfg.domain.to_header(),
    }


def save_bundle(path, bundle: SolutionBundle, f: SpaceTimeField, cfg: SolveConfig, a=None) -> None:
    """Archive everything needed to rebuild the bundle without re-solving."""
    arrays = {
        "w": bundle.w.coeffs,
        "u": bundle.u.coeffs,
        "f": f.coeffs,
        "updates": np.asarray(bundle.updates, dtype=float),
        "iterations": np.asarray(bundle.iterations),
        "config": np.asarray(json.dumps(_cfg_dict(cfg), sort_keys=True)),
    }
    if bundle.background is not None:
        arrays["background"] = bundle.background.coeffs
    if a is not None:
        arrays["initial"] = a.coeffs
    with atomic_write(path, "wb") as fh:
        np.savez_compressed(fh, **arrays)


def load_bundle(path):
    """Return ``(bundle, f, cfg, a)`` from an archive written by :func:`save_bundle`."""
    with np.load(path, allow_pickle=False) as z:
        meta = json.loads(str(z["config"]))
        dom = DomainSpec.from_header(meta.pop("domain"))
        cfg = SolveConfig(domain=dom, **meta)
        grid = cfg.grid
        f = SpaceTimeField(grid, dom, z["f"])
        background = z["background"] if "background" in z.files else None
        a = SpectralVectorField(dom, z["initial"]) if "initial" in z.files else None
        bundle = _assemble(
            np.array(z["w"]), np.array(z["u"]), f, cfg,
            int(z["iterations"]), list(z["updates"]), background,
        )
    return bundle, f, cfg, a
