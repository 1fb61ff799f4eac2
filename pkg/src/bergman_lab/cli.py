"""Command-line experiment runner: JSON config in, CSV/JSON tables out."""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from . import acceptance, dbar, expansion, fock, kernel, numerics, potential, weights
from . import berezin as bz
from .errors import BergmanLabError, ConfigError, NotInXError

_COMPLEX = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_POS = {"type": "number", "exclusiveMinimum": 0}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["weight", "tau", "m_schedule", "n_rule"],
    "properties": {
        "weight": {
            "type": "object",
            "required": ["kind"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["fock", "radial_power", "quartic"]},
                "p": {"type": "integer", "minimum": 1},
                "c": _POS,
            },
        },
        "tau": _POS,
        "m_schedule": {"type": "array", "items": _POS, "minItems": 1},
        "n_rule": {
            "type": "object",
            "required": ["kind"],
            "additionalProperties": False,
            "properties": {"kind": {"enum": ["round_m_tau", "m_tau_plus_M"]}, "M": {"type": "integer"}},
        },
        "z0": {"type": "array", "items": _COMPLEX, "minItems": 1},
        "quadrature": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"oversample": {"type": "number", "minimum": 1}},
        },
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "extent": _POS,
                "spacing": _POS,
                "omega": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 2},
                "max_iter": {"type": "integer", "minimum": 1},
                "tol": _POS,
                "mass_tol": _POS,
            },
        },
        "seed": {"type": "integer", "minimum": 0},
        "output": {"type": "string", "minLength": 1},
        "concentration_radius": _POS,
        "offdiag": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"direction": _COMPLEX, "samples": {"type": "integer", "minimum": 2}},
        },
        "harmonic": {"type": "object", "additionalProperties": False, "properties": {"z0": _COMPLEX}},
        "moments": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "z0": _COMPLEX,
                "orders": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
                "radius": _POS,
            },
        },
        "dbar": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"bump_radius": _POS, "M0": _POS, "bpar": _POS},
        },
    },
}


def default_config() -> dict:
    return json.loads(resources.files("bergman_lab").joinpath("default_config.json").read_text())


def load_config(path: str | None) -> dict:
    """Defaults overlaid with the user's top-level keys, validated; raises ConfigError with a field path."""
    cfg = default_config()
    if path is not None:
        try:
            user = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}", ()) from exc
        if not isinstance(user, dict):
            raise ConfigError("config must be a JSON object", ())
        cfg.update(user)
    err = jsonschema.exceptions.best_match(jsonschema.Draft7Validator(CONFIG_SCHEMA).iter_errors(cfg))
    if err is not None:
        raise ConfigError(err.message, tuple(err.absolute_path))
    ms = cfg["m_schedule"]
    if any(b <= a for a, b in zip(ms, ms[1:])):
        raise ConfigError("m_schedule must be strictly increasing", ("m_schedule",))
    rule = cfg["n_rule"]
    if rule["kind"] == "m_tau_plus_M" and "M" not in rule:
        raise ConfigError("m_tau_plus_M needs 'M'", ("n_rule", "M"))
    for m in ms:
        if n_for(cfg, m) < 1:
            raise ConfigError(f"n_rule gives n < 1 at m={m}", ("n_rule",))
    if cfg["weight"]["kind"] == "radial_power" and "p" not in cfg["weight"]:
        raise ConfigError("radial_power needs 'p'", ("weight", "p"))
    if cfg["weight"]["kind"] == "quartic" and "c" not in cfg["weight"]:
        raise ConfigError("quartic needs 'c'", ("weight", "c"))
    return cfg


def n_for(cfg: dict, m: float) -> int:
    rule = cfg["n_rule"]
    base = int(round(m * cfg["tau"]))
    return base + int(rule.get("M", 0)) if rule["kind"] == "m_tau_plus_M" else base


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()


def _c(pair) -> complex:
    return complex(pair[0], pair[1])


def _g(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % float(x)


class Table:
    def __init__(self, header):
        self.header = list(header)
        self.rows = []

    def add(self, *row):
        self.rows.append([_g(v) for v in row])

    def render(self, meta: list[str]) -> str:
        buf = io.StringIO()
        for line in meta:
            buf.write(f"# {line}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.header)
        writer.writerows(self.rows)
        return buf.getvalue()


def _map(fn, items, threads):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _weight(cfg):
    return weights.weight_from_descriptor(cfg["weight"])


def _equilibrium(cfg, w):
    if w.is_radial:
        return potential.radial_equilibrium_result(w, cfg["tau"])
    return potential.psor_obstacle_solve(w, cfg["tau"], cfg.get("grid"))


def _basis(cfg, w, m):
    return kernel.build_space(w, m, n_for(cfg, m))


def cmd_kernel_diag(cfg, threads):
    w = _weight(cfg)
    t = Table(["m", "n", "z0_re", "z0_im", "one_point", "diag_expansion", "residual"])

    def job(m):
        basis = _basis(cfg, w, m)
        rows = []
        for pair in cfg["z0"]:
            z0 = _c(pair)
            op = float(kernel.one_point(basis, z0))
            try:
                de = float(expansion.diag_expansion(w, m, z0))
            except NotInXError:
                de = math.nan
            rows.append((m, basis.n, z0.real, z0.imag, op, de, abs(op - de)))
        return rows

    for rows in _map(job, cfg["m_schedule"], threads):
        for r in rows:
            t.add(*r)
    return {"kernel_diag.csv": t}


def cmd_berezin_conc(cfg, threads):
    w = _weight(cfg)
    radius = cfg["concentration_radius"]
    t = Table(["m", "n", "z0_re", "z0_im", "mass", "mass_outside", "radius"])

    def job(m):
        basis = _basis(cfg, w, m)
        quad = kernel.default_quadrature(w, m, basis.n, breakpoints=(radius,), oversample=cfg["quadrature"]["oversample"])
        rows = []
        for pair in cfg["z0"]:
            ev = bz.berezin(basis, _c(pair))
            out = bz.mass_outside(ev, lambda z: np.abs(z) > radius, quad)
            rows.append((m, basis.n, pair[0], pair[1], bz.mass(ev, quad), out, radius))
        return rows

    for rows in _map(job, cfg["m_schedule"], threads):
        for r in rows:
            t.add(*r)
    return {"berezin_conc.csv": t}


def cmd_gaussian_tv(cfg, threads):
    w = _weight(cfg)
    t = Table(["m", "n", "z0_re", "z0_im", "tv"])

    def job(m):
        basis = _basis(cfg, w, m)
        rows = []
        for pair in cfg["z0"]:
            try:
                tv = bz.tv_to_gaussian(bz.berezin(basis, _c(pair)))
            except NotInXError:
                tv = math.nan
            rows.append((m, basis.n, pair[0], pair[1], tv))
        return rows

    for rows in _map(job, cfg["m_schedule"], threads):
        for r in rows:
            t.add(*r)
    return {"gaussian_tv.csv": t}


def cmd_offdiag(cfg, threads):
    w = _weight(cfg)
    eq = _equilibrium(cfg, w)
    direction = _c(cfg["offdiag"]["direction"])
    samples = cfg["offdiag"]["samples"]
    prof = Table(["m", "n", "z0_re", "z0_im", "distance", "log_density", "compensation"])
    summary = Table(["m", "n", "z0_re", "z0_im", "d_K", "a_K", "fitted_slope"])

    def job(m):
        basis = _basis(cfg, w, m)
        out = []
        for pair in cfg["z0"]:
            z0 = _c(pair)
            d_K = eq.interior_distance(z0, w)
            if not d_K > 0:
                continue
            dist = np.linspace(d_K / samples, d_K, samples)
            out.append(expansion.offdiag_profile(basis, z0, direction, dist, eq))
        return basis.n, out

    for m, (n, reports) in zip(cfg["m_schedule"], _map(job, cfg["m_schedule"], threads)):
        for rep in reports:
            summary.add(m, n, rep.z0.real, rep.z0.imag, rep.d_K, rep.a_K, rep.fitted_slope)
            for d, ld, cp in zip(rep.distances, rep.log_density, rep.compensation):
                prof.add(m, n, rep.z0.real, rep.z0.imag, d, ld, cp)
    return {"offdiag_profile.csv": prof, "offdiag_summary.csv": summary}


def cmd_obstacle(cfg, threads):
    w = _weight(cfg)
    res = potential.psor_obstacle_solve(w, cfg["tau"], cfg.get("grid"))
    d = res.solver_diagnostics
    ref = potential.radial_droplet_radius(w, cfg["tau"]) if w.is_radial else math.nan
    summary = Table(["tau", "radius", "max_radius", "reference_radius", "mass", "boundary_constant", "outer_iterations", "sweeps"])
    summary.add(cfg["tau"], res.droplet_radius, d["max_radius"], ref, d["mass"], d["boundary_constant"], d["outer_iterations"], d["sweeps"])
    grid = Table(["x", "y", "Qhat", "in_droplet"])
    for i, x in enumerate(res.grid_x):
        for j, y in enumerate(res.grid_x):
            grid.add(x, y, res.grid_values[i, j], bool(res.droplet_mask[i, j]))
    return {"obstacle.csv": summary, "obstacle_grid.csv": grid}


def cmd_fock_harmonic(cfg, threads):
    tau = cfg["tau"]
    spec = fock.HarmonicMeasureSpec(tau=tau, z0=_c(cfg["harmonic"]["z0"]))
    f = fock.boundary_matched_test_function(tau)
    rows = fock.th5_experiment(spec, f, cfg["m_schedule"], n_rule=lambda m: n_for(cfg, m))
    t = Table(["m", "n", "berezin", "harmonic", "gap"])
    for r in rows:
        t.add(*r)
    return {"fock_harmonic.csv": t}


def cmd_fock_moments(cfg, threads):
    mom = cfg["moments"]
    z0 = _c(mom["z0"])
    t = Table(["m", "n", "j", "pv_re", "pv_im", "quadrature_re", "quadrature_im", "restricted_re", "restricted_im", "radius"])

    def job(m):
        n = n_for(cfg, m)
        rows = []
        for j in mom["orders"]:
            if n <= j:
                continue
            pv = fock.pv_moment(m, n, j, z0)
            qv = fock.pv_moment_quadrature(m, n, j, z0)
            rv = fock.restricted_moment(m, n, j, z0, mom["radius"])
            rows.append((m, n, j, pv.real, pv.imag, qv.real, qv.imag, rv.real, rv.imag, mom["radius"]))
        return rows

    for rows in _map(job, cfg["m_schedule"], threads):
        for r in rows:
            t.add(*r)
    return {"fock_moments.csv": t}


def cmd_dbar_bound(cfg, threads):
    w = _weight(cfg)
    eq = _equilibrium(cfg, w)
    opts = cfg["dbar"]
    f = dbar.SmoothBump(opts["bump_radius"])
    params = dbar.bound_params(w, eq, f, opts["M0"], opts["bpar"])
    compatible = dbar.check_growth_compatibility(params, eq)

    def job(m):
        n = n_for(cfg, m)
        quad = kernel.default_quadrature(w, m, n, breakpoints=(opts["bump_radius"],), oversample=cfg["quadrature"]["oversample"])
        rec = dbar.verify_cor_bh(kernel.build_space(w, m, n), f, params, eq, quad)
        rec["growth_compatible"] = compatible
        return rec

    return {"dbar_bound.json": _map(job, cfg["m_schedule"], threads)}


def cmd_accept(cfg, threads):
    results = acceptance.run_all()
    t = Table(["criterion", "name", "passed", "metrics"])
    for r in results:
        print(r.line())
        t.rows.append([str(r.number), r.name, str(int(r.passed)), json.dumps(_jsonable(r.metrics), sort_keys=True)])
    return {"acceptance.csv": t}, all(r.passed for r in results)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float("%.17g" % obj)
    return obj


COMMANDS = {
    "kernel-diag": cmd_kernel_diag,
    "berezin-conc": cmd_berezin_conc,
    "gaussian-tv": cmd_gaussian_tv,
    "offdiag": cmd_offdiag,
    "obstacle": cmd_obstacle,
    "fock-harmonic": cmd_fock_harmonic,
    "fock-moments": cmd_fock_moments,
    "dbar-bound": cmd_dbar_bound,
    "accept": cmd_accept,
}


def _write_atomic(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_outputs(outputs: dict, out_dir: Path, meta: list[str]) -> list[Path]:
    """Render everything first, then move each file into place with a rename."""
    rendered = {}
    for name, obj in outputs.items():
        if isinstance(obj, Table):
            rendered[name] = obj.render(meta)
        else:
            rendered[name] = json.dumps({"meta": meta, "records": _jsonable(obj)}, indent=2, sort_keys=True) + "\n"
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, text in rendered.items():
        _write_atomic(out_dir / name, text)
        paths.append(out_dir / name)
    return paths


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bergman-lab", description="Polynomial Bergman kernel experiments.")
    parser.add_argument("--version", action="version", version=f"bergman_lab {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config; missing keys fall back to the shipped defaults")
    common.add_argument("--out", help="output directory (overrides the config's 'output')")
    common.add_argument("--deterministic", action="store_true", help="order-fixed compensated reductions")
    common.add_argument("--threads", type=int, default=1, help="worker threads over m_schedule")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"bergman-lab: config error at {exc}", file=sys.stderr)
        return 2
    if args.threads < 1:
        print("bergman-lab: --threads must be >= 1", file=sys.stderr)
        return 2
    out_dir = Path(args.out if args.out else cfg.get("output", "results"))
    numerics.set_deterministic(args.deterministic)
    meta = [
        f"bergman_lab {__version__}",
        f"subcommand {args.command}",
        f"config_sha256 {config_hash(cfg)}",
        f"seed {cfg.get('seed', acceptance.DEFAULT_SEED)}",
        f"deterministic {int(args.deterministic)}",
    ]
    try:
        result = COMMANDS[args.command](cfg, args.threads)
    except BergmanLabError as exc:
        print(f"bergman-lab: {args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    finally:
        numerics.set_deterministic(False)
    ok = True
    if isinstance(result, tuple):
        result, ok = result
    for p in write_outputs(result, out_dir, meta):
        print(f"wrote {p}")
    return 0 if ok else 1
