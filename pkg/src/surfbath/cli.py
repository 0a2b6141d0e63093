"""Command-line front end.

    surfbath {fidelity,cam,correlators,pmap,estimate,validate}
             [--config FILE] [--out FILE] [--format csv|json] [--workers K]

Every subcommand runs with built-in defaults when no config is given.  Data
go to ``--out`` (or stdout); with ``--out`` a manifest
``<out>.manifest.json`` records the run configuration alongside the sha256
of the data file.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import jsonschema
import numpy as np

from . import __version__
from . import bath as bathmod
from . import cam as cammod
from . import spinmodel
from .lattice import ORDERING_VERSION, LatticeSpec, build_lattice, neighbor_pairs

COMMANDS = ("fidelity", "cam", "correlators", "pmap", "estimate", "validate")
DEFAULT_FORMAT = {"fidelity": "csv", "correlators": "csv", "pmap": "csv",
                  "cam": "json", "estimate": "json", "validate": "json"}

CONVENTIONS = {
    "pair_sum": "E_S = sum_{i != j} J_ij s_i s_j = 2 sum_{i<j} J_ij s_i s_j",
    "nn_bond": "NN model: each nearest-neighbour bond contributes J s_i s_j (J_ij = J/2)",
    "ferromagnetic_sign": "J < 0 is ferromagnetic",
    "g_imag": "G^I = i * g_imag",
    "light_cone_step": "theta(0) = 1 (inside-cone branch at d = v*delta)",
    "amplitude_prefactors": "chi/2^N and 2^N_star omitted from A and B",
    "units": "a = v = omega0 = 1 unless configured",
}

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}

SCHEMA: dict[str, Any] = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "lattice": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "n": {"type": "integer", "minimum": 1},
                "m": {"type": "integer", "minimum": 1},
                "a": _pos,
            },
        },
        "coupling": {
            "type": "object", "additionalProperties": False,
            "properties": {"re_J": _num, "im_J": _num},
        },
        "bath": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "s": {"enum": [-0.5, 0, 0.5]},
                "v": _nonneg, "omega0": _pos, "delta": _nonneg, "lambda": _nonneg,
                "cutoff": {"oneOf": [_pos, {"type": "null"}]},
            },
        },
        "beta_grid": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "start": _nonneg, "stop": _nonneg,
                "count": {"type": "integer", "minimum": 1},
                "spacing": {"enum": ["linear", "log"]},
            },
        },
        "cam": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "sizes": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 3},
                "J": {"type": "number", "not": {"const": 0}},
                "size_measure": {"enum": list(cammod.SIZE_MEASURES)},
                "connected": {"type": "boolean"},
                "bracket": {"type": "array", "items": _pos, "minItems": 2, "maxItems": 2},
            },
        },
        "correlators": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "s": {"type": "array", "items": {"enum": [-0.5, 0, 0.5]}, "minItems": 1},
                "d_start": _nonneg, "d_stop": _nonneg,
                "count": {"type": "integer", "minimum": 1},
            },
        },
        "estimate": {
            "type": "object", "additionalProperties": False,
            "properties": {"mu": {"type": "number", "minimum": 1},
                           "coord": {"type": "integer", "minimum": 1}},
        },
        "tolerance": {
            "type": "object", "additionalProperties": False,
            "properties": {"quadrature": _pos},
        },
        "workers": {"type": "integer", "minimum": 1},
        "format": {"enum": ["csv", "json"]},
    },
    "not": {"required": ["coupling", "bath"]},
}


class ConfigError(ValueError):
    def __init__(self, message: str, path: str = ""):
        super().__init__(message)
        self.path = path


@dataclass
class RunConfig:
    kind: str
    lattice: LatticeSpec = field(default_factory=lambda: LatticeSpec(3, 3))
    J: complex | None = -1.0
    bath: bathmod.BathParams | None = None
    betas: tuple[float, ...] = ()
    cam: dict = field(default_factory=dict)
    correlators: dict = field(default_factory=dict)
    estimate: cammod.EstimateParams = field(default_factory=cammod.EstimateParams)
    quad_tol: float = 1e-9
    workers: int = 1
    format: str = "csv"
    raw: dict = field(default_factory=dict)


def _beta_grid(g: dict) -> tuple[float, ...]:
    start, stop = g.get("start", 0.0), g.get("stop", 0.5)
    count, spacing = g.get("count", 51), g.get("spacing", "linear")
    if stop < start:
        raise ConfigError("beta_grid.stop must not be below beta_grid.start", "beta_grid")
    if spacing == "log":
        if start <= 0:
            raise ConfigError("log spacing needs beta_grid.start > 0", "beta_grid.start")
        grid = np.geomspace(start, stop, count)
    else:
        grid = np.linspace(start, stop, count)
    return tuple(float(b) for b in grid)


def _bath_from(d: dict, s_default: float | None = None) -> bathmod.BathParams:
    s = d.get("s", s_default)
    if s is None:
        raise ConfigError("bath.s is required", "bath.s")
    return bathmod.BathParams(
        s=float(s), v=d.get("v", 1.0), omega0=d.get("omega0", 1.0), delta=d.get("delta", 1.0),
        lam=d.get("lambda", 1.0), cutoff=d.get("cutoff"),
    )


def parse_config(text: str | None, kind: str) -> RunConfig:
    """Validate a JSON config against :data:`SCHEMA` and apply defaults."""
    if kind not in COMMANDS:
        raise ConfigError(f"unknown experiment kind {kind!r}", "kind")
    try:
        raw = json.loads(text) if text and text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from None
    errors = sorted(jsonschema.Draft202012Validator(SCHEMA).iter_errors(raw), key=lambda e: list(e.path))
    if errors:
        e = errors[0]
        path = ".".join(str(p) for p in e.path) or "<root>"
        msg = e.message
        if e.validator == "not" and not e.path:
            msg = "give either 'coupling' or 'bath', not both"
        raise ConfigError(f"{path}: {msg}", path)

    lat = raw.get("lattice", {})
    cfg = RunConfig(
        kind=kind,
        lattice=LatticeSpec(lat.get("n", 3), lat.get("m", 3), lat.get("a", 1.0)),
        betas=_beta_grid(raw.get("beta_grid", {})),
        cam=dict(raw.get("cam", {})),
        correlators=dict(raw.get("correlators", {})),
        estimate=cammod.EstimateParams(**raw.get("estimate", {})),
        quad_tol=raw.get("tolerance", {}).get("quadrature", 1e-9),
        workers=raw.get("workers", 1),
        format=raw.get("format", DEFAULT_FORMAT[kind]),
        raw=raw,
    )
    if "bath" in raw:
        cfg.J = None
        s_default = 0.0 if kind == "correlators" else None
        try:
            cfg.bath = _bath_from(raw["bath"], s_default)
        except ValueError as exc:
            raise ConfigError(str(exc), getattr(exc, "path", "bath")) from None
    elif "coupling" in raw:
        c = raw["coupling"]
        cfg.J = complex(c.get("re_J", -1.0), c.get("im_J", 0.0))
    if kind == "pmap" and cfg.bath is None:
        cfg.bath = bathmod.BathParams(s=-0.5)
        cfg.J = None
    return cfg


# --------------------------------------------------------------------- output

def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, complex):
        return {"re": x.real, "im": x.imag}
    return x


@dataclass
class Table:
    columns: list[str]
    rows: list[tuple]
    meta: dict = field(default_factory=dict)


def render(results: Table, fmt: str) -> bytes:
    if not results.rows and fmt == "csv":
        raise ValueError("nothing to emit")
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(results.columns)
        for r in results.rows:
            w.writerow([_fmt(x) for x in r])
        return buf.getvalue().encode()
    if fmt == "json":
        doc = {
            "columns": results.columns,
            "rows": [dict(zip(results.columns, r)) for r in results.rows],
            "meta": results.meta,
        }
        return (json.dumps(_jsonable(doc), indent=2, sort_keys=True, allow_nan=False) + "\n").encode()
    raise ValueError(f"unknown format {fmt!r}")


def emit(results: Table, fmt: str, path: str | Path | None = None) -> str:
    """Serialize ``results``; write to ``path`` (stdout when None). Returns sha256."""
    data = render(results, fmt)
    if path is None:
        sys.stdout.write(data.decode())
        sys.stdout.flush()
    else:
        Path(path).write_bytes(data)
    return hashlib.sha256(data).hexdigest()


# ---------------------------------------------------------------- experiments

def _couplings(cfg: RunConfig, lat):
    if cfg.bath is not None:
        return bathmod.coupling_matrix(lat, cfg.bath)
    return bathmod.nn_coupling_matrix(lat, cfg.J)


def _nn_value(C, lat) -> complex:
    if C.is_nn:
        return C.nn_bond
    i, j, _ = neighbor_pairs(lat)[0]
    return complex(2 * C.values[i, j])


def run_fidelity(cfg: RunConfig) -> Table:
    lat = build_lattice(cfg.lattice)
    C = _couplings(cfg, lat)
    sweep = spinmodel.fidelity_sweep(lat, C, cfg.betas, workers=cfg.workers)
    J = _nn_value(C, lat)
    cols = ["beta", "re_A", "im_A", "re_B", "im_B", "fidelity", "n", "m", "re_J", "im_J"]
    rows = [
        (b, r.A.real, r.A.imag, r.B.real, r.B.imag, r.fidelity, lat.n, lat.m, J.real, J.imag)
        for b, r in sweep
    ]
    meta = {
        "coupling_source": C.source,
        "energy_offsets": [r.energy_offset for _, r in sweep],
        "re_J_meaning": "bond energy" if C.is_nn else "2 J_ij at the first nearest-neighbour pair",
        "N": lat.N,
    }
    return Table(cols, rows, meta)


def run_cam(cfg: RunConfig) -> Table:
    c = cfg.cam
    res = cammod.run_cam(
        sizes=tuple(c.get("sizes", (2, 3, 4))),
        J=c.get("J", -1.0),
        size_measure=c.get("size_measure", "distance"),
        connected=c.get("connected", False),
        bracket=tuple(c.get("bracket", cammod.DEFAULT_BRACKET)),
        workers=cfg.workers,
    )
    cols = ["kind", "n", "m", "N", "L", "beta_c", "beta_c_J", "stderr"]
    Jabs = abs(res.meta["J"])
    rows = [("cluster", r["n"], r["m"], r["N"], r["L"], r["beta_c"], r["beta_c_J"], 0.0)
            for r in res.meta["clusters"]]
    rows.append(("extrapolated", 0, 0, 0, 0, res.beta_c, res.beta_c * Jabs, res.beta_c_err * Jabs))
    meta = {
        "per_cluster": res.meta["clusters"],
        "fit": {"slope": res.slope, "intercept": res.intercept, "stderr": res.intercept_err,
                "abscissa": "1/L", "ordinate": "T_c"},
        "extrapolated_beta_c": res.beta_c,
        "extrapolated_beta_c_J": res.beta_c * Jabs,
        "extrapolated_stderr": res.beta_c_err * Jabs,
        "size_measure": res.meta["size_measure"],
        "correlator": res.meta["correlator"],
    }
    return Table(cols, rows, meta)


def run_correlators(cfg: RunConfig) -> Table:
    c = cfg.correlators
    base = cfg.bath or bathmod.BathParams(s=0.0)
    s_list = c.get("s", [base.s] if cfg.bath is not None else list(bathmod.SUPPORTED_S))
    grid = np.linspace(c.get("d_start", 0.1), c.get("d_stop", 3.0), c.get("count", 30))
    cols = ["s", "d", "vdelta", "g_real", "g_imag", "re_J", "im_J"]
    rows, skipped = [], []
    for s in s_list:
        b = bathmod.BathParams(s=float(s), v=base.v, omega0=base.omega0, delta=base.delta,
                               lam=base.lam, cutoff=base.cutoff)
        scale = bathmod.coupling_scale(b)
        for d in grid:
            d = float(d)
            try:
                gr, gi = bathmod.g_real(b, d), bathmod.g_imag(b, d)
            except (bathmod.LightConeSingularityError, bathmod.CutoffRequiredError) as exc:
                skipped.append({"s": b.s, "d": d, "reason": str(exc)})
                continue
            J = scale * complex(gr, gi) / 2
            rows.append((b.s, d, b.vdelta, gr, gi, J.real, J.imag))
    return Table(cols, rows, {"skipped": skipped, "J_normalisation": "lambda^2/(2 beta) * Phi"})


def run_pmap(cfg: RunConfig) -> Table:
    b = cfg.bath
    rate = bathmod.flip_rate(b)
    rows = [(beta, bathmod.p_from_beta(beta, b)) for beta in cfg.betas]
    return Table(["beta", "p"], rows, {"s": b.s, "cutoff": b.cutoff, "kappa": rate,
                                       "relation": "ln(1 - 2p) = -kappa beta"})


def run_estimate(cfg: RunConfig) -> Table:
    p = cfg.estimate
    bc, pb = cammod.low_t_estimate(p), cammod.p_threshold_bound(p)
    return Table(["mu", "coord", "beta_c_J", "p_bound"], [(p.mu, p.coord, bc, pb)],
                 {"beta_c_J": "ln(mu)/(2 coord)", "p_bound": "ln(mu)/(4 coord)"})


def validation_checks(workers: int = 1, quad_tol: float = 1e-9) -> list[tuple[str, bool, float, float]]:
    """Oracle suite: (name, passed, measured, tolerance)."""
    out = []

    worst = 0.0
    for s in bathmod.SUPPORTED_S:
        b = bathmod.BathParams(s=s)
        for x in np.linspace(0.1, 3.0, 12):
            if s == 0.5 and abs(x - 1) <= 0.05:
                continue
            for f, q in ((bathmod.g_real, bathmod.g_real_quadrature),
                         (bathmod.g_imag, bathmod.g_imag_quadrature)):
                exact, num = f(b, x), q(b, x, tol=quad_tol)
                worst = max(worst, abs(exact - num) / abs(exact) if exact else abs(num))
    out.append(("closed_form_vs_quadrature", worst < 1e-6, worst, 1e-6))

    for n in (1, 2):
        lat = build_lattice((n, n))
        ens = spinmodel.build_ensemble(lat)
        worst = 0.0
        for J in (-1.0, -1.0 - 1.0j):
            C = bathmod.nn_coupling_matrix(lat, J)
            for beta in (0.0, 0.05, 0.15, 0.4, 1.0):
                r = spinmodel.amplitudes(lat, ens, C, beta, workers=workers)
                q = spinmodel.brute_force_amplitudes(lat, C, beta)
                worst = max(worst, abs(r.A - q.A) / abs(q.A), abs(r.B - q.B) / abs(q.A))
        out.append((f"generators_vs_brute_force_N{lat.N}", worst < 1e-12, worst, 1e-12))

        r0 = spinmodel.amplitudes(lat, ens, C, 0.0)
        out.append((f"B_at_beta0_N{lat.N}", r0.B == 0, abs(r0.B), 0.0))

        r1 = spinmodel.amplitudes(lat, ens, C, 0.3)
        r2 = spinmodel.amplitudes(lat, ens, C, 0.3, offset=r1.energy_offset + 1.7)
        dF = abs(r1.fidelity - r2.fidelity)
        out.append((f"offset_invariance_N{lat.N}", dF <= 1e-14, dF, 1e-14))

    fit = cammod.extrapolate([(L, 1 / (5 + 1 / L)) for L in (2, 3, 4)])
    dT = abs(fit.intercept - 5)
    out.append(("cam_linear_fit_recovery", dT < 1e-12, dT, 1e-12))
    return out


def run_validate(cfg: RunConfig) -> Table:
    checks = [(name, bool(ok), float(got), tol)
              for name, ok, got, tol in validation_checks(cfg.workers, cfg.quad_tol)]
    return Table(["check", "passed", "measured", "tolerance"], checks,
                 {"all_passed": all(c[1] for c in checks)})


RUNNERS = {
    "fidelity": run_fidelity, "cam": run_cam, "correlators": run_correlators,
    "pmap": run_pmap, "estimate": run_estimate, "validate": run_validate,
}


def run(cfg: RunConfig, out: str | None = None, *, seedless: bool = False) -> tuple[dict, Table]:
    t0 = time.perf_counter()
    table = RUNNERS[cfg.kind](cfg)
    t1 = time.perf_counter()
    checksum = emit(table, cfg.format, out)
    manifest = {
        "kind": cfg.kind,
        "config": cfg.raw,
        "version": __version__,
        "ordering": ORDERING_VERSION,
        "conventions": CONVENTIONS,
        "seedless": seedless,
        "workers": cfg.workers,
        "format": cfg.format,
        "timings": {"compute_s": t1 - t0, "emit_s": time.perf_counter() - t1},
        "outputs": {str(out) if out else "<stdout>": {"sha256": checksum}},
    }
    if out is not None:
        Path(f"{out}.manifest.json").write_text(
            json.dumps(_jsonable(manifest), indent=2, sort_keys=True) + "\n"
        )
    return manifest, table


def _error(kind: str, exc: BaseException, path: str = "") -> dict:
    rec = {"error": kind, "type": type(exc).__name__, "message": str(exc)}
    if path:
        rec["path"] = path
    return rec


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="surfbath", description="Surface-code fidelity under a correlated bosonic bath.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON run configuration")
        sp.add_argument("--out", help="output file (default stdout)")
        sp.add_argument("--format", choices=("csv", "json"))
        sp.add_argument("--workers", type=int)
        sp.add_argument("--seedless", action="store_true",
                        help="assert a deterministic run (no RNG is used anywhere)")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = Path(args.config).read_text() if args.config else None
        cfg = parse_config(text, args.command)
        if args.format:
            cfg.format = args.format
        if args.workers is not None:
            if args.workers < 1:
                raise ConfigError("--workers must be >= 1", "workers")
            cfg.workers = args.workers
    except (ConfigError, ValueError, OSError) as exc:
        print(json.dumps(_error("config", exc, getattr(exc, "path", ""))), file=sys.stderr)
        return 2
    try:
        _, table = run(cfg, args.out, seedless=args.seedless)
    except Exception as exc:  # surfaced as a structured record
        print(json.dumps(_error("run", exc)), file=sys.stderr)
        return 1
    if cfg.kind == "validate" and not table.meta["all_passed"]:
        failed = [c[0] for c in table.rows if not c[1]]
        print(json.dumps({"error": "validation", "failed": failed}), file=sys.stderr)
        return 1
    return 0
