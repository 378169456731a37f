"""Command-line front end: ``censadd fit | simulate | study | reproduce-figure``.

Exit codes: 0 on success (warnings included), 1 on invalid input, 2 on a
numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import warnings
from pathlib import Path
from typing import Optional

import jsonschema
import numpy as np

from .additive import QuadratureSpec, density_from_config
from .kernels import kernel_from_config
from .pipeline import FitSettings, fit_additive
from .psi import KINDS, psi_from_config
from .simulate import StudyConfig, generate, paper_dgp, reproduce_figure, run_study
from .survival import CensoredSample

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2


class InputError(ValueError):
    """Bad data file, config or command-line value."""


_KERNEL = {
    "type": "object",
    "properties": {
        "family": {"enum": ["epanechnikov", "uniform", "polynomial"]},
        "order": {"type": "integer", "minimum": 2},
    },
    "additionalProperties": False,
}
_Q = {
    "type": "object",
    "properties": {
        "family": {"enum": ["uniform", "bump"]},
        "support": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
        "power": {"type": "integer", "minimum": 1},
    },
    "additionalProperties": False,
}
_QUAD = {
    "type": "object",
    "properties": {
        "nodes": {"type": "integer", "minimum": 2},
        "panels": {"type": "integer", "minimum": 1},
        "aligned": {"type": "boolean"},
    },
    "additionalProperties": False,
}
_POS = {"type": "number", "exclusiveMinimum": 0}

FIT_SCHEMA = {
    "type": "object",
    "properties": {
        "psi": {
            "type": "object",
            "properties": {
                "kind": {"enum": [k for k in KINDS if k != "custom_bounded"]},
                "tau0": {"type": "number"},
                "bound": _POS,
            },
            "required": ["kind", "tau0"],
            "additionalProperties": False,
        },
        "kernel": _KERNEL,
        "density_kernel": _KERNEL,
        "c": _POS,
        "c_prime": _POS,
        "h": {"oneOf": [_POS, {"type": "array", "items": _POS, "minItems": 1}]},
        "density_h": _POS,
        "undersmooth": {"type": "boolean"},
        "q": {"type": "array", "items": _Q, "minItems": 1},
        "grids": {"type": "array", "items": {"type": "array", "items": {"type": "number"}, "minItems": 1}},
        "grid_points": {"type": "integer", "minimum": 2},
        "grid_fraction": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "quadrature": _QUAD,
        "z": _POS,
        "density_floor": {"type": "number", "minimum": 0},
        "with_sigma": {"type": "boolean"},
        "surface_points": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
    },
    "required": ["psi"],
    "additionalProperties": False,
}

STUDY_SCHEMA = {
    "type": "object",
    "properties": {
        "n": {"type": "integer", "minimum": 10},
        "replicates": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "probes": {
            "type": "array",
            "items": {"type": "array", "prefixItems": [{"type": "integer", "minimum": 1}, {"type": "number"}], "minItems": 2, "maxItems": 2},
        },
        "kernel": _KERNEL,
        "density_kernel": _KERNEL,
        "c": _POS,
        "bandwidth_rule": {"enum": ["h2", "undersmoothed"]},
        "c_prime": {"oneOf": [_POS, {"type": "null"}]},
        "density_h": _POS,
        "q": {"type": "array", "items": _Q, "minItems": 2, "maxItems": 2},
        "sigma": {"enum": ["analytic", "plugin"]},
        "g_source": {"enum": ["kaplan_meier", "analytic"]},
        "f_source": {"enum": ["kde", "analytic"]},
        "quadrature": _QUAD,
        "z": _POS,
    },
    "additionalProperties": False,
}

SIMULATE_SCHEMA = {
    "type": "object",
    "properties": {"n": {"type": "integer", "minimum": 1}, "seed": {"type": "integer", "minimum": 0}},
    "additionalProperties": False,
}


def load_config(path: Optional[str], schema: dict) -> dict:
    """Read and validate a JSON config; a missing path gives ``{}``."""
    if path is None:
        cfg = {}
    else:
        try:
            cfg = json.loads(Path(path).read_text())
        except OSError as exc:
            raise InputError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise InputError(f"config {path} is not valid JSON: {exc}") from exc
    try:
        jsonschema.validate(cfg, schema)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise InputError(f"config error at {where}: {exc.message}") from exc
    return cfg


def read_sample(path: str) -> CensoredSample:
    """Parse a CSV with header ``z,delta,x1..xd``; errors name the file line."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read data {path}: {exc}") from exc
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise InputError(f"{path}: empty file, a header is required") from None
    d = len(header) - 2
    expected = ["z", "delta"] + [f"x{j + 1}" for j in range(d)]
    if d < 1 or header != expected:
        raise InputError(f"{path} line 1: header must be z,delta,x1..xd, got {','.join(header)}")
    z, delta, x = [], [], []
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise InputError(f"{path} line {line}: expected {len(header)} fields, got {len(row)}")
        try:
            vals = [float(c) for c in row]
        except ValueError:
            raise InputError(f"{path} line {line}: non-numeric field in {row}") from None
        if not all(np.isfinite(vals)):
            raise InputError(f"{path} line {line}: non-finite value")
        if vals[1] not in (0.0, 1.0):
            raise InputError(f"{path} line {line}: delta must be 0 or 1, got {row[1]}")
        if vals[0] < 0:
            raise InputError(f"{path} line {line}: z must be non-negative")
        z.append(vals[0])
        delta.append(int(vals[1]))
        x.append(vals[2:])
    if not z:
        raise InputError(f"{path}: no data rows")
    return CensoredSample(np.array(z), np.array(delta), np.array(x))


def write_sample(sample: CensoredSample) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["z", "delta"] + [f"x{j + 1}" for j in range(sample.d)])
    for i in range(sample.n):
        writer.writerow([f"{sample.z[i]:.17g}", int(sample.delta[i])] + [f"{v:.17g}" for v in sample.x[i]])
    return buf.getvalue()


def settings_from_config(cfg: dict) -> FitSettings:
    kw = {"psi": psi_from_config(cfg["psi"])}
    if "kernel" in cfg:
        kw["kernel"] = kernel_from_config(cfg["kernel"])
    if "density_kernel" in cfg:
        kw["density_kernel"] = kernel_from_config(cfg["density_kernel"])
    for key in ("c", "c_prime", "density_h", "undersmooth", "grid_points", "grid_fraction", "z", "density_floor", "with_sigma"):
        if key in cfg:
            kw[key] = cfg[key]
    if "h" in cfg:
        kw["h"] = np.atleast_1d(np.asarray(cfg["h"], dtype=float))
    if "q" in cfg:
        kw["qs"] = [density_from_config(q) for q in cfg["q"]]
    if "grids" in cfg:
        kw["grids"] = cfg["grids"]
    if "quadrature" in cfg:
        kw["quad"] = QuadratureSpec(**cfg["quadrature"])
    if "h" not in kw and "c" not in kw:
        raise InputError("config needs either h or c")
    return FitSettings(**kw)


def study_config_from(cfg: dict) -> StudyConfig:
    kw = {}
    if "kernel" in cfg:
        kw["kernel"] = kernel_from_config(cfg["kernel"])
    if "density_kernel" in cfg:
        kw["density_kernel"] = kernel_from_config(cfg["density_kernel"])
    for key in ("c", "bandwidth_rule", "c_prime", "density_h", "sigma", "g_source", "f_source", "z"):
        if key in cfg:
            kw[key] = cfg[key]
    if "q" in cfg:
        kw["qs"] = [density_from_config(q) for q in cfg["q"]]
    if "quadrature" in cfg:
        kw["quad"] = QuadratureSpec(**cfg["quadrature"])
    return StudyConfig(**kw)


def _threads(arg: Optional[int]) -> int:
    if arg is not None:
        value = arg
    else:
        env = os.environ.get("CENSADD_THREADS")
        if env is None:
            return 1
        try:
            value = int(env)
        except ValueError:
            raise InputError(f"CENSADD_THREADS must be an integer, got {env!r}") from None
    if value < 1:
        raise InputError("thread count must be at least 1")
    return value


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"cannot serialize {type(v).__name__}")


def cmd_fit(args) -> int:
    if args.data is None:
        raise InputError("fit needs --data")
    cfg = load_config(args.config, FIT_SCHEMA)
    sample = read_sample(args.data)
    settings = settings_from_config(cfg)
    for key, size in (("q", len(settings.qs or [])), ("grids", len(settings.grids or []))):
        if key in cfg and size != sample.d:
            raise InputError(f"config '{key}' has {size} entries but the data has d = {sample.d}")
    if settings.h is not None and len(settings.h) not in (1, sample.d):
        raise InputError(f"config 'h' has {len(settings.h)} entries but the data has d = {sample.d}")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        fit, surface = fit_additive(sample, settings)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    out = _out_dir(args)
    (out / "bands.csv").write_text(fit.to_csv())
    doc = fit.to_dict()
    doc["diagnostics"]["runtime_warnings"] = sorted({str(w.message) for w in caught})
    (out / "fit.json").write_text(_dump(doc))
    if "surface_points" in cfg:
        pts = np.asarray(cfg["surface_points"], dtype=float).reshape(-1, sample.d)
        vals = np.atleast_1d(surface(pts))
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([f"x{j + 1}" for j in range(sample.d)] + ["m_tilde"])
        for p, v in zip(pts, vals):
            writer.writerow([f"{c:.17g}" for c in p] + [f"{v:.17g}"])
        (out / "surface.csv").write_text(buf.getvalue())
    print(f"wrote {out / 'bands.csv'} and {out / 'fit.json'}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = load_config(args.config, SIMULATE_SCHEMA)
    n = args.n if args.n is not None else cfg.get("n", 1000)
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    if n < 1:
        raise InputError("n must be positive")
    sample = generate(paper_dgp(seed), n)
    out = _out_dir(args)
    (out / "sample.csv").write_text(write_sample(sample))
    rate = float(sample.delta.mean())
    print(f"n={n} seed={seed} uncensored fraction P(delta=1)={rate:.4f}")
    return EXIT_OK


def cmd_study(args) -> int:
    cfg = load_config(args.config, STUDY_SCHEMA)
    n = args.n if args.n is not None else cfg.get("n", 1000)
    reps = args.replicates if args.replicates is not None else cfg.get("replicates", 500)
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    if n < 10 or reps < 1:
        raise InputError("need n >= 10 and at least one replicate")
    probes = [(int(a) - 1, float(x)) for a, x in cfg.get("probes", [[1, 0.0]])]
    if any(a > 1 for a, _ in probes):
        raise InputError("probe axes must be 1 or 2 for the built-in model")
    config = study_config_from(cfg)
    result = run_study(paper_dgp(seed), n, reps, probes, config, master_seed=seed, threads=_threads(args.threads))
    out = _out_dir(args)
    summary = result.summary()
    summary["config"] = config.to_dict()
    summary["seed"] = seed
    (out / "study.json").write_text(_dump(summary))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["replicate", "axis", "x", "eta_hat", "sigma_used", "standardized", "covered"])
    for r in range(result.replicates):
        for j, (a, x) in enumerate(result.probes):
            writer.writerow(
                [r, a + 1, f"{x:.17g}", f"{result.eta_hat[r, j]:.17g}", f"{result.sigma_used[r, j]:.17g}",
                 f"{result.standardized[r, j]:.17g}", int(result.covered[r, j])]
            )
    (out / "replicates.csv").write_text(buf.getvalue())
    for p in summary["probes"]:
        print(
            f"axis {p['axis']} x={p['x']:g}: coverage={p['coverage']} mean={p['mean_stat']} "
            f"var={p['var_stat']} ks={p['ks_distance']}"
        )
    return EXIT_OK


def cmd_reproduce_figure(args) -> int:
    n = args.n if args.n is not None else 1000
    seed = args.seed if args.seed is not None else 1
    fit = reproduce_figure(n=n, seed=seed)
    out = _out_dir(args)
    (out / "bands.csv").write_text(fit.to_csv())
    (out / "fit.json").write_text(_dump(fit.to_dict()))
    print(f"n={n} seed={seed} uncensored fraction P(delta=1)={fit.diagnostics['uncensored_fraction']:.4f}")
    print(f"wrote {out / 'bands.csv'} and {out / 'fit.json'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="censadd", description="Additive regression under right censoring.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, data=False):
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--seed", type=int)
        p.add_argument("--n", type=int)
        p.add_argument("--replicates", type=int)
        p.add_argument("--out-dir", default=".", help="directory for output files")
        p.add_argument("--threads", type=int, help="worker threads (default: $CENSADD_THREADS or 1)")
        if data:
            p.add_argument("--data", help="CSV with columns z,delta,x1..xd")

    common(sub.add_parser("fit", help="fit bands to a censored data set"), data=True)
    common(sub.add_parser("simulate", help="draw a sample from the built-in model"))
    common(sub.add_parser("study", help="Monte Carlo study of the normal approximation"))
    common(sub.add_parser("reproduce-figure", help="band table for the built-in model at n=1000"))
    return parser


_COMMANDS = {
    "fit": cmd_fit,
    "simulate": cmd_simulate,
    "study": cmd_study,
    "reproduce-figure": cmd_reproduce_figure,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _threads(args.threads)
        return _COMMANDS[args.command](args)
    except (FloatingPointError, ZeroDivisionError, np.linalg.LinAlgError, OverflowError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (InputError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
