"""Command-line entry point.

Every subcommand prints one document (JSON by default, or CSV) carrying a
``schema_version`` field.  Exit status: 0 success, 1 a check failed, 2 usage
error, 3 data error (unreadable dataset or cache).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .eisenstein import eisenstein_eval, phi_scatter
from .geometry import Point, reduce_fund_domain
from .greens import make_handle
from .maass import MaassDataError, critical_zero_scan, default_dataset_path, evaluate_s_alpha, find_small_eigenvalues, load_maass_dataset
from .orbits import CacheError, cached_orbits
from .residues import SyntheticSpectralFunction, run_random_suite, verify_resonance_lemma, verify_truncated_formula
from .trace import TraceParams, choose_sigma, geometric_identity_check, trace_report
from .transforms import make_test_function

SCHEMA_VERSION = 1
CACHE_ENV = "POINT_SCATTERER_CACHE"
EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_DATA = 0, 1, 2, 3
COMMANDS = ("orbits", "spectral", "eisenstein", "eigenvalues", "geometric-check", "synthetic-check", "trace-report")


class UsageError(ValueError):
    pass


class DataError(RuntimeError):
    pass


@dataclass
class RunConfig:
    z0: tuple = (0.0, 2.0)
    alpha: float = 1.0
    sigma: float | None = None
    radius: float = 10.0
    kmax: int = 6
    width: float = 1.0
    maass_data: str | None = "default"
    cache_dir: str | None = None
    format: str = "json"
    tolerance: float = 1e-8
    seed: int = 0
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["alpha"] = _alpha_text(self.alpha)
        d["z0"] = list(self.z0)
        d.pop("extra")
        return d


CONFIG_KEYS = {f.name for f in fields(RunConfig)} - {"extra"}


def _alpha_text(a: float):
    return ("inf" if a > 0 else "-inf") if math.isinf(a) else a


def parse_alpha(text) -> float:
    if isinstance(text, (int, float)):
        val = float(text)
    else:
        t = str(text).strip().lower()
        if t in ("inf", "+inf", "infinity", "+infinity"):
            return math.inf
        if t in ("-inf", "-infinity"):
            return -math.inf
        try:
            val = float(t)
        except ValueError as exc:
            raise UsageError(f"alpha must be a real number or 'inf', got {text!r}") from exc
    if math.isnan(val) or val == 0.0:
        raise UsageError("alpha must be nonzero and not NaN")
    return val


def _common_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="JSON file with RunConfig keys; flags take precedence")
    p.add_argument("--z0", nargs=2, type=float, metavar=("X", "Y"), help="base point (default 0 2)")
    p.add_argument("--alpha", help="coupling, a nonzero real or 'inf' (default 1)")
    p.add_argument("--sigma", type=float, help="integration line Im rho = -sigma (default: chosen from the ladder)")
    p.add_argument("--radius", "-R", type=float, help="orbit-table radius (default 10)")
    p.add_argument("--kmax", "-K", type=int, help="diffractive series order (default 6)")
    p.add_argument("--width", "-a", type=float, help="Gaussian test-function width a (default 1)")
    p.add_argument("--maass-data", help="Maass dataset JSON, or 'none' (default: bundled dataset)")
    p.add_argument("--cache-dir", help=f"orbit cache directory (default: ${CACHE_ENV} or ~/.cache/point_scatterer)")
    p.add_argument("--format", choices=("json", "csv"))
    p.add_argument("--tolerance", type=float, help="pass threshold for residual checks (default 1e-8)")
    p.add_argument("--seed", type=int, help="seed for randomized suites (default 0)")
    p.add_argument("--output", "-o", help="write to this file instead of stdout")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="point-scatterer", description="Point scatterer on the modular surface: spectral function, trace formula checks.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("orbits", parents=[common], help="orbit table of the base point")
    sp = sub.add_parser("spectral", parents=[common], help="spectral function on a grid")
    sp.add_argument("--real-range", nargs=3, type=float, metavar=("S0", "S1", "N"), default=(1.1, 3.0, 20))
    sp.add_argument("--critical-range", nargs=3, type=float, metavar=("R0", "R1", "N"), help="also sample s = 1/2 + ir (needs a dataset)")
    ep = sub.add_parser("eisenstein", parents=[common], help="Eisenstein values and functional-equation residuals")
    ep.add_argument("--s", nargs="+", type=complex, default=[1.3 + 2.0j, 0.7 + 5.0j, 2.0 + 0.5j, 0.5 + 3.0j])
    gp = sub.add_parser("eigenvalues", parents=[common], help="small perturbed eigenvalues and critical-line scan")
    gp.add_argument("--v-max", type=float, default=4.0)
    sub.add_parser("geometric-check", parents=[common], help="log-derivative route versus diffractive route")
    yp = sub.add_parser("synthetic-check", parents=[common], help="residue identities on planted spectra")
    yp.add_argument("--count", type=int, default=100)
    sub.add_parser("trace-report", parents=[common], help="both sides of the trace formula")
    return parser


def parse_config(argv, parser: argparse.ArgumentParser | None = None) -> tuple[str, RunConfig, argparse.Namespace]:
    """Defaults, then the config file, then flags."""
    parser = parser or build_parser()
    ns = parser.parse_args(argv)
    values: dict = {}
    if ns.config:
        try:
            payload = json.loads(Path(ns.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config file {ns.config}: {exc}") from exc
        if not isinstance(payload, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = set(payload) - CONFIG_KEYS
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        values.update(payload)
    for key in CONFIG_KEYS:
        flag = getattr(ns, key, None)
        if flag is not None:
            values[key] = flag
    cfg = RunConfig()
    try:
        if "z0" in values:
            z = values["z0"]
            if len(z) != 2:
                raise UsageError("z0 needs two numbers")
            cfg.z0 = (float(z[0]), float(z[1]))
        if "alpha" in values:
            cfg.alpha = parse_alpha(values["alpha"])
        for key, conv in (("sigma", float), ("radius", float), ("kmax", int), ("width", float), ("tolerance", float), ("seed", int)):
            if values.get(key) is not None:
                setattr(cfg, key, conv(values[key]))
        for key in ("maass_data", "cache_dir", "format"):
            if key in values:
                setattr(cfg, key, values[key])
    except (TypeError, ValueError) as exc:
        if isinstance(exc, UsageError):
            raise
        raise UsageError(f"malformed configuration value: {exc}") from exc
    _validate(cfg)
    return ns.command, cfg, ns


def _validate(cfg: RunConfig) -> None:
    if not (cfg.z0[1] > 0 and all(math.isfinite(v) for v in cfg.z0)):
        raise UsageError("z0 must have a positive finite imaginary part")
    if not (cfg.radius > 0 and math.isfinite(cfg.radius)):
        raise UsageError("radius must be positive")
    if cfg.kmax < 1:
        raise UsageError("kmax must be at least 1")
    if not cfg.width > 0:
        raise UsageError("width must be positive")
    if cfg.sigma is not None and not cfg.sigma > 0.5:
        raise UsageError("sigma must exceed 1/2")
    if cfg.format not in ("json", "csv"):
        raise UsageError("format must be json or csv")
    if not cfg.tolerance > 0:
        raise UsageError("tolerance must be positive")


def resolve_cache_dir(cfg: RunConfig) -> Path:
    if cfg.cache_dir:
        return Path(cfg.cache_dir)
    env = os.environ.get(CACHE_ENV)
    if env:
        return Path(env)
    base = os.environ.get("XDG_CACHE_HOME") or str(Path.home() / ".cache")
    return Path(base) / "point_scatterer"


def _load_dataset(cfg: RunConfig, required: bool = False):
    spec = cfg.maass_data
    if spec is None or str(spec).lower() == "none":
        if required:
            raise DataError("this command needs a Maass dataset")
        return None
    path = default_dataset_path() if spec == "default" else Path(spec)
    if spec == "default" and not path.exists():
        if required:
            raise DataError(f"no Maass dataset at {path}")
        return None
    try:
        return load_maass_dataset(path)
    except (OSError, MaassDataError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot load Maass dataset {path}: {exc}") from exc


def _reduced(cfg: RunConfig):
    z_in = Point(*cfg.z0)
    z, g = reduce_fund_domain(z_in)
    info = {"z0_input": list(cfg.z0), "z0_reduced": [z.x, z.y], "reduction": list(g.as_tuple())}
    return z, info


def _table(cfg: RunConfig, z: Point):
    try:
        table, hit = cached_orbits(z, cfg.radius, resolve_cache_dir(cfg))
    except CacheError as exc:
        raise DataError(str(exc)) from exc
    print(f"orbit table: {len(table)} elements ({'cache' if hit else 'computed'})", file=sys.stderr)
    return table


def _c(z: complex) -> dict:
    return {"re": float(np.real(z)), "im": float(np.imag(z))}


# ------------------------------------------------------------- subcommands


def cmd_orbits(cfg, ns):
    z, info = _reduced(cfg)
    table = _table(cfg, z)
    rows = [{"a": int(e[0]), "b": int(e[1]), "c": int(e[2]), "d": int(e[3]), "length": float(l)} for e, l in zip(table.entries, table.lengths)]
    result = {**info, "radius": cfg.radius, "count": len(table), "stabilizer_order": table.stabilizer_order}
    return EXIT_OK, result, rows


def cmd_spectral(cfg, ns):
    z, info = _reduced(cfg)
    dataset = _load_dataset(cfg)
    handle = make_handle(z, cfg.alpha, _table(cfg, z), dataset=dataset)
    rows = []
    s0, s1, n = ns.real_range
    for s in np.linspace(s0, s1, int(n)):
        val, err = evaluate_s_alpha(handle, complex(s))
        rows.append({"s_re": float(s), "s_im": 0.0, "S_re": val.real, "S_im": val.imag, "error": err, "error_is_estimate": True})
    if ns.critical_range is not None:
        if dataset is None:
            raise DataError("--critical-range needs a Maass dataset")
        r0, r1, m = ns.critical_range
        for r in np.linspace(r0, r1, int(m)):
            val, err = evaluate_s_alpha(handle, 0.5 + 1j * r)
            rows.append({"s_re": 0.5, "s_im": float(r), "S_re": val.real, "S_im": val.imag, "error": err, "error_is_estimate": True})
    result = {**info, "beta": handle.beta, "c0": handle.c0, "m": handle.m, "dataset_digest": dataset.digest if dataset else None}
    return EXIT_OK, result, rows


def cmd_eisenstein(cfg, ns):
    z, info = _reduced(cfg)
    rows, worst = [], 0.0
    for s in ns.s:
        e1 = eisenstein_eval(z, s)
        e2 = eisenstein_eval(z, 1 - s)
        res = abs(e1.value - phi_scatter(s) * e2.value)
        worst = max(worst, res)
        rows.append({"s_re": s.real, "s_im": s.imag, "E_re": e1.value.real, "E_im": e1.value.imag, "tail_bound": e1.tail_bound, "fe_residual": res})
    status = EXIT_OK if worst < cfg.tolerance else EXIT_CHECK
    return status, {**info, "max_fe_residual": worst, "tolerance": cfg.tolerance}, rows


def cmd_eigenvalues(cfg, ns):
    z, info = _reduced(cfg)
    dataset = _load_dataset(cfg)
    handle = make_handle(z, cfg.alpha, _table(cfg, z), dataset=dataset)
    lo = 1e-3 if dataset is not None else 0.5 + 1e-3
    roots = find_small_eigenvalues(handle, v_range=(lo, ns.v_max), grid=400)
    rows = [{"v": r.v, "s": r.s, "eigenvalue": r.eigenvalue, "bracket_lo": r.bracket[0], "bracket_hi": r.bracket[1], "abs_S": r.residual} for r in roots]
    ok = all(r.residual < 1e-10 and r.bracket[0] <= r.v <= r.bracket[1] for r in roots)
    scan = critical_zero_scan(handle, (0.1, 15.0), dataset) if dataset is not None else "unavailable"
    result = {**info, "v_range": [lo, ns.v_max], "roots": len(roots), "critical_zero_scan": scan}
    return (EXIT_OK if ok else EXIT_CHECK), result, rows


def cmd_geometric(cfg, ns):
    z, info = _reduced(cfg)
    handle = make_handle(z, cfg.alpha, _table(cfg, z))
    h = make_test_function(cfg.width)
    sigma = cfg.sigma if cfg.sigma is not None else choose_sigma(handle).sigma
    chk = geometric_identity_check(h, handle, sigma, None, cfg.kmax, None)
    ok = chk.residual < max(1e-4, chk.budget)
    return (EXIT_OK if ok else EXIT_CHECK), {**info, **chk.to_dict()}, None


def _synthetic_cases():
    S_lemma = SyntheticSpectralFunction(
        zeros=((1.3 + 0.4j, 1), (-0.7 + 0.2j, 1), (-0.9j, 1)),
        poles=((2.1 + 0.5j, 1), (-0.5j, 1), (-1.7 + 0.3j, 2)),
        exp_coeffs=(0.1, 0.2j, 0.05),
    )
    S_trunc = SyntheticSpectralFunction(
        zeros=((2.0, 1), (-2.0, 1), (-0.8j, 1), (0.5 + 0.6j, 1)),
        poles=((2.5, 1), (-2.5, 1), (-0.5j, 1), (0.0, 2)),
        exp_coeffs=(0.3, 0.0, 0.02),
    )
    return S_lemma, S_trunc


def cmd_synthetic(cfg, ns):
    h = make_test_function(cfg.width)
    reps = run_random_suite(h, seed=cfg.seed, count=ns.count)
    S_lemma, S_trunc = _synthetic_cases()
    lemma = verify_resonance_lemma(S_lemma, h, 1.5, 4.0)
    trunc = verify_truncated_formula(S_trunc, h, 1.2, 5.0)
    worst = max([r.residual for r in reps] + [lemma.residual, trunc.residual])
    windings = all(r.parts["winding_expected"] == r.parts["winding_tracked"] for r in reps)
    rows = [{"case": f"random-{i}", "residual": r.residual, "winding": r.parts["winding_tracked"]} for i, r in enumerate(reps)]
    rows += [{"case": "resonance-lemma", "residual": lemma.residual, "winding": ""}, {"case": "truncated-formula", "residual": trunc.residual, "winding": ""}]
    result = {
        "seed": cfg.seed,
        "count": ns.count,
        "max_residual": worst,
        "windings_consistent": windings,
        "resonance_lemma": lemma.to_dict(),
        "truncated_formula": trunc.to_dict(),
        "tolerance": cfg.tolerance,
    }
    ok = worst < cfg.tolerance and windings
    return (EXIT_OK if ok else EXIT_CHECK), result, rows


def cmd_trace(cfg, ns):
    z, info = _reduced(cfg)
    dataset = _load_dataset(cfg)
    handle = make_handle(z, cfg.alpha, _table(cfg, z), dataset=dataset)
    h = make_test_function(cfg.width)
    rep = trace_report(h, handle, dataset, TraceParams(sigma=cfg.sigma, K=cfg.kmax))
    status = EXIT_OK if rep.within_budget in (True, None) else EXIT_CHECK
    return status, {**info, **rep.to_dict()}, None


HANDLERS = {
    "orbits": cmd_orbits,
    "spectral": cmd_spectral,
    "eisenstein": cmd_eisenstein,
    "eigenvalues": cmd_eigenvalues,
    "geometric-check": cmd_geometric,
    "synthetic-check": cmd_synthetic,
    "trace-report": cmd_trace,
}


def _flatten(prefix: str, obj, out: list):
    if isinstance(obj, dict):
        for k in sorted(obj):
            _flatten(f"{prefix}.{k}" if prefix else str(k), obj[k], out)
    elif isinstance(obj, (list, tuple)) and obj and all(isinstance(v, (dict, list, tuple)) for v in obj):
        for i, v in enumerate(obj):
            _flatten(f"{prefix}.{i}", v, out)
    else:
        out.append((prefix, json.dumps(obj) if isinstance(obj, (list, tuple)) else obj))


def render(command: str, cfg: RunConfig, result: dict, rows, fmt: str) -> str:
    doc = {"schema_version": SCHEMA_VERSION, "command": command, "version": __version__, "config": cfg.to_dict(), "result": result}
    if rows is not None:
        doc["rows"] = rows
    if fmt == "json":
        return json.dumps(doc, indent=1, sort_keys=True, default=_json_default) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if rows:
        keys = list(rows[0].keys())
        writer.writerow(["schema_version", *keys])
        for r in rows:
            writer.writerow([SCHEMA_VERSION, *[r[k] for k in keys]])
    else:
        flat: list = []
        _flatten("", json.loads(json.dumps(result, default=_json_default)), flat)
        writer.writerow(["schema_version", "key", "value"])
        writer.writerow([SCHEMA_VERSION, "command", command])
        for k, v in flat:
            writer.writerow([SCHEMA_VERSION, k, v])
    return buf.getvalue()


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, complex):
        return _c(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, float) and math.isinf(o):
        return str(o)
    raise TypeError(f"cannot serialize {type(o)}")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        command, cfg, ns = parse_config(argv, parser)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # argparse usage errors and --help
        return int(exc.code or 0)
    try:
        status, result, rows = HANDLERS[command](cfg, ns)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    text = render(command, cfg, result, rows, cfg.format)
    if ns.output:
        Path(ns.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if status != EXIT_OK:
        print(f"{command}: check failed", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
