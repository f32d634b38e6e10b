"""Command-line interface: evaluate tradeoff curves and bounds, write CSV or JSON.

Every output starts with a comment line carrying a hash of the run
configuration, the seed and the package version, followed by a header row.
Exit codes: 0 success, 2 configuration or input error, 3 when at least one
row did not converge (the rows are still written, flagged converged=false).
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import NoConvergence, RDCacheError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NOT_CONVERGED = 3


class ConfigProblem(Exception):
    pass


# argument parsing -----------------------------------------------------------------


def parse_grid(text: str) -> list:
    """``start:stop:steps`` (steps points, inclusive) or a comma list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigProblem(f"grid {text!r} must look like start:stop:steps")
        start, stop, steps = float(parts[0]), float(parts[1]), int(parts[2])
        if steps < 1:
            raise ConfigProblem("grid needs steps >= 1")
        if steps == 1:
            return [start]
        return [float(v) for v in np.linspace(start, stop, steps)]
    return parse_list(text)


def parse_list(text: str) -> list:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigProblem(f"could not parse number list {text!r}") from None
    if not vals:
        raise ConfigProblem("empty number list")
    return vals


def parse_indices(text: str) -> list:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigProblem(f"could not parse index list {text!r}") from None


def _add_common(p, solver=False):
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", help="output path (default stdout)")
    p.add_argument("--seed", type=int, default=0)
    if solver:
        p.add_argument("--restarts", type=int, default=20)
        p.add_argument("--aux-cap", type=int, default=None)
        p.add_argument("--grid-steps", type=int, default=16)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rdcache", description="Rate-distortion-cache tradeoffs and bounds.")
    parser.add_argument("--version", action="version", version=f"rdcache {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rd", help="rate-distortion function of one source")
    p.add_argument("--spec", required=True)
    p.add_argument("--source", type=int, default=0, help="0-based source index")
    p.add_argument("--D", required=True, help="list or start:stop:steps")
    _add_common(p)

    p = sub.add_parser("rdc", help="tradeoff curve with genie, superuser and super-genie bounds")
    p.add_argument("--spec", required=True)
    p.add_argument("--D", required=True, help="one target, or one per source")
    p.add_argument("--C-grid", required=True)
    _add_common(p, solver=True)

    p = sub.add_parser("common-info", help="Gacs-Korner and Wyner common information")
    p.add_argument("--spec", required=True)
    _add_common(p)

    p = sub.add_parser("dsbs", help="closed-form bounds for the doubly symmetric binary source")
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--C-grid", required=True)
    _add_common(p)

    p = sub.add_parser("gaussian", help="bivariate Gaussian regions, rates and lower bounds")
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--D", required=True, help="list or start:stop:steps")
    p.add_argument("--C", required=True, help="list of cache sizes")
    _add_common(p)

    p = sub.add_parser("two-user", help="two-user upper and lower bounds")
    p.add_argument("--spec", required=True)
    p.add_argument("--demands1", default=None, help="user-1 demand indices (default all)")
    p.add_argument("--demands2", default=None, help="user-2 demand indices (default all)")
    p.add_argument("--D", required=True, help="user-1 targets")
    p.add_argument("--Delta", default="0", help="user-2 targets")
    p.add_argument("--C-grid", required=True)
    p.add_argument("--p-I", default=None, help="user-2 demand pmf for the average bound (default uniform)")
    p.add_argument("--aux-size", type=int, default=2)
    _add_common(p, solver=True)
    return parser


# output -----------------------------------------------------------------------------


def config_hash(args, spec_text: str | None) -> str:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("out", "format")}
    blob = json.dumps({"config": cfg, "spec": spec_text}, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _cell(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if v is None:
        return ""
    return str(v)


def render(rows, columns, meta, fmt) -> str:
    if fmt == "json":
        clean = [{c: _json_value(r.get(c)) for c in columns} for r in rows]
        return json.dumps({"meta": meta, "columns": columns, "rows": clean}, indent=2) + "\n"
    buf = io.StringIO()
    buf.write("# " + " ".join(f"{k}={meta[k]}" for k in sorted(meta)) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([_cell(r.get(c)) for c in columns])
    return buf.getvalue()


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, np.generic):
        return v.item()
    return v


# commands ---------------------------------------------------------------------------


def _load(path):
    from .source_model import spec_from_dict

    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigProblem(f"spec {path} is not valid JSON: {exc}") from None
    return raw, text, spec_from_dict


def _library(path):
    raw, text, spec_from_dict = _load(path)
    lib, transforms = spec_from_dict(raw)
    return lib, transforms, text


def cmd_rd(args):
    from .it_core import marginal_rd

    lib, transforms, text = _library(args.spec)
    if not 0 <= args.source < lib.L:
        raise ConfigProblem(f"source index {args.source} not within 0..{lib.L - 1}")
    rows = []
    for D in parse_grid(args.D):
        try:
            res = marginal_rd(lib, args.source, D)
            rows.append({"D": D, "R": res.rate, "converged": res.converged})
        except NoConvergence:
            rows.append({"D": D, "R": float("nan"), "converged": False})
    return rows, ["D", "R", "converged"], text


def _solver_opts(args):
    opts = {"seed": args.seed, "restarts": args.restarts}
    if args.aux_cap is not None:
        opts["aux_cap"] = args.aux_cap
    return opts


def cmd_rdc(args):
    from .f_separable import transformed_library, transformed_targets
    from .rdc_solver import rdc_curve
    from .source_model import as_distortions

    lib, transforms, text = _library(args.spec)
    D = as_distortions(_targets(args.D, lib.L), lib.L)
    target = D
    if transforms is not None:
        lib = transformed_library(lib, transforms)
        target = transformed_targets(transforms, D)
    curve = rdc_curve(lib, target, parse_grid(args.C_grid), **_solver_opts(args))
    rows = curve.rows()
    columns = [
        "C", "R_solver", "R_genie", "R_superuser", "R_supergenie", "R_envelope", "witness_aux_size", "converged",
    ]
    return rows, columns, text


def _targets(text, L):
    vals = parse_list(text)
    if len(vals) == 1:
        return vals * L
    if len(vals) != L:
        raise ConfigProblem(f"expected 1 or {L} targets, got {len(vals)}")
    return vals


def _dsbs_rho(lib):
    """Crossover of a DSBS library with Hamming distortions, or None."""
    if lib.alphabet_sizes != (2, 2) or not lib.is_hamming():
        return None
    p = lib.pmf
    if abs(p[0] - p[3]) > 1e-12 or abs(p[1] - p[2]) > 1e-12 or p[1] > p[0] + 1e-12:
        return None
    return float(2.0 * p[1])


def cmd_common_info(args):
    from .common_info import gacs_korner_zero, wyner_ci_dsbs, wyner_ci_gaussian

    raw, text, spec_from_dict = _load(args.spec)
    if "gaussian_rho" in raw:
        rho = float(raw["gaussian_rho"])
        return [{"quantity": "wyner_gaussian", "value": wyner_ci_gaussian(rho), "detail": f"rho={rho!r}"}], [
            "quantity", "value", "detail",
        ], text
    lib, _ = spec_from_dict(raw)
    res = gacs_korner_zero(lib)
    rows = [{"quantity": "gacs_korner_zero", "value": res.value, "detail": f"components={res.n_components}"}]
    for ell, m in enumerate(res.witness):
        rows.append({"quantity": f"component_map_{ell}", "value": None, "detail": " ".join(str(int(v)) for v in m)})
    rho = _dsbs_rho(lib)
    if rho is not None:
        rows.append({"quantity": "wyner_dsbs", "value": wyner_ci_dsbs(rho), "detail": f"rho={rho!r}"})
    return rows, ["quantity", "value", "detail"], text


def cmd_dsbs(args):
    from .closed_forms import dsbs_rdc_bounds

    rows = []
    for C in parse_grid(args.C_grid):
        b = dsbs_rdc_bounds(args.rho, C)
        rows.append({"C": C, "lower": b.lower, "upper": b.upper, "exact": b.exact})
    return rows, ["C", "lower", "upper", "exact"], None


def cmd_gaussian(args):
    from .closed_forms import bivariate_gaussian_rdc, gaussian_superuser_lower

    cov = np.array([[1.0, args.rho], [args.rho, 1.0]])
    rows = []
    for D in parse_grid(args.D):
        for C in parse_list(args.C):
            rate, region = bivariate_gaussian_rdc(args.rho, D, C)
            low = gaussian_superuser_lower(cov, D, C)
            rows.append(
                {
                    "D": D,
                    "C": C,
                    "region": region.tag,
                    "exact": region.exact,
                    "rate_or_upper": rate,
                    "superuser_lower": low.value,
                }
            )
    return rows, ["D", "C", "region", "exact", "rate_or_upper", "superuser_lower"], None


def cmd_two_user(args):
    from .two_user import (
        TwoUserInstance,
        two_user_avg_lower,
        two_user_dsbs_bounds,
        two_user_lower_genie,
        two_user_upper,
    )

    lib, transforms, text = _library(args.spec)
    if transforms is not None:
        raise ConfigProblem("two-user bounds take plain distortions; drop the 'f' entries")
    d1 = parse_indices(args.demands1) if args.demands1 else list(range(lib.L))
    d2 = parse_indices(args.demands2) if args.demands2 else list(range(lib.L))
    D = _targets(args.D, lib.L)
    Delta = _targets(args.Delta, lib.L)
    lossless2 = all(Delta[l] == 0 for l in d2)
    p_I = parse_list(args.p_I) if args.p_I else [1.0 / len(set(d2))] * len(set(d2))
    rho = _dsbs_rho(lib)
    dsbs = rho is not None and sorted(set(d1)) == [0, 1] and sorted(set(d2)) == [0, 1] and lossless2 and D[0] == D[1]
    columns = ["C", "lower_genie", "lower_avg", "upper", "converged"]
    if dsbs:
        columns += ["dsbs_lower", "dsbs_upper"]
    rows = []
    for C in parse_grid(args.C_grid):
        inst = TwoUserInstance(lib, d1, d2, D, Delta, C)
        row = {"C": C, "converged": True}
        try:
            row["lower_genie"] = two_user_lower_genie(inst).value
            row["lower_avg"] = two_user_avg_lower(inst, p_I).value if lossless2 else None
        except NoConvergence:
            row.update(lower_genie=float("nan"), converged=False)
        row["upper"] = two_user_upper(inst, grid_steps=args.grid_steps, aux_size=args.aux_size).value
        if dsbs:
            row["dsbs_lower"], row["dsbs_upper"] = two_user_dsbs_bounds(rho, D[0], C)
        rows.append(row)
    return rows, columns, text


COMMANDS = {
    "rd": cmd_rd,
    "rdc": cmd_rdc,
    "common-info": cmd_common_info,
    "dsbs": cmd_dsbs,
    "gaussian": cmd_gaussian,
    "two-user": cmd_two_user,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else EXIT_OK
    try:
        rows, columns, spec_text = COMMANDS[args.command](args)
    except (ConfigProblem, RDCacheError, OSError, KeyError, ValueError) as exc:
        print(f"rdcache: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    meta = {
        "command": args.command,
        "config_hash": config_hash(args, spec_text),
        "seed": args.seed,
        "version": __version__,
    }
    text = render(rows, columns, meta, args.format)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if any(r.get("converged") is False for r in rows):
        return EXIT_NOT_CONVERGED
    return EXIT_OK
