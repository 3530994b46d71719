"""Command-line front end: constants, identities, verify-expansion, critical, lemmas, energy, validate.

Exit status is 0 when every check in the emitted report passes, 1 when a check
fails and 2 on usage or input errors. With --out, the report goes to that file and
a run manifest is written next to it as <out>.manifest.json.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .config import (AsymptoticRegime, CurvatureModel, configuration_to_dict, gen_circle_configuration,
                     load_configuration, validate_configuration)
from .constants import build_table, check_identities
from .functionals import energy
from .lemmas import lemma_suite
from .quadrature import QuadratureSpec
from .reduced import FAMILIES, fit_expansion
from .solver import balance_scale, find_critical

DEFAULT_SAMPLES = {
    "interaction-vs-d": (10.0, 30.0, 100.0, 300.0, 1000.0),
    "curvature-vs-lambda": (1e-5, 3e-5, 1e-4, 3e-4, 1e-3),
    "curvature-vs-eta": (1e-6, 3e-6, 1e-5, 3e-5, 1e-4),
}
DEFAULT_LEMMA_PARAMS = {"separation": {"alpha": 2.0, "beta": 2.0, "sigma": 2.0},
                        "condensation": {"varsigma": 3.0}, "downgrade": {"kappa": 0.5}}


class UsageError(Exception):
    pass


@dataclass
class RunManifest:
    command: str
    argv: list
    config: str | None
    spec_overrides: dict
    seed: int | None
    outputs: list = field(default_factory=list)
    exit_status: int = 0

    def write(self, path: Path) -> None:
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def _render(rows: list[dict], doc: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"
    buf = io.StringIO()
    if rows:
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in _jsonable(r).items()})
    return buf.getvalue()


def _require_seed(args):
    if args.seed is None:
        raise UsageError(f"{args.command} is randomized and needs an explicit --seed")


def _load(args):
    if not args.config:
        raise UsageError(f"{args.command} needs --config")
    return load_configuration(args.config)


def cmd_constants(args):
    t = build_table(args.n, args.ell)
    rows = [{"name": k, "value": v, "provenance": p} for k, v, p in t.rows()]
    return rows, t.to_dict(), True, {}


def cmd_identities(args):
    rep = check_identities(args.n, args.ell, tol=args.tol if args.tol is not None else 1e-8)
    rows = [{"name": c.name, "lhs": c.lhs, "rhs": c.rhs, "deviation": c.deviation, "tol": c.tol,
             "passed": c.passed} for c in rep.checks]
    return rows, rep.to_dict(), rep.passed, {}


def cmd_verify_expansion(args):
    families = [args.family] if args.family else list(FAMILIES)
    fits = []
    for fam in families:
        lam = 1e-3 if fam == "curvature-vs-eta" else 1e-2
        fits.append(fit_expansion(fam, DEFAULT_SAMPLES[fam], n=args.n, ell=args.ell, lam=lam))
    rows = [f.row() for f in fits]
    return rows, {"fits": rows}, all(f.passes for f in fits), {}


def cmd_critical(args):
    if args.config:
        cfg, model = load_configuration(args.config)
        if model is None:
            raise UsageError("critical needs a curvature model in the configuration file")
    else:
        ell = args.ell
        model = CurvatureModel("sphere", ell, 1.0)
        table = build_table(args.n, ell)
        lam0 = 1.5 * balance_scale(args.flat, model, table)
        cfg = gen_circle_configuration(args.flat, lam0, n=args.n, regime=AsymptoticRegime(ell=ell, sigma=0.45))
    table = build_table(cfg.n, model.ell)
    res = find_critical(cfg, model, table, tol=args.tol if args.tol is not None else 1e-12,
                        max_iter=args.max_iter, symmetry=args.symmetry)
    doc = res.to_dict()
    doc["configuration"] = configuration_to_dict(res.configuration, model)
    rows = [{"iteration": i, "residual_norm": r} for i, r in enumerate(res.trace)]
    extra = {}
    if args.out:
        trace_path = Path(str(args.out) + ".trace.csv")
        trace_path.write_text(_render(rows, {}, "csv"))
        extra["trace"] = str(trace_path)
    return rows, doc, res.converged, extra


def cmd_lemmas(args):
    _require_seed(args)
    if args.samples < 1:
        raise UsageError("--samples must be positive")
    params = dict(DEFAULT_LEMMA_PARAMS[args.name])
    for item in args.param or []:
        if "=" not in item:
            raise UsageError(f"--param expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        params[k] = float(v)
    rep = lemma_suite(args.name, params, args.samples, args.seed)
    errs = rep.stderr or (0.0,) * len(rep.sups)
    rows = [{"scale": s, "sup": v, "stderr": e} for s, v, e in zip(rep.scales, rep.sups, errs)]
    return rows, rep.to_dict(), rep.finite and rep.nonincreasing, {}


def cmd_energy(args):
    _require_seed(args)
    cfg, model = _load(args)
    if model is not None:
        # the Monte Carlo samples cover R^n; the model formula is used beyond its tube
        model = replace(model, tube_radius=math.inf)
    mc_spec = QuadratureSpec(mc_samples=args.samples, seed=args.seed)
    rep = energy(cfg, model, mc_spec, stderr_tol=args.tol)
    ok = args.tol is None or rep.metadata["mc_stderr"] <= args.tol
    doc = rep.to_dict()
    rows = [{"quantity": "value", "value": rep.value}, {"quantity": "stderr", "value": rep.metadata["mc_stderr"]},
            {"quantity": "flat_leading_term", "value": (cfg.n - 2) * build_table(cfg.n, cfg.ell).V_n * cfg.flat}]
    return rows, doc, ok, {}


def cmd_validate(args):
    cfg, model = _load(args)
    rep = validate_configuration(cfg, model)
    rows = [{"name": c.name, "measured": c.measured, "bound": c.bound, "passed": c.passed} for c in rep.checks]
    return rows, rep.to_dict(), rep.passed, {}


COMMANDS = {"constants": cmd_constants, "identities": cmd_identities, "verify-expansion": cmd_verify_expansion,
            "critical": cmd_critical, "lemmas": cmd_lemmas, "energy": cmd_energy, "validate": cmd_validate}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="configuration JSON (default: none)")
    common.add_argument("--n", type=int, default=6, help="dimension (default: 6)")
    common.add_argument("--ell", type=float, default=2.0, help="flatness order (default: 2)")
    common.add_argument("--seed", type=int, default=None, help="RNG seed, required by randomized commands")
    common.add_argument("--tol", type=float, default=None, help="check tolerance (default: per command)")
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), default=None,
                        help="report format (default: from the --out suffix, else json)")
    p = argparse.ArgumentParser(prog="bubblelab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("constants", parents=[common], help="table of expansion constants")
    sub.add_parser("identities", parents=[common], help="check the relations between constants")
    ve = sub.add_parser("verify-expansion", parents=[common], help="fit leading power laws of true integrals")
    ve.add_argument("--family", choices=FAMILIES, help="one family (default: all)")
    cr = sub.add_parser("critical", parents=[common], help="solve the reduced critical-point system")
    cr.add_argument("--flat", type=int, default=2, help="bubbles on a circle when no --config (default: 2)")
    cr.add_argument("--symmetry", choices=("circle", "circle_eta0"), default=None,
                    help="solve only for common scale and offset (default: all parameters)")
    cr.add_argument("--max-iter", type=int, default=100, help="Newton iterations (default: 100)")
    le = sub.add_parser("lemmas", parents=[common], help="empirical lemma suites")
    le.add_argument("name", choices=("separation", "condensation", "downgrade"))
    le.add_argument("--samples", type=int, default=10_000, help="sample budget (default: 10000)")
    le.add_argument("--param", action="append", help="key=value suite parameter, repeatable")
    en = sub.add_parser("energy", parents=[common], help="Monte Carlo energy of a plantation")
    en.add_argument("--samples", type=int, default=1_000_000, help="Monte Carlo samples (default: 1e6)")
    sub.add_parser("validate", parents=[common], help="check the standing hypotheses on a configuration")
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    if args.format is None:
        args.format = "csv" if args.out and str(args.out).lower().endswith(".csv") else "json"
    overrides = {k: getattr(args, k) for k in ("n", "ell", "tol", "format") if getattr(args, k, None) is not None}
    manifest = RunManifest(args.command, list(argv if argv is not None else sys.argv[1:]), args.config,
                           overrides, args.seed)
    try:
        rows, doc, ok, extra = COMMANDS[args.command](args)
        status = 0 if ok else 1
    except (UsageError, ValueError, OSError, KeyError, json.JSONDecodeError) as e:
        print(f"bubblelab {args.command}: error: {e}", file=sys.stderr)
        status, rows, doc, extra = 2, [], None, {}
    if doc is not None:
        text = _render(rows, doc, args.format)
        if args.out:
            Path(args.out).write_text(text)
            manifest.outputs.append(str(args.out))
        else:
            sys.stdout.write(text)
    manifest.outputs.extend(extra.values())
    manifest.exit_status = status
    if args.out:
        manifest.write(Path(str(args.out) + ".manifest.json"))
    return status


def main() -> None:
    sys.exit(run())
