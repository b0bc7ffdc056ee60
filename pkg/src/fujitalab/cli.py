"""Command-line entry point: ``fujitalab <subcommand> ...``.

Exit codes: 0 success, 1 numerical failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

from .comparison import PreconditionError, threshold_typeI, threshold_typeII
from .config import ConfigError, RunConfig
from .geometry import DomainError, ManifoldModel
from .grid import ResolutionError
from .heat_kernel import CalibrationError, KernelDataError
from .solver import MonotonicityError, PositivityError
from .spectral import EigenvalueTooLargeError, NotSupersolutionError

EXIT_OK, EXIT_NUMERICAL, EXIT_CONFIG = 0, 1, 2
_NUMERICAL = (PositivityError, MonotonicityError, ResolutionError, CalibrationError, KernelDataError,
              EigenvalueTooLargeError, NotSupersolutionError, FloatingPointError, ArithmeticError)


def _load(path):
    try:
        return RunConfig.from_file(path)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None


def _outdir(cfg, args):
    out = args.out or cfg.output["dir"]
    os.makedirs(out, exist_ok=True)
    return out


def cmd_simulate(args):
    from .sweep import dump_json, run_point, write_summary

    cfg = _load(args.config)
    if cfg.sweep["parameters"]:
        raise ConfigError("simulate takes a single point; use `sweep` for configs with sweep.parameters")
    out = _outdir(cfg, args)
    rec = run_point(cfg, 0, {}, out, sup_plot=cfg.output["svg"])
    names = [f"nonlinearity.{k}" for k in sorted(cfg.nonlinearity) if k != "type"]
    rec.point = {n: cfg.nonlinearity[n.split(".")[1]] for n in names}
    write_summary([rec], names, os.path.join(out, "summary.csv"), timing=cfg.output["timing"])
    dump_json({"config": cfg.to_dict(), "verdict": rec.verdict.to_dict(), "analytic": rec.analytic,
               "agreement": rec.agreement, "sup_final": rec.sup_final}, os.path.join(out, "run.json"))
    print(f"verdict: {rec.verdict}  analytic: {rec.analytic}  agreement: {rec.agreement}")
    return EXIT_NUMERICAL if rec.verdict.reason == "crash" else EXIT_OK


def cmd_sweep(args):
    from .sweep import run_sweep

    cfg = _load(args.config)
    out = _outdir(cfg, args)
    records = run_sweep(cfg, out, workers=args.workers)
    crashed = sum(r.verdict.reason == "crash" for r in records)
    scored = [r for r in records if r.agreement is not None and not r.in_band]
    agree = sum(bool(r.agreement) for r in scored)
    print(f"{len(records)} points, {crashed} crashed, agreement outside band {agree}/{len(scored)}")
    print(f"wrote {os.path.join(out, 'summary.csv')}")
    return EXIT_NUMERICAL if crashed else EXIT_OK


def cmd_kernel_audit(args):
    from .sweep import dump_json, kernel_audit

    cfg = _load(args.config)
    out = _outdir(cfg, args)
    report = kernel_audit(cfg)
    dump_json(report, os.path.join(out, "kernel_audit.json"))
    for key in ("A_n", "B_n", "dispersion", "log_rate", "lambda_star", "log_rate_rel_error",
                "composition_rel_error"):
        if key in report and report[key] is not None:
            print(f"{key}: {report[key]:.6g}")
    return EXIT_OK


def cmd_eigen(args):
    from .sweep import dump_json, eigen_report

    cfg = _load(args.config)
    out = _outdir(cfg, args)
    gs, report = eigen_report(cfg)
    dump_json(report, os.path.join(out, "eigen.json"))
    with open(os.path.join(out, "eigen.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["r", "phi"])
        for r, v in zip(gs.profile.r, gs.profile.values):
            w.writerow([f"{r:.10g}", f"{v:.12g}"])
    for key in ("lambda", "ode_residual_max", "dirichlet_bottom"):
        print(f"{key}: {report[key]:.6g}")
    if report["envelope_constants"]:
        lo, hi = report["envelope_constants"]
        print(f"envelope: [{lo:.6g}, {hi:.6g}] ratio {hi / lo:.4g}")
    return EXIT_OK


_MODEL_KEYS = {"variant": str, "n": int, "kappa": float, "gamma": float, "c_hat": float, "r_max": float}


def parse_params(items):
    """``key=value`` pairs into a dict; numbers are converted."""
    out = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"expected key=value, got {item!r}")
        key, value = item.split("=", 1)
        key = key.strip()
        if key in out:
            raise ConfigError(f"duplicate parameter {key!r}")
        if key in ("variant", "type"):
            out[key] = value.strip()
            continue
        try:
            out[key] = float(value)
        except ValueError:
            raise ConfigError(f"parameter {key!r} must be numeric, got {value!r}") from None
    return out


def cmd_thresholds(args):
    params = parse_params(args.params)
    kind = params.pop("type", None)
    allowed = {"I": {"q", "alpha"}, "II": {"mu", "p", "lambda1"}}
    if kind not in allowed:
        raise ConfigError("thresholds needs type=I or type=II")
    model = {k: params.pop(k) for k in list(params) if k in _MODEL_KEYS}
    extra = set(params) - allowed[kind]
    if extra:
        raise ConfigError(f"unknown parameters for type {kind}: {sorted(extra)}")
    model = {k: _MODEL_KEYS[k](v) for k, v in model.items()}
    model.setdefault("n", 2)
    try:
        m = ManifoldModel(**model)
    except DomainError as exc:
        raise ConfigError(str(exc)) from None
    try:
        if kind == "I":
            v = threshold_typeI(params["q"], params["alpha"], m)
        else:
            v = threshold_typeII(params["mu"], params.get("p", 1.0), m, params.get("lambda1"))
    except KeyError as exc:
        raise ConfigError(f"missing parameter {exc.args[0]!r}") from None
    except PreconditionError as exc:
        raise ConfigError(str(exc)) from None
    print(f"{v.kind}: {v.certificate}")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="fujitalab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn, helptext in (("simulate", cmd_simulate, "run one configuration"),
                               ("sweep", cmd_sweep, "run a parameter sweep"),
                               ("kernel-audit", cmd_kernel_audit, "check the numerical heat kernel"),
                               ("eigen", cmd_eigen, "ground state and bottom of the spectrum")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("config", help="JSON configuration file")
        s.add_argument("--out", help="output directory (overrides output.dir)")
        if name == "sweep":
            s.add_argument("--workers", type=int, default=None, help="worker processes")
        s.set_defaults(func=fn)
    t = sub.add_parser("thresholds", help="analytic threshold verdict, e.g. type=II mu=0.3 p=1 n=2")
    t.add_argument("params", nargs="+", help="key=value pairs")
    t.set_defaults(func=cmd_thresholds)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _NUMERICAL as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
