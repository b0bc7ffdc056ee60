"""Single runs, parameter sweeps and their file outputs."""

from __future__ import annotations

import csv
import functools
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .comparison import (BLOWUP, GLOBAL, UNKNOWN, ThresholdVerdict, best_certificate, certified_theta,
                         threshold_typeI, threshold_typeII)
from .config import RunConfig, sweep_points
from .grid import discretize
from .heat_kernel import NumericalKernel, calibrate_bounds, log_rate, semigroup_apply
from .solver import Verdict, evolve, write_trajectory_csv
from .spectral import bottom_of_spectrum, ode_residual, solve_ground_state

_MATCH = {"Global": GLOBAL, "BlowUp": BLOWUP}


@dataclass
class SweepRecord:
    point_id: int
    point: dict
    verdict: Verdict
    analytic: str | None
    agreement: bool | None
    in_band: bool
    runtime_s: float
    T_est: float | None
    sup_final: float | None

    @property
    def verdict_label(self):
        v = self.verdict
        return f"Undetermined({v.reason})" if v.kind == "Undetermined" else v.kind

    def row(self, names, timing=True):
        def fmt(x):
            if x is None:
                return ""
            if isinstance(x, bool):
                return "true" if x else "false"
            if isinstance(x, float):
                return f"{x:.10g}" if math.isfinite(x) else ("inf" if x > 0 else "nan")
            return str(x)
        return ([str(self.point_id)] + [fmt(self.point[n]) for n in names]
                + [self.verdict_label, fmt(self.T_est), fmt(self.sup_final),
                   f"{self.runtime_s:.3f}" if timing else "", fmt(self.agreement),
                   self.analytic or "", fmt(self.in_band)])


# building blocks ------------------------------------------------------------------


@functools.lru_cache(maxsize=16)
def _ground_state(model_key, R):
    m = _model_from_key(model_key)
    return solve_ground_state(m, R=min(R, m.r_max))


def _model_key(m):
    return tuple(sorted(m.to_dict().items()))


def _model_from_key(key):
    from .geometry import ManifoldModel
    return ManifoldModel(**dict(key))


def initial_data(cfg, grid=None):
    """Initial profile on the run grid and the amplitude actually used."""
    m = cfg.build_manifold()
    grid = discretize(m, cfg.grid["R"], int(cfg.grid["N"])) if grid is None else grid
    ini = cfg.initial
    r = grid.nodes
    if ini["shape"] == "zero":
        return np.zeros_like(r), 0.0
    if ini["shape"] == "bump":
        z = (r - ini["center"]) / ini["width"]
        inside = np.abs(z) < 1
        bump = np.zeros_like(r)
        bump[inside] = np.exp(1.0 - 1.0 / (1.0 - z[inside] ** 2))
        return ini["amplitude"] * bump, float(ini["amplitude"])
    gs = _ground_state(_model_key(m), float(cfg.grid["R"]))
    theta = ini["amplitude"]
    if theta == "certified":
        spec = cfg.build_reaction()
        if ini["delta"] is None:
            theta = best_certificate(m, spec, gs, safety=ini["safety"]).theta
        else:
            theta = certified_theta(m, spec, ini["delta"], gs, safety=ini["safety"])
    return theta * gs(r), float(theta)


def analytic_verdict(cfg):
    """Threshold prediction, or ``None`` when no predicate covers the reaction."""
    m = cfg.build_manifold()
    nl = cfg.nonlinearity
    ini = cfg.initial
    if ini["shape"] == "zero" or ini["amplitude"] == 0:
        # the blow-up statements concern nontrivial data; zero stays zero
        return ThresholdVerdict(GLOBAL, "u0 = 0", {})
    if nl["type"] == "II":
        est = None if m.is_hyperbolic_space else _lambda1(_model_key(m))
        return threshold_typeII(nl["mu"], nl["p"], m, est)
    if nl["type"] == "I":
        return threshold_typeI(nl["q"], nl["alpha"], m)
    return None


@functools.lru_cache(maxsize=16)
def _lambda1(model_key):
    return bottom_of_spectrum(_model_from_key(model_key))


def threshold_distance(cfg):
    """Relative distance of the parameters from the analytic threshold."""
    nl = cfg.nonlinearity
    m = cfg.build_manifold()
    if nl["type"] == "II":
        crit = nl["p"] * m.lambda_star()
        return abs(nl["mu"] - crit) / crit if crit > 0 else math.inf
    if nl["type"] == "I":
        return abs(nl["q"] - nl["alpha"]) / nl["alpha"]
    return math.inf


def agreement(numerical, analytic):
    """True when the kinds match or the analytic side is undecided."""
    if analytic is None:
        return None
    if analytic == UNKNOWN:
        return True
    return _MATCH.get(numerical) == analytic


def simulate(cfg):
    """Run one configuration; returns ``(trajectory, verdict, theta)``."""
    m = cfg.build_manifold()
    grid = discretize(m, cfg.grid["R"], int(cfg.grid["N"]))
    u0, theta = initial_data(cfg, grid)
    saves = np.linspace(0.0, cfg.horizon, int(cfg.output["snapshots"]))
    traj, verdict = evolve(grid, m, cfg.build_reaction(), u0, cfg.horizon, cfg.build_controls(saves))
    return traj, verdict, theta


def run_point(cfg, point_id=0, point=None, outdir=None, sup_plot=False):
    """Evaluate one sweep point; any exception becomes ``Undetermined("crash")``."""
    point = point or {}
    start = time.perf_counter()
    sub = None
    try:
        sub = cfg.with_overrides(point) if point else cfg
        analytic = analytic_verdict(sub)
        traj, verdict, _ = simulate(sub)
        if outdir is not None and cfg.output["trajectory"]:
            write_trajectory_csv(traj, os.path.join(outdir, f"trajectory_{point_id}.csv"))
        if outdir is not None and sup_plot:
            write_sup_svg(traj, verdict, os.path.join(outdir, f"sup_{point_id}.svg"))
        sup_final = traj.final_sup
    except Exception as exc:  # noqa: BLE001 - a crashed point must not stop the sweep
        verdict = Verdict("Undetermined", reason="crash")
        analytic, sup_final = None, None
        try:
            analytic = analytic_verdict(sub) if sub is not None else None
        except Exception:  # noqa: BLE001
            pass
        verdict_note = f"{type(exc).__name__}: {exc}"
        _log_crash(outdir, point_id, verdict_note)
    kind = analytic.kind if analytic is not None else None
    band = cfg.sweep["band"]
    in_band = sub is not None and threshold_distance(sub) < band
    return SweepRecord(point_id, point, verdict, kind, agreement(verdict.kind, kind), in_band,
                       time.perf_counter() - start, verdict.T_est, sup_final)


def _log_crash(outdir, point_id, note):
    if outdir is None:
        return
    with open(os.path.join(outdir, f"crash_{point_id}.txt"), "w") as fh:
        fh.write(note + "\n")


def _worker(args):
    cfg_dict, point_id, point, outdir = args
    return run_point(RunConfig.from_dict(cfg_dict), point_id, point, outdir)


def run_sweep(cfg, outdir=None, workers=None):
    """Evaluate every sweep point and write ``summary.csv`` and ``phase.svg``.

    Records are returned in point order regardless of worker scheduling, so the
    CSV is byte-identical across runs when timing is disabled.
    """
    outdir = cfg.output["dir"] if outdir is None else outdir
    os.makedirs(outdir, exist_ok=True)
    points = sweep_points(cfg)
    workers = int(cfg.sweep["workers"] if workers is None else workers)
    jobs = [(cfg.to_dict(), i, p, outdir) for i, p in enumerate(points)]
    if workers <= 1:
        records = [_worker(j) for j in jobs]
    else:
        records = []
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_worker, j) for j in jobs]
            for j, fut in zip(jobs, futures):
                try:
                    records.append(fut.result())
                except Exception as exc:  # noqa: BLE001 - worker process died
                    _log_crash(outdir, j[1], f"{type(exc).__name__}: {exc}")
                    records.append(SweepRecord(j[1], j[2], Verdict("Undetermined", reason="crash"), None,
                                               None, False, 0.0, None, None))
    names = list(cfg.sweep["parameters"]) or _default_columns(cfg)
    if not cfg.sweep["parameters"]:
        for rec in records:
            rec.point = {n: _lookup(cfg, n) for n in names}
    write_summary(records, names, os.path.join(outdir, "summary.csv"), timing=cfg.output["timing"])
    if cfg.output["svg"]:
        write_phase_svg(cfg, records, os.path.join(outdir, "phase.svg"))
    return records


def _default_columns(cfg):
    return [f"nonlinearity.{k}" for k in sorted(cfg.nonlinearity) if k != "type"]


def _lookup(cfg, path):
    sec, key = path.split(".")
    return getattr(cfg, sec)[key]


def write_summary(records, names, path, timing=True):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["point_id", *names, "verdict", "t_est", "sup_final", "runtime_s",
                    "agreement", "analytic", "in_band"])
        for rec in records:
            w.writerow(rec.row(names, timing))


def read_summary(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def boundary_offsets(records, row_param, col_param, threshold):
    """Per row, distance from the numerical Global/BlowUp switch to the analytic one, in cells.

    ``threshold(row_value)`` gives the critical column value.  The numerical
    switch is the midpoint between the last Global and the first BlowUp point;
    rows without a clean switch return ``inf``.
    """
    rows = {}
    for rec in records:
        rows.setdefault(rec.point[row_param], []).append(rec)
    out = {}
    for rv, recs in sorted(rows.items()):
        recs.sort(key=lambda r: r.point[col_param])
        cols = [r.point[col_param] for r in recs]
        kinds = [r.verdict.kind for r in recs]
        step = (cols[-1] - cols[0]) / max(len(cols) - 1, 1)
        crit = threshold(rv)
        try:
            last_g = max(i for i, k in enumerate(kinds) if k == "Global")
        except ValueError:
            last_g = None
        try:
            first_b = min(i for i, k in enumerate(kinds) if k == "BlowUp")
        except ValueError:
            first_b = None
        if last_g is not None and first_b is not None and last_g < first_b:
            switch = 0.5 * (cols[last_g] + cols[first_b])
        elif last_g is None and first_b == 0:
            switch = cols[0] - 0.5 * step
        elif first_b is None and last_g == len(cols) - 1:
            switch = cols[-1] + 0.5 * step
        else:
            out[rv] = math.inf
            continue
        # a threshold beyond the swept range is matched by a switch at the edge
        crit_c = min(max(crit, cols[0] - 0.5 * step), cols[-1] + 0.5 * step)
        out[rv] = abs(switch - crit_c) / step
    return out


# plotting -------------------------------------------------------------------------


_COLOURS = {"Global": "#3b7dd8", "BlowUp": "#d8513b", "Undetermined": "#b0b0b0"}


def write_phase_svg(cfg, records, path):
    """Verdict heatmap over the first two swept parameters with the analytic threshold overlaid."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from matplotlib.colors import ListedColormap

    names = list(cfg.sweep["parameters"]) or _default_columns(cfg)
    codes = {"Global": 0, "BlowUp": 1, "Undetermined": 2}
    cmap = ListedColormap([_COLOURS["Global"], _COLOURS["BlowUp"], _COLOURS["Undetermined"]])
    with matplotlib.rc_context({"svg.hashsalt": "fujitalab", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6, 4.5))
        if len(names) >= 2 and cfg.sweep["parameters"]:
            xn, yn = names[0], names[1]
            xs = sorted({r.point[xn] for r in records})
            ys = sorted({r.point[yn] for r in records})
            z = np.full((len(ys), len(xs)), np.nan)
            for r in records:
                z[ys.index(r.point[yn]), xs.index(r.point[xn])] = codes[r.verdict.kind]
            ax.pcolormesh(_edges(xs), _edges(ys), z, cmap=cmap, vmin=-0.5, vmax=2.5, shading="flat")
            line = _threshold_line(cfg, xn, yn, np.linspace(min(ys), max(ys), 200))
            if line is not None:
                ax.plot(line[0], line[1], "k-", lw=1.5, label="analytic threshold")
            ax.set_xlim(_edges(xs)[0], _edges(xs)[-1])
            ax.set_ylim(_edges(ys)[0], _edges(ys)[-1])
            ax.set_ylabel(yn)
        else:
            xn = names[0] if names else "point"
            xs = [r.point.get(xn, r.point_id) for r in records]
            ax.scatter(xs, np.zeros(len(xs)), c=[_COLOURS[r.verdict.kind] for r in records], s=80)
            ax.set_yticks([])
        ax.set_xlabel(xn)
        handles = [plt.Rectangle((0, 0), 1, 1, color=c) for c in _COLOURS.values()]
        ax.legend(handles + ax.get_lines(), list(_COLOURS) + [l.get_label() for l in ax.get_lines()],
                  loc="upper left", fontsize=8, framealpha=0.9)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)


def write_sup_svg(traj, verdict, path):
    """Sup-norm against time on a log axis for a single run."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    t = np.asarray(traj.step_times)
    s = np.asarray(traj.step_sups, dtype=float)
    ok = np.isfinite(s) & (s > 0)
    with matplotlib.rc_context({"svg.hashsalt": "fujitalab", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.semilogy(t[ok], s[ok], lw=1.2)
        ax.set_xlabel("t")
        ax.set_ylabel("sup u")
        ax.set_title(str(verdict), fontsize=9)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)


def _edges(vals):
    v = np.asarray(vals, dtype=float)
    if len(v) == 1:
        return np.array([v[0] - 0.5, v[0] + 0.5])
    mid = 0.5 * (v[1:] + v[:-1])
    return np.concatenate([[2 * v[0] - mid[0]], mid, [2 * v[-1] - mid[-1]]])


def _threshold_line(cfg, xn, yn, ys):
    """Critical ``x`` as a function of ``y`` for the swept pair, if the pair is recognised."""
    m = cfg.build_manifold()
    lam = m.lambda_star()
    pair = (xn.split(".")[-1], yn.split(".")[-1])
    nl = cfg.nonlinearity
    if nl["type"] == "II":
        if pair == ("mu", "p"):
            return lam * ys, ys
        if pair == ("p", "mu"):
            return ys / lam, ys
    if nl["type"] == "I":
        if pair in (("q", "alpha"), ("alpha", "q")):
            return ys, ys
    return None


# audits ---------------------------------------------------------------------------


def _span(spec, geometric=False):
    a, b, n = spec
    n = int(n)
    if geometric and a > 0:
        return np.geomspace(a, b, n)
    return np.linspace(a, b, n)


def kernel_audit(cfg):
    """Bound calibration, decay rate and composition checks for the configured model."""
    m = cfg.build_manifold()
    k = cfg.kernel
    out = {"model": m.to_dict()}
    kern = NumericalKernel(m, R=k["R"], N=int(k["N"]))
    r = _span(k["r"])
    ts = _span(k["t"], geometric=True)
    if m.is_hyperbolic_space:
        cal = calibrate_bounds(m, r, ts, kernel=kern)
        out["A_n"], out["B_n"], out["dispersion"] = cal.A_n, cal.B_n, cal.dispersion
    wide = NumericalKernel(m, R=k["rate_R"], N=int(k["rate_N"]))
    rate_t = _span(k["rate_t"])
    rate = log_rate(rate_t, [wide.origin_value(t) for t in rate_t])
    out["log_rate"] = rate
    out["lambda_star"] = m.lambda_star()
    out["log_rate_rel_error"] = abs(-rate - m.lambda_star()) / m.lambda_star() if m.lambda_star() > 0 else None
    # composition P_s P_t u0 against P_{s+t} u0 on a ground-state-like bump
    grid = discretize(m, k["R"], int(k["N"]))
    from .grid import RadialField
    u0 = RadialField(grid.nodes, np.exp(-grid.nodes ** 2))
    s, t = 0.5, 1.0
    eval_r = np.linspace(0.0, 3.0, 13)
    once = semigroup_apply(m, u0, s + t, eval_r=eval_r, kernel_obj=kern)
    first = semigroup_apply(m, u0, s, eval_r=grid.nodes, kernel_obj=kern)
    twice = semigroup_apply(m, first, t, eval_r=eval_r, kernel_obj=kern)
    out["composition_rel_error"] = float(np.max(np.abs(once.values - twice.values)) / np.max(once.values))
    return out


def eigen_report(cfg):
    """Ground state, its ODE residual and envelope constants, plus the Dirichlet bottom."""
    m = cfg.build_manifold()
    R = min(cfg.grid["R"], m.r_max)
    gs = solve_ground_state(m, R=R, N=int(cfg.grid["N"]))
    res = ode_residual(gs)
    return gs, {
        "model": m.to_dict(),
        "lambda": gs.lam,
        "ode_residual_max": float(np.max(np.abs(res.values))),
        "envelope_constants": list(gs.envelope_constants) if gs.envelope_constants else None,
        "dirichlet_bottom": bottom_of_spectrum(m, R=R),
    }


def dump_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
