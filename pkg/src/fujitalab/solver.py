"""Method-of-lines solver for ``u_t = Delta u + f(u, t)`` with radial data.

Each step treats the reaction explicitly (Heun's method) and the diffusion
by one implicit Euler solve, ``(I - dt L) u_new = u + dt f_heun``.  With an increasing
reaction and the M-matrix ``L`` from :mod:`fujitalab.grid` this keeps the
scheme positive and order preserving.  Step sizes come from step doubling;
the two half steps are kept.
"""

from __future__ import annotations

import csv
import json
import math
import time as _time
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .grid import RadialField, RadialGrid, discretize, operator_on
from .heat_kernel import NumericalKernel, semigroup_apply

__all__ = [
    "Controls", "Trajectory", "Verdict", "PositivityError", "MonotonicityError",
    "discretize", "evolve", "detect_blowup", "exhaustion_mode", "ExhaustionResult",
    "mild_residual", "write_trajectory_csv", "trajectory_record",
]


class PositivityError(RuntimeError):
    """The scheme produced a value below ``-1e-10 sup|u|``."""


class MonotonicityError(RuntimeError):
    """A larger exhaustion domain gave a smaller solution."""


class ZeroReaction:
    """``f = 0``; the linear heat flow."""

    kind = "zero"

    def rate(self, s, t):
        return np.zeros_like(np.asarray(s, dtype=float))

    def blowup_transform(self, s):
        return 1.0 / np.asarray(s, dtype=float)

    def to_dict(self):
        return {"type": "zero"}


@dataclass
class Controls:
    rtol: float = 1e-4
    # floor of the error scale; relative control is meaningless near the subnormal range
    atol: float = 1e-280
    dt_init: float = 1e-3
    dt_max: float = 0.25
    dt_min: float = 1e-10
    M_big: float = 1e6
    M_safe_factor: float = 10.0
    max_steps: int = 200_000
    forced_steps: int = 2000
    diffusion: bool = True
    save_times: tuple | None = None
    positivity_tol: float = 1e-10


@dataclass
class Verdict:
    kind: str
    T_est: float | None = None
    horizon: float | None = None
    reason: str | None = None
    provenance: str = "numerical"

    def __post_init__(self):
        if self.kind not in ("Global", "BlowUp", "Undetermined"):
            raise ValueError(f"unknown verdict {self.kind!r}")
        if self.kind == "BlowUp" and not (self.T_est is not None and self.T_est > 0):
            raise ValueError("BlowUp needs T_est > 0")
        if self.kind == "Global" and not (self.horizon is not None and self.horizon > 0):
            raise ValueError("Global needs horizon > 0")

    def to_dict(self):
        return {"kind": self.kind, "T_est": self.T_est, "horizon": self.horizon,
                "reason": self.reason, "provenance": self.provenance}

    def __str__(self):
        if self.kind == "BlowUp":
            return f"BlowUp(T_est={self.T_est:.6g})"
        if self.kind == "Global":
            return f"Global(horizon={self.horizon:g})"
        return f"Undetermined({self.reason})"


@dataclass
class Trajectory:
    """Saved snapshots plus the per-step log used by the blow-up detector."""

    grid: RadialGrid
    times: list = field(default_factory=list)
    fields: list = field(default_factory=list)
    sup_norms: list = field(default_factory=list)
    step_times: list = field(default_factory=list)
    step_sups: list = field(default_factory=list)
    dt_log: list = field(default_factory=list)
    horizon: float = 0.0
    dt_collapsed: bool = False
    hit_max_steps: bool = False
    sup_initial: float = 0.0
    runtime_s: float = 0.0

    def snapshot(self, t, values):
        self.times.append(float(t))
        self.fields.append(RadialField(self.grid.nodes, values.copy()))
        self.sup_norms.append(float(np.max(values)) if values.size else 0.0)

    @property
    def final_time(self):
        return self.step_times[-1] if self.step_times else 0.0

    @property
    def final_sup(self):
        return self.step_sups[-1] if self.step_sups else self.sup_initial

    @property
    def reached_horizon(self):
        return self.final_time >= self.horizon * (1 - 1e-12)

    def field_at(self, t):
        """Saved snapshot at time ``t`` (exact match within 1e-9)."""
        for ti, f in zip(self.times, self.fields):
            if abs(ti - t) <= 1e-9 * max(1.0, abs(t)):
                return f
        raise KeyError(f"no snapshot at t={t}")


def _reaction(spec, u, t):
    with np.errstate(over="ignore", invalid="ignore"):
        f = np.asarray(spec.rate(u, t), dtype=float)
    # saturate rather than propagate NaN
    return np.where(np.isnan(f), np.inf, f)


def _step(grid, spec, u, t, dt, diffusion):
    """One IMEX step on the interior unknowns (boundary value fixed at 0)."""
    f0 = _reaction(spec, u, t)
    pred = u + dt * f0
    # Heun: positive and increasing in u whenever f is
    rhs = u + 0.5 * dt * (f0 + _reaction(spec, pred, t + dt)) if np.all(np.isfinite(pred)) else pred
    if not diffusion or not np.all(np.isfinite(rhs)):
        return rhs
    return solve_banded((1, 1), grid.banded(dt), rhs, check_finite=False)


def evolve(grid, m, spec, u0, horizon, controls=None):
    """Integrate from ``u0`` (a :class:`RadialField` or node array) up to ``horizon``.

    Returns ``(Trajectory, Verdict)``.
    """
    c = controls or Controls()
    if spec is None:
        spec = ZeroReaction()
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    if grid is None:
        grid = discretize(m, min(20.0, m.r_max), 400)
    vals0 = u0(grid.nodes) if isinstance(u0, RadialField) else np.asarray(u0, dtype=float)
    if vals0.shape != grid.nodes.shape:
        raise ValueError("initial data does not match the grid")
    if np.any(vals0 < 0) or not np.all(np.isfinite(vals0)):
        raise ValueError("initial data must be finite and non-negative")
    u = vals0[:-1].astype(float)
    if c.diffusion:
        u_full = np.append(u, 0.0)
    else:
        u_full = vals0.astype(float)
        u = u_full.copy()

    save = sorted(float(s) for s in c.save_times) if c.save_times is not None else None
    traj = Trajectory(grid=grid, horizon=float(horizon), sup_initial=float(np.max(vals0)))
    traj.snapshot(0.0, u_full)
    traj.step_times.append(0.0)
    traj.step_sups.append(traj.sup_initial)
    save_idx = 0
    while save is not None and save_idx < len(save) and save[save_idx] <= 0.0:
        save_idx += 1

    def pack(v):
        return np.append(v, 0.0) if c.diffusion else v

    start = _time.perf_counter()
    t = 0.0
    dt = min(c.dt_init, c.dt_max, horizon)
    steps = 0
    forced = 0
    while t < horizon * (1 - 1e-12):
        if steps >= c.max_steps:
            traj.hit_max_steps = True
            break
        target = horizon
        if save is not None and save_idx < len(save):
            target = min(target, save[save_idx])
        landing = dt >= target - t
        h = min(dt, target - t)
        sup = float(np.max(u)) if u.size else 0.0
        if traj.dt_collapsed:
            u_new = _step(grid, spec, u, t, c.dt_min, c.diffusion)
            h = c.dt_min
            landing = False
            forced += 1
        else:
            full = _step(grid, spec, u, t, h, c.diffusion)
            half = _step(grid, spec, u, t, 0.5 * h, c.diffusion)
            half = _step(grid, spec, half, t + 0.5 * h, 0.5 * h, c.diffusion)
            if np.all(np.isfinite(full)) and np.all(np.isfinite(half)):
                scale = c.rtol * max(sup, float(np.max(half)) if half.size else 0.0, c.atol)
                diff = float(np.max(np.abs(full - half))) if half.size else 0.0
                err = diff / scale if scale > 0 else (0.0 if diff == 0 else np.inf)
            else:
                err = np.inf
            if err > 1.0:
                dt = h * max(0.2, 0.9 / math.sqrt(err)) if np.isfinite(err) else 0.2 * h
                if dt < c.dt_min:
                    traj.dt_collapsed = True
                continue
            u_new = half
        steps += 1
        t = target if landing else t + h
        bad = u_new < -c.positivity_tol * max(float(np.nanmax(np.abs(u_new))) if u_new.size else 0.0, traj.sup_initial)
        if np.any(bad & np.isfinite(u_new)):
            i = int(np.argmax(bad))
            raise PositivityError(f"u = {u_new[i]:.3g} at r = {grid.nodes[i]:.4g}, t = {t:.6g}")
        u = np.maximum(u_new, 0.0)
        new_sup = float(np.max(u)) if u.size else 0.0
        traj.step_times.append(t)
        traj.step_sups.append(new_sup)
        traj.dt_log.append(h)
        if save is None or (landing and save_idx < len(save) and target == save[save_idx]):
            if np.all(np.isfinite(u)):
                traj.snapshot(t, pack(u))
            if save is not None:
                save_idx += 1
        if not np.isfinite(new_sup):
            break
        if traj.dt_collapsed:
            if new_sup >= c.M_big or forced >= c.forced_steps:
                break
            continue
        if not landing:
            grow = 0.9 / math.sqrt(err) if err > 0 else 2.0
            dt = min(c.dt_max, h * min(2.0, max(0.2, grow)))
    if save is None and (not traj.times or traj.times[-1] != t) and np.all(np.isfinite(u)):
        traj.snapshot(t, pack(u))
    traj.runtime_s = _time.perf_counter() - start
    return traj, detect_blowup(traj, c, spec)


def _estimate_blowup_time(traj, spec):
    t = np.asarray(traj.step_times)
    s = np.asarray(traj.step_sups)
    ok = np.isfinite(s) & (s > 0)
    t, s = t[ok], s[ok]
    if len(t) < 3:
        return None
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        y = np.asarray(spec.blowup_transform(s), dtype=float)
    good = np.isfinite(y)
    t, y = t[good], y[good]
    # the transform decreases to 0 at the blow-up time; fit the final stretch
    tail = max(5, len(t) // 20)
    tail = min(tail, 40, len(t))
    tt, yy = t[-tail:], y[-tail:]
    if np.ptp(tt) <= 0:
        return float(tt[-1])
    slope, icpt = np.polyfit(tt - tt[-1], yy, 1)
    if slope >= 0:
        return float(tt[-1])
    return float(tt[-1] - icpt / slope)


def _super_linear(traj, window=10):
    t = np.asarray(traj.step_times[-window:])
    s = np.asarray(traj.step_sups[-window:])
    if len(t) < 4:
        return False
    if not np.isfinite(s[-1]):
        return True
    s = s[np.isfinite(s)]
    t = t[: len(s)]
    half = len(t) // 2
    with np.errstate(divide="ignore", invalid="ignore"):
        early = (s[half] - s[0]) / max(t[half] - t[0], 1e-300)
        late = (s[-1] - s[half]) / max(t[-1] - t[half], 1e-300)
    return bool(late > early > 0)


def detect_blowup(traj, controls=None, spec=None):
    """Verdict from a trajectory: three-signal blow-up test, horizon test, otherwise undetermined."""
    c = controls or Controls()
    sup = traj.final_sup
    big = not np.isfinite(sup) or sup >= c.M_big
    if big:
        if len(traj.step_times) < 10:
            return Verdict("Undetermined", reason="too few steps")
        if not traj.dt_collapsed:
            return Verdict("Undetermined", reason="resolution")
        if not _super_linear(traj):
            return Verdict("Undetermined", reason="growth not super-linear")
        T = _estimate_blowup_time(traj, spec) if spec is not None else None
        if T is None or not T > 0:
            T = traj.final_time
        return Verdict("BlowUp", T_est=T)
    if traj.hit_max_steps:
        return Verdict("Undetermined", reason="stagnation")
    if traj.dt_collapsed:
        return Verdict("Undetermined", reason="step size collapsed below threshold")
    if traj.reached_horizon:
        if sup <= c.M_safe_factor * traj.sup_initial:
            return Verdict("Global", horizon=traj.horizon)
        return Verdict("Undetermined", reason="growing at horizon")
    return Verdict("Undetermined", reason="stopped early")


# compact exhaustion -------------------------------------------------------


def _nested_nodes(R, spacing, pole_refine=20.0, ratio=1.05):
    """Graded pole region followed by uniform ``spacing`` up to ``R`` (shared across radii)."""
    K = int(math.ceil(math.log(pole_refine) / math.log(ratio)))
    pole = spacing * np.cumsum(ratio ** (np.arange(K) - K).astype(float))
    start = pole[-1]
    n_uni = int(math.floor((R - start) / spacing + 1e-9))
    uni = start + spacing * np.arange(1, n_uni + 1)
    nodes = np.concatenate([[0.0], pole, uni])
    if R - nodes[-1] > 0.25 * spacing:
        nodes = np.append(nodes, R)
    else:
        nodes[-1] = R
    return nodes


@dataclass
class ExhaustionResult:
    radii: list
    trajectories: list
    verdicts: list
    increments: list
    monotone: bool


def exhaustion_mode(m, spec, u0, radii, horizon, spacing=0.05, controls=None, tol=None, check=True):
    """Dirichlet problems on ``B(0, R_k)`` for increasing ``R_k``.

    ``increments[k]`` is the final-time sup difference between levels ``k`` and
    ``k+1`` on the smaller ball.  Raises :class:`MonotonicityError` when a
    larger ball gives a smaller solution beyond ``tol``.
    """
    radii = [float(R) for R in radii]
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must increase")
    if radii[-1] > m.r_max:
        raise ValueError(f"radius {radii[-1]} exceeds r_max={m.r_max}")
    c = controls or Controls()
    trajs, verdicts = [], []
    for R in radii:
        grid = operator_on(m, _nested_nodes(R, spacing))
        vals = u0(grid.nodes) if isinstance(u0, RadialField) else u0(grid.nodes)
        vals = np.asarray(vals, dtype=float).copy()
        vals[-1] = 0.0
        tr, v = evolve(grid, m, spec, vals, horizon, c)
        trajs.append(tr)
        verdicts.append(v)
    increments = []
    monotone = True
    for a, b in zip(trajs, trajs[1:]):
        k = len(a.grid.nodes) - 1  # shared nodes, boundary node of the small ball excluded
        ua = a.fields[-1].values[:k]
        ub = b.fields[-1].values[:k]
        scale = max(float(np.max(ub)) if ub.size else 0.0, 1e-300)
        t_ok = tol if tol is not None else 1e-8 + 10 * c.rtol * scale
        increments.append(float(np.max(np.abs(ub - ua))) if ua.size else 0.0)
        if np.any(ua > ub + t_ok):
            monotone = False
    if check and not monotone:
        raise MonotonicityError("solution on a smaller ball exceeds the one on a larger ball")
    return ExhaustionResult(radii, trajs, verdicts, increments, monotone)


# mild-solution audit --------------------------------------------------------


def mild_residual(traj, m, spec, t_check, eval_r=None, kernel=None, n_eval=25):
    """Relative sup distance between ``u(t_check)`` and its Duhamel reconstruction.

    Uses the saved snapshots in ``[0, t_check]`` as time nodes (trapezoid rule)
    and the numerical kernel by quadrature.  Returns ``nan`` with a warning if
    the kernel cannot be built at the trajectory's resolution.
    """
    spec = spec or ZeroReaction()
    times = np.asarray(traj.times)
    use = times <= t_check + 1e-12
    times = times[use]
    fields = [f for f, keep in zip(traj.fields, use) if keep]
    if abs(times[-1] - t_check) > 1e-9 * max(1.0, t_check):
        raise KeyError(f"no snapshot at t_check={t_check}")
    u_t = fields[-1]
    if u_t.sup() == 0.0 and fields[0].sup() == 0.0:
        return 0.0
    grid = traj.grid
    if kernel is None:
        try:
            N = max(400, int(2 * grid.R / 0.05))
            kernel = NumericalKernel(m, R=grid.R, N=min(N, 1600))
        except Exception as exc:  # noqa: BLE001 - any kernel failure is a skip
            warnings.warn(f"mild residual skipped: {exc}")
            return float("nan")
    if eval_r is None:
        r_hi = grid.nodes[np.nonzero(u_t.values > 1e-3 * u_t.sup())[0][-1]]
        eval_r = np.linspace(0.0, min(r_hi, grid.R), n_eval)

    def apply(field_, tau):
        if tau <= kernel.t0:
            # shorter than the kernel's resolved time: the semigroup is the identity to O(tau)
            return field_(eval_r)
        return semigroup_apply(m, field_, tau, eval_r=eval_r, kernel_obj=kernel).values

    linear = apply(fields[0], t_check)
    duhamel = np.zeros_like(eval_r)
    terms = []
    for s, f in zip(times, fields):
        src = RadialField(f.r, np.asarray(_reaction(spec, f.values, s), dtype=float))
        terms.append(apply(src, t_check - s) if src.sup() > 0 else np.zeros_like(eval_r))
    if len(times) > 1:
        duhamel = np.trapezoid(np.array(terms), times, axis=0) if hasattr(np, "trapezoid") \
            else np.trapz(np.array(terms), times, axis=0)
    recon = linear + duhamel
    return float(np.max(np.abs(u_t(eval_r) - recon)) / max(u_t.sup(), 1e-300))


# export -----------------------------------------------------------------------


def write_trajectory_csv(traj, path):
    """Long-format CSV with columns ``t, r, u`` (one row per saved node value)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "r", "u"])
        for t, f in zip(traj.times, traj.fields):
            for r, u in zip(f.r, f.values):
                w.writerow([f"{t:.10g}", f"{r:.10g}", f"{u:.12g}"])


def trajectory_record(traj, verdict):
    """JSON-compatible summary of a run."""
    return {
        "verdict": verdict.to_dict(),
        "T_est": verdict.T_est,
        "times": list(map(float, traj.times)),
        "sup_norms": [float(s) if np.isfinite(s) else None for s in traj.sup_norms],
        "final_time": traj.final_time,
        "final_sup": traj.final_sup if np.isfinite(traj.final_sup) else None,
        "steps": len(traj.dt_log),
        "runtime_s": traj.runtime_s,
    }


def dumps_record(traj, verdict):
    return json.dumps(trajectory_record(traj, verdict), indent=2)
