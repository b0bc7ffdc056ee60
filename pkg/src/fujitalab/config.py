"""JSON run configurations with strict validation and line-numbered errors.

The schema is documented in ``docs/config.md``.
"""

from __future__ import annotations

import copy
import json
import math
import re
from dataclasses import dataclass, field

from .geometry import VARIANTS, ManifoldModel
from .grid import ResolutionError, graded_nodes
from .nonlinearity import PowerReaction, TypeOneSpec, TypeTwoSpec
from .solver import Controls, ZeroReaction


class ConfigError(ValueError):
    """Invalid configuration; ``line`` is the 1-based line of the offending key when known."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = f"line {line}: " if line else ""
        key = f"{'.'.join(map(str, path))}: " if path else ""
        super().__init__(f"{where}{key}{message}")


_SECTIONS = {
    "manifold": {"variant": "hyperbolic", "n": 2, "kappa": 1.0, "gamma": 0.0, "c_hat": 1.0, "r_max": 40.0},
    "nonlinearity": {"type": "II"},
    "initial": {"shape": "ground_state_scaled", "amplitude": 0.01, "center": 0.0, "width": 1.0, "safety": 0.5, "delta": None},
    "grid": {"R": 20.0, "N": 800},
    "detector": {"M_big": 1e6, "dt_min": 1e-10, "M_safe_factor": 10.0, "rtol": 1e-4,
                 "dt_init": 1e-3, "dt_max": 0.25, "max_steps": 200000},
    "output": {"dir": "out", "svg": True, "trajectory": True, "snapshots": 21, "timing": True},
    "sweep": {"parameters": {}, "band": 0.2, "workers": 1},
    "kernel": {"R": 20.0, "N": 800, "r": [0.0, 5.0, 11], "t": [0.1, 5.0, 8],
               "rate_t": [10.0, 40.0, 16], "rate_R": 40.0, "rate_N": 600},
}
_TOP = set(_SECTIONS) | {"horizon", "seed"}
_NONLIN_KEYS = {
    "I": {"type", "alpha", "q", "kappa_quad"},
    "II": {"type", "mu", "beta", "p"},
    "power": {"type", "p", "mu", "q"},
    "zero": {"type"},
}
_NONLIN_DEFAULTS = {"I": {"alpha": 1.0, "q": 1.0, "kappa_quad": 1.0}, "II": {"beta": 1.0, "p": 1.0, "mu": 0.0},
                    "power": {"p": 2.0, "mu": 0.0, "q": 0.0}, "zero": {}}
_SHAPES = ("ground_state_scaled", "bump", "zero")


def _locate(text, path):
    """Line of the last key in ``path``, searched after each ancestor key in turn."""
    if not text or not path:
        return None
    pos = 0
    for key in path:
        if isinstance(key, int):
            continue
        m = re.compile(r'"%s"\s*:' % re.escape(str(key))).search(text, pos)
        if m is None:
            return None
        pos = m.start()
    return text.count("\n", 0, pos) + 1


@dataclass
class RunConfig:
    manifold: dict
    nonlinearity: dict
    initial: dict
    grid: dict
    horizon: float
    detector: dict
    output: dict
    sweep: dict
    kernel: dict
    seed: int = 0
    source: str | None = field(default=None, repr=False, compare=False)

    # construction -------------------------------------------------------------

    @classmethod
    def from_text(cls, text):
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON: {exc.msg}", line=exc.lineno) from None
        return cls.from_dict(raw, text)

    @classmethod
    def from_file(cls, path):
        with open(path) as fh:
            return cls.from_text(fh.read())

    @classmethod
    def from_dict(cls, raw, text=None):
        def fail(msg, *path):
            raise ConfigError(msg, line=_locate(text, path), path=list(path))

        if not isinstance(raw, dict):
            raise ConfigError("top level must be an object", line=1)
        for key in raw:
            if key not in _TOP:
                fail(f"unknown key {key!r}", key)
        merged = {}
        for sec, defaults in _SECTIONS.items():
            given = raw.get(sec, {})
            if not isinstance(given, dict):
                fail("must be an object", sec)
            allowed = _NONLIN_KEYS.get(given.get("type", "II"), set()) if sec == "nonlinearity" else set(defaults)
            if sec == "nonlinearity" and given.get("type", "II") not in _NONLIN_KEYS:
                fail(f"unknown type {given.get('type')!r}; expected one of {sorted(_NONLIN_KEYS)}", sec, "type")
            for key in given:
                if key not in allowed:
                    fail(f"unknown key {key!r}", sec, key)
            base = copy.deepcopy(defaults)
            if sec == "nonlinearity":
                base.update(_NONLIN_DEFAULTS[given.get("type", "II")])
            base.update(copy.deepcopy(given))
            merged[sec] = base
        cfg = cls(horizon=raw.get("horizon", 100.0), seed=raw.get("seed", 0), source=text, **merged)
        cfg._validate(fail)
        return cfg

    def to_dict(self):
        return {"manifold": copy.deepcopy(self.manifold), "nonlinearity": copy.deepcopy(self.nonlinearity),
                "initial": copy.deepcopy(self.initial), "grid": copy.deepcopy(self.grid),
                "horizon": self.horizon, "detector": copy.deepcopy(self.detector),
                "output": copy.deepcopy(self.output), "sweep": copy.deepcopy(self.sweep),
                "kernel": copy.deepcopy(self.kernel), "seed": self.seed}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def with_overrides(self, overrides):
        """Copy with dotted-path overrides such as ``{"nonlinearity.mu": 0.3}``."""
        d = self.to_dict()
        for path, value in overrides.items():
            node = d
            parts = path.split(".")
            for p in parts[:-1]:
                node = node[p]
            node[parts[-1]] = value
        return RunConfig.from_dict(d)

    # validation -----------------------------------------------------------------

    def _validate(self, fail):
        def num(sec, key, lo=-math.inf, hi=math.inf, lo_open=False, integer=False):
            v = getattr(self, sec)[key] if sec else getattr(self, key)
            path = (sec, key) if sec else (key,)
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                fail(f"must be a finite number, got {v!r}", *path)
            if integer and int(v) != v:
                fail(f"must be an integer, got {v!r}", *path)
            if v < lo or (lo_open and v == lo) or v > hi:
                rng = f"{'(' if lo_open else '['}{lo}, {hi}]"
                fail(f"must lie in {rng}, got {v!r}", *path)

        m = self.manifold
        if m["variant"] not in VARIANTS:
            fail(f"unknown variant {m['variant']!r}; expected one of {list(VARIANTS)}", "manifold", "variant")
        num("manifold", "n", 2, 10, integer=True)
        num("manifold", "kappa", 0, 100, lo_open=True)
        num("manifold", "gamma", 0, 10)
        num("manifold", "c_hat", 0, 100, lo_open=True)
        num("manifold", "r_max", 0, 700, lo_open=True)

        nl = self.nonlinearity
        kind = nl["type"]
        if kind == "I":
            for key in ("alpha", "q"):
                num("nonlinearity", key, 0, 100, lo_open=True)
            num("nonlinearity", "kappa_quad", 0, 1e6, lo_open=True)
        elif kind == "II":
            num("nonlinearity", "mu", 0, 100)
            num("nonlinearity", "beta", 0, 100, lo_open=True)
            num("nonlinearity", "p", 0, 100, lo_open=True)
        elif kind == "power":
            num("nonlinearity", "p", 1, 100, lo_open=True)
            num("nonlinearity", "mu", 0, 100)
            num("nonlinearity", "q", 0, 100)

        ini = self.initial
        if ini["shape"] not in _SHAPES:
            fail(f"unknown shape {ini['shape']!r}; expected one of {list(_SHAPES)}", "initial", "shape")
        if ini["amplitude"] == "certified":
            if kind != "I":
                fail("a certified amplitude exists only for Type-I nonlinearities", "initial", "amplitude")
            if ini["shape"] != "ground_state_scaled":
                fail("a certified amplitude needs the ground_state_scaled shape", "initial", "amplitude")
        else:
            num("initial", "amplitude", 0, 1e6)
        num("initial", "center", 0, 700)
        num("initial", "width", 0, 700, lo_open=True)
        num("initial", "safety", 0, 1, lo_open=True)
        if ini["delta"] is not None:
            num("initial", "delta", 0, 100, lo_open=True)

        num("grid", "R", 0, self.manifold["r_max"], lo_open=True)
        num("grid", "N", 200, 1_000_000, integer=True)
        try:
            graded_nodes(self.grid["R"], int(self.grid["N"]))
        except ResolutionError as exc:
            fail(str(exc), "grid", "N")
        num(None, "horizon", 0, 1e7, lo_open=True)
        num(None, "seed", 0, 2**32 - 1, integer=True)

        num("detector", "M_big", 1, 1e300, lo_open=True)
        num("detector", "dt_min", 0, 1, lo_open=True)
        num("detector", "M_safe_factor", 1, 1e300)
        num("detector", "rtol", 0, 1, lo_open=True)
        num("detector", "dt_init", 0, 1e6, lo_open=True)
        num("detector", "dt_max", 0, 1e6, lo_open=True)
        num("detector", "max_steps", 10, 1e9, integer=True)

        out = self.output
        if not isinstance(out["dir"], str) or not out["dir"]:
            fail("must be a non-empty string", "output", "dir")
        for key in ("svg", "trajectory", "timing"):
            if not isinstance(out[key], bool):
                fail("must be true or false", "output", key)
        num("output", "snapshots", 2, 10000, integer=True)

        sw = self.sweep
        if not isinstance(sw["parameters"], dict):
            fail("must be an object mapping dotted paths to value lists or ranges", "sweep", "parameters")
        total = 1
        for path, spec in sw["parameters"].items():
            values = _expand(spec, lambda msg: fail(msg, "sweep", "parameters", path))
            parts = path.split(".")
            sec_ok = len(parts) == 2 and parts[0] in ("manifold", "nonlinearity", "initial", "grid") \
                or path == "horizon"
            if not sec_ok:
                fail(f"cannot sweep {path!r}", "sweep", "parameters", path)
            total *= len(values)
        if total > 10_000:
            fail(f"sweep has {total} points; the limit is 10000", "sweep", "parameters")
        num("sweep", "band", 0, 1)
        num("sweep", "workers", 1, 256, integer=True)

        k = self.kernel
        num("kernel", "R", 0, self.manifold["r_max"], lo_open=True)
        num("kernel", "N", 200, 100000, integer=True)
        num("kernel", "rate_R", 0, self.manifold["r_max"], lo_open=True)
        num("kernel", "rate_N", 200, 100000, integer=True)
        for key in ("r", "t", "rate_t"):
            v = k[key]
            if not (isinstance(v, list) and len(v) == 3 and all(isinstance(x, (int, float)) for x in v)
                    and v[2] >= 1 and v[0] <= v[1]):
                fail("must be [start, stop, count]", "kernel", key)

        # the model and reaction must construct
        try:
            self.build_manifold()
            self.build_reaction()
        except ValueError as exc:
            fail(str(exc), "nonlinearity" if "alpha" in str(exc) or "kappa_quad" in str(exc) else "manifold")

    # builders -------------------------------------------------------------------

    def build_manifold(self):
        m = self.manifold
        return ManifoldModel(n=int(m["n"]), variant=m["variant"], kappa=float(m["kappa"]),
                             gamma=float(m["gamma"]), c_hat=float(m["c_hat"]), r_max=float(m["r_max"]))

    def build_reaction(self):
        nl = self.nonlinearity
        if nl["type"] == "I":
            return TypeOneSpec(float(nl["alpha"]), float(nl["q"]), float(nl["kappa_quad"]))
        if nl["type"] == "II":
            return TypeTwoSpec(float(nl["mu"]), float(nl["beta"]), float(nl["p"]))
        if nl["type"] == "power":
            return PowerReaction(float(nl["p"]), float(nl["mu"]), float(nl["q"]))
        return ZeroReaction()

    def build_controls(self, save_times=None):
        d = self.detector
        return Controls(rtol=d["rtol"], dt_init=d["dt_init"], dt_max=d["dt_max"], dt_min=d["dt_min"],
                        M_big=d["M_big"], M_safe_factor=d["M_safe_factor"], max_steps=int(d["max_steps"]),
                        save_times=save_times)


def _expand(spec, fail):
    """A list of values, or ``{"start", "stop", "num"}`` for an inclusive linear range."""
    if isinstance(spec, list):
        if not spec:
            fail("value list is empty")
        return spec
    if isinstance(spec, dict) and set(spec) == {"start", "stop", "num"}:
        n = spec["num"]
        if not (isinstance(n, int) and n >= 1):
            fail("num must be a positive integer")
        if n == 1:
            return [float(spec["start"])]
        step = (spec["stop"] - spec["start"]) / (n - 1)
        # round to kill accumulation noise so labels are stable
        return [round(spec["start"] + i * step, 12) for i in range(n)]
    fail("expected a list or {start, stop, num}")


def sweep_points(cfg):
    """Cartesian product of the sweep parameters, as a list of ``{path: value}`` dicts."""
    import itertools

    params = cfg.sweep["parameters"]
    if not params:
        return [{}]
    names = list(params)
    grids = [_expand(params[n], lambda msg: (_ for _ in ()).throw(ConfigError(msg))) for n in names]
    return [dict(zip(names, combo)) for combo in itertools.product(*grids)]
