import json
import math

import pytest

from fujitalab import sweep as sweep_mod
from fujitalab.cli import main, parse_params
from fujitalab.config import ConfigError, RunConfig
from fujitalab.solver import Verdict
from fujitalab.sweep import (SweepRecord, boundary_offsets, read_summary, run_point, run_sweep,
                             simulate)

SMALL = {"grid": {"R": 20.0, "N": 200}, "output": {"snapshots": 5, "timing": False}}


def _write(tmp_path, raw, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(raw, indent=2))
    return str(path)


def _raw(**extra):
    raw = json.loads(json.dumps(SMALL))
    raw.update(extra)
    return raw


def test_simulate_blowup_agrees(tmp_path, capsys):
    cfg = _write(tmp_path, _raw(nonlinearity={"type": "II", "mu": 0.5}, initial={"amplitude": 0.1}, horizon=100))
    out = tmp_path / "out"
    assert main(["simulate", cfg, "--out", str(out)]) == 0
    rows = read_summary(out / "summary.csv")
    assert len(rows) == 1
    assert rows[0]["verdict"] == "BlowUp"
    assert rows[0]["analytic"] == "BlowUpAll"
    assert rows[0]["agreement"] == "true"
    assert float(rows[0]["t_est"]) > 0
    for name in ("run.json", "trajectory_0.csv", "sup_0.svg"):
        assert (out / name).exists()
    header = (out / "trajectory_0.csv").read_text().splitlines()[0]
    assert header == "t,r,u"
    assert "BlowUp" in capsys.readouterr().out


def test_zero_data_is_global_and_agrees(tmp_path):
    cfg = RunConfig.from_dict(_raw(nonlinearity={"type": "II", "mu": 0.5}, initial={"shape": "zero"}, horizon=10))
    rec = run_point(cfg, 0, {}, None)
    assert rec.verdict.kind == "Global"
    assert rec.agreement is True


def test_negative_alpha_exits_2(tmp_path, capsys):
    cfg = _write(tmp_path, {"nonlinearity": {"type": "I", "alpha": -1.0}})
    assert main(["simulate", cfg, "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "line 4" in err and "nonlinearity.alpha" in err


def test_missing_file_exits_2(tmp_path):
    assert main(["simulate", str(tmp_path / "nope.json")]) == 2


def test_simulate_rejects_sweep_config(tmp_path):
    cfg = _write(tmp_path, _raw(sweep={"parameters": {"nonlinearity.mu": [0.1, 0.2]}}))
    assert main(["simulate", cfg, "--out", str(tmp_path / "o")]) == 2


def test_one_point_sweep_matches_single_run(tmp_path):
    raw = _raw(nonlinearity={"type": "II", "mu": 0.5}, initial={"amplitude": 0.1}, horizon=60,
               sweep={"parameters": {"nonlinearity.mu": [0.5]}})
    cfg = RunConfig.from_dict(raw)
    (rec,) = run_sweep(cfg, str(tmp_path))
    traj, verdict, _ = simulate(cfg)
    assert rec.verdict == verdict
    assert rec.sup_final == traj.final_sup


def test_sweep_csv_is_deterministic(tmp_path):
    raw = _raw(nonlinearity={"type": "II"}, initial={"amplitude": 0.05}, horizon=40,
               sweep={"parameters": {"nonlinearity.mu": [0.05, 0.6], "nonlinearity.p": [1.0]}})
    cfg = _write(tmp_path, raw)
    outs = [tmp_path / "a", tmp_path / "b"]
    for out in outs:
        assert main(["sweep", cfg, "--out", str(out)]) == 0
    a, b = [(o / "summary.csv").read_bytes() for o in outs]
    assert a == b
    assert (outs[0] / "phase.svg").read_bytes() == (outs[1] / "phase.svg").read_bytes()
    rows = read_summary(outs[0] / "summary.csv")
    assert list(rows[0]) == ["point_id", "nonlinearity.mu", "nonlinearity.p", "verdict", "t_est",
                             "sup_final", "runtime_s", "agreement", "analytic", "in_band"]
    assert [r["verdict"] for r in rows] == ["Global", "BlowUp"]
    assert all(r["agreement"] == "true" for r in rows)


def test_crashed_point_is_marked_and_sweep_continues(tmp_path, monkeypatch, capsys):
    real = sweep_mod.simulate

    def flaky(cfg):
        if cfg.nonlinearity["mu"] == 0.2:
            raise FloatingPointError("injected")
        return real(cfg)

    monkeypatch.setattr(sweep_mod, "simulate", flaky)
    raw = _raw(horizon=5, sweep={"parameters": {"nonlinearity.mu": [0.1, 0.2, 0.3]}, "workers": 1},
               output={"snapshots": 3, "timing": False, "svg": False, "trajectory": False})
    cfg = _write(tmp_path, raw)
    out = tmp_path / "out"
    assert main(["sweep", cfg, "--out", str(out)]) == 1
    rows = read_summary(out / "summary.csv")
    assert [r["verdict"] for r in rows][1] == "Undetermined(crash)"
    assert rows[0]["verdict"] != "Undetermined(crash)" and rows[2]["verdict"] != "Undetermined(crash)"
    assert "injected" in (out / "crash_1.txt").read_text()


def test_kernel_audit_and_eigen_outputs(tmp_path):
    raw = {"manifold": {"n": 3}, "grid": {"R": 20.0, "N": 400},
           "kernel": {"R": 10.0, "N": 300, "r": [0, 3, 4], "t": [0.5, 2, 3], "rate_t": [5, 25, 6],
                      "rate_R": 30.0, "rate_N": 300}}
    cfg = _write(tmp_path, raw)
    out = tmp_path / "out"
    assert main(["kernel-audit", cfg, "--out", str(out)]) == 0
    report = json.loads((out / "kernel_audit.json").read_text())
    assert 0 < report["A_n"] <= report["B_n"] < math.inf
    assert report["lambda_star"] == pytest.approx(1.0)
    assert main(["eigen", cfg, "--out", str(out)]) == 0
    eig = json.loads((out / "eigen.json").read_text())
    assert eig["lambda"] == pytest.approx(1.0)
    assert (out / "eigen.csv").read_text().startswith("r,phi\n")


def test_numerical_failure_exits_1(tmp_path, capsys):
    # the decay-rate fit needs times reaching 20
    cfg = _write(tmp_path, {"kernel": {"R": 10.0, "N": 300, "r": [0, 3, 4], "t": [0.5, 2, 3],
                                       "rate_t": [5, 15, 6], "rate_R": 30.0, "rate_N": 300}})
    assert main(["kernel-audit", cfg, "--out", str(tmp_path / "o")]) == 1
    assert "KernelDataError" in capsys.readouterr().err


@pytest.mark.parametrize("argv, code, text", [
    (["type=II", "mu=0.3", "p=1"], 0, "BlowUpAll"),
    (["type=II", "mu=0.2", "p=1"], 0, "GlobalForSmallData"),
    (["type=I", "q=1", "alpha=1", "n=4"], 0, "GlobalForSmallData"),
    (["type=I", "q=1", "alpha=1", "n=3"], 0, "BorderlineUnknown"),
    (["type=I", "q=1"], 2, "missing"),
    (["type=III"], 2, "type=I"),
    (["type=II", "mu=abc"], 2, "numeric"),
    (["type=II", "mu=0.3", "bogus=1"], 2, "unknown"),
])
def test_thresholds_subcommand(argv, code, text, capsys):
    assert main(["thresholds", *argv]) == code
    captured = capsys.readouterr()
    assert text in captured.out + captured.err


def test_parse_params():
    assert parse_params(["mu=0.5", "variant=euclidean"]) == {"mu": 0.5, "variant": "euclidean"}
    with pytest.raises(ConfigError):
        parse_params(["mu"])
    with pytest.raises(ConfigError):
        parse_params(["mu=1", "mu=2"])


def _rec(pid, mu, p, kind):
    v = Verdict(kind, T_est=1.0) if kind == "BlowUp" else Verdict(kind, horizon=1.0, reason="x")
    return SweepRecord(pid, {"mu": mu, "p": p}, v, None, None, False, 0.0, None, None)


def test_boundary_offsets():
    mus = [0.1, 0.2, 0.3, 0.4]
    recs = [_rec(i, mu, 1.0, "Global" if mu < 0.25 else "BlowUp") for i, mu in enumerate(mus)]
    recs += [_rec(10 + i, mu, 2.0, "Global" if mu in (0.1, 0.3) else "BlowUp") for i, mu in enumerate(mus)]
    off = boundary_offsets(recs, "p", "mu", lambda p: 0.25 * p)
    assert off[1.0] == pytest.approx(0.0)
    assert off[2.0] == math.inf
