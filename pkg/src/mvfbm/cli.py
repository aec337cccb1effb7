"""Command-line entry point: ``mvfbm {fbm,check,simulate,diagnose}``.

Exit codes: 0 pass, 1 condition or diagnostic failure, 2 indeterminate,
3 runtime blow-up, 4 configuration error. Outputs depend only on the config
file and the seed; ``--threads`` never changes a byte.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .automorphy import (
    EXP_NEG,
    UNIT,
    SecondMomentTrace,
    aa_distribution_test,
    aa_recurrence_test,
    sbc0_membership,
    trace_from_ensembles,
)
from .conditions import beta_constants, check_existence_conditions, contraction_factor
from .config import ConfigError, ScenarioConfig, load_config, override
from .evolution import diophantine_shifts
from .fbm import fgn_autocov, generate_fgn_batch
from .metrics import MeasurePath
from .presets import example1_problem, example2_problem, literal_b, ou_problem, ou_stationary_variance
from .solver import BlowUpError, ensemble_statistics, picard_measure_iteration, simulate, truncation_bound

EXIT_PASS, EXIT_FAIL, EXIT_INDETERMINATE, EXIT_BLOWUP, EXIT_CONFIG = 0, 1, 2, 3, 4

# conditions checked for each scenario
APPLICABLE = {
    "example1": ("cond1", "cond1_plus"),
    "example2": ("cond1", "cond1_plus", "cond2"),
    "custom": ("cond1", "cond1_plus", "cond2"),
}


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def write_json(path: Path, obj) -> None:
    text = json.dumps(_clean(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def write_csv(path: Path, header: Sequence[str], rows) -> None:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in np.atleast_2d(np.asarray(rows, dtype=float)):
        buf.write(",".join(f"{v:.17g}" for v in row) + "\n")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(buf.getvalue())


def build_problem(cfg: ScenarioConfig):
    m = cfg.model
    if cfg.scenario == "example1":
        b = literal_b if m["b"] == "literal" else (lambda t: 0.0)
        return example1_problem(m["c1"], m["c2"], m["c3"], hurst=m["hurst"], modes=m["modes"], b=b)
    if cfg.scenario == "example2":
        return example2_problem(nu=m["nu"], amplitude=m["amplitude"], X=m["X"], n_nodes=m["n_nodes"])
    return ou_problem(delta=m["delta"], sigma_w=m["sigma_w"], sigma_h=m["sigma_h"], hurst=m["hurst"],
                      kappa=m["kappa"])


def condition_report(cfg: ScenarioConfig, problem) -> dict:
    m = cfg.model
    K = problem.coefficients.K if m["K"] is None else m["K"]
    M = problem.family.M if m["M"] is None else m["M"]
    delta = problem.family.delta
    H = m["hurst"]
    applicable = list(APPLICABLE[cfg.scenario])
    report = {"K": K, "M": M, "delta": delta, "H": H, "c_tilde2": m["c_tilde2"], "applicable": applicable}
    if H == 0.5:
        report.update(verdict="indeterminate", note="H = 1/2 lies outside the range (1/2, 1) of the conditions")
        return report
    main = check_existence_conditions(beta_constants(K, M, delta, m["c_tilde2"], H, m["variant"]))
    other = "mean3" if m["variant"] == "beta12" else "beta12"
    alt = check_existence_conditions(beta_constants(K, M, delta, m["c_tilde2"], H, other))
    verdicts = [main[c]["holds"] for c in applicable]
    if any(v is False for v in verdicts):
        verdict = "fail"
    elif any(v is None for v in verdicts):
        verdict = "indeterminate"
    else:
        verdict = "pass"
    report.update(conditions=main, alternate_variant=alt, verdict=verdict)
    return report


_VERDICT_EXIT = {"pass": EXIT_PASS, "fail": EXIT_FAIL, "indeterminate": EXIT_INDETERMINATE}


def cmd_check(cfg: ScenarioConfig, out: Path, threads: int) -> int:
    problem = build_problem(cfg)
    report = condition_report(cfg, problem)
    report["scenario"] = cfg.scenario
    report["fingerprint"] = problem.fingerprint()
    write_json(out / "check.json", report)
    return _VERDICT_EXIT[report["verdict"]]


def _autocov_check(x: np.ndarray, h: float, dt: float, max_lag: int) -> dict:
    P, n = x.shape
    lags = list(range(min(max_lag, n - 1) + 1))
    rows = []
    for k in lags:
        per_path = np.mean(x[:, : n - k] * x[:, k:], axis=1)
        emp = float(per_path.mean())
        se = float(per_path.std(ddof=1) / math.sqrt(P))
        theory = float(fgn_autocov(k, h, dt))
        z = (emp - theory) / se if se > 0 else 0.0
        rows.append({"lag": k, "empirical": emp, "theory": theory, "se": se, "z": z})
    return {"lags": rows, "max_abs_z": max(abs(r["z"]) for r in rows), "pass": all(abs(r["z"]) < 4.0 for r in rows)}


def cmd_fbm(cfg: ScenarioConfig, out: Path, threads: int) -> int:
    f = cfg.fbm
    n, h, dt, seed = f["n"], f["h"], f["dt"], cfg.seed
    g = generate_fgn_batch(f["paths"], n, h, dt, seed, key=(0,), threads=threads, method=f["method"])
    paths = np.concatenate([np.zeros((g.shape[0], 1)), np.cumsum(g, axis=1)], axis=1)
    times = np.arange(n + 1) * dt
    header = ["t", "value"] if f["paths"] == 1 else ["t"] + [f"value_{i + 1}" for i in range(f["paths"])]
    write_csv(out / "fbm_paths.csv", header, np.column_stack([times, paths.T]))

    v = generate_fgn_batch(f["validation_paths"], n, h, dt, seed, key=(1,), threads=threads, method=f["method"])
    report = {"n": n, "h": h, "dt": dt, "seed": seed, "paths": f["paths"],
              "validation_paths": f["validation_paths"], "method": f["method"],
              "autocovariance": _autocov_check(v, h, dt, f["max_lag"])}
    ok = report["autocovariance"]["pass"]
    if h == 0.5 and n > 1:
        c0 = float(np.mean(v * v))
        c1 = float(np.mean(v[:, :-1] * v[:, 1:]))
        samples = v.shape[0] * (n - 1)
        thr = max(0.01, 4.0 / math.sqrt(samples))
        rho = c1 / c0
        report["whiteness"] = {"lag1_autocorrelation": rho, "threshold": thr, "samples": samples,
                               "pass": abs(rho) < thr}
        ok = ok and report["whiteness"]["pass"]
    report["pass"] = ok
    write_json(out / "fbm_validation.json", report)
    return EXIT_PASS if ok else EXIT_FAIL


def _stats_header(d: int) -> list:
    return ["t"] + [f"mean_{i + 1}" for i in range(d)] + [f"var_{i + 1}" for i in range(d)] + ["w2_to_final"]


def cmd_simulate(cfg: ScenarioConfig, out: Path, threads: int) -> int:
    s = cfg.simulate
    problem = build_problem(cfg)
    manifest = {"scenario": cfg.scenario, "fingerprint": problem.fingerprint(), "seed": cfg.seed,
                "N": s["N"], "dt": s["dt"], "t0": s["t0"], "t1": s["t1"], "burn_in": s["burn_in"],
                "dim": problem.dim, "config": cfg.as_dict()}
    manifest["conditions"] = condition_report(cfg, problem)
    if cfg.scenario == "custom" and cfg.model["kappa"] == 0.0:
        m = cfg.model
        manifest["stationary_variance"] = ou_stationary_variance(m["delta"], m["sigma_w"], m["sigma_h"], m["hurst"])
    code = EXIT_PASS
    try:
        ens = simulate(problem, s["t0"], s["t1"], s["dt"], s["N"], s["burn_in"], cfg.seed, threads=threads)
        write_csv(out / "statistics.csv", _stats_header(problem.dim), ensemble_statistics(ens))
        sup = max(math.sqrt(e.measure.second_moment()) for e in ens)
        manifest["sup_rms_norm"] = sup
        manifest["truncation_bound"] = truncation_bound(problem, s["burn_in"], sup)
        if s["picard_iters"] > 0:
            _, gaps = picard_measure_iteration(problem, None, s["picard_iters"], s["N"], cfg.seed, s["t0"],
                                               s["t1"], s["dt"], s["burn_in"], threads=threads)
            write_csv(out / "picard_gaps.csv", ["k", "gap"], np.column_stack([np.arange(gaps.size), gaps]))
            ratios = [gaps[k + 1] / gaps[k] if gaps[k] > 0 else None for k in range(gaps.size - 1)]
            predicted = None
            c = manifest["conditions"].get("conditions")
            if c is not None:
                predicted = c["cond1_plus"]["lhs"]
            manifest["picard"] = {"gaps": gaps, "ratios": ratios, "predicted_factor": predicted}
        manifest["status"] = "ok"
    except BlowUpError as exc:
        manifest["status"] = "blow-up"
        manifest["blow_up_time"] = exc.t
        code = EXIT_BLOWUP
    write_json(out / "manifest.json", manifest)
    return code


def _shifts(d: dict) -> np.ndarray:
    if d["shifts"] == "period":
        return d["period"] * np.arange(1, d["count"] + 1)
    return diophantine_shifts(d["frequencies"], d["count"])


def _snap(shifts: np.ndarray, dt: float) -> np.ndarray:
    return np.maximum(1, np.round(shifts / dt)) * dt


def _simulate_all(cfg: ScenarioConfig, threads: int):
    s = cfg.simulate
    return simulate(build_problem(cfg), s["t0"], s["t1"], s["dt"], s["N"], s["burn_in"], cfg.seed,
                    threads=threads)


def _read_trace(path: Path) -> SecondMomentTrace:
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return SecondMomentTrace(rows[:, 0], rows[:, 1])


def cmd_diagnose(cfg: ScenarioConfig, out: Path, threads: int) -> int:
    d, s = cfg.diagnose, cfg.simulate
    report = {"mode": d["mode"], "source": d["source"], "seed": cfg.seed}
    if d["mode"] == "sbc0":
        qmax = max(d["q"])
        if d["source"] in ("t2", "const"):
            k = int(math.ceil(qmax * 200))
            t = np.linspace(-k / 200.0, k / 200.0, 2 * k + 1)
            v = np.where(t >= 0, t**2, 0.0) if d["source"] == "t2" else np.ones_like(t)
            trace = SecondMomentTrace(t, v)
        elif d["source"] == "trace":
            trace = _read_trace(cfg.base_dir / d["trace"])
        else:
            trace = trace_from_ensembles(_simulate_all(cfg, threads))
        rho = EXP_NEG if d["weight"] == "exp" else UNIT
        res = sbc0_membership(trace, rho, d["q"], d["slope_tol"])
        report["result"] = res
        ok = res["member"]
    elif d["mode"] == "recurrence":
        shifts = _shifts(d)
        if d["source"] == "sin":
            grid = np.linspace(0.0, d["window"], d["grid_points"])
            res = aa_recurrence_test(np.sin, shifts, grid, d["tol"])
        else:
            ens = _simulate_all(cfg, threads)
            dt, t0 = s["dt"], s["t0"]
            shifts = _snap(shifts, dt)
            states = np.stack([e.states for e in ens], axis=1)  # (N, T, d)
            n_win = int(round(d["window"] / dt))
            idx = np.unique(np.linspace(0, n_win, d["grid_points"]).round().astype(int))
            grid = t0 + idx * dt

            def sampler(times):
                j = np.round((np.asarray(times) - t0) / dt).astype(int)
                if j.min() < 0 or j.max() >= states.shape[1]:
                    raise ValueError("simulation window too short for the requested shifts")
                return states[:, j, :]

            res = aa_recurrence_test(sampler, shifts, grid, d["tol"])
        report["result"] = res
        ok = res["passed"]
    else:
        ens = _simulate_all(cfg, threads)
        path = MeasurePath(np.array([e.t for e in ens]), [e.measure for e in ens])
        shifts = _snap(_shifts(d), s["dt"])
        n_win = int(round(d["window"] / s["dt"]))
        idx = np.unique(np.linspace(0, n_win, d["grid_points"]).round().astype(int))
        if idx.max() >= len(path):
            raise ValueError("simulation window too short for diagnose.window")
        res = aa_distribution_test(path, shifts, d["tol"], grid=path.times[idx])
        report["result"] = res
        ok = res["passed"]
    write_json(out / "diagnose.json", report)
    return EXIT_PASS if ok else EXIT_FAIL


COMMANDS = {"fbm": cmd_fbm, "check": cmd_check, "simulate": cmd_simulate, "diagnose": cmd_diagnose}


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("threads must be >= 1")
    return v


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mvfbm", description="Mean-field SDE simulator driven by BM and fBm.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", metavar="PATH", default=None)
    p.add_argument("--seed", metavar="U64", type=_u64, default=None)
    p.add_argument("--out", metavar="DIR", default=None)
    p.add_argument("--threads", metavar="N", type=_positive, default=1)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_PASS
    try:
        cfg = override(load_config(args.config), args.seed, args.out)
        out = Path(cfg.run["out"])
        out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, out, args.threads)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BlowUpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BLOWUP


if __name__ == "__main__":
    sys.exit(main())
