"""CLI, config files, seed sweeps, CSV persistence, and aggregate reporting.

Usage:

    bitbandit run --algo ic-linucb --d 2 --T 1000000 --B 12 --seeds 0..19 --out dir/
    bitbandit diag out/ic-linucb-d2-T1000000-B12-s0.csv

Config files are flat JSON objects whose keys mirror the CLI flags; explicit
flags win.  Seeds accept ``a..b`` (inclusive) or comma lists.  The worker
pool size is capped by the BITBANDIT_THREADS environment variable; results
are keyed by seed, so they do not depend on the pool size.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .config import ALGOS, RunConfig
from .glm import run_ic_glmucb
from .linucb import LinInternals, diagnostics_linucb, run_ic_linucb, run_linucb
from .mab import MabInternals, run_ic_ucb, run_ucb
from .trace import read_csv, write_csv

_RUNNERS = {
    "ic-linucb": run_ic_linucb,
    "linucb": run_linucb,
    "ic-glmucb": run_ic_glmucb,
    "ic-ucb": run_ic_ucb,
    "ucb": run_ucb,
}

_LIN_ALGOS = ("ic-linucb", "linucb", "ic-glmucb")


def max_workers(n_jobs: int) -> int:
    cap = os.environ.get("BITBANDIT_THREADS")
    limit = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(n_jobs, limit))


def run_one(cfg: RunConfig, seed: int, want_trace: bool = True):
    """Run a single seed of the configured algorithm."""
    return _RUNNERS[cfg.algo](cfg, seed, want_trace=want_trace)


def _diag_dict(cfg: RunConfig, internals) -> dict:
    if isinstance(internals, LinInternals):
        rep = diagnostics_linucb(None, internals)
        return {
            "kind": "linear",
            "eigen_ok": rep.eigen_ok,
            "gap_ok": rep.gap_ok,
            "no_overflow": rep.no_overflow,
            "coverage_ok": rep.coverage_ok,
            "inflation_ok": rep.inflation_ok,
            "all_ok": rep.all_ok(),
            "eigen_threshold": rep.eigen_threshold,
            "eigen_min_observed": rep.eigen_min_observed,
            "gap_threshold": rep.gap_threshold,
            "gap_max_observed": rep.gap_max_observed,
            "coverage_frac": rep.coverage_frac,
            "inflation_bound": rep.inflation_bound,
            "inflation_max": rep.inflation_max,
            "mirror_exact": internals.mirror_exact,
            "overflow_count": internals.overflow_count,
            "coverage_violations": internals.coverage_violations,
            "transmissions": internals.transmissions,
            "bits_sent": internals.bits_sent,
            "T_bar": internals.T_bar,
            "T_tilde": internals.T_tilde,
            "f_T": internals.f_T,
            "beta_sqrt": internals.beta_sqrt,
            "final_cum_regret": internals.final_cum_regret,
        }
    assert isinstance(internals, MabInternals)
    return {
        "kind": "mab",
        "mirror_exact": internals.mirror_exact,
        "decode_error_ok": internals.decode_error_ok,
        "envelope_ok": internals.envelope_ok,
        "no_transmission_count": internals.no_transmissions,
        "all_ok": internals.mirror_exact and internals.decode_error_ok
        and internals.envelope_ok,
        "pulls": internals.pulls.tolist(),
        "transmissions": internals.transmissions,
        "bits_sent": internals.bits_sent,
        "final_cum_regret": internals.final_cum_regret,
    }


def _sweep_worker(args) -> tuple[int, dict, np.ndarray]:
    cfg, seed, out_dir = args
    result = run_one(cfg, seed, want_trace=out_dir is not None)
    diag = _diag_dict(cfg, result.internals)
    if out_dir is not None:
        stem = os.path.join(out_dir, cfg.run_id(seed))
        write_csv(result.trace, stem + ".csv")
        with open(stem + ".internals.json", "w") as fh:
            json.dump(diag, fh, indent=2, sort_keys=True)
            fh.write("\n")
        cum = result.trace.cum_regret.copy()
    else:
        cum = np.array([diag["final_cum_regret"]])
    return seed, diag, cum


@dataclass
class SweepReport:
    cfg: RunConfig
    diags: dict[int, dict]          # seed -> diagnostics
    final_regret: dict[int, float]  # seed -> final cumulative regret

    def pass_rates(self) -> dict[str, float]:
        keys = [k for k, v in next(iter(self.diags.values())).items() if isinstance(v, bool)]
        n = len(self.diags)
        return {k: sum(1 for d in self.diags.values() if d[k]) / n for k in keys}


def run_sweep(cfg: RunConfig, out_dir: str | None = None, workers: int | None = None) -> SweepReport:
    """Run every seed, write one trace CSV per run plus summary files.

    Partial outputs are flushed before any failure is re-raised, so a broken
    seed leaves the completed runs on disk.
    """
    if out_dir is None:
        out_dir = cfg.out
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)

    jobs = [(cfg, seed, out_dir) for seed in cfg.seeds]
    n_workers = workers if workers is not None else max_workers(len(jobs))
    results: dict[int, tuple[dict, np.ndarray]] = {}
    failure: Exception | None = None
    if n_workers <= 1:
        for job in jobs:
            try:
                seed, diag, cum = _sweep_worker(job)
            except Exception as exc:  # noqa: BLE001 - surfaced below with context
                failure = exc
                break
            results[seed] = (diag, cum)
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            try:
                for seed, diag, cum in pool.map(_sweep_worker, jobs):
                    results[seed] = (diag, cum)
            except Exception as exc:  # noqa: BLE001
                failure = exc

    diags = {s: results[s][0] for s in sorted(results)}
    final = {s: float(results[s][1][-1]) for s in sorted(results)}
    report = SweepReport(cfg=cfg, diags=diags, final_regret=final)

    if out_dir is not None and results:
        curves = np.vstack([results[s][1] for s in sorted(results)])
        mean = curves.mean(axis=0)
        std = curves.std(axis=0, ddof=1) if curves.shape[0] > 1 else np.zeros_like(mean)
        with open(os.path.join(out_dir, "summary.csv"), "w", newline="") as fh:
            fh.write("t,cum_regret_mean,cum_regret_std\n")
            for i in range(mean.shape[0]):
                fh.write(f"{i + 1},{mean[i]:.10g},{std[i]:.10g}\n")
        payload = {
            "config": {k: v for k, v in asdict(cfg).items() if v is not None},
            "n_seeds": len(results),
            "pass_rates": report.pass_rates() if results else {},
            "final_cum_regret": final,
            "mean_final_cum_regret": float(np.mean(list(final.values()))),
            "total_bits": {s: results[s][0].get("bits_sent", 0) for s in sorted(results)},
        }
        with open(os.path.join(out_dir, "report.json"), "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")

    if failure is not None:
        raise RuntimeError(f"sweep failed after {len(results)} completed runs: {failure}") from failure
    return report


def run_many(cfg: RunConfig, workers: int | None = None) -> list:
    """All seeds with traces discarded; returns internals in seed order."""
    jobs = [(cfg, seed, None) for seed in cfg.seeds]
    n_workers = workers if workers is not None else max_workers(len(jobs))
    if n_workers <= 1:
        out = [_sweep_worker(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            out = list(pool.map(_sweep_worker, jobs))
    return [diag for _, diag, _ in sorted(out, key=lambda r: cfg.seeds.index(r[0]))]


# ---------------------------------------------------------------------------
# Config parsing
# ---------------------------------------------------------------------------

def parse_seeds(spec: str) -> tuple[int, ...]:
    spec = spec.strip()
    if ".." in spec:
        lo, hi = spec.split("..", 1)
        return tuple(range(int(lo), int(hi) + 1))
    return tuple(int(s) for s in spec.split(",") if s.strip())


_CONFIG_KEYS = {
    "algo": str, "d": int, "T": int, "B": int, "K": int, "L": float, "M": float,
    "lambda": float, "epsilon": float, "delta": float, "c_explore": float,
    "link": str, "out": str, "noise_scale": float,
    "codebook_stop_rejections": int,
}


def parse_config(path: str | None = None, overrides: dict | None = None) -> RunConfig:
    """Build a validated RunConfig from a flat JSON file plus CLI overrides."""
    raw: dict = {}
    if path is not None:
        with open(path) as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise ValueError(f"{path}: config must be a flat JSON object")
    if overrides:
        raw.update({k: v for k, v in overrides.items() if v is not None})

    kwargs: dict = {}
    for key, value in raw.items():
        if key == "lambda":
            kwargs["lam"] = float(value)
        elif key == "seeds":
            kwargs["seeds"] = parse_seeds(value) if isinstance(value, str) else tuple(value)
        elif key == "arm_means":
            if isinstance(value, str):
                value = [float(v) for v in value.split(",")]
            kwargs["arm_means"] = tuple(value)
        elif key in _CONFIG_KEYS:
            kwargs[key] = _CONFIG_KEYS[key](value)
        elif key in ("lam",):
            kwargs["lam"] = float(value)
        else:
            raise ValueError(f"unknown config key {key!r}")
    try:
        return RunConfig(**kwargs)
    except TypeError as exc:
        raise ValueError(f"incomplete config: {exc}") from exc


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bitbandit",
                                 description="bit-constrained bandit simulations")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a seed sweep and write trace CSVs")
    run.add_argument("--config", help="flat JSON config file")
    run.add_argument("--algo", choices=ALGOS)
    run.add_argument("--d", type=int)
    run.add_argument("--T", type=int)
    run.add_argument("--B", type=int)
    run.add_argument("--K", type=int)
    run.add_argument("--seeds", help="e.g. 0..19 or 0,3,7")
    run.add_argument("--L", type=float)
    run.add_argument("--M", type=float)
    run.add_argument("--lambda", dest="lam", type=float)
    run.add_argument("--epsilon", type=float)
    run.add_argument("--delta", type=float)
    run.add_argument("--c-explore", dest="c_explore", type=float)
    run.add_argument("--link")
    run.add_argument("--arm-means", dest="arm_means")
    run.add_argument("--noise-scale", dest="noise_scale", type=float)
    run.add_argument("--out")

    diag = sub.add_parser("diag", help="print the lemma-check report for a trace CSV")
    diag.add_argument("trace", help="path to a trace CSV written by `bitbandit run`")
    return ap


def _print_diag_from_files(trace_path: str) -> int:
    rows = read_csv(trace_path)
    if not rows:
        print("empty trace")
        return 1
    phase2 = [r for r in rows if r.phase == 2]
    cov = sum(r.coverage_flag for r in phase2)
    overflow = sum(r.overflow_flag for r in rows)
    monotone = all(b.cum_regret >= a.cum_regret - 1e-12 for a, b in zip(rows, rows[1:]))
    print(f"trace: {trace_path}")
    print(f"rounds: {len(rows)}  phase-2 rounds: {len(phase2)}")
    print(f"final cum_regret: {rows[-1].cum_regret:.10g}")
    print(f"bits_cum final: {rows[-1].bits_cum}")
    print(f"regret monotone: {'PASS' if monotone else 'FAIL'}")
    print(f"overflow/no-transmission rounds: {overflow} "
          f"({'PASS' if overflow == 0 else 'WARN'})")
    if phase2:
        frac = cov / len(phase2)
        print(f"confidence-set coverage (phase 2): {frac:.4%} "
              f"({'PASS' if frac == 1.0 else 'WARN'})")

    sidecar = trace_path[:-4] + ".internals.json" if trace_path.endswith(".csv") else None
    if sidecar and os.path.exists(sidecar):
        with open(sidecar) as fh:
            diag = json.load(fh)
        print("recorded run diagnostics:")
        for key in sorted(diag):
            val = diag[key]
            if isinstance(val, bool):
                print(f"  {key}: {'PASS' if val else 'FAIL'}")
            elif isinstance(val, float):
                print(f"  {key}: {val:.6g}")
            else:
                print(f"  {key}: {val}")
    else:
        print("(no .internals.json next to the trace; run-time lemma checks unavailable)")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "diag":
        return _print_diag_from_files(args.trace)

    overrides = {
        k: getattr(args, k)
        for k in ("algo", "d", "T", "B", "K", "L", "M", "lam", "epsilon", "delta",
                  "c_explore", "link", "arm_means", "noise_scale", "out")
    }
    if args.seeds is not None:
        overrides["seeds"] = args.seeds
    if overrides.get("lam") is not None:
        overrides["lambda"] = overrides.pop("lam")
    else:
        overrides.pop("lam", None)
    try:
        cfg = parse_config(args.config, overrides)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    try:
        report = run_sweep(cfg)
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    rates = report.pass_rates()
    mean_final = np.mean(list(report.final_regret.values()))
    print(f"{cfg.algo}: {len(report.diags)} runs, mean final cum_regret {mean_final:.6g}")
    for key in sorted(rates):
        print(f"  {key}: {rates[key]:.0%}")
    if cfg.out:
        print(f"wrote traces + summary.csv + report.json under {cfg.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
