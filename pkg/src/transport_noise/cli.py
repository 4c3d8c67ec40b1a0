"""Command-line driver.

Exit codes: 0 success, 1 a requested check failed, 2 usage or
configuration error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .basis import real_to_complex
from .checks import identity_suite
from .dynamics import simulate_ensemble
from .formats import (ConfigError, build_config, config_to_text, dumps_json, ensemble_from_csv,
                      field_to_csv, h_tables_to_csv, parse_config_text, parse_modes, parse_value,
                      trajectory_to_csv, write_json)
from .lattice import FULL, THIRD, eps_table, lattice_sum_S, viscosity_threshold
from .measure import NORMAL_METHOD, SEEDING, SeededSampler, sample_white_noise
from .nonlinear import h_table
from .stats import BAND, autocorrelation_compare, qv_fit, qv_target, stationarity_report

OK, FAILED, USAGE, IO_ERROR = 0, 1, 2, 3

# printed reference value of the viscosity threshold with S = 4 pi
REFERENCE_THRESHOLD_4PI = "1.6062760546"

RUN_KEYS = {"n_paths": int, "first_stream": int}
BONFERRONI = ("each check uses a {band:g}-SE band (two-sided false alarm about 6e-5); "
              "with m simultaneous checks the family-wise rate is at most m times that")


class UsageError(Exception):
    pass


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# -- subcommands ---------------------------------------------------------------------

def cmd_constants(args) -> int:
    S = lattice_sum_S(rel_tol=args.tol)
    four_pi = 4 * np.pi
    threshold_4pi = viscosity_threshold(four_pi)
    matches = f"{threshold_4pi:.10f}" == REFERENCE_THRESHOLD_4PI
    report = {
        "S": {"value": S.value, "certified_error": S.tail_bound, "radius": S.radius,
              "rel_tol": args.tol},
        "thresholds": {"lattice_S": viscosity_threshold(S.value), "four_pi": threshold_4pi},
        "reference": {"four_pi_printed": REFERENCE_THRESHOLD_4PI,
                      "four_pi_computed_10_digits": f"{threshold_4pi:.10f}",
                      "matches_printed_digits": matches},
        "eps": {"N": list(range(1, args.eps_max + 1)),
                FULL: eps_table(args.eps_max, FULL), THIRD: eps_table(args.eps_max, THIRD)},
    }
    _emit(dumps_json(report), args.out)
    return FAILED if (args.check and not matches) else OK


def cmd_identities(args) -> int:
    results = identity_suite(args.n)
    if args.out:
        write_json(args.out, {"n": args.n, "checks": [r.to_dict() for r in results],
                              "passed": all(r.passed for r in results)})
    else:
        print(f"{'check':<22}{'cases':>8}{'worst':>14}{'tolerance':>12}  result")
        for r in results:
            print(f"{r.name:<22}{r.cases:>8}{r.statistic:>14.3e}{r.band:>12.1e}  "
                  f"{'pass' if r.passed else 'FAIL'}  ({r.detail})")
    return OK if all(r.passed for r in results) else FAILED


def cmd_coeffs(args) -> int:
    js = parse_modes(";".join(args.j)) if args.j else ((1, 0),)
    _emit(h_tables_to_csv([h_table(j, args.n) for j in js]), args.out)
    return OK


def cmd_sample(args) -> int:
    f = sample_white_noise(args.n, SeededSampler(args.seed, args.stream))
    if args.basis == "complex":
        f = real_to_complex(f)
    _emit(field_to_csv(f), args.out)
    return OK


def _resolve_run(args) -> tuple:
    values = {}
    if args.config:
        values.update(parse_config_text(Path(args.config).read_text(encoding="utf-8"), RUN_KEYS))
    for item in args.set or []:
        key, sep, raw = item.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        values[key] = parse_value(key, raw, RUN_KEYS)
    if args.threads is not None:
        values["threads"] = args.threads
    cfg = build_config(values)
    run = {"n_paths": values.get("n_paths", 1), "first_stream": values.get("first_stream", 0)}
    if run["n_paths"] < 1 or run["first_stream"] < 0:
        raise ConfigError("n_paths must be positive and first_stream non-negative")
    return cfg, run


def _qv_estimates(ens) -> list:
    obs = ens.config.observables
    out = []
    if len(ens.times) < 3 or ens.n_paths < 2:
        return out
    for i, l in enumerate(obs):
        for m in obs[i:]:
            target = qv_target(ens.config.nu, l) if l == m else 0.0
            fit = qv_fit(ens, l, m, target=target)
            out.append({"l": list(l), "m": list(m), **fit.to_dict()})
    return out


def cmd_evolve(args) -> int:
    cfg, run = _resolve_run(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    ens = simulate_ensemble(cfg, run["n_paths"], first_stream=run["first_stream"])
    t1 = time.perf_counter()
    (out / "config.txt").write_text(config_to_text(cfg, run), encoding="utf-8")
    (out / "trajectory.csv").write_text(trajectory_to_csv(ens), encoding="utf-8")
    aborted = {str(i): s for i, s in enumerate(ens.status) if s != "ok"}
    summary = {"version": __version__, **ens.metadata(), "run": run,
               "abort_reasons": aborted, "qv": _qv_estimates(ens)}
    write_json(out / "summary.json", summary)
    write_json(out / "timing.json", {"simulate_seconds": t1 - t0,
                                     "path_steps": run["n_paths"] * cfg.n_steps})
    return OK


def _load_run(path) -> tuple:
    d = Path(path)
    values = parse_config_text((d / "config.txt").read_text(encoding="utf-8"), RUN_KEYS)
    cfg = build_config(values)
    ens = ensemble_from_csv((d / "trajectory.csv").read_text(encoding="utf-8"), cfg)
    return cfg, ens


def _lags(args, ens_a, ens_b) -> np.ndarray:
    if args.lags:
        return np.array([float(x) for x in args.lags.split(",")])
    step = max(ens_a.config.dt * ens_a.config.record_stride, ens_b.config.dt * ens_b.config.record_stride)
    n = int(round(args.max_lag / step))
    return step * np.arange(0, n + 1)


def cmd_compare(args) -> int:
    _, a = _load_run(args.a)
    _, b = _load_run(args.b)
    mode = parse_modes(args.mode)[0]
    res = autocorrelation_compare(a, b, mode, _lags(args, a, b), seed=args.seed)
    report = {"heuristic": True,
              "tests": [{"name": "autocorrelation bands overlap", "statistic": res.distance,
                         "band": BAND, "passed": res.bands_overlap}],
              "comparison": {"a": str(args.a), "b": str(args.b), "mode": list(mode), **res.to_dict()},
              "bootstrap_seed": args.seed}
    _emit(dumps_json(report), args.out)
    return OK if res.bands_overlap else FAILED


def cmd_report(args) -> int:
    cfg, ens = _load_run(args.run)
    times = [float(t) for t in args.times.split(",")] if args.times else None
    st = stationarity_report(ens, times=times, min_paths=args.min_paths)
    tests = [{"name": "stationarity", "statistic": float(np.abs(st.z).max()), "band": BAND,
              "passed": st.passed, "flags": st.flags}]
    for q in _qv_estimates(ens):
        tests.append({"name": f"quadratic variation {tuple(q['l'])} x {tuple(q['m'])}",
                      "statistic": q["slope"], "band": q["ci"], "target": q["target"],
                      "passed": q["contains_target"]})
    report = {"run": str(args.run), "config": cfg.to_dict(), "seeding": SEEDING,
              "normal_method": NORMAL_METHOD, "note": BONFERRONI.format(band=BAND),
              "tests": tests, "stationarity": st.to_dict(),
              "passed": all(t["passed"] for t in tests)}
    _emit(dumps_json(report), args.out)
    return OK if report["passed"] else FAILED


# -- parser -----------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="transport-noise",
                                description="Galerkin transport-noise Euler and its Navier-Stokes limit.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("constants", help="lattice constant S, eps_N tables, viscosity thresholds")
    s.add_argument("--tol", type=float, default=1e-10, help="relative tolerance for S")
    s.add_argument("--eps-max", type=int, default=64, help="largest N in the eps tables")
    s.add_argument("--check", action="store_true",
                   help="exit 1 unless the S = 4 pi threshold matches the printed reference")
    s.add_argument("--out")
    s.set_defaults(func=cmd_constants)

    s = sub.add_parser("identities", help="run the algebraic identity suite")
    s.add_argument("--n", type=int, default=16, help="largest cutoff")
    s.add_argument("--out", help="write JSON instead of a table")
    s.set_defaults(func=cmd_identities)

    s = sub.add_parser("coeffs", help="nonlinear coefficient tables as CSV")
    s.add_argument("--j", action="append", help="output mode 'j1,j2' (repeatable)")
    s.add_argument("--n", type=int, required=True, help="cutoff for k and l")
    s.add_argument("--out")
    s.set_defaults(func=cmd_coeffs)

    s = sub.add_parser("sample", help="white-noise sample of the truncated field as CSV")
    s.add_argument("--n", type=int, required=True, help="cutoff")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--stream", type=int, default=0)
    s.add_argument("--basis", choices=("real", "complex"), default="real")
    s.add_argument("--out")
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("evolve", help="simulate an ensemble; writes config.txt, trajectory.csv, "
                                      "summary.json and timing.json")
    s.add_argument("--config", help="key = value configuration file")
    s.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a key")
    s.add_argument("--threads", type=int)
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_evolve)

    s = sub.add_parser("compare", help="compare stationary autocorrelations of two runs")
    s.add_argument("--a", required=True, help="run directory")
    s.add_argument("--b", required=True, help="run directory")
    s.add_argument("--mode", default="1,0")
    s.add_argument("--lags", help="comma-separated lags")
    s.add_argument("--max-lag", type=float, default=0.5)
    s.add_argument("--seed", type=int, default=0, help="bootstrap seed")
    s.add_argument("--out")
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("report", help="stationarity and quadratic-variation checks for a run")
    s.add_argument("--run", required=True, help="run directory")
    s.add_argument("--times", help="comma-separated recording times (default: all)")
    s.add_argument("--min-paths", type=int, default=100)
    s.add_argument("--out")
    s.set_defaults(func=cmd_report)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else OK
    try:
        return args.func(args)
    except (ConfigError, UsageError) as e:
        print(f"error: {e}", file=sys.stderr)
        return USAGE
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return USAGE
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return IO_ERROR


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
