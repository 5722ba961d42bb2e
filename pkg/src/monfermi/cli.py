"""Command line interface: sweep orchestration, tables, fits, collapses.

Subcommands
    simulate      run the configured (gamma, W, L) grid and write CSV tables
    fit           extract central charges from an entropy table
    collapse      scaling collapse of an entropy or charge table
    oracle-check  compare the Gaussian engine against the exact reference
    dt-check      compare ensemble entropy curves across step sizes

Exit codes: 0 success, 1 usage, 2 validation failure, 3 numerical failure.
All CSV floats are written with repr so they round-trip exactly; missing
values are empty fields, never zeros.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from collections import defaultdict

import numpy as np
from scipy.interpolate import PchipInterpolator

from . import __version__
from .analysis import (
    ParamSeries,
    charge_rescale,
    collapse_charge,
    collapse_entropy,
    entropy_rescale,
    fit_half_chain_charge,
    fit_profile_charge,
)
from .config import RunConfig, config_hash, load_run_config, parse_config
from .engine import (
    EvolutionSchedule,
    NoiseSource,
    disorder_seed,
    dt_convergence_check,
    generate_noise,
    run_ensemble,
    run_trajectory,
)
from .errors import DegenerateStateError, ParameterError
from .gaussian import correlation_matrix, entropy_profile, neel_state
from .model import ModelSpec, build_hamiltonian, make_propagator, sample_disorder
from .oracle import exact_observables, exact_step, neel_fock

WORKERS_ENV = "MONFERMI_WORKERS"

ORACLE_TOL = 1e-8


class _Parser(argparse.ArgumentParser):
    """argparse that exits 1 on usage errors (default would be 2)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _fmt(value) -> str:
    """CSV cell: repr for round-trip floats, empty for missing values."""
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return ""
        return repr(value)
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def _write_csv(path: str, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _read_csv(path: str):
    """-> (header list, list of row dicts with raw string values)."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ParameterError(f"{path}: empty table")
        return list(reader.fieldnames), list(reader)


def _cell(row, key: str, cast=float):
    raw = row.get(key)
    if raw is None:
        raise ParameterError(f"table is missing required column {key!r}")
    if raw == "":
        return None
    return cast(raw)


def _resolve_workers(args, cfg_workers=None) -> int:
    if getattr(args, "workers", None) is not None:
        return args.workers
    if cfg_workers is not None:
        return cfg_workers
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ParameterError(
                f"environment variable {WORKERS_ENV}={env!r} is not an integer"
            ) from None
    return 1


# ----------------------------------------------------------------- simulate


def _manifest_path(out_dir: str) -> str:
    return os.path.join(out_dir, "manifest.json")


def _write_manifest(out_dir: str, payload: dict) -> None:
    path = _manifest_path(out_dir)
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def cmd_simulate(args) -> int:
    cfg = load_run_config(args.config)
    out_dir = args.out or cfg.out
    if not out_dir:
        raise ParameterError("no output directory: pass --out or set out= in the config")
    workers = _resolve_workers(args, cfg.workers)
    os.makedirs(out_dir, exist_ok=True)
    tag = config_hash(cfg)

    cells = cfg.cells()
    specs = [
        ModelSpec(L=L, W=W, gamma=g, dt=cfg.dt, boundary=cfg.boundary, nnn=cfg.nnn)
        for (g, W, L) in cells
    ]
    sched = EvolutionSchedule(
        t_total=cfg.t_total,
        t_sat=cfg.t_sat,
        record_interval=cfg.record_interval,
        dt=cfg.dt,
    )
    manifest = {
        "config_hash": tag,
        "code_version": __version__,
        "created": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "status": "running",
        "workers": workers,
        "out": out_dir,
        "cells": [
            {
                "index": ci,
                "gamma": g,
                "W": W,
                "L": L,
                "disorder_seeds": [
                    disorder_seed(cfg.master_seed, ci, d)
                    for d in range(cfg.n_disorder)
                ],
            }
            for ci, (g, W, L) in enumerate(cells)
        ],
        "n_disorder": cfg.n_disorder,
        "n_traj": cfg.n_traj,
        "master_seed": cfg.master_seed,
    }
    _write_manifest(out_dir, manifest)

    result = run_ensemble(
        specs,
        sched,
        cfg.n_disorder,
        cfg.n_traj,
        cfg.master_seed,
        workers=workers,
        record_corr=cfg.record_corr,
        record_autocorr=cfg.record_autocorr,
        record_profile=cfg.record_profile,
        unit_cache_dir=os.path.join(out_dir, "units"),
        cache_tag=tag,
    )

    # entropy.csv: l = L/2 row from the saturation average; remaining cuts
    # from the post-burn-in profile snapshot when recorded
    ent_rows = []
    for s in result.stats:
        if s.observable == "entropy":
            ent_rows.append((s.gamma, s.W, s.L, int(s.index), s.mean, s.stderr, s.n_samples))
        elif s.observable == "profile" and int(s.index) != s.L // 2:
            ent_rows.append((s.gamma, s.W, s.L, int(s.index), s.mean, s.stderr, s.n_samples))
    ent_rows.sort(key=lambda r: (r[0], r[1], r[2], r[3]))
    _write_csv(
        os.path.join(out_dir, "entropy.csv"),
        ["gamma", "W", "L", "l", "S_mean", "S_stderr", "n"],
        ent_rows,
    )

    corr_rows = sorted(
        (
            (s.gamma, s.W, s.L, int(s.index), s.mean, s.stderr)
            for s in result.stats
            if s.observable == "correlation"
        ),
        key=lambda r: (r[0], r[1], r[2], r[3]),
    )
    _write_csv(
        os.path.join(out_dir, "correlations.csv"),
        ["gamma", "W", "L", "r", "C_mean", "C_stderr"],
        corr_rows,
    )

    auto_rows = sorted(
        (
            (s.gamma, s.W, s.L, s.index, s.mean, s.stderr)
            for s in result.stats
            if s.observable == "autocorr"
        ),
        key=lambda r: (r[0], r[1], r[2], r[3]),
    )
    _write_csv(
        os.path.join(out_dir, "autocorr.csv"),
        ["gamma", "W", "L", "tau", "C_mean", "C_stderr"],
        auto_rows,
    )

    orb_rows = sorted(
        (
            (s.gamma, s.W, s.L, int(s.index), s.mean)
            for s in result.stats
            if s.observable == "orbital"
        ),
        key=lambda r: (r[0], r[1], r[2], r[3]),
    )
    _write_csv(
        os.path.join(out_dir, "orbitals.csv"),
        ["gamma", "W", "L", "offset", "density_mean"],
        orb_rows,
    )

    manifest["status"] = "complete"
    manifest["finished"] = time.strftime("%Y-%m-%dT%H:%M:%S")
    manifest["n_units"] = result.n_units
    manifest["n_aborted"] = result.n_aborted
    manifest["aborted_units"] = [list(u) for u in result.aborted_units]
    _write_manifest(out_dir, manifest)
    print(
        f"simulate: {len(cells)} cells, {result.n_units} units, "
        f"{result.n_aborted} aborted -> {out_dir}"
    )
    return 0


# ---------------------------------------------------------------------- fit


def _group_entropy_rows(rows):
    """entropy.csv rows -> {(gamma, W): {L: {l: (mean, stderr, n)}}}"""
    grouped = defaultdict(lambda: defaultdict(dict))
    for row in rows:
        gamma = _cell(row, "gamma")
        W = _cell(row, "W")
        L = _cell(row, "L", int)
        l = _cell(row, "l", int)
        mean = _cell(row, "S_mean")
        stderr = _cell(row, "S_stderr")
        if mean is None:
            continue
        grouped[(gamma, W)][L][l] = (mean, stderr)
    return grouped


def cmd_fit(args) -> int:
    _, rows = _read_csv(args.table)
    grouped = _group_entropy_rows(rows)
    out_rows = []
    header = [
        "gamma", "W", "L", "mode", "c", "s0", "stderr_c", "stderr_s0",
        "window_lo", "window_hi", "n_points", "status",
    ]
    for (gamma, W), per_L in sorted(grouped.items()):
        if args.mode == "half-chain":
            pts = []
            for L, cuts in sorted(per_L.items()):
                entry = cuts.get(L // 2)
                if entry is None or entry[1] is None:
                    continue
                pts.append((L, entry[0], entry[1]))
            try:
                fit = fit_half_chain_charge(pts)
            except ParameterError as exc:
                out_rows.append(
                    (gamma, W, None, args.mode, None, None, None, None,
                     None, None, len(pts), f"skipped: {exc}")
                )
                continue
            out_rows.append(
                (gamma, W, None, args.mode, fit.c, fit.s0, fit.stderr_c,
                 fit.stderr_s0, min(fit.window), max(fit.window),
                 len(pts), "ok")
            )
        else:  # profile
            for L, cuts in sorted(per_L.items()):
                prof = [
                    (l, m, e) for l, (m, e) in sorted(cuts.items()) if e is not None
                ]
                window = None
                if args.window is not None:
                    window = tuple(args.window)
                try:
                    fit = fit_profile_charge(prof, L, window=window)
                except ParameterError as exc:
                    out_rows.append(
                        (gamma, W, L, args.mode, None, None, None, None,
                         None, None, len(prof), f"skipped: {exc}")
                    )
                    continue
                out_rows.append(
                    (gamma, W, L, args.mode, fit.c, fit.s0, fit.stderr_c,
                     fit.stderr_s0, min(fit.window), max(fit.window),
                     len(fit.window), "ok")
                )
    out_path = args.out or "fits.csv"
    if os.path.isdir(out_path):
        out_path = os.path.join(out_path, "fits.csv")
    _write_csv(out_path, header, out_rows)
    n_ok = sum(1 for r in out_rows if r[-1] == "ok")
    print(f"fit: {n_ok} fits, {len(out_rows) - n_ok} skipped -> {out_path}")
    return 0


# ----------------------------------------------------------------- collapse


def _series_from_table(rows, param: str, fixed: dict, value_cols):
    """Build per-L ParamSeries along `param` from table row dicts."""
    val_col, err_col = value_cols
    by_L = defaultdict(list)
    for row in rows:
        skip = False
        for key, want in fixed.items():
            have = _cell(row, key)
            if have is None or abs(have - want) > 1e-12:
                skip = True
                break
        if skip:
            continue
        p = _cell(row, param)
        y = _cell(row, val_col)
        d = _cell(row, err_col)
        L = _cell(row, "L", int)
        if p is None or y is None or d is None or L is None:
            continue
        by_L[L].append((p, y, d))
    series = []
    for L, triples in sorted(by_L.items()):
        triples.sort()
        ps = np.array([t[0] for t in triples])
        ys = np.array([t[1] for t in triples])
        ds = np.array([t[2] for t in triples])
        keep = np.concatenate(([True], np.diff(ps) > 1e-15))
        series.append(ParamSeries(L=L, p=ps[keep], y=ys[keep], d=ds[keep]))
    return series


def cmd_collapse(args) -> int:
    _, rows = _read_csv(args.table)
    fixed = {}
    for item in args.fixed or []:
        key, _, raw = item.partition("=")
        if not raw:
            raise ParameterError(f"--fixed expects key=value, got {item!r}")
        fixed[key] = float(raw)
    lo, hi = args.range
    if not lo < hi:
        raise ParameterError("empty search range")

    if args.ansatz == "entropy":
        # half-chain rows only: l = L/2
        rows = [r for r in rows if _cell(r, "l", int) == _cell(r, "L", int) // 2]
        series = _series_from_table(rows, args.param, fixed, ("S_mean", "S_stderr"))
        result = collapse_entropy(series, (lo, hi))
        rescaled = entropy_rescale(
            series,
            result.critical,
            {s.L: PchipInterpolator(s.p, s.y) for s in series},
        )
    else:  # charge
        rows = [r for r in rows if (r.get("mode") or "profile") == "profile"]
        series = _series_from_table(rows, args.param, fixed, ("c", "stderr_c"))
        result = collapse_charge(
            series, (lo, hi), tuple(args.alpha_range), tuple(args.beta_range)
        )
        rescaled = charge_rescale(series, result.critical, result.alpha, result.beta)

    header = [
        "ansatz", "param", "critical", "critical_lo", "critical_hi",
        "alpha", "alpha_lo", "alpha_hi", "beta", "beta_lo", "beta_hi",
        "eps_min", "status",
    ]
    row = (
        args.ansatz, args.param, result.critical,
        result.interval[0], result.interval[1],
        result.alpha,
        result.alpha_interval[0] if result.alpha_interval else None,
        result.alpha_interval[1] if result.alpha_interval else None,
        result.beta,
        result.beta_interval[0] if result.beta_interval else None,
        result.beta_interval[1] if result.beta_interval else None,
        result.eps_min, result.status,
    )
    out_path = args.out or "collapse.csv"
    if os.path.isdir(out_path):
        out_path = os.path.join(out_path, "collapse.csv")
    _write_csv(out_path, header, [row])
    if args.emit_triples and rescaled is not None:
        triples_path = os.path.splitext(out_path)[0] + "_triples.csv"
        x, y, d = rescaled
        order = np.argsort(x)
        _write_csv(
            triples_path,
            ["x", "y", "d"],
            [(float(x[i]), float(y[i]), float(d[i])) for i in order],
        )
        print(f"collapse: triples -> {triples_path}")
    print(
        f"collapse: {args.ansatz} critical={result.critical:.6g} "
        f"interval=({result.interval[0]:.6g}, {result.interval[1]:.6g}) "
        f"eps_min={result.eps_min:.6g} status={result.status} -> {out_path}"
    )
    return 0


# ------------------------------------------------------------- oracle-check


def cmd_oracle_check(args) -> int:
    L, N = args.L, args.N
    spec = ModelSpec(L=L, W=args.W, gamma=args.gamma, dt=args.dt, filling=N)
    dis = sample_disorder(args.W, L, disorder_seed(args.seed, 0, 0))
    h_mat = build_hamiltonian(spec, dis)
    prop = make_propagator(h_mat, args.dt)
    src = NoiseSource(master_seed=args.seed, stream=(0, 0), L=L)

    from .gaussian import apply_step

    U = neel_state(L) if N == L // 2 else np.eye(L, N, dtype=complex)
    state = neel_fock(L) if N == L // 2 else None
    if state is None:
        from .oracle import from_orbitals

        state = from_orbitals(U)
    convention = "post" if args.negative_control else "pre"
    max_dD = 0.0
    max_dS = 0.0
    for step in range(args.steps):
        noise = generate_noise(src, step, args.gamma, args.dt)
        U = apply_step(U, prop, noise, args.gamma, args.dt)
        state = exact_step(state, h_mat, noise, args.gamma, args.dt,
                           n_convention=convention)
        obs = exact_observables(state)
        D_g = correlation_matrix(U)
        max_dD = max(max_dD, float(np.max(np.abs(D_g - obs.D))))
        S_g = entropy_profile(D_g)
        max_dS = max(max_dS, float(np.max(np.abs(S_g - obs.entropies))))
    ok = max_dD <= ORACLE_TOL and max_dS <= ORACLE_TOL
    verdict = "PASS" if ok else "FAIL"
    print(
        f"oracle-check {verdict}: L={L} N={N} gamma={args.gamma} W={args.W} "
        f"steps={args.steps} max|dD|={max_dD:.3e} max|dS|={max_dS:.3e} "
        f"tol={ORACLE_TOL:.0e}"
    )
    if not ok:
        raise DegenerateStateError(
            f"oracle deviation above tolerance: max|dD|={max_dD:.3e}, "
            f"max|dS|={max_dS:.3e}"
        )
    return 0


# ----------------------------------------------------------------- dt-check


def cmd_dt_check(args) -> int:
    values = parse_config(
        args.config,
        require=("gamma", "W", "L", "master_seed", "t_total", "t_sat",
                 "record_interval", "dts"),
    )
    for key in ("gamma", "W", "L"):
        if len(values[key]) != 1:
            raise ParameterError(f"dt-check wants exactly one {key} value")
    spec = ModelSpec(
        L=values["L"][0],
        W=values["W"][0],
        gamma=values["gamma"][0],
        dt=values["dts"][0],
        boundary=values.get("boundary", "periodic"),
        nnn=values.get("nnn", False),
    )
    workers = _resolve_workers(args, values.get("workers"))
    report = dt_convergence_check(
        spec,
        values["dts"],
        t_total=values["t_total"],
        t_sat=values["t_sat"],
        record_interval=values["record_interval"],
        n_disorder=values.get("n_disorder", 1),
        n_traj=values.get("n_traj", 1),
        master_seed=values["master_seed"],
        workers=workers,
    )
    out_path = args.out or "dtcheck.csv"
    if os.path.isdir(out_path):
        out_path = os.path.join(out_path, "dtcheck.csv")
    rows = []
    for i, dt in enumerate(report.dts):
        for k, t in enumerate(report.times):
            rows.append((dt, float(t), float(report.means[i, k]),
                         float(report.stderrs[i, k])))
    _write_csv(out_path, ["dt", "t", "S_mean", "S_stderr"], rows)
    for i, j, dev in report.pairs:
        print(f"dt-check: dt={report.dts[i]} vs dt={report.dts[j]}: "
              f"max deviation {dev:.3f} combined-stderr units")
    print(f"dt-check: max deviation {report.max_dev_sigma:.3f} sigma -> {out_path}")
    return 0


# --------------------------------------------------------------------- main


def build_parser() -> _Parser:
    parser = _Parser(
        prog="monfermi",
        description="Monitored free fermions in a disordered chain: "
        "simulation sweeps, entropy fits, scaling collapses.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run the configured sweep grid")
    p_sim.add_argument("--config", required=True, help="key = value sweep file")
    p_sim.add_argument("--out", help="output directory (overrides config)")
    p_sim.add_argument("--workers", type=int, help=f"parallel workers (or ${WORKERS_ENV})")
    p_sim.add_argument(
        "--resume",
        action="store_true",
        help="explicitly allow continuing a partial run (the default behavior; "
        "finished units in <out>/units are always reused)",
    )
    p_sim.set_defaults(func=cmd_simulate)

    p_fit = sub.add_parser("fit", help="central-charge fits from an entropy table")
    p_fit.add_argument("--table", required=True, help="entropy.csv from simulate")
    p_fit.add_argument("--mode", choices=("half-chain", "profile"), default="half-chain")
    p_fit.add_argument("--window", type=float, nargs=2, metavar=("LO", "HI"),
                       help="profile-mode cut window (default L/4 .. 3L/4)")
    p_fit.add_argument("--out", help="output CSV path or directory")
    p_fit.set_defaults(func=cmd_fit)

    p_col = sub.add_parser("collapse", help="scaling collapse of entropy or charge data")
    p_col.add_argument("--table", required=True,
                       help="entropy.csv (ansatz=entropy) or fits.csv (ansatz=charge)")
    p_col.add_argument("--ansatz", choices=("entropy", "charge"), required=True)
    p_col.add_argument("--param", choices=("gamma", "W"), required=True,
                       help="driving parameter to scan")
    p_col.add_argument("--range", type=float, nargs=2, required=True,
                       metavar=("LO", "HI"), help="search range for the critical value")
    p_col.add_argument("--alpha-range", type=float, nargs=2, default=(0.5, 8.0),
                       metavar=("LO", "HI"))
    p_col.add_argument("--beta-range", type=float, nargs=2, default=(0.0, 6.0),
                       metavar=("LO", "HI"))
    p_col.add_argument("--fixed", action="append", metavar="KEY=VALUE",
                       help="hold a column fixed, e.g. --fixed W=0.0")
    p_col.add_argument("--emit-triples", action="store_true",
                       help="also write the rescaled (x, y, d) triples")
    p_col.add_argument("--out", help="output CSV path or directory")
    p_col.set_defaults(func=cmd_collapse)

    p_oc = sub.add_parser("oracle-check",
                          help="Gaussian engine vs exact reference, shared noise")
    p_oc.add_argument("--L", type=int, default=6)
    p_oc.add_argument("--N", type=int, default=3)
    p_oc.add_argument("--gamma", type=float, default=0.1)
    p_oc.add_argument("--W", type=float, default=1.0)
    p_oc.add_argument("--dt", type=float, default=0.05)
    p_oc.add_argument("--steps", type=int, default=50)
    p_oc.add_argument("--seed", type=int, default=1234)
    p_oc.add_argument(
        "--negative-control",
        action="store_true",
        help="run the reference with the mismatched occupation convention; "
        "the check must FAIL, proving it guards the convention",
    )
    p_oc.set_defaults(func=cmd_oracle_check)

    p_dt = sub.add_parser("dt-check", help="step-size convergence comparison")
    p_dt.add_argument("--config", required=True,
                      help="config with a dts = ... list and one grid cell")
    p_dt.add_argument("--out", help="output CSV path or directory")
    p_dt.add_argument("--workers", type=int)
    p_dt.set_defaults(func=cmd_dt_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DegenerateStateError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
