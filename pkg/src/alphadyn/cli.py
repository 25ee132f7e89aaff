"""Command-line front end composing the numeric modules into workflows.

Subcommands:

  spectrum   sweep eigenvalue branches over a C* grid, locate exceptional
             points, write spectrum.csv / eps.csv / summary.txt
  check      evaluate the three rigorous spectral criteria for a profile,
             write checks.csv / checks.txt
  evolve     run the nonlinear simulation, write timeseries.csv, the
             saturated alpha profile, and a restart checkpoint
  reversals  run (or re-analyze with --replot) a simulation and write
             events.csv, stack.csv, and an asymmetry summary
  repro      emit ready-to-run configuration files for the reference
             workflows

Common flags: --config, --out, --seed, --threads, --format.  CSV is the
interchange format and is always written; --format json adds .json mirrors
of the same tables.  Exit codes: 0 success, 2 configuration or validation
error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from typing import List, Optional, Tuple

import numpy as np

from .config import (
    Config,
    ConfigError,
    format_float,
    load_config,
    read_csv,
    write_csv,
    write_json,
    write_text,
)
from .dynamics import (
    SimConfig,
    SimulationDivergedError,
    TimeSeries,
    evolve,
    save_checkpoint,
)
from .eigen import EigenConvergenceError, eigenvalues
from .operator import RadialGrid, assemble
from .profiles import (
    AlphaProfile,
    constant_profile,
    kinematic_profile,
    polynomial_profile,
)
from .reversal import (
    align_and_average,
    asymmetry,
    detect_reversals,
    load_series,
    rescale_to_geo,
)
from .spectral import (
    BracketError,
    anti_dynamo_check,
    find_exceptional_points,
    finiteness_norm_check,
    im_bound_check,
    sweep,
)

__all__ = ["main"]

_NUMERICAL_ERRORS = (
    SimulationDivergedError,
    EigenConvergenceError,
    BracketError,
    np.linalg.LinAlgError,
    FloatingPointError,
)


# -- shared plumbing -------------------------------------------------------


def _load_config(args) -> Config:
    if args.config is None:
        return Config()
    return load_config(args.config)


def _outdir(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _threads(args) -> int:
    if args.threads is not None:
        t = args.threads
    else:
        env = os.environ.get("ALPHADYN_THREADS")
        if env is None:
            t = 1
        else:
            try:
                t = int(env)
            except ValueError:
                raise ConfigError(
                    f"ALPHADYN_THREADS = {env!r}: expected an integer"
                ) from None
    if t < 1:
        raise ConfigError("thread count must be >= 1")
    return t


def _profile(cfg: Config, section: str, default_c: float) -> Tuple[AlphaProfile, str]:
    """Profile from config keys, plus a human-readable description."""
    kind = cfg.get_str(section, "profile", "kinematic")
    c = cfg.get_float(section, "c", default_c)
    desc = f"{kind} shape, amplitude {c:g}"
    if kind == "constant":
        return constant_profile(c), desc
    if kind == "kinematic":
        return kinematic_profile(c), desc
    if kind == "polynomial":
        coeffs = cfg.get_floats(section, "coefficients")
        if coeffs is None:
            raise ConfigError("polynomial profile needs coefficients = a0,a1,...")
        return polynomial_profile(c, coeffs), desc
    raise ConfigError(f"unknown profile {kind!r} (constant, kinematic, polynomial)")


def _write_table(out, name, fmt, header, rows) -> List[str]:
    """Write one output table: always CSV, plus a JSON mirror on request.
    Returns the paths written."""
    rows = list(rows)
    paths = [os.path.join(out, name + ".csv")]
    write_csv(paths[0], header, rows)
    if fmt == "json":
        jpath = os.path.join(out, name + ".json")
        write_json(jpath, {"columns": list(header), "rows": rows})
        paths.append(jpath)
    return paths


# -- spectrum --------------------------------------------------------------


def cmd_spectrum(args, cfg: Config) -> int:
    sec = "spectrum"
    shape, desc = _profile(cfg, sec, default_c=6.78)
    c_min = cfg.get_float(sec, "c_min", 0.05)
    c_max = cfg.get_float(sec, "c_max", 1.1)
    c_points = cfg.get_int(sec, "c_points", 43)
    l = cfg.get_int(sec, "l", 1)
    n = cfg.get_int(sec, "n", 200)
    k = cfg.get_int(sec, "k", 4)
    scheme = cfg.get_str(sec, "scheme", "flux")
    if c_points < 1:
        raise ConfigError("c_points must be >= 1 (empty sweep grid)")
    if not c_min < c_max and c_points > 1:
        raise ConfigError("need c_min < c_max")
    grid = np.linspace(c_min, c_max, c_points)

    result = sweep(
        shape, grid, l=l, k_leading=k, n=n, scheme=scheme, threads=_threads(args)
    )
    eps = find_exceptional_points(
        result,
        c_tol=cfg.get_float(sec, "ep_c_tol", 1e-4),
        refine_n=cfg.get_int(sec, "ep_refine_n", 800),
    )

    out = _outdir(args)
    rows = [
        (float(cs), br.branch_id, float(lam.real), float(lam.imag))
        for br in result
        for cs, lam in zip(br.c_grid, br.lam_path)
    ]
    paths = _write_table(
        out, "spectrum", args.format,
        ("C_star", "branch_id", "re_lambda", "im_lambda"), rows,
    )
    ep_rows = [
        (ep.c_star, float(ep.lam.real), ep.branch_a, ep.branch_b) for ep in eps
    ]
    paths += _write_table(
        out, "eps", args.format,
        ("C_star_ep", "re_lambda_ep", "branch_a", "branch_b"), ep_rows,
    )

    lead1 = result.solver()(1.0).pairs[0].lam
    lines = [
        "spectral sweep summary",
        f"shape: {desc}, l = {l}, n = {n}, scheme = {scheme}",
        f"C* grid: {c_points} points in [{c_min:g}, {c_max:g}], "
        f"{len(result)} branches tracked",
        f"leading eigenvalue at C* = 1: {format_float(lead1.real)} "
        f"+ {format_float(lead1.imag)}j",
        f"exceptional points found: {len(eps)}",
    ]
    for ep in eps:
        tag = " (unresolved)" if ep.unresolved else ""
        lines.append(
            f"  C*_ep = {format_float(ep.c_star)}, Re lambda = "
            f"{format_float(ep.lam.real)}, branches {ep.branch_a}/{ep.branch_b}, "
            f"distance to zero growth = {format_float(abs(ep.lam.real))}{tag}"
        )
    spath = os.path.join(out, "summary.txt")
    write_text(spath, "\n".join(lines) + "\n")
    for p in paths + [spath]:
        print(f"wrote {p}")
    return 0


# -- check -----------------------------------------------------------------


_REPORT_FIELDS = (
    "criterion", "l", "alpha_sup", "alpha_deriv_sup", "j_minus", "j_plus",
    "satisfied", "margin", "threshold_C", "quoted_threshold_C",
    "quoted_consistent",
)


def cmd_check(args, cfg: Config) -> int:
    sec = "check"
    profile, desc = _profile(cfg, sec, default_c=1.0)
    l = cfg.get_int(sec, "l", 1)
    n = cfg.get_int(sec, "n", 200)
    scheme = cfg.get_str(sec, "scheme", "flux")

    spectrum = eigenvalues(assemble(l, profile, RadialGrid(n), scheme=scheme))
    reports = [
        anti_dynamo_check(profile, l),
        im_bound_check(spectrum, profile, l),
        finiteness_norm_check(profile, l),
    ]

    out = _outdir(args)
    rows = [
        tuple(getattr(rep, f) for f in _REPORT_FIELDS) for rep in reports
    ]
    paths = _write_table(out, "checks", args.format, _REPORT_FIELDS, rows)

    blocks = []
    for rep in reports:
        d = dataclasses.asdict(rep)
        lines = [f"criterion: {d.pop('criterion')}"]
        for key, val in d.items():
            if isinstance(val, float):
                val = format_float(val)
            lines.append(f"  {key} = {val}")
        blocks.append("\n".join(lines))
    tpath = os.path.join(out, "checks.txt")
    write_text(tpath, f"profile: {desc}\n\n" + "\n\n".join(blocks) + "\n")
    for p in paths + [tpath]:
        print(f"wrote {p}")
    for rep in reports:
        print(f"{rep.criterion}: {'satisfied' if rep.satisfied else 'violated'} "
              f"(margin {rep.margin:.6g})")
    return 0


# -- evolve ----------------------------------------------------------------


def _sim_config(cfg: Config, args, sec: str = "evolve") -> SimConfig:
    c = cfg.get_float(sec, "c")
    if c is None:
        raise ConfigError(f"[{sec}] needs c = <dynamo amplitude>")
    seed = args.seed if args.seed is not None else cfg.get_int(sec, "seed", 0)
    snaps = cfg.get_floats(sec, "snapshot_times", ())
    try:
        return SimConfig(
            c=c,
            d_noise=cfg.get_float(sec, "d_noise", 0.0),
            t_end=cfg.get_float(sec, "t_end", 10.0),
            tau_corr=cfg.get_float(sec, "tau_corr", 0.02),
            e0_mag=cfg.get_float(sec, "e0_mag", 100.0),
            n=cfg.get_int(sec, "n", 200),
            dt=cfg.get_float(sec, "dt"),
            seed=seed,
            record_stride=cfg.get_int(sec, "record_stride", 50),
            scheme=cfg.get_str(sec, "scheme", "cnab2"),
            quenching=cfg.get_bool(sec, "quenching", True),
            init_amplitude=cfg.get_float(sec, "init_amplitude", 1e-4),
            snapshot_times=snaps,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _write_run(out: str, fmt: str, series: TimeSeries) -> List[str]:
    paths = _write_table(
        out, "timeseries", fmt,
        ("t", "dipole_surface", "toroidal_mid", "energy_total"),
        zip(series.t, series.dipole, series.toroidal_mid, series.energy),
    )
    r = series.r_nodes
    if series.saturated_alpha is not None:
        paths += _write_table(
            out, "alpha_snapshot", fmt, ("r", "alpha"),
            zip(r, series.saturated_alpha),
        )
    for i, (t_snap, prof) in enumerate(series.alpha_snapshots, start=1):
        paths += _write_table(
            out, f"alpha_snapshot_{i:03d}", fmt, ("r", "alpha"), zip(r, prof)
        )
    if series.final_state is not None:
        ck = os.path.join(out, "state.ckpt")
        save_checkpoint(ck, series.final_state)
        paths.append(ck)
    return paths


def cmd_evolve(args, cfg: Config) -> int:
    sim = _sim_config(cfg, args)
    series = evolve(sim)
    out = _outdir(args)
    paths = _write_run(out, args.format, series)
    for p in paths:
        print(f"wrote {p}")
    print(
        f"run: C = {sim.c:g}, D = {sim.d_noise:g}, reached t = "
        f"{series.t[-1]:.6g} with {series.t.size} samples"
    )
    return 0


# -- reversals -------------------------------------------------------------


def _series_from_csv(path: str) -> TimeSeries:
    header, rows = read_csv(path)
    want = ["t", "dipole_surface", "toroidal_mid", "energy_total"]
    if header != want:
        raise ConfigError(f"{path}: expected columns {want}, found {header}")
    data = np.array([[float(c) for c in row] for row in rows])
    if data.shape[0] < 2:
        raise ConfigError(f"{path}: need at least two samples")
    return TimeSeries(
        t=data[:, 0], dipole=data[:, 1], toroidal_mid=data[:, 2],
        energy=data[:, 3],
    )


def cmd_reversals(args, cfg: Config) -> int:
    sec = "reversals"
    out = _outdir(args)
    ts_csv = os.path.join(out, "timeseries.csv")
    run_paths: List[str] = []

    ext = cfg.get_str(sec, "series")
    if ext is not None:
        series = load_series(ext)
    elif args.replot:
        if not os.path.exists(ts_csv):
            raise ConfigError(f"--replot: no {ts_csv} to re-analyze")
        series = _series_from_csv(ts_csv)
    else:
        sim = _sim_config(cfg, args)
        series = evolve(sim)
        run_paths = _write_run(out, args.format, series)

    t_scale = cfg.get_float(sec, "time_scale")
    v_scale = cfg.get_float(sec, "vadm_scale")
    if t_scale is not None or v_scale is not None:
        series = rescale_to_geo(
            series,
            1.0 if t_scale is None else t_scale,
            1.0 if v_scale is None else v_scale,
        )

    events = detect_reversals(
        series,
        threshold_frac=cfg.get_float(sec, "threshold_frac", 0.5),
        persistence=cfg.get_float(sec, "persistence", 1.0),
        plateau_window=cfg.get_float(sec, "plateau_window"),
    )
    paths = _write_table(
        out, "events", args.format,
        ("t_cross", "t_start", "t_end", "polarity_before"),
        [(ev.t_cross, ev.t_start, ev.t_end, ev.polarity_before) for ev in events],
    )

    lines = [
        "reversal analysis summary",
        f"samples: {series.t.size} on t in [{series.t[0]:g}, {series.t[-1]:g}]",
        f"events detected: {len(events)}",
    ]
    if events:
        stack = align_and_average(
            series, events,
            t_before=cfg.get_float(sec, "t_before", 0.4),
            t_after=cfg.get_float(sec, "t_after", 0.1),
            n_grid=cfg.get_int(sec, "n_grid", 257),
        )
        paths += _write_table(
            out, "stack", args.format,
            ("t_rel", "mean_abs_dipole", "n_windows"),
            [
                (float(tr), float(v), stack.n_windows)
                for tr, v in zip(stack.t_rel, stack.mean_abs_dipole)
            ],
        )
        rep = asymmetry(stack)
        lines.append(f"stacked windows: {stack.n_windows} ({stack.skipped} skipped)")
        if rep.undefined:
            lines.append("asymmetry: undefined (stack never reaches the 90%/10% levels)")
        else:
            lines.append(f"plateau level: {format_float(rep.plateau)}")
            lines.append(f"decay time (90% -> 10%): {format_float(rep.tau_dec)}")
            lines.append(f"recovery time (10% -> 90%): {format_float(rep.tau_rec)}")
            lines.append(f"asymmetry ratio tau_dec / tau_rec: {format_float(rep.ratio)}")
    else:
        lines.append("no stack written (no events)")
    spath = os.path.join(out, "reversal_summary.txt")
    write_text(spath, "\n".join(lines) + "\n")

    for p in run_paths + paths + [spath]:
        print(f"wrote {p}")
    print(lines[2])
    if len(lines) > 4 and events:
        print(lines[-1])
    return 0


# -- repro -----------------------------------------------------------------


def _repro_bundle() -> List[Tuple[str, str, str, Config]]:
    """Named reference configurations:
    (file name, subcommand, what it shows, config)."""

    def mk(section: str, **kv) -> Config:
        c = Config()
        for key, val in kv.items():
            c.set(section, key, val)
        return c

    def noisy(c, d):
        return mk(
            "evolve", c=float(c), d_noise=float(d), t_end=50.0, n=200,
            record_stride=10, seed=0,
        )

    bundle = [
        (
            "constant_sweep.cfg",
            "spectrum",
            "constant-shape branch diagram; the leading branch crosses zero "
            "growth near C* = 4.4934 and all eigenvalues stay real",
            mk("spectrum", profile="constant", c=1.0, c_min=0.5, c_max=5.0,
               c_points=46, n=200),
        ),
        (
            "kinematic_ep_sweep.cfg",
            "spectrum",
            "kinematic shape at the oscillatory threshold amplitude; an "
            "exceptional point appears at C* < 1 where two real branches "
            "merge into the complex leading pair",
            mk("spectrum", profile="kinematic", c=6.78, c_min=0.05, c_max=1.1,
               c_points=43, n=200),
        ),
        (
            "criteria.cfg",
            "check",
            "the three rigorous spectral criteria for the kinematic shape",
            mk("check", profile="kinematic", c=1.0, n=200),
        ),
        (
            "oscillatory.cfg",
            "evolve",
            "noise-free run just above onset: periodic sign-changing dipole",
            mk("evolve", c=6.8, d_noise=0.0, t_end=40.0, n=200, seed=0),
        ),
        (
            "anharmonic.cfg",
            "evolve",
            "noise-free run near the oscillatory/steady boundary: strongly "
            "anharmonic cycles",
            mk("evolve", c=7.237, d_noise=0.0, t_end=40.0, n=200, seed=0),
        ),
        (
            "steady.cfg",
            "evolve",
            "noise-free run past the boundary: the oscillation locks into a "
            "steady dynamo after the transient",
            mk("evolve", c=7.24, d_noise=0.0, t_end=40.0, n=200, seed=0),
        ),
        ("noise_c20_d5.cfg", "evolve", "noisy run below reversal onset",
         noisy(20, 5)),
        ("noise_c20_d6.cfg", "evolve", "noisy run at reversal onset",
         noisy(20, 6)),
        (
            "noise_c50_d6.cfg",
            "evolve",
            "strongly supercritical noisy run; reversal rate well above the "
            "C = 20 case",
            noisy(50, 6),
        ),
    ]
    stack = noisy(20, 6)
    for key, val in (
        ("threshold_frac", 0.5), ("persistence", 1.0),
        ("t_before", 0.4), ("t_after", 0.1),
    ):
        stack.set("reversals", key, val)
    bundle.append(
        (
            "reversal_stack.cfg",
            "reversals",
            "reversal detection plus the aligned average of |dipole| around "
            "each polarity transition (slow decay, fast recovery)",
            stack,
        )
    )
    return bundle


def cmd_repro(args, cfg: Config) -> int:
    out = _outdir(args)
    manifest = [
        "reference configurations",
        "",
        "run each with the subcommand named by its section, e.g.",
        "  alphadyn evolve --config oscillatory.cfg --out runs/oscillatory",
        "  alphadyn reversals --config reversal_stack.cfg --out runs/stack",
        "",
    ]
    written = []
    for name, subcommand, what, bundle_cfg in _repro_bundle():
        path = os.path.join(out, name)
        bundle_cfg.save(path)
        written.append(path)
        manifest.append(f"{name}  [{subcommand}]")
        manifest.append(f"    {what}")
    mpath = os.path.join(out, "MANIFEST.txt")
    write_text(mpath, "\n".join(manifest) + "\n")
    for p in written + [mpath]:
        print(f"wrote {p}")
    return 0


# -- entry point -----------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="alphadyn",
        description="spectral analysis and nonlinear simulation of the "
        "spherical mean-field dynamo",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH",
                        help="key = value configuration file")
    common.add_argument("--out", metavar="DIR", default=".",
                        help="output directory, created if missing (default .)")
    common.add_argument("--seed", type=int, metavar="N",
                        help="override the simulation seed")
    common.add_argument("--threads", type=int, metavar="N",
                        help="sweep worker threads "
                             "(default: ALPHADYN_THREADS or 1)")
    common.add_argument("--format", choices=("csv", "json"), default="csv",
                        help="csv (default) or json, which adds .json mirrors "
                             "of every table")

    sub = parser.add_subparsers(dest="cmd")
    sp = sub.add_parser("spectrum", parents=[common],
                        help="eigenvalue branches over a C* grid")
    sp.set_defaults(func=cmd_spectrum)
    ck = sub.add_parser("check", parents=[common],
                        help="rigorous spectral criteria for a profile")
    ck.set_defaults(func=cmd_check)
    ev = sub.add_parser("evolve", parents=[common],
                        help="nonlinear quenched simulation")
    ev.set_defaults(func=cmd_evolve)
    rv = sub.add_parser("reversals", parents=[common],
                        help="reversal detection and stacked averaging")
    rv.add_argument("--replot", action="store_true",
                    help="re-analyze an existing timeseries.csv in --out "
                         "without re-simulating")
    rv.set_defaults(func=cmd_reversals)
    rp = sub.add_parser("repro", parents=[common],
                        help="write the reference configuration bundle")
    rp.set_defaults(func=cmd_repro)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        return 0 if code is None else int(code)
    if getattr(args, "func", None) is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        cfg = _load_config(args)
        return args.func(args, cfg)
    except _NUMERICAL_ERRORS as exc:
        print(f"alphadyn: numerical failure: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, ValueError) as exc:
        print(f"alphadyn: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"alphadyn: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
