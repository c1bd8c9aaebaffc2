"""Batch command-line front end.

Subcommands
-----------
simulate   run one pulsed experiment, write a time-tag stream
analyze    extract g2(0) or HOM visibility from stream files
fit        fit a decay histogram (or fold a lifetime stream) and report
sweep      lifetime ratio and visibility versus cavity detuning
oracle     density-matrix purity versus the closed-form visibility

Every command writes its data files plus a ``<command>_manifest.json``
listing the outputs, the configuration digest, the seed, and the wall-clock
duration.  Data files are byte-identical when a command is re-run with the
same configuration and seed, for any ``--workers`` value.

Exit codes: 0 success, 2 configuration error, 3 I/O failure, 4 analysis or
fit failure.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, analysis, fitting, tables
from .core import CascadeConfig, EffectiveRates, TimeGrid, effective_rates, \
    reduced_purity, visibility_from_ratio
from .errors import AnalysisError, ConfigError, ParameterError, \
    PlateauSelectionError, QDCascadeError
from .montecarlo import ExperimentConfig, simulate
from .streams import TimeTagStream

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_ANALYSIS = 4

_CASCADE_KEYS = {
    "tau_xx_bare_ps", "tau_x_bare_ps", "purcell_f", "kappa_ghz",
    "cavity_anchor", "cavity_detuning_ghz", "detuning_xx_ghz",
    "detuning_x_ghz", "second_mode_offset_ghz", "p_xx_initial",
}
_EXPERIMENT_KEYS = {
    "n_pulses", "collected", "pulse_period_ps", "prep_probability",
    "collection_efficiency", "leakage_prob", "ambient_rate_per_ps",
    "irf_fwhm_ps", "bs_reflectance", "bs_transmittance",
    "classical_visibility", "polarization", "delay_arm_ps", "echo_prob",
    "echo_delay_ps", "seed",
}


def _getfloat(section, key, default=None):
    if key not in section:
        if default is None:
            raise ConfigError(f"missing required key '{key}'")
        return default
    try:
        return float(section[key])
    except ValueError as exc:
        raise ConfigError(f"key '{key}': not a number ({section[key]!r})") from exc


def _getint(section, key, default=None):
    value = _getfloat(section, key, default)
    if value != int(value):
        raise ConfigError(f"key '{key}': expected an integer")
    return int(value)


def load_config(path, overrides=None):
    """Parse an INI experiment configuration into an ExperimentConfig.

    ``overrides`` maps experiment-section keys to replacement values
    (command-line flags win over file values).
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    read = parser.read(path)
    if not read:
        raise OSError(f"cannot read config file {path}")
    for section, allowed in (("cascade", _CASCADE_KEYS),
                             ("experiment", _EXPERIMENT_KEYS)):
        if section not in parser:
            raise ConfigError(f"missing [{section}] section in {path}")
        unknown = set(parser[section]) - allowed
        if unknown:
            raise ConfigError(
                f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}"
            )

    cas = parser["cascade"]
    second = None
    if "second_mode_offset_ghz" in cas:
        second = _getfloat(cas, "second_mode_offset_ghz")
    if "detuning_xx_ghz" in cas or "detuning_x_ghz" in cas:
        cascade = CascadeConfig.from_lifetimes(
            _getfloat(cas, "tau_xx_bare_ps"), _getfloat(cas, "tau_x_bare_ps"),
            _getfloat(cas, "purcell_f"), _getfloat(cas, "kappa_ghz"),
            _getfloat(cas, "detuning_xx_ghz"), _getfloat(cas, "detuning_x_ghz"),
            second_mode_offset=second,
            p_xx_initial=_getfloat(cas, "p_xx_initial", 1.0),
        )
    else:
        anchor = cas.get("cavity_anchor", "xx").strip().lower()
        cascade = CascadeConfig.with_cavity_at(
            _getfloat(cas, "tau_xx_bare_ps"), _getfloat(cas, "tau_x_bare_ps"),
            _getfloat(cas, "purcell_f"), _getfloat(cas, "kappa_ghz"),
            _getfloat(cas, "cavity_detuning_ghz", 0.0), anchor=anchor,
            second_mode_offset=second,
            p_xx_initial=_getfloat(cas, "p_xx_initial", 1.0),
        )

    exp = dict(parser["experiment"])
    if overrides:
        exp.update({k: str(v) for k, v in overrides.items() if v is not None})
    section = exp
    delay = section.get("delay_arm_ps")
    return ExperimentConfig(
        cascade=cascade,
        n_pulses=_getint(section, "n_pulses"),
        collected=section.get("collected", "x").strip().lower(),
        pulse_period=_getfloat(section, "pulse_period_ps", 13100.0),
        prep_probability=_getfloat(section, "prep_probability", 1.0),
        collection_efficiency=_getfloat(section, "collection_efficiency", 1.0),
        leakage_prob=_getfloat(section, "leakage_prob", 0.0),
        ambient_rate=_getfloat(section, "ambient_rate_per_ps", 0.0),
        irf_fwhm=_getfloat(section, "irf_fwhm_ps", 43.0),
        bs_reflectance=_getfloat(section, "bs_reflectance", 0.525),
        bs_transmittance=_getfloat(section, "bs_transmittance", 0.475),
        classical_visibility=_getfloat(section, "classical_visibility", 0.985),
        polarization=section.get("polarization", "co").strip().lower(),
        delay_arm=None if delay is None else float(delay),
        echo_prob=_getfloat(section, "echo_prob", 0.0),
        echo_delay=_getfloat(section, "echo_delay_ps", 6000.0),
        seed=_getint(section, "seed", 0),
    )


def _derived_seed(base, *key):
    """Deterministic 64-bit child seed for sweep points and sub-runs."""
    ss = np.random.SeedSequence(entropy=base, spawn_key=tuple(key))
    return int(ss.generate_state(1, np.uint64)[0])


class _Manifest:
    def __init__(self, command, out_dir, digest, seed):
        self.command = command
        self.out_dir = Path(out_dir)
        self.digest = digest
        self.seed = seed
        self.outputs = []
        self.t0 = time.monotonic()

    def path_for(self, name):
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.outputs.append(name)
        return self.out_dir / name

    def write(self):
        payload = {
            "command": self.command,
            "config_digest": self.digest,
            "seed": self.seed,
            "version": __version__,
            "outputs": self.outputs,
            "duration_s": round(time.monotonic() - self.t0, 3),
        }
        self.out_dir.mkdir(parents=True, exist_ok=True)
        path = self.out_dir / f"{self.command}_manifest.json"
        path.write_text(json.dumps(payload, indent=2) + "\n")
        return path


# ---------------------------------------------------------------------------
# subcommands

def _cmd_simulate(args):
    overrides = {
        "seed": args.seed,
        "n_pulses": args.n_pulses,
        "polarization": args.polarization,
        "collected": args.collected,
    }
    config = load_config(args.config, overrides)
    manifest = _Manifest("simulate", args.out_dir, config.digest(), config.seed)
    stream = simulate(config, args.mode, workers=args.workers)
    name = args.out or f"stream_{args.mode}_{config.collected}_{config.polarization}.txt"
    stream.write(manifest.path_for(name))
    manifest.write()
    print(f"wrote {name}: {len(stream)} records")
    return EXIT_OK


def _background_spec(text):
    if text is None or text == "none":
        return ("none", None)
    if text == "auto":
        return ("auto", None)
    if text.startswith("boundary="):
        return ("boundary", float(text.split("=", 1)[1]))
    raise ConfigError("--background must be none, auto, or boundary=N")


def _resolve_background(hist, mode, boundary, candidates, manifest, tag):
    """Returns (level, noise_boundary, selection_or_None)."""
    if mode == "none":
        return 0.0, None, None
    if mode == "boundary":
        return analysis.estimate_background(hist, boundary), boundary, None
    windows = np.arange(1000.0, hist.pulse_period + 1.0, 1000.0)
    try:
        sel = analysis.select_noise_boundary(hist, candidates, windows)
    except PlateauSelectionError as exc:
        for diag in exc.diagnostics or ():
            tables.write_curve(
                manifest.path_for(f"{tag}_boundary{diag.boundary:g}_curve.csv"),
                diag.curve,
                metadata={"noise_boundary": "%.10g" % diag.boundary,
                          "background": "%.10g" % diag.background,
                          "flatness_score": "%.10g" % diag.flatness_score},
            )
        raise
    return sel.background, sel.boundary, sel


def _cmd_analyze(args):
    candidates = [float(x) for x in args.boundary_candidates.split(",")]
    streams = [TimeTagStream.read(p) for p in args.streams]
    digest = streams[0].header.get("digest", "unknown")
    seed = int(streams[0].header.get("seed", 0))
    manifest = _Manifest("analyze", args.out_dir, digest, seed)

    hists = [
        analysis.build_histogram(s, bin_width=args.bin_width_ps,
                                 delay_range=args.delay_range_ps)
        for s in streams
    ]
    for stream, hist in zip(streams, hists):
        pol = stream.header.get("polarization", "co")
        tables.write_histogram(manifest.path_for(f"histogram_{pol}.csv"), hist)

    bg_mode, boundary = _background_spec(args.background)

    if args.g2:
        if len(streams) != 1:
            raise ConfigError("--g2 takes exactly one stream file")
        first = args.first_side_peak if args.first_side_peak else 1
        level, nb, sel = _resolve_background(hists[0], bg_mode, boundary,
                                             candidates, manifest, "g2")
        result = analysis.g2_zero(hists[0], args.window_ps, args.side_peaks,
                                  level, first)
        curve = analysis.g2_vs_window(
            hists[0], np.arange(1000.0, hists[0].pulse_period + 1.0, 1000.0),
            level, args.side_peaks, first,
        )
        tables.write_curve(manifest.path_for("g2_vs_window.csv"), curve)
        record = {
            "g2_zero": result.g2_zero,
            "error": result.error,
            "window_ps": result.window,
            "n_side_peaks": result.n_side_peaks,
            "first_side_peak": first,
            "background_level": level,
            "noise_boundary": "none" if nb is None else "%.10g" % nb,
            "error_model": "poisson-delta-method",
        }
        tables.write_record(manifest.path_for("g2_result.txt"), record)
        manifest.write()
        print(f"g2(0) = {result.g2_zero:.5f} +- {result.error:.5f}")
        return EXIT_OK

    # HOM analysis
    method = args.hom
    if method == "two-config" and len(streams) != 2:
        raise ConfigError("--hom two-config takes co- and cross-polarized streams")
    if method == "single-config" and len(streams) != 1:
        raise ConfigError("--hom single-config takes exactly one stream")
    first = args.first_side_peak if args.first_side_peak else 2

    levels = []
    for hist, tag in zip(hists, ("par", "perp")):
        level, nb, _ = _resolve_background(hist, bg_mode, boundary,
                                           candidates, manifest, f"hom_{tag}")
        levels.append(level)
    report = analysis.hom_visibility(
        hists[0], hists[1] if method == "two-config" else None,
        window=args.window_ps, n_side_peaks=args.side_peaks,
        background=levels[0], first_side_peak=first,
        background_perp=levels[1] if len(levels) > 1 else None,
    )
    header = streams[0].header
    epsilon = args.epsilon if args.epsilon is not None else \
        1.0 - float(header.get("classical_visibility", 1.0))
    refl = args.reflectance if args.reflectance is not None else \
        float(header.get("bs_reflectance", 0.5))
    report = report.with_correction(epsilon, args.g2_value, refl, 1.0 - refl,
                                    g2_error=args.g2_error)
    record = {
        "v_raw": report.v_raw,
        "v_raw_error": report.v_raw_error,
        "v_corrected": report.v_corrected,
        "v_corrected_error": report.v_corrected_error,
        "method": report.method,
        "window_ps": report.window,
        "n_parallel": report.n_parallel,
        "n_parallel_error": report.n_parallel_error,
        "n_perp": "" if report.n_perp is None else "%.10g" % report.n_perp,
        "epsilon": epsilon,
        "g2_zero": args.g2_value,
        "reflectance": refl,
        "background_level": levels[0],
        "first_side_peak": first,
        "error_model": "poisson-delta-method",
    }
    tables.write_record(manifest.path_for("hom_result.txt"), record)
    manifest.write()
    print(f"v_raw = {report.v_raw:.5f} +- {report.v_raw_error:.5f}  "
          f"v_corrected = {report.v_corrected:.5f}")
    return EXIT_OK


def _cmd_fit(args):
    pins = {}
    for pin in args.pin or ():
        name, _, value = pin.partition("=")
        if not value:
            raise ConfigError(f"--pin expects name=value, got {pin!r}")
        pins[name.strip()] = float(value)

    with open(args.input) as fh:
        is_stream = "qdcascade-stream" in fh.readline()
    if is_stream:
        stream = TimeTagStream.read(args.input)
        decay = fitting.DecayHistogram.from_stream(
            stream, bin_width=args.bin_width_ps, irf_fwhm=args.irf_fwhm_ps,
        )
        digest = stream.header.get("digest", "unknown")
    else:
        decay = tables.read_decay(args.input, irf_fwhm=args.irf_fwhm_ps)
        digest = hashlib.sha256(Path(args.input).read_bytes()).hexdigest()[:16]

    manifest = _Manifest("fit", args.out_dir, digest, args.seed or 0)
    result = fitting.fit(decay, args.model, fixed=pins, seed=args.seed or 0)
    errors = {}
    if args.bootstrap > 1:
        errors = fitting.bootstrap(decay, args.model, n_resamples=args.bootstrap,
                                   seed=args.seed or 0, base_result=result)
    record = {"model": result.model, "residual_chi2": result.residual_chi2,
              "n_points": result.n_points, "n_bootstrap": args.bootstrap,
              "ill_conditioned": str(result.ill_conditioned).lower(),
              "bootstrap_model": "parametric-poisson"}
    for name, value in result.params.items():
        record[name] = value
        if name.startswith("gamma"):
            suffix = name[len("gamma_"):]
            record[f"tau_{suffix}_ps" if suffix else "tau_ps"] = 1.0 / value
        if name in errors:
            record[f"{name}_std"] = errors[name]
    for name in pins:
        record[f"{name}_pinned"] = "true"
    tables.write_record(manifest.path_for("fit_result.txt"), record)
    curve = fitting.evaluate_model(args.model, decay.bin_centers,
                                   result.params, decay.irf_fwhm)
    tables.write_table(manifest.path_for("fit_curve.csv"),
                        ("delay_ps", "model_counts"),
                        np.column_stack([decay.bin_centers, curve]))
    manifest.write()
    taus = ", ".join(f"{k}={1.0 / v:.2f} ps" for k, v in result.params.items()
                     if k.startswith("gamma"))
    print(f"fit ok: {taus}  chi2={result.residual_chi2:.1f}")
    return EXIT_OK


def _measure_point_mc(config, species, n_pulses, seed_base, point_idx, workers):
    """Corrected two-config HOM visibility for one sweep point and species."""
    from dataclasses import replace

    hists = []
    for pol_idx, pol in enumerate(("co", "cross")):
        cfg = replace(
            config, collected=species, polarization=pol, n_pulses=n_pulses,
            seed=_derived_seed(seed_base, point_idx,
                               0 if species == "xx" else 1, pol_idx),
        )
        stream = simulate(cfg, "hom", workers=workers)
        hists.append(analysis.build_histogram(stream))
    report = analysis.hom_visibility(hists[0], hists[1])
    report = report.with_correction(
        1.0 - config.classical_visibility, 0.0,
        config.bs_reflectance, config.bs_transmittance,
    )
    return report.v_corrected, report.v_corrected_error


def _sweep_point(job):
    """One sweep row; top-level so the process pool can pickle it."""
    config, det, anchor, mc, n_pulses, idx = job
    base = config.cascade
    try:
        cascade = CascadeConfig.with_cavity_at(
            1.0 / base.gamma_xx_bare, 1.0 / base.gamma_x_bare,
            base.f, base.kappa, det, anchor=anchor,
            second_mode_offset=base.second_mode_offset,
            p_xx_initial=base.p_xx_initial,
        )
        rates = effective_rates(cascade)
        v_eq = visibility_from_ratio(rates.ratio)
        if mc:
            from dataclasses import replace
            cfg = replace(config, cascade=cascade)
            v_xx, e_xx = _measure_point_mc(cfg, "xx", n_pulses,
                                           config.seed, idx, 1)
            v_x, e_x = _measure_point_mc(cfg, "x", n_pulses,
                                         config.seed, idx, 1)
        else:
            v_xx = v_x = v_eq
            e_xx = e_x = 0.0
        return (det, rates.tau_xx, rates.tau_x, rates.ratio,
                v_xx, e_xx, v_x, e_x, v_eq, "ok")
    except QDCascadeError as exc:
        nan = float("nan")
        return (det, nan, nan, nan, nan, nan, nan, nan, nan,
                f"error: {exc}".replace(",", ";"))


def _cmd_sweep(args):
    config = load_config(args.config, {"seed": args.seed})
    manifest = _Manifest("sweep", args.out_dir, config.digest(), config.seed)
    detunings = [float(x) for x in args.detunings.split(",")]
    jobs = [(config, det, args.anchor, args.mc, args.n_pulses, idx)
            for idx, det in enumerate(detunings)]
    if args.workers > 1 and len(jobs) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            rows = list(pool.map(_sweep_point, jobs))  # input order preserved
    else:
        rows = [_sweep_point(job) for job in jobs]

    path = manifest.path_for(args.out or "sweep.csv")
    with open(path, "w", newline="\n") as fh:
        fh.write(f"# anchor={args.anchor}\n")
        fh.write(f"# mode={'mc' if args.mc else 'fast'}\n")
        fh.write("# columns: detuning_ghz,tau_xx_ps,tau_x_ps,ratio,"
                 "v_xx,v_xx_err,v_x,v_x_err,v_eq,status\n")
        for row in rows:
            fh.write(",".join("%.10g" % v for v in row[:-1]) + f",{row[-1]}\n")
    manifest.write()
    print(f"wrote {path.name}: {len(rows)} points")
    return EXIT_OK


def _cmd_oracle(args):
    if args.log_spaced:
        lo, hi, n = args.log_spaced.split(",")
        ratios = np.geomspace(float(lo), float(hi), int(n))
    elif args.ratios:
        ratios = np.array([float(x) for x in args.ratios.split(",")])
    else:
        raise ConfigError("oracle needs --ratios or --log-spaced")
    if np.any(ratios <= 0.0):
        raise ConfigError("ratios must be > 0")

    digest = hashlib.sha256(
        f"{list(map(float, ratios))}|{args.grid_factor}|{args.grid_points}".encode()
    ).hexdigest()[:16]
    manifest = _Manifest("oracle", args.out_dir, digest, 0)

    rows = []
    for ratio in ratios:
        rates = EffectiveRates.from_lifetimes(float(ratio), 1.0)
        grid = TimeGrid.for_rates(rates, factor=args.grid_factor,
                                  n_points=args.grid_points)
        p_xx = reduced_purity("xx", rates, grid)
        p_x = reduced_purity("x", rates, grid)
        eq = visibility_from_ratio(float(ratio))
        rows.append((ratio, p_xx, p_x, eq, p_xx - eq, p_x - eq))

    path = manifest.path_for(args.out or "oracle.csv")
    tables.write_table(
        path,
        ("ratio", "purity_xx", "purity_x", "eq_visibility", "dev_xx", "dev_x"),
        rows,
        metadata={"grid_factor": "%.10g" % args.grid_factor,
                  "grid_points": str(args.grid_points)},
    )
    manifest.write()
    worst = max(max(abs(r[4]), abs(r[5])) for r in rows)
    print(f"wrote {path.name}: {len(rows)} ratios, max |purity - formula| = {worst:.2e}")
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out-dir", default=".", help="output directory")
    common.add_argument("--seed", type=int, default=None,
                        help="override the configured seed")
    common.add_argument("--workers", type=int, default=1,
                        help="worker processes (output is worker-count independent)")

    parser = argparse.ArgumentParser(
        prog="qdcascade",
        description="Simulate and analyze biexciton-cascade photon experiments",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common],
                       help="run one experiment, write a time-tag stream")
    p.add_argument("--config", required=True)
    p.add_argument("--mode", required=True, choices=("lifetime", "hbt", "hom"))
    p.add_argument("--out", help="stream filename (defaults to a mode-derived name)")
    p.add_argument("--polarization", choices=("co", "cross"))
    p.add_argument("--collected", choices=("xx", "x"))
    p.add_argument("--n-pulses", type=int)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("analyze", parents=[common],
                       help="extract g2(0) or HOM visibility from streams")
    p.add_argument("streams", nargs="+", help="stream file(s)")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--g2", action="store_true")
    group.add_argument("--hom", choices=("two-config", "single-config"))
    p.add_argument("--window-ps", type=float, default=13100.0)
    p.add_argument("--side-peaks", type=int, default=10)
    p.add_argument("--first-side-peak", type=int, default=None,
                   help="first side-peak multiple (default: 1 for g2, 2 for HOM)")
    p.add_argument("--background", default="none",
                   help="none | auto | boundary=N (counts per bin threshold)")
    p.add_argument("--boundary-candidates", default="2,5,10,20,40,80,160",
                   help="comma list of noise boundaries probed by auto")
    p.add_argument("--bin-width-ps", type=float, default=10.0)
    p.add_argument("--delay-range-ps", type=float, default=150000.0)
    p.add_argument("--g2-value", type=float, default=0.0,
                   help="g2(0) used in the HOM correction")
    p.add_argument("--g2-error", type=float, default=0.0)
    p.add_argument("--epsilon", type=float, default=None,
                   help="classical-contrast imperfection (default from header)")
    p.add_argument("--reflectance", type=float, default=None,
                   help="beam-splitter reflectance (default from header)")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("fit", parents=[common],
                       help="fit a decay histogram or lifetime stream")
    p.add_argument("--input", required=True,
                   help="decay table or lifetime stream file")
    p.add_argument("--model", required=True, choices=("exponential", "cascade"))
    p.add_argument("--irf-fwhm-ps", type=float, default=None)
    p.add_argument("--bin-width-ps", type=float, default=10.0)
    p.add_argument("--pin", action="append",
                   help="pin a parameter, e.g. --pin gamma_xx=0.0234")
    p.add_argument("--bootstrap", type=int, default=200,
                   help="bootstrap resamples (0 disables)")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("sweep", parents=[common],
                       help="visibility and lifetimes versus cavity detuning")
    p.add_argument("--config", required=True)
    p.add_argument("--detunings", required=True,
                   help="comma list of cavity detunings in GHz")
    p.add_argument("--anchor", choices=("xx", "x"), default="xx")
    p.add_argument("--mc", action="store_true",
                   help="Monte Carlo per point (default: analytic fast mode)")
    p.add_argument("--n-pulses", type=int, default=100000,
                   help="pulses per MC run")
    p.add_argument("--out", help="output table name")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("oracle", parents=[common],
                       help="purity oracle versus the visibility formula")
    p.add_argument("--ratios", help="comma list of lifetime ratios")
    p.add_argument("--log-spaced", help="min,max,n geometric ratio grid")
    p.add_argument("--grid-factor", type=float, default=15.0)
    p.add_argument("--grid-points", type=int, default=2000)
    p.add_argument("--out", help="output table name")
    p.set_defaults(func=_cmd_oracle)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ParameterError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (AnalysisError, QDCascadeError) as exc:
        print(f"analysis error: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS


if __name__ == "__main__":
    sys.exit(main())
