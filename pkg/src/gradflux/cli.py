"""Command-line interface.

Subcommands wrap the library for batch use: flux sweeps, spectrum fits,
dispersive-shift and phase-slip evaluation, telegraph-trace simulation and
analysis. Configuration comes from an INI file ([section] key = value)
merged with command-line overrides; unknown sections or keys are rejected.
Every output embeds the resolved configuration and tool version, and
re-running with the same inputs reproduces outputs bit-identically.

Exit codes: 0 success, 1 numerical non-convergence, 2 input/config error.
"""

import argparse
import configparser
import sys
from pathlib import Path

import numpy as np

from . import __version__, io
from .circuit import BranchCircuit, balanced_branch_circuit, reduce_circuit
from .estimation import DecayCurve, FitError, fit_decay, fit_parabola, \
    fit_spectrum
from .fluxon import (CURRENT_ACTIVATED_BIAS_PHI0, JunctionArrayModel,
                     coincidence_analysis, detect_jumps,
                     effective_junction_count, estimate_lifetime,
                     phase_slip_rate, simulate_telegraph)
from .spectrum import (FockBasisSpec, SolverError, convergence_report,
                       dispersive_shift, flux_sweep)


class ConfigError(ValueError):
    """Invalid configuration file or option."""


CONFIG_SCHEMA = {
    "circuit": {"lq_eff": float, "cj": float, "ej": float, "cr": float,
                "lr": float, "ls": float, "l1": float, "l2": float,
                "l3": float},
    "basis": {"m_qubit": int, "n_res": int},
    "sweep": {"start": float, "stop": float, "points": int,
              "transitions": str},
    "geometry": {"outer_area_m2": float, "wire_length_m": float,
                 "grain_size_m": float},
    "trace": {"rate_eo_hz": float, "rate_oe_hz": float, "duration_s": float,
              "dt_s": float, "noise_sigma": float, "seed": int,
              "threshold_mads": float, "window": int},
    "fit": {"n_starts": int, "seed": int, "basis_m": int, "forward": str,
            "max_nfev": int},
    "tolerances": {"min_confidence": float},
    "run": {"threads": int},
}

DEFAULT_CONFIG = {
    "circuit": {"lq_eff": 172.0, "cj": 3.4, "ej": 5.1, "cr": 20.2,
                "lr": 21.6, "ls": 2.8},
    "basis": {"m_qubit": 25, "n_res": 15},
    "sweep": {"start": 0.0, "stop": 1.0, "points": 101,
              "transitions": "f01"},
    "geometry": {"outer_area_m2": 7.5e-9, "wire_length_m": 300e-6,
                 "grain_size_m": 4e-9},
    "trace": {"rate_eo_hz": 1.0 / 1800.0, "rate_oe_hz": 1.0 / 1800.0,
              "duration_s": 100_000.0, "dt_s": 1.0, "noise_sigma": 0.1,
              "seed": 0, "threshold_mads": 6.0, "window": 15},
    "fit": {"n_starts": 8, "seed": 0, "basis_m": 30,
            "forward": "single-loop", "max_nfev": 2000},
    "tolerances": {"min_confidence": 0.7},
    "run": {"threads": 1},
}


def load_config(path=None) -> dict:
    """Defaults merged with an INI file; unknown keys are rejected."""
    config = {sec: dict(vals) for sec, vals in DEFAULT_CONFIG.items()}
    if path is None:
        return config
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file not found: {path}")
    for section in parser.sections():
        if section not in CONFIG_SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        for key, raw in parser.items(section):
            if key not in CONFIG_SCHEMA[section]:
                raise ConfigError(
                    f"unknown config key '{key}' in section [{section}]")
            caster = CONFIG_SCHEMA[section][key]
            try:
                config.setdefault(section, {})[key] = caster(raw)
            except ValueError as exc:
                raise ConfigError(
                    f"bad value for [{section}] {key} = {raw!r}: {exc}"
                ) from exc
    return config


def effective_from_config(circ: dict):
    """Effective fluxonium from a [circuit] section.

    Explicit branch inductances (l1/l3, optional l2) take precedence;
    otherwise the balanced-gradiometer reconstruction matching lq_eff is
    used.
    """
    if "l1" in circ or "l3" in circ:
        if not ("l1" in circ and "l3" in circ):
            raise ConfigError("branch circuit needs both l1 and l3")
        branch = BranchCircuit(l1=circ["l1"], l2=circ.get("l2", 0.0),
                               l3=circ["l3"], ls=circ["ls"], lr=circ["lr"],
                               cr=circ["cr"], cj=circ["cj"], ej=circ["ej"])
    else:
        branch = balanced_branch_circuit(
            lq_eff=circ["lq_eff"], ls=circ["ls"], lr=circ["lr"],
            cr=circ["cr"], cj=circ["cj"], ej=circ["ej"])
    return reduce_circuit(branch)


def build_meta(command: str, config: dict) -> dict:
    return {"tool": "gradflux", "version": __version__, "command": command,
            "config": config}


def _basis_from(config):
    return FockBasisSpec(config["basis"]["m_qubit"],
                         config["basis"]["n_res"])


def _apply_overrides(config, section, **overrides):
    for key, value in overrides.items():
        if value is not None:
            config[section][key] = value


def cmd_sweep(args) -> int:
    config = load_config(args.config)
    _apply_overrides(config, "sweep", start=args.start, stop=args.stop,
                     points=args.points, transitions=args.transitions)
    _apply_overrides(config, "run", threads=args.threads)
    eff = effective_from_config(config["circuit"])
    sweep_cfg = config["sweep"]
    grid = np.linspace(sweep_cfg["start"], sweep_cfg["stop"],
                       sweep_cfg["points"])
    transitions = tuple(t.strip() for t in
                        sweep_cfg["transitions"].split(",") if t.strip())
    sweep = flux_sweep(eff, grid, basis=_basis_from(config),
                       transitions=transitions,
                       min_confidence=config["tolerances"]["min_confidence"],
                       workers=config["run"]["threads"])
    meta = build_meta("sweep", config)
    out = Path(args.out)
    io.write_sweep_csv(out, sweep, meta=meta)
    io.write_sweep_json(out.with_suffix(".json"), sweep, meta=meta)
    print(f"sweep: {len(sweep.points)} rows, {len(sweep.errors)} errors "
          f"-> {out}")
    if args.strict and sweep.errors:
        print("strict mode: per-point errors present", file=sys.stderr)
        return 1
    return 0


def cmd_chi(args) -> int:
    config = load_config(args.config)
    eff = effective_from_config(config["circuit"])
    min_conf = config["tolerances"]["min_confidence"]
    meta = build_meta("chi", config)
    if args.ladder:
        ladder = []
        for token in args.ladder.split(","):
            m, _, n = token.strip().partition("x")
            ladder.append((int(m), int(n)))
        rows = convergence_report(eff, args.flux, ladder,
                                  min_confidence=min_conf)
        payload = {"meta": meta, "flux_phi0": args.flux,
                   "rows": [vars(r) for r in rows],
                   "chi_MHz": rows[-1].chi_mhz}
        chi = rows[-1].chi_mhz
    else:
        shift = dispersive_shift(eff, args.flux, _basis_from(config),
                                 min_confidence=min_conf)
        payload = {"meta": meta, "flux_phi0": args.flux,
                   "chi_MHz": shift.chi_mhz, "valid": shift.valid,
                   "min_overlap": shift.min_overlap}
        chi = shift.chi_mhz
    if args.out:
        io.write_json(args.out, payload)
    if chi is None:
        print("chi: invalid (avoided-crossing exclusion zone)")
        return 1
    print(f"chi({args.flux} Phi_0) = {chi:+.4f} MHz")
    return 0


def cmd_fit(args) -> int:
    config = load_config(args.config)
    _apply_overrides(config, "fit", n_starts=args.starts, seed=args.seed,
                     basis_m=args.basis_m, forward=args.forward)
    dataset = io.read_spectroscopy_csv(args.data)
    fit_cfg = config["fit"]
    resonator = None
    if fit_cfg["forward"] == "coupled":
        circ = config["circuit"]
        resonator = {"ls": circ["ls"], "lr": circ["lr"], "cr": circ["cr"]}
    fit = fit_spectrum(dataset, forward=fit_cfg["forward"],
                       resonator=resonator, basis_m=fit_cfg["basis_m"],
                       n_starts=fit_cfg["n_starts"], seed=fit_cfg["seed"],
                       max_nfev=fit_cfg["max_nfev"],
                       workers=config["run"]["threads"])
    io.write_fit_json(args.out, fit, meta=build_meta("fit", config))
    pstr = ", ".join(f"{k}={v:.6g}" for k, v in fit.params.items())
    print(f"fit: {pstr} (rms {fit.rms_residual_ghz * 1e3:.3f} MHz)")
    return 0


def cmd_phaseslip(args) -> int:
    config = load_config(args.config)
    _apply_overrides(config, "geometry", wire_length_m=args.wire_length_m,
                     grain_size_m=args.grain_size_m)
    if args.n_junctions is not None:
        n = args.n_junctions
    else:
        geom = config["geometry"]
        n = effective_junction_count(geom["wire_length_m"],
                                     geom["grain_size_m"])
    model = JunctionArrayModel(
        n_junctions=n,
        ej_grain_ghz=args.ej_ghz if args.ej_ghz is not None else 53_000.0,
        ec_grain_ghz=args.ec_ghz if args.ec_ghz is not None else 48.0)
    rate = phase_slip_rate(model)
    if args.out:
        io.write_json(args.out, {
            "meta": build_meta("phaseslip", config),
            "n_junctions": model.n_junctions,
            "ej_grain_GHz": model.ej_grain_ghz,
            "ec_grain_GHz": model.ec_grain_ghz,
            "rate_Hz": rate.rate_hz,
            "log10_rate_Hz": rate.log10_rate_hz,
            "warning": rate.warning,
            "current_activated_above_phi0": CURRENT_ACTIVATED_BIAS_PHI0,
        })
    print(f"phase-slip rate: {rate.rate_hz:.3e} Hz "
          f"(log10 = {rate.log10_rate_hz:.2f})")
    if rate.warning:
        print("warning: " + rate.warning, file=sys.stderr)
    return 0


def cmd_junctions(args) -> int:
    n = effective_junction_count(args.wire_length_m, args.grain_size_m)
    if args.out:
        io.write_json(args.out, {
            "meta": build_meta("junctions", load_config(None)),
            "wire_length_m": args.wire_length_m,
            "grain_size_m": args.grain_size_m,
            "n_junctions": n,
        })
    print(f"effective junctions: {n}")
    return 0


def cmd_simulate_trace(args) -> int:
    config = load_config(args.config)
    _apply_overrides(config, "trace", rate_eo_hz=args.rate_eo,
                     rate_oe_hz=args.rate_oe, duration_s=args.duration,
                     dt_s=args.dt, noise_sigma=args.noise, seed=args.seed)
    tc = config["trace"]
    trace = simulate_telegraph(tc["rate_eo_hz"], tc["rate_oe_hz"],
                               tc["duration_s"], tc["dt_s"],
                               noise_sigma=tc["noise_sigma"], seed=tc["seed"],
                               label=args.label)
    io.write_trace_csv(args.out, trace,
                       meta=build_meta("simulate-trace", config))
    n_switch = 0 if trace.switch_times is None else trace.switch_times.size
    print(f"trace: {trace.t_s.size} samples, {n_switch} switches -> "
          f"{args.out}")
    return 0


def cmd_analyze_trace(args) -> int:
    config = load_config(args.config)
    _apply_overrides(config, "trace", threshold_mads=args.threshold,
                     window=args.window)
    trace = io.read_trace_csv(args.trace)
    events = detect_jumps(trace,
                          threshold_in_mads=config["trace"]["threshold_mads"],
                          window=config["trace"]["window"])
    stats = estimate_lifetime(events, trace.span_s)
    io.write_dwell_json(args.out, stats, events=events,
                        meta=build_meta("analyze-trace", config))
    print(f"analyze: {stats.n_events} events, lambda = "
          f"{stats.rate_hz:.3e} Hz "
          f"[{stats.ci_low_hz:.3e}, {stats.ci_high_hz:.3e}]")
    return 0


def cmd_coincidence(args) -> int:
    config = load_config(args.config)
    if len(args.traces) < 2:
        raise ConfigError("coincidence needs at least two traces")
    traces = [io.read_trace_csv(p) for p in args.traces]
    spans = [tr.span_s for tr in traces]
    span = (max(s[0] for s in spans), min(s[1] for s in spans))
    event_lists = [detect_jumps(
        tr, threshold_in_mads=config["trace"]["threshold_mads"],
        window=config["trace"]["window"]) for tr in traces]
    result = coincidence_analysis(event_lists, args.window, span)
    io.write_json(args.out, {
        "meta": build_meta("coincidence", config),
        "window_s": result.window_s,
        "span_s": list(result.span),
        "traces": [str(p) for p in args.traces],
        "pairs": [{"trace_a": p.trace_a, "trace_b": p.trace_b,
                   "observed": p.observed, "expected": p.expected,
                   "excess_ratio": p.excess_ratio,
                   "rate_a_hz": p.rate_a_hz, "rate_b_hz": p.rate_b_hz}
                  for p in result.pairs],
    })
    for p in result.pairs:
        ratio = "n/a" if p.excess_ratio is None else f"{p.excess_ratio:.3f}"
        print(f"pair ({p.trace_a},{p.trace_b}): observed {p.observed}, "
              f"expected {p.expected:.2f}, excess {ratio}")
    return 0


def cmd_decay_fit(args) -> int:
    curve = io.read_decay_csv(args.data, args.kind)
    fit = fit_decay(curve)
    io.write_json(args.out, {
        "meta": build_meta("decay-fit", load_config(args.config)),
        "kind": fit.kind,
        "tau_us": fit.tau,
        "tau_stderr_us": fit.tau_stderr,
        "params": fit.params,
        "stderr": fit.stderr,
    })
    names = {"exponential": "T1", "ramsey": "T2*", "echo": "T2"}
    print(f"{names[fit.kind]} = {fit.tau:.4g} +- {fit.tau_stderr:.2g} us")
    return 0


def cmd_parabola_fit(args) -> int:
    curve = io.read_decay_csv(args.data, "parabola")
    fit = fit_parabola(curve)
    io.write_json(args.out, {
        "meta": build_meta("parabola-fit", load_config(args.config)),
        "f_max_GHz": fit.f_max,
        "b_offset_uT": fit.b_offset,
        "curvature_GHz_per_uT2": fit.curvature,
    })
    print(f"parabola: f_max = {fit.f_max:.6f} GHz at "
          f"B = {fit.b_offset:.4g} uT, curvature {fit.curvature:.4g}")
    return 0


def _add_config(p):
    p.add_argument("--config", default=None, help="INI configuration file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gradflux",
        description="Gradiometric fluxonium spectra, fits, and fluxon "
                    "trace analysis")
    parser.add_argument("--version", action="version",
                        version=f"gradflux {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="flux sweep of transitions and chi")
    _add_config(p)
    p.add_argument("--start", type=float, default=None)
    p.add_argument("--stop", type=float, default=None)
    p.add_argument("--points", type=int, default=None)
    p.add_argument("--transitions", default=None,
                   help="comma list, e.g. f01,f02,fr")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--strict", action="store_true",
                   help="exit nonzero on any per-point error")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("chi", help="dispersive shift at one flux bias")
    _add_config(p)
    p.add_argument("--flux", type=float, default=0.5)
    p.add_argument("--ladder", default=None,
                   help="basis ladder, e.g. 25x15,40x25,70x50")
    p.add_argument("--out", default=None, help="output JSON path")
    p.set_defaults(func=cmd_chi)

    p = sub.add_parser("fit", help="fit circuit parameters to spectroscopy")
    _add_config(p)
    p.add_argument("--data", required=True, help="dataset CSV")
    p.add_argument("--out", required=True, help="output JSON path")
    p.add_argument("--forward", choices=("single-loop", "coupled"),
                   default=None)
    p.add_argument("--starts", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--basis-m", type=int, default=None)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("phaseslip", help="junction-array phase-slip rate")
    _add_config(p)
    p.add_argument("--n-junctions", type=int, default=None)
    p.add_argument("--ej-ghz", type=float, default=None)
    p.add_argument("--ec-ghz", type=float, default=None)
    p.add_argument("--wire-length-m", type=float, default=None)
    p.add_argument("--grain-size-m", type=float, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_phaseslip)

    p = sub.add_parser("junctions", help="effective junction count")
    p.add_argument("--wire-length-m", type=float, required=True)
    p.add_argument("--grain-size-m", type=float, required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_junctions)

    p = sub.add_parser("simulate-trace", help="synthetic telegraph trace")
    _add_config(p)
    p.add_argument("--rate-eo", type=float, default=None)
    p.add_argument("--rate-oe", type=float, default=None)
    p.add_argument("--duration", type=float, default=None)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--noise", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--label", default="")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_simulate_trace)

    p = sub.add_parser("analyze-trace", help="detect jumps, estimate rate")
    _add_config(p)
    p.add_argument("--trace", required=True, help="trace CSV")
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--out", required=True, help="output JSON path")
    p.set_defaults(func=cmd_analyze_trace)

    p = sub.add_parser("coincidence", help="pairwise event coincidences")
    _add_config(p)
    p.add_argument("--traces", nargs="+", required=True)
    p.add_argument("--window", type=float, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_coincidence)

    p = sub.add_parser("decay-fit", help="fit T1/Ramsey/echo curve")
    _add_config(p)
    p.add_argument("--data", required=True, help="curve CSV (t_us,inversion)")
    p.add_argument("--kind", choices=("exponential", "ramsey", "echo"),
                   required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_decay_fit)

    p = sub.add_parser("parabola-fit", help="fit kinetic-inductance parabola")
    _add_config(p)
    p.add_argument("--data", required=True, help="curve CSV (b_ut,freq_GHz)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_parabola_fit)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FitError, SolverError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
