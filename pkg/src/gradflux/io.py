"""File formats: sweep tables, spectroscopy datasets, traces, fit reports.

All files carry units in their headers and embed the resolved configuration
and tool version in their metadata, so any output can be reproduced
bit-identically from the file alone (given the same seed). CSV files start
with '#'-prefixed metadata comment lines; JSON files keep metadata under a
"meta" key. No timestamps anywhere, by design.
"""

import csv
import json
from pathlib import Path

import numpy as np

from .estimation import DEFAULT_SIGMA_GHZ, DecayCurve, SpectroscopyDataset
from .fluxon import TimeTrace

SWEEP_COLUMNS = ("flux_phi0", "transition", "freq_GHz", "chi_MHz",
                 "chi_valid")
DATASET_COLUMNS = ("field_or_flux", "unit", "transition", "freq_GHz",
                   "sigma_GHz")
TRACE_COLUMNS = ("t_s", "value")
DECAY_COLUMNS = ("t_us", "inversion")
PARABOLA_COLUMNS = ("b_ut", "freq_GHz")


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _sanitize(obj):
    """Make a payload json-serializable (arrays to lists, numpy scalars)."""
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_sanitize(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return repr(obj)     # "inf" / "-inf" / "nan" as strings
    return obj


def write_json(path, payload) -> None:
    text = json.dumps(_sanitize(payload), indent=2, sort_keys=True)
    Path(path).write_text(text + "\n", encoding="utf-8")


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _write_csv(path, columns, rows, meta=None):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if meta is not None:
            fh.write("# meta: " + json.dumps(_sanitize(meta),
                                             sort_keys=True) + "\n")
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _read_csv(path, expected_columns):
    meta = None
    with open(path, newline="", encoding="utf-8") as fh:
        lines = []
        for line in fh:
            if line.startswith("#"):
                stripped = line[1:].strip()
                if stripped.startswith("meta:"):
                    meta = json.loads(stripped[len("meta:"):])
                continue
            lines.append(line)
    reader = csv.reader(lines)
    try:
        header = next(reader)
    except StopIteration:
        raise ValueError(f"{path}: empty CSV") from None
    header = tuple(h.strip() for h in header)
    if header != tuple(expected_columns):
        raise ValueError(
            f"{path}: expected header {','.join(expected_columns)}, "
            f"got {','.join(header)}")
    rows = [row for row in reader if row and any(c.strip() for c in row)]
    return header, rows, meta


def write_sweep_csv(path, sweep, meta=None) -> None:
    rows = [(p.flux_phi0, p.transition, p.freq_ghz, p.chi_mhz, p.chi_valid)
            for p in sweep.points]
    _write_csv(path, SWEEP_COLUMNS, rows, meta=meta)


def write_sweep_json(path, sweep, meta=None) -> None:
    payload = {
        "meta": meta or {},
        "basis": {"m_qubit": sweep.basis.m_qubit, "n_res": sweep.basis.n_res},
        "transitions": list(sweep.transitions),
        "min_confidence": sweep.min_confidence,
        "points": [{"flux_phi0": p.flux_phi0, "transition": p.transition,
                    "freq_GHz": p.freq_ghz, "chi_MHz": p.chi_mhz,
                    "chi_valid": p.chi_valid} for p in sweep.points],
        "errors": [{"flux_phi0": e.flux_phi0, "transition": e.transition,
                    "message": e.message} for e in sweep.errors],
    }
    write_json(path, payload)


def write_spectroscopy_csv(path, dataset: SpectroscopyDataset,
                           meta=None) -> None:
    rows = [(dataset.x[i], dataset.unit, dataset.transition[i],
             dataset.freq_ghz[i], dataset.sigma_ghz[i])
            for i in range(len(dataset))]
    _write_csv(path, DATASET_COLUMNS, rows, meta=meta)


def read_spectroscopy_csv(path) -> SpectroscopyDataset:
    """Load a spectroscopy dataset; missing sigmas default to 1 MHz."""
    _, rows, _ = _read_csv(path, DATASET_COLUMNS)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    x, units, trans, freq, sigma = [], set(), [], [], []
    defaulted = False
    for row in rows:
        x.append(float(row[0]))
        units.add(row[1].strip())
        trans.append(row[2].strip())
        freq.append(float(row[3]))
        cell = row[4].strip() if len(row) > 4 else ""
        if cell:
            sigma.append(float(cell))
        else:
            sigma.append(DEFAULT_SIGMA_GHZ)
            defaulted = True
    if len(units) != 1:
        raise ValueError(f"{path}: mixed units {sorted(units)}")
    return SpectroscopyDataset(x=np.array(x), transition=tuple(trans),
                               freq_ghz=np.array(freq),
                               sigma_ghz=np.array(sigma),
                               unit=units.pop(), sigma_defaulted=defaulted)


def write_trace_csv(path, trace: TimeTrace, meta=None) -> None:
    """Trace CSV plus a JSON sidecar holding units and noise scale."""
    path = Path(path)
    rows = zip(trace.t_s, trace.value)
    _write_csv(path, TRACE_COLUMNS, rows)
    sidecar = {
        "meta": meta or {},
        "units": {"t": "s", "value": "arb"},
        "noise_sigma": trace.noise_sigma,
        "label": trace.label,
    }
    write_json(path.with_suffix(".json"), sidecar)


def read_trace_csv(path) -> TimeTrace:
    path = Path(path)
    _, rows, _ = _read_csv(path, TRACE_COLUMNS)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    t = np.array([float(r[0]) for r in rows])
    v = np.array([float(r[1]) for r in rows])
    noise = 0.0
    label = ""
    sidecar = path.with_suffix(".json")
    if sidecar.exists():
        info = read_json(sidecar)
        noise = float(info.get("noise_sigma", 0.0))
        label = str(info.get("label", ""))
    return TimeTrace(t_s=t, value=v, noise_sigma=noise, label=label)


def write_dwell_json(path, stats, events=None, meta=None) -> None:
    payload = {
        "meta": meta or {},
        "lambda_hz": stats.rate_hz,
        "ci_low_hz": stats.ci_low_hz,
        "ci_high_hz": stats.ci_high_hz,
        "n_events": stats.n_events,
        "total_time_s": stats.total_time_s,
        "censored_time_s": stats.censored_time_s,
        "confidence": stats.confidence,
        "lifetime_s": stats.lifetime_s,
        "lifetime_lower_bound_s": stats.lifetime_lower_bound_s,
        "dwell_times_s": stats.dwell_times_s,
        "censored": [bool(c) for c in stats.censored],
    }
    if events is not None:
        payload["events"] = [{"time_s": e.time_s, "index": e.index,
                              "direction": e.direction, "size": e.size}
                             for e in events]
    write_json(path, payload)


def write_fit_json(path, fit, meta=None) -> None:
    payload = {
        "meta": meta or {},
        "params": fit.params,
        "stderr": fit.stderr,
        "sensitivity": fit.sensitivity,
        "rms_residual_GHz": fit.rms_residual_ghz,
        "chi2": fit.chi2,
        "residuals_GHz": fit.residuals_ghz,
        "status": fit.status,
        "forward": fit.forward,
        "n_starts": fit.n_starts,
        "best_start": fit.best_start,
        "seed": fit.seed,
        "nfev": fit.nfev,
        "objective_history": fit.history,
        "start_objectives": list(fit.start_objectives),
        "sigma_defaulted": fit.sigma_defaulted,
        "bounds": fit.bounds,
    }
    write_json(path, payload)


def read_decay_csv(path, kind: str) -> DecayCurve:
    columns = PARABOLA_COLUMNS if kind == "parabola" else DECAY_COLUMNS
    _, rows, _ = _read_csv(path, columns)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    t = np.array([float(r[0]) for r in rows])
    v = np.array([float(r[1]) for r in rows])
    return DecayCurve(t=t, value=v, kind=kind)


def write_decay_csv(path, curve: DecayCurve, meta=None) -> None:
    columns = PARABOLA_COLUMNS if curve.kind == "parabola" else DECAY_COLUMNS
    _write_csv(path, columns, zip(curve.t, curve.value), meta=meta)
