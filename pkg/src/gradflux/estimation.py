"""Parameter estimation from spectroscopy and time-domain data.

Spectrum fits recover the effective circuit parameters (shunt inductance,
junction capacitance, Josephson energy) from measured f01/f02 transition
frequencies by weighted least squares against the numerically diagonalized
fluxonium model. The forward model has no analytic gradient, so the
optimizer is a bounded derivative-free simplex with a Latin-hypercube
multi-start; everything is deterministic given the seed.

Also here: extraction of the shared inductance from a measured dispersive
shift (bracketed root search), exponential/Ramsey/echo decay-curve fits,
and the parabolic kinetic-inductance frequency shift.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, curve_fit, minimize

from .circuit import DEVICE_GEOMETRY, balanced_branch_circuit, reduce_circuit
from .spectrum import (DEFAULT_BASIS, FockBasisSpec, _LevelSet,
                       _resolved_transition, build_hamiltonian,
                       dispersive_shift, parse_transition)
from .units import EC_GHZ_FF, EL_GHZ_NH, charging_energy, inductive_energy

TRANSITION_KINDS = ("f01", "f02")

#: Default frequency uncertainty when a dataset provides none: two-tone
#: linewidth scale, 1 MHz.
DEFAULT_SIGMA_GHZ = 1e-3


class FitError(RuntimeError):
    """Fit failure; ``best`` carries the best-so-far result if any."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class SpectroscopyDataset:
    """Measured transition frequencies versus flux or applied field.

    ``x`` is either the effective flux in Phi_0 (unit="phi0") or the applied
    field in tesla (unit="tesla"); in the latter case field-to-flux scale
    and offset enter the fit as nuisance parameters unless pinned.
    """

    x: np.ndarray
    transition: tuple
    freq_ghz: np.ndarray
    sigma_ghz: np.ndarray
    unit: str = "phi0"
    sigma_defaulted: bool = False

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "freq_ghz",
                           np.asarray(self.freq_ghz, dtype=float))
        object.__setattr__(self, "sigma_ghz",
                           np.asarray(self.sigma_ghz, dtype=float))
        object.__setattr__(self, "transition", tuple(self.transition))
        if self.unit not in ("phi0", "tesla"):
            raise ValueError("unit must be 'phi0' or 'tesla'")
        n = self.x.size
        if not (len(self.transition) == n and self.freq_ghz.size == n
                and self.sigma_ghz.size == n):
            raise ValueError("dataset columns must have equal length")
        if n == 0:
            raise ValueError("dataset is empty")
        bad = set(self.transition) - set(TRANSITION_KINDS)
        if bad:
            raise ValueError(f"unsupported transitions {sorted(bad)}")
        if not np.all(self.freq_ghz > 0):
            raise ValueError("frequencies must be > 0 GHz")
        if not np.all(self.sigma_ghz > 0):
            raise ValueError("sigmas must be > 0 GHz")

    def __len__(self):
        return self.x.size


def single_loop_transitions(lq, cj, ej, phis, m=30, n_levels=3):
    """Batched single-loop fluxonium levels over flux points.

    Returns an (n_flux, n_levels) array of the lowest eigenvalues [GHz].
    The phase-operator eigenbasis is computed once per parameter set; only
    the cosine of the shifted eigenvalues varies along the flux axis, and
    the resulting Hamiltonian stack is diagonalized in one batched call.
    """
    phis = np.atleast_1d(np.asarray(phis, dtype=float))
    ec = charging_energy(cj)
    el = inductive_energy(lq)
    f_q = math.sqrt(8.0 * ec * el)
    zpf = (2.0 * ec / el) ** 0.25
    a = np.diag(np.sqrt(np.arange(1, m)), 1)
    theta, v = np.linalg.eigh(zpf * (a + a.T))
    cos_stack = np.einsum("ik,pk,jk->pij", v,
                          np.cos(theta[None, :] + 2.0 * np.pi * phis[:, None]),
                          v, optimize=True)
    h = np.diag(f_q * np.arange(m))[None, :, :] - ej * cos_stack
    w = np.linalg.eigvalsh(h)
    return w[:, :n_levels]


def _model_freqs_single_loop(lq, cj, ej, phis, transitions, m):
    levels = single_loop_transitions(lq, cj, ej, phis, m=m, n_levels=3)
    f01 = levels[:, 1] - levels[:, 0]
    f02 = levels[:, 2] - levels[:, 0]
    kind = np.asarray([1 if t == "f02" else 0 for t in transitions])
    return np.where(kind == 1, f02, f01)


def _model_freqs_coupled(lq, cj, ej, phis, transitions, resonator, basis,
                         min_confidence=0.0):
    eff = reduce_circuit(balanced_branch_circuit(
        lq_eff=lq, ls=resonator["ls"], lr=resonator["lr"],
        cr=resonator["cr"], cj=cj, ej=ej))
    out = np.empty(len(phis))
    for i, phi in enumerate(phis):
        levels = _LevelSet(build_hamiltonian(eff, phi, basis), n_lowest=60)
        pair = parse_transition(transitions[i])
        out[i], _ = _resolved_transition(levels, pair, min_confidence)
    return out


@dataclass(frozen=True)
class FitResult:
    """Spectrum-fit outcome.

    ``params`` holds lq_nh, cj_ff, ej_ghz and, for field-unit datasets, the
    nuisance scale_phi0_per_t and offset_phi0. ``sensitivity`` is the rms
    finite-difference derivative of the model frequencies per parameter
    (GHz per parameter unit); ``stderr`` the covariance-proxy standard
    errors from the weighted Jacobian.
    """

    params: dict
    stderr: dict
    sensitivity: dict
    rms_residual_ghz: float
    chi2: float
    residuals_ghz: np.ndarray = field(repr=False)
    status: str = "converged"
    forward: str = "single-loop"
    n_starts: int = 0
    best_start: int = 0
    seed: int = 0
    nfev: int = 0
    history: np.ndarray = field(repr=False, default=None)
    start_objectives: tuple = ()
    sigma_defaulted: bool = False
    bounds: dict = field(default_factory=dict)


def initial_guess(dataset: SpectroscopyDataset) -> dict:
    """Heuristic starting point for the circuit parameters.

    The junction capacitance is set by the transmon-like anharmonicity scale
    of the f02 branch, the plasma scale then fixes E_J + E_L, and the
    inductance follows from the f01 modulation depth. Crude by design; the
    multi-start explores a wide band around it.
    """
    f01 = dataset.freq_ghz[np.asarray(dataset.transition) == "f01"]
    f02 = dataset.freq_ghz[np.asarray(dataset.transition) == "f02"]
    if f01.size == 0:
        raise FitError("initial guess needs at least one f01 row")
    f01_max, f01_min = float(f01.max()), float(f01.min())
    if f02.size:
        ec0 = abs(2.0 * f01_max - float(f02.max()))
    else:
        ec0 = 0.5 * f01_max
    ec0 = min(max(ec0, 0.5), 50.0)
    etot0 = max((f01_max + ec0) ** 2 / (8.0 * ec0), 0.2)
    el0 = max(etot0 * (f01_min / f01_max) ** 2, 0.05)
    ej0 = max(etot0 - el0, 0.1)
    return {"lq_nh": EL_GHZ_NH / el0, "cj_ff": EC_GHZ_FF / ec0,
            "ej_ghz": ej0}


def _default_bounds(init):
    return {k: (v / 3.0, v * 3.0) for k, v in init.items()}


def _latin_hypercube(lo, hi, n_starts, rng):
    """Stratified start points in log space, one stratum per start per axis."""
    d = lo.size
    pts = np.empty((n_starts, d))
    for k in range(d):
        strata = (rng.permutation(n_starts) + rng.random(n_starts)) / n_starts
        pts[:, k] = np.exp(np.log(lo[k]) + strata * (np.log(hi[k]) -
                                                     np.log(lo[k])))
    return pts


def fit_spectrum(dataset: SpectroscopyDataset, init: dict | None = None,
                 bounds: dict | None = None, *, forward: str = "single-loop",
                 resonator: dict | None = None, basis_m: int = 30,
                 coupled_basis: FockBasisSpec = FockBasisSpec(20, 8),
                 n_starts: int = 8, seed: int = 0, max_nfev: int = 2000,
                 workers: int | None = None) -> FitResult:
    """Weighted least-squares fit of circuit parameters to a spectrum.

    Minimizes sum(((f_model - f_meas)/sigma)^2) with a bounded Nelder-Mead
    simplex started from the heuristic initial guess plus ``n_starts - 1``
    Latin-hypercube points over the bounds (deterministic per ``seed``).
    ``forward`` selects the single-loop fluxonium model (default) or the
    coupled two-mode model; the choice is recorded in the result. Datasets
    in tesla add field-to-flux scale and offset nuisance parameters unless
    they are pinned via ``init``/``bounds`` with zero-width bounds.

    Raises :class:`FitError` (with best-so-far attached) if no start
    converges, and ``ValueError`` for under-determined datasets.
    """
    if forward not in ("single-loop", "coupled"):
        raise ValueError("forward must be 'single-loop' or 'coupled'")
    if forward == "coupled" and resonator is None:
        raise ValueError("coupled forward model needs resonator={ls, lr, cr}")

    init = dict(init) if init else initial_guess(dataset)
    names = ["lq_nh", "cj_ff", "ej_ghz"]
    if dataset.unit == "tesla":
        init.setdefault("scale_phi0_per_t", 1.0 / DEVICE_GEOMETRY.field_per_phi0_t)
        init.setdefault("offset_phi0", 0.0)
        names += ["scale_phi0_per_t", "offset_phi0"]
    if len(dataset) < len(names):
        raise ValueError(
            f"under-determined: {len(dataset)} rows for {len(names)} "
            "parameters")

    all_bounds = _default_bounds({k: init[k] for k in names if init[k] != 0})
    all_bounds.setdefault("offset_phi0", (-0.6, 0.6))
    if bounds:
        all_bounds.update(bounds)
    missing = [k for k in names if k not in all_bounds]
    if missing:
        raise ValueError(
            f"no bounds for {missing}: zero initial values need explicit "
            "bounds")
    lo = np.array([all_bounds[k][0] for k in names])
    hi = np.array([all_bounds[k][1] for k in names])
    x0 = np.clip(np.array([init[k] for k in names]), lo, hi)

    x_meas = dataset.x
    f_meas = dataset.freq_ghz
    sig = dataset.sigma_ghz
    trs = dataset.transition

    def model(p):
        if dataset.unit == "tesla":
            phis = p[3] * x_meas + p[4]
        else:
            phis = x_meas
        if forward == "single-loop":
            return _model_freqs_single_loop(p[0], p[1], p[2], phis, trs,
                                            basis_m)
        return _model_freqs_coupled(p[0], p[1], p[2], phis, trs, resonator,
                                    coupled_basis)

    def objective(p):
        try:
            r = (model(p) - f_meas) / sig
        except Exception:
            return np.inf
        return float(np.dot(r, r))

    rng = np.random.default_rng(seed)
    starts = [x0]
    if n_starts > 1:
        span_lo = np.where(lo > 0, lo, np.maximum(lo, 1e-6))
        pts = _latin_hypercube(span_lo, np.maximum(hi, span_lo * (1 + 1e-12)),
                               n_starts - 1, rng)
        if "offset_phi0" in names:      # linear axis, not log
            k = names.index("offset_phi0")
            pts[:, k] = lo[k] + rng.random(n_starts - 1) * (hi[k] - lo[k])
        starts += [np.clip(p, lo, hi) for p in pts]

    nm_bounds = list(zip(lo, hi))

    def run_start(idx_start):
        idx, st = idx_start
        history = []
        best_f = [np.inf]

        def tracked(p):
            f = objective(p)
            if f < best_f[0]:
                best_f[0] = f
                history.append(f)
            return f

        res = minimize(tracked, st, method="Nelder-Mead", bounds=nm_bounds,
                       options=dict(xatol=1e-6, fatol=1e-9,
                                    maxfev=max_nfev, adaptive=False))
        return idx, res, np.asarray(history)

    jobs = list(enumerate(starts))
    if workers is not None and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run_start, jobs))
    else:
        outcomes = [run_start(j) for j in jobs]

    outcomes.sort(key=lambda t: (t[1].fun, t[0]))
    best_idx, best, history = outcomes[0]
    start_objs = tuple(float(o[1].fun) for o in sorted(outcomes,
                                                       key=lambda t: t[0]))
    converged = any(o[1].success for o in outcomes) and np.isfinite(best.fun)

    p = best.x
    resid = model(p) - f_meas
    params = dict(zip(names, (float(v) for v in p)))

    # covariance proxy and sensitivities from central differences at optimum
    jac = np.empty((len(dataset), len(names)))
    for k in range(len(names)):
        step = 1e-4 * max(abs(p[k]), 1e-6)
        pp, pm = p.copy(), p.copy()
        pp[k] += step
        pm[k] -= step
        jac[:, k] = (model(pp) - model(pm)) / (2.0 * step)
    sensitivity = {names[k]: float(np.sqrt(np.mean(jac[:, k] ** 2)))
                   for k in range(len(names))}
    jw = jac / sig[:, None]
    try:
        cov = np.linalg.inv(jw.T @ jw)
        stderr = {names[k]: float(np.sqrt(max(cov[k, k], 0.0)))
                  for k in range(len(names))}
    except np.linalg.LinAlgError:
        stderr = {k: float("nan") for k in names}

    result = FitResult(
        params=params, stderr=stderr, sensitivity=sensitivity,
        rms_residual_ghz=float(np.sqrt(np.mean(resid ** 2))),
        chi2=float(best.fun), residuals_ghz=resid,
        status="converged" if converged else "max-evaluations",
        forward=forward, n_starts=len(starts), best_start=int(best_idx),
        seed=seed, nfev=int(sum(o[1].nfev for o in outcomes)),
        history=history, start_objectives=start_objs,
        sigma_defaulted=dataset.sigma_defaulted,
        bounds={k: tuple(map(float, all_bounds[k])) for k in names})
    if not converged:
        raise FitError("no start converged within the evaluation budget",
                       best=result)
    return result


@dataclass(frozen=True)
class SharedInductanceFit:
    ls_nh: float
    chi_model_mhz: float
    chi_target_mhz: float
    bracket: tuple


def fit_shared_inductance(chi_measured_mhz: float, *, lq_nh: float,
                          cj_ff: float, ej_ghz: float, cr_ff: float,
                          lr_nh: float, bracket=(0.2, 10.0),
                          basis: FockBasisSpec = DEFAULT_BASIS,
                          xtol: float = 1e-4) -> SharedInductanceFit:
    """Shared inductance from the measured half-flux dispersive shift.

    Solves chi_model(ls) = chi_measured by bracketed root search, where the
    model chi is evaluated at phi_eff = 0.5 for the balanced gradiometer
    with all other parameters held fixed. |chi_model| grows monotonically
    with ls in the working range, so the root is unique.
    """
    if chi_measured_mhz == 0.0:
        raise ValueError("chi_measured must be nonzero")

    def chi_model(ls):
        eff = reduce_circuit(balanced_branch_circuit(
            lq_eff=lq_nh, ls=ls, lr=lr_nh, cr=cr_ff, cj=cj_ff, ej=ej_ghz))
        shift = dispersive_shift_at_half_flux(eff, basis)
        return shift

    def residual(ls):
        return chi_model(ls) - chi_measured_mhz

    fa, fb = residual(bracket[0]), residual(bracket[1])
    if np.sign(fa) == np.sign(fb):
        raise FitError(
            f"no sign change of chi_model - chi_measured over ls bracket "
            f"{bracket} (values {fa:+.3f}, {fb:+.3f} MHz); widen the bracket")
    ls = brentq(residual, bracket[0], bracket[1], xtol=xtol)
    return SharedInductanceFit(ls_nh=float(ls),
                               chi_model_mhz=chi_model(ls),
                               chi_target_mhz=chi_measured_mhz,
                               bracket=tuple(bracket))


def dispersive_shift_at_half_flux(eff, basis=DEFAULT_BASIS):
    """chi(phi_eff = 0.5) in MHz; raises if the labels are unresolved."""
    shift = dispersive_shift(eff, 0.5, basis)
    if not shift.valid:
        raise FitError(f"chi invalid at half flux: {shift.reason}")
    return shift.chi_mhz


@dataclass(frozen=True)
class DecayCurve:
    """Sampled time-domain curve (population inversion versus time).

    ``kind`` selects the fit model: "exponential" (energy relaxation),
    "ramsey" (decaying cosine), "echo" (exponential), or "parabola"
    (frequency versus field, for the kinetic-inductance shift).
    """

    t: np.ndarray
    value: np.ndarray
    kind: str = "exponential"

    def __post_init__(self):
        object.__setattr__(self, "t", np.asarray(self.t, dtype=float))
        object.__setattr__(self, "value",
                           np.asarray(self.value, dtype=float))
        if self.kind not in ("exponential", "ramsey", "echo", "parabola"):
            raise ValueError(f"unknown curve kind {self.kind!r}")
        min_pts = 3 if self.kind == "parabola" else 5
        if self.t.size < min_pts:
            raise ValueError(f"{self.kind} curve needs >= {min_pts} samples")
        if self.t.size != self.value.size:
            raise ValueError("t and value must have equal length")
        if not np.all(np.diff(self.t) > 0):
            raise ValueError("t must be strictly increasing")


@dataclass(frozen=True)
class DecayFit:
    kind: str
    tau: float            # time constant, in the units of the input t
    tau_stderr: float
    params: dict
    stderr: dict


def fit_decay(curve: DecayCurve) -> DecayFit:
    """Fit a decay model and return the time constant with standard error.

    exponential / echo:  a * exp(-t/tau) + c
    ramsey:              a * exp(-t/tau) * cos(2 pi delta t + phi0) + c

    Time is normalized internally to the curve span, so rescaling t rescales
    the fitted time constant exactly. Negative fitted time constants and
    unresolvable (constant) curves raise :class:`FitError`.
    """
    if curve.kind == "parabola":
        raise ValueError("use fit_parabola for parabola curves")
    t, y = curve.t, curve.value
    if np.ptp(y) == 0.0:
        raise FitError("constant curve: no decay resolvable")
    span = t[-1] - t[0]
    ts = (t - t[0]) / span

    if curve.kind in ("exponential", "echo"):
        def f(ts_, a, tau, c):
            return a * np.exp(-ts_ / tau) + c

        tail = y[-max(2, y.size // 5):].mean()
        p0 = [y[0] - tail, 1.0 / 3.0, tail]
        names = ("amplitude", "tau", "offset")
    else:
        yc = y - y.mean()
        dt = np.mean(np.diff(ts))
        spec_pow = np.abs(np.fft.rfft(yc)) ** 2
        freqs = np.fft.rfftfreq(y.size, d=dt)
        f0 = float(freqs[np.argmax(spec_pow[1:]) + 1])

        def f(ts_, a, tau, delta, phi0, c):
            return a * np.exp(-ts_ / tau) * np.cos(
                2.0 * np.pi * delta * ts_ + phi0) + c

        p0 = [np.ptp(y) / 2.0, 1.0 / 3.0, f0, 0.0, y.mean()]
        names = ("amplitude", "tau", "detuning", "phase", "offset")

    try:
        popt, pcov = curve_fit(f, ts, y, p0=p0, maxfev=20000)
    except RuntimeError as exc:
        raise FitError(f"decay fit did not converge: {exc}") from exc
    perr = np.sqrt(np.clip(np.diag(pcov), 0.0, None))

    params = dict(zip(names, (float(v) for v in popt)))
    stderr = dict(zip(names, (float(v) for v in perr)))
    tau = params["tau"] * span
    tau_err = stderr["tau"] * span
    if curve.kind == "ramsey":
        # report detuning back in 1/t units, sign conventions free
        params["detuning"] = params["detuning"] / span
        stderr["detuning"] = stderr["detuning"] / span
    if tau <= 0:
        raise FitError(f"fitted time constant not positive: {tau:g}")
    if tau > 100.0 * span:
        raise FitError(
            f"no decay resolvable: fitted time constant {tau:g} vastly "
            f"exceeds the observation window {span:g}")
    params["tau"] = tau
    stderr["tau"] = tau_err
    return DecayFit(kind=curve.kind, tau=float(tau), tau_stderr=float(tau_err),
                    params=params, stderr=stderr)


@dataclass(frozen=True)
class ParabolaFit:
    f_max: float
    b_offset: float
    curvature: float       # c >= 0 in f(B) = f_max - c (B - B_offset)^2


def fit_parabola(curve: DecayCurve) -> ParabolaFit:
    """Least-squares concave parabola f(B) = f_max - c (B - B_offset)^2.

    The curvature c is required to be non-negative (the kinetic-inductance
    shift always bends the resonance down); convex or collinear-degenerate
    data raise :class:`FitError`.
    """
    if curve.kind != "parabola":
        raise ValueError("curve kind must be 'parabola'")
    b, fvals = curve.t, curve.value
    if np.unique(b).size < 3:
        raise FitError("degenerate data: need >= 3 distinct abscissae")
    a2, a1, a0 = np.polyfit(b, fvals, 2)
    scale = max(abs(fvals).max(), 1e-30)
    if abs(a2) * np.ptp(b) ** 2 < 1e-12 * scale:
        raise FitError("degenerate data: no resolvable curvature")
    if a2 > 0:
        raise FitError("data curvature is convex; c >= 0 unattainable")
    c = -a2
    b_offset = a1 / (2.0 * c)
    f_max = a0 + c * b_offset ** 2
    return ParabolaFit(f_max=float(f_max), b_offset=float(b_offset),
                       curvature=float(c))
