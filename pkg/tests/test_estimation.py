"""Estimation tests: fit roundtrips, decay curves, parabola, shared inductance."""

import numpy as np
import pytest

from gradflux import (DecayCurve, FitError, SpectroscopyDataset,
                      balanced_branch_circuit, dispersive_shift, fit_decay,
                      fit_parabola, fit_shared_inductance, fit_spectrum,
                      initial_guess, reduce_circuit, single_loop_transitions)
from gradflux.spectrum import FockBasisSpec

TRUE = dict(lq_nh=172.0, cj_ff=3.4, ej_ghz=5.1)


def synthetic_dataset(n=40, noise_ghz=0.0, seed=0, unit="phi0",
                      scale=None, offset=0.0, m=30):
    """Forward-model generated f01/f02 rows over [0.05, 0.95] Phi_0."""
    rng = np.random.default_rng(seed)
    phis = np.linspace(0.05, 0.95, n)
    levels = single_loop_transitions(TRUE["lq_nh"], TRUE["cj_ff"],
                                     TRUE["ej_ghz"], phis, m=m)
    trans = tuple("f01" if i % 2 == 0 else "f02" for i in range(n))
    freq = np.where([t == "f01" for t in trans],
                    levels[:, 1] - levels[:, 0],
                    levels[:, 2] - levels[:, 0])
    freq = freq + rng.normal(0.0, noise_ghz, size=n) if noise_ghz else freq
    x = phis if unit == "phi0" else (phis - offset) / scale
    return SpectroscopyDataset(x=x, transition=trans, freq_ghz=freq,
                               sigma_ghz=np.full(n, max(noise_ghz, 1e-3)),
                               unit=unit)


class TestFitSpectrum:
    def test_zero_noise_roundtrip(self):
        data = synthetic_dataset()
        fit = fit_spectrum(data, n_starts=4, seed=0)
        for key, val in TRUE.items():
            assert fit.params[key] == pytest.approx(val, rel=1e-3)
        assert fit.rms_residual_ghz < 1e-5
        assert fit.status == "converged"
        assert fit.forward == "single-loop"

    def test_noisy_roundtrip_one_percent(self):
        data = synthetic_dataset(noise_ghz=1e-3, seed=3)
        fit = fit_spectrum(data, n_starts=4, seed=0)
        for key, val in TRUE.items():
            assert fit.params[key] == pytest.approx(val, rel=0.01)
        # fitted model reproduces both branches within the linewidth scale
        assert fit.rms_residual_ghz < 1.5e-3
        assert np.max(np.abs(fit.residuals_ghz)) < 4e-3

    def test_multistart_workers_deterministic(self):
        data = synthetic_dataset(noise_ghz=1e-3, seed=5)
        serial = fit_spectrum(data, n_starts=3, seed=0)
        threaded = fit_spectrum(data, n_starts=3, seed=0, workers=3)
        assert serial.params == threaded.params
        assert serial.best_start == threaded.best_start
        assert serial.start_objectives == threaded.start_objectives

    def test_monotone_accepted_objective(self):
        data = synthetic_dataset(noise_ghz=1e-3, seed=1)
        fit = fit_spectrum(data, n_starts=2, seed=0)
        assert np.all(np.diff(fit.history) <= 0)
        assert fit.history[-1] == pytest.approx(fit.chi2)

    def test_reported_diagnostics(self):
        data = synthetic_dataset(noise_ghz=1e-3, seed=2)
        fit = fit_spectrum(data, n_starts=2, seed=0)
        assert set(fit.sensitivity) == {"lq_nh", "cj_ff", "ej_ghz"}
        assert all(v > 0 for v in fit.sensitivity.values())
        assert all(v > 0 for v in fit.stderr.values())
        assert fit.residuals_ghz.shape == (len(data),)
        assert len(fit.start_objectives) == fit.n_starts

    def test_field_axis_nuisance_parameters(self):
        scale = 3.6e6            # Phi_0 per tesla
        offset = 0.02            # trapped-flux offset in Phi_0
        data = synthetic_dataset(unit="tesla", scale=scale, offset=offset)
        init = dict(TRUE, scale_phi0_per_t=3.5e6, offset_phi0=0.0)
        bounds = {"scale_phi0_per_t": (3.0e6, 4.2e6),
                  "offset_phi0": (-0.1, 0.1)}
        fit = fit_spectrum(data, init=init, bounds=bounds, n_starts=4,
                           seed=0, max_nfev=4000)
        assert fit.params["scale_phi0_per_t"] == pytest.approx(scale,
                                                               rel=1e-3)
        assert fit.params["offset_phi0"] == pytest.approx(offset, abs=1e-3)
        assert fit.params["lq_nh"] == pytest.approx(TRUE["lq_nh"], rel=1e-3)

    def test_pinned_field_axis_via_zero_width_bounds(self):
        scale = 3.6e6
        data = synthetic_dataset(n=24, unit="tesla", scale=scale, offset=0.0)
        fit = fit_spectrum(
            data,
            init=dict(lq_nh=180.0, cj_ff=3.2, ej_ghz=4.8,
                      scale_phi0_per_t=scale, offset_phi0=0.0),
            bounds={"scale_phi0_per_t": (scale, scale),
                    "offset_phi0": (0.0, 0.0)},
            n_starts=2, seed=0)
        assert fit.params["scale_phi0_per_t"] == scale
        assert fit.params["offset_phi0"] == 0.0
        assert fit.params["lq_nh"] == pytest.approx(TRUE["lq_nh"], rel=1e-3)

    def test_zero_init_needs_explicit_bounds(self):
        data = synthetic_dataset(n=12)
        with pytest.raises(ValueError, match="bounds"):
            fit_spectrum(data, init=dict(lq_nh=180.0, cj_ff=3.2, ej_ghz=0.0),
                         n_starts=1)

    def test_under_determined_dataset(self):
        data = synthetic_dataset(n=2)
        with pytest.raises(ValueError, match="under-determined"):
            fit_spectrum(data)

    def test_exhausted_budget_carries_best_so_far(self):
        data = synthetic_dataset(noise_ghz=1e-3, seed=4)
        with pytest.raises(FitError) as err:
            fit_spectrum(data, n_starts=2, seed=0, max_nfev=5)
        best = err.value.best
        assert best is not None
        assert best.status == "max-evaluations"
        assert set(best.params) == {"lq_nh", "cj_ff", "ej_ghz"}
        assert np.isfinite(best.chi2)

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValueError):
            SpectroscopyDataset(x=np.array([]), transition=(),
                                freq_ghz=np.array([]),
                                sigma_ghz=np.array([]))

    def test_initial_guess_within_band(self):
        data = synthetic_dataset()
        guess = initial_guess(data)
        for key, val in TRUE.items():
            assert val / 3 < guess[key] < val * 3

    def test_coupled_forward_roundtrip(self):
        basis = FockBasisSpec(16, 6)
        resonator = {"ls": 2.8, "lr": 21.6, "cr": 20.2}
        eff = reduce_circuit(balanced_branch_circuit(
            TRUE["lq_nh"], resonator["ls"], resonator["lr"],
            resonator["cr"], TRUE["cj_ff"], TRUE["ej_ghz"]))
        from gradflux.estimation import _model_freqs_coupled
        phis = np.linspace(0.1, 0.9, 8)
        trans = tuple("f01" for _ in phis)
        freq = _model_freqs_coupled(TRUE["lq_nh"], TRUE["cj_ff"],
                                    TRUE["ej_ghz"], phis, trans, resonator,
                                    basis)
        data = SpectroscopyDataset(x=phis, transition=trans, freq_ghz=freq,
                                   sigma_ghz=np.full(8, 1e-3))
        fit = fit_spectrum(data, init=dict(TRUE), forward="coupled",
                           resonator=resonator, coupled_basis=basis,
                           n_starts=1, seed=0, max_nfev=600)
        assert fit.forward == "coupled"
        for key, val in TRUE.items():
            assert fit.params[key] == pytest.approx(val, rel=5e-3)


class TestSharedInductance:
    def test_roundtrip_values(self):
        for ls0 in (1.0, 2.8, 5.0):
            eff = reduce_circuit(balanced_branch_circuit(
                172.0, ls0, 21.6, 20.2, 3.4, 5.1))
            chi0 = dispersive_shift(eff, 0.5).chi_mhz
            fit = fit_shared_inductance(chi0, lq_nh=172.0, cj_ff=3.4,
                                        ej_ghz=5.1, cr_ff=20.2, lr_nh=21.6)
            assert fit.ls_nh == pytest.approx(ls0, abs=1e-3)

    def test_device_extraction(self):
        fit = fit_shared_inductance(-7.8, lq_nh=172.0, cj_ff=3.4,
                                    ej_ghz=5.1, cr_ff=20.2, lr_nh=21.6)
        assert fit.ls_nh == pytest.approx(2.8, rel=0.10)
        assert fit.chi_model_mhz == pytest.approx(-7.8, abs=0.01)

    def test_monotone_coupling_strength(self):
        basis = FockBasisSpec(20, 10)
        chis = []
        for ls in np.linspace(0.5, 10.0, 20):
            eff = reduce_circuit(balanced_branch_circuit(
                172.0, ls, 21.6, 20.2, 3.4, 5.1))
            chis.append(dispersive_shift(eff, 0.5, basis).chi_mhz)
        assert np.all(np.diff(np.abs(chis)) > 0)

    def test_small_coupling_limit(self):
        # chi -> 0 forces ls -> 0: a tiny target roots at a tiny ls
        eff = reduce_circuit(balanced_branch_circuit(
            172.0, 0.05, 21.6, 20.2, 3.4, 5.1))
        chi_small = dispersive_shift(eff, 0.5).chi_mhz
        fit = fit_shared_inductance(chi_small, lq_nh=172.0, cj_ff=3.4,
                                    ej_ghz=5.1, cr_ff=20.2, lr_nh=21.6,
                                    bracket=(0.01, 2.0))
        assert fit.ls_nh == pytest.approx(0.05, abs=1e-3)

    def test_no_sign_change_suggests_widening(self):
        with pytest.raises(FitError, match="widen"):
            fit_shared_inductance(-500.0, lq_nh=172.0, cj_ff=3.4,
                                  ej_ghz=5.1, cr_ff=20.2, lr_nh=21.6,
                                  bracket=(0.5, 3.0))

    def test_zero_target_rejected(self):
        with pytest.raises(ValueError):
            fit_shared_inductance(0.0, lq_nh=172.0, cj_ff=3.4, ej_ghz=5.1,
                                  cr_ff=20.2, lr_nh=21.6)


class TestFitDecay:
    def test_exponential_t1(self):
        t = np.linspace(0.0, 40.0, 60)
        y = 0.8 * np.exp(-t / 10.0) - 0.05
        fit = fit_decay(DecayCurve(t=t, value=y, kind="exponential"))
        assert fit.tau == pytest.approx(10.0, rel=1e-3)

    def test_ramsey_t2star(self):
        t = np.linspace(0.0, 2.5, 80)
        y = 0.6 * np.exp(-t / 0.59) * np.cos(2 * np.pi * 2.0 * t + 0.3) + 0.1
        fit = fit_decay(DecayCurve(t=t, value=y, kind="ramsey"))
        assert fit.tau == pytest.approx(0.59, rel=0.01)
        assert abs(fit.params["detuning"]) == pytest.approx(2.0, rel=0.01)

    def test_echo_t2(self):
        t = np.linspace(0.0, 25.0, 50)
        y = 0.7 * np.exp(-t / 5.3) + 0.02
        fit = fit_decay(DecayCurve(t=t, value=y, kind="echo"))
        assert fit.tau == pytest.approx(5.3, rel=1e-3)
        assert fit.tau_stderr >= 0.0

    def test_constant_curve_rejected(self):
        curve = DecayCurve(t=np.linspace(0, 10, 20),
                           value=np.full(20, 0.3), kind="exponential")
        with pytest.raises(FitError, match="constant"):
            fit_decay(curve)

    def test_growing_curve_rejected(self):
        # exponential growth forces a negative fitted time constant
        t = np.linspace(0.0, 10.0, 30)
        curve = DecayCurve(t=t, value=0.1 * np.exp(t / 3.0),
                           kind="exponential")
        with pytest.raises(FitError):
            fit_decay(curve)

    def test_time_scale_equivariance_exact(self):
        t = np.linspace(0.0, 12.0, 48)
        y = 0.9 * np.exp(-t / 4.0) + 0.05
        base = fit_decay(DecayCurve(t=t, value=y, kind="exponential"))
        scaled = fit_decay(DecayCurve(t=4.0 * t, value=y,
                                      kind="exponential"))
        assert scaled.tau == 4.0 * base.tau      # bitwise, power-of-two scale
        third = fit_decay(DecayCurve(t=3.0 * t, value=y, kind="exponential"))
        assert third.tau == pytest.approx(3.0 * base.tau, rel=1e-9)

    def test_curve_validation(self):
        with pytest.raises(ValueError):
            DecayCurve(t=[0, 1, 2, 2, 3], value=[1, 2, 3, 4, 5])
        with pytest.raises(ValueError):
            DecayCurve(t=[0, 1, 2], value=[1, 2, 3], kind="exponential")
        with pytest.raises(ValueError):
            fit_decay(DecayCurve(t=[0, 1, 2], value=[3, 2, 1],
                                 kind="parabola"))


class TestFitParabola:
    def test_exact_parabola(self):
        b = np.linspace(-4.0, 9.0, 9)
        y = 7.4321 - 0.025 * (b - 1.5) ** 2
        fit = fit_parabola(DecayCurve(t=b, value=y, kind="parabola"))
        assert fit.f_max == pytest.approx(7.4321, abs=1e-10)
        assert fit.b_offset == pytest.approx(1.5, abs=1e-9)
        assert fit.curvature == pytest.approx(0.025, rel=1e-9)

    def test_symmetric_data_centers_offset(self):
        b0 = 0.14
        b = b0 + np.linspace(-5, 5, 11)
        y = 7.445 - 0.01 * (b - b0) ** 2
        fit = fit_parabola(DecayCurve(t=b, value=y, kind="parabola"))
        assert fit.b_offset == pytest.approx(b0, abs=1e-10)

    def test_noisy_curvature_within_five_percent(self):
        rng = np.random.default_rng(12)
        b = np.linspace(-10.0, 10.0, 41)
        y = 7.445 - 2e-4 * (b - 0.3) ** 2 + rng.normal(0, 1e-6, b.size)
        fit = fit_parabola(DecayCurve(t=b, value=y, kind="parabola"))
        assert fit.curvature == pytest.approx(2e-4, rel=0.05)

    def test_collinear_rejected(self):
        b = np.linspace(0, 10, 7)
        with pytest.raises(FitError, match="degenerate"):
            fit_parabola(DecayCurve(t=b, value=2.0 + 0.5 * b,
                                    kind="parabola"))

    def test_convex_rejected(self):
        b = np.linspace(-5, 5, 9)
        with pytest.raises(FitError, match="convex"):
            fit_parabola(DecayCurve(t=b, value=1.0 + 0.3 * b ** 2,
                                    kind="parabola"))
