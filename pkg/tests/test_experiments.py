"""Tests for scan drivers and fit helpers.

Fit routines are exercised on synthetic signals with known parameters so
every recovery check has an exact oracle.  Scan drivers run single-atom
desk-scale configurations and stay in the few-second range.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ramanlmt.constants import RB85, TWO_PI, KinematicState, resonant_offset
from ramanlmt.ensemble import EnsembleSpec, GaussHermiteSampling
from ramanlmt.errors import NoPeaks, SingularFit
from ramanlmt.experiments import (ScanResult, analyze_spectrum,
                                  fit_dual_cosine, fit_harmonics,
                                  fit_harmonics_free, fit_quadratic,
                                  fit_single_cosine, fringe_chirp_scan,
                                  lmt_t0_scan, phase_vs_T, spectrum_scan)

# fast drop keeps the two beam-pair resonances far from the copropagating
# line, so single-atom interferometer tests see one clean channel
KIN = KinematicState(2.0)
KG = RB85.k_eff * KIN.g                 # gravity chirp rate (rad/s^2)


def test_scan_result_shape_guard():
    with pytest.raises(ValueError):
        ScanResult(x=np.arange(3.0), mean=np.arange(4.0), stderr=np.zeros(3))


# ---------------------------------------------------------------------------
# peak extraction on synthetic spectra

def synthetic_spectrum(centers, heights, sigma, span, n):
    x = np.linspace(-span, span, n)
    y = np.zeros_like(x)
    for c, h in zip(centers, heights):
        y += h * np.exp(-0.5 * ((x - c) / sigma) ** 2)
    return ScanResult(x, y, np.zeros_like(x))


def test_analyze_spectrum_recovers_three_gaussians():
    centers = [-2.503e6, 0.1004e6, 2.7007e6]   # off-grid on purpose
    heights = [0.2, 0.5, 0.25]
    sigma = 2.0e5
    res = synthetic_spectrum(centers, heights, sigma, span=5e6, n=1001)
    peaks = analyze_spectrum(res)
    assert len(peaks) == 3
    dx = res.x[1] - res.x[0]
    fwhm = np.sqrt(8.0 * np.log(2.0)) * sigma
    for p, c, h in zip(peaks, centers, heights):
        assert abs(p.center - c) < 0.2 * dx
        assert abs(p.height - h) < 5e-3
        assert abs(p.fwhm - fwhm) < 0.05 * fwhm
        assert p.prominence > 0.0
    assert [p.center for p in peaks] == sorted(p.center for p in peaks)


def test_analyze_spectrum_prominence_threshold():
    res = synthetic_spectrum([-2e6, 2e6], [1.0, 0.05], 2e5, span=5e6, n=801)
    assert len(analyze_spectrum(res)) == 1
    assert len(analyze_spectrum(res, prominence_frac=0.02)) == 2


def test_analyze_spectrum_flat_raises():
    res = ScanResult(np.linspace(0, 1, 50), np.full(50, 0.3), np.zeros(50))
    with pytest.raises(NoPeaks):
        analyze_spectrum(res)


def test_analyze_spectrum_nonuniform_grid_rejected():
    res = ScanResult(np.array([0.0, 1.0, 2.5]), np.array([0.0, 1.0, 0.0]),
                     np.zeros(3))
    with pytest.raises(ValueError):
        analyze_spectrum(res)


def test_spectrum_scan_single_atom_line_center():
    # one falling atom probed around the upward beam-pair resonance
    kin = KinematicState(0.1962)
    off0 = resonant_offset(RB85, kin, +1)
    offsets = off0 + TWO_PI * np.linspace(-200e3, 200e3, 41)
    res = spectrum_scan(RB85, kin, None, offsets, duration=10e-6,
                        rabi=TWO_PI * 50e3)
    assert res.meta["experiment"] == "spectrum"
    assert np.all(res.stderr == 0.0)
    assert np.all((res.mean >= 0.0) & (res.mean <= 1.0))
    top = max(analyze_spectrum(res), key=lambda p: p.height)
    assert abs(top.center - off0) < TWO_PI * 10e3
    assert top.height > 0.9


def test_spectrum_scan_gh_ensemble_runs():
    kin = KinematicState(0.1962)
    spec = EnsembleSpec(temperature=14e-6, v0_bias=kin.v0,
                        sampling=GaussHermiteSampling(4))
    off0 = resonant_offset(RB85, kin, +1)
    res = spectrum_scan(RB85, kin, spec, [off0], duration=10e-6,
                        rabi=TWO_PI * 50e3)
    assert 0.0 < res.mean[0] < 1.0
    assert res.stderr[0] == 0.0     # quadrature weights carry no shot noise


# ---------------------------------------------------------------------------
# quadratic and harmonic fits on synthetic data

@settings(max_examples=50)
@given(b0=st.floats(-5, 5), b1=st.floats(-5, 5), b2=st.floats(-5, 5))
def test_fit_quadratic_exact(b0, b1, b2):
    x = np.linspace(-1.0, 2.0, 31)
    fit = fit_quadratic(x, b2 * x**2 + b1 * x + b0)
    assert fit.beta0 == pytest.approx(b0, abs=1e-8)
    assert fit.beta1 == pytest.approx(b1, abs=1e-8)
    assert fit.beta2 == pytest.approx(b2, abs=1e-8)
    assert fit.residual_rms < 1e-8


def test_fit_quadratic_needs_three_points():
    with pytest.raises(SingularFit):
        fit_quadratic(np.array([0.0, 1.0]), np.array([0.0, 1.0]))


@settings(max_examples=50)
@given(c1=st.floats(0.1, 2.0), c2=st.floats(0.0, 1.0),
       p1=st.floats(-3.0, 3.0), p2=st.floats(-3.0, 3.0),
       off=st.floats(-1.0, 1.0))
def test_fit_harmonics_exact_recovery(c1, c2, p1, p2, off):
    w = TWO_PI / 3.7
    x = np.linspace(0.0, 11.1, 200)
    y = off + c1 * np.cos(w * x + p1) + c2 * np.cos(2 * w * x + p2)
    fit = fit_harmonics(x, y, w)
    assert fit.offset == pytest.approx(off, abs=1e-9)
    assert fit.amplitudes[0] == pytest.approx(c1, abs=1e-9)
    assert fit.amplitudes[1] == pytest.approx(c2, abs=1e-9)
    assert fit.residual_rms < 1e-9
    assert abs((fit.phases[0] - p1 + np.pi) % TWO_PI - np.pi) < 1e-6
    if c2 > 0.05:
        assert abs((fit.phases[1] - p2 + np.pi) % TWO_PI - np.pi) < 1e-6
    assert fit.model(x) == pytest.approx(y, abs=1e-8)


def test_fit_harmonics_stderr_tracks_noise():
    rng = np.random.default_rng(7)
    w = TWO_PI
    x = np.linspace(0.0, 5.0, 400, endpoint=False)   # integer period count
    sigma = 0.01
    y = (0.4 + 0.3 * np.cos(w * x + 0.3) + 0.132 * np.cos(2 * w * x - 1.0)
         + rng.normal(0.0, sigma, x.size))
    fit = fit_harmonics(x, y, w)
    # orthogonal design over whole periods: var(a_k) = 2 sigma^2 / N
    expected = sigma * np.sqrt(2.0 / x.size)
    assert 0.7 * expected < fit.amplitude_stderr(1) < 1.4 * expected
    assert abs(fit.amplitudes[0] - 0.3) < 4.0 * fit.amplitude_stderr(1)
    assert abs(fit.amplitudes[1] - 0.132) < 4.0 * fit.amplitude_stderr(2)
    # explicit per-point errors reproduce the same covariance scale
    fit2 = fit_harmonics(x, y, w, y_err=np.full(x.size, sigma))
    assert 0.9 * expected < fit2.amplitude_stderr(1) < 1.1 * expected


def test_fit_harmonics_singular_cases():
    x = np.linspace(0.0, 1.0, 4)
    with pytest.raises(SingularFit):       # 2 harmonics need 5 points
        fit_harmonics(x, np.zeros(4), 1.0)
    x = np.linspace(0.0, 1.0, 50)
    with pytest.raises(SingularFit):       # zero frequency: cos column = 1
        fit_harmonics(x, np.cos(x), 0.0)


def test_fit_harmonics_free_recovers_frequency():
    w_true = 63000.0
    x = np.linspace(0.0, 5e-4, 160)
    y = 0.5 + 0.1 * np.cos(w_true * x + 0.2) + 0.3 * np.cos(2 * w_true * x + 1.1)
    fit = fit_dual_cosine(x, y, 0.97 * w_true, free=True)
    assert abs(fit.omega1 - w_true) / w_true < 1e-6
    assert fit.residual_rms < 1e-6
    # the deliberately wrong fixed frequency leaves visible residuals
    assert fit_dual_cosine(x, y, 0.97 * w_true).residual_rms > 1e-2


def test_fit_harmonics_free_guess_guard():
    with pytest.raises(SingularFit):
        fit_harmonics_free(np.linspace(0, 1, 50), np.zeros(50), 0.0)


def test_fit_single_cosine_one_harmonic():
    x = np.linspace(0.0, 4.0, 80)
    fit = fit_single_cosine(x, 0.2 + 0.7 * np.cos(3.0 * x - 0.5), 3.0)
    assert fit.amplitudes.shape == (1,)
    assert fit.amplitudes[0] == pytest.approx(0.7, abs=1e-9)


# ---------------------------------------------------------------------------
# interferometer scan drivers (single atom, short sequences)

def test_phase_vs_T_quadratic_law():
    # grid keeps the phase step 2 k_eff g T dT under pi so unwrap is safe;
    # the window is wide enough that finite-pulse corrections (linear in T)
    # drop out of the curvature
    T = np.linspace(1.0e-4, 5.5e-4, 48)
    scan = phase_vs_T(RB85, KIN, T, tau_pi=5e-6, substeps=8)
    assert scan.quadratures.shape == (4, T.size)
    fit = fit_quadratic(scan.T, scan.phase)
    assert abs(fit.beta2 - KG) / KG < 1e-3
    assert fit.residual_rms < 0.02
    assert np.all(scan.contrast() > 0.4)


def test_fringe_chirp_scan_central_fringe():
    alphas = KG * np.linspace(0.75, 1.25, 17)
    res = fringe_chirp_scan(RB85, KIN, None, alphas, T=2.0e-4, tau_pi=5e-6,
                            substeps=8)
    assert res.meta["experiment"] == "fringe"
    assert np.all(res.stderr == 0.0)
    assert np.all((res.mean >= 0.0) & (res.mean <= 1.0))
    span = np.ptp(res.mean)
    assert span > 0.2
    # chirp matching gravity sits on the central fringe extremum and the
    # pattern is even around it
    mid = res.mean[8]
    assert min(abs(mid - res.mean.max()),
               abs(mid - res.mean.min())) < 0.05 * span
    np.testing.assert_allclose(res.mean, res.mean[::-1], atol=0.05 * span)


def test_lmt_t0_scan_ideal_pulses_single_beat():
    T = 4.0e-4
    t0_values = np.linspace(15e-6, 240e-6, 40)
    res = lmt_t0_scan(RB85, KIN, None, t0_values, T=T, tau_pi=2e-6,
                      pulse_model="ideal")
    assert res.meta["pulse_model"] == "ideal"
    fit = fit_dual_cosine(res.x, res.mean, KG * T)
    # perfect transfer leaves only the doubled-loop beat at 2 k_eff g T
    assert fit.amplitudes[0] < 1e-3 * fit.amplitudes[1]
    assert fit.amplitudes[1] > 0.1
    assert fit.residual_rms < 1e-3 * fit.ptp
