"""Desk-scale experiments: spectroscopy, fringe scans, beat-note scans.

Every scan returns a ScanResult (grid, mean detected population, standard
error, metadata echo).  Analysis helpers extract peaks from spectra, the
quadratic phase law from interferometer scans, and one- or two-harmonic
cosine fits from beat signals.  All frequencies here are angular (rad/s);
unit conversion to Hz happens at the command-line boundary only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence as SequenceType

import numpy as np
import scipy.optimize
import scipy.signal

from .constants import AtomSpecies, ChannelSet, KinematicState
from .ensemble import EnsembleSpec, run_ensemble, DEFAULT_CHUNK_SIZE
from .errors import NoPeaks, SingularFit
from .propagator import (DEFAULT_OVERFLOW_THRESHOLD, DEFAULT_SUBSTEPS,
                         LadderState, detect_population_f3)
from .sequencer import (DEFAULT_INTERFEROMETER_SUBSTEPS, Sequence,
                        evolve_sequence, ladder_size_for, make_lmt_sequence,
                        make_mzi_sequence, make_single_pulse)

READOUT_PHASES = (0.0, 0.5 * np.pi, np.pi, 1.5 * np.pi)


@dataclass
class ScanResult:
    """One scanned observable: x grid, averaged signal, standard error."""

    x: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.mean = np.asarray(self.mean, dtype=float)
        self.stderr = np.asarray(self.stderr, dtype=float)
        if not (self.x.shape == self.mean.shape == self.stderr.shape):
            raise ValueError("x, mean and stderr must have matching shapes")


def _signal(sequence: Sequence, species: AtomSpecies, kin: KinematicState,
            ens_spec: Optional[EnsembleSpec], n_max: int, pulse_model: str,
            chunk_size: int, overflow_threshold: float):
    """Mean F3 population and stderr, single atom when ens_spec is None."""
    if ens_spec is None:
        state = LadderState.ground(n_max, t=sequence.t0)
        out = evolve_sequence(state, species, kin, sequence, pulse_model,
                              overflow_threshold)
        return detect_population_f3(out), 0.0
    res = run_ensemble(sequence, ens_spec, species, g=kin.g, n_max=n_max,
                       pulse_model=pulse_model, chunk_size=chunk_size,
                       overflow_threshold=overflow_threshold)
    return res.mean_population_f3, res.stderr


# ---------------------------------------------------------------------------
# spectroscopy

def spectrum_scan(species: AtomSpecies, kin: KinematicState,
                  ens_spec: Optional[EnsembleSpec],
                  offsets: SequenceType[float], *, duration: float,
                  rabi: float | ChannelSet, n_max: int = 4,
                  substeps: int | None = None,
                  chunk_size: int = DEFAULT_CHUNK_SIZE,
                  overflow_threshold: float = DEFAULT_OVERFLOW_THRESHOLD
                  ) -> ScanResult:
    """Single-pulse transfer vs modulation offset, all beam pairs enabled.

    With a falling cloud this resolves three lines: the two
    counterpropagating pairs Doppler-split to +-k_eff*v0 + omega_rec and
    the Doppler-free copropagating line at zero offset.
    """
    if substeps is None:
        substeps = DEFAULT_SUBSTEPS
    offsets = np.asarray(offsets, dtype=float)
    mean = np.empty(offsets.size)
    stderr = np.empty(offsets.size)
    for i, off in enumerate(offsets):
        seq = make_single_pulse(species, kin, duration=duration, rabi=rabi,
                                omega_offset=off, substeps=substeps)
        mean[i], stderr[i] = _signal(seq, species, kin, ens_spec, n_max,
                                     "physical", chunk_size,
                                     overflow_threshold)
    # per-pair strengths flatten to a (plus, minus, co) tuple in the echo
    meta_rabi = ((rabi.plus.rabi, rabi.minus.rabi, rabi.co.rabi)
                 if isinstance(rabi, ChannelSet) else rabi)
    meta = {"experiment": "spectrum", "duration": duration,
            "rabi": meta_rabi, "v0": kin.v0, "g": kin.g, "n_max": n_max,
            "substeps": substeps}
    return ScanResult(offsets, mean, stderr, meta)


@dataclass(frozen=True)
class Peak:
    """One spectral line: center and height refined by a local parabola."""

    center: float
    height: float
    fwhm: float
    prominence: float


def analyze_spectrum(result: ScanResult,
                     prominence_frac: float = 0.15) -> list:
    """Locate peaks with prominence above prominence_frac of the span.

    Weak Rabi sidelobes sit around each line at roughly a tenth of its
    height, so the default threshold must stay well above 0.1.  Returns
    peaks sorted by center; raises NoPeaks when nothing qualifies.
    """
    x, y = result.x, result.mean
    dx = np.diff(x)
    if not np.allclose(dx, dx[0], rtol=1e-9):
        raise ValueError("spectrum analysis expects a uniform grid")
    idx, props = scipy.signal.find_peaks(
        y, prominence=prominence_frac * float(np.ptp(y)))
    if idx.size == 0:
        raise NoPeaks("no spectral peaks above the prominence threshold")
    widths = scipy.signal.peak_widths(y, idx, rel_height=0.5)[0]
    peaks = []
    for k, i in enumerate(idx):
        denom = y[i - 1] - 2.0 * y[i] + y[i + 1]
        shift = 0.5 * (y[i - 1] - y[i + 1]) / denom if denom != 0.0 else 0.0
        center = x[i] + shift * dx[0]
        height = y[i] - 0.25 * (y[i - 1] - y[i + 1]) * shift
        peaks.append(Peak(center=float(center), height=float(height),
                          fwhm=float(widths[k] * dx[0]),
                          prominence=float(props["prominences"][k])))
    return sorted(peaks, key=lambda p: p.center)


# ---------------------------------------------------------------------------
# interferometer scans

def fringe_chirp_scan(species: AtomSpecies, kin: KinematicState,
                      ens_spec: Optional[EnsembleSpec],
                      chirp_rates: SequenceType[float], *, T: float,
                      tau_pi: float,
                      rabi: float | ChannelSet | None = None,
                      channel: int = +1, freq_reference: str = "static",
                      n_max: int = 8, substeps: int | None = None,
                      pulse_model: str = "physical",
                      chunk_size: int = DEFAULT_CHUNK_SIZE,
                      overflow_threshold: float = DEFAULT_OVERFLOW_THRESHOLD
                      ) -> ScanResult:
    """Interferometer output vs modulation chirp rate at fixed T.

    The fringe phase is (k_eff*g - chirp_rate) times an effective T^2, so
    the scan crosses zero phase where the chirp cancels the gravity-induced
    Doppler drift.
    """
    if substeps is None:
        substeps = DEFAULT_INTERFEROMETER_SUBSTEPS
    chirp_rates = np.asarray(chirp_rates, dtype=float)
    mean = np.empty(chirp_rates.size)
    stderr = np.empty(chirp_rates.size)
    for i, alpha in enumerate(chirp_rates):
        seq = make_mzi_sequence(species, kin, T=T, tau_pi=tau_pi, rabi=rabi,
                                chirp_rate=alpha, channel=channel,
                                freq_reference=freq_reference,
                                substeps=substeps)
        mean[i], stderr[i] = _signal(seq, species, kin, ens_spec, n_max,
                                     pulse_model, chunk_size,
                                     overflow_threshold)
    meta = {"experiment": "fringe", "T": T, "tau_pi": tau_pi,
            "v0": kin.v0, "g": kin.g, "channel": channel,
            "freq_reference": freq_reference, "n_max": n_max,
            "substeps": substeps}
    return ScanResult(chirp_rates, mean, stderr, meta)


@dataclass
class PhaseScan:
    """Interferometer phase vs T extracted from four readout quadratures."""

    T: np.ndarray
    phase: np.ndarray              # unwrapped (rad)
    quadratures: np.ndarray        # (4, len(T)) raw populations
    readout_phases: tuple = READOUT_PHASES

    def contrast(self) -> np.ndarray:
        """Fringe amplitude per T from the two quadrature differences."""
        dc = self.quadratures[0] - self.quadratures[2]
        ds = self.quadratures[3] - self.quadratures[1]
        return 0.5 * np.hypot(dc, ds)


@dataclass(frozen=True)
class QuadraticFit:
    beta0: float
    beta1: float
    beta2: float
    residual_rms: float


def fit_quadratic(x: np.ndarray, y: np.ndarray) -> QuadraticFit:
    """Least-squares y = b2 x^2 + b1 x + b0 on a conditioned basis."""
    if len(x) < 3:
        raise SingularFit("quadratic fit needs at least 3 points")
    poly = np.polynomial.Polynomial.fit(x, y, 2)
    coef = np.zeros(3)
    conv = poly.convert().coef          # convert() trims trailing zeros
    coef[:conv.size] = conv
    b0, b1, b2 = coef
    resid = y - poly(x)
    return QuadraticFit(beta0=float(b0), beta1=float(b1), beta2=float(b2),
                        residual_rms=float(np.sqrt(np.mean(resid**2))))


def phase_vs_T(species: AtomSpecies, kin: KinematicState,
               T_values: SequenceType[float], *, tau_pi: float,
               rabi: float | ChannelSet | None = None,
               chirp_rate: float = 0.0,
               channel: int = +1, freq_reference: str = "static",
               n_max: int = 8, substeps: int | None = None,
               pulse_model: str = "physical",
               overflow_threshold: float = DEFAULT_OVERFLOW_THRESHOLD
               ) -> PhaseScan:
    """Single-atom interferometer phase vs pulse spacing T.

    For each T the sequence runs four times with readout phases 0, pi/2,
    pi, 3pi/2 on the final splitter; atan2 of the quadrature differences
    gives the fringe phase, unwrapped along the T grid.  The grid must be
    fine enough that the phase steps by less than pi between points.
    """
    T_values = np.asarray(T_values, dtype=float)
    quads = np.empty((4, T_values.size))
    for j, T in enumerate(T_values):
        for k, phi_r in enumerate(READOUT_PHASES):
            seq = make_mzi_sequence(species, kin, T=T, tau_pi=tau_pi,
                                    rabi=rabi, chirp_rate=chirp_rate,
                                    readout_phase=phi_r, channel=channel,
                                    freq_reference=freq_reference,
                                    substeps=substeps)
            state = LadderState.ground(n_max, t=seq.t0)
            out = evolve_sequence(state, species, kin, seq, pulse_model,
                                  overflow_threshold)
            quads[k, j] = detect_population_f3(out)
    # signal model S = a + b*cos(Phi + phi_r):
    #   S(0) - S(pi) = 2b cos(Phi),  S(3pi/2) - S(pi/2) = 2b sin(Phi)
    raw = np.arctan2(quads[3] - quads[1], quads[0] - quads[2])
    return PhaseScan(T=T_values, phase=np.unwrap(raw), quadratures=quads)


# ---------------------------------------------------------------------------
# momentum-transfer beat scans

def lmt_t0_scan(species: AtomSpecies, kin: KinematicState,
                ens_spec: Optional[EnsembleSpec],
                t_sep_values: SequenceType[float], *, T: float,
                tau_pi: float, lmt_order: int = 1,
                rabi: float | ChannelSet | None = None,
                chirp_rate: float = 0.0,
                readout_phase: float = 0.0, channel: int = +1,
                freq_reference: str = "static",
                burst_spacing: Optional[float] = None,
                pulse_model: str = "physical", n_max: Optional[int] = None,
                substeps: int | None = None,
                chunk_size: int = DEFAULT_CHUNK_SIZE,
                overflow_threshold: float = DEFAULT_OVERFLOW_THRESHOLD,
                freq_overrides: Optional[dict] = None) -> ScanResult:
    """Interferometer output vs expand-to-fold separation t_sep.

    Imperfect transfer pulses populate both the momentum-augmented and the
    bare interferometer loops; their outputs beat against each other as
    t_sep grows, at k_eff*g*T between unequal loops and 2*k_eff*g*T between
    the augmented loop pair.
    """
    if n_max is None:
        n_max = ladder_size_for(lmt_order)
    if substeps is None:
        substeps = DEFAULT_INTERFEROMETER_SUBSTEPS
    t_sep_values = np.asarray(t_sep_values, dtype=float)
    mean = np.empty(t_sep_values.size)
    stderr = np.empty(t_sep_values.size)
    for i, t_sep in enumerate(t_sep_values):
        seq = make_lmt_sequence(species, kin, T=T, tau_pi=tau_pi,
                                lmt_order=lmt_order, t_sep=t_sep,
                                burst_spacing=burst_spacing, rabi=rabi,
                                chirp_rate=chirp_rate,
                                readout_phase=readout_phase, channel=channel,
                                freq_reference=freq_reference,
                                substeps=substeps,
                                freq_overrides=freq_overrides)
        mean[i], stderr[i] = _signal(seq, species, kin, ens_spec, n_max,
                                     pulse_model, chunk_size,
                                     overflow_threshold)
    meta = {"experiment": "lmt", "T": T, "tau_pi": tau_pi,
            "lmt_order": lmt_order, "v0": kin.v0, "g": kin.g,
            "channel": channel, "freq_reference": freq_reference,
            "pulse_model": pulse_model, "n_max": n_max, "substeps": substeps}
    return ScanResult(t_sep_values, mean, stderr, meta)


# ---------------------------------------------------------------------------
# harmonic fits

@dataclass
class HarmonicFit:
    """y ~ offset + sum_k amplitudes[k] * cos(k*omega1*x + phases[k])."""

    omega1: float
    offset: float
    amplitudes: np.ndarray
    phases: np.ndarray
    residual_rms: float
    ptp: float
    coeffs: np.ndarray                      # [off, a1, b1, a2, b2, ...]
    cov: Optional[np.ndarray] = None        # coefficient covariance

    def model(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.full(x.shape, self.offset)
        for k, (c, p) in enumerate(zip(self.amplitudes, self.phases), 1):
            y += c * np.cos(k * self.omega1 * x + p)
        return y

    def amplitude_stderr(self, k: int) -> Optional[float]:
        """Propagated standard error of amplitudes[k-1] (1-based k)."""
        if self.cov is None:
            return None
        a = self.coeffs[2 * k - 1]
        b = self.coeffs[2 * k]
        c = float(np.hypot(a, b))
        if c == 0.0:
            return float(np.sqrt(self.cov[2 * k - 1, 2 * k - 1]))
        jac = np.zeros(len(self.coeffs))
        jac[2 * k - 1] = a / c
        jac[2 * k] = b / c
        return float(np.sqrt(jac @ self.cov @ jac))


def _design_matrix(x: np.ndarray, omega1: float, n_harmonics: int) -> np.ndarray:
    cols = [np.ones_like(x)]
    for k in range(1, n_harmonics + 1):
        cols.append(np.cos(k * omega1 * x))
        cols.append(np.sin(k * omega1 * x))
    return np.column_stack(cols)


def fit_harmonics(x: np.ndarray, y: np.ndarray, omega1: float,
                  n_harmonics: int = 2,
                  y_err: Optional[np.ndarray] = None) -> HarmonicFit:
    """Linear least squares at a fixed fundamental frequency (rad per x).

    y_err, when given, propagates per-point standard errors into the
    coefficient covariance (the fit itself stays unweighted).  Without
    y_err the covariance is scaled from the residual variance, so model
    mismatch left in the residuals counts as noise.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ncol = 1 + 2 * n_harmonics
    if x.size < ncol:
        raise SingularFit(f"need at least {ncol} points for {n_harmonics} "
                          "harmonics")
    a = _design_matrix(x, omega1, n_harmonics)
    coeffs, _, rank, _ = np.linalg.lstsq(a, y, rcond=None)
    if rank < ncol:
        raise SingularFit(
            f"design matrix rank {rank} < {ncol}; the grid does not "
            "constrain the harmonics (span too short or frequency zero)")
    resid = y - a @ coeffs
    amplitudes = np.hypot(coeffs[1::2], coeffs[2::2])
    phases = np.arctan2(-coeffs[2::2], coeffs[1::2])
    cov = None
    if y_err is not None:
        y_err = np.asarray(y_err, dtype=float)
        gram_inv = np.linalg.pinv(a.T @ a)
        aw = a * (y_err**2)[:, None]
        cov = gram_inv @ (a.T @ aw) @ gram_inv
    elif x.size > ncol:
        s2 = float(resid @ resid) / (x.size - ncol)
        cov = np.linalg.pinv(a.T @ a) * s2
    return HarmonicFit(omega1=float(omega1), offset=float(coeffs[0]),
                       amplitudes=amplitudes, phases=phases,
                       residual_rms=float(np.sqrt(np.mean(resid**2))),
                       ptp=float(np.ptp(y)), coeffs=coeffs, cov=cov)


def fit_harmonics_free(x: np.ndarray, y: np.ndarray, omega1_guess: float,
                       n_harmonics: int = 2, window: float = 0.1,
                       n_scan: int = 601,
                       y_err: Optional[np.ndarray] = None) -> HarmonicFit:
    """Harmonic fit with the fundamental frequency free within a window.

    Dense residual scan over omega1_guess*(1 +- window) followed by a
    bounded scalar refinement around the best grid point; deterministic.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if omega1_guess <= 0.0:
        raise SingularFit("frequency guess must be positive")

    def cost(w: float) -> float:
        try:
            return fit_harmonics(x, y, w, n_harmonics).residual_rms
        except SingularFit:
            return np.inf
    grid = omega1_guess * np.linspace(1.0 - window, 1.0 + window, n_scan)
    costs = np.array([cost(w) for w in grid])
    best = int(np.argmin(costs))
    if not np.isfinite(costs[best]):
        raise SingularFit("no frequency in the window admits a fit")
    lo = grid[max(best - 1, 0)]
    hi = grid[min(best + 1, n_scan - 1)]
    opt = scipy.optimize.minimize_scalar(cost, bounds=(lo, hi),
                                         method="bounded",
                                         options={"xatol": omega1_guess * 1e-9})
    w_best = float(opt.x) if opt.fun <= costs[best] else float(grid[best])
    return fit_harmonics(x, y, w_best, n_harmonics, y_err=y_err)


def fit_single_cosine(x: np.ndarray, y: np.ndarray, omega1: float,
                      y_err: Optional[np.ndarray] = None) -> HarmonicFit:
    return fit_harmonics(x, y, omega1, n_harmonics=1, y_err=y_err)


def fit_dual_cosine(x: np.ndarray, y: np.ndarray, omega1: float,
                    free: bool = False, window: float = 0.1,
                    y_err: Optional[np.ndarray] = None) -> HarmonicFit:
    """Two-harmonic fit, the second locked at twice the fundamental."""
    if free:
        return fit_harmonics_free(x, y, omega1, n_harmonics=2, window=window,
                                  y_err=y_err)
    return fit_harmonics(x, y, omega1, n_harmonics=2, y_err=y_err)
