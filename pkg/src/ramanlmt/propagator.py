"""Momentum-ladder propagation through Raman pulses and free-evolution gaps.

State space: two hyperfine levels x momentum rungs n in [-N, N], where rung
n means physical momentum m*v(t) + n*hbar*k_eff.  In the frame rotating with
the accumulated modulation phase the Hamiltonian is

    H/hbar = sum_n [ d(n)            |2,n><2,n|
                   + (d(n) - dw(t))  |3,n><3,n| ]
           + sum_{s,n} Omega_s/2 * e^{i phi_s} |3,n+s><2,n|  + h.c.

with d(n) = n*k_eff*v(t) + n^2*omega_rec and dw(t) the modulation offset
from the hyperfine splitting.  Pulses are integrated as midpoint-frozen
exponentials (exact for each slice, unitary to roundoff); gaps are diagonal
and integrate in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .constants import AtomSpecies, ChannelSet, KinematicState, recoil_frequency
from .errors import LadderOverflow

DEFAULT_SUBSTEPS = 4
DEFAULT_OVERFLOW_THRESHOLD = 1e-6


@dataclass(frozen=True)
class PulseSpec:
    """One Raman pulse.

    duration     : s
    omega_offset : modulation offset from omega_hfs at pulse start (rad/s)
    chirp_rate   : d(omega_mod)/dt during the pulse (rad/s^2)
    channels     : beam pairs present in H while the pulse is on
    substeps     : midpoint-frozen integration slices
    addressed    : channel (+1/-1/0) the frequency is tuned to; bookkeeping
                   for exports and the ideal-kick model, the physical engine
                   applies every enabled channel regardless
    label        : short tag for exports ("A0", "lmt1", ...)
    """

    duration: float
    omega_offset: float
    chirp_rate: float = 0.0
    channels: ChannelSet = field(default_factory=lambda: ChannelSet.single(+1, 0.0, 0.0))
    substeps: int = DEFAULT_SUBSTEPS
    addressed: int = +1
    label: str = ""

    def __post_init__(self):
        if self.duration <= 0.0:
            raise ValueError("pulse duration must be > 0")
        if self.substeps < 1:
            raise ValueError("substeps must be >= 1")
        if self.addressed not in (+1, -1, 0):
            raise ValueError("addressed channel must be +1, -1 or 0")

    def offset_at(self, dt: float) -> float:
        """Modulation offset dt seconds after pulse start (rad/s)."""
        return self.omega_offset + self.chirp_rate * dt

    def offset_integral(self, dt0: float, dt1: float) -> float:
        """Integral of the offset over [dt0, dt1] after pulse start (rad)."""
        return (self.omega_offset * (dt1 - dt0)
                + 0.5 * self.chirp_rate * (dt1**2 - dt0**2))


@dataclass(frozen=True)
class GapSpec:
    """Coupling-free evolution between pulses."""

    duration: float
    label: str = ""

    def __post_init__(self):
        if self.duration < 0.0:
            raise ValueError("gap duration must be >= 0")


class LadderState:
    """Amplitudes over (hyperfine level, momentum rung) plus a clock.

    amplitudes        : complex (2, 2N+1); row 0 is the lower level (F=2),
                        row 1 the upper (F=3); column j is rung n = j - N
    t                 : s, absolute time of the state
    phase_accumulator : rad, integral of the modulation offset dw over the
                        evolution so far (the drive phase minus omega_hfs*t)
    """

    __slots__ = ("amplitudes", "t", "phase_accumulator")

    def __init__(self, amplitudes: np.ndarray, t: float = 0.0,
                 phase_accumulator: float = 0.0):
        amplitudes = np.asarray(amplitudes, dtype=complex)
        if amplitudes.ndim != 2 or amplitudes.shape[0] != 2 \
                or amplitudes.shape[1] % 2 != 1:
            raise ValueError("amplitudes must have shape (2, 2N+1)")
        self.amplitudes = amplitudes
        self.t = float(t)
        self.phase_accumulator = float(phase_accumulator)

    @classmethod
    def ground(cls, n_max: int, t: float = 0.0) -> "LadderState":
        """Lower hyperfine level, rung n = 0."""
        if n_max < 1:
            raise ValueError("n_max must be >= 1")
        amps = np.zeros((2, 2 * n_max + 1), dtype=complex)
        amps[0, n_max] = 1.0
        return cls(amps, t=t)

    @property
    def n_max(self) -> int:
        return (self.amplitudes.shape[1] - 1) // 2

    def copy(self) -> "LadderState":
        return LadderState(self.amplitudes.copy(), self.t,
                           self.phase_accumulator)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def population(self, level: int, n: int) -> float:
        """|amplitude|^2 of (level in {2, 3}, rung n)."""
        if level not in (2, 3):
            raise ValueError("level must be 2 or 3")
        if abs(n) > self.n_max:
            raise ValueError(f"rung {n} outside ladder |n| <= {self.n_max}")
        return float(abs(self.amplitudes[level - 2, n + self.n_max]) ** 2)

    def population_f3(self) -> float:
        return float(np.sum(np.abs(self.amplitudes[1]) ** 2))

    def validate(self, tol: float = 1e-9) -> None:
        if abs(self.norm() - 1.0) > tol:
            raise ValueError(f"state norm {self.norm()!r} deviates from 1")


# ---------------------------------------------------------------------------
# batched internals: amps has shape (nv, 2, 2N+1), vs the per-sample launch
# velocities (m/s).  The single-atom API wraps these with nv = 1.

def _kinetic_diag(species: AtomSpecies, v_now: np.ndarray, n_max: int) -> np.ndarray:
    """d(n) = n*k_eff*v + n^2*omega_rec for each sample; (nv, 2N+1)."""
    n = np.arange(-n_max, n_max + 1, dtype=float)
    wrec = recoil_frequency(species)
    return species.k_eff * v_now[:, None] * n[None, :] + wrec * n[None, :] ** 2


def _coupling_matrix(channels: ChannelSet, n_max: int,
                     strip_phase: float | None = None) -> np.ndarray:
    """Off-diagonal block of H, shared by all samples; (dim, dim).

    With strip_phase set, that common drive phase is omitted and the matrix
    is real; callers then conjugate by the diagonal gauge
    G = diag(1 on F2, e^{i*phase} on F3), since H(phi) = G H(0) G^dagger.
    """
    m = 2 * n_max + 1
    dim = 2 * m
    real = strip_phase is not None
    h = np.zeros((dim, dim), dtype=float if real else complex)
    for s, ch in channels.enabled_channels():
        half = 0.5 * ch.rabi if real \
            else 0.5 * ch.rabi * np.exp(1j * ch.phase)
        if s == 0:
            lo = np.arange(m)
        elif s == +1:
            lo = np.arange(m - 1)          # n = -N .. N-1 couple up to n+1
        else:
            lo = np.arange(1, m)           # n = -N+1 .. N couple down to n-1
        up = lo + s
        h[m + up, lo] = half               # <3, n+s| H |2, n>
        h[lo, m + up] = np.conj(half)
    return h


def _common_phase(channels: ChannelSet) -> float | None:
    """The shared drive phase when all enabled channels agree, else None."""
    phases = [ch.phase for _, ch in channels.enabled_channels()]
    if all(p == phases[0] for p in phases):
        return phases[0]
    return None


def build_hamiltonian(species: AtomSpecies, kin: KinematicState,
                      pulse: PulseSpec, t: float, n_max: int,
                      pulse_start: float) -> np.ndarray:
    """Instantaneous rotating-frame H/hbar at absolute time t; (dim, dim).

    pulse_start anchors the pulse's frequency law omega_offset +
    chirp_rate*(t - pulse_start).
    """
    m = 2 * n_max + 1
    v_now = np.array([kin.velocity(t)])
    diag = _kinetic_diag(species, v_now, n_max)[0]
    h = _coupling_matrix(pulse.channels, n_max)
    dw = pulse.offset_at(t - pulse_start)
    idx = np.arange(m)
    h[idx, idx] = diag
    h[m + idx, m + idx] = diag - dw
    if not np.allclose(h, h.conj().T):
        raise AssertionError("Hamiltonian assembly is not Hermitian")
    return h


def _step_pulse(amps: np.ndarray, species: AtomSpecies, vs: np.ndarray,
                g: float, pulse: PulseSpec, t_start: float) -> np.ndarray:
    """Propagate all samples through one pulse; returns new amps.

    When every enabled channel shares one drive phase the Hamiltonian is
    real in a diagonal gauge, and the real symmetric eigensolver is about
    twice as fast as the complex Hermitian one.
    """
    nv, _, m = amps.shape
    n_max = (m - 1) // 2
    dim = 2 * m
    phase = _common_phase(pulse.channels)
    coupling = _coupling_matrix(pulse.channels, n_max, strip_phase=phase)
    dt = pulse.duration / pulse.substeps
    psi = amps.reshape(nv, dim).copy()
    if phase is not None and phase != 0.0:
        psi[:, m:] *= np.exp(-1j * phase)
    idx = np.arange(m)
    h = np.empty((nv, dim, dim), dtype=coupling.dtype)
    for k in range(pulse.substeps):
        t_mid = t_start + (k + 0.5) * dt
        v_now = vs + g * t_mid
        diag = _kinetic_diag(species, v_now, n_max)
        dw = pulse.offset_at(t_mid - t_start)
        h[:] = coupling
        h[:, idx, idx] = diag
        h[:, m + idx, m + idx] = diag - dw
        w, vmat = np.linalg.eigh(h)
        vc = vmat.astype(complex) if phase is not None else vmat
        y = np.einsum("bji,bj->bi", vc.conj(), psi)
        y *= np.exp(-1j * w * dt)
        psi = np.einsum("bij,bj->bi", vc, y)
    if phase is not None and phase != 0.0:
        psi[:, m:] *= np.exp(1j * phase)
    return psi.reshape(nv, 2, m)


def _free_phases(species: AtomSpecies, vs: np.ndarray, g: float, t0: float,
                 t1: float, n_max: int) -> np.ndarray:
    """Closed-form integral of d(n) over [t0, t1] per sample; (nv, 2N+1)."""
    n = np.arange(-n_max, n_max + 1, dtype=float)
    tau = t1 - t0
    drift = vs * tau + 0.5 * g * (t1**2 - t0**2)     # integral of v(t) dt
    wrec = recoil_frequency(species)
    return species.k_eff * drift[:, None] * n[None, :] + wrec * tau * n[None, :] ** 2


def _free_evolve(amps: np.ndarray, species: AtomSpecies, vs: np.ndarray,
                 g: float, t0: float, t1: float, dw_integral: float) -> np.ndarray:
    """Diagonal evolution over [t0, t1]; dw_integral = int dw dt (rad)."""
    n_max = (amps.shape[2] - 1) // 2
    theta = _free_phases(species, vs, g, t0, t1, n_max)
    out = amps.copy()
    out[:, 0, :] *= np.exp(-1j * theta)
    out[:, 1, :] *= np.exp(-1j * (theta - dw_integral))
    return out


def _ideal_kick(amps: np.ndarray, s: int, area: float, phase: float) -> np.ndarray:
    """Zero-detuning rotation by `area` on every rung pair of channel s."""
    out = amps.copy()
    if s == 0:
        a2 = amps[:, 0, :]
        a3 = amps[:, 1, :]
        sl2 = np.s_[:]
        sl3 = np.s_[:]
    elif s == +1:
        a2 = amps[:, 0, :-1]
        a3 = amps[:, 1, 1:]
        sl2 = np.s_[:-1]
        sl3 = np.s_[1:]
    else:
        a2 = amps[:, 0, 1:]
        a3 = amps[:, 1, :-1]
        sl2 = np.s_[1:]
        sl3 = np.s_[:-1]
    c = math.cos(0.5 * area)
    sn = math.sin(0.5 * area)
    e = np.exp(1j * phase)
    out[:, 0, sl2] = c * a2 - 1j * np.conj(e) * sn * a3
    out[:, 1, sl3] = -1j * e * sn * a2 + c * a3
    return out


def _edge_population(amps: np.ndarray) -> np.ndarray:
    """Probability on the outermost rungs |n| = N per sample; (nv,)."""
    return (np.abs(amps[:, :, 0]) ** 2 + np.abs(amps[:, :, -1]) ** 2).sum(axis=1)


# ---------------------------------------------------------------------------
# single-atom API

def evolve_pulse(state: LadderState, species: AtomSpecies, kin: KinematicState,
                 pulse: PulseSpec,
                 overflow_threshold: float = DEFAULT_OVERFLOW_THRESHOLD) -> LadderState:
    """Propagate through one pulse starting at state.t; returns a new state."""
    vs = np.array([kin.v0])
    amps = _step_pulse(state.amplitudes[None, :, :], species, vs, kin.g,
                       pulse, state.t)
    edge = float(_edge_population(amps)[0])
    if edge > overflow_threshold:
        raise LadderOverflow(
            f"edge-rung population {edge:.3e} exceeds {overflow_threshold:.1e}; "
            f"widen the ladder", velocity=kin.v0)
    return LadderState(amps[0], t=state.t + pulse.duration,
                       phase_accumulator=state.phase_accumulator
                       + pulse.offset_integral(0.0, pulse.duration))


def evolve_pulse_ideal(state: LadderState, species: AtomSpecies,
                       kin: KinematicState, pulse: PulseSpec,
                       area: float) -> LadderState:
    """Analytic cross-check model: delta kick of the nominal area.

    Free evolution for half the duration, an exact zero-detuning rotation on
    the addressed channel only, free evolution for the other half.  Not used
    by the physical engine; exists so interferometer phases can be compared
    against closed-form expectations.
    """
    vs = np.array([kin.v0])
    half = 0.5 * pulse.duration
    amps = _free_evolve(state.amplitudes[None, :, :], species, vs, kin.g,
                        state.t, state.t + half,
                        pulse.offset_integral(0.0, half))
    ch = pulse.channels.get(pulse.addressed)
    amps = _ideal_kick(amps, pulse.addressed, area, ch.phase)
    amps = _free_evolve(amps, species, vs, kin.g, state.t + half,
                        state.t + pulse.duration,
                        pulse.offset_integral(half, pulse.duration))
    return LadderState(amps[0], t=state.t + pulse.duration,
                       phase_accumulator=state.phase_accumulator
                       + pulse.offset_integral(0.0, pulse.duration))


def evolve_free(state: LadderState, species: AtomSpecies, kin: KinematicState,
                gap: GapSpec, schedule) -> LadderState:
    """Propagate through a coupling-free gap; schedule supplies int dw dt."""
    t1 = state.t + gap.duration
    dw_int = schedule.integrate(state.t, t1)
    amps = _free_evolve(state.amplitudes[None, :, :], species,
                        np.array([kin.v0]), kin.g, state.t, t1, dw_int)
    return LadderState(amps[0], t=t1,
                       phase_accumulator=state.phase_accumulator + dw_int)


def detect_population_f3(state: LadderState) -> float:
    """Detected signal: total population of the upper hyperfine level."""
    return state.population_f3()
