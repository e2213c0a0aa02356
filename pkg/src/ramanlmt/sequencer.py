"""Pulse-sequence construction and propagation.

A Sequence is an ordered run of PulseSpec / GapSpec elements plus a
FrequencySchedule that records the modulation-offset law dw(t) for every
instant, gaps included.  The rotating frame follows the accumulated
modulation phase, so phase continuity across frequency hops is automatic;
a hop is just a slope/value change in the schedule.

Interferometer geometry (center-to-center times, first splitter at c1):

    splitter (pi/2)   c1
    mirror   (pi)     c2 = c1 + T
    recombiner (pi/2) c3 = c2 + T

Order-q momentum-transfer sequences add, per half, q "expand" pi pulses
followed by q "fold" pi pulses, nested symmetrically around the half
midpoints c1 + T/2 and c2 + T/2.  The innermost expand/fold pair is
separated center-to-center by t_sep; successive pairs sit burst_spacing
further out on each side.  Each expand pulse walks the two arms one rung
apart in opposite directions (one beam pair per arm transition, both
driven by the same retroreflected channel); folds reverse them so the
arms re-interleave before the mirror.

Frequency assignment: every pulse addressing channel s is driven at the
symmetric-compromise offset s*(k_eff*v_ref + omega_rec) between the two
arm resonances, where v_ref is the atom velocity at the first splitter
center (freq_reference="static", the default) or at the pulse's own
center (freq_reference="per_pulse").  Channel hops switch the synthesizer
at the midpoint of the gap between unequally-driven pulses.
"""

from __future__ import annotations

import bisect
import warnings
from dataclasses import dataclass, field

import numpy as np

from .constants import (AtomSpecies, ChannelSet, KinematicState,
                        recoil_frequency)
from .errors import ChannelOverlapWarning, InvalidTiming, LadderOverflow
from .propagator import (DEFAULT_OVERFLOW_THRESHOLD, DEFAULT_SUBSTEPS,
                         GapSpec, LadderState, PulseSpec, _edge_population,
                         _free_evolve, _ideal_kick, _step_pulse)

# gaps shorter than this are treated as exactly zero (timing roundoff)
TIMING_EPS = 1e-12

# Interferometer pulses need a finer time grid than a lone probe pulse: the
# gravity-induced Doppler drift inside each pulse enters the phase readout
# coherently across the sequence, and 32 substeps keeps the discretization
# error of every shipped sequence below the ladder truncation floor.
DEFAULT_INTERFEROMETER_SUBSTEPS = 32


@dataclass(frozen=True)
class ScheduleSegment:
    """dw(t) = offset + slope*(t - t_start) for t in [t_start, next start)."""

    t_start: float
    offset: float
    slope: float = 0.0

    def value_at(self, t: float) -> float:
        return self.offset + self.slope * (t - self.t_start)

    def integral(self, t0: float, t1: float) -> float:
        a = self.t_start
        return (self.offset * (t1 - t0)
                + 0.5 * self.slope * ((t1 - a) ** 2 - (t0 - a) ** 2))


class FrequencySchedule:
    """Piecewise-linear modulation-offset law dw(t), discontinuities allowed."""

    def __init__(self, segments):
        segments = tuple(segments)
        if not segments:
            raise ValueError("schedule needs at least one segment")
        starts = [s.t_start for s in segments]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError("segment start times must increase strictly")
        self.segments = segments
        self._starts = starts

    @classmethod
    def constant(cls, offset: float, t_start: float = 0.0) -> "FrequencySchedule":
        return cls([ScheduleSegment(t_start, offset)])

    def _index(self, t: float) -> int:
        # times before the first segment fall back to the first law
        return max(0, bisect.bisect_right(self._starts, t) - 1)

    def offset_at(self, t: float) -> float:
        return self.segments[self._index(t)].value_at(t)

    def integrate(self, t0: float, t1: float) -> float:
        """Integral of dw(t) over [t0, t1] (rad); t1 >= t0."""
        if t1 < t0:
            raise ValueError("integration bounds must be ordered")
        i0 = self._index(t0)
        i1 = self._index(t1)
        if i0 == i1:
            return self.segments[i0].integral(t0, t1)
        total = self.segments[i0].integral(t0, self._starts[i0 + 1])
        for i in range(i0 + 1, i1):
            total += self.segments[i].integral(self._starts[i], self._starts[i + 1])
        total += self.segments[i1].integral(self._starts[i1], t1)
        return total


@dataclass(frozen=True)
class Sequence:
    """Pulses and gaps laid end to end starting at t0."""

    elements: tuple
    t0: float
    schedule: FrequencySchedule
    meta: dict = field(default_factory=dict)

    @property
    def duration(self) -> float:
        return sum(el.duration for el in self.elements)

    @property
    def t_end(self) -> float:
        return self.t0 + self.duration

    def pulses(self):
        """Yield (start_time, PulseSpec) for each pulse in order."""
        t = self.t0
        for el in self.elements:
            if isinstance(el, PulseSpec):
                yield t, el
            t += el.duration

    def n_pulses(self) -> int:
        return sum(1 for _ in self.pulses())

    def pulse_table(self):
        """One row per pulse: timing, channel, frequency law, drive strength."""
        rows = []
        for i, (t_start, p) in enumerate(self.pulses()):
            ch = p.channels.get(p.addressed)
            rows.append({
                "index": i,
                "label": p.label,
                "t_start": t_start,
                "t_center": t_start + 0.5 * p.duration,
                "duration": p.duration,
                "channel": p.addressed,
                "omega_offset": p.omega_offset,
                "chirp_rate": p.chirp_rate,
                "rabi": ch.rabi,
                "phase": ch.phase,
            })
        return rows

    def validate(self, rel_tol: float = 1e-9) -> None:
        """Check internal consistency of timing and frequency bookkeeping."""
        if not self.elements:
            raise InvalidTiming("sequence has no elements")
        if not isinstance(self.elements[0], PulseSpec) \
                or not isinstance(self.elements[-1], PulseSpec):
            raise InvalidTiming("sequence must start and end with a pulse")
        prev_pulse = None
        for el in self.elements:
            if el.duration <= 0.0:
                kind = "pulse" if isinstance(el, PulseSpec) else "gap"
                raise InvalidTiming(
                    f"{kind} with non-positive duration {el.duration!r}")
            if isinstance(el, PulseSpec):
                if prev_pulse is not None:
                    raise InvalidTiming("two pulses without an intervening gap")
                prev_pulse = el
            else:
                prev_pulse = None
        scale = max(1.0, max(abs(p.omega_offset) for _, p in self.pulses()))
        for t_start, p in self.pulses():
            for frac in (0.0, 0.5, 1.0):
                t = t_start + frac * p.duration
                want = p.offset_at(t - t_start)
                got = self.schedule.offset_at(min(t, t_start + p.duration * (1 - 1e-12)))
                if abs(got - want) > rel_tol * scale:
                    raise InvalidTiming(
                        f"pulse {p.label!r} law disagrees with schedule at "
                        f"t={t!r}: {got!r} vs {want!r}")


@dataclass(frozen=True)
class Diagnostic:
    """One sequence-validation finding.

    kind is "InvalidTiming" (internal timing bookkeeping broken) or
    "ChannelOverlap" (a pulse's beam-pair Doppler splitting does not clear
    the requested spectral width).
    """

    kind: str
    message: str


def validate_sequence(sequence: "Sequence", spectral_width: float,
                      species: AtomSpecies | None = None,
                      kin: KinematicState | None = None) -> list:
    """Non-raising sequence check; returns a list of Diagnostic findings.

    Empty iff the timing bookkeeping is consistent and every pulse keeps
    the beam-pair splitting 2*k_eff*v(t_center) above spectral_width
    (rad/s), the condition for addressing one retroreflected pair by
    frequency.  species and kin default to the values recorded by the
    sequence builder.
    """
    species = species if species is not None else sequence.meta.get("species")
    kin = kin if kin is not None else sequence.meta.get("kin")
    if species is None or kin is None:
        raise ValueError("sequence meta lacks species/kinematics; pass them "
                         "explicitly")
    diags = []
    try:
        sequence.validate()
    except InvalidTiming as exc:
        diags.append(Diagnostic("InvalidTiming", str(exc)))
        return diags
    for t_start, p in sequence.pulses():
        t_center = t_start + 0.5 * p.duration
        split = 2.0 * species.k_eff * abs(kin.velocity(t_center))
        if split <= spectral_width:
            diags.append(Diagnostic(
                "ChannelOverlap",
                f"pulse {p.label!r} at t={t_center!r}: Doppler splitting "
                f"{split:.3e} rad/s <= spectral width "
                f"{spectral_width:.3e} rad/s"))
    return diags


def _check_channel_resolution(species: AtomSpecies, v_ref: float,
                              rabi: float, duration: float) -> None:
    # frequency addressing of the counterpropagating pairs relies on the
    # Doppler splitting 2*k_eff*v exceeding the pulse linewidth
    width = float(np.hypot(rabi, 2.0 * np.pi / duration))
    if 2.0 * species.k_eff * abs(v_ref) <= width:
        warnings.warn(
            f"Doppler splitting 2*k_eff*v = {2*species.k_eff*abs(v_ref):.3e} rad/s "
            f"does not exceed the pulse linewidth {width:.3e} rad/s; "
            "beam-pair addressing by frequency is unreliable",
            ChannelOverlapWarning, stacklevel=3)


def _assemble(pulse_defs, t0, species, kin, meta):
    """Build elements + schedule from (center, duration, law_anchor, offset,
    slope, channel_sign, phase, rabi, label) pulse definitions."""
    pulse_defs = sorted(pulse_defs, key=lambda d: d["center"])
    elements = []
    prev_end = t0
    prev = None
    segments = []
    for d in pulse_defs:
        start = d["center"] - 0.5 * d["duration"]
        gap = start - prev_end
        if gap < -TIMING_EPS:
            raise InvalidTiming(
                f"pulse {d['label']!r} starting at {start!r} overlaps the "
                f"previous element ending at {prev_end!r}")
        # pulse's own law, anchored at its start for PulseSpec
        offset_at_start = d["offset"] + d["slope"] * (start - d["anchor"])
        r = d["rabi"]
        base = r if isinstance(r, ChannelSet) else ChannelSet.uniform(r)
        channels = base.with_common_phase(d["phase"])
        pulse = PulseSpec(duration=d["duration"], omega_offset=offset_at_start,
                          chirp_rate=d["slope"], channels=channels,
                          substeps=d.get("substeps", DEFAULT_SUBSTEPS),
                          addressed=d["sign"], label=d["label"])
        if prev is None:
            segments.append(ScheduleSegment(t0, offset_at_start
                                            - d["slope"] * (start - t0), d["slope"]))
        else:
            same_law = (abs(prev["slope"] - d["slope"]) <= 1e-9 * max(
                1.0, abs(d["slope"])) and abs(
                prev["offset"] + prev["slope"] * (d["anchor"] - prev["anchor"])
                - d["offset"]) <= 1e-6)
            if not same_law:
                hop = prev_end + 0.5 * gap      # switch midway through the gap
                segments.append(ScheduleSegment(
                    hop, d["offset"] + d["slope"] * (hop - d["anchor"]), d["slope"]))
        if gap > TIMING_EPS:
            elements.append(GapSpec(duration=gap))
        elements.append(pulse)
        prev_end = start + d["duration"]
        prev = d
    meta = dict(meta, species=species, kin=kin)
    seq = Sequence(tuple(elements), t0, FrequencySchedule(segments), meta)
    seq.validate()
    return seq


def make_single_pulse(species: AtomSpecies, kin: KinematicState, *,
                      duration: float, rabi: float | ChannelSet,
                      omega_offset: float,
                      chirp_rate: float = 0.0, t0: float = 0.0,
                      substeps: int | None = None,
                      addressed: int = +1) -> Sequence:
    """One pulse with every beam pair enabled (spectroscopy geometry).

    rabi is either a common two-photon Rabi rate (rad/s) for all three
    pairs or a ChannelSet with per-pair strengths; a pair at 0 drops out
    of the Hamiltonian.
    """
    if substeps is None:
        substeps = DEFAULT_SUBSTEPS
    d = {"center": t0 + 0.5 * duration, "duration": duration, "anchor": t0,
         "offset": omega_offset, "slope": chirp_rate, "sign": addressed,
         "phase": 0.0, "rabi": rabi, "label": "probe", "substeps": substeps}
    return _assemble([d], t0, species, kin,
                     {"kind": "single", "v_ref": kin.velocity(t0)})


def _compromise_offset(species: AtomSpecies, v: float, sign: int) -> float:
    """Drive offset splitting the two arm resonances of channel `sign`."""
    return sign * (species.k_eff * v + recoil_frequency(species))


def make_lmt_sequence(species: AtomSpecies, kin: KinematicState, *,
                      T: float, tau_pi: float, lmt_order: int = 1,
                      t_sep: float = 0.0, burst_spacing: float | None = None,
                      rabi: float | ChannelSet | None = None,
                      chirp_rate: float = 0.0,
                      readout_phase: float = 0.0, channel: int = +1,
                      freq_reference: str = "static", t0: float = 0.0,
                      substeps: int | None = None,
                      freq_overrides: dict | None = None) -> Sequence:
    """Symmetric interferometer with lmt_order momentum-transfer pairs per half.

    T             : splitter-to-mirror center spacing (s)
    tau_pi        : pi-pulse duration; splitters last tau_pi/2 (s)
    t_sep         : innermost expand-to-fold center spacing (s); required > 0
                    when lmt_order > 0
    burst_spacing : extra center spacing of successive pairs (default t_sep)
    rabi          : two-photon Rabi rate (rad/s), or a ChannelSet with
                    per-pair strengths; default pi/tau_pi on all pairs
    chirp_rate    : modulation sweep rate applied with the channel's sign,
                    d(dw)/dt = sign * chirp_rate (rad/s^2); chirp_rate equal
                    to k_eff*g keeps every pulse on resonance as the atoms
                    accelerate
    readout_phase : modulation phase jump applied at the final splitter (rad)
    channel       : beam pair driven by the splitters and mirror (+1 or -1)
    freq_reference: "static" references every pulse to the velocity at the
                    first splitter center; "per_pulse" retunes each pulse to
                    its own center velocity
    freq_overrides: {pulse_label: offset} replacing the computed offset (rad/s)

    lmt_order = 0 degenerates to the plain three-pulse interferometer.
    """
    if substeps is None:
        substeps = DEFAULT_INTERFEROMETER_SUBSTEPS
    if lmt_order < 0:
        raise InvalidTiming("lmt_order must be >= 0")
    if channel not in (+1, -1):
        raise InvalidTiming("splitter channel must be +1 or -1")
    if freq_reference not in ("static", "per_pulse"):
        raise ValueError("freq_reference must be 'static' or 'per_pulse'")
    if rabi is None:
        rabi = np.pi / tau_pi
    if lmt_order > 0 and t_sep <= 0.0:
        raise InvalidTiming("t_sep must be > 0 when lmt_order > 0")
    if burst_spacing is None:
        burst_spacing = t_sep
    if lmt_order > 0 and t_sep < tau_pi - TIMING_EPS:
        raise InvalidTiming("t_sep shorter than the pi-pulse duration")

    tau_half = 0.5 * tau_pi
    c1 = t0 + 0.5 * tau_half
    t_ref = c1
    v_ref = kin.velocity(t_ref)
    driven = rabi.get(channel).rabi if isinstance(rabi, ChannelSet) else rabi
    _check_channel_resolution(species, v_ref, driven, tau_pi)

    defs = []

    def add(center, duration, sign, label, phase=0.0):
        if freq_reference == "static":
            anchor, v_here = t_ref, v_ref
        else:
            anchor, v_here = center, kin.velocity(center)
        offset = _compromise_offset(species, v_here, sign)
        if freq_overrides and label in freq_overrides:
            offset = freq_overrides[label]
        defs.append({"center": center, "duration": duration, "anchor": anchor,
                     "offset": offset, "slope": sign * chirp_rate,
                     "sign": sign, "phase": phase, "rabi": rabi,
                     "label": label, "substeps": substeps})

    add(c1, tau_half, channel, "split")
    add(c1 + T, tau_pi, channel, "mirror")
    add(c1 + 2 * T, tau_half, channel, "recombine", phase=readout_phase)
    for half, h_mid in ((1, c1 + 0.5 * T), (2, c1 + 1.5 * T)):
        for j in range(1, lmt_order + 1):
            # pair j: expand/fold concentric around the half midpoint; the
            # channel alternates away from the splitter channel as the arms
            # walk outward, j = lmt_order is the innermost pair
            sign = channel * (-1 if j % 2 == 1 else +1)
            reach = 0.5 * t_sep + (lmt_order - j) * burst_spacing
            add(h_mid - reach, tau_pi, sign, f"expand{half}.{j}")
            add(h_mid + reach, tau_pi, sign, f"fold{half}.{j}")

    meta = {"kind": "lmt" if lmt_order else "mzi", "T": T, "t_sep": t_sep,
            "lmt_order": lmt_order, "tau_pi": tau_pi, "t_ref": t_ref,
            "v_ref": v_ref, "channel": channel, "chirp_rate": chirp_rate,
            "freq_reference": freq_reference, "readout_phase": readout_phase}
    return _assemble(defs, t0, species, kin, meta)


def make_mzi_sequence(species: AtomSpecies, kin: KinematicState, *,
                      T: float, tau_pi: float,
                      rabi: float | ChannelSet | None = None,
                      chirp_rate: float = 0.0, readout_phase: float = 0.0,
                      channel: int = +1, freq_reference: str = "static",
                      t0: float = 0.0,
                      substeps: int | None = None) -> Sequence:
    """Three-pulse pi/2 - pi - pi/2 interferometer (no momentum transfer)."""
    return make_lmt_sequence(species, kin, T=T, tau_pi=tau_pi, lmt_order=0,
                             rabi=rabi, chirp_rate=chirp_rate,
                             readout_phase=readout_phase, channel=channel,
                             freq_reference=freq_reference, t0=t0,
                             substeps=substeps)


def ladder_size_for(lmt_order: int) -> int:
    """Rung extent with buffer: arms reach |n| <= lmt_order + 1."""
    return 2 * lmt_order + 5


def propagate_amplitudes(amps: np.ndarray, species: AtomSpecies,
                         vs: np.ndarray, g: float, sequence: Sequence,
                         pulse_model: str = "physical",
                         overflow_threshold: float = DEFAULT_OVERFLOW_THRESHOLD,
                         overflow_weights: np.ndarray | None = None
                         ) -> np.ndarray:
    """Drive a batch of ladder amplitudes (nv, 2, 2N+1) through a sequence.

    vs holds each sample's velocity at t = 0.  pulse_model "physical"
    integrates the full Hamiltonian; "ideal" replaces each pulse by free
    evolution around an exact rotation of the nominal area on the addressed
    channel (an analytic reference, not a physical model).

    Without overflow_weights every sample must keep its edge-rung population
    under overflow_threshold.  With overflow_weights (ensemble averaging)
    the check bounds the weighted edge population instead: far-tail samples
    may individually spill, but only where their statistical weight already
    makes them irrelevant to the reported mean.
    """
    if pulse_model not in ("physical", "ideal"):
        raise ValueError("pulse_model must be 'physical' or 'ideal'")
    t = sequence.t0
    for el in sequence.elements:
        if isinstance(el, PulseSpec):
            if pulse_model == "physical":
                amps = _step_pulse(amps, species, vs, g, el, t)
            else:
                half = 0.5 * el.duration
                ch = el.channels.get(el.addressed)
                amps = _free_evolve(amps, species, vs, g, t, t + half,
                                    el.offset_integral(0.0, half))
                amps = _ideal_kick(amps, el.addressed,
                                   ch.rabi * el.duration, ch.phase)
                amps = _free_evolve(amps, species, vs, g, t + half,
                                    t + el.duration,
                                    el.offset_integral(half, el.duration))
            edge = _edge_population(amps)
            if overflow_weights is not None:
                edge = overflow_weights * edge
            worst = int(np.argmax(edge))
            if edge[worst] > overflow_threshold:
                kind = "weighted " if overflow_weights is not None else ""
                raise LadderOverflow(
                    f"{kind}edge-rung population {edge[worst]:.3e} exceeds "
                    f"{overflow_threshold:.1e} after pulse {el.label!r}; "
                    "widen the ladder", velocity=float(vs[worst]))
        else:
            t1 = t + el.duration
            amps = _free_evolve(amps, species, vs, g, t, t1,
                                sequence.schedule.integrate(t, t1))
        t += el.duration
    return amps


def evolve_sequence(state: LadderState, species: AtomSpecies,
                    kin: KinematicState, sequence: Sequence,
                    pulse_model: str = "physical",
                    overflow_threshold: float = DEFAULT_OVERFLOW_THRESHOLD
                    ) -> LadderState:
    """Single-atom wrapper around propagate_amplitudes."""
    if abs(state.t - sequence.t0) > TIMING_EPS:
        raise InvalidTiming(
            f"state at t={state.t!r} but sequence starts at {sequence.t0!r}")
    amps = propagate_amplitudes(state.amplitudes[None, :, :], species,
                                np.array([kin.v0]), kin.g, sequence,
                                pulse_model, overflow_threshold)
    dw_total = sequence.schedule.integrate(sequence.t0, sequence.t_end)
    return LadderState(amps[0], t=sequence.t_end,
                       phase_accumulator=state.phase_accumulator + dw_total)
