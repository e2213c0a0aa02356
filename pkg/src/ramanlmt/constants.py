"""Species data and kinematics for Doppler-selected Raman transitions.

All frequencies in this package are angular (rad/s) and all units SI unless
a name says otherwise.  Human-facing layers (CLI, config files, exported
tables) use plain Hz and convert at the boundary.

Sign conventions: the positive axis points along gravity, so an atom
released from rest has v(t) = v0 + g*t > 0 while falling.  Channel s = +1
labels the counterpropagating beam pair whose resonance shifts up with
velocity, s = -1 the reversed pair, s = 0 the copropagating (Doppler-free)
pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

TWO_PI = 2.0 * math.pi

HBAR = 1.054571817e-34        # J s
K_BOLTZMANN = 1.380649e-23    # J / K
ATOMIC_MASS = 1.66053906660e-27  # kg
G_DEFAULT = 9.81              # m / s^2


@dataclass(frozen=True)
class AtomSpecies:
    """Atom and beam-geometry constants.

    mass       : atomic mass (kg)
    omega_hfs  : ground-state hyperfine splitting (rad/s)
    k_eff      : effective two-photon wavenumber of a counterpropagating
                 Raman pair (rad/m); the copropagating pair transfers no
                 momentum in this model
    label      : short name for reports
    """

    mass: float
    omega_hfs: float
    k_eff: float
    label: str = ""

    def __post_init__(self):
        if not (self.mass > 0.0 and self.omega_hfs > 0.0 and self.k_eff > 0.0):
            raise ValueError("mass, omega_hfs and k_eff must be positive")


# 85Rb with the F=2/F=3 ground states addressed through a ~3.0357 GHz
# modulation sideband.
RB85 = AtomSpecies(
    mass=85.0 * ATOMIC_MASS,
    omega_hfs=TWO_PI * 3.0357e9,
    k_eff=TWO_PI * 2.56e6,
    label="rb85",
)


@dataclass(frozen=True)
class KinematicState:
    """Center-of-mass motion along the beam axis.

    v0 : velocity at t = 0, i.e. at the start of the pulse sequence (m/s)
    g  : uniform acceleration along the axis (m/s^2)
    """

    v0: float
    g: float = G_DEFAULT

    def __post_init__(self):
        if not (math.isfinite(self.v0) and math.isfinite(self.g)):
            raise ValueError("kinematics must be finite")

    def velocity(self, t: float) -> float:
        return self.v0 + self.g * t


@dataclass(frozen=True)
class Channel:
    """One Raman beam pair: coupling strength, on/off flag, drive phase."""

    rabi: float            # angular two-photon Rabi frequency (rad/s)
    enabled: bool = True
    phase: float = 0.0     # rad, static phase of the coupling

    def __post_init__(self):
        if self.rabi < 0.0:
            raise ValueError("rabi must be >= 0")


def _off() -> Channel:
    return Channel(rabi=0.0, enabled=False)


@dataclass(frozen=True)
class ChannelSet:
    """The three beam pairs of a retroreflected geometry.

    plus/minus are the two counterpropagating pairs (momentum kick +-1 in
    units of hbar*k_eff), co the copropagating pair (no kick).  During a
    pulse every enabled channel is present in the Hamiltonian; which one
    actually drives the atom is decided by the modulation frequency.
    """

    plus: Channel = field(default_factory=_off)
    minus: Channel = field(default_factory=_off)
    co: Channel = field(default_factory=_off)

    def __post_init__(self):
        if not any(c.enabled for c in (self.plus, self.minus, self.co)):
            raise ValueError("at least one channel must be enabled")

    def get(self, s: int) -> Channel:
        try:
            return {+1: self.plus, -1: self.minus, 0: self.co}[s]
        except KeyError:
            raise ValueError("channel index must be +1, -1 or 0") from None

    def enabled_channels(self):
        """Yield (s, Channel) for the channels present in the Hamiltonian."""
        for s, ch in ((+1, self.plus), (-1, self.minus), (0, self.co)):
            if ch.enabled and ch.rabi > 0.0:
                yield s, ch

    def with_phase(self, s: int, phase: float) -> "ChannelSet":
        """Copy of this set with channel s given a drive phase (rad)."""
        new = {+1: self.plus, -1: self.minus, 0: self.co}
        ch = new[s]
        new[s] = Channel(rabi=ch.rabi, enabled=ch.enabled, phase=phase)
        return ChannelSet(plus=new[+1], minus=new[-1], co=new[0])

    def with_common_phase(self, phase: float) -> "ChannelSet":
        """Copy with the same drive phase on every pair.

        A modulation phase jump propagates to all beam pairs at once since
        they derive from the same synthesizer.
        """
        def shift(ch: Channel) -> Channel:
            return Channel(rabi=ch.rabi, enabled=ch.enabled, phase=phase)
        return ChannelSet(plus=shift(self.plus), minus=shift(self.minus),
                          co=shift(self.co))

    @classmethod
    def uniform(cls, rabi: float) -> "ChannelSet":
        """All three pairs on with equal coupling."""
        return cls(plus=Channel(rabi), minus=Channel(rabi), co=Channel(rabi))

    @classmethod
    def single(cls, s: int, rabi: float, phase: float = 0.0) -> "ChannelSet":
        """Only channel s on; the other pairs are absent from H."""
        chans = {+1: _off(), -1: _off(), 0: _off()}
        chans[s] = Channel(rabi=rabi, phase=phase)
        return cls(plus=chans[+1], minus=chans[-1], co=chans[0])


def doppler_shift(species: AtomSpecies, v: float) -> float:
    """First-order Doppler shift k_eff*v (rad/s) of a counterpropagating pair."""
    return species.k_eff * v


def recoil_frequency(species: AtomSpecies) -> float:
    """Two-photon recoil hbar*k_eff^2/(2m) (rad/s)."""
    return HBAR * species.k_eff**2 / (2.0 * species.mass)


def thermal_sigma_v(species: AtomSpecies, temperature: float) -> float:
    """1-D rms velocity spread sqrt(kB*T/m) (m/s)."""
    if temperature < 0.0:
        raise ValueError("temperature must be >= 0")
    return math.sqrt(K_BOLTZMANN * temperature / species.mass)


def resonant_offset(species: AtomSpecies, kin: KinematicState, s: int,
                    t: float = 0.0) -> float:
    """Resonant modulation offset from omega_hfs for channel s at time t.

    For the n = 0 -> n = s rung this is s*k_eff*v(t) + |s|*omega_rec (rad/s);
    the copropagating channel is velocity independent and recoil free.
    """
    if s not in (+1, -1, 0):
        raise ValueError("channel index must be +1, -1 or 0")
    return (s * doppler_shift(species, kin.velocity(t))
            + abs(s) * recoil_frequency(species))


def resonant_modulation_frequency(species: AtomSpecies, kin: KinematicState,
                                  s: int, t: float = 0.0) -> float:
    """Absolute resonant modulation frequency (rad/s) for channel s at time t."""
    return species.omega_hfs + resonant_offset(species, kin, s, t)


def channels_separated(species: AtomSpecies, v: float, width: float) -> bool:
    """True when the two counterpropagating resonances are spectrally split.

    The side resonances sit 2*k_eff*v apart; they are usable as distinct
    channels when that exceeds the configured spectral width bound.
    """
    if width < 0.0:
        raise ValueError("width must be >= 0")
    return 2.0 * doppler_shift(species, v) > width
