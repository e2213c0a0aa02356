"""Flat key = value run configuration.

Files hold one `key = value` pair per line; `#` starts a comment.  The
same keys are accepted on the command line via repeated `--set key=value`.
Every frequency-like key is in Hz (or Hz/s); conversion to angular units
happens in the builders below, never inside the physics modules.  A value
of `none` (or `auto` where noted) leaves the key at its default.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .constants import (ATOMIC_MASS, AtomSpecies, Channel, ChannelSet,
                        KinematicState, RB85, TWO_PI)
from .ensemble import EnsembleSpec, GaussHermiteSampling, MonteCarloSampling
from .errors import ConfigError


def _float(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"expected a number, got {text!r}") from None


def _int(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"expected an integer, got {text!r}") from None


def _str(text: str) -> str:
    return text


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _optional(parser: Callable):
    def parse(text: str):
        if text.strip().lower() in ("none", "auto", ""):
            return None
        return parser(text)
    return parse


@dataclass(frozen=True)
class Key:
    default: object
    parse: Callable
    help: str


SCHEMA = {
    # species
    "species": Key("rb85", _str, "species preset (rb85)"),
    "mass_amu": Key(None, _optional(_float), "override atomic mass (u)"),
    "hfs_hz": Key(None, _optional(_float), "override hyperfine splitting (Hz)"),
    "k_eff_cycles_per_m": Key(None, _optional(_float),
                              "override k_eff/2pi (1/m)"),
    # kinematics
    "g_m_s2": Key(9.81, _float, "gravitational acceleration (m/s^2)"),
    "t_fall_s": Key(0.020, _float, "free fall before the first pulse (s)"),
    "v0_m_s": Key(None, _optional(_float),
                  "bias velocity (m/s); overrides t_fall_s"),
    # pulses
    "tau_pi_s": Key(10e-6, _float, "pi-pulse duration (s)"),
    "rabi_hz": Key(None, _optional(_float),
                   "two-photon Rabi rate (Hz); default pi area over tau_pi"),
    "rabi_plus_hz": Key(None, _optional(_float),
                        "upward-kick pair Rabi rate (Hz); default rabi_hz"),
    "rabi_minus_hz": Key(None, _optional(_float),
                         "downward-kick pair Rabi rate (Hz); default rabi_hz"),
    "rabi_co_hz": Key(None, _optional(_float),
                      "copropagating pair Rabi rate (Hz); default rabi_hz"),
    "substeps": Key(None, _int, "integration slices per pulse (default 4 probe, 32 interferometer)"),
    # sequence
    "T_s": Key(400e-6, _float, "splitter-to-mirror spacing (s)"),
    "T0_s": Key(120e-6, _float, "expand-to-fold separation (s)"),
    "lmt_order": Key(1, _int, "momentum-transfer pairs per half"),
    "burst_spacing_s": Key(None, _optional(_float),
                           "extra spacing of outer transfer pairs (s)"),
    "chirp_hz_per_s": Key(0.0, _float, "modulation chirp rate (Hz/s)"),
    "readout_phase_rad": Key(0.0, _float, "final-splitter phase jump (rad)"),
    "channel": Key(1, _int, "splitter beam pair, +1 or -1"),
    "freq_reference": Key("static", _str, "static | per_pulse"),
    "pulse_model": Key("physical", _str, "physical | ideal"),
    "spectral_width_hz": Key(400e3, _float,
                             "beam-pair addressing bandwidth bound (Hz)"),
    "n_max": Key(None, _optional(_int), "ladder half-width; auto from order"),
    # ensemble
    "temperature_uK": Key(14.0, _float, "cloud temperature (uK)"),
    "sampling": Key("gauss_hermite", _str, "gauss_hermite | monte_carlo"),
    "gh_order": Key(40, _int, "quadrature order"),
    "mc_count": Key(100_000, _int, "monte carlo sample count"),
    "seed": Key(12345, _int, "monte carlo seed"),
    "chunk_size": Key(2048, _int, "velocity samples per batch"),
    # scan grid (semantics depend on the subcommand)
    "scan_start": Key(None, _optional(_float), "grid start (subcommand units)"),
    "scan_stop": Key(None, _optional(_float), "grid stop (subcommand units)"),
    "scan_points": Key(None, _optional(_int), "grid points"),
    # analysis
    "prominence": Key(0.15, _float, "peak prominence, fraction of span"),
    "fit_free_frequency": Key(False, _bool,
                              "let the beat fundamental float in the fit"),
}


def default_config() -> dict:
    return {k: v.default for k, v in SCHEMA.items()}


def parse_pair(line: str) -> tuple:
    if "=" not in line:
        raise ConfigError(f"expected key=value, got {line!r}")
    key, _, raw = line.partition("=")
    key = key.strip()
    if key not in SCHEMA:
        raise ConfigError(f"unknown configuration key {key!r}")
    return key, SCHEMA[key].parse(raw.strip())


def parse_config_text(text: str) -> dict:
    pairs = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        try:
            key, value = parse_pair(body)
        except ConfigError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from None
        pairs[key] = value
    return pairs


def load_config(path: Optional[str] = None,
                overrides: Optional[list] = None) -> dict:
    """Defaults, then the file, then --set pairs; later wins."""
    cfg = default_config()
    if path is not None:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path!r}: {exc}") from None
        cfg.update(parse_config_text(text))
    for item in overrides or []:
        key, value = parse_pair(item)
        cfg[key] = value
    return cfg


# ---------------------------------------------------------------------------
# builders: configuration dict -> domain objects (Hz -> rad/s here)

def build_species(cfg: dict) -> AtomSpecies:
    if cfg["species"] != "rb85":
        raise ConfigError(f"unknown species preset {cfg['species']!r}")
    base = RB85
    mass = base.mass if cfg["mass_amu"] is None \
        else cfg["mass_amu"] * ATOMIC_MASS
    hfs = base.omega_hfs if cfg["hfs_hz"] is None \
        else TWO_PI * cfg["hfs_hz"]
    k_eff = base.k_eff if cfg["k_eff_cycles_per_m"] is None \
        else TWO_PI * cfg["k_eff_cycles_per_m"]
    return AtomSpecies(mass=mass, omega_hfs=hfs, k_eff=k_eff,
                       label=base.label)


def build_kinematics(cfg: dict) -> KinematicState:
    g = cfg["g_m_s2"]
    v0 = cfg["v0_m_s"] if cfg["v0_m_s"] is not None \
        else g * cfg["t_fall_s"]
    return KinematicState(v0=v0, g=g)


def build_sampling(cfg: dict):
    if cfg["sampling"] == "gauss_hermite":
        return GaussHermiteSampling(order=cfg["gh_order"])
    if cfg["sampling"] == "monte_carlo":
        return MonteCarloSampling(count=cfg["mc_count"], seed=cfg["seed"])
    raise ConfigError(f"unknown sampling rule {cfg['sampling']!r}")


def build_ensemble(cfg: dict, kin: KinematicState) -> EnsembleSpec:
    return EnsembleSpec(temperature=cfg["temperature_uK"] * 1e-6,
                        v0_bias=kin.v0, sampling=build_sampling(cfg),
                        t_fall=None if cfg["v0_m_s"] is not None
                        else cfg["t_fall_s"])


def rabi_rad(cfg: dict) -> float:
    if cfg["rabi_hz"] is not None:
        return TWO_PI * cfg["rabi_hz"]
    return np.pi / cfg["tau_pi_s"]


def channel_rabi(cfg: dict):
    """Drive strength per beam pair (rad/s).

    A plain float when all pairs share rabi_hz; a ChannelSet once any
    per-pair override is set.  A pair at 0 is absent from the Hamiltonian.
    """
    base = rabi_rad(cfg)
    keys = ("rabi_plus_hz", "rabi_minus_hz", "rabi_co_hz")
    if all(cfg[k] is None for k in keys):
        return base
    plus, minus, co = (base if cfg[k] is None else TWO_PI * cfg[k]
                       for k in keys)
    return ChannelSet(plus=Channel(plus), minus=Channel(minus),
                      co=Channel(co))


def validate_choices(cfg: dict) -> None:
    """Cross-field checks that the per-key parsers cannot see."""
    if cfg["freq_reference"] not in ("static", "per_pulse"):
        raise ConfigError(
            f"freq_reference must be static or per_pulse, "
            f"got {cfg['freq_reference']!r}")
    if cfg["pulse_model"] not in ("physical", "ideal"):
        raise ConfigError(
            f"pulse_model must be physical or ideal, "
            f"got {cfg['pulse_model']!r}")
    if cfg["channel"] not in (1, -1):
        raise ConfigError(f"channel must be 1 or -1, got {cfg['channel']!r}")
    if cfg["tau_pi_s"] <= 0:
        raise ConfigError("tau_pi_s must be > 0")
    for key in ("rabi_hz", "rabi_plus_hz", "rabi_minus_hz", "rabi_co_hz"):
        if cfg[key] is not None and cfg[key] < 0:
            raise ConfigError(f"{key} must be >= 0")
    if cfg["T_s"] <= 0:
        raise ConfigError("T_s must be > 0")
    if cfg["temperature_uK"] < 0:
        raise ConfigError("temperature_uK must be >= 0")
    if cfg["scan_points"] is not None and cfg["scan_points"] < 2:
        raise ConfigError("scan_points must be >= 2")
    if cfg["substeps"] is not None and cfg["substeps"] < 1:
        raise ConfigError("substeps must be >= 1")


def config_echo(cfg: dict) -> dict:
    """Config as written into scan headers (None spelled out)."""
    out = {}
    for key in sorted(cfg):
        value = cfg[key]
        out[key] = "none" if value is None else value
    return out
