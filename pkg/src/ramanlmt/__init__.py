"""Raman-pulse atom interferometry on a momentum ladder.

Simulates two-level atoms with quantized photon-recoil momentum driven by
a retroreflected Raman beam pair: line spectra split by the Doppler shift
of a falling cloud, pi/2 - pi - pi/2 interferometer fringes under a
modulation chirp, and momentum-transfer sequences whose imperfect pulses
make coexisting interferometer loops beat against each other.

Submodules import lazily so the command line can configure BLAS threading
before numpy loads; `from ramanlmt import X` still works for everything
listed in __all__.
"""

__version__ = "0.1.0"

_EXPORTS = {
    "constants": [
        "AtomSpecies", "Channel", "ChannelSet", "KinematicState", "RB85",
        "G_DEFAULT", "HBAR", "K_BOLTZMANN", "ATOMIC_MASS", "TWO_PI",
        "doppler_shift", "recoil_frequency", "thermal_sigma_v",
        "resonant_offset", "resonant_modulation_frequency",
        "channels_separated",
    ],
    "errors": [
        "SimulationError", "LadderOverflow", "InvalidTiming", "NoPeaks",
        "SingularFit", "ConfigError", "ChannelOverlapWarning",
    ],
    "propagator": [
        "LadderState", "PulseSpec", "GapSpec", "build_hamiltonian",
        "evolve_pulse", "evolve_pulse_ideal", "evolve_free",
        "detect_population_f3",
    ],
    "sequencer": [
        "FrequencySchedule", "ScheduleSegment", "Sequence", "Diagnostic",
        "make_single_pulse", "make_mzi_sequence", "make_lmt_sequence",
        "ladder_size_for", "evolve_sequence", "propagate_amplitudes",
        "validate_sequence",
    ],
    "ensemble": [
        "EnsembleSpec", "EnsembleResult", "GaussHermiteSampling",
        "MonteCarloSampling", "sample_velocities", "run_ensemble",
    ],
    "experiments": [
        "ScanResult", "Peak", "PhaseScan", "QuadraticFit", "HarmonicFit",
        "spectrum_scan", "analyze_spectrum", "fringe_chirp_scan",
        "phase_vs_T", "fit_quadratic", "lmt_t0_scan", "fit_harmonics",
        "fit_harmonics_free", "fit_single_cosine", "fit_dual_cosine",
    ],
    "io": [
        "write_scan", "write_scan_path", "read_scan", "read_scan_path",
        "write_report", "harmonic_fit_report", "write_pulse_table",
    ],
}

_ATTR_TO_MODULE = {name: mod for mod, names in _EXPORTS.items()
                   for name in names}

__all__ = sorted(_ATTR_TO_MODULE) + ["__version__"]


def __getattr__(name):
    module_name = _ATTR_TO_MODULE.get(name)
    if module_name is None:
        raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
    import importlib
    module = importlib.import_module(f".{module_name}", __name__)
    value = getattr(module, name)
    globals()[name] = value
    return value


def __dir__():
    return __all__
