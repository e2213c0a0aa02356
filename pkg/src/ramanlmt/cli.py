"""Command line interface.

Subcommands:

  spectrum        single-pulse line scan vs modulation offset
  fringe          interferometer output vs modulation chirp rate
  lmt             interferometer output vs expand-to-fold separation
  sequence-export pulse table (timing, channels, frequencies) as CSV
  validate        build everything from the configuration and check it

Frequencies cross this boundary in Hz (Hz/s for chirp rates); everything
internal is angular.  Scan CSV goes to --out when given, else stdout; the
accompanying analysis report then goes to stdout or stderr respectively.
Heavy imports happen after --threads pins the BLAS pool size, so thread
settings actually take effect.

Exit codes: 0 success, 1 configuration errors, 2 sequence-validation
errors, 3 physics failures (ladder overflow, missing peaks, singular fits).
"""

from __future__ import annotations

import argparse
import contextlib
import os
import sys

_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                "NUMEXPR_NUM_THREADS", "VECLIB_MAXIMUM_THREADS")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH",
                        help="key = value configuration file")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        default=[], help="override one configuration key "
                        "(repeatable)")
    common.add_argument("--out", metavar="PATH",
                        help="write the scan/table here instead of stdout")
    common.add_argument("--seed", type=int,
                        help="override the monte carlo seed")
    common.add_argument("--threads", type=int, metavar="N",
                        help="pin BLAS/OpenMP pools to N threads")
    parser = argparse.ArgumentParser(
        prog="ramanlmt",
        description="Raman-pulse atom interferometry on a momentum ladder")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("spectrum", parents=[common],
                   help="scan a single pulse vs modulation offset")
    sub.add_parser("fringe", parents=[common],
                   help="scan the interferometer vs chirp rate")
    sub.add_parser("lmt", parents=[common],
                   help="scan the interferometer vs transfer-pair separation")
    sub.add_parser("sequence-export", parents=[common],
                   help="write the pulse table for the configured sequence")
    sub.add_parser("validate", parents=[common],
                   help="check the configuration and sequence consistency")
    return parser


@contextlib.contextmanager
def _open_out(path):
    if path is None:
        yield sys.stdout, sys.stderr
    else:
        with open(path, "w") as fh:
            yield fh, sys.stdout


def _grid(cfg, default_start, default_stop, default_points):
    import numpy as np
    start = cfg["scan_start"] if cfg["scan_start"] is not None else default_start
    stop = cfg["scan_stop"] if cfg["scan_stop"] is not None else default_stop
    points = cfg["scan_points"] if cfg["scan_points"] is not None \
        else default_points
    from .errors import ConfigError
    if stop <= start:
        raise ConfigError(f"scan_stop {stop!r} must exceed scan_start {start!r}")
    return np.linspace(start, stop, points)


def _finish_meta(cfg, result, x_unit):
    from . import __version__
    from .config import config_echo
    meta = dict(config_echo(cfg))
    meta.update(result.meta)
    meta["x_unit"] = x_unit
    meta["version"] = __version__
    result.meta = meta


def cmd_spectrum(cfg, out_path) -> int:
    import numpy as np
    from .config import (build_ensemble, build_kinematics, build_species,
                         channel_rabi)
    from .constants import TWO_PI
    from .experiments import ScanResult, analyze_spectrum, spectrum_scan
    from .io import write_report, write_scan
    species = build_species(cfg)
    kin = build_kinematics(cfg)
    ens = build_ensemble(cfg, kin)
    offsets_hz = _grid(cfg, -1.2e6, 1.2e6, 400)
    result = spectrum_scan(species, kin, ens, TWO_PI * offsets_hz,
                           duration=cfg["tau_pi_s"], rabi=channel_rabi(cfg),
                           n_max=cfg["n_max"] if cfg["n_max"] is not None else 4,
                           substeps=cfg["substeps"],
                           chunk_size=cfg["chunk_size"])
    out = ScanResult(x=offsets_hz, mean=result.mean, stderr=result.stderr,
                     meta=result.meta)
    _finish_meta(cfg, out, "Hz")
    peaks = analyze_spectrum(result, prominence_frac=cfg["prominence"])
    report = {"n_peaks": len(peaks)}
    for i, p in enumerate(peaks):
        report[f"peak{i}_center_hz"] = p.center / TWO_PI
        report[f"peak{i}_height"] = p.height
        report[f"peak{i}_fwhm_hz"] = p.fwhm / TWO_PI
    with _open_out(out_path) as (data_fh, report_fh):
        write_scan(data_fh, out)
        write_report(report_fh, report)
    return 0


def cmd_fringe(cfg, out_path) -> int:
    import numpy as np
    from .config import (build_ensemble, build_kinematics, build_species,
                         channel_rabi)
    from .constants import TWO_PI
    from .experiments import ScanResult, fit_single_cosine, fringe_chirp_scan
    from .io import write_report, write_scan
    species = build_species(cfg)
    kin = build_kinematics(cfg)
    ens = build_ensemble(cfg, kin)
    alpha0 = species.k_eff * kin.g / TWO_PI          # gravity-cancelling rate
    rates_hz = _grid(cfg, 0.9 * alpha0, 1.1 * alpha0, 121)
    result = fringe_chirp_scan(
        species, kin, ens, TWO_PI * rates_hz, T=cfg["T_s"],
        tau_pi=cfg["tau_pi_s"], rabi=channel_rabi(cfg), channel=cfg["channel"],
        freq_reference=cfg["freq_reference"],
        n_max=cfg["n_max"] if cfg["n_max"] is not None else 8,
        substeps=cfg["substeps"], pulse_model=cfg["pulse_model"],
        chunk_size=cfg["chunk_size"])
    out = ScanResult(x=rates_hz, mean=result.mean, stderr=result.stderr,
                     meta=result.meta)
    _finish_meta(cfg, out, "Hz_per_s")
    # fringe phase is (k_eff*g - alpha) times an effective squared spacing,
    # so vs alpha the signal is one cosine at "frequency" T_eff^2
    T, tau = cfg["T_s"], cfg["tau_pi_s"]
    t_eff_sq = T**2 + (4.0 / np.pi - 1.0) * T * tau \
        + (2.0 / np.pi - 0.75) * tau**2
    fit = fit_single_cosine(TWO_PI * rates_hz, result.mean, t_eff_sq,
                            y_err=result.stderr if result.stderr.any() else None)
    report = {"t_eff_sq_s2": t_eff_sq, "contrast": 2.0 * fit.amplitudes[0],
              "offset": fit.offset, "phi1_rad": fit.phases[0],
              "residual_rms": fit.residual_rms,
              "alpha_gravity_hz_per_s": alpha0}
    with _open_out(out_path) as (data_fh, report_fh):
        write_scan(data_fh, out)
        write_report(report_fh, report)
    return 0


def cmd_lmt(cfg, out_path) -> int:
    from .config import (build_ensemble, build_kinematics, build_species,
                         channel_rabi)
    from .constants import TWO_PI
    from .experiments import ScanResult, fit_dual_cosine, lmt_t0_scan
    from .io import harmonic_fit_report, write_report, write_scan
    species = build_species(cfg)
    kin = build_kinematics(cfg)
    ens = build_ensemble(cfg, kin)
    seps_s = _grid(cfg, 15e-6, 265e-6, 126)
    result = lmt_t0_scan(
        species, kin, ens, seps_s, T=cfg["T_s"], tau_pi=cfg["tau_pi_s"],
        lmt_order=cfg["lmt_order"], rabi=channel_rabi(cfg),
        chirp_rate=TWO_PI * cfg["chirp_hz_per_s"],
        readout_phase=cfg["readout_phase_rad"], channel=cfg["channel"],
        freq_reference=cfg["freq_reference"],
        burst_spacing=cfg["burst_spacing_s"],
        pulse_model=cfg["pulse_model"], n_max=cfg["n_max"],
        substeps=cfg["substeps"], chunk_size=cfg["chunk_size"])
    out = ScanResult(x=seps_s, mean=result.mean, stderr=result.stderr,
                     meta=result.meta)
    _finish_meta(cfg, out, "s")
    omega1 = abs(species.k_eff * kin.g
                 - TWO_PI * cfg["chirp_hz_per_s"]) * cfg["T_s"]
    fit = fit_dual_cosine(seps_s, result.mean, omega1,
                          free=cfg["fit_free_frequency"],
                          y_err=result.stderr if result.stderr.any() else None)
    report = harmonic_fit_report(fit, x_unit="s")
    with _open_out(out_path) as (data_fh, report_fh):
        write_scan(data_fh, out)
        write_report(report_fh, report)
    return 0


def _build_sequence(cfg):
    from .config import build_kinematics, build_species, channel_rabi
    from .constants import TWO_PI
    from .sequencer import make_lmt_sequence
    species = build_species(cfg)
    kin = build_kinematics(cfg)
    seq = make_lmt_sequence(
        species, kin, T=cfg["T_s"], tau_pi=cfg["tau_pi_s"],
        lmt_order=cfg["lmt_order"], t_sep=cfg["T0_s"],
        burst_spacing=cfg["burst_spacing_s"], rabi=channel_rabi(cfg),
        chirp_rate=TWO_PI * cfg["chirp_hz_per_s"],
        readout_phase=cfg["readout_phase_rad"], channel=cfg["channel"],
        freq_reference=cfg["freq_reference"], substeps=cfg["substeps"])
    return species, kin, seq


def cmd_sequence_export(cfg, out_path) -> int:
    from .constants import TWO_PI
    from .io import write_pulse_table
    _, _, seq = _build_sequence(cfg)
    rows = []
    for row in seq.pulse_table():
        rows.append({
            "index": row["index"], "label": row["label"],
            "t_start_s": row["t_start"], "t_center_s": row["t_center"],
            "duration_s": row["duration"], "channel": row["channel"],
            "offset_hz": row["omega_offset"] / TWO_PI,
            "chirp_hz_per_s": row["chirp_rate"] / TWO_PI,
            "rabi_hz": row["rabi"] / TWO_PI,
            "phase_rad": row["phase"],
        })
    with _open_out(out_path) as (data_fh, _):
        write_pulse_table(data_fh, rows)
    return 0


def cmd_validate(cfg, out_path) -> int:
    from .config import build_ensemble
    from .constants import TWO_PI
    from .ensemble import sample_velocities
    from .io import write_report
    from .sequencer import ladder_size_for, validate_sequence
    species, kin, seq = _build_sequence(cfg)
    diags = validate_sequence(seq, TWO_PI * cfg["spectral_width_hz"])
    ens = build_ensemble(cfg, kin)
    velocities, weights = sample_velocities(ens, species)
    n_max = cfg["n_max"] if cfg["n_max"] is not None \
        else ladder_size_for(cfg["lmt_order"])
    report = {
        "status": "ok" if not diags else "fail",
        "n_pulses": seq.n_pulses(),
        "sequence_duration_s": seq.duration,
        "hops": len(seq.schedule.segments) - 1,
        "ladder_n_max": n_max,
        "ensemble_samples": int(velocities.size),
        "weight_sum": float(weights.sum()),
        "v_ref_m_s": seq.meta["v_ref"],
    }
    for i, diag in enumerate(diags):
        report[f"diagnostic_{i}"] = f"{diag.kind}: {diag.message}"
    with _open_out(out_path) as (data_fh, _):
        write_report(data_fh, report)
    return 0 if not diags else 2


_COMMANDS = {
    "spectrum": cmd_spectrum,
    "fringe": cmd_fringe,
    "lmt": cmd_lmt,
    "sequence-export": cmd_sequence_export,
    "validate": cmd_validate,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            print("error: --threads must be >= 1", file=sys.stderr)
            return 1
        for var in _THREAD_VARS:
            os.environ[var] = str(args.threads)
    from .config import load_config, validate_choices
    from .errors import ConfigError, InvalidTiming, SimulationError
    try:
        cfg = load_config(args.config, args.set)
        if args.seed is not None:
            cfg["seed"] = args.seed
        validate_choices(cfg)
        return _COMMANDS[args.command](cfg, args.out)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except InvalidTiming as exc:
        print(f"sequence validation error: {exc}", file=sys.stderr)
        return 2
    except SimulationError as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
