"""Scan and report serialization.

Scans go to CSV with a commented header block echoing the run metadata as
`# key = value` lines, then `x,mean,stderr` columns.  Floats are written
with repr so a read-back reproduces them bit-exactly; two runs with the
same configuration and seed produce byte-identical files.
"""

from __future__ import annotations

import ast
from typing import IO

import numpy as np

from .experiments import HarmonicFit, ScanResult

HEADER_MAGIC = "# ramanlmt scan v1"


def _plain(value):
    """Strip numpy scalar wrappers so repr stays version-independent."""
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    return value


def _format_value(value) -> str:
    value = _plain(value)
    if isinstance(value, str):
        return value
    return repr(value)


def write_scan(fh: IO[str], result: ScanResult) -> None:
    fh.write(HEADER_MAGIC + "\n")
    for key in sorted(result.meta):
        fh.write(f"# {key} = {_format_value(result.meta[key])}\n")
    fh.write("x,mean,stderr\n")
    for x, m, s in zip(result.x, result.mean, result.stderr):
        fh.write(f"{_plain(x)!r},{_plain(m)!r},{_plain(s)!r}\n")


def write_scan_path(path: str, result: ScanResult) -> None:
    with open(path, "w") as fh:
        write_scan(fh, result)


def _parse_meta_value(text: str):
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def read_scan(fh: IO[str]) -> ScanResult:
    meta = {}
    rows = []
    saw_columns = False
    for line in fh:
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line.lstrip("#").strip()
            if "=" in body:
                key, _, val = body.partition("=")
                meta[key.strip()] = _parse_meta_value(val.strip())
            continue
        if not saw_columns:
            if line != "x,mean,stderr":
                raise ValueError(f"unexpected column header {line!r}")
            saw_columns = True
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise ValueError(f"malformed data row {line!r}")
        rows.append(tuple(float(p) for p in parts))
    if not saw_columns:
        raise ValueError("missing column header; not a scan file?")
    data = np.array(rows, dtype=float).reshape(-1, 3)
    return ScanResult(x=data[:, 0], mean=data[:, 1], stderr=data[:, 2],
                      meta=meta)


def read_scan_path(path: str) -> ScanResult:
    with open(path) as fh:
        return read_scan(fh)


def write_report(fh: IO[str], items: dict) -> None:
    """Flat key = value block (fit results, peak lists)."""
    for key, value in items.items():
        fh.write(f"{key} = {_format_value(value)}\n")


def harmonic_fit_report(fit: HarmonicFit, x_unit: str = "s") -> dict:
    """Flatten a harmonic fit for write_report; frequencies per 2*pi*x."""
    items = {
        "omega1_rad": _plain(fit.omega1),
        f"f1_per_{x_unit}": _plain(fit.omega1 / (2.0 * np.pi)),
        "c0": _plain(fit.offset),
        "residual_rms": _plain(fit.residual_rms),
        "signal_ptp": _plain(fit.ptp),
    }
    for k, (c, p) in enumerate(zip(fit.amplitudes, fit.phases), 1):
        items[f"c{k}"] = _plain(c)
        items[f"phi{k}_rad"] = _plain(p)
        err = fit.amplitude_stderr(k)
        if err is not None:
            items[f"c{k}_stderr"] = _plain(err)
    if len(fit.amplitudes) >= 2 and fit.amplitudes[0] != 0.0:
        items["c2_over_c1"] = _plain(fit.amplitudes[1] / fit.amplitudes[0])
    return items


def write_pulse_table(fh: IO[str], rows: list) -> None:
    """Sequence export: one CSV row per pulse, columns from the first row."""
    if not rows:
        raise ValueError("empty pulse table")
    cols = list(rows[0].keys())
    fh.write(",".join(cols) + "\n")
    for row in rows:
        out = []
        for c in cols:
            v = _plain(row[c])
            out.append(v if isinstance(v, str) else repr(v))
        fh.write(",".join(out) + "\n")
