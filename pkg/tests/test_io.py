"""Round-trip and format tests for scan, report and pulse-table output."""

import io

import numpy as np
import pytest

from ramanlmt.experiments import ScanResult, fit_harmonics
from ramanlmt.io import (HEADER_MAGIC, harmonic_fit_report, read_scan,
                         read_scan_path, write_pulse_table, write_report,
                         write_scan, write_scan_path)


def sample_scan():
    rng = np.random.default_rng(3)
    return ScanResult(x=np.sort(rng.uniform(-1e6, 1e6, 37)),
                      mean=rng.uniform(0.0, 1.0, 37),
                      stderr=rng.uniform(0.0, 0.01, 37),
                      meta={"experiment": "spectrum", "n_max": 4,
                            "duration": 1e-05, "rabi": 314159.2653589793,
                            "note": "free text"})


def test_scan_round_trip_bit_exact():
    res = sample_scan()
    buf = io.StringIO()
    write_scan(buf, res)
    text = buf.getvalue()
    assert text.startswith(HEADER_MAGIC + "\n")
    back = read_scan(io.StringIO(text))
    # repr-based float formatting round-trips every bit
    np.testing.assert_array_equal(back.x, res.x)
    np.testing.assert_array_equal(back.mean, res.mean)
    np.testing.assert_array_equal(back.stderr, res.stderr)
    assert back.meta == res.meta
    assert isinstance(back.meta["n_max"], int)
    assert isinstance(back.meta["note"], str)


def test_scan_write_deterministic():
    res = sample_scan()
    a, b = io.StringIO(), io.StringIO()
    write_scan(a, res)
    write_scan(b, res)
    assert a.getvalue() == b.getvalue()


def test_scan_path_round_trip(tmp_path):
    res = sample_scan()
    path = str(tmp_path / "scan.csv")
    write_scan_path(path, res)
    back = read_scan_path(path)
    np.testing.assert_array_equal(back.x, res.x)


def test_read_scan_rejects_wrong_columns():
    with pytest.raises(ValueError):
        read_scan(io.StringIO("# header\nx,y\n0.0,1.0\n"))


def test_read_scan_rejects_malformed_row():
    text = HEADER_MAGIC + "\nx,mean,stderr\n0.0,1.0\n"
    with pytest.raises(ValueError):
        read_scan(io.StringIO(text))


def test_read_scan_rejects_empty():
    with pytest.raises(ValueError):
        read_scan(io.StringIO(""))


def test_write_report_format():
    buf = io.StringIO()
    write_report(buf, {"a": 1, "b": 0.5, "c": "ok"})
    assert buf.getvalue() == "a = 1\nb = 0.5\nc = ok\n"


def test_harmonic_fit_report_keys_and_ratio():
    w = 2.0 * np.pi
    x = np.linspace(0.0, 3.0, 120)
    y = 0.5 + 0.25 * np.cos(w * x + 0.4) + 0.11 * np.cos(2 * w * x - 0.9)
    rep = harmonic_fit_report(fit_harmonics(x, y, w))
    assert rep["omega1_rad"] == pytest.approx(w)
    assert rep["f1_per_s"] == pytest.approx(1.0)
    assert rep["c1"] == pytest.approx(0.25, abs=1e-9)
    assert rep["c2"] == pytest.approx(0.11, abs=1e-9)
    assert rep["c2_over_c1"] == pytest.approx(0.44, abs=1e-8)
    assert rep["c0"] == pytest.approx(0.5, abs=1e-9)
    for key in ("residual_rms", "signal_ptp", "phi1_rad",
                "phi2_rad", "c1_stderr", "c2_stderr"):
        assert key in rep
    # values must be plain Python scalars so repr stays stable across
    # numpy versions
    assert all(type(v) in (int, float, str) for v in rep.values())


def test_write_pulse_table_format():
    rows = [{"index": 0, "label": "split", "offset_hz": 517717.67422837205},
            {"index": 1, "label": "mirror", "offset_hz": -517717.67422837205}]
    buf = io.StringIO()
    write_pulse_table(buf, rows)
    assert buf.getvalue() == ("index,label,offset_hz\n"
                              "0,split,517717.67422837205\n"
                              "1,mirror,-517717.67422837205\n")


def test_write_pulse_table_empty_raises():
    with pytest.raises(ValueError):
        write_pulse_table(io.StringIO(), [])
