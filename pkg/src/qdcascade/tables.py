"""Plain-text tables and flat key-value records.

All numeric output uses '%.10g' with a '.' decimal point regardless of
locale, and every file starts with '#'-prefixed metadata lines followed by
a '# columns: ...' line naming the fixed column order.

Formats
-------
histogram   columns: delay_ps,counts
decay       columns: delay_ps,counts          (+ irf_fwhm_ps metadata)
curve       columns: window_ps,g2,error
record      one 'key=value' per line
"""

from __future__ import annotations

import numpy as np

from .analysis import CoincidenceHistogram
from .errors import FormatError
from .fitting import DecayHistogram


def write_table(path, columns, array, metadata=None):
    array = np.atleast_2d(np.asarray(array, dtype=float))
    with open(path, "w", newline="\n") as fh:
        for key, value in (metadata or {}).items():
            fh.write(f"# {key}={value}\n")
        fh.write(f"# columns: {','.join(columns)}\n")
        for row in array:
            fh.write(",".join("%.10g" % v for v in row) + "\n")


def _read_table(path, expect_columns):
    metadata = {}
    n_header = 0
    columns = None
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            n_header += 1
            body = line[1:].strip()
            if body.startswith("columns:"):
                columns = [c.strip() for c in body[len("columns:"):].split(",")]
            elif "=" in body:
                key, _, value = body.partition("=")
                metadata[key.strip()] = value.strip()
    if columns != list(expect_columns):
        raise FormatError(
            f"{path}: expected columns {list(expect_columns)}, found {columns}"
        )
    data = np.loadtxt(path, delimiter=",", skiprows=n_header, ndmin=2)
    return data, metadata


def write_histogram(path, hist):
    """Coincidence histogram as (delay_ps, counts) rows."""
    write_table(
        path,
        ("delay_ps", "counts"),
        np.column_stack([hist.bin_centers, hist.counts]),
        metadata={
            "bin_width_ps": "%.10g" % hist.bin_width,
            "delay_range_ps": "%.10g" % hist.delay_range,
            "pulse_period_ps": "%.10g" % hist.pulse_period,
            "total_pairs": str(hist.total_pairs),
        },
    )


def read_histogram(path):
    data, meta = _read_table(path, ("delay_ps", "counts"))
    try:
        return CoincidenceHistogram(
            bin_width=float(meta["bin_width_ps"]),
            delay_range=float(meta["delay_range_ps"]),
            counts=data[:, 1].astype(np.int64),
            total_pairs=int(meta.get("total_pairs", int(data[:, 1].sum()))),
            pulse_period=float(meta["pulse_period_ps"]),
        )
    except KeyError as exc:
        raise FormatError(f"{path}: missing metadata {exc}") from exc


def write_decay(path, decay):
    """Delay-from-pulse histogram as (delay_ps, counts) rows."""
    write_table(
        path,
        ("delay_ps", "counts"),
        np.column_stack([decay.bin_centers, decay.counts]),
        metadata={"irf_fwhm_ps": "%.10g" % decay.irf_fwhm},
    )


def read_decay(path, irf_fwhm=None):
    data, meta = _read_table(path, ("delay_ps", "counts"))
    if irf_fwhm is None:
        if "irf_fwhm_ps" not in meta:
            raise FormatError(f"{path}: missing irf_fwhm_ps metadata")
        irf_fwhm = float(meta["irf_fwhm_ps"])
    return DecayHistogram(
        bin_centers=data[:, 0],
        counts=data[:, 1].astype(np.int64),
        irf_fwhm=float(irf_fwhm),
    )


def write_curve(path, curve, metadata=None):
    """g2-versus-window curve as (window_ps, g2, error) rows."""
    write_table(path, ("window_ps", "g2", "error"), curve, metadata=metadata)


def read_curve(path):
    data, _ = _read_table(path, ("window_ps", "g2", "error"))
    return data


def write_record(path, mapping):
    """Flat key=value record, one entry per line, insertion order."""
    with open(path, "w", newline="\n") as fh:
        for key, value in mapping.items():
            if isinstance(value, float):
                value = "%.10g" % value
            fh.write(f"{key}={value}\n")


def read_record(path):
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise FormatError(f"{path}: malformed record line {line!r}")
            key, _, value = line.partition("=")
            out[key.strip()] = value.strip()
    return out
