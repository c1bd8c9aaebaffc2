"""Detector time-tag streams and their on-disk text format.

A stream is the interchange format between the Monte Carlo simulator and the
coincidence analysis: an ordered list of (channel, timestamp) records plus a
header identifying the generating configuration.

File format (one record per line, ascending timestamps)::

    # qdcascade-stream v1
    # key=value          <- header entries, one per line
    channel,timestamp_ps

Channels are 0 or 1; timestamps are integer picoseconds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError

_MAGIC = "qdcascade-stream v1"


@dataclass
class TimeTagStream:
    """Ordered detector click records.

    Attributes
    ----------
    channels : ndarray of uint8
        Detector index per click, 0 or 1.
    timestamps : ndarray of int64
        Click times in integer picoseconds, non-decreasing.
    header : dict
        Generating-configuration metadata (config digest, seed, mode, ...).
        Values are stored as strings in the file.
    """

    channels: np.ndarray
    timestamps: np.ndarray
    header: dict = field(default_factory=dict)

    def __post_init__(self):
        self.channels = np.asarray(self.channels, dtype=np.uint8)
        self.timestamps = np.asarray(self.timestamps, dtype=np.int64)
        if self.channels.shape != self.timestamps.shape:
            raise FormatError("channels and timestamps must have equal length")
        if self.channels.size and self.channels.max() > 1:
            raise FormatError("channels must be 0 or 1")
        if self.timestamps.size > 1 and np.any(np.diff(self.timestamps) < 0):
            raise FormatError("timestamps must be non-decreasing")

    def __len__(self):
        return int(self.timestamps.size)

    @property
    def pulse_period(self):
        """Pulse period in ps from the header, if present."""
        value = self.header.get("pulse_period_ps")
        return None if value is None else float(value)

    def channel_times(self, channel):
        """Timestamps of one channel, as int64 ndarray."""
        return self.timestamps[self.channels == channel]

    def write(self, path):
        """Write the stream to ``path`` in the v1 text format."""
        with open(path, "w", newline="\n") as fh:
            fh.write(f"# {_MAGIC}\n")
            for key in sorted(self.header):
                fh.write(f"# {key}={self.header[key]}\n")
            np.savetxt(fh, np.column_stack([self.channels, self.timestamps]),
                       fmt="%d,%d", delimiter="")

    @classmethod
    def read(cls, path):
        """Parse a stream file written by :meth:`write`."""
        header = {}
        n_header = 0
        with open(path) as fh:
            first = fh.readline()
            if _MAGIC not in first:
                raise FormatError(f"{path}: missing stream magic line")
            n_header = 1
            for line in fh:
                if not line.startswith("#"):
                    break
                n_header += 1
                body = line[1:].strip()
                if "=" in body:
                    key, _, value = body.partition("=")
                    header[key.strip()] = value.strip()
        try:
            data = np.loadtxt(path, delimiter=",", skiprows=n_header,
                              dtype=np.int64, ndmin=2)
        except ValueError as exc:
            raise FormatError(f"{path}: malformed record line: {exc}") from exc
        if data.size == 0:
            channels = np.empty(0, dtype=np.uint8)
            times = np.empty(0, dtype=np.int64)
        else:
            channels = data[:, 0].astype(np.uint8)
            times = data[:, 1]
        return cls(channels=channels, timestamps=times, header=header)
