"""Timestamped telemetry logs.

Record layout: 8-byte big-endian microseconds, then one raw frame. The
frame's own length byte delimits records, so logs are readable without
the dialect. A truncated trailing record is tolerated on read.
"""

from .framing import OVERHEAD, STX


class TlogWriter:
    def __init__(self, fh):
        self._fh = fh
        self._last_us = None

    def write(self, timestamp_us: int, raw_frame: bytes) -> None:
        if self._last_us is not None and timestamp_us < self._last_us:
            raise ValueError("tlog timestamps must be monotone")
        self._last_us = timestamp_us
        self._fh.write(int(timestamp_us).to_bytes(8, "big"))
        self._fh.write(raw_frame)


class TlogReader:
    """Iterate (timestamp_us, raw_frame) records from a binary stream."""

    def __init__(self, fh):
        self._fh = fh

    def __iter__(self):
        while True:
            head = self._fh.read(9)
            if len(head) < 9 or head[8] != STX:
                return  # end or truncated record
            ts = int.from_bytes(head[:8], "big")
            length_byte = self._fh.read(1)
            if not length_byte:
                return
            rest = self._fh.read(OVERHEAD - 2 + length_byte[0])
            if len(rest) < OVERHEAD - 2 + length_byte[0]:
                return
            yield ts, bytes(head[8:9]) + length_byte + rest


def write_tlog(path: str, records) -> None:
    """Write (timestamp_us, raw_frame) records to a file."""
    with open(path, "wb") as fh:
        writer = TlogWriter(fh)
        for ts, raw in records:
            writer.write(ts, raw)


def read_tlog(path: str) -> list:
    with open(path, "rb") as fh:
        return list(TlogReader(fh))
