"""Compact telemetry wire protocol: schema registry, framing, CRC, logs.

A frame costs exactly 8 bytes over its payload:
stx(1) len(1) seq(1) sys_id(1) comp_id(1) msg_id(1) payload(len) crc(2, LE).
The CRC-16/MCRF4XX runs over len..payload plus the message's crc_extra
byte, so both ends must agree on the dialect file. See docs/wire_format.md
for the bit-exact contract shared with external clients.
"""

from .crc import crc16, crc_extra_for
from .schema import (
    FieldSpec,
    MessageSchema,
    Registry,
    SchemaError,
    load_dialect,
    parse_dialect,
)
from .framing import (
    STX,
    DecodeError,
    DecodedFrame,
    FrameDecoder,
    FrameEncoder,
    LinkStats,
    pack_payload,
    unpack_payload,
)
from .tlog import TlogReader, TlogWriter, read_tlog, write_tlog

__all__ = [
    "crc16", "crc_extra_for",
    "FieldSpec", "MessageSchema", "Registry", "SchemaError",
    "load_dialect", "parse_dialect",
    "STX", "DecodeError", "DecodedFrame", "FrameDecoder", "FrameEncoder",
    "LinkStats", "pack_payload", "unpack_payload",
    "TlogReader", "TlogWriter", "read_tlog", "write_tlog",
]


def encode_text(text: str, length: int) -> tuple:
    """Encode a string into a fixed u8 array (NUL padded, truncated)."""
    raw = text.encode("utf-8")[:length]
    return tuple(raw) + (0,) * (length - len(raw))


def decode_text(values) -> str:
    """Inverse of encode_text."""
    raw = bytes(v for v in values)
    return raw.split(b"\x00", 1)[0].decode("utf-8", errors="replace")
