"""Frame encoding and the resynchronizing stream decoder."""

from dataclasses import dataclass, field

from .crc import crc16
from .schema import MessageSchema, Registry, SchemaError

STX = 0xFE
OVERHEAD = 8


class DecodeError(ValueError):
    pass


def pack_payload(schema: MessageSchema, values: dict) -> bytes:
    """Encode a field-name -> value dict into payload bytes."""
    flat = []
    for f in schema.fields:
        try:
            v = values[f.name]
        except KeyError:
            raise DecodeError(f"{schema.name}: missing field {f.name}") from None
        if f.count == 1:
            flat.append(v)
        else:
            items = list(v)
            if len(items) != f.count:
                raise DecodeError(
                    f"{schema.name}.{f.name}: expected {f.count} elements, got {len(items)}")
            flat.extend(items)
    try:
        return schema._struct.pack(*flat)
    except Exception as exc:
        raise DecodeError(f"{schema.name}: {exc}") from exc


def unpack_payload(schema: MessageSchema, payload: bytes) -> dict:
    """Decode payload bytes back into a field dict (inverse of pack_payload)."""
    if len(payload) != schema.payload_len:
        raise DecodeError(
            f"{schema.name}: payload length {len(payload)} != {schema.payload_len}")
    flat = schema._struct.unpack(payload)
    values = {}
    i = 0
    for f in schema.fields:
        if f.count == 1:
            values[f.name] = flat[i]
            i += 1
        else:
            values[f.name] = tuple(flat[i:i + f.count])
            i += f.count
    return values


@dataclass
class LinkStats:
    frames_ok: int = 0
    frames_bad_crc: int = 0
    frames_dropped: int = 0  # sum of sequence-gap sizes, not gap events
    bytes_seen: int = 0


@dataclass(frozen=True)
class DecodedFrame:
    seq: int
    sys_id: int
    comp_id: int
    msg_id: int
    payload: bytes
    raw: bytes

    def values(self, registry: Registry) -> dict:
        return unpack_payload(registry.schema(self.msg_id), self.payload)


def frame_bytes(schema: MessageSchema, payload: bytes, seq: int,
                sys_id: int, comp_id: int) -> bytes:
    head = bytes((STX, len(payload), seq & 0xFF, sys_id & 0xFF,
                  comp_id & 0xFF, schema.msg_id))
    crc = crc16(head[1:] + payload)
    crc = crc16(bytes((schema.crc_extra,)), crc)
    return head + payload + crc.to_bytes(2, "little")


class FrameEncoder:
    """Stamps one component's outgoing frames with a wrapping sequence."""

    def __init__(self, registry: Registry, sys_id: int = 1, comp_id: int = 1):
        self.registry = registry
        self.sys_id = sys_id
        self.comp_id = comp_id
        self._seq = 0

    def encode(self, message, values: dict) -> bytes:
        schema = self.registry.schema(message)
        payload = pack_payload(schema, values)
        raw = frame_bytes(schema, payload, self._seq, self.sys_id, self.comp_id)
        self._seq = (self._seq + 1) & 0xFF
        return raw


class FrameDecoder:
    """Incremental stream decoder with resynchronization on stx.

    A candidate frame that fails its CRC advances the scan by a single byte,
    so valid frames fully contained in the fed bytes are never lost to
    leading garbage. A candidate still waiting for bytes parks the scan;
    call flush() at end-of-stream to resolve such a tail.
    """

    def __init__(self, registry: Registry):
        self.registry = registry
        self.stats = LinkStats()
        self._buf = bytearray()
        self._last_seq = {}  # (sys_id, comp_id) -> last seq seen

    def feed(self, data: bytes) -> list:
        self.stats.bytes_seen += len(data)
        self._buf.extend(data)
        return self._scan(final=False)

    def flush(self) -> list:
        """Resolve any parked tail: no more bytes are coming."""
        frames = self._scan(final=True)
        self._buf.clear()
        return frames

    def _scan(self, final: bool) -> list:
        frames = []
        buf = self._buf
        pos = 0
        while True:
            start = buf.find(STX, pos)
            if start < 0:
                pos = len(buf)
                break
            if len(buf) - start < 2:
                pos = start
                if final:
                    pos = len(buf)
                break
            end = start + OVERHEAD + buf[start + 1]
            if end > len(buf):
                # possibly an in-flight frame; wait unless the stream ended
                if final:
                    pos = start + 1
                    continue
                pos = start
                break
            frame = self._validate(bytes(buf[start:end]))
            if frame is None:
                self.stats.frames_bad_crc += 1
                pos = start + 1
            else:
                self._account(frame)
                frames.append(frame)
                pos = end
        del buf[:pos]
        return frames

    def _validate(self, raw: bytes):
        msg_id = raw[5]
        if msg_id not in self.registry.by_id:
            return None
        schema = self.registry.by_id[msg_id]
        if schema.payload_len != raw[1]:
            return None
        crc = crc16(raw[1:-2])
        crc = crc16(bytes((schema.crc_extra,)), crc)
        if crc != int.from_bytes(raw[-2:], "little"):
            return None
        return DecodedFrame(seq=raw[2], sys_id=raw[3], comp_id=raw[4],
                            msg_id=msg_id, payload=raw[6:-2], raw=raw)

    def _account(self, frame: DecodedFrame) -> None:
        self.stats.frames_ok += 1
        key = (frame.sys_id, frame.comp_id)
        last = self._last_seq.get(key)
        if last is not None:
            self.stats.frames_dropped += (frame.seq - last - 1) & 0xFF
        self._last_seq[key] = frame.seq
