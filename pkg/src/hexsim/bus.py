"""Brokerless topic bus, latest-frame image hub and impaired-link bridging.

There is no broker: a Bus is passive shared state (like a multicast group),
publishers write straight into subscriber queues, and any node can vanish
without affecting traffic among the others. Handlers never run on the
publisher's context; subscribers pull with poll(). The image hub is a
single-writer / multi-reader latest-wins slot per camera with atomic
(frame, seq) replacement, so readers can never observe a torn frame.
"""

import math
import struct
import threading
from collections import deque
from dataclasses import dataclass, field

from .wire.framing import FrameDecoder


@dataclass(frozen=True)
class Envelope:
    topic: str
    publisher_node: str
    seq: int  # strictly increasing per (publisher, topic)
    payload: object  # bytes on any wire transport; arbitrary in-process
    timestamp_us: int


class Subscription:
    """One subscriber's bounded inbox for a topic (oldest dropped on overflow)."""

    def __init__(self, bus, node_name: str, topic: str, handler=None, maxlen: int = 512):
        self._bus = bus
        self.node_name = node_name
        self.topic = topic
        self.handler = handler
        self.maxlen = maxlen
        self.queue = deque()
        self.overflow_count = 0
        self.closed = False

    def _offer(self, envelope: Envelope) -> None:
        if len(self.queue) >= self.maxlen:
            self.queue.popleft()
            self.overflow_count += 1
        self.queue.append(envelope)

    def poll(self, max_messages=None) -> list:
        """Drain pending envelopes on the caller's context, running the handler."""
        out = []
        while self.queue and (max_messages is None or len(out) < max_messages):
            env = self.queue.popleft()
            if self.handler is not None:
                self.handler(env)
            out.append(env)
        return out

    def close(self) -> None:
        self.closed = True
        self._bus._detach(self)


class Node:
    """A named participant: publishes and subscribes on one bus."""

    def __init__(self, bus, name: str):
        self._bus = bus
        self.name = name
        self._seq = {}
        self._subs = []
        self.closed = False

    def publish(self, topic: str, payload, timestamp_us: int = 0) -> Envelope:
        if self.closed:
            raise RuntimeError(f"node {self.name} is closed")
        seq = self._seq.get(topic, 0)
        self._seq[topic] = seq + 1
        env = Envelope(topic, self.name, seq, payload, timestamp_us)
        self._bus._deliver(env)
        return env

    def subscribe(self, topic: str, handler=None, maxlen: int = 512) -> Subscription:
        if self.closed:
            raise RuntimeError(f"node {self.name} is closed")
        sub = Subscription(self._bus, self.name, topic, handler, maxlen)
        self._bus._attach(sub)
        self._subs.append(sub)
        return sub

    def close(self) -> None:
        """Leave the bus; other nodes keep running."""
        self.closed = True
        for sub in self._subs:
            if not sub.closed:
                sub.close()
        self._subs.clear()


class Bus:
    """Topic routing table shared by in-process nodes. Not a process."""

    def __init__(self):
        self._lock = threading.Lock()
        self._subs = {}  # topic -> tuple of Subscription (replaced on change)

    def node(self, name: str) -> Node:
        return Node(self, name)

    def _attach(self, sub: Subscription) -> None:
        with self._lock:
            current = self._subs.get(sub.topic, ())
            self._subs[sub.topic] = current + (sub,)

    def _detach(self, sub: Subscription) -> None:
        with self._lock:
            current = self._subs.get(sub.topic, ())
            self._subs[sub.topic] = tuple(s for s in current if s is not sub)

    def _deliver(self, env: Envelope) -> None:
        for sub in self._subs.get(env.topic, ()):
            if not sub.closed:
                sub._offer(env)

    def subscriber_count(self, topic: str) -> int:
        return len(self._subs.get(topic, ()))


class ImageHub:
    """Latest-wins frame store; readers are wait-free and never see torn data."""

    def __init__(self):
        self._slots = {}  # camera -> (frame, seq); replaced atomically
        self._writers = {}
        self._lock = threading.Lock()

    def put(self, camera: str, frame, writer: str = "default") -> int:
        owner = self._writers.get(camera)
        if owner is None:
            with self._lock:
                owner = self._writers.setdefault(camera, writer)
        if owner != writer:
            raise RuntimeError(f"camera {camera!r} already owned by writer {owner!r}")
        slot = self._slots.get(camera)
        seq = 0 if slot is None else slot[1] + 1
        self._slots[camera] = (frame, seq)  # single reference swap: no torn reads
        return seq

    def get_latest(self, camera: str):
        """(frame, seq) of the newest complete frame, or None before first put."""
        return self._slots.get(camera)


@dataclass(frozen=True)
class LinkConfig:
    kind: str = "in-process"  # in-process | datagram | stream
    drop_rate: float = 0.0
    latency_ms: float = 0.0
    jitter_ms: float = 0.0
    bandwidth_limit_bps: float = math.inf

    def __post_init__(self):
        if not 0.0 <= self.drop_rate <= 1.0:
            raise ValueError("drop_rate must be in [0, 1]")
        if self.latency_ms < 0.0 or self.jitter_ms < 0.0:
            raise ValueError("latency and jitter must be >= 0")
        if self.kind not in ("in-process", "datagram", "stream"):
            raise ValueError(f"unknown link kind {self.kind!r}")


class ImpairedLink:
    """Unidirectional frame pipe with seeded drop/latency/jitter.

    Time is the caller's virtual clock (microseconds), so impairments are
    bit-reproducible under a fixed seed.
    """

    def __init__(self, config: LinkConfig, rng, name: str = "link"):
        self.config = config
        self.name = name
        self._rng = rng
        self._pending = deque()  # (deliver_at_us, frame)
        self._busy_until_us = 0
        self.sent = 0
        self.dropped = 0

    def configure(self, config: LinkConfig) -> None:
        self.config = config

    def send(self, frame: bytes, now_us: int) -> None:
        self.sent += 1
        cfg = self.config
        if cfg.drop_rate > 0.0 and self._rng.random() < cfg.drop_rate:
            self.dropped += 1
            return
        serialize_us = 0.0
        if math.isfinite(cfg.bandwidth_limit_bps) and cfg.bandwidth_limit_bps > 0:
            serialize_us = len(frame) * 8e6 / cfg.bandwidth_limit_bps
        start = max(now_us, self._busy_until_us)
        self._busy_until_us = start + serialize_us
        jitter_us = cfg.jitter_ms * 1000.0 * self._rng.random() if cfg.jitter_ms else 0.0
        deliver_at = self._busy_until_us + cfg.latency_ms * 1000.0 + jitter_us
        self._pending.append((deliver_at, frame))

    def poll(self, now_us: int) -> list:
        """Frames whose delivery time has arrived, in send order."""
        out = []
        while self._pending and self._pending[0][0] <= now_us:
            out.append(self._pending.popleft()[1])
        return out


def configure_link(link: ImpairedLink, config: LinkConfig) -> None:
    link.configure(config)


class Bridge:
    """Routes protocol frames between redundant links and the local bus.

    Frames arriving on any attached link are deduplicated by
    (sys_id, comp_id, seq) over a sliding window and republished on
    `topic_rx`; envelopes on `topic_tx` go out over every link.
    """

    def __init__(self, node: Node, links, registry, dedup_window: int = 64,
                 topic_rx: str = "wire/rx", topic_tx: str = "wire/tx"):
        if not links:
            raise ValueError("bridge needs at least one link")
        self.node = node
        self.links = list(links)
        self.dedup_window = dedup_window
        self.topic_rx = topic_rx
        self._decoders = [FrameDecoder(registry) for _ in self.links]
        self._recent = {}  # (sys,comp) -> (deque of seqs, set of seqs)
        self._tx_sub = node.subscribe(topic_tx)
        self.forwarded = 0
        self.duplicates = 0
        self.malformed = 0

    def pump(self, now_us: int) -> int:
        """Move due frames link->bus and pending envelopes bus->links."""
        moved = 0
        for link, decoder in zip(self.links, self._decoders):
            for raw in link.poll(now_us):
                before_bad = decoder.stats.frames_bad_crc
                for frame in decoder.feed(raw):
                    if self._is_duplicate(frame):
                        self.duplicates += 1
                        continue
                    self.node.publish(self.topic_rx, frame.raw, timestamp_us=now_us)
                    self.forwarded += 1
                    moved += 1
                self.malformed += decoder.stats.frames_bad_crc - before_bad
        for env in self._tx_sub.poll():
            for link in self.links:
                link.send(env.payload, now_us)
            moved += 1
        return moved

    def _is_duplicate(self, frame) -> bool:
        key = (frame.sys_id, frame.comp_id)
        entry = self._recent.get(key)
        if entry is None:
            entry = (deque(maxlen=self.dedup_window), set())
            self._recent[key] = entry
        order, seen = entry
        if frame.seq in seen:
            return True
        if len(order) == order.maxlen:
            seen.discard(order[0])
        order.append(frame.seq)
        seen.add(frame.seq)
        return False

    def close(self) -> None:
        self._tx_sub.close()


# Envelope wire form for the datagram transport:
#   u16 topic_len, topic utf-8, u16 node_len, node utf-8,
#   u32 seq, u64 timestamp_us, u32 payload_len, payload
_HDR = struct.Struct("<H")


def encode_envelope(env: Envelope) -> bytes:
    topic = env.topic.encode("utf-8")
    node = env.publisher_node.encode("utf-8")
    if not isinstance(env.payload, (bytes, bytearray)):
        raise TypeError("datagram transport requires bytes payloads")
    return b"".join([
        _HDR.pack(len(topic)), topic,
        _HDR.pack(len(node)), node,
        struct.pack("<IQI", env.seq, env.timestamp_us, len(env.payload)),
        bytes(env.payload),
    ])


def decode_envelope(data: bytes) -> Envelope:
    off = 0
    (tlen,) = _HDR.unpack_from(data, off)
    off += 2
    topic = data[off:off + tlen].decode("utf-8")
    off += tlen
    (nlen,) = _HDR.unpack_from(data, off)
    off += 2
    node = data[off:off + nlen].decode("utf-8")
    off += nlen
    seq, ts, plen = struct.unpack_from("<IQI", data, off)
    off += 16
    payload = data[off:off + plen]
    if len(payload) != plen:
        raise ValueError("short envelope payload")
    return Envelope(topic, node, seq, payload, ts)


class DatagramPeer:
    """UDP loopback transport: each peer owns a socket, sends to all others.

    Exists for multi-process demos; the deterministic in-process bus is the
    default everywhere tests need reproducibility.
    """

    def __init__(self, bus: Bus, name: str, bind: tuple, peers):
        import socket

        self.node = bus.node(name)
        self.peers = list(peers)
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self._sock.bind(bind)
        self._sock.setblocking(False)

    def publish(self, topic: str, payload: bytes, timestamp_us: int = 0) -> None:
        env = self.node.publish(topic, payload, timestamp_us)
        data = encode_envelope(env)
        for peer in self.peers:
            self._sock.sendto(data, peer)

    def pump(self) -> list:
        """Receive pending datagrams onto the local bus."""
        out = []
        while True:
            try:
                data, _ = self._sock.recvfrom(65535)
            except BlockingIOError:
                break
            env = decode_envelope(data)
            self.node._bus._deliver(env)
            out.append(env)
        return out

    def close(self) -> None:
        self._sock.close()
        self.node.close()
