"""Pose frame wire protocol and a TCP broadcast server with per-subscriber queues.

Wire frame, byte-exact, little-endian throughout:

  offset 0   magic ``POSE``           (4 bytes)
  offset 4   version, 0x01            (1 byte)
  offset 5   seq                      (u32)
  offset 9   timestamp_us             (u64)
  offset 17  joint_count, 24          (1 byte)
  offset 18  24 x (x, y, z, confidence) as f32  (384 bytes)

Total 402 bytes, no length prefix: frames are constant-size, so a reader
pulling 402-byte chunks off the stream never sees a torn frame.

The server fans every frame out to all connected subscribers through bounded
per-subscriber queues; a subscriber that falls more than the queue depth
behind is disconnected instead of being allowed to stall the producer.
"""

from __future__ import annotations

import logging
import socket
import struct
import threading
import time
from dataclasses import dataclass, field
from queue import Full, Queue
from typing import Iterable, Iterator

import numpy as np

from .skeleton import JOINT_COUNT

log = logging.getLogger(__name__)

MAGIC = b"POSE"
VERSION = 1
_HEADER = struct.Struct("<4sBIQB")  # magic, version, seq, timestamp_us, joint_count
FRAME_SIZE = _HEADER.size + JOINT_COUNT * 4 * 4  # 402

DEFAULT_QUEUE_DEPTH = 64


class WireFormatError(Exception):
    """Base class for malformed wire frames."""


class BadMagicError(WireFormatError):
    pass


class BadVersionError(WireFormatError):
    pass


class BadJointCountError(WireFormatError):
    pass


class ShortReadError(WireFormatError):
    pass


@dataclass
class PoseFrame:
    """One timestamped pose: 24 joints as rows of (x, y, z, confidence)."""

    seq: int
    timestamp_us: int
    joints: np.ndarray  # (24, 4) float

    def positions(self) -> np.ndarray:
        return np.asarray(self.joints, dtype=np.float64)[:, :3]


def encode_frame(frame: PoseFrame) -> bytes:
    """Pack a frame into its fixed 402-byte wire form (reals become f32)."""
    joints = np.ascontiguousarray(frame.joints, dtype="<f4")
    if joints.shape != (JOINT_COUNT, 4):
        raise ValueError(f"joints shape {joints.shape}, expected ({JOINT_COUNT}, 4)")
    if not 0 <= frame.seq < 2**32:
        raise ValueError(f"seq {frame.seq} outside u32 range")
    if not 0 <= frame.timestamp_us < 2**64:
        raise ValueError(f"timestamp_us {frame.timestamp_us} outside u64 range")
    return _HEADER.pack(MAGIC, VERSION, frame.seq, frame.timestamp_us, JOINT_COUNT) + joints.tobytes()


def decode_frame(data: bytes) -> PoseFrame:
    """Inverse of encode_frame; validates magic, version, and joint count."""
    if len(data) < FRAME_SIZE:
        raise ShortReadError(f"need {FRAME_SIZE} bytes, got {len(data)}")
    magic, version, seq, timestamp_us, joint_count = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise BadVersionError(f"unsupported version {version}, expected {VERSION}")
    if joint_count != JOINT_COUNT:
        raise BadJointCountError(f"joint count {joint_count}, expected {JOINT_COUNT}")
    joints = (
        np.frombuffer(data, dtype="<f4", count=JOINT_COUNT * 4, offset=_HEADER.size)
        .reshape(JOINT_COUNT, 4)
        .copy()
    )
    return PoseFrame(seq=seq, timestamp_us=timestamp_us, joints=joints)


def read_frames(sock: socket.socket) -> Iterator[PoseFrame]:
    """Yield decoded frames from a connected socket until EOF."""
    while True:
        buf = bytearray()
        while len(buf) < FRAME_SIZE:
            chunk = sock.recv(FRAME_SIZE - len(buf))
            if not chunk:
                if buf:
                    raise ShortReadError(f"connection closed mid-frame ({len(buf)} bytes)")
                return
            buf.extend(chunk)
        yield decode_frame(bytes(buf))


@dataclass
class _Subscriber:
    sock: socket.socket
    peer: str
    queue: Queue
    thread: threading.Thread | None = None
    dead: bool = False


class PoseStreamServer:
    """Broadcasts encoded frames to any number of TCP subscribers.

    Each subscriber gets a bounded queue drained by its own writer thread, so
    one slow or stalled connection never delays the others: when a queue
    overflows, that subscriber is dropped.
    """

    def __init__(
        self,
        host: str = "127.0.0.1",
        port: int = 0,
        queue_depth: int = DEFAULT_QUEUE_DEPTH,
        sndbuf: int | None = None,
    ) -> None:
        self._host = host
        self._port = port
        self._queue_depth = queue_depth
        self._sndbuf = sndbuf
        self._listener: socket.socket | None = None
        self._accept_thread: threading.Thread | None = None
        self._subs: list[_Subscriber] = []
        self._lock = threading.Lock()
        self._closing = False
        self.frames_sent = 0
        self.subscribers_dropped = 0

    def start(self) -> None:
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        listener.bind((self._host, self._port))
        listener.listen()
        self._listener = listener
        self._accept_thread = threading.Thread(
            target=self._accept_loop, name="posewire-accept", daemon=True
        )
        self._accept_thread.start()
        log.info("streaming on %s:%d", *self.address)

    @property
    def address(self) -> tuple[str, int]:
        assert self._listener is not None, "server not started"
        addr = self._listener.getsockname()
        return addr[0], addr[1]

    @property
    def subscriber_count(self) -> int:
        with self._lock:
            return sum(1 for s in self._subs if not s.dead)

    def _accept_loop(self) -> None:
        assert self._listener is not None
        while True:
            try:
                conn, addr = self._listener.accept()
            except OSError:
                return  # listener closed
            conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            if self._sndbuf is not None:
                conn.setsockopt(socket.SOL_SOCKET, socket.SO_SNDBUF, self._sndbuf)
            sub = _Subscriber(sock=conn, peer=f"{addr[0]}:{addr[1]}", queue=Queue(self._queue_depth))
            sub.thread = threading.Thread(
                target=self._writer_loop, args=(sub,), name=f"posewire-sub-{sub.peer}", daemon=True
            )
            with self._lock:
                if self._closing:
                    conn.close()
                    return
                self._subs.append(sub)
            sub.thread.start()
            log.info("subscriber connected: %s", sub.peer)

    def _writer_loop(self, sub: _Subscriber) -> None:
        try:
            while True:
                item = sub.queue.get()
                if item is None:
                    break
                sub.sock.sendall(item)
        except OSError as exc:
            log.info("subscriber %s write failed: %s", sub.peer, exc)
        finally:
            sub.dead = True
            try:
                sub.sock.close()
            except OSError:
                pass
            with self._lock:
                if sub in self._subs:
                    self._subs.remove(sub)

    def _drop(self, sub: _Subscriber) -> None:
        sub.dead = True
        self.subscribers_dropped += 1
        log.warning("dropping slow subscriber %s (queue overflow)", sub.peer)
        # Closing the socket aborts a writer blocked in sendall.
        try:
            sub.sock.close()
        except OSError:
            pass

    def broadcast(self, frame: PoseFrame) -> None:
        """Enqueue one frame for every live subscriber; never blocks."""
        data = encode_frame(frame)
        with self._lock:
            subs = list(self._subs)
        for sub in subs:
            if sub.dead:
                continue
            try:
                sub.queue.put_nowait(data)
            except Full:
                self._drop(sub)
        self.frames_sent += 1

    def close(self, drain: bool = True) -> None:
        """Stop accepting, flush queued frames to live subscribers, disconnect."""
        with self._lock:
            self._closing = True
            subs = list(self._subs)
        if self._listener is not None:
            self._listener.close()
        for sub in subs:
            if drain and not sub.dead:
                try:
                    sub.queue.put_nowait(None)
                    continue
                except Full:
                    pass
            sub.dead = True
            try:
                sub.sock.close()
            except OSError:
                pass
        for sub in subs:
            if sub.thread is not None:
                sub.thread.join(timeout=5.0)


def serve(
    host: str,
    port: int,
    frames: Iterable[PoseFrame],
    fps: float = 30.0,
    server: PoseStreamServer | None = None,
) -> PoseStreamServer:
    """Broadcast a frame source until it ends, pacing at ``fps`` (0 = unpaced).

    Timestamps are stamped from a monotonic clock at emission, microseconds
    since the stream started. Returns the (closed) server for its counters.
    """
    if server is None:
        server = PoseStreamServer(host=host, port=port)
    server.start()
    period = 1.0 / fps if fps > 0 else 0.0
    start = time.perf_counter()
    try:
        for i, frame in enumerate(frames):
            if period:
                target = start + i * period
                delay = target - time.perf_counter()
                if delay > 0:
                    time.sleep(delay)
            frame.timestamp_us = int((time.perf_counter() - start) * 1e6)
            server.broadcast(frame)
    finally:
        server.close()
    return server
