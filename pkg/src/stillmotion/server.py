"""TCP batch streaming: length-prefixed binary protocol, version 1.

All integers little-endian.  On connect the server sends

    HELLO: magic "MOSI" + version u8                     (5 bytes)

and the client replies with one request at a time:

    REQ:   batches u32 + epoch u32                       (8 bytes)

The server answers each REQ with `batches` BATCH messages followed by
END.  Messages start with a type byte:

    BATCH (0x01): sample_count u16, N u16, L u16, channels u8,
                  then per sample: label_index u8, meta_len u16,
                  meta (manifest-record JSON bytes),
                  payload (N*L*L*channels raw frame bytes)
    END   (0x02)
    ERR   (0xEE): code u8, msg_len u16, message utf-8

After END the client may send another REQ or close.  Each connection
owns an independent source cursor starting at 0, so sessions never
perturb each other; live mode derives sample seeds from (server seed,
cursor, epoch) exactly like the offline generator, replay mode cycles
the stored dataset's same-batch groups in manifest order.
"""

from __future__ import annotations

import json
import socket
import socketserver
import struct
import threading
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .config import GenConfig
from .dataset_io import (
    enumerate_sources,
    load_frames,
    read_manifest,
    record_to_json,
    sample_record,
)
from .errors import ProtocolError
from .labels import build_label_pool
from .pipeline import batch_for_source

PROTO_MAGIC = b"MOSI"
PROTO_VERSION = 1
MSG_BATCH = 0x01
MSG_END = 0x02
MSG_ERR = 0xEE

ERR_BAD_REQUEST = 1
ERR_INTERNAL = 2

_HELLO = struct.Struct("<4sB")
_REQ = struct.Struct("<II")
_BATCH_HEADER = struct.Struct("<BHHHB")  # type, sample_count, N, L, channels
_SAMPLE_HEADER = struct.Struct("<BH")  # label_index, meta_len
_ERR_HEADER = struct.Struct("<BBH")  # type, code, msg_len


@dataclass
class WireSample:
    label_index: int
    meta: bytes
    payload: bytes


@dataclass
class WireBatch:
    N: int
    L: int
    channels: int
    samples: list[WireSample]


class ReplayProducer:
    """Serves a stored dataset's batches, cycling in manifest order."""

    def __init__(self, manifest_path: str | Path):
        manifest_path = Path(manifest_path)
        self.base = manifest_path.parent
        records = sorted(read_manifest(manifest_path), key=lambda r: r["sample_id"])
        groups: dict[tuple[int, int], list[dict]] = {}
        for rec in records:
            groups.setdefault((rec["epoch"], rec["source_index"]), []).append(rec)
        self.groups = [groups[k] for k in sorted(groups)]
        if not self.groups:
            raise ProtocolError("replay manifest holds no samples")
        first = self.groups[0][0]
        self.shape = (first["N"], first["L"], 3)

    def get_batch(self, cursor: int, epoch: int) -> WireBatch:
        group = self.groups[cursor % len(self.groups)]
        samples = []
        for rec in group:
            frames = load_frames(rec, self.base)
            samples.append(
                WireSample(
                    label_index=rec["label_index"],
                    meta=record_to_json(rec).encode("utf-8"),
                    payload=np.ascontiguousarray(frames).tobytes(),
                )
            )
        n, L, c = self.shape
        return WireBatch(N=n, L=L, channels=c, samples=samples)


class LiveProducer:
    """Generates same-batch groups on the fly from a source directory."""

    def __init__(self, config: GenConfig, input_dir: str | Path):
        self.config = config.validate()
        self.refs = enumerate_sources(input_dir, config.input_mode, config.epoch, config.seed)
        self.pool = build_label_pool(config.k, config.axis)

    def get_batch(self, cursor: int, epoch: int) -> WireBatch:
        config = replace(self.config, epoch=int(epoch))
        ref = self.refs[cursor % len(self.refs)]
        batch = batch_for_source(config, ref, pool=self.pool, source_index=cursor)
        samples = [
            WireSample(
                label_index=s.label_index,
                meta=record_to_json(sample_record(s, config)).encode("utf-8"),
                payload=np.ascontiguousarray(s.frames).tobytes(),
            )
            for s in batch
        ]
        return WireBatch(N=config.frames, L=config.crop, channels=3, samples=samples)


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            raise ProtocolError(f"connection closed after {len(buf)} of {n} bytes")
        buf.extend(chunk)
    return bytes(buf)


def _encode_batch(batch: WireBatch) -> bytes:
    parts = [
        _BATCH_HEADER.pack(MSG_BATCH, len(batch.samples), batch.N, batch.L, batch.channels)
    ]
    for s in batch.samples:
        if len(s.meta) > 0xFFFF:
            raise ProtocolError(f"sample metadata too large for wire format: {len(s.meta)}")
        parts.append(_SAMPLE_HEADER.pack(s.label_index, len(s.meta)))
        parts.append(s.meta)
        parts.append(s.payload)
    return b"".join(parts)


def _encode_err(code: int, message: str) -> bytes:
    msg = message.encode("utf-8")[:0xFFFF]
    return _ERR_HEADER.pack(MSG_ERR, code, len(msg)) + msg


class _Handler(socketserver.BaseRequestHandler):
    def handle(self):
        server: StreamServer = self.server.owner  # type: ignore[attr-defined]
        with server.slots:
            sock = self.request
            sock.settimeout(server.io_timeout)
            sock.sendall(_HELLO.pack(PROTO_MAGIC, server.version))
            cursor = 0
            while True:
                try:
                    raw = _recv_exact(sock, _REQ.size)
                except ProtocolError as exc:
                    if "closed after 0" not in str(exc):
                        try:
                            sock.sendall(_encode_err(ERR_BAD_REQUEST, f"malformed request: {exc}"))
                        except OSError:
                            pass
                    return
                except OSError:
                    return
                batches, epoch = _REQ.unpack(raw)
                try:
                    for _ in range(batches):
                        batch = server.producer.get_batch(cursor, epoch)
                        cursor += 1
                        sock.sendall(_encode_batch(batch))
                    sock.sendall(struct.pack("<B", MSG_END))
                except OSError:
                    return  # client went away mid-stream; session state is local
                except Exception as exc:  # producer failure
                    try:
                        sock.sendall(_encode_err(ERR_INTERNAL, str(exc)))
                    except OSError:
                        pass
                    return


class _TCPServer(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True


class StreamServer:
    """Threaded batch server; one independent session per connection."""

    def __init__(
        self,
        producer,
        host: str = "127.0.0.1",
        port: int = 0,
        concurrency: int = 8,
        version: int = PROTO_VERSION,
        io_timeout: float = 300.0,
    ):
        self.producer = producer
        self.version = version
        self.io_timeout = io_timeout
        self.slots = threading.Semaphore(max(1, concurrency))
        self._tcp = _TCPServer((host, port), _Handler)
        self._tcp.owner = self  # type: ignore[attr-defined]
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        return self._tcp.server_address[:2]

    def start(self) -> "StreamServer":
        self._thread = threading.Thread(target=self._tcp.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._tcp.shutdown()
        self._tcp.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def serve_forever(self) -> None:
        self._tcp.serve_forever()


def make_producer(
    replay_manifest: str | Path | None = None,
    config: GenConfig | None = None,
    input_dir: str | Path | None = None,
):
    if replay_manifest is not None:
        return ReplayProducer(replay_manifest)
    if config is None or input_dir is None:
        raise ProtocolError("live mode needs a config and a source directory")
    return LiveProducer(config, input_dir)


# ---------------------------------------------------------------------------
# Reference client.


@dataclass
class DecodedSample:
    label_index: int
    meta: dict
    frames: np.ndarray


@dataclass
class DecodedBatch:
    N: int
    L: int
    channels: int
    samples: list[DecodedSample]


def client_fetch(
    address: tuple[str, int],
    batches: int,
    epoch: int = 0,
    timeout: float = 60.0,
    expect_version: int = PROTO_VERSION,
    delay_per_batch: float = 0.0,
) -> list[DecodedBatch]:
    """Request `batches` same-batch groups and decode them.

    `delay_per_batch` sleeps between batch reads (used to exercise
    slow-reader behavior in tests).
    """
    import time as _time

    with socket.create_connection(address, timeout=timeout) as sock:
        hello = _recv_exact(sock, _HELLO.size)
        magic, version = _HELLO.unpack(hello)
        if magic != PROTO_MAGIC:
            raise ProtocolError(f"bad server magic {magic!r}")
        if version != expect_version:
            raise ProtocolError(f"protocol version mismatch: server {version}, client {expect_version}")
        sock.sendall(_REQ.pack(batches, epoch))

        out: list[DecodedBatch] = []
        shape: tuple[int, int, int] | None = None
        while True:
            mtype = _recv_exact(sock, 1)[0]
            if mtype == MSG_END:
                break
            if mtype == MSG_ERR:
                code, msg_len = struct.unpack("<BH", _recv_exact(sock, 3))
                msg = _recv_exact(sock, msg_len).decode("utf-8", "replace")
                raise ProtocolError(f"server error {code}: {msg}")
            if mtype != MSG_BATCH:
                raise ProtocolError(f"unexpected message type 0x{mtype:02x}")
            count, n, L, channels = struct.unpack("<HHHB", _recv_exact(sock, 7))
            if shape is None:
                shape = (n, L, channels)
            elif shape != (n, L, channels):
                raise ProtocolError(f"batch shape changed mid-session: {shape} -> {(n, L, channels)}")
            payload_len = n * L * L * channels
            samples = []
            for _ in range(count):
                label_index, meta_len = _SAMPLE_HEADER.unpack(_recv_exact(sock, _SAMPLE_HEADER.size))
                meta = json.loads(_recv_exact(sock, meta_len).decode("utf-8"))
                payload = _recv_exact(sock, payload_len)
                frames = np.frombuffer(payload, dtype=np.uint8).reshape(n, L, L, channels)
                samples.append(DecodedSample(label_index=label_index, meta=meta, frames=frames))
            out.append(DecodedBatch(N=n, L=L, channels=channels, samples=samples))
            if delay_per_batch:
                _time.sleep(delay_per_batch)
        if len(out) != batches:
            raise ProtocolError(f"expected {batches} batches, got {len(out)}")
        return out
