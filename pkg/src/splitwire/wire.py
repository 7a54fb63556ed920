"""Two-process split inference over a reliable stream transport.

Frame layout (integers little-endian, floats IEEE-754 binary32/64 LE):

    magic "SWFR" | version u8 | msg_type u8 | model_fingerprint 8B |
    split_id u8 | n_c u32 | dtype u8 | seed u64 | payload_len u32 |
    payload | crc32 u32 over header+payload

Message types: FEATURES=1 (semantic payload), LABEL=2 (class index u32 +
receiver seconds f64 + crc32 of the noisy vector's f32 bytes), ERROR=3
(code u16 + UTF-8 text), HELLO=4 (handshake; empty payload). The channel is
reliable transport; AWGN is simulated at the receiver from the frame's
noise seed (seed 0 delegates to receiver entropy). One request is in flight
per connection.
"""

from __future__ import annotations

import secrets
import socket
import socketserver
import struct
import threading
import time
import zlib
from dataclasses import dataclass

import numpy as np

from .accounting import count_flops
from .channel import (
    ChannelProfile,
    FeatureVector,
    awgn,
    decode_payload,
    encode_payload,
    payload_bits,
    sigma_from_snr,
)
from .cost import CostReport, DeviceProfile, total_task_time
from .engine import argmax_label, run_graph
from .graph import SplitModel

MAGIC = b"SWFR"
VERSION = 1
MSG_FEATURES, MSG_LABEL, MSG_ERROR, MSG_HELLO = 1, 2, 3, 4
DTYPE_CODES = {"f32": 0, "u8": 1}
DTYPE_NAMES = {0: "f32", 1: "u8"}

_HEADER = struct.Struct("<4sBB8sBIBQI")
_CRC = struct.Struct("<I")
_LABEL = struct.Struct("<IdI")
_ERROR_CODE = struct.Struct("<H")
_SP6_PAYLOAD = struct.Struct("<H")

HEADER_OVERHEAD_BITS = (_HEADER.size + _CRC.size) * 8  # constant per frame
MAX_PAYLOAD = 1 << 24

ERR_MODEL_MISMATCH = 1
ERR_SPLIT_MISMATCH = 2
ERR_BAD_PAYLOAD = 3
ERR_INTERNAL = 4
ERR_UNEXPECTED_TYPE = 5


class FrameError(ValueError):
    """Malformed frame; .code is a stable short string."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


class ProtocolError(RuntimeError):
    """Peer replied with an ERROR frame; .code is the wire error code."""

    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


@dataclass(frozen=True)
class Frame:
    msg_type: int
    fingerprint: bytes = b"\x00" * 8
    split_id: int = 0
    n_c: int = 1
    dtype: int = 0
    seed: int = 0
    payload: bytes = b""
    version: int = VERSION


def _expected_features_len(split_id: int, n_c: int, dtype: int) -> int:
    if split_id == 6:
        return _SP6_PAYLOAD.size
    return 4 * n_c if dtype == 0 else n_c + 8


def encode_frame(frame: Frame) -> bytes:
    if len(frame.fingerprint) != 8:
        raise FrameError("bad-field", "fingerprint must be 8 bytes")
    header = _HEADER.pack(
        MAGIC,
        frame.version,
        frame.msg_type,
        frame.fingerprint,
        frame.split_id,
        frame.n_c,
        frame.dtype,
        frame.seed,
        len(frame.payload),
    )
    body = header + frame.payload
    return body + _CRC.pack(zlib.crc32(body))


def _validate(frame: Frame) -> Frame:
    if frame.msg_type not in (MSG_FEATURES, MSG_LABEL, MSG_ERROR, MSG_HELLO):
        raise FrameError("bad-type", f"unknown message type {frame.msg_type}")
    if frame.split_id > 6:
        raise FrameError("bad-field", f"split_id {frame.split_id} outside SP-0..SP-6")
    if frame.dtype not in DTYPE_NAMES:
        raise FrameError("bad-field", f"unknown dtype code {frame.dtype}")
    if frame.n_c < 1:
        raise FrameError("bad-field", "n_c must be >= 1")
    if frame.msg_type == MSG_FEATURES and len(frame.payload) != _expected_features_len(
        frame.split_id, frame.n_c, frame.dtype
    ):
        raise FrameError(
            "bad-length",
            f"FEATURES payload of {len(frame.payload)} bytes inconsistent with "
            f"split {frame.split_id}, n_c {frame.n_c}, dtype {DTYPE_NAMES[frame.dtype]}",
        )
    if frame.msg_type == MSG_LABEL and len(frame.payload) != _LABEL.size:
        raise FrameError("bad-length", "LABEL payload must be 16 bytes")
    if frame.msg_type == MSG_ERROR and len(frame.payload) < _ERROR_CODE.size:
        raise FrameError("bad-length", "ERROR payload must carry a code")
    if frame.msg_type == MSG_HELLO and frame.payload:
        raise FrameError("bad-length", "HELLO payload must be empty")
    return frame


def _parse_header(header: bytes):
    magic, version, msg_type, fingerprint, split_id, n_c, dtype, seed, payload_len = _HEADER.unpack(header)
    if magic != MAGIC:
        raise FrameError("bad-magic", f"bad magic {magic!r}")
    if version != VERSION:
        raise FrameError("bad-version", f"unsupported frame version {version}")
    if payload_len > MAX_PAYLOAD:
        raise FrameError("bad-length", f"payload of {payload_len} bytes exceeds the {MAX_PAYLOAD} limit")
    return Frame(msg_type, fingerprint, split_id, n_c, dtype, seed, b"", version), payload_len


def decode_frame(data: bytes) -> Frame:
    """Inverse of encode_frame over one complete frame byte string."""
    if len(data) < _HEADER.size + _CRC.size:
        raise FrameError("truncated", f"frame of {len(data)} bytes is shorter than the fixed framing")
    frame, payload_len = _parse_header(data[: _HEADER.size])
    total = _HEADER.size + payload_len + _CRC.size
    if len(data) < total:
        raise FrameError("truncated", f"frame of {len(data)} bytes, header declares {total}")
    if len(data) > total:
        raise FrameError("bad-length", f"{len(data) - total} trailing bytes after the frame")
    body = data[: _HEADER.size + payload_len]
    (crc,) = _CRC.unpack(data[_HEADER.size + payload_len : total])
    if zlib.crc32(body) != crc:
        raise FrameError("crc-mismatch", "frame checksum does not validate")
    return _validate(
        Frame(
            frame.msg_type,
            frame.fingerprint,
            frame.split_id,
            frame.n_c,
            frame.dtype,
            frame.seed,
            data[_HEADER.size : _HEADER.size + payload_len],
            frame.version,
        )
    )


def read_frame(rfile) -> Frame:
    """Read one frame from a blocking binary stream."""
    header = rfile.read(_HEADER.size)
    if not header:
        raise EOFError("connection closed")
    if len(header) < _HEADER.size:
        raise FrameError("truncated", "short read inside the frame header")
    frame, payload_len = _parse_header(header)
    rest = rfile.read(payload_len + _CRC.size)
    if len(rest) < payload_len + _CRC.size:
        raise FrameError("truncated", "short read inside the frame payload")
    return decode_frame(header + rest)


@dataclass(frozen=True)
class SessionConfig:
    host: str = "127.0.0.1"
    port: int = 0
    snr_db: float = float("inf")  # inf = noiseless channel
    dtype: str = "f32"
    timeout: float = 10.0
    # optional latency-model inputs for the predicted CostReport
    alpha_t: float | None = None
    alpha_r: float | None = None
    rate: float | None = None

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")
        if self.dtype not in DTYPE_CODES:
            raise ValueError(f"dtype must be one of {tuple(DTYPE_CODES)}")


def receiver_pipeline(model: SplitModel, weights, payload: bytes, dtype: str, snr_db: float, seed: int):
    """Decode a payload, inject channel noise, run the decoder.

    Returns (label, noisy f32 payload bytes). SP-0 and SP-6 are degenerate
    transports (raw input / label) and see no normalization or noise. The
    exact same function backs local simulation, so equal seeds give
    bit-identical noisy vectors in both modes.
    """
    sp = model.split
    if sp.id == 6:
        (label,) = _SP6_PAYLOAD.unpack(payload)
        return int(label), payload
    vec = decode_payload(payload, dtype, model.n_c, state="raw" if sp.id == 0 else "normalized")
    if sp.id == 0:
        x = vec.values.reshape(model.boundary_shape.as_tuple())
        zhat = vec
    else:
        norm = float(np.linalg.norm(vec.values.astype(np.float64)))
        if abs(norm / np.sqrt(model.n_c) - 1.0) > 0.05:
            raise ProtocolError(ERR_BAD_PAYLOAD, f"feature vector is not normalized (norm {norm:.4f})")
        zhat = awgn(vec, sigma_from_snr(snr_db), seed)
        x = zhat.values.reshape(model.n_c, 1, 1)
    logits = run_graph(model.decoder, weights, x)
    return argmax_label(logits), zhat.values.astype("<f4").tobytes()


class FeatureServer:
    """Receiver-side runner: accepts feature frames, returns labels.

    Handles multiple connections concurrently; per-connection state is just
    the socket. Malformed frames yield typed errors (or a closed connection
    when stream framing is lost) and never take the server down.
    """

    def __init__(self, model: SplitModel, weights, config: SessionConfig):
        self.model = model
        self.weights = weights
        self.config = config
        outer = self

        class Handler(socketserver.StreamRequestHandler):
            timeout = config.timeout

            def handle(self):
                outer._serve_connection(self)

        class Server(socketserver.ThreadingTCPServer):
            allow_reuse_address = True
            daemon_threads = True

        self._server = Server((config.host, config.port), Handler)
        self._thread = None

    @property
    def address(self):
        return self._server.server_address

    def start(self):
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def serve_forever(self):
        self._server.serve_forever()

    def close(self):
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.close()

    def _reply(self, handler, frame: Frame):
        handler.wfile.write(encode_frame(frame))
        handler.wfile.flush()

    def _error(self, handler, code: int, message: str):
        payload = _ERROR_CODE.pack(code) + message.encode("utf-8")
        self._reply(handler, Frame(MSG_ERROR, self.weights.fingerprint, self.model.split.id, payload=payload))

    def _serve_connection(self, handler):
        while True:
            try:
                frame = read_frame(handler.rfile)
            except (EOFError, ConnectionError, socket.timeout, OSError):
                return
            except FrameError:
                # framing lost on the byte stream; drop the connection
                return
            try:
                if frame.msg_type == MSG_HELLO:
                    self._handle_hello(handler, frame)
                elif frame.msg_type == MSG_FEATURES:
                    self._handle_features(handler, frame)
                else:
                    self._error(handler, ERR_UNEXPECTED_TYPE, f"unexpected message type {frame.msg_type}")
            except ProtocolError as exc:
                self._error(handler, exc.code, str(exc))
            except (ConnectionError, socket.timeout, OSError):
                return
            except Exception as exc:  # never let one request kill the service
                try:
                    self._error(handler, ERR_INTERNAL, f"{type(exc).__name__}: {exc}")
                except OSError:
                    return

    def _check_compat(self, frame: Frame):
        if frame.fingerprint != self.weights.fingerprint:
            raise ProtocolError(ERR_MODEL_MISMATCH, "model mismatch: fingerprints differ")
        if frame.split_id != self.model.split.id:
            raise ProtocolError(
                ERR_SPLIT_MISMATCH, f"split mismatch: server at {self.model.split.key}, frame at SP-{frame.split_id}"
            )

    def _handle_hello(self, handler, frame: Frame):
        self._check_compat(frame)
        self._reply(
            handler,
            Frame(MSG_HELLO, self.weights.fingerprint, self.model.split.id, n_c=self.model.n_c),
        )

    def _handle_features(self, handler, frame: Frame):
        self._check_compat(frame)
        if frame.split_id != 6 and frame.n_c != self.model.n_c:
            raise ProtocolError(ERR_BAD_PAYLOAD, f"n_c mismatch: server expects {self.model.n_c}, frame has {frame.n_c}")
        seed = frame.seed if frame.seed != 0 else secrets.randbits(63) or 1
        started = time.perf_counter()
        label, zhat_bytes = receiver_pipeline(
            self.model, self.weights, frame.payload, DTYPE_NAMES[frame.dtype], self.config.snr_db, seed
        )
        elapsed = time.perf_counter() - started
        payload = _LABEL.pack(label, elapsed, zlib.crc32(zhat_bytes))
        self._reply(handler, Frame(MSG_LABEL, self.weights.fingerprint, self.model.split.id, n_c=frame.n_c, payload=payload))


def serve(model: SplitModel, weights, config: SessionConfig) -> FeatureServer:
    """Construct a receiver; call .serve_forever() (or .start() for a thread)."""
    return FeatureServer(model, weights, config)


@dataclass(frozen=True)
class TimingReport:
    encode_s: float
    roundtrip_s: float
    transfer_s: float
    server_s: float
    payload_bytes: int
    zhat_crc32: int
    predicted: CostReport | None = None

    def to_dict(self) -> dict:
        return {
            "encode_s": self.encode_s,
            "roundtrip_s": self.roundtrip_s,
            "transfer_s": self.transfer_s,
            "server_s": self.server_s,
            "payload_bytes": self.payload_bytes,
            "zhat_crc32": self.zhat_crc32,
            "predicted": self.predicted.to_dict() if self.predicted else None,
        }


def _request(sock_file_r, sock_file_w, frame: Frame) -> Frame:
    sock_file_w.write(encode_frame(frame))
    sock_file_w.flush()
    reply = read_frame(sock_file_r)
    if reply.msg_type == MSG_ERROR:
        (code,) = _ERROR_CODE.unpack_from(reply.payload)
        raise ProtocolError(code, reply.payload[_ERROR_CODE.size :].decode("utf-8", "replace"))
    return reply


def encoder_payload(model: SplitModel, weights, x, dtype: str):
    """Run the transmitter side; returns (payload bytes, n_c, local label or None)."""
    sp = model.split
    out = run_graph(model.encoder, weights, np.asarray(x, dtype=np.float32))
    if sp.id == 6:
        label = int(out.reshape(-1)[0])
        return _SP6_PAYLOAD.pack(label), model.n_c, label
    state = "raw" if sp.id == 0 else "normalized"
    vec = FeatureVector(out.reshape(-1), model.n_c, state)
    return encode_payload(vec, dtype), model.n_c, None


def send(model: SplitModel, weights, x, config: SessionConfig, seed: int = 0):
    """Run the encoder locally and submit the payload to a receiver.

    Returns (label, TimingReport). The TimingReport carries the measured
    encoder time, transfer time, the server-reported decode time, and (when
    the config provides alpha_t/alpha_r/rate) the model-predicted CostReport
    for side-by-side comparison.
    """
    t0 = time.perf_counter()
    payload, n_c, _ = encoder_payload(model, weights, x, config.dtype)
    encode_s = time.perf_counter() - t0

    with socket.create_connection((config.host, config.port), timeout=config.timeout) as sock:
        rfile = sock.makefile("rb")
        wfile = sock.makefile("wb")
        base = dict(fingerprint=weights.fingerprint, split_id=model.split.id, n_c=n_c, dtype=DTYPE_CODES[config.dtype])
        _request(rfile, wfile, Frame(MSG_HELLO, **base))
        t1 = time.perf_counter()
        reply = _request(rfile, wfile, Frame(MSG_FEATURES, seed=seed, payload=payload, **base))
        roundtrip_s = time.perf_counter() - t1

    if reply.msg_type != MSG_LABEL:
        raise ProtocolError(ERR_UNEXPECTED_TYPE, f"expected LABEL, got message type {reply.msg_type}")
    label, server_s, zhat_crc = _LABEL.unpack(reply.payload)

    predicted = None
    if None not in (config.alpha_t, config.alpha_r, config.rate):
        bits = payload_bits(model.n_c, config.dtype, model.split)
        predicted = total_task_time(
            count_flops(model),
            DeviceProfile(config.alpha_t),
            DeviceProfile(config.alpha_r),
            bits,
            ChannelProfile(config.snr_db, config.rate, config.dtype),
        )
    timing = TimingReport(
        encode_s=encode_s,
        roundtrip_s=roundtrip_s,
        transfer_s=max(0.0, roundtrip_s - server_s),
        server_s=server_s,
        payload_bytes=len(payload),
        zhat_crc32=zhat_crc,
        predicted=predicted,
    )
    return int(label), timing
