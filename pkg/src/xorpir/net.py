"""
Running schemes over TCP.

Every message is one frame::

    magic "PIR1" | msg_type u8 | scheme_id u8 | payload_bit_len u32 BE | payload

The payload is bit-packed MSB-first and zero-padded to whole bytes; only
``payload_bit_len`` counts toward the transcript. A RESPONSE of length 0 is a
legal omission. An ERROR payload is one reason-code byte followed by a UTF-8
message. A frame with the wrong magic gets no reply: the connection is closed.
"""

from __future__ import annotations

import asyncio
import contextlib
import enum
import logging
import random
import struct
import threading
from dataclasses import dataclass
from typing import Sequence

from .core import BitString, ServerStorage, TranscriptReport
from .errors import FormatError, ProtocolError, RetrievalError
from .params import SchemeParams
from .schemes import impl

log = logging.getLogger(__name__)

FRAME_MAGIC = b"PIR1"
HEADER = struct.Struct(">4sBBI")
MAX_PAYLOAD_BITS = 1 << 31


class MsgType(enum.IntEnum):
    QUERY = 1
    RESPONSE = 2
    ERROR = 3


class ErrorCode(enum.IntEnum):
    BAD_TYPE = 1
    SCHEME_MISMATCH = 2
    MALFORMED_QUERY = 3
    BAD_FRAME = 4
    INTERNAL = 5


@dataclass(frozen=True)
class Frame:
    msg_type: int
    scheme_id: int
    payload: BitString

    def encode(self) -> bytes:
        return HEADER.pack(FRAME_MAGIC, self.msg_type, self.scheme_id, self.payload.length) + self.payload.to_bytes()

    @classmethod
    def error(cls, scheme_id: int, code: ErrorCode, message: str) -> Frame:
        raw = bytes([code]) + message.encode()
        return cls(MsgType.ERROR, scheme_id, BitString(int.from_bytes(raw, "big"), 8 * len(raw)))

    def error_reason(self) -> tuple[int, str]:
        raw = self.payload.to_bytes()
        if not raw:
            return 0, ""
        return raw[0], raw[1:].decode(errors="replace")


class BadMagic(FormatError):
    pass


async def read_frame(reader: asyncio.StreamReader) -> Frame | None:
    """Read one frame; None on a clean EOF before any header byte."""
    try:
        head = await reader.readexactly(HEADER.size)
    except asyncio.IncompleteReadError as e:
        if not e.partial:
            return None
        raise FormatError("truncated frame header") from None
    magic, msg_type, scheme_id, nbits = HEADER.unpack(head)
    if magic != FRAME_MAGIC:
        raise BadMagic(f"bad magic {magic!r}")
    if nbits > MAX_PAYLOAD_BITS:
        raise FormatError(f"payload of {nbits} bits is too large")
    try:
        data = await reader.readexactly((nbits + 7) // 8)
    except asyncio.IncompleteReadError:
        raise FormatError("truncated frame payload") from None
    return Frame(msg_type, scheme_id, BitString.from_bytes(data, nbits))


# ---------------------------------------------------------------- server


class PIRServer:
    """Serves one :class:`ServerStorage`; stateless between requests."""

    def __init__(self, storage: ServerStorage, params: SchemeParams):
        params.check_server(storage.server_id)
        self.storage = storage
        self.params = params
        self.scheme = impl(params)
        self._server: asyncio.base_events.Server | None = None

    def respond(self, frame: Frame) -> Frame:
        sid = self.params.scheme.wire_id
        if frame.msg_type != MsgType.QUERY:
            return Frame.error(sid, ErrorCode.BAD_TYPE, f"expected QUERY, got type {frame.msg_type}")
        if frame.scheme_id != sid:
            return Frame.error(sid, ErrorCode.SCHEME_MISMATCH, f"this server runs scheme {sid}, got {frame.scheme_id}")
        try:
            bits = self.scheme.answer(self.params, self.storage, self.storage.server_id, frame.payload)
        except ProtocolError as e:
            return Frame.error(sid, ErrorCode.MALFORMED_QUERY, str(e))
        except Exception as e:  # noqa: BLE001 - reported to the client, never crash the daemon
            log.exception("answer failed")
            return Frame.error(sid, ErrorCode.INTERNAL, type(e).__name__)
        return Frame(MsgType.RESPONSE, sid, bits)

    async def handle(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        try:
            while True:
                try:
                    frame = await read_frame(reader)
                except BadMagic:
                    break
                except FormatError as e:
                    writer.write(Frame.error(self.params.scheme.wire_id, ErrorCode.BAD_FRAME, str(e)).encode())
                    await writer.drain()
                    break
                if frame is None:
                    break
                writer.write(self.respond(frame).encode())
                await writer.drain()
        except (ConnectionError, asyncio.CancelledError):
            pass
        finally:
            writer.close()
            with contextlib.suppress(Exception):
                await writer.wait_closed()

    async def start(self, host: str = "127.0.0.1", port: int = 0) -> int:
        self._server = await asyncio.start_server(self.handle, host, port)
        return self._server.sockets[0].getsockname()[1]

    async def serve_forever(self) -> None:
        assert self._server is not None
        async with self._server:
            await self._server.serve_forever()

    def close(self) -> None:
        if self._server is not None:
            self._server.close()


def parse_address(address: str) -> tuple[str, int]:
    host, sep, port = address.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"expected HOST:PORT, got {address!r}")
    return host or "127.0.0.1", int(port)


def serve(storage: ServerStorage, params: SchemeParams, address: str) -> None:
    """Run a daemon on ``address`` until interrupted."""
    host, port = parse_address(address)

    async def main():
        server = PIRServer(storage, params)
        bound = await server.start(host, port)
        log.info("server %d listening on %s:%d", storage.server_id, host, bound)
        await server.serve_forever()

    with contextlib.suppress(KeyboardInterrupt):
        asyncio.run(main())


class BackgroundServer:
    """A daemon on its own thread and event loop, for tests and local demos.

    >>> with BackgroundServer(storage, params) as srv:   # doctest: +SKIP
    ...     fetch_record([srv.address], params, 1)
    """

    def __init__(self, storage: ServerStorage, params: SchemeParams, host: str = "127.0.0.1", port: int = 0):
        self.server = PIRServer(storage, params)
        self.host = host
        self._port = port
        self.port: int | None = None
        self._loop = asyncio.new_event_loop()
        self._ready = threading.Event()
        self._thread = threading.Thread(target=self._run, daemon=True)

    def _run(self):
        asyncio.set_event_loop(self._loop)
        self.port = self._loop.run_until_complete(self.server.start(self.host, self._port))
        self._ready.set()
        self._loop.run_forever()
        self._loop.run_until_complete(self._loop.shutdown_asyncgens())
        self._loop.close()

    @property
    def address(self) -> str:
        return f"{self.host}:{self.port}"

    def start(self) -> BackgroundServer:
        self._thread.start()
        self._ready.wait(5)
        return self

    def stop(self) -> None:
        def _shutdown():
            self.server.close()
            for task in asyncio.all_tasks(self._loop):
                task.cancel()
            self._loop.call_soon(self._loop.stop)

        if self._thread.is_alive():
            self._loop.call_soon_threadsafe(_shutdown)
            self._thread.join(5)

    def __enter__(self) -> BackgroundServer:
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()


# ---------------------------------------------------------------- client


async def exchange(address: str, frame: Frame, timeout: float = 10.0) -> Frame:
    """Send one frame on a fresh connection and read one frame back."""
    host, port = parse_address(address)
    reader, writer = await asyncio.wait_for(asyncio.open_connection(host, port), timeout)
    try:
        writer.write(frame.encode())
        await writer.drain()
        reply = await asyncio.wait_for(read_frame(reader), timeout)
    finally:
        writer.close()
        with contextlib.suppress(Exception):
            await writer.wait_closed()
    if reply is None:
        raise ConnectionError("connection closed without a reply")
    return reply


async def _ask(r: int, address: str, params: SchemeParams, query: BitString, timeout: float) -> BitString:
    sid = params.scheme.wire_id
    try:
        reply = await exchange(address, Frame(MsgType.QUERY, sid, query), timeout)
    except (OSError, asyncio.TimeoutError, FormatError) as e:
        raise RetrievalError(r, f"{type(e).__name__}: {e}") from e
    if reply.msg_type == MsgType.ERROR:
        code, msg = reply.error_reason()
        name = ErrorCode(code).name if code in ErrorCode._value2member_map_ else str(code)
        raise RetrievalError(r, f"error {name}: {msg}")
    if reply.msg_type != MsgType.RESPONSE or reply.scheme_id != sid:
        raise RetrievalError(r, f"unexpected frame type {reply.msg_type} scheme {reply.scheme_id}")
    return reply.payload


async def fetch_record_async(
    endpoints: Sequence[str],
    params: SchemeParams,
    ell: int,
    seed: int | None = None,
    *,
    timeout: float = 10.0,
) -> tuple[BitString, TranscriptReport]:
    if len(endpoints) != params.n:
        raise ValueError(f"{params.scheme.name} needs {params.n} servers, got {len(endpoints)}")
    params.check_record(ell)
    scheme = impl(params)
    qs = scheme.build_queries(params, ell, scheme.sample_randomness(params, ell, random.Random(seed)))
    results = await asyncio.gather(
        *(_ask(r, addr, params, qs.per_server[r - 1], timeout) for r, addr in enumerate(endpoints, start=1)),
        return_exceptions=True,
    )
    failures = [e for e in results if isinstance(e, BaseException)]
    if failures:
        failed = sorted((e for e in failures if isinstance(e, RetrievalError)), key=lambda e: e.server)
        raise failed[0] if failed else failures[0]
    responses: list[BitString] = list(results)  # type: ignore[arg-type]
    try:
        output = scheme.reconstruct(params, qs.user_state, responses)
    except ProtocolError as e:
        raise RetrievalError(0, f"reconstruction failed: {e}") from e
    return output, TranscriptReport(qs.upload_bits, tuple(c.length for c in responses))


def fetch_record(
    endpoints: Sequence[str],
    params: SchemeParams,
    ell: int,
    seed: int | None = None,
    *,
    timeout: float = 10.0,
) -> tuple[BitString, TranscriptReport]:
    """Query n live daemons concurrently and reconstruct record ``ell``.

    Fail-stop: any unreachable or erroring daemon raises :class:`RetrievalError`
    naming it, and nothing is reconstructed.
    """
    return asyncio.run(fetch_record_async(endpoints, params, ell, seed, timeout=timeout))
