"""Scripted session client: mirrors exactly what a viewer would hold.

Maintains a snapshot (descriptors, latest mesh per model, last edit
latency), correlates SET_PARAM round-trips with their APPLIED/ERROR
answers, and exposes the raw frame stream for watch/bench tooling.
"""

from __future__ import annotations

import asyncio
import time
from dataclasses import dataclass, field

import aiohttp

from parasync import protocol
from parasync.geometry import Mesh
from parasync.params import ParamDescriptor
from parasync.protocol import (
    Applied,
    EnvelopeError,
    Error,
    FrameError,
    HelloClient,
    Params,
    Peers,
    Ping,
    Pong,
    SetParam,
)
from parasync.relay import DEFAULT_FRAME_CAP


class ClientRemoteError(Exception):
    """ERROR envelope received in reply to one of our messages."""

    def __init__(self, code: str, message: str):
        self.code = code
        super().__init__(f"{code}: {message}")


@dataclass
class FrameRecord:
    model_id: int
    revision: int
    mesh: Mesh
    byte_length: int
    received_at: float


@dataclass
class ClientSnapshot:
    """Client-side view of the session state."""

    params: dict[str, ParamDescriptor] = field(default_factory=dict)
    meshes: dict[int, tuple[int, Mesh]] = field(default_factory=dict)
    frame_bytes: dict[int, bytes] = field(default_factory=dict)
    last_latency: float | None = None
    peers: list[str] = field(default_factory=list)
    host: str | None = None


class SyncClient:
    """One client connection to a relay session."""

    def __init__(self, relay_url: str, session: str, name: str = "client",
                 frame_cap: int = DEFAULT_FRAME_CAP,
                 heartbeat: float | None = 5.0):
        self.relay_url = relay_url
        self.session_id = session
        self.name = name
        self.frame_cap = frame_cap
        self.heartbeat = heartbeat
        self.snapshot = ClientSnapshot()
        self.frames: asyncio.Queue[FrameRecord] = asyncio.Queue()
        self.errors: list[Error] = []
        self.closed = asyncio.Event()
        self._frame_event = asyncio.Event()
        self._params_event = asyncio.Event()
        self._next_seq = 1
        #: client_seq -> (param_id, baseline param_revision, future)
        self._pending: dict[int, tuple[str, int, asyncio.Future]] = {}
        self._pending_pings: dict[object, asyncio.Future] = {}
        self._http: aiohttp.ClientSession | None = None
        self._ws: aiohttp.ClientWebSocketResponse | None = None
        self._reader: asyncio.Task | None = None

    # --- lifecycle ---

    @classmethod
    async def connect(cls, relay_url: str, session: str, name: str = "client",
                      **kwargs) -> "SyncClient":
        client = cls(relay_url, session, name, **kwargs)
        await client._open()
        return client

    async def _open(self) -> None:
        self._http = aiohttp.ClientSession()
        try:
            self._ws = await self._http.ws_connect(
                self.relay_url, heartbeat=self.heartbeat,
                max_msg_size=self.frame_cap)
        except Exception:
            await self._http.close()
            raise
        await self._ws.send_str(protocol.encode_envelope(
            HelloClient(session=self.session_id, name=self.name)))
        self._reader = asyncio.ensure_future(self._read_loop())
        # catch-up barrier: the relay enqueues its cached state while
        # processing HELLO, so the PONG for a PING sent right after arrives
        # only once the whole catch-up has been delivered (per-peer FIFO)
        await self.ping(nonce=f"sync-{id(self)}", timeout=10.0)

    async def close(self) -> None:
        if self._reader is not None:
            self._reader.cancel()
            try:
                await self._reader
            except (asyncio.CancelledError, Exception):
                pass
        if self._ws is not None:
            await self._ws.close()
        if self._http is not None:
            await self._http.close()
        self.closed.set()

    # --- inbound ---

    async def _read_loop(self) -> None:
        try:
            async for msg in self._ws:
                if msg.type == aiohttp.WSMsgType.TEXT:
                    self._on_text(msg.data)
                elif msg.type == aiohttp.WSMsgType.BINARY:
                    self._on_frame(msg.data)
        finally:
            self.closed.set()
            for _pid, _baseline, fut in self._pending.values():
                if not fut.done():
                    fut.set_exception(ConnectionError("connection closed"))
            self._pending.clear()

    def _on_text(self, text: str) -> None:
        try:
            env = protocol.decode_envelope(text)
        except EnvelopeError:
            return
        if isinstance(env, Params):
            self.snapshot.params = {d.id: d for d in env.descriptors()}
            self._params_event.set()
        elif isinstance(env, Applied):
            desc = self.snapshot.params.get(env.param_id)
            if desc is not None:
                desc.value = env.value
                desc.revision = env.param_revision
            for seq, (pid, baseline, fut) in list(self._pending.items()):
                # only an APPLIED newer than the edit's baseline answers it;
                # replayed catch-up state must not satisfy a fresh edit
                if (pid == env.param_id and env.param_revision > baseline
                        and not fut.done()):
                    fut.set_result(env)
                    del self._pending[seq]
        elif isinstance(env, Error):
            self.errors.append(env)
            if env.in_reply_to is not None:
                entry = self._pending.pop(env.in_reply_to, None)
                if entry is not None and not entry[2].done():
                    entry[2].set_exception(
                        ClientRemoteError(env.code, env.message))
        elif isinstance(env, Peers):
            self.snapshot.peers = env.clients
            self.snapshot.host = env.host
        elif isinstance(env, Pong):
            fut = self._pending_pings.pop(env.nonce, None)
            if fut is not None and not fut.done():
                fut.set_result(env)

    def _on_frame(self, data: bytes) -> None:
        try:
            model_id, revision, mesh = protocol.decode_mesh(data)
        except FrameError:
            return
        self.snapshot.meshes[model_id] = (revision, mesh)
        self.snapshot.frame_bytes[model_id] = data
        self.frames.put_nowait(FrameRecord(
            model_id=model_id, revision=revision, mesh=mesh,
            byte_length=len(data), received_at=time.perf_counter()))
        self._frame_event.set()

    # --- requests ---

    async def wait_params(self, timeout: float = 5.0) -> list[ParamDescriptor]:
        await asyncio.wait_for(self._params_event.wait(), timeout)
        return list(self.snapshot.params.values())

    async def set_param(self, param_id: str, value, timeout: float = 5.0) -> Applied:
        """Send one edit and wait for its APPLIED (or raise the ERROR)."""
        seq = self._next_seq
        self._next_seq += 1
        desc = self.snapshot.params.get(param_id)
        baseline = desc.revision if desc is not None else 0
        fut: asyncio.Future = asyncio.get_running_loop().create_future()
        self._pending[seq] = (param_id, baseline, fut)
        await self._ws.send_str(protocol.encode_envelope(
            SetParam(param_id=param_id, value=value, client_seq=seq)))
        try:
            return await asyncio.wait_for(fut, timeout)
        finally:
            self._pending.pop(seq, None)

    async def edit_round_trip(self, param_id: str, value,
                              timeout: float = 5.0) -> tuple[Applied, float]:
        """Edit and wait until every output frame of that evaluation arrived.

        Returns (applied, latency_seconds); latency covers send -> last frame
        of the generation named by APPLIED.model_revisions.
        """
        start = time.perf_counter()
        applied = await self.set_param(param_id, value, timeout)

        def generation_complete() -> bool:
            for model_id, revision in applied.model_revisions.items():
                seen = self.snapshot.meshes.get(model_id)
                if seen is None or seen[0] < revision:
                    return False
            return True

        await self._wait_snapshot(generation_complete, start + timeout,
                                  "frames for the applied edit never arrived")
        latency = time.perf_counter() - start
        self.snapshot.last_latency = latency
        return applied, latency

    async def _wait_snapshot(self, predicate, deadline: float, what: str) -> None:
        """Wait until predicate() holds, re-checking after each frame arrival.

        Safe against lost wakeups: the event is cleared before re-checking,
        and _on_frame runs synchronously on the same loop.
        """
        while True:
            self._frame_event.clear()
            if predicate():
                return
            remaining = deadline - time.perf_counter()
            if remaining <= 0:
                raise asyncio.TimeoutError(what)
            try:
                await asyncio.wait_for(self._frame_event.wait(), remaining)
            except asyncio.TimeoutError:
                raise asyncio.TimeoutError(what) from None

    async def next_frame(self, timeout: float = 5.0) -> FrameRecord:
        return await asyncio.wait_for(self.frames.get(), timeout)

    async def wait_mesh(self, model_id: int, timeout: float = 5.0) -> tuple[int, Mesh]:
        """Latest (revision, mesh) for model_id, waiting for a first frame."""
        await self._wait_snapshot(lambda: model_id in self.snapshot.meshes,
                                  time.perf_counter() + timeout,
                                  f"no frame for model {model_id}")
        return self.snapshot.meshes[model_id]

    async def ping(self, nonce, timeout: float = 5.0) -> None:
        fut: asyncio.Future = asyncio.get_running_loop().create_future()
        self._pending_pings[nonce] = fut
        await self._ws.send_str(protocol.encode_envelope(Ping(nonce=nonce)))
        try:
            await asyncio.wait_for(fut, timeout)
        finally:
            self._pending_pings.pop(nonce, None)
