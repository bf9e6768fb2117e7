"""WebSocket relay: one host and N clients per session.

The relay fans host output (mesh frames, announcements, applied edits) out
to every client, serializes client edits into a single per-session total
order before forwarding them to the host (last-writer-wins), and caches the
latest announcement plus the latest frame per model so late joiners catch
up without asking the host to re-evaluate.

Concurrency contract: all state mutation happens synchronously on the event
loop (one message handled at a time per session arrival order); per
connection an outbound queue preserves that order while letting broadcasts
to distinct clients proceed concurrently.
"""

from __future__ import annotations

import asyncio
import logging
from dataclasses import dataclass, field

from aiohttp import WSMsgType, web

from parasync import protocol
from parasync.protocol import (
    Applied,
    EnvelopeError,
    Error,
    FrameError,
    HelloClient,
    HelloHost,
    Params,
    Peers,
    Ping,
    Pong,
    SetParam,
)

log = logging.getLogger("parasync.relay")

DEFAULT_LISTEN = "127.0.0.1:8700"
DEFAULT_FRAME_CAP = 64 * 1024 * 1024
DEFAULT_HEARTBEAT = 5.0
SEND_QUEUE_LIMIT = 1024


@dataclass
class RelayConfig:
    host: str = "127.0.0.1"
    port: int = 8700
    frame_cap: int = DEFAULT_FRAME_CAP
    heartbeat: float = DEFAULT_HEARTBEAT

    @classmethod
    def from_listen(cls, listen: str, **kwargs) -> "RelayConfig":
        host, _, port = listen.rpartition(":")
        if not host or not port.isdigit():
            raise ValueError(f"listen address must be HOST:PORT, got {listen!r}")
        return cls(host=host, port=int(port), **kwargs)


class Connection:
    """One WebSocket peer with an ordered outbound queue."""

    _ids = iter(range(1, 2 ** 62))

    def __init__(self, ws: web.WebSocketResponse):
        self.ws = ws
        self.conn_id = next(self._ids)
        self.name = f"conn-{self.conn_id}"
        self.role: str | None = None  # "host" | "client" after HELLO
        self.session: "Session | None" = None
        self.queue: asyncio.Queue = asyncio.Queue(maxsize=SEND_QUEUE_LIMIT)
        self.sender: asyncio.Task | None = None

    def send_envelope(self, env) -> None:
        self._enqueue(("text", protocol.encode_envelope(env)))

    def send_bytes(self, data: bytes) -> None:
        self._enqueue(("bytes", data))

    def close_soon(self) -> None:
        self._enqueue(("close", None))

    def _enqueue(self, item) -> None:
        try:
            self.queue.put_nowait(item)
        except asyncio.QueueFull:
            # slow consumer: drop the connection rather than buffer unboundedly
            log.warning("%s: outbound queue full, closing", self.name)
            asyncio.ensure_future(self.ws.close())

    async def drain(self) -> None:
        while True:
            kind, payload = await self.queue.get()
            if kind == "close":
                await self.ws.close()
                return
            if kind == "text":
                await self.ws.send_str(payload)
            else:
                await self.ws.send_bytes(payload)


@dataclass
class Session:
    """Relay-side state for one session id."""

    session_id: str
    host: Connection | None = None
    clients: list[Connection] = field(default_factory=list)
    cached_params: Params | None = None
    cached_meshes: dict[int, bytes] = field(default_factory=dict)
    cached_revisions: dict[int, int] = field(default_factory=dict)
    last_applied: dict[str, Applied] = field(default_factory=dict)
    next_seq: int = 1
    #: stamped SET_PARAMs in relay arrival order (the session's total order)
    edit_log: list[SetParam] = field(default_factory=list)
    #: relay_seq -> (originating connection, its client_seq), for ERROR routing
    edit_origin: dict[int, tuple[Connection, int]] = field(default_factory=dict)

    def members(self) -> list[Connection]:
        return ([self.host] if self.host else []) + list(self.clients)

    def peers_envelope(self, include_revisions: bool = False) -> Peers:
        return Peers(
            clients=[c.name for c in self.clients],
            host=self.host.name if self.host else None,
            model_revisions=dict(self.cached_revisions) if include_revisions else None,
        )


class Relay:
    """The relay server; start()/stop() manage the listening socket."""

    def __init__(self, config: RelayConfig | None = None):
        self.config = config or RelayConfig()
        self.sessions: dict[str, Session] = {}
        self.app = web.Application()
        self.app.router.add_get("/ws", self._handle_ws)
        self.app.router.add_get("/healthz", self._handle_healthz)
        self._runner: web.AppRunner | None = None
        self.port: int | None = None

    # --- lifecycle ---

    async def start(self) -> None:
        self._runner = web.AppRunner(self.app)
        await self._runner.setup()
        site = web.TCPSite(self._runner, self.config.host, self.config.port)
        await site.start()
        self.port = site._server.sockets[0].getsockname()[1]
        log.info("relay listening on %s:%d", self.config.host, self.port)

    async def stop(self) -> None:
        if self._runner is not None:
            await self._runner.cleanup()
            self._runner = None

    @property
    def url(self) -> str:
        return f"ws://{self.config.host}:{self.port}/ws"

    # --- HTTP ---

    async def _handle_healthz(self, request: web.Request) -> web.Response:
        body = {
            "sessions": len(self.sessions),
            "clients": sum(len(s.clients) for s in self.sessions.values()),
            "per_session": {
                sid: {"clients": len(s.clients), "host": s.host is not None}
                for sid, s in self.sessions.items()
            },
        }
        return web.json_response(body)

    # --- WebSocket plumbing ---

    async def _handle_ws(self, request: web.Request) -> web.WebSocketResponse:
        ws = web.WebSocketResponse(
            heartbeat=self.config.heartbeat or None,
            max_msg_size=self.config.frame_cap,
        )
        await ws.prepare(request)
        conn = Connection(ws)
        conn.sender = asyncio.ensure_future(conn.drain())
        try:
            async for msg in ws:
                if msg.type == WSMsgType.TEXT:
                    self._on_text(conn, msg.data)
                elif msg.type == WSMsgType.BINARY:
                    self._on_binary(conn, msg.data)
                elif msg.type == WSMsgType.ERROR:
                    break
        finally:
            conn.sender.cancel()
            self._leave(conn)
        return ws

    def _send_error(self, conn: Connection, code: str, message: str,
                    in_reply_to: int | None = None) -> None:
        conn.send_envelope(Error(code=code, message=message,
                                 in_reply_to=in_reply_to))

    # --- message routing (synchronous: this IS the per-session total order) ---

    def _on_text(self, conn: Connection, text: str) -> None:
        try:
            env = protocol.decode_envelope(text)
        except EnvelopeError as exc:
            self._send_error(conn, exc.code, str(exc))
            return
        if conn.session is None:
            if isinstance(env, (HelloHost, HelloClient)):
                self._join(conn, env)
            else:
                self._send_error(conn, "unauthenticated",
                                 "complete a HELLO handshake first")
            return
        if isinstance(env, (HelloHost, HelloClient)):
            self._send_error(conn, "bad_handshake", "already joined a session")
            return
        if isinstance(env, Ping):
            conn.send_envelope(Pong(nonce=env.nonce))
            return
        if conn.role == "host":
            self._on_host_envelope(conn, env)
        else:
            self._on_client_envelope(conn, env)

    def _join(self, conn: Connection, env: HelloHost | HelloClient) -> None:
        session = self.sessions.setdefault(env.session, Session(env.session))
        conn.name = env.name
        if isinstance(env, HelloHost):
            if session.host is not None:
                self._send_error(conn, "host_exists",
                                 f"session {env.session!r} already has host "
                                 f"{session.host.name!r}")
                conn.close_soon()
                return
            session.host = conn
            conn.role = "host"
            conn.session = session
            # the host's join PEERS carries cached revisions so its next
            # frames stay above anything clients have already seen
            conn.send_envelope(session.peers_envelope(include_revisions=True))
            for peer in session.clients:
                peer.send_envelope(session.peers_envelope())
            return
        conn.role = "client"
        conn.session = session
        session.clients.append(conn)
        # catch-up: announcement, applied values, then latest frames
        if session.cached_params is not None:
            conn.send_envelope(session.cached_params)
            for applied in session.last_applied.values():
                conn.send_envelope(applied)
        for model_id in sorted(session.cached_meshes):
            conn.send_bytes(session.cached_meshes[model_id])
        for peer in session.members():
            peer.send_envelope(session.peers_envelope(
                include_revisions=peer is session.host))

    def _leave(self, conn: Connection) -> None:
        session = conn.session
        if session is None:
            return
        conn.session = None
        if session.host is conn:
            session.host = None
        elif conn in session.clients:
            session.clients.remove(conn)
        for peer in session.members():
            peer.send_envelope(session.peers_envelope(
                include_revisions=peer is session.host))

    def _on_host_envelope(self, conn: Connection, env) -> None:
        session = conn.session
        if isinstance(env, Params):
            session.cached_params = env
            session.last_applied.clear()
            for peer in session.clients:
                peer.send_envelope(env)
        elif isinstance(env, Applied):
            session.last_applied[env.param_id] = env
            for peer in session.clients:
                peer.send_envelope(env)
        elif isinstance(env, Error):
            origin = None
            if env.in_reply_to is not None:
                origin = session.edit_origin.pop(env.in_reply_to, None)
            if origin is not None:
                origin_conn, client_seq = origin
                origin_conn.send_envelope(Error(code=env.code, message=env.message,
                                                in_reply_to=client_seq))
            else:
                for peer in session.clients:
                    peer.send_envelope(env)
        else:
            self._send_error(conn, "unexpected_type",
                             f"host may not send {type(env).__name__}")

    def _on_client_envelope(self, conn: Connection, env) -> None:
        session = conn.session
        if isinstance(env, SetParam):
            if session.host is None:
                self._send_error(conn, "no_host",
                                 f"session {session.session_id!r} has no host",
                                 in_reply_to=env.client_seq)
                return
            stamped = SetParam(param_id=env.param_id, value=env.value,
                               client_seq=env.client_seq,
                               relay_seq=session.next_seq)
            session.next_seq += 1
            session.edit_log.append(stamped)
            session.edit_origin[stamped.relay_seq] = (conn, env.client_seq)
            if len(session.edit_origin) > 4096:
                oldest = min(session.edit_origin)
                session.edit_origin.pop(oldest, None)
            session.host.send_envelope(stamped)
        else:
            self._send_error(conn, "unexpected_type",
                             f"client may not send {type(env).__name__}")

    def _on_binary(self, conn: Connection, data: bytes) -> None:
        if conn.session is None:
            self._send_error(conn, "unauthenticated",
                             "complete a HELLO handshake first")
            return
        if conn.role != "host":
            self._send_error(conn, "unexpected_binary",
                             "only the host streams mesh frames")
            return
        session = conn.session
        try:
            model_id, revision, _mesh = protocol.decode_mesh(data)
        except FrameError as exc:
            self._send_error(conn, exc.code, str(exc))
            return
        cached = session.cached_revisions.get(model_id, 0)
        if revision <= cached:
            self._send_error(conn, "stale_revision",
                             f"model {model_id}: revision {revision} <= "
                             f"cached {cached}")
            return
        session.cached_meshes[model_id] = data
        session.cached_revisions[model_id] = revision
        for peer in session.clients:
            peer.send_bytes(data)


async def run_relay(config: RelayConfig) -> None:
    """Run until cancelled (CLI entry)."""
    relay = Relay(config)
    await relay.start()
    try:
        await asyncio.Event().wait()
    finally:
        await relay.stop()
