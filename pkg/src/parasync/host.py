"""The model host: evaluates a definition and speaks to the relay.

On connect it announces its parameters, evaluates once, and streams one
frame per output. Incoming edits are snapped defensively, coalesced under a
debounce window (latest value per param wins within a window), evaluated off
the message path, and answered with APPLIED plus fresh frames. A failed
evaluation leaves descriptors and revisions untouched and reports the
offending node instead.
"""

from __future__ import annotations

import asyncio
import logging
from pathlib import Path

import aiohttp

from parasync import protocol
from parasync.graph import (
    EvaluationError,
    GraphDefinition,
    announce,
    evaluate,
    load_definition,
)
from parasync.params import ParamError, snap
from parasync.protocol import (
    Applied,
    EnvelopeError,
    Error,
    HelloHost,
    Params,
    Peers,
    Ping,
    Pong,
    SetParam,
)
from parasync.relay import DEFAULT_FRAME_CAP

log = logging.getLogger("parasync.host")

DEFAULT_DEBOUNCE = 0.033
BACKOFF_BASE = 0.5
BACKOFF_CAP = 30.0


class HostError(Exception):
    """Fatal host failure (bad definition, unrecoverable startup error)."""


class Host:
    """Runs one graph definition as the session's host."""

    def __init__(self, graph: GraphDefinition | str | Path, relay_url: str,
                 session: str, name: str = "host",
                 debounce: float = DEFAULT_DEBOUNCE,
                 reconnect: bool = True,
                 frame_cap: int = DEFAULT_FRAME_CAP,
                 heartbeat: float | None = 5.0):
        if not isinstance(graph, GraphDefinition):
            graph = load_definition(graph)
        self.graph = graph
        self.relay_url = relay_url
        self.session_id = session
        self.name = name
        self.debounce = debounce
        self.reconnect = reconnect
        self.frame_cap = frame_cap
        self.heartbeat = heartbeat

        self.descriptors = announce(graph)
        self._by_id = {d.id: d for d in self.descriptors}
        self.model_revisions = {model_id: 0 for _, model_id in graph.outputs}
        #: latest staged (value, reply_seq) per param, not yet evaluated
        self.pending: dict[str, tuple[object, int | None]] = {}
        self.evaluation_count = 0

        self.started = asyncio.Event()
        self._dirty = asyncio.Event()
        self._outbox: asyncio.Queue | None = None
        self._stopping = False
        self._task: asyncio.Task | None = None

    # --- lifecycle ---

    def start(self) -> asyncio.Task:
        """Spawn run() as a task; await host.started for readiness."""
        self._task = asyncio.ensure_future(self.run())
        return self._task

    async def stop(self) -> None:
        self._stopping = True
        if self._task is not None:
            self._task.cancel()
            try:
                await self._task
            except (asyncio.CancelledError, Exception):
                pass
            self._task = None

    async def run(self) -> None:
        """Connect (with exponential backoff) and serve until cancelled."""
        attempt = 0
        while not self._stopping:
            try:
                await self._serve_once()
                attempt = 0
            except (aiohttp.ClientError, OSError, ConnectionError) as exc:
                if not self.reconnect:
                    raise HostError(f"relay unreachable: {exc}") from exc
                delay = min(BACKOFF_BASE * (2 ** attempt), BACKOFF_CAP)
                attempt += 1
                log.info("relay unavailable (%s); retrying in %.1fs", exc, delay)
                await asyncio.sleep(delay)
                continue
            if not self.reconnect:
                return
            # connection ended cleanly (relay restart): retry from base
            await asyncio.sleep(BACKOFF_BASE)

    async def _serve_once(self) -> None:
        async with aiohttp.ClientSession() as http:
            async with http.ws_connect(self.relay_url, heartbeat=self.heartbeat,
                                       max_msg_size=self.frame_cap) as ws:
                self._outbox = asyncio.Queue()
                writer = asyncio.ensure_future(self._write_loop(ws))
                evaluator: asyncio.Task | None = None
                try:
                    self._send(HelloHost(session=self.session_id, name=self.name))
                    evaluator = await self._read_loop(ws)
                finally:
                    for task in (writer, evaluator):
                        if task is not None:
                            task.cancel()
                    self._outbox = None

    # --- outbound ---

    def _send(self, env) -> None:
        if self._outbox is not None:
            self._outbox.put_nowait(("text", protocol.encode_envelope(env)))

    def _send_frame(self, data: bytes) -> None:
        if self._outbox is not None:
            self._outbox.put_nowait(("bytes", data))

    async def _write_loop(self, ws) -> None:
        while True:
            kind, payload = await self._outbox.get()
            if kind == "text":
                await ws.send_str(payload)
            else:
                await ws.send_bytes(payload)

    # --- inbound ---

    async def _read_loop(self, ws) -> asyncio.Task | None:
        evaluator: asyncio.Task | None = None
        async for msg in ws:
            if msg.type != aiohttp.WSMsgType.TEXT:
                continue
            try:
                env = protocol.decode_envelope(msg.data)
            except EnvelopeError as exc:
                log.warning("bad envelope from relay: %s", exc)
                continue
            if isinstance(env, Peers) and evaluator is None:
                # join acknowledgement: resume revisions above the cache,
                # then announce and stream the initial state
                for model_id, cached in (env.model_revisions or {}).items():
                    if model_id in self.model_revisions:
                        self.model_revisions[model_id] = max(
                            self.model_revisions[model_id], cached)
                await self._announce_and_stream()
                evaluator = asyncio.ensure_future(self._evaluate_loop())
                self.started.set()
            elif isinstance(env, SetParam):
                self._stage_edit(env)
            elif isinstance(env, Ping):
                self._send(Pong(nonce=env.nonce))
            elif isinstance(env, Error):
                log.warning("relay error: %s %s", env.code, env.message)
        return evaluator

    async def _announce_and_stream(self) -> None:
        self._send(Params.from_descriptors(self.descriptors))
        bindings = {d.id: d.value for d in self.descriptors}
        meshes = await asyncio.to_thread(evaluate, self.graph, bindings)
        self.evaluation_count += 1
        self._emit_frames(meshes)

    def _emit_frames(self, meshes) -> None:
        for model_id in sorted(meshes):
            self.model_revisions[model_id] += 1
            self._send_frame(protocol.encode_mesh(
                model_id, self.model_revisions[model_id], meshes[model_id]))

    def _stage_edit(self, edit: SetParam) -> None:
        desc = self._by_id.get(edit.param_id)
        if desc is None:
            self._send(Error(code="unknown_param",
                             message=f"unknown param {edit.param_id!r}",
                             in_reply_to=edit.relay_seq))
            return
        try:
            snapped = snap(desc, edit.value)
        except ParamError as exc:
            self._send(Error(code="invalid_value", message=str(exc),
                             in_reply_to=edit.relay_seq))
            return
        self.pending[edit.param_id] = (snapped, edit.relay_seq)
        self._dirty.set()

    # --- evaluation (serialized, debounced) ---

    async def _evaluate_loop(self) -> None:
        while True:
            await self._dirty.wait()
            self._dirty.clear()
            if not self.pending:
                continue
            batch = self.pending
            self.pending = {}
            await self._evaluate_batch(batch)
            # cooldown: edits arriving within the window coalesce in pending
            await asyncio.sleep(self.debounce)

    async def _evaluate_batch(self, batch: dict) -> None:
        bindings = {d.id: d.value for d in self.descriptors}
        for pid, (value, _seq) in batch.items():
            bindings[pid] = value
        try:
            meshes = await asyncio.to_thread(evaluate, self.graph, bindings)
        except EvaluationError as exc:
            # failed evaluations never mutate descriptors or revisions;
            # the previous meshes stay authoritative
            for pid, (_value, seq) in batch.items():
                self._send(Error(code="eval_failed", message=str(exc),
                                 in_reply_to=seq))
            return
        self.evaluation_count += 1
        for pid, (value, _seq) in batch.items():
            desc = self._by_id[pid]
            desc.value = value
            desc.revision += 1
        revisions_after = {m: r + 1 for m, r in self.model_revisions.items()}
        for pid, (value, _seq) in batch.items():
            desc = self._by_id[pid]
            self._send(Applied(param_id=pid, value=desc.value,
                               param_revision=desc.revision,
                               model_revisions=revisions_after))
        self._emit_frames(meshes)
