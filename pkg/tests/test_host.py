from __future__ import annotations

import asyncio
import math
import socket
import time

import pytest

from parasync import protocol
from parasync.client import ClientRemoteError
from parasync.graph import GraphDefinition, default_bindings, evaluate, load_definition
from parasync.host import Host, HostError
from parasync.params import snap
from parasync.relay import Relay, RelayConfig

from conftest import TOWER, connected_client, relay_only, stack


def run(coro):
    asyncio.run(asyncio.wait_for(coro, 60))


FAILABLE = GraphDefinition.from_dict({
    "name": "failable",
    "params": [{"id": "d", "kind": "real", "min": 0, "max": 10,
                "native_step": 1, "value": 5}],
    "nodes": [
        {"id": "shrink", "op": "div", "inputs": {"a": 10, "b": "d"}},
        {"id": "b", "op": "box",
         "inputs": {"width": "shrink", "height": 1, "depth": 1}},
    ],
    "outputs": [{"node": "b", "model_id": 0}],
})


def test_startup_announces_then_streams_revision_one():
    async def scenario():
        async with stack() as (relay, host):
            async with connected_client(relay) as client:
                params = await client.wait_params()
                assert [d.id for d in params] == ["height", "floors",
                                                  "twist_deg", "width"]
                assert all(d.revision == 0 for d in params)
                revision, mesh = await client.wait_mesh(0)
                assert revision == 1
                assert mesh.vertex_count > 0
            assert host.model_revisions == {0: 1}
    run(scenario())


def test_missing_definition_file_is_fatal():
    with pytest.raises(Exception):
        Host("definitions/no_such_file.json", "ws://127.0.0.1:1/ws", "s")


def test_edit_applies_snapped_value_and_bumps_revision():
    async def scenario():
        async with stack() as (relay, host):
            async with connected_client(relay) as client:
                await client.wait_params()
                await client.wait_mesh(0)
                applied, latency = await client.edit_round_trip("height", 12.4)
                assert applied.value == 10       # snapped to the step-5 grid
                assert applied.param_revision == 1
                assert applied.model_revisions == {0: 2}
                assert client.snapshot.meshes[0][0] == 2
                assert latency < 5
                desc = host._by_id["height"]
                assert desc.value == 10 and desc.revision == 1
    run(scenario())


def test_unknown_param_errors_to_originating_client():
    async def scenario():
        async with stack() as (relay, _host):
            async with connected_client(relay) as client, \
                    connected_client(relay, name="bystander") as other:
                await client.wait_params()
                with pytest.raises(ClientRemoteError) as err:
                    await client.set_param("nope", 1)
                assert err.value.code == "unknown_param"
                assert other.errors == []  # not broadcast
    run(scenario())


def test_wrong_kind_value_rejected():
    async def scenario():
        async with stack() as (relay, _host):
            async with connected_client(relay) as client:
                await client.wait_params()
                with pytest.raises(ClientRemoteError) as err:
                    await client.set_param("height", "tall")
                assert err.value.code == "invalid_value"
                with pytest.raises(ClientRemoteError):
                    await client.set_param("height", True)
    run(scenario())


def test_failed_evaluation_keeps_previous_state():
    async def scenario():
        async with stack(definition=FAILABLE) as (relay, host):
            async with connected_client(relay) as client:
                await client.wait_params()
                rev1, mesh1 = await client.wait_mesh(0)
                with pytest.raises(ClientRemoteError) as err:
                    await client.set_param("d", 0)  # division by zero
                assert err.value.code == "eval_failed"
                assert "shrink" in str(err.value)
                desc = host._by_id["d"]
                assert desc.value == 5 and desc.revision == 0
                assert host.model_revisions == {0: 1}
                # a later valid edit is unaffected by the poisoned one
                applied, _ = await client.edit_round_trip("d", 2)
                assert applied.value == 2
                assert applied.model_revisions == {0: 2}
    run(scenario())


def test_debounce_coalesces_and_converges():
    async def scenario():
        async with stack() as (relay, host):
            async with connected_client(relay) as client:
                await client.wait_params()
                await client.wait_mesh(0)
                evals_before = host.evaluation_count
                t0 = time.perf_counter()
                values = [float(v % 21 * 5) for v in range(100)]
                values[-1] = 85.0
                for i, v in enumerate(values):
                    await client._ws.send_str(protocol.encode_envelope(
                        protocol.SetParam(param_id="height", value=v,
                                          client_seq=i + 1)))
                # quiescence: host drained its pending buffer and the client
                # converged on the final value
                deadline = time.perf_counter() + 10
                while time.perf_counter() < deadline:
                    desc = client.snapshot.params.get("height")
                    if (not host.pending and desc is not None
                            and desc.value == 85.0):
                        break
                    await asyncio.sleep(0.02)
                await asyncio.sleep(host.debounce * 2)
                elapsed = time.perf_counter() - t0
                evals = host.evaluation_count - evals_before
                # leading-edge + cooldown scheduling bounds the work
                assert evals <= math.ceil(elapsed / host.debounce) + 1
                assert evals < 30  # and far below the 100 edits sent
                assert host._by_id["height"].value == 85.0
                # final mesh equals a fresh evaluation at the final value
                graph = load_definition(TOWER)
                bindings = default_bindings(graph)
                bindings["height"] = 85.0
                expected = evaluate(graph, bindings)[0]
                rev, got = client.snapshot.meshes[0]
                # geometry payloads must match bit-for-bit at wire precision
                assert (protocol.encode_mesh(0, rev, got)
                        == protocol.encode_mesh(0, rev, expected))
    run(scenario())


def test_frame_revisions_strictly_increase():
    async def scenario():
        async with stack() as (relay, _host):
            async with connected_client(relay) as client:
                await client.wait_params()
                await client.wait_mesh(0)
                for value in (0, 25, 50, 75, 100):
                    await client.edit_round_trip("height", value)
                seen: dict[int, int] = {}
                while not client.frames.empty():
                    record = client.frames.get_nowait()
                    prev = seen.get(record.model_id, 0)
                    assert record.revision > prev
                    seen[record.model_id] = record.revision
    run(scenario())


def test_host_restart_resumes_above_cached_revisions():
    async def scenario():
        async with relay_only() as relay:
            host1 = Host(TOWER, relay.url, "s", name="h1")
            host1.start()
            await asyncio.wait_for(host1.started.wait(), 10)
            async with connected_client(relay) as client:
                await client.wait_params()
                await client.wait_mesh(0)
                for value in (20, 40):
                    await client.edit_round_trip("height", value)
                highest = client.snapshot.meshes[0][0]
                await host1.stop()

                host2 = Host(TOWER, relay.url, "s", name="h2")
                host2.start()
                await asyncio.wait_for(host2.started.wait(), 10)
                try:
                    await client._wait_snapshot(
                        lambda: client.snapshot.meshes[0][0] > highest,
                        asyncio.get_event_loop().time() + 5,
                        "no fresh frame after host restart")
                    assert client.snapshot.meshes[0][0] == highest + 1
                    # fresh announcement reached the client too
                    assert client.snapshot.params["height"].revision == 0
                finally:
                    await host2.stop()
    run(scenario())


def free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def test_host_retries_until_relay_appears():
    async def scenario():
        port = free_port()
        url = f"ws://127.0.0.1:{port}/ws"
        host = Host(TOWER, url, "s", name="patient")
        host.start()
        await asyncio.sleep(0.7)  # at least one failed attempt
        assert not host.started.is_set()
        relay = Relay(RelayConfig(host="127.0.0.1", port=port))
        await relay.start()
        try:
            # backoff base is 0.5s; after one failure the next attempt
            # lands within roughly a second
            await asyncio.wait_for(host.started.wait(), 10)
        finally:
            await host.stop()
            await relay.stop()
    run(scenario())


def test_host_without_reconnect_raises_on_dead_relay():
    async def scenario():
        url = f"ws://127.0.0.1:{free_port()}/ws"
        host = Host(TOWER, url, "s", reconnect=False)
        with pytest.raises(HostError):
            await host.run()
    run(scenario())
