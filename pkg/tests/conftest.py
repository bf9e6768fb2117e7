from __future__ import annotations

import asyncio
import contextlib

from parasync.client import SyncClient
from parasync.host import Host
from parasync.relay import Relay, RelayConfig

TOWER = "definitions/twist_tower.json"
BOX = "definitions/minimal_box.json"


@contextlib.asynccontextmanager
async def relay_only(**config_kwargs):
    relay = Relay(RelayConfig(host="127.0.0.1", port=0, **config_kwargs))
    await relay.start()
    try:
        yield relay
    finally:
        await relay.stop()


@contextlib.asynccontextmanager
async def stack(definition: str = TOWER, session: str = "s", **host_kwargs):
    """Relay plus a started host on an ephemeral loopback port."""
    async with relay_only() as relay:
        host = Host(definition, relay.url, session, **host_kwargs)
        host.start()
        try:
            await asyncio.wait_for(host.started.wait(), 10)
            yield relay, host
        finally:
            await host.stop()


@contextlib.asynccontextmanager
async def connected_client(relay, session: str = "s", name: str = "client"):
    client = await SyncClient.connect(relay.url, session, name)
    try:
        yield client
    finally:
        await client.close()
