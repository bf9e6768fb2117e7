"""parasync command line: relay, host, scripted client, latency bench.

Exit codes: 0 success, 1 usage, 2 remote error, 3 timeout, 4 connect
failure. The PARASYNC_RELAY environment variable overrides --relay.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import os
import random
import statistics
import sys

import aiohttp

from parasync import __version__
from parasync.client import ClientRemoteError, SyncClient
from parasync.geometry import export_obj
from parasync.graph import GraphError
from parasync.host import Host, HostError
from parasync.params import ParamError
from parasync.relay import (
    DEFAULT_FRAME_CAP,
    DEFAULT_HEARTBEAT,
    DEFAULT_LISTEN,
    RelayConfig,
    run_relay,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_REMOTE = 2
EXIT_TIMEOUT = 3
EXIT_CONNECT = 4

DEFAULT_RELAY = "ws://127.0.0.1:8700/ws"
DEFAULT_SESSION = "default"


class Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the documented usage code is 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def resolve_relay_url(flag_value: str | None) -> str:
    url = os.environ.get("PARASYNC_RELAY") or flag_value or DEFAULT_RELAY
    if "://" not in url:
        url = "ws://" + url
    scheme, rest = url.split("://", 1)
    if "/" not in rest:
        url = f"{scheme}://{rest}/ws"
    return url


def build_parser() -> Parser:
    parser = Parser(prog="parasync",
                    description="Live parametric-model synchronization.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_relay = sub.add_parser("relay", help="run the relay server")
    p_relay.add_argument("--listen", default=os.environ.get("PARASYNC_LISTEN",
                                                            DEFAULT_LISTEN),
                         help=f"HOST:PORT to bind (default {DEFAULT_LISTEN})")
    p_relay.add_argument("--frame-cap", type=int,
                         default=int(os.environ.get("PARASYNC_FRAME_CAP",
                                                    DEFAULT_FRAME_CAP)),
                         help="max frame size in bytes before the peer is dropped")
    p_relay.add_argument("--heartbeat", type=float,
                         default=float(os.environ.get("PARASYNC_HEARTBEAT",
                                                      DEFAULT_HEARTBEAT)),
                         help="WebSocket heartbeat interval in seconds")

    p_host = sub.add_parser("host", help="run a definition as session host")
    p_host.add_argument("--definition", required=True,
                        help="graph definition JSON file")
    p_host.add_argument("--relay", default=None, help="relay WebSocket URL")
    p_host.add_argument("--session", default=DEFAULT_SESSION)
    p_host.add_argument("--name", default="host")
    p_host.add_argument("--debounce", type=float, default=33.0,
                        help="edit coalescing window in milliseconds")

    p_client = sub.add_parser("client", help="scripted session client")
    client_sub = p_client.add_subparsers(dest="client_command", required=True)

    def client_common(p):
        p.add_argument("--relay", default=None)
        p.add_argument("--session", default=DEFAULT_SESSION)
        p.add_argument("--name", default="cli")
        p.add_argument("--timeout", type=float, default=5.0)
        p.add_argument("--json", action="store_true",
                       help="line-delimited JSON output")

    p_params = client_sub.add_parser("params",
                                     help="print announced descriptors")
    client_common(p_params)

    p_set = client_sub.add_parser("set", help="apply parameter edits")
    p_set.add_argument("assignments", nargs="+", metavar="PARAM VALUE",
                       help="one or more PARAM VALUE pairs")
    client_common(p_set)

    p_watch = client_sub.add_parser("watch", help="print received mesh frames")
    p_watch.add_argument("--count", type=int, required=True,
                         help="number of frames to print before exiting")
    client_common(p_watch)

    p_dump = client_sub.add_parser("dump", help="write the latest mesh as OBJ")
    p_dump.add_argument("--model", type=int, default=0)
    p_dump.add_argument("--out", required=True, help="output .obj path")
    client_common(p_dump)

    p_bench = sub.add_parser("bench", help="measure edit-to-frame latency")
    p_bench.add_argument("--edits", type=int, default=50)
    p_bench.add_argument("--seed", type=int, default=None)
    p_bench.add_argument("--relay", default=None)
    p_bench.add_argument("--session", default=DEFAULT_SESSION)
    p_bench.add_argument("--name", default="bench")
    p_bench.add_argument("--timeout", type=float, default=10.0)
    p_bench.add_argument("--json", action="store_true")
    return parser


# --- subcommand bodies --------------------------------------------------------


def cmd_relay(args) -> int:
    try:
        config = RelayConfig.from_listen(args.listen, frame_cap=args.frame_cap,
                                         heartbeat=args.heartbeat)
    except ValueError as exc:
        print(f"parasync relay: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        asyncio.run(run_relay(config))
    except KeyboardInterrupt:
        pass
    except OSError as exc:
        print(f"parasync relay: {exc}", file=sys.stderr)
        return EXIT_CONNECT
    return EXIT_OK


def cmd_host(args) -> int:
    try:
        host = Host(args.definition, resolve_relay_url(args.relay),
                    args.session, name=args.name,
                    debounce=args.debounce / 1000.0)
    except (GraphError, ParamError) as exc:
        print(f"parasync host: invalid definition: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"parasync host: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        asyncio.run(host.run())
    except KeyboardInterrupt:
        pass
    except HostError as exc:
        print(f"parasync host: {exc}", file=sys.stderr)
        return EXIT_CONNECT
    return EXIT_OK


async def _with_client(args, body) -> int:
    url = resolve_relay_url(args.relay)
    try:
        client = await SyncClient.connect(url, args.session, args.name)
    except (aiohttp.ClientError, OSError) as exc:
        print(f"parasync: cannot connect to {url}: {exc}", file=sys.stderr)
        return EXIT_CONNECT
    try:
        return await body(client)
    except ClientRemoteError as exc:
        print(f"parasync: remote error: {exc}", file=sys.stderr)
        return EXIT_REMOTE
    except asyncio.TimeoutError:
        print("parasync: timed out waiting for the relay/host", file=sys.stderr)
        return EXIT_TIMEOUT
    except ConnectionError as exc:
        print(f"parasync: connection lost: {exc}", file=sys.stderr)
        return EXIT_CONNECT
    finally:
        await client.close()


def cmd_client_params(args) -> int:
    async def body(client: SyncClient) -> int:
        params = await client.wait_params(args.timeout)
        doc = [d.to_wire() for d in params]
        print(json.dumps(doc) if args.json else json.dumps(doc, indent=2))
        return EXIT_OK

    return asyncio.run(_with_client(args, body))


def parse_value(token: str):
    try:
        return json.loads(token)
    except json.JSONDecodeError:
        return token  # bare strings are choice values


def format_value(value) -> str:
    if isinstance(value, float) and value.is_integer():
        return str(int(value))
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def cmd_client_set(args) -> int:
    if len(args.assignments) % 2:
        print("parasync client set: PARAM VALUE arguments must come in pairs",
              file=sys.stderr)
        return EXIT_USAGE
    pairs = [(args.assignments[i], parse_value(args.assignments[i + 1]))
             for i in range(0, len(args.assignments), 2)]

    async def body(client: SyncClient) -> int:
        for param_id, value in pairs:
            applied = await client.set_param(param_id, value, args.timeout)
            if args.json:
                print(json.dumps({"param_id": applied.param_id,
                                  "value": applied.value,
                                  "param_revision": applied.param_revision}))
            else:
                print(format_value(applied.value))
        return EXIT_OK

    return asyncio.run(_with_client(args, body))


def cmd_client_watch(args) -> int:
    async def body(client: SyncClient) -> int:
        for _ in range(args.count):
            record = await client.next_frame(args.timeout)
            mesh = record.mesh
            if args.json:
                print(json.dumps({
                    "model_id": record.model_id, "revision": record.revision,
                    "vertices": mesh.vertex_count,
                    "triangles": mesh.triangle_count,
                    "bytes": record.byte_length,
                }), flush=True)
            else:
                print(f"model={record.model_id} revision={record.revision} "
                      f"vertices={mesh.vertex_count} "
                      f"triangles={mesh.triangle_count} "
                      f"bytes={record.byte_length}", flush=True)
        return EXIT_OK

    return asyncio.run(_with_client(args, body))


def cmd_client_dump(args) -> int:
    async def body(client: SyncClient) -> int:
        revision, mesh = await client.wait_mesh(args.model, args.timeout)
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(export_obj(mesh))
        print(f"wrote {args.out}: model {args.model} revision {revision}, "
              f"{mesh.vertex_count} vertices, {mesh.triangle_count} triangles",
              file=sys.stderr)
        return EXIT_OK

    return asyncio.run(_with_client(args, body))


def cmd_bench(args) -> int:
    rng = random.Random(args.seed)

    async def body(client: SyncClient) -> int:
        params = await client.wait_params(args.timeout)
        editable = [d for d in params]
        if not editable:
            print("parasync bench: session announces no parameters",
                  file=sys.stderr)
            return EXIT_REMOTE
        latencies_ms = []
        for _ in range(args.edits):
            desc = rng.choice(editable)
            value = rng.choice(desc.selectable())
            _applied, latency = await client.edit_round_trip(
                desc.id, value, args.timeout)
            latencies_ms.append(latency * 1000.0)
        ordered = sorted(latencies_ms)
        p95 = ordered[min(len(ordered) - 1,
                          max(0, -(-len(ordered) * 95 // 100) - 1))]
        stats = {
            "edits": len(ordered),
            "min_ms": round(ordered[0], 3),
            "mean_ms": round(statistics.fmean(ordered), 3),
            "p95_ms": round(p95, 3),
            "max_ms": round(ordered[-1], 3),
        }
        if args.json:
            print(json.dumps(stats))
        else:
            print(f"edits={stats['edits']} min={stats['min_ms']}ms "
                  f"mean={stats['mean_ms']}ms p95={stats['p95_ms']}ms "
                  f"max={stats['max_ms']}ms")
        return EXIT_OK

    return asyncio.run(_with_client(args, body))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "relay":
        return cmd_relay(args)
    if args.command == "host":
        return cmd_host(args)
    if args.command == "bench":
        return cmd_bench(args)
    handlers = {"params": cmd_client_params, "set": cmd_client_set,
                "watch": cmd_client_watch, "dump": cmd_client_dump}
    return handlers[args.client_command](args)


if __name__ == "__main__":
    sys.exit(main())
