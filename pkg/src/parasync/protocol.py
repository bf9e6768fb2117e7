"""Wire payloads: binary mesh frames and JSON text control envelopes.

Mesh frame layout (all integers little-endian):

    offset  size  field
    0       4     magic "PMS1"
    4       2     version, u16, currently 1
    6       2     flags, u16; bit 0 = normals present, other bits reserved
    8       4     model_id, u32
    12      4     revision, u32
    16      4     vertex_count, u32
    20      4     triangle_count, u32
    24      ...   positions (V*3 f32), then normals (V*3 f32, if flagged),
                  then triangle indices (T*3 u32)

Envelopes are JSON objects with a "type" discriminator; both codecs are
total (they raise typed errors, never crash) and pure.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, fields as dc_fields

import numpy as np

from parasync.geometry import Mesh, MeshError
from parasync.params import ParamDescriptor

MAGIC = b"PMS1"
VERSION = 1
FLAG_NORMALS = 0x0001
_HEADER = struct.Struct("<4sHHIIII")
HEADER_SIZE = _HEADER.size  # 24
_U32_MAX = 2 ** 32 - 1


class FrameError(ValueError):
    """Mesh frame encode/decode failure with a stable `code`."""

    def __init__(self, code: str, message: str):
        self.code = code
        super().__init__(f"{code}: {message}")


class EnvelopeError(ValueError):
    """Envelope encode/decode failure with a stable `code`."""

    def __init__(self, code: str, message: str):
        self.code = code
        super().__init__(f"{code}: {message}")


# --- binary mesh frames -----------------------------------------------------------


def _check_u32(label: str, value) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise FrameError("bad_field", f"{label} must be an integer, got {value!r}")
    if not 0 <= value <= _U32_MAX:
        raise FrameError("bad_field", f"{label} {value} outside u32 range")
    return int(value)


def encode_mesh(model_id: int, revision: int, mesh: Mesh) -> bytes:
    """Serialize one mesh under (model_id, revision). Deterministic."""
    model_id = _check_u32("model_id", model_id)
    revision = _check_u32("revision", revision)
    nv = _check_u32("vertex_count", mesh.vertex_count)
    nt = _check_u32("triangle_count", mesh.triangle_count)
    flags = FLAG_NORMALS if mesh.normals is not None else 0
    parts = [
        _HEADER.pack(MAGIC, VERSION, flags, model_id, revision, nv, nt),
        mesh.positions.astype("<f4").tobytes(),
    ]
    if mesh.normals is not None:
        parts.append(mesh.normals.astype("<f4").tobytes())
    parts.append(mesh.triangles.astype("<u4").tobytes())
    return b"".join(parts)


def decode_mesh(data: bytes) -> tuple[int, int, Mesh]:
    """Parse a mesh frame; total over arbitrary bytes (raises FrameError)."""
    if not isinstance(data, (bytes, bytearray, memoryview)):
        raise FrameError("bad_field", "frame must be a byte sequence")
    data = bytes(data)
    if len(data) < HEADER_SIZE:
        raise FrameError("truncated", f"{len(data)} bytes is shorter than the "
                                      f"{HEADER_SIZE}-byte header")
    magic, version, flags, model_id, revision, nv, nt = _HEADER.unpack(
        data[:HEADER_SIZE])
    if magic != MAGIC:
        raise FrameError("bad_magic", f"expected {MAGIC!r}, got {magic!r}")
    if version != VERSION:
        raise FrameError("bad_version", f"unsupported version {version}")
    if flags & ~FLAG_NORMALS:
        raise FrameError("bad_flags", f"unknown flag bits 0x{flags:04x}")
    has_normals = bool(flags & FLAG_NORMALS)
    expected = HEADER_SIZE + 12 * nv * (2 if has_normals else 1) + 12 * nt
    if len(data) < expected:
        raise FrameError("truncated", f"need {expected} bytes, got {len(data)}")
    if len(data) > expected:
        raise FrameError("trailing_bytes",
                         f"{len(data) - expected} bytes after the frame body")

    offset = HEADER_SIZE
    positions = np.frombuffer(data, "<f4", count=3 * nv, offset=offset)
    positions = positions.astype(np.float64).reshape(-1, 3)
    offset += 12 * nv
    normals = None
    if has_normals:
        normals = np.frombuffer(data, "<f4", count=3 * nv, offset=offset)
        normals = normals.astype(np.float64).reshape(-1, 3)
        offset += 12 * nv
    indices = np.frombuffer(data, "<u4", count=3 * nt, offset=offset)

    if not np.isfinite(positions).all() or (
            normals is not None and not np.isfinite(normals).all()):
        raise FrameError("non_finite_float", "frame contains NaN or infinity")
    if nt and int(indices.max()) >= nv:
        raise FrameError("index_out_of_range",
                         f"index {int(indices.max())} >= vertex count {nv}")
    try:
        mesh = Mesh(positions=positions, triangles=indices.reshape(-1, 3).copy(),
                    normals=normals)
    except MeshError as exc:
        raise FrameError("invalid_mesh", str(exc)) from exc
    return model_id, revision, mesh


# --- text control envelopes ---------------------------------------------------------


def _need(kind_ok, describe):
    def check(name, value):
        if not kind_ok(value):
            raise EnvelopeError("bad_field", f"field {name!r} must be {describe}, "
                                             f"got {value!r}")
        return value
    return check


_str = _need(lambda v: isinstance(v, str), "a string")
_uint = _need(lambda v: isinstance(v, int) and not isinstance(v, bool) and v >= 0,
              "a non-negative integer")
_scalar = _need(lambda v: isinstance(v, (int, str)) and not isinstance(v, bool),
                "an integer or string")
_value = _need(lambda v: isinstance(v, (int, float, bool, str)),
               "a number, boolean, or string")
_str_list = _need(lambda v: isinstance(v, list) and all(isinstance(x, str) for x in v),
                  "a list of strings")
_obj_list = _need(lambda v: isinstance(v, list) and all(isinstance(x, dict) for x in v),
                  "a list of objects")


def _revmap(name, value):
    if not isinstance(value, dict):
        raise EnvelopeError("bad_field", f"field {name!r} must be an object")
    out = {}
    for k, v in value.items():
        if not (isinstance(k, str) and k.isdigit()):
            raise EnvelopeError("bad_field", f"field {name!r}: key {k!r} is not "
                                             "a model id")
        if isinstance(v, bool) or not isinstance(v, int) or v < 0:
            raise EnvelopeError("bad_field", f"field {name!r}: revision {v!r} "
                                             "must be a non-negative integer")
        out[int(k)] = v
    return out


def _revmap_out(value: dict) -> dict:
    return {str(k): v for k, v in value.items()}


@dataclass
class HelloHost:
    session: str
    name: str


@dataclass
class HelloClient:
    session: str
    name: str


@dataclass
class Params:
    params: list

    @classmethod
    def from_descriptors(cls, descriptors: list[ParamDescriptor]) -> "Params":
        return cls(params=[d.to_wire() for d in descriptors])

    def descriptors(self) -> list[ParamDescriptor]:
        return [ParamDescriptor.from_wire(obj) for obj in self.params]


@dataclass
class SetParam:
    param_id: str
    value: object
    client_seq: int
    relay_seq: int | None = None  # stamped by the relay in arrival order


@dataclass
class Applied:
    param_id: str
    value: object
    param_revision: int
    model_revisions: dict


@dataclass
class Error:
    code: str
    message: str
    in_reply_to: int | None = None


@dataclass
class Peers:
    clients: list
    host: str | None = None
    # cached mesh revisions; sent to a joining host so its next frames
    # stay strictly above everything clients have already seen
    model_revisions: dict | None = None


@dataclass
class Ping:
    nonce: object


@dataclass
class Pong:
    nonce: object


# type tag -> (class, {field: (validator, required, encoder)})
_SCHEMA = {
    "HELLO_HOST": (HelloHost, {"session": (_str, True, None),
                               "name": (_str, True, None)}),
    "HELLO_CLIENT": (HelloClient, {"session": (_str, True, None),
                                   "name": (_str, True, None)}),
    "PARAMS": (Params, {"params": (_obj_list, True, None)}),
    "SET_PARAM": (SetParam, {"param_id": (_str, True, None),
                             "value": (_value, True, None),
                             "client_seq": (_uint, True, None),
                             "relay_seq": (_uint, False, None)}),
    "APPLIED": (Applied, {"param_id": (_str, True, None),
                          "value": (_value, True, None),
                          "param_revision": (_uint, True, None),
                          "model_revisions": (_revmap, True, _revmap_out)}),
    "ERROR": (Error, {"code": (_str, True, None),
                      "message": (_str, True, None),
                      "in_reply_to": (_uint, False, None)}),
    "PEERS": (Peers, {"clients": (_str_list, True, None),
                      "host": (_str, False, None),
                      "model_revisions": (_revmap, False, _revmap_out)}),
    "PING": (Ping, {"nonce": (_scalar, True, None)}),
    "PONG": (Pong, {"nonce": (_scalar, True, None)}),
}

_TYPE_BY_CLASS = {cls: tag for tag, (cls, _) in _SCHEMA.items()}

Envelope = (HelloHost | HelloClient | Params | SetParam | Applied | Error
            | Peers | Ping | Pong)


def encode_envelope(env) -> str:
    """Envelope dataclass -> compact JSON text. Unset optionals are omitted."""
    tag = _TYPE_BY_CLASS.get(type(env))
    if tag is None:
        raise EnvelopeError("unknown_type", f"not an envelope: {type(env).__name__}")
    _, schema = _SCHEMA[tag]
    obj = {"type": tag}
    for f in dc_fields(env):
        value = getattr(env, f.name)
        if value is None and not schema[f.name][1]:
            continue
        encoder = schema[f.name][2]
        obj[f.name] = encoder(value) if encoder else value
    return json.dumps(obj, separators=(",", ":"))


def decode_envelope(text: str) -> Envelope:
    """JSON text -> envelope dataclass, with strict per-type field checks."""
    try:
        obj = json.loads(text)
    except (json.JSONDecodeError, TypeError, ValueError) as exc:
        raise EnvelopeError("parse_error", f"not valid JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise EnvelopeError("bad_field", "envelope must be a JSON object")
    if "type" not in obj:
        raise EnvelopeError("missing_field", "missing field 'type'")
    tag = obj["type"]
    if not isinstance(tag, str) or tag not in _SCHEMA:
        raise EnvelopeError("unknown_type", f"unknown envelope type {tag!r}")
    cls, schema = _SCHEMA[tag]
    unknown = set(obj) - set(schema) - {"type"}
    if unknown:
        raise EnvelopeError("bad_field", f"{tag}: unknown field(s) {sorted(unknown)}")
    kwargs = {}
    for name, (validator, required, _) in schema.items():
        if name not in obj:
            if required:
                raise EnvelopeError("missing_field", f"{tag}: missing field {name!r}")
            continue
        kwargs[name] = validator(name, obj[name])
    return cls(**kwargs)
