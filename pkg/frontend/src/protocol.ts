/**
 * Wire protocol: binary mesh frames and JSON control envelopes.
 *
 * The frame layout mirrors PROTOCOL.md exactly (little-endian, 24-byte
 * header, f32 positions/normals, u32 indices) and this decoder reports the
 * same error codes as the reference decoder; the shared test-vector file
 * pins the two together.
 */

export const FRAME_MAGIC = 0x31534d50; // "PMS1" read as LE u32
export const FRAME_VERSION = 1;
export const FLAG_NORMALS = 0x0001;
export const HEADER_SIZE = 24;

export class FrameDecodeError extends Error {
  constructor(public readonly code: string, message: string) {
    super(`${code}: ${message}`);
  }
}

export interface DecodedFrame {
  modelId: number;
  revision: number;
  vertexCount: number;
  triangleCount: number;
  positions: Float32Array;
  normals: Float32Array | null;
  indices: Uint32Array;
  byteLength: number;
}

export function decodeMeshFrame(buffer: ArrayBuffer): DecodedFrame {
  if (buffer.byteLength < HEADER_SIZE) {
    throw new FrameDecodeError(
      "truncated",
      `${buffer.byteLength} bytes is shorter than the ${HEADER_SIZE}-byte header`,
    );
  }
  const view = new DataView(buffer);
  if (view.getUint32(0, true) !== FRAME_MAGIC) {
    throw new FrameDecodeError("bad_magic", "expected PMS1");
  }
  const version = view.getUint16(4, true);
  if (version !== FRAME_VERSION) {
    throw new FrameDecodeError("bad_version", `unsupported version ${version}`);
  }
  const flags = view.getUint16(6, true);
  if ((flags & ~FLAG_NORMALS) !== 0) {
    throw new FrameDecodeError("bad_flags", `unknown flag bits 0x${flags.toString(16)}`);
  }
  const hasNormals = (flags & FLAG_NORMALS) !== 0;
  const modelId = view.getUint32(8, true);
  const revision = view.getUint32(12, true);
  const vertexCount = view.getUint32(16, true);
  const triangleCount = view.getUint32(20, true);
  const expected =
    HEADER_SIZE + 12 * vertexCount * (hasNormals ? 2 : 1) + 12 * triangleCount;
  if (buffer.byteLength < expected) {
    throw new FrameDecodeError(
      "truncated", `need ${expected} bytes, got ${buffer.byteLength}`);
  }
  if (buffer.byteLength > expected) {
    throw new FrameDecodeError(
      "trailing_bytes", `${buffer.byteLength - expected} bytes after the frame body`);
  }

  // copy out of the frame so the buffers are independently transferable
  let offset = HEADER_SIZE;
  const positions = new Float32Array(buffer.slice(offset, offset + 12 * vertexCount));
  offset += 12 * vertexCount;
  let normals: Float32Array | null = null;
  if (hasNormals) {
    normals = new Float32Array(buffer.slice(offset, offset + 12 * vertexCount));
    offset += 12 * vertexCount;
  }
  const indices = new Uint32Array(buffer.slice(offset, offset + 12 * triangleCount));

  for (const arr of normals ? [positions, normals] : [positions]) {
    for (let i = 0; i < arr.length; i += 1) {
      if (!Number.isFinite(arr[i])) {
        throw new FrameDecodeError("non_finite_float", "frame contains NaN or infinity");
      }
    }
  }
  for (let i = 0; i < indices.length; i += 1) {
    const idx = indices[i]!;
    if (idx >= vertexCount) {
      throw new FrameDecodeError(
        "index_out_of_range", `index ${idx} >= vertex count ${vertexCount}`);
    }
  }
  return {
    modelId, revision, vertexCount, triangleCount,
    positions, normals, indices, byteLength: buffer.byteLength,
  };
}

// --- envelopes -------------------------------------------------------------

export interface WireDescriptor {
  id: string;
  name: string;
  kind: "real" | "integer" | "boolean" | "choice";
  value: number | boolean | string;
  min?: number;
  max?: number;
  native_step?: number | "continuous";
  quantized_step?: number;
  choices?: string[];
}

export type Envelope =
  | { type: "HELLO_HOST"; session: string; name: string }
  | { type: "HELLO_CLIENT"; session: string; name: string }
  | { type: "PARAMS"; params: WireDescriptor[] }
  | { type: "SET_PARAM"; param_id: string; value: number | boolean | string;
      client_seq: number; relay_seq?: number }
  | { type: "APPLIED"; param_id: string; value: number | boolean | string;
      param_revision: number; model_revisions: Record<string, number> }
  | { type: "ERROR"; code: string; message: string; in_reply_to?: number }
  | { type: "PEERS"; clients: string[]; host?: string;
      model_revisions?: Record<string, number> }
  | { type: "PING"; nonce: number | string }
  | { type: "PONG"; nonce: number | string };

export class EnvelopeError extends Error {
  constructor(public readonly code: string, message: string) {
    super(`${code}: ${message}`);
  }
}

const ENVELOPE_TYPES = new Set([
  "HELLO_HOST", "HELLO_CLIENT", "PARAMS", "SET_PARAM", "APPLIED",
  "ERROR", "PEERS", "PING", "PONG",
]);

const REQUIRED_FIELDS: Record<string, string[]> = {
  HELLO_HOST: ["session", "name"],
  HELLO_CLIENT: ["session", "name"],
  PARAMS: ["params"],
  SET_PARAM: ["param_id", "value", "client_seq"],
  APPLIED: ["param_id", "value", "param_revision", "model_revisions"],
  ERROR: ["code", "message"],
  PEERS: ["clients"],
  PING: ["nonce"],
  PONG: ["nonce"],
};

export function decodeEnvelope(text: string): Envelope {
  let obj: unknown;
  try {
    obj = JSON.parse(text);
  } catch (err) {
    throw new EnvelopeError("parse_error", `not valid JSON: ${err}`);
  }
  if (typeof obj !== "object" || obj === null || Array.isArray(obj)) {
    throw new EnvelopeError("bad_field", "envelope must be a JSON object");
  }
  const record = obj as Record<string, unknown>;
  if (!("type" in record)) {
    throw new EnvelopeError("missing_field", "missing field 'type'");
  }
  const type = record["type"];
  if (typeof type !== "string" || !ENVELOPE_TYPES.has(type)) {
    throw new EnvelopeError("unknown_type", `unknown envelope type ${String(type)}`);
  }
  for (const field of REQUIRED_FIELDS[type]!) {
    if (!(field in record)) {
      throw new EnvelopeError("missing_field", `${type}: missing field '${field}'`);
    }
  }
  return record as unknown as Envelope;
}

export function encodeEnvelope(env: Envelope): string {
  return JSON.stringify(env);
}
