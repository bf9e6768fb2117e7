/**
 * Relay session over a WebSocket, with automatic reconnect.
 *
 * On (re)connect it sends HELLO_CLIENT; the relay replays its cached state
 * (PARAMS, APPLIED values, latest frames) so the view restores without a
 * page reload. Backoff starts at 0.5 s and doubles to a 30 s cap.
 */

import {
  decodeEnvelope,
  decodeMeshFrame,
  encodeEnvelope,
  type DecodedFrame,
  type Envelope,
} from "./protocol.js";

export type ConnectionState = "connecting" | "open" | "closed";

export interface SessionEvents {
  onState?(state: ConnectionState): void;
  onEnvelope?(env: Envelope): void;
  onFrame?(frame: DecodedFrame): void;
}

const BACKOFF_BASE_MS = 500;
const BACKOFF_CAP_MS = 30_000;

export class RelaySession {
  private socket: WebSocket | null = null;
  private attempts = 0;
  private stopped = false;
  private clientSeq = 0;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    readonly url: string,
    readonly session: string,
    readonly name: string,
    private readonly events: SessionEvents,
    private readonly socketFactory: (url: string) => WebSocket =
      (url) => new WebSocket(url),
  ) {}

  connect(): void {
    if (this.stopped) return;
    this.events.onState?.("connecting");
    const socket = this.socketFactory(this.url);
    socket.binaryType = "arraybuffer";
    this.socket = socket;
    socket.onopen = () => {
      this.attempts = 0;
      socket.send(encodeEnvelope(
        { type: "HELLO_CLIENT", session: this.session, name: this.name }));
      this.events.onState?.("open");
    };
    socket.onmessage = (event: MessageEvent) => {
      if (typeof event.data === "string") {
        try {
          this.events.onEnvelope?.(decodeEnvelope(event.data));
        } catch (err) {
          console.warn("viewer: bad envelope ignored:", err);
        }
      } else {
        try {
          this.events.onFrame?.(decodeMeshFrame(event.data as ArrayBuffer));
        } catch (err) {
          console.warn("viewer: bad frame ignored:", err);
        }
      }
    };
    socket.onclose = () => {
      this.socket = null;
      this.events.onState?.("closed");
      this.scheduleReconnect();
    };
    socket.onerror = () => {
      // onclose follows; nothing to do here
    };
  }

  private scheduleReconnect(): void {
    if (this.stopped || this.reconnectTimer !== null) return;
    const delay = Math.min(BACKOFF_BASE_MS * 2 ** this.attempts, BACKOFF_CAP_MS);
    this.attempts += 1;
    this.reconnectTimer = setTimeout(() => {
      this.reconnectTimer = null;
      this.connect();
    }, delay);
  }

  /** Send one edit; returns its client_seq, or -1 while disconnected. */
  setParam(paramId: string, value: number | boolean | string): number {
    if (this.socket === null || this.socket.readyState !== this.socket.OPEN) {
      return -1;
    }
    this.clientSeq += 1;
    this.socket.send(encodeEnvelope({
      type: "SET_PARAM", param_id: paramId, value, client_seq: this.clientSeq,
    }));
    return this.clientSeq;
  }

  close(): void {
    this.stopped = true;
    if (this.reconnectTimer !== null) {
      clearTimeout(this.reconnectTimer);
      this.reconnectTimer = null;
    }
    this.socket?.close();
  }
}
