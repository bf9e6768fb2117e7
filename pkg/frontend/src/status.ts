/** Status bar (connection, peers, per-model revision, latency) and the
 * reconnect banner shown while the relay is unreachable. */

import type { ConnectionState } from "./connection.js";

export class StatusBar {
  readonly root: HTMLElement;
  readonly banner: HTMLElement;
  private state: ConnectionState = "connecting";
  private peers = 0;
  private revisions = new Map<number, number>();
  private latencyMs: number | null = null;

  constructor(doc: Document = document) {
    this.root = doc.createElement("div");
    this.root.className = "status-bar";
    this.banner = doc.createElement("div");
    this.banner.className = "banner";
    this.banner.textContent = "connection lost - reconnecting...";
    this.banner.hidden = true;
    this.render();
  }

  setState(state: ConnectionState): void {
    this.state = state;
    this.banner.hidden = state === "open";
    this.render();
  }

  setPeers(count: number): void {
    this.peers = count;
    this.render();
  }

  setRevision(modelId: number, revision: number): void {
    this.revisions.set(modelId, revision);
    this.render();
  }

  setLatency(ms: number): void {
    this.latencyMs = ms;
    this.render();
  }

  private render(): void {
    const revs = [...this.revisions.entries()]
      .sort(([a], [b]) => a - b)
      .map(([m, r]) => `m${m}:r${r}`)
      .join(" ");
    const latency = this.latencyMs === null ? "-" : `${this.latencyMs.toFixed(0)}ms`;
    this.root.textContent =
      `${this.state} | peers ${this.peers} | ${revs || "no frames"} | ` +
      `edit->frame ${latency}`;
  }
}
