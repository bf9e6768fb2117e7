/**
 * Viewer bootstrap: read ?relay=…&session=… from the query string, connect,
 * build controls from the announcement, and render streamed frames.
 */

import { RelaySession } from "./connection.js";
import { ControlPanel } from "./controls.js";
import { ModelScene } from "./scene.js";
import { StatusBar } from "./status.js";

function queryDefaults(): { relay: string; session: string; name: string } {
  const q = new URLSearchParams(window.location.search);
  return {
    relay: q.get("relay") ?? "ws://127.0.0.1:8700/ws",
    session: q.get("session") ?? "default",
    name: q.get("name") ?? "viewer",
  };
}

export function startViewer(root: HTMLElement): void {
  const { relay, session, name } = queryDefaults();

  const canvas = document.createElement("canvas");
  canvas.className = "viewport";
  const scene = new ModelScene();
  const status = new StatusBar();
  let lastEditAt: number | null = null;

  const connection = new RelaySession(relay, session, name, {
    onState: (state) => status.setState(state),
    onEnvelope: (env) => {
      switch (env.type) {
        case "PARAMS":
          panel.build(env.params);
          break;
        case "APPLIED":
          panel.applyAuthoritative(env.param_id, env.value);
          break;
        case "PEERS":
          status.setPeers(env.clients.length);
          break;
        case "ERROR":
          console.warn(`relay error ${env.code}: ${env.message}`);
          break;
        default:
          break;
      }
    },
    onFrame: (frame) => {
      scene.applyFrame(frame);
      status.setRevision(frame.modelId, frame.revision);
      if (lastEditAt !== null) {
        status.setLatency(performance.now() - lastEditAt);
        lastEditAt = null;
      }
    },
  });

  const panel = new ControlPanel((paramId, value) => {
    lastEditAt = performance.now();
    connection.setParam(paramId, value);
  });

  root.append(canvas, panel.root, status.banner, status.root);
  scene.attachRenderer(canvas);
  connection.connect();
}

const mount = document.getElementById("app");
if (mount) {
  startViewer(mount);
}
