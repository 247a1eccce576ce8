/**
 * Browser entry point: connects to the teleoperation service, maps
 * keyboard input to commands, renders the live scene, and offers the
 * recorded control script as a download.
 */

import {
  parseServerMessage,
  SUPPORTED_PROTOCOL_VERSION,
  type HelloPayload,
  type SnapshotPayload,
} from "./protocol.js";
import { InputMapper, type InputEventRecord } from "./inputMap.js";
import { SnapshotHistory } from "./history.js";
import { drawScene, drawSparkline, STATE_COLORS, type Viewport } from "./render.js";

const WS_URL =
  new URLSearchParams(location.search).get("ws") ??
  `ws://${location.hostname || "localhost"}:8090/ws`;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

function setStatus(text: string, ok: boolean): void {
  const status = el<HTMLSpanElement>("status");
  status.textContent = text;
  status.style.color = ok ? "#16a34a" : "#dc2626";
}

function offerDownload(doc: unknown, name: string): void {
  const blob = new Blob([JSON.stringify(doc, null, 2)], {
    type: "application/json",
  });
  const url = URL.createObjectURL(blob);
  const a = document.createElement("a");
  a.href = url;
  a.download = `${name}.json`;
  a.click();
  URL.revokeObjectURL(url);
}

function normalizeKeyEvent(ev: KeyboardEvent, kind: "keydown" | "keyup"): InputEventRecord {
  return { kind, key: ev.key.length === 1 ? ev.key.toLowerCase() : ev.key.toLowerCase() };
}

function run(): void {
  const scene = el<HTMLCanvasElement>("scene");
  const gapPlot = el<HTMLCanvasElement>("gap-plot");
  const energyPlot = el<HTMLCanvasElement>("energy-plot");
  const sceneCtx = scene.getContext("2d");
  const gapCtx = gapPlot.getContext("2d");
  const energyCtx = energyPlot.getContext("2d");
  if (sceneCtx === null || gapCtx === null || energyCtx === null) {
    throw new Error("2d canvas is unavailable");
  }

  const history = new SnapshotHistory(900);
  let mapper: InputMapper | null = null;
  let hello: HelloPayload | null = null;
  let clientSeq = 0;

  const ws = new WebSocket(WS_URL);
  setStatus(`connecting to ${WS_URL}`, false);

  function send(type: string, payload: unknown): void {
    if (ws.readyState !== WebSocket.OPEN) {
      return;
    }
    clientSeq += 1;
    ws.send(JSON.stringify({ type, payload, client_seq: clientSeq }));
  }

  function render(snap: SnapshotPayload): void {
    const vp: Viewport = {
      scale: 3200,
      centerX: snap.config.base_pose.position[0],
      centerY: snap.config.base_pose.position[1],
      width: scene.width,
      height: scene.height,
    };
    drawScene(sceneCtx!, snap, vp);
    drawSparkline(gapCtx!, history.endGapSeries(), gapPlot.width, gapPlot.height, "#2563eb");
    drawSparkline(energyCtx!, history.energySeries(), energyPlot.width, energyPlot.height, "#d97706");

    el<HTMLSpanElement>("label").textContent = snap.label;
    el<HTMLSpanElement>("label").style.color = STATE_COLORS[snap.label] ?? "#111827";
    el<HTMLSpanElement>("sim-time").textContent = `${snap.t.toFixed(2)} s`;
    el<HTMLSpanElement>("gap").textContent = `${(snap.end_gap_m * 1e3).toFixed(2)} mm`;
    el<HTMLSpanElement>("energy").textContent = `${snap.energy.total.toExponential(3)} J`;
    el<HTMLSpanElement>("flags").textContent = [
      snap.paused ? "paused" : "running",
      snap.recording ? "recording" : "",
      snap.error ?? "",
    ]
      .filter((s) => s.length > 0)
      .join(" | ");
  }

  ws.onmessage = (ev) => {
    let msg;
    try {
      msg = parseServerMessage(String(ev.data));
    } catch (err) {
      console.error(err);
      return;
    }
    if (msg.type === "hello") {
      hello = msg.payload;
      if (hello.protocol_version !== SUPPORTED_PROTOCOL_VERSION) {
        setStatus(`protocol version mismatch: ${hello.protocol_version}`, false);
        ws.close();
        return;
      }
      mapper = new InputMapper(hello.limits);
      setStatus(`connected (${hello.scenario}, ${hello.snapshot_rate} Hz)`, true);
    } else if (msg.type === "snapshot") {
      history.push(msg.payload);
      if (mapper !== null) {
        mapper.syncState(msg.payload.paused, msg.payload.recording);
      }
      render(msg.payload);
    } else if (msg.type === "ack") {
      // a finished recording arrives as the ack of stop_recording
      const script = (msg.payload as { script?: { name?: string } }).script;
      if (script !== undefined) {
        offerDownload(script, script.name ?? "recorded");
      }
    } else if (msg.type === "error") {
      setStatus(msg.payload.message, false);
    }
  };

  ws.onclose = () => setStatus("disconnected", false);
  ws.onerror = () => setStatus("connection error", false);

  function feed(ev: InputEventRecord): void {
    if (mapper === null) {
      return;
    }
    for (const draft of mapper.handleEvent(ev)) {
      send(draft.type, draft.payload);
    }
  }

  window.addEventListener("keydown", (ev) => {
    if (ev.repeat) {
      return;
    }
    feed(normalizeKeyEvent(ev, "keydown"));
  });
  window.addEventListener("keyup", (ev) => feed(normalizeKeyEvent(ev, "keyup")));
  window.addEventListener("blur", () => feed({ kind: "blur" }));
}

run();
