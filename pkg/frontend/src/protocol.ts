/**
 * Wire protocol of the teleoperation service.
 *
 * Every frame in both directions is a JSON text message
 * `{"type": ..., "payload": ...}`; client frames may carry a `client_seq`
 * echoed on the matching ack or error. See docs/formats.md in the
 * repository root for the schema.
 */

export type Vec3 = [number, number, number];

export interface PoseDoc {
  position: Vec3;
  rotation: [Vec3, Vec3, Vec3];
}

export interface SessionLimits {
  max_linear_speed: number;
  max_angular_rate: number;
}

export interface HelloPayload {
  protocol_version: number;
  scenario: string;
  snapshot_rate: number;
  timestep: number;
  limits: SessionLimits;
  scenarios: string[];
}

export interface EnergyBreakdown {
  elastic: number;
  internal_magnetic: number;
  controller_magnetic: number;
  external: number;
  total: number;
}

export type StateLabel = "alpha" | "beta" | "gamma" | "transitional";

export interface SnapshotPayload {
  t: number;
  config: { base_pose: PoseDoc; hinge_angles: number[] };
  epm_pose: PoseDoc;
  label: StateLabel;
  energy: EnergyBreakdown;
  end_gap_m: number;
  alignment: number;
  paused: boolean;
  recording: boolean;
  error?: string;
}

export type ServerMessage =
  | { type: "hello"; payload: HelloPayload }
  | { type: "snapshot"; payload: SnapshotPayload }
  | { type: "ack"; payload: Record<string, unknown>; client_seq?: number }
  | { type: "error"; payload: { message: string }; client_seq?: number };

export interface VelocityCommand {
  linear: Vec3;
  angular: Vec3;
}

export type ClientMessage =
  | { type: "set_epm_velocity"; payload: VelocityCommand; client_seq: number }
  | { type: "set_epm_pose"; payload: PoseDoc; client_seq: number }
  | { type: "pause" | "resume" | "reset" | "start_recording"; payload: Record<string, never>; client_seq: number }
  | { type: "stop_recording"; payload: { name?: string }; client_seq: number };

const SERVER_TYPES = new Set(["hello", "snapshot", "ack", "error"]);
const LABELS = new Set(["alpha", "beta", "gamma", "transitional"]);

/** Parse and structurally validate one server frame; throws on garbage. */
export function parseServerMessage(raw: string): ServerMessage {
  let doc: unknown;
  try {
    doc = JSON.parse(raw);
  } catch {
    throw new Error("server frame is not valid JSON");
  }
  if (typeof doc !== "object" || doc === null) {
    throw new Error("server frame is not an object");
  }
  const msg = doc as { type?: unknown; payload?: unknown };
  if (typeof msg.type !== "string" || !SERVER_TYPES.has(msg.type)) {
    throw new Error(`unknown server frame type: ${String(msg.type)}`);
  }
  if (typeof msg.payload !== "object" || msg.payload === null) {
    throw new Error(`${msg.type} frame has no payload`);
  }
  if (msg.type === "snapshot") {
    const p = msg.payload as Partial<SnapshotPayload>;
    if (
      typeof p.t !== "number" ||
      typeof p.end_gap_m !== "number" ||
      typeof p.label !== "string" ||
      !LABELS.has(p.label) ||
      !Array.isArray(p.config?.hinge_angles)
    ) {
      throw new Error("malformed snapshot payload");
    }
  }
  if (msg.type === "hello") {
    const p = msg.payload as Partial<HelloPayload>;
    if (typeof p.protocol_version !== "number" || !p.limits) {
      throw new Error("malformed hello payload");
    }
  }
  if (msg.type === "error") {
    const p = msg.payload as { message?: unknown };
    if (typeof p.message !== "string") {
      throw new Error("malformed error payload");
    }
  }
  return msg as ServerMessage;
}

export const SUPPORTED_PROTOCOL_VERSION = 1;
