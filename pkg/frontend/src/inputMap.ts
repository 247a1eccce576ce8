/**
 * Keyboard-to-command mapping.
 *
 * Pure logic, no DOM: the mapper consumes normalized input events and
 * emits command drafts (type + payload, without sequence numbers). The
 * server rejects combined linear+angular velocity, so rotation keys take
 * precedence over translation keys while held; caps from the hello
 * message bound every emitted velocity.
 */

import type { SessionLimits, VelocityCommand } from "./protocol.js";

export interface InputEventRecord {
  kind: "keydown" | "keyup" | "blur";
  /** Normalized key name (lowercase; " " for space). Absent for blur. */
  key?: string;
}

export type CommandDraft =
  | { type: "set_epm_velocity"; payload: VelocityCommand }
  | { type: "pause" | "resume" | "reset" | "start_recording" | "stop_recording"; payload: Record<string, never> };

export const BINDINGS = {
  translate: {
    w: [0, 1, 0],
    s: [0, -1, 0],
    a: [-1, 0, 0],
    d: [1, 0, 0],
    r: [0, 0, 1],
    f: [0, 0, -1],
  } as Record<string, [number, number, number]>,
  spinLeft: "q",
  spinRight: "e",
  flip: "x",
  precision: "shift",
  pauseToggle: " ",
  recordToggle: "g",
  reset: "0",
} as const;

/** Fractions of the advertised limits used for steady driving. */
export const CRUISE_LINEAR_FRACTION = 0.4;
export const SPIN_RATE = 1.0; // rad/s, the slow orienting spin
export const FLIP_RATE_FRACTION = 0.85; // of max_angular_rate, the swift flip
export const PRECISION_SCALE = 0.25;

function clampRate(rate: number, cap: number): number {
  return Math.min(rate, cap);
}

/** Velocity implied by the currently held movement keys. */
export function velocityForKeys(
  held: ReadonlySet<string>,
  limits: SessionLimits,
): VelocityCommand {
  const scale = held.has(BINDINGS.precision) ? PRECISION_SCALE : 1.0;

  if (held.has(BINDINGS.flip)) {
    const rate = clampRate(
      FLIP_RATE_FRACTION * limits.max_angular_rate * scale,
      limits.max_angular_rate,
    );
    return { linear: [0, 0, 0], angular: [rate, 0, 0] };
  }
  const spin =
    (held.has(BINDINGS.spinLeft) ? 1 : 0) - (held.has(BINDINGS.spinRight) ? 1 : 0);
  if (spin !== 0) {
    const rate = clampRate(SPIN_RATE * scale, limits.max_angular_rate);
    return { linear: [0, 0, 0], angular: [0, 0, spin * rate] };
  }

  let dir: [number, number, number] = [0, 0, 0];
  for (const [key, axis] of Object.entries(BINDINGS.translate)) {
    if (held.has(key)) {
      dir = [dir[0] + axis[0], dir[1] + axis[1], dir[2] + axis[2]];
    }
  }
  const norm = Math.hypot(dir[0], dir[1], dir[2]);
  if (norm === 0) {
    return { linear: [0, 0, 0], angular: [0, 0, 0] };
  }
  const speed = CRUISE_LINEAR_FRACTION * limits.max_linear_speed * scale;
  return {
    linear: [
      (dir[0] / norm) * speed,
      (dir[1] / norm) * speed,
      (dir[2] / norm) * speed,
    ],
    angular: [0, 0, 0],
  };
}

function sameVelocity(a: VelocityCommand, b: VelocityCommand): boolean {
  for (let i = 0; i < 3; i++) {
    if (a.linear[i] !== b.linear[i] || a.angular[i] !== b.angular[i]) return false;
  }
  return true;
}

const ZERO: VelocityCommand = { linear: [0, 0, 0], angular: [0, 0, 0] };

/**
 * Stateful mapper: feeds on input events, emits command drafts.
 *
 * Velocity commands are deduplicated (nothing is emitted while the
 * implied velocity is unchanged, including key auto-repeat). Toggle keys
 * act on keydown only.
 */
export class InputMapper {
  private held = new Set<string>();
  private lastVelocity: VelocityCommand = ZERO;
  private paused = false;
  private recording = false;

  constructor(private limits: SessionLimits) {}

  /** Sync toggles with authoritative state from a snapshot. */
  syncState(paused: boolean, recording: boolean): void {
    this.paused = paused;
    this.recording = recording;
  }

  handleEvent(ev: InputEventRecord): CommandDraft[] {
    const out: CommandDraft[] = [];
    if (ev.kind === "blur") {
      this.held.clear();
    } else if (ev.kind === "keydown") {
      const key = ev.key ?? "";
      if (this.held.has(key)) {
        return []; // auto-repeat
      }
      if (key === BINDINGS.pauseToggle) {
        this.paused = !this.paused;
        out.push({ type: this.paused ? "pause" : "resume", payload: {} });
      } else if (key === BINDINGS.recordToggle) {
        this.recording = !this.recording;
        out.push({
          type: this.recording ? "start_recording" : "stop_recording",
          payload: {},
        });
      } else if (key === BINDINGS.reset) {
        this.recording = false;
        out.push({ type: "reset", payload: {} });
      }
      this.held.add(key);
    } else {
      this.held.delete(ev.key ?? "");
    }

    const vel = velocityForKeys(this.held, this.limits);
    if (!sameVelocity(vel, this.lastVelocity)) {
      this.lastVelocity = vel;
      out.push({ type: "set_epm_velocity", payload: vel });
    }
    return out;
  }

  replay(events: InputEventRecord[]): CommandDraft[] {
    const out: CommandDraft[] = [];
    for (const ev of events) {
      out.push(...this.handleEvent(ev));
    }
    return out;
  }
}
