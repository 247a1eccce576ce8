/**
 * Bounded snapshot history for plots and the state timeline.
 */

import type { SnapshotPayload, StateLabel } from "./protocol.js";

export interface SeriesPoint {
  t: number;
  value: number;
}

export interface StateSpan {
  label: StateLabel;
  start: number;
  end: number;
}

export class SnapshotHistory {
  private buffer: SnapshotPayload[] = [];

  constructor(readonly capacity: number = 600) {
    if (!Number.isInteger(capacity) || capacity <= 0) {
      throw new Error("capacity must be a positive integer");
    }
  }

  push(snap: SnapshotPayload): void {
    this.buffer.push(snap);
    if (this.buffer.length > this.capacity) {
      this.buffer.splice(0, this.buffer.length - this.capacity);
    }
  }

  get length(): number {
    return this.buffer.length;
  }

  latest(): SnapshotPayload | undefined {
    return this.buffer[this.buffer.length - 1];
  }

  clear(): void {
    this.buffer = [];
  }

  series(pick: (s: SnapshotPayload) => number): SeriesPoint[] {
    return this.buffer.map((s) => ({ t: s.t, value: pick(s) }));
  }

  endGapSeries(): SeriesPoint[] {
    return this.series((s) => s.end_gap_m);
  }

  energySeries(): SeriesPoint[] {
    return this.series((s) => s.energy.total);
  }

  /** Contiguous spans of identical state labels, oldest first. */
  stateSpans(): StateSpan[] {
    const spans: StateSpan[] = [];
    for (const s of this.buffer) {
      const last = spans[spans.length - 1];
      if (last !== undefined && last.label === s.label) {
        last.end = s.t;
      } else {
        spans.push({ label: s.label, start: s.t, end: s.t });
      }
    }
    return spans;
  }
}
