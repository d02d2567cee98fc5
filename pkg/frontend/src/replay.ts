/** Offline replay: turn an exported trace file into the state-frame sequence
 * a live session would have streamed, so the same reducer + renderer drive
 * both paths and replays look identical to the recorded run.
 */

import { PROTOCOL_VERSION, type Pos, type StateFrame } from "./protocol.js";

export interface TraceFile {
  name: string;
  seed: number;
  total_steps: number;
  success: boolean;
  trace: Pos[];
  reached: Array<[Pos, number | null]>;
}

export function traceToFrames(trace: TraceFile): StateFrame[] {
  const frames: StateFrame[] = [];
  // timed-out goals carry no step; surface them once at the end
  const timedOut = trace.reached.filter(([, s]) => s === null);
  for (let step = 0; step < trace.trace.length; step++) {
    const last = step === trace.trace.length - 1;
    const reached = trace.reached.filter(([, s]) => s !== null && (s as number) <= step);
    frames.push({
      v: PROTOCOL_VERSION,
      kind: "state",
      step,
      pos: trace.trace[step],
      status: last ? "done" : "running",
      current_goal: null,
      queue: [],
      reached: last ? [...reached, ...timedOut] : reached,
      success: last ? trace.success : false,
    });
  }
  return frames;
}

export function parseTraceFile(text: string): TraceFile {
  const obj = JSON.parse(text) as Record<string, unknown>;
  for (const field of ["trace", "reached", "total_steps", "success"]) {
    if (!(field in obj)) throw new Error(`trace file missing field ${field}`);
  }
  const t = obj as unknown as TraceFile;
  if (!Array.isArray(t.trace) || t.trace.length !== t.total_steps + 1) {
    throw new Error("trace length must equal total_steps + 1");
  }
  return t;
}
