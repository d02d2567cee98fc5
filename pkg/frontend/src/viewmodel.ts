/** UI state: a pure mirror of the latest state frame plus the append-only
 * trail. Reconnecting and replaying the same server frames reconstructs an
 * identical ViewModel, which is what the replay tests assert.
 */

import type { Pos, ServerFrame, StateFrame } from "./protocol.js";

export type WaypointStatus = "queued" | "active" | "reached" | "timed-out";

export interface Waypoint {
  pos: Pos;
  status: WaypointStatus;
  step: number | null; // reach step, when reached
}

export interface ViewModel {
  width: number;
  height: number;
  walls: Set<string>;
  connection: "disconnected" | "connecting" | "connected";
  session: string | null;
  step: number;
  pos: Pos | null;
  trail: Pos[];
  waypoints: Waypoint[];
  status: StateFrame["status"] | "unknown";
  success: boolean;
  lastError: string | null;
}

export const key = (p: Pos): string => `${p[0]},${p[1]}`;

export function newViewModel(width: number, height: number, walls: Pos[] = []): ViewModel {
  return {
    width,
    height,
    walls: new Set(walls.map(key)),
    connection: "disconnected",
    session: null,
    step: 0,
    pos: null,
    trail: [],
    waypoints: [],
    status: "unknown",
    success: false,
    lastError: null,
  };
}

function upsertWaypoint(vm: ViewModel, pos: Pos, status: WaypointStatus, step: number | null): void {
  const k = key(pos);
  const existing = vm.waypoints.find((w) => key(w.pos) === k && w.status !== "reached" && w.status !== "timed-out");
  if (existing) {
    existing.status = status;
    existing.step = step;
    return;
  }
  // terminal statuses may repeat for revisited goals; only add if the latest
  // entry for this cell is not already in that terminal state
  const last = [...vm.waypoints].reverse().find((w) => key(w.pos) === k);
  if (last && last.status === status && last.step === step) return;
  vm.waypoints.push({ pos, status, step });
}

/** Optimistic local queue entry for a click; reconciled by the next frames. */
export function optimisticQueue(vm: ViewModel, pos: Pos): void {
  upsertWaypoint(vm, pos, "queued", null);
}

export function applyFrame(vm: ViewModel, frame: ServerFrame): ViewModel {
  switch (frame.kind) {
    case "created":
      vm.session = frame.session;
      vm.connection = "connected";
      applyFrame(vm, frame.state);
      break;
    case "state": {
      const s = frame;
      if (vm.trail.length === 0 || s.step > vm.step) {
        vm.trail.push(s.pos); // append-only within an episode
      } else if (s.step < vm.step) {
        // reset happened server-side: start a fresh episode trail
        vm.trail = [s.pos];
        vm.waypoints = [];
      }
      vm.step = s.step;
      vm.pos = s.pos;
      vm.status = s.status;
      vm.success = Boolean(s.success);
      for (const [pos, step] of s.reached) {
        upsertWaypoint(vm, pos, step === null ? "timed-out" : "reached", step);
      }
      if (s.current_goal) upsertWaypoint(vm, s.current_goal, "active", null);
      for (const pos of s.queue) upsertWaypoint(vm, pos, "queued", null);
      break;
    }
    case "ack":
      if (typeof frame.queued === "object" && Array.isArray(frame.queued)) {
        upsertWaypoint(vm, frame.queued as Pos, "queued", null);
      }
      if (frame.reset === true) {
        vm.step = 0;
        vm.trail = [];
        vm.waypoints = [];
        vm.success = false;
      }
      break;
    case "error":
      vm.lastError = frame.message;
      break;
  }
  return vm;
}
