/** Wire protocol frames shared with the control service.
 *
 * One JSON object per frame, versioned "v" field, "kind" discriminator.
 * Client-originated kinds: create, place_goal, clear_goals, step, reset.
 * Server-originated kinds: created, state, ack, error.
 * Nothing outside this schema is ever sent.
 */

export const PROTOCOL_VERSION = 1;

export type Pos = [number, number];

export interface CreateFrame {
  v: 1;
  kind: "create";
  checkpoint?: string;
  session?: string;
  tick_rate?: number;
  greedy?: boolean;
  seed?: number;
  start?: Pos;
  final_target?: Pos;
  total_horizon?: number;
}

export interface PlaceGoalFrame {
  v: 1;
  kind: "place_goal";
  x: number;
  y: number;
}

export interface SimpleFrame {
  v: 1;
  kind: "clear_goals" | "step" | "reset";
}

export type ClientFrame = CreateFrame | PlaceGoalFrame | SimpleFrame;

export interface CreatedFrame {
  v: 1;
  kind: "created";
  session: string;
  state: StateFrame;
}

export interface StateFrame {
  v: 1;
  kind: "state";
  session?: string;
  step: number;
  pos: Pos;
  stage?: number;
  has_key?: boolean;
  status: "idle" | "running" | "done";
  current_goal: Pos | null;
  queue: Pos[];
  reached: Array<[Pos, number | null]>;
  success?: boolean;
}

export interface AckFrame {
  v: 1;
  kind: "ack";
  session?: string;
  [key: string]: unknown;
}

export interface ErrorFrame {
  v: 1;
  kind: "error";
  message: string;
}

export type ServerFrame = CreatedFrame | StateFrame | AckFrame | ErrorFrame;

export function placeGoal(x: number, y: number): PlaceGoalFrame {
  return { v: PROTOCOL_VERSION, kind: "place_goal", x, y };
}

export function createSession(opts: Omit<CreateFrame, "v" | "kind">): CreateFrame {
  return { v: PROTOCOL_VERSION, kind: "create", ...opts };
}

export function simple(kind: SimpleFrame["kind"]): SimpleFrame {
  return { v: PROTOCOL_VERSION, kind };
}

export function isServerFrame(obj: unknown): obj is ServerFrame {
  if (typeof obj !== "object" || obj === null) return false;
  const o = obj as Record<string, unknown>;
  if (o.v !== PROTOCOL_VERSION) return false;
  return o.kind === "created" || o.kind === "state" || o.kind === "ack" || o.kind === "error";
}

export function isStateFrame(obj: unknown): obj is StateFrame {
  return isServerFrame(obj) && obj.kind === "state";
}
