/** Pure rendering: ViewModel -> draw ops. A thin adapter paints the ops onto
 * a canvas context, so frame contents are testable without a DOM.
 */

import type { ViewModel } from "./viewmodel.js";
import { key } from "./viewmodel.js";

export type DrawOp =
  | { op: "clear"; fill: string }
  | { op: "rect"; x: number; y: number; w: number; h: number; fill: string }
  | { op: "circle"; x: number; y: number; r: number; fill: string }
  | { op: "text"; x: number; y: number; text: string; fill: string };

export const CELL = 24;

const STATUS_COLORS: Record<string, string> = {
  queued: "#888888",
  active: "#ffb000",
  reached: "#21a179",
  "timed-out": "#c23030",
};

/** Trail color from cool (old) to warm (recent). */
export function trailColor(index: number, total: number): string {
  const t = total <= 1 ? 1 : index / (total - 1);
  const r = Math.round(40 + 200 * t);
  const b = Math.round(220 - 180 * t);
  return `rgb(${r},60,${b})`;
}

export function renderFrame(vm: ViewModel): DrawOp[] {
  const ops: DrawOp[] = [{ op: "clear", fill: "#101418" }];
  for (let y = 0; y < vm.height; y++) {
    for (let x = 0; x < vm.width; x++) {
      const wall = vm.walls.has(key([x, y]));
      ops.push({ op: "rect", x: x * CELL, y: y * CELL, w: CELL - 1, h: CELL - 1,
                 fill: wall ? "#3c3f46" : "#1b2129" });
    }
  }
  vm.trail.forEach((p, i) => {
    ops.push({ op: "rect", x: p[0] * CELL + 4, y: p[1] * CELL + 4, w: CELL - 9, h: CELL - 9,
               fill: trailColor(i, vm.trail.length) });
  });
  for (const w of vm.waypoints) {
    ops.push({ op: "circle", x: w.pos[0] * CELL + CELL / 2, y: w.pos[1] * CELL + CELL / 2,
               r: CELL / 3, fill: STATUS_COLORS[w.status] });
  }
  if (vm.pos) {
    ops.push({ op: "circle", x: vm.pos[0] * CELL + CELL / 2, y: vm.pos[1] * CELL + CELL / 2,
               r: CELL / 2.5, fill: "#ffffff" });
  } else if (vm.trail.length === 0) {
    ops.push({ op: "text", x: 8, y: 16, text: "waiting for session", fill: "#aaaaaa" });
  }
  ops.push({ op: "text", x: 8, y: vm.height * CELL + 18,
             text: `step ${vm.step} | ${vm.status}${vm.success ? " | success" : ""} | ${vm.connection}`,
             fill: "#d0d0d0" });
  if (vm.lastError) {
    ops.push({ op: "text", x: 8, y: vm.height * CELL + 36, text: `error: ${vm.lastError}`,
               fill: "#ff8080" });
  }
  return ops;
}

export function drawToCanvas(ops: DrawOp[], ctx: CanvasRenderingContext2D,
                             width: number, height: number): void {
  for (const o of ops) {
    switch (o.op) {
      case "clear":
        ctx.fillStyle = o.fill;
        ctx.fillRect(0, 0, width, height);
        break;
      case "rect":
        ctx.fillStyle = o.fill;
        ctx.fillRect(o.x, o.y, o.w, o.h);
        break;
      case "circle":
        ctx.fillStyle = o.fill;
        ctx.beginPath();
        ctx.arc(o.x, o.y, o.r, 0, Math.PI * 2);
        ctx.fill();
        break;
      case "text":
        ctx.fillStyle = o.fill;
        ctx.font = "12px monospace";
        ctx.fillText(o.text, o.x, o.y);
        break;
    }
  }
}
