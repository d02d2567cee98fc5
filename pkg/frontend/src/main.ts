/** Browser bootstrap: canvas, controls, and either a live session or an
 * offline trace replay (file picker).
 *
 * Query params: ?ws=ws://host:port/ws&checkpoint=runs/simple0&w=20&h=20
 *               &tick=0 (manual-step) or &tick=8 (auto-run at 8 Hz)
 */

import { ConsoleClient } from "./client.js";
import { CELL, drawToCanvas, renderFrame } from "./render.js";
import { parseTraceFile, traceToFrames } from "./replay.js";
import { applyFrame, newViewModel } from "./viewmodel.js";

const params = new URLSearchParams(window.location.search);
const width = Number(params.get("w") ?? 20);
const height = Number(params.get("h") ?? 20);

const canvas = document.getElementById("grid") as HTMLCanvasElement;
canvas.width = width * CELL;
canvas.height = height * CELL + 44;
const ctx = canvas.getContext("2d")!;

const vm = newViewModel(width, height);
const redraw = () => drawToCanvas(renderFrame(vm), ctx, canvas.width, canvas.height);
const client = new ConsoleClient(vm, { onChange: redraw });

canvas.addEventListener("click", (ev) => {
  const rect = canvas.getBoundingClientRect();
  const x = Math.floor((ev.clientX - rect.left) / CELL);
  const y = Math.floor((ev.clientY - rect.top) / CELL);
  client.onCellClick(x, y);
});

document.getElementById("step")?.addEventListener("click", () => client.step());
document.getElementById("clear")?.addEventListener("click", () => client.clearGoals());
document.getElementById("reset")?.addEventListener("click", () => client.reset());
document.getElementById("connect")?.addEventListener("click", () => {
  client.connect(params.get("ws") ?? "ws://127.0.0.1:8321/ws", {
    checkpoint: params.get("checkpoint") ?? "runs/simple0",
    tick_rate: Number(params.get("tick") ?? 0),
    greedy: true,
  });
});

document.getElementById("replay-file")?.addEventListener("change", async (ev) => {
  const input = ev.target as HTMLInputElement;
  const file = input.files?.[0];
  if (!file) return;
  const frames = traceToFrames(parseTraceFile(await file.text()));
  vm.trail = [];
  vm.waypoints = [];
  vm.step = 0;
  let i = 0;
  const timer = window.setInterval(() => {
    if (i >= frames.length) {
      window.clearInterval(timer);
      return;
    }
    applyFrame(vm, frames[i++]);
    redraw();
  }, 60);
});

redraw();
