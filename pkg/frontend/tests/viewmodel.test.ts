import { describe, expect, it } from "vitest";

import { PROTOCOL_VERSION, type StateFrame } from "../src/protocol.js";
import { applyFrame, newViewModel, optimisticQueue } from "../src/viewmodel.js";

function state(partial: Partial<StateFrame>): StateFrame {
  return {
    v: PROTOCOL_VERSION,
    kind: "state",
    step: 0,
    pos: [0, 0],
    status: "running",
    current_goal: null,
    queue: [],
    reached: [],
    ...partial,
  };
}

describe("viewmodel reducer", () => {
  it("starts with an empty trail and renders the start on the first frame", () => {
    const vm = newViewModel(5, 5);
    applyFrame(vm, state({ step: 0, pos: [2, 2] }));
    expect(vm.trail).toEqual([[2, 2]]);
    expect(vm.step).toBe(0);
  });

  it("keeps the trail append-only within an episode", () => {
    const vm = newViewModel(5, 5);
    applyFrame(vm, state({ step: 0, pos: [2, 2] }));
    applyFrame(vm, state({ step: 1, pos: [2, 3] }));
    applyFrame(vm, state({ step: 2, pos: [3, 3] }));
    expect(vm.trail).toEqual([[2, 2], [2, 3], [3, 3]]);
  });

  it("a step going backwards means a reset: the trail restarts", () => {
    const vm = newViewModel(5, 5);
    applyFrame(vm, state({ step: 4, pos: [4, 4] }));
    applyFrame(vm, state({ step: 0, pos: [1, 1] }));
    expect(vm.trail).toEqual([[1, 1]]);
    expect(vm.waypoints).toEqual([]);
  });

  it("waypoint badges follow the latest state message", () => {
    const vm = newViewModel(6, 6);
    applyFrame(vm, state({ step: 0, pos: [0, 0], queue: [[3, 3]], current_goal: [1, 1] }));
    expect(vm.waypoints).toEqual([
      { pos: [1, 1], status: "active", step: null },
      { pos: [3, 3], status: "queued", step: null },
    ]);
    applyFrame(vm, state({
      step: 2, pos: [1, 1], reached: [[[1, 1], 2]], current_goal: [3, 3],
    }));
    const byKey = Object.fromEntries(vm.waypoints.map((w) => [`${w.pos}`, w.status]));
    expect(byKey["1,1"]).toBe("reached");
    expect(byKey["3,3"]).toBe("active");
  });

  it("timed-out goals get their own badge", () => {
    const vm = newViewModel(6, 6);
    applyFrame(vm, state({ step: 3, pos: [0, 0], reached: [[[5, 5], null]] }));
    expect(vm.waypoints[0].status).toBe("timed-out");
  });

  it("optimistic queue entries reconcile with acks", () => {
    const vm = newViewModel(6, 6);
    applyFrame(vm, state({ step: 0, pos: [0, 0] }));
    optimisticQueue(vm, [4, 4]);
    expect(vm.waypoints[0].status).toBe("queued");
    applyFrame(vm, { v: 1, kind: "ack", queued: [4, 4] });
    expect(vm.waypoints.filter((w) => `${w.pos}` === "4,4")).toHaveLength(1);
  });

  it("errors land in lastError without disturbing the trail", () => {
    const vm = newViewModel(6, 6);
    applyFrame(vm, state({ step: 1, pos: [1, 0] }));
    applyFrame(vm, { v: 1, kind: "error", message: "goal (5, 0) is a wall" });
    expect(vm.lastError).toContain("wall");
    expect(vm.trail).toEqual([[1, 0]]);
  });

  it("replaying the same frames reconstructs an identical viewmodel", () => {
    const frames = [
      state({ step: 0, pos: [0, 0], queue: [[2, 0]] }),
      state({ step: 1, pos: [1, 0], current_goal: [2, 0] }),
      state({ step: 2, pos: [2, 0], reached: [[[2, 0], 2]], status: "done", success: true }),
    ];
    const a = newViewModel(4, 4);
    const b = newViewModel(4, 4);
    frames.forEach((f) => applyFrame(a, f));
    frames.forEach((f) => applyFrame(b, f));
    expect(JSON.stringify({ ...a, walls: [...a.walls] }))
      .toBe(JSON.stringify({ ...b, walls: [...b.walls] }));
  });
});
