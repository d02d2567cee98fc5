/** WebSocket wiring between the service and the ViewModel. */

import { createSession, isServerFrame, placeGoal, simple, type CreateFrame, type ClientFrame } from "./protocol.js";
import { applyFrame, key, optimisticQueue, type ViewModel } from "./viewmodel.js";

export interface ClientHooks {
  onChange: (vm: ViewModel) => void;
}

export class ConsoleClient {
  private ws: WebSocket | null = null;
  readonly sent: ClientFrame[] = []; // outbound log, useful in tests

  constructor(private vm: ViewModel, private hooks: ClientHooks) {}

  connect(url: string, opts: Omit<CreateFrame, "v" | "kind">): void {
    this.vm.connection = "connecting";
    this.hooks.onChange(this.vm);
    this.ws = new WebSocket(url);
    this.ws.onopen = () => this.send(createSession(opts));
    this.ws.onmessage = (ev) => {
      const obj = JSON.parse(String(ev.data));
      if (isServerFrame(obj)) {
        applyFrame(this.vm, obj);
        this.hooks.onChange(this.vm);
      }
    };
    this.ws.onclose = () => {
      this.vm.connection = "disconnected";
      this.hooks.onChange(this.vm);
    };
  }

  private send(frame: ClientFrame): void {
    this.sent.push(frame);
    this.ws?.send(JSON.stringify(frame));
  }

  /** Click handler: wall cells are rejected locally, no frame leaves. */
  onCellClick(x: number, y: number): boolean {
    if (x < 0 || x >= this.vm.width || y < 0 || y >= this.vm.height) return false;
    if (this.vm.walls.has(key([x, y]))) return false;
    if (this.vm.connection !== "connected") return false;
    optimisticQueue(this.vm, [x, y]);
    this.send(placeGoal(x, y));
    this.hooks.onChange(this.vm);
    return true;
  }

  step(): void {
    this.send(simple("step"));
  }

  clearGoals(): void {
    this.send(simple("clear_goals"));
  }

  reset(): void {
    this.send(simple("reset"));
  }
}
