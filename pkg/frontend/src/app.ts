// Headless-testable session driver: owns the connection, the 10 Hz teleop
// sender, and the render loop. Rendering happens only when a fresh state
// message is available (one-slot buffer), so every painted frame corresponds
// to exactly one server message.

import { SessionConnection, type SocketFactory } from "./connection.js";
import { InputAggregator } from "./input.js";
import { SceneRenderer, type Ctx2D } from "./renderer.js";

export interface AppHooks {
  requestFrame(cb: () => void): void;
  setIntervalFn(cb: () => void, ms: number): () => void;
  now(): number;
}

export class TeleopApp {
  readonly connection: SessionConnection;
  renderer: SceneRenderer | null = null;
  input: InputAggregator | null = null;
  savedPaths: string[] = [];
  private stopSender: (() => void) | null = null;
  private running = false;

  constructor(
    factory: SocketFactory,
    private readonly hooks: AppHooks,
    private readonly ctx: Ctx2D | null,
    private readonly canvasSize: [number, number],
  ) {
    this.connection = new SessionConnection(factory);
    this.connection.onSaved = (path) => {
      this.savedPaths.push(path);
    };
  }

  start(url: string): void {
    this.connection.connect(url);
    this.running = true;
    const pump = () => {
      if (!this.running) return;
      this.renderLatest();
      this.hooks.requestFrame(pump);
    };
    this.hooks.requestFrame(pump);
    this.stopSender = this.hooks.setIntervalFn(() => this.sendTick(), 100);
  }

  private ensureSessionObjects(): void {
    const cfg = this.connection.config;
    if (!cfg) return;
    if (!this.input) {
      this.input = new InputAggregator(cfg.dpos_limit);
    }
    if (!this.renderer) {
      this.renderer = new SceneRenderer(this.canvasSize[0], this.canvasSize[1]);
    }
  }

  renderLatest(): boolean {
    this.ensureSessionObjects();
    const cfg = this.connection.config;
    const state = this.connection.takeState();
    if (!cfg || !state || !this.renderer) return false;
    if (this.ctx) {
      this.renderer.render(this.ctx, cfg, state);
    } else {
      this.renderer.framesRendered += 1; // headless driver: count only
    }
    return true;
  }

  sendTick(): void {
    if (this.connection.status !== "open") return;
    this.ensureSessionObjects();
    if (!this.input) return; // no config yet
    const tick = this.input.takeTick();
    this.connection.send({ type: "teleop", dpos: tick.dpos, toggle: tick.toggle });
  }

  resetSession(seed: number): void {
    this.connection.send({ type: "session", cmd: "reset", seed });
  }

  saveSession(): void {
    this.connection.send({ type: "session", cmd: "save" });
  }

  stop(): void {
    this.running = false;
    this.stopSender?.();
    this.connection.close();
  }
}

export function browserHooks(): AppHooks {
  return {
    requestFrame: (cb) => requestAnimationFrame(cb),
    setIntervalFn: (cb, ms) => {
      const id = setInterval(cb, ms);
      return () => clearInterval(id);
    },
    now: () => performance.now(),
  };
}
