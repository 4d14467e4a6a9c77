import { describe, expect, it } from "vitest";

import { SceneRenderer, type Ctx2D } from "../src/renderer.js";
import type { ConfigMessage, StateMessage } from "../src/protocol.js";

class RecordingCtx implements Ctx2D {
  ops: Array<[string, ...unknown[]]> = [];
  fillStyleValue = "";

  clearRect(...a: unknown[]): void { this.ops.push(["clearRect", ...a]); }
  beginPath(): void { this.ops.push(["beginPath"]); }
  arc(x: number, y: number, r: number): void {
    this.ops.push(["arc", x, y, r, this.fillStyleValue]);
  }
  fill(): void { this.ops.push(["fill"]); }
  stroke(): void { this.ops.push(["stroke"]); }
  moveTo(...a: unknown[]): void { this.ops.push(["moveTo", ...a]); }
  lineTo(...a: unknown[]): void { this.ops.push(["lineTo", ...a]); }
  fillText(...a: unknown[]): void { this.ops.push(["fillText", ...a]); }
  set fillStyle(v: string) { this.fillStyleValue = v; }
  set strokeStyle(_v: string) {}
  set lineWidth(_v: number) {}
  set font(_v: string) {}

  discs(): Array<{ x: number; y: number; r: number; style: string }> {
    return this.ops
      .filter((o) => o[0] === "arc")
      .map((o) => ({ x: o[1] as number, y: o[2] as number, r: o[3] as number,
                     style: o[4] as string }));
  }
}

const config: ConfigMessage = {
  type: "config",
  task: "suction",
  obs_mode: "vector",
  tick_hz: 10,
  dpos_limit: 0.005,
  camera: {
    position: [0, 0, 0.3],
    orientation: [0, 1, 0, 0], // looking straight down from above
    fov_y: Math.PI / 4,
    width: 100,
    height: 100,
  },
  container: { half_extent: 0.075, wall_height: 0.015 },
  splat_radius: 0.005,
  seed: 0,
};

function state(particles: StateMessage["particles"]): StateMessage {
  return {
    type: "state",
    step: 1,
    particles,
    tool: { tip: [0.02, 0.0, 0.05], axis: [0, 0, -1] },
    tissue_digest: "d",
    irrigation_on: false,
    reward: 0,
    done: false,
  };
}

describe("scene renderer", () => {
  it("renders tissue/tool only when there are no particles", () => {
    const ctx = new RecordingCtx();
    const r = new SceneRenderer(100, 100);
    r.render(ctx, config, state([]));
    // tool tip marker is the only disc
    expect(ctx.discs()).toHaveLength(1);
    expect(r.framesRendered).toBe(1);
  });

  it("draws a particle on the camera axis at the canvas center", () => {
    const ctx = new RecordingCtx();
    const r = new SceneRenderer(100, 100);
    r.render(ctx, config, state([{ p: [0, 0, 0.02], c: [1, 0, 0] }]));
    const disc = ctx.discs().find((d) => d.style === "rgb(255,0,0)");
    expect(disc).toBeDefined();
    expect(disc!.x).toBeCloseTo(50, 6);
    expect(disc!.y).toBeCloseTo(50, 6);
  });

  it("paints overlapping particles nearest-last (painter's order)", () => {
    const ctx = new RecordingCtx();
    const r = new SceneRenderer(100, 100);
    r.render(ctx, config, state([
      { p: [0.001, 0.001, 0.1], c: [1, 0, 0] },   // nearer to the overhead camera
      { p: [0.0012, 0.0008, 0.02], c: [0, 0, 1] }, // farther below
    ]));
    const discs = ctx.discs().filter((d) => d.style !== "#ffd166");
    expect(discs).toHaveLength(2);
    expect(discs[0].style).toBe("rgb(0,0,255)"); // far drawn first
    expect(discs[1].style).toBe("rgb(255,0,0)"); // near painted on top
  });

  it("scales splat radius with projected size and canvas scale", () => {
    const ctx = new RecordingCtx();
    const r = new SceneRenderer(200, 200); // canvas 2x the camera image
    r.render(ctx, config, state([{ p: [0, 0, 0.02], c: [0, 1, 0] }]));
    const disc = ctx.discs().find((d) => d.style === "rgb(0,255,0)")!;
    const f = 50 / Math.tan(Math.PI / 8);
    const expected = Math.max((f * 0.005) / 0.28, 1) * 2;
    expect(disc.r).toBeCloseTo(expected, 6);
  });
});
