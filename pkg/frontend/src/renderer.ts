// Canvas rendering of a single received state: container outline, particle
// discs (painter's order, far to near), tool tip + axis, HUD line. The
// renderer is pure per frame: it draws exactly the message it is given and
// keeps a counter so callers can prove no frame was fabricated.

import { focalLength, projectPoint, type Vec3 } from "./camera.js";
import type { ConfigMessage, StateMessage } from "./protocol.js";

export interface Ctx2D {
  clearRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  fill(): void;
  stroke(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  fillText(text: string, x: number, y: number): void;
  set fillStyle(v: string);
  set strokeStyle(v: string);
  set lineWidth(v: number);
  set font(v: string);
}

export class SceneRenderer {
  framesRendered = 0;

  constructor(
    private readonly width: number,
    private readonly height: number,
  ) {}

  render(ctx: Ctx2D, config: ConfigMessage, state: StateMessage): void {
    const cam = config.camera;
    const sx = this.width / cam.width;
    const sy = this.height / cam.height;
    ctx.clearRect(0, 0, this.width, this.height);
    ctx.fillStyle = "#20242b";
    ctx.beginPath();
    // background fill via a full-canvas rect path
    ctx.moveTo(0, 0);
    ctx.lineTo(this.width, 0);
    ctx.lineTo(this.width, this.height);
    ctx.lineTo(0, this.height);
    ctx.fill();

    this.drawContainer(ctx, config, sx, sy);
    this.drawParticles(ctx, config, state, sx, sy);
    this.drawTool(ctx, config, state, sx, sy);
    this.drawHud(ctx, state);
    this.framesRendered += 1;
  }

  private drawContainer(ctx: Ctx2D, config: ConfigMessage, sx: number, sy: number) {
    const a = config.container.half_extent;
    const corners: Vec3[] = [
      [-a, -a, 0], [a, -a, 0], [a, a, 0], [-a, a, 0],
    ];
    const projected = corners.map((c) => projectPoint(config.camera, c));
    if (projected.some((p) => p === null)) return;
    ctx.strokeStyle = "#8a93a4";
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    const pts = projected as { u: number; v: number }[];
    ctx.moveTo(pts[0].u * sx, pts[0].v * sy);
    for (let i = 1; i <= 4; i++) {
      const p = pts[i % 4];
      ctx.lineTo(p.u * sx, p.v * sy);
    }
    ctx.stroke();
  }

  private drawParticles(ctx: Ctx2D, config: ConfigMessage, state: StateMessage,
                        sx: number, sy: number) {
    const f = focalLength(config.camera);
    const drawn = state.particles
      .map((pt) => {
        const proj = projectPoint(config.camera, pt.p);
        return proj ? { proj, c: pt.c } : null;
      })
      .filter((d): d is { proj: { u: number; v: number; depth: number }; c: Vec3 } => d !== null)
      .sort((a, b) => b.proj.depth - a.proj.depth); // far first, near painted last
    for (const { proj, c } of drawn) {
      const r = Math.max((f * config.splat_radius) / proj.depth, 1) * sx;
      ctx.fillStyle = rgb(c);
      ctx.beginPath();
      ctx.arc(proj.u * sx, proj.v * sy, r, 0, 2 * Math.PI);
      ctx.fill();
    }
  }

  private drawTool(ctx: Ctx2D, config: ConfigMessage, state: StateMessage,
                   sx: number, sy: number) {
    const tip = state.tool.tip as Vec3;
    const axis = state.tool.axis as Vec3;
    const back: Vec3 = [
      tip[0] - axis[0] * 0.08,
      tip[1] - axis[1] * 0.08,
      tip[2] - axis[2] * 0.08,
    ];
    const p0 = projectPoint(config.camera, tip);
    const p1 = projectPoint(config.camera, back);
    if (!p0 || !p1) return;
    ctx.strokeStyle = state.irrigation_on ? "#7fd0ff" : "#d7dbe2";
    ctx.lineWidth = 3;
    ctx.beginPath();
    ctx.moveTo(p0.u * sx, p0.v * sy);
    ctx.lineTo(p1.u * sx, p1.v * sy);
    ctx.stroke();
    ctx.fillStyle = "#ffd166";
    ctx.beginPath();
    ctx.arc(p0.u * sx, p0.v * sy, 3, 0, 2 * Math.PI);
    ctx.fill();
  }

  private drawHud(ctx: Ctx2D, state: StateMessage) {
    ctx.fillStyle = "#e8eaf0";
    ctx.font = "12px monospace";
    const flags = `${state.irrigation_on ? "IRR" : "---"}${state.done ? " DONE" : ""}`;
    ctx.fillText(
      `step ${state.step}  reward ${state.reward.toFixed(4)}  ${flags}  n=${state.particles.length}`,
      8,
      16,
    );
  }
}

function rgb(c: Vec3): string {
  const ch = (x: number) => Math.max(0, Math.min(255, Math.round(x * 255)));
  return `rgb(${ch(c[0])},${ch(c[1])},${ch(c[2])})`;
}
