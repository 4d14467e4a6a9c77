// Operator input: pointer drag moves the end effector in the horizontal
// plane, wheel / W-S keys move it vertically, and holding the I key (or
// space) toggles irrigation. Displacements accumulate between ticks and are
// clamped to the server-advertised per-tick bound.

export interface TickInput {
  dpos: [number, number, number];
  toggle: boolean;
}

export class InputAggregator {
  /** meters of EE motion per pixel of drag */
  pixelScale = 0.0004;
  /** meters per wheel notch */
  wheelScale = 0.002;

  private dx = 0;
  private dy = 0;
  private dz = 0;
  private toggleHeld = false;
  private dragging = false;
  private lastX = 0;
  private lastY = 0;

  constructor(private readonly dposLimit: number) {}

  pointerDown(x: number, y: number): void {
    this.dragging = true;
    this.lastX = x;
    this.lastY = y;
  }

  pointerMove(x: number, y: number): void {
    if (!this.dragging) return;
    // screen right -> +x, screen up -> +y (canvas y grows downward)
    this.dx += (x - this.lastX) * this.pixelScale;
    this.dy -= (y - this.lastY) * this.pixelScale;
    this.lastX = x;
    this.lastY = y;
  }

  pointerUp(): void {
    this.dragging = false;
  }

  wheel(deltaY: number): void {
    this.dz += deltaY > 0 ? -this.wheelScale : this.wheelScale;
  }

  keyDown(key: string): void {
    if (key === "i" || key === " ") this.toggleHeld = true;
    if (key === "w") this.dz += this.wheelScale;
    if (key === "s") this.dz -= this.wheelScale;
  }

  keyUp(key: string): void {
    if (key === "i" || key === " ") this.toggleHeld = false;
  }

  /** Drains the accumulated displacement for one tick, clamped per axis. */
  takeTick(): TickInput {
    const clamp = (v: number) =>
      Math.max(-this.dposLimit, Math.min(this.dposLimit, v));
    const out: TickInput = {
      dpos: [clamp(this.dx), clamp(this.dy), clamp(this.dz)],
      toggle: this.toggleHeld,
    };
    this.dx = 0;
    this.dy = 0;
    this.dz = 0;
    return out;
  }
}
