// Browser entry point: canvas + status bar + input bindings.

import { browserHooks, TeleopApp } from "./app.js";
import type { Ctx2D } from "./renderer.js";

function start(): void {
  const canvas = document.getElementById("view") as HTMLCanvasElement;
  const status = document.getElementById("status") as HTMLElement;
  const ctx = canvas.getContext("2d") as unknown as Ctx2D;
  const url = (document.getElementById("endpoint") as HTMLInputElement).value
    || "ws://127.0.0.1:8765";

  const app = new TeleopApp((u) => new WebSocket(u) as never, browserHooks(), ctx,
                            [canvas.width, canvas.height]);
  app.connection.onStatus = (s) => {
    status.textContent = s === "open" ? "connected"
      : s === "connecting" ? "connecting..."
      : `disconnected (${app.connection.lastError ?? s})`;
    status.className = s;
  };
  app.start(url);

  canvas.addEventListener("pointerdown", (e) => app.input?.pointerDown(e.offsetX, e.offsetY));
  canvas.addEventListener("pointermove", (e) => app.input?.pointerMove(e.offsetX, e.offsetY));
  window.addEventListener("pointerup", () => app.input?.pointerUp());
  canvas.addEventListener("wheel", (e) => {
    e.preventDefault();
    app.input?.wheel(e.deltaY);
  });
  window.addEventListener("keydown", (e) => app.input?.keyDown(e.key));
  window.addEventListener("keyup", (e) => app.input?.keyUp(e.key));

  (document.getElementById("reset") as HTMLButtonElement).onclick = () => {
    const seed = Number((document.getElementById("seed") as HTMLInputElement).value) || 0;
    app.resetSession(seed);
  };
  (document.getElementById("save") as HTMLButtonElement).onclick = () => app.saveSession();
  app.connection.onSaved = (path, steps) => {
    status.textContent = `saved ${steps} steps -> ${path}`;
  };
}

window.addEventListener("DOMContentLoaded", start);
