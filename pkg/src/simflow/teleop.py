"""Teleoperation WebSocket server: one driver session at a time, 10 Hz tick.

Wire protocol (JSON text frames):
  server -> client on connect/reset:
    {"type": "config", task, obs_mode, tick_hz, dpos_limit,
     camera: {position, orientation, fov_y, width, height},
     container: {half_extent, wall_height}, splat_radius, seed}
  server -> client per tick:
    {"type": "state", step, particles: [{"p": [x,y,z], "c": [r,g,b]}...],
     tool: {"tip": [...], "axis": [...]}, tissue_digest, irrigation_on,
     reward, done}
  client -> server:
    {"type": "teleop", "dpos": [dx,dy,dz], "toggle": bool}
    {"type": "session", "cmd": "reset"|"save", "seed": int?}
  server -> client after save: {"type": "saved", "path": ..., "steps": n}
"""

from __future__ import annotations

import asyncio
import json
import os
import time

import numpy as np

from .config import RunConfig
from .envs import make_env
from .experts.demos import Demonstration, write_demo
from .experts.scripted import _joint_action
from .fluids import BACKEND


class TeleopSession:
    """Env state machine driven by teleop messages; owns demo recording."""

    def __init__(self, cfg: RunConfig, task: str, demo_dir: str):
        self.cfg = cfg
        self.task = task
        self.demo_dir = demo_dir
        self.env = make_env(cfg, task)
        self.dpos_limit = 2.5 * cfg.env.action_scale_m
        self.seed = cfg.seed
        self.obs = None
        self.steps: list[tuple[np.ndarray, np.ndarray, float, bool]] = []
        self.step_index = 0
        self.last_reward = 0.0
        self.toggle = False

    def reset(self, seed: int | None = None):
        if seed is not None:
            self.seed = int(seed)
        self.obs = self.env.reset(self.seed)
        self.steps = []
        self.step_index = 0
        self.last_reward = 0.0
        self.toggle = False

    def config_message(self) -> dict:
        cam = self.env.world.camera
        return {
            "type": "config",
            "task": self.task,
            "obs_mode": self.cfg.env.obs_mode,
            "tick_hz": 10.0,
            "dpos_limit": self.dpos_limit,
            "camera": {
                "position": _round(cam.pose.position),
                "orientation": _round(cam.pose.orientation),
                "fov_y": cam.fov_y,
                "width": cam.width,
                "height": cam.height,
            },
            "container": {
                "half_extent": self.cfg.env.tissue.half_extent,
                "wall_height": self.cfg.env.wall_height,
            },
            "splat_radius": self.cfg.env.fluid.kernel_radius,
            "seed": self.seed,
        }

    def apply_teleop(self, dpos, toggle: bool) -> dict | None:
        """One env step from a teleop displacement; returns the state message."""
        if self.obs is None or self.env.done:
            return None
        dpos = np.clip(np.asarray(dpos, dtype=np.float64), -self.dpos_limit,
                       self.dpos_limit)
        snap = self.env.snapshot()
        target = snap.tip + dpos
        action = _joint_action(self.env, target)
        if self.task == "irrigation":
            action = np.concatenate([action, [1.0 if toggle else 0.0]])
        self.toggle = bool(toggle)
        obs_before = self.obs.vector.astype(np.float32)
        # step on the float32-quantized action so saved demos replay bit-exactly
        action_f32 = action.astype(np.float32)
        self.obs, reward, done, info = self.env.step(action_f32.astype(np.float64))
        self.steps.append((obs_before, action_f32, float(reward), done))
        self.step_index += 1
        self.last_reward = float(reward)
        return self.state_message(done, info)

    def state_message(self, done: bool, info: dict | None = None) -> dict:
        live = self.env.particles.live_indices()
        pos = self.env.particles.positions[live]
        col = np.clip(self.env.particles.colors[live], 0.0, 1.0)
        snap = self.env.snapshot()
        return {
            "type": "state",
            "step": self.step_index,
            "particles": [
                {"p": _round(pos[i]), "c": _round(col[i])} for i in range(len(live))
            ],
            "tool": {"tip": _round(snap.tip), "axis": _round(snap.axis)},
            "tissue_digest": self.env.world.heightfield.digest(),
            "irrigation_on": self.toggle,
            "reward": self.last_reward,
            "done": bool(done),
        }

    def save(self) -> tuple[str, int]:
        if not self.steps:
            raise ValueError("nothing recorded yet")
        obs = np.stack([s[0] for s in self.steps])
        actions = np.stack([s[1] for s in self.steps])
        rewards = np.array([s[2] for s in self.steps], dtype=np.float32)
        dones = np.array([s[3] for s in self.steps], dtype=bool)
        interval = self.cfg.env.decision_interval
        if not dones[-1]:
            # truncated by the operator: cap the episode at the recorded length
            dones[-1] = True
            max_steps = len(dones) * interval
        else:
            max_steps = self.env.max_steps
        demo = Demonstration(
            task=self.task,
            config_digest=self.cfg.digest(),
            seed=self.seed,
            obs_mode=self.cfg.env.obs_mode,
            backend=BACKEND,
            max_steps=max_steps,
            observations=obs,
            actions=actions,
            rewards=rewards,
            dones=dones,
            extra={"source": "teleop"},
        )
        os.makedirs(self.demo_dir, exist_ok=True)
        path = os.path.join(self.demo_dir,
                            f"teleop_{self.task}_{self.seed}_{int(time.time())}.demo")
        write_demo(demo, path)
        return path, len(demo)


def _round(arr) -> list[float]:
    return [round(float(v), 5) for v in np.asarray(arr).ravel()]


async def _serve(cfg: RunConfig, task: str, port: int, demo_dir: str,
                 log=print, ready_event=None, stop_event=None):
    import websockets

    session = TeleopSession(cfg, task, demo_dir)
    session.reset()
    driver_lock = asyncio.Lock()

    async def handler(ws):
        if driver_lock.locked():
            await ws.send(json.dumps({"type": "error",
                                      "message": "session busy: one driver at a time"}))
            await ws.close()
            return
        async with driver_lock:
            log(f"driver connected: {ws.remote_address}")
            await ws.send(json.dumps(session.config_message()))
            await ws.send(json.dumps(session.state_message(session.env.done)))
            latest: dict = {"dpos": [0.0, 0.0, 0.0], "toggle": False}
            tick = 1.0 / 10.0
            last_tick = time.monotonic()
            try:
                while True:
                    timeout = max(0.0, last_tick + tick - time.monotonic())
                    try:
                        raw = await asyncio.wait_for(ws.recv(), timeout=timeout)
                        msg = json.loads(raw)
                        if msg.get("type") == "teleop":
                            latest = {
                                "dpos": msg.get("dpos", [0, 0, 0]),
                                "toggle": bool(msg.get("toggle", False)),
                            }
                        elif msg.get("type") == "session":
                            cmd = msg.get("cmd")
                            if cmd == "reset":
                                session.reset(msg.get("seed"))
                                await ws.send(json.dumps(session.config_message()))
                                await ws.send(json.dumps(
                                    session.state_message(False)))
                            elif cmd == "save":
                                try:
                                    path, n = session.save()
                                    await ws.send(json.dumps({
                                        "type": "saved", "path": path, "steps": n,
                                    }))
                                except ValueError as exc:
                                    await ws.send(json.dumps({
                                        "type": "error", "message": str(exc),
                                    }))
                        continue
                    except asyncio.TimeoutError:
                        pass
                    last_tick = time.monotonic()
                    state = session.apply_teleop(latest["dpos"], latest["toggle"])
                    if state is not None:
                        await ws.send(json.dumps(state))
            except Exception as exc:  # connection closed or protocol error
                if not _is_normal_close(exc):
                    log(f"driver dropped: {exc}")

    def _is_normal_close(exc):
        import websockets

        return isinstance(exc, websockets.exceptions.ConnectionClosed)

    async with websockets.serve(handler, "127.0.0.1", port):
        log(f"teleop server on ws://127.0.0.1:{port} task={task}")
        if ready_event is not None:
            ready_event.set()
        if stop_event is not None:
            await stop_event.wait()
        else:
            await asyncio.Future()


def run_server(cfg: RunConfig, task: str, port: int, demo_dir: str, log=print):
    asyncio.run(_serve(cfg, task, port, demo_dir, log=log))
