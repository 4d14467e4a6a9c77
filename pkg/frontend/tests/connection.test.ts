import { describe, expect, it } from "vitest";

import { SessionConnection, type SocketLike } from "../src/connection.js";

class FakeSocket implements SocketLike {
  sent: string[] = [];
  closed = false;
  onopen: ((ev?: unknown) => void) | null = null;
  onclose: ((ev?: unknown) => void) | null = null;
  onerror: ((ev?: unknown) => void) | null = null;
  onmessage: ((ev: { data: unknown }) => void) | null = null;

  send(data: string): void {
    this.sent.push(data);
  }

  close(): void {
    this.closed = true;
    this.onclose?.();
  }

  deliver(obj: unknown): void {
    this.onmessage?.({ data: typeof obj === "string" ? obj : JSON.stringify(obj) });
  }
}

const configMsg = {
  type: "config",
  task: "suction",
  obs_mode: "vector",
  tick_hz: 10,
  dpos_limit: 0.005,
  camera: {
    position: [0, -0.2, 0.19],
    orientation: [1, 0, 0, 0],
    fov_y: 0.785,
    width: 84,
    height: 84,
  },
  container: { half_extent: 0.075, wall_height: 0.015 },
  splat_radius: 0.01,
  seed: 0,
};

function stateMsg(step: number) {
  return {
    type: "state",
    step,
    particles: [],
    tool: { tip: [0, 0, 0.05], axis: [0, 0, -1] },
    tissue_digest: "d",
    irrigation_on: false,
    reward: 0,
    done: false,
  };
}

function connected(): [SessionConnection, FakeSocket] {
  let sock!: FakeSocket;
  const conn = new SessionConnection((url) => {
    sock = new FakeSocket();
    return sock;
  });
  conn.connect("ws://test");
  sock.onopen?.();
  return [conn, sock];
}

describe("session connection", () => {
  it("tracks status through the lifecycle", () => {
    const [conn, sock] = connected();
    expect(conn.status).toBe("open");
    sock.close();
    expect(conn.status).toBe("closed");
  });

  it("keeps only the latest state (one-slot buffer)", () => {
    const [conn, sock] = connected();
    sock.deliver(configMsg);
    sock.deliver(stateMsg(1));
    sock.deliver(stateMsg(2));
    sock.deliver(stateMsg(3));
    expect(conn.statesReceived).toBe(3);
    const s = conn.takeState();
    expect(s?.step).toBe(3);
    expect(conn.takeState()).toBeNull(); // consumed exactly once
  });

  it("drops malformed frames without rendering them", () => {
    const [conn, sock] = connected();
    sock.deliver("garbage{");
    sock.deliver({ type: "state", step: "NaN" });
    expect(conn.droppedMessages).toBe(2);
    expect(conn.takeState()).toBeNull();
  });

  it("discards stale state on a new config (reset)", () => {
    const [conn, sock] = connected();
    sock.deliver(configMsg);
    sock.deliver(stateMsg(9));
    sock.deliver(configMsg); // new episode
    expect(conn.takeState()).toBeNull();
  });

  it("does not send when the socket is not open", () => {
    let sock!: FakeSocket;
    const conn = new SessionConnection(() => {
      sock = new FakeSocket();
      return sock;
    });
    conn.connect("ws://test"); // never opened
    conn.send({ type: "teleop", dpos: [0, 0, 0], toggle: false });
    expect(sock.sent).toHaveLength(0);
  });

  it("surfaces server error messages", () => {
    const [conn, sock] = connected();
    sock.deliver({ type: "error", message: "session busy" });
    expect(conn.lastError).toBe("session busy");
  });

  it("notifies on save confirmations", () => {
    const [conn, sock] = connected();
    const saved: Array<[string, number]> = [];
    conn.onSaved = (p, n) => saved.push([p, n]);
    sock.deliver({ type: "saved", path: "demos/x.demo", steps: 12 });
    expect(saved).toEqual([["demos/x.demo", 12]]);
  });
});
