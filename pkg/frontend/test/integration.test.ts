/** End-to-end tests against the real session service over a real WebSocket:
 * slider step visible within two state frames, glove bars equal to server
 * values, e-stop banner raised by a forced contact and cleared by reset.
 */

import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { spawn, type ChildProcess } from "node:child_process";
import { createServer } from "node:net";
import WebSocket from "ws";

import { UiSession } from "../src/session.js";
import type { StateMessage } from "../src/protocol.js";

const PYTHON = process.env.TELEOSIM_PYTHON ?? "python3";

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const srv = createServer();
    srv.listen(0, "127.0.0.1", () => {
      const addr = srv.address();
      if (addr && typeof addr === "object") {
        const port = addr.port;
        srv.close(() => resolve(port));
      } else {
        reject(new Error("no port"));
      }
    });
  });
}

async function waitForHealth(port: number, timeoutMs = 30000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const resp = await fetch(`http://127.0.0.1:${port}/api/health`);
      if (resp.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((r) => setTimeout(r, 150));
  }
  throw new Error("service did not become healthy");
}

interface Harness {
  proc: ChildProcess;
  port: number;
}

async function startServer(variant: string): Promise<Harness> {
  const port = await freePort();
  const proc = spawn(
    PYTHON,
    [
      "-m", "teleosim.cli", "serve",
      "--bind", `127.0.0.1:${port}`,
      "--scenario", "place",
      "--variant", variant,
      "--time-scale", "2",
    ],
    { stdio: ["ignore", "pipe", "pipe"], cwd: new URL("../..", import.meta.url).pathname },
  );
  await waitForHealth(port);
  return { proc, port };
}

class Client {
  ws: WebSocket;
  session: UiSession;
  frames: StateMessage[] = [];
  private waiters: ((s: StateMessage) => void)[] = [];

  constructor(port: number, role = "controller") {
    this.ws = new WebSocket(`ws://127.0.0.1:${port}/ws?role=${role}`);
    this.session = new UiSession({ send: (d) => this.ws.send(d) }, {
      onState: (s) => {
        this.frames.push(s);
        const waiters = this.waiters;
        this.waiters = [];
        waiters.forEach((w) => w(s));
      },
    }, { sendRateHz: 1000 }); // tests pace their own sends
    this.ws.on("message", (data) => this.session.handleMessage(String(data)));
  }

  open(): Promise<void> {
    return new Promise((resolve, reject) => {
      this.ws.on("open", () => resolve());
      this.ws.on("error", reject);
    });
  }

  nextState(timeoutMs = 5000): Promise<StateMessage> {
    return new Promise((resolve, reject) => {
      const timer = setTimeout(() => reject(new Error("no state frame")), timeoutMs);
      this.waiters.push((s) => {
        clearTimeout(timer);
        resolve(s);
      });
    });
  }

  close(): void {
    this.ws.close();
  }
}

describe("operator loop against the live service", () => {
  let basic: Harness;
  let fgc: Harness;

  beforeAll(async () => {
    [basic, fgc] = await Promise.all([startServer("basic"), startServer("fgc")]);
  }, 60000);

  afterAll(() => {
    basic?.proc.kill();
    fgc?.proc.kill();
  });

  it("slider step moves the follower within the next two state frames", async () => {
    const client = new Client(basic.port);
    await client.open();
    const s0 = await client.nextState();
    const q0 = s0.arms[0].q[0];
    const target = [...s0.arms[0].q];
    target[0] += 0.3;
    client.session.localQ[0] = target;
    client.session.localG[0] = s0.arms[0].g;
    client.session.publishLeader(0);
    const f1 = await client.nextState();
    const f2 = await client.nextState();
    const moved = Math.abs(f1.arms[0].q[0] - q0) > 1e-9 || Math.abs(f2.arms[0].q[0] - q0) > 1e-9;
    expect(moved).toBe(true);
    // two state frames at 30 Hz span at most ~67 ms of simulated time
    expect(f2.t - s0.t).toBeLessThanOrEqual(0.067 + 0.005);
    client.close();
  }, 20000);

  it("glove bars equal server-sent values while pressing", async () => {
    const client = new Client(fgc.port);
    await client.open();
    const s0 = await client.nextState();
    const press = [...s0.arms[0].q];
    press[2] += 0.55; // toward the table, wrist compensated
    press[3] -= 0.55;
    let sawGlove = false;
    for (let i = 0; i < 200 && !sawGlove; i++) {
      client.session.localQ[0] = press;
      client.session.publishLeader(0);
      const s = await client.nextState();
      expect(client.session.gloveBars(0)).toEqual(s.arms[0].glove);
      if (s.arms[0].glove.some((v) => v > 0)) sawGlove = true;
    }
    expect(sawGlove).toBe(true);
    client.close();
  }, 30000);

  it("e-stop banner raises on forced contact and clears after reset", async () => {
    const client = new Client(basic.port);
    await client.open();
    const s0 = await client.nextState();
    const home = [...s0.arms[0].q];
    const press = [...home];
    press[2] += 0.9;
    press[3] -= 0.9;
    let tripped = false;
    for (let i = 0; i < 300 && !tripped; i++) {
      client.session.localQ[0] = press;
      client.session.publishLeader(0);
      await client.nextState();
      tripped = client.session.estopActive(0);
    }
    expect(tripped).toBe(true);

    client.session.localQ[0] = home;
    client.session.publishLeader(0);
    client.session.resetEstop(0);
    let cleared = false;
    for (let i = 0; i < 120 && !cleared; i++) {
      client.session.localQ[0] = home;
      client.session.publishLeader(0);
      await client.nextState();
      cleared = !client.session.estopActive(0);
    }
    expect(cleared).toBe(true);
    client.close();
  }, 30000);

  it("second controller is rejected busy while viewers connect freely", async () => {
    const a = new Client(basic.port);
    await a.open();
    await a.nextState();
    const rejected = await new Promise<boolean>((resolve) => {
      const ws = new WebSocket(`ws://127.0.0.1:${basic.port}/ws?role=controller`);
      ws.on("message", (data) => {
        const msg = JSON.parse(String(data));
        if (msg.type === "error" && msg.reason === "busy") resolve(true);
      });
      ws.on("close", () => resolve(true));
      setTimeout(() => resolve(false), 5000);
    });
    expect(rejected).toBe(true);
    const viewer = new Client(basic.port, "viewer");
    await viewer.open();
    await viewer.nextState();
    viewer.close();
    a.close();
  }, 20000);
});
