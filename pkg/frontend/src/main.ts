/** Operator panel wiring: WebSocket, joint sliders, gripper triggers,
 * pedal toggle, glove bars, e-stop banners, mode gauges, canvas views. */

import { dragDeltas } from "./fk.js";
import { GLOVE_LABELS, SIDE_VIEW, TOP_VIEW, drawScene, viewMoveVector } from "./render.js";
import { UiSession } from "./session.js";
import type { HelloMessage, StateMessage } from "./protocol.js";

const JOINT_NAMES = ["base", "shoulder", "elbow", "wrist1", "wrist2", "wrist3"];

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function wsUrl(): string {
  const proto = location.protocol === "https:" ? "wss" : "ws";
  return `${proto}://${location.host}/ws?role=controller`;
}

function buildArmPanel(arm: number, session: UiSession): HTMLElement {
  const panel = document.createElement("div");
  panel.className = "arm-panel";
  panel.innerHTML = `<h2>arm ${arm}</h2>`;

  const sliders: HTMLInputElement[] = [];
  for (let j = 0; j < 6; j++) {
    const rowEl = document.createElement("label");
    rowEl.className = "joint-row";
    rowEl.textContent = JOINT_NAMES[j];
    const slider = document.createElement("input");
    slider.type = "range";
    slider.min = (-Math.PI).toFixed(3);
    slider.max = Math.PI.toFixed(3);
    slider.step = "0.001";
    slider.addEventListener("input", () => {
      session.setLocalJoint(arm, j, parseFloat(slider.value));
    });
    sliders.push(slider);
    rowEl.appendChild(slider);
    panel.appendChild(rowEl);
  }

  const gripRow = document.createElement("label");
  gripRow.className = "joint-row";
  gripRow.textContent = "gripper";
  const grip = document.createElement("input");
  grip.type = "range";
  grip.min = "0";
  grip.max = "1";
  grip.step = "0.01";
  grip.addEventListener("input", () => session.setLocalGripper(arm, parseFloat(grip.value)));
  gripRow.appendChild(grip);
  panel.appendChild(gripRow);

  const gloveBox = document.createElement("div");
  gloveBox.className = "glove-box";
  const bars: HTMLDivElement[] = [];
  for (let i = 0; i < 6; i++) {
    const wrap = document.createElement("div");
    wrap.className = "glove-bar-wrap";
    const bar = document.createElement("div");
    bar.className = "glove-bar";
    wrap.appendChild(bar);
    const label = document.createElement("span");
    label.textContent = GLOVE_LABELS[i];
    wrap.appendChild(label);
    gloveBox.appendChild(wrap);
    bars.push(bar);
  }
  panel.appendChild(gloveBox);

  const gauge = document.createElement("div");
  gauge.className = "mode-gauge";
  gauge.innerHTML = `<span>mode ratio</span><div class="gauge-track"><div class="gauge-fill"></div></div><code>0.00</code>`;
  panel.appendChild(gauge);

  const banner = document.createElement("div");
  banner.className = "estop-banner hidden";
  banner.textContent = "E-STOP ";
  const resetBtn = document.createElement("button");
  resetBtn.textContent = "reset";
  resetBtn.addEventListener("click", () => session.resetEstop(arm));
  banner.appendChild(resetBtn);
  panel.appendChild(banner);

  const sync = (state: StateMessage) => {
    const a = state.arms[arm];
    bars.forEach((bar, i) => {
      bar.style.height = `${Math.round(a.glove[i] * 100)}%`;
    });
    const fill = gauge.querySelector<HTMLDivElement>(".gauge-fill");
    const value = gauge.querySelector("code");
    if (fill) fill.style.width = `${Math.round(a.mode_ratio * 100)}%`;
    if (value) value.textContent = a.mode_ratio.toFixed(2);
    banner.classList.toggle("hidden", !a.estop);
    if (document.activeElement?.tagName !== "INPUT") {
      sliders.forEach((s, j) => {
        s.value = session.localQ[arm][j]?.toFixed(3) ?? "0";
      });
      grip.value = session.localG[arm].toFixed(2);
    }
  };
  panel.addEventListener("teleosim-state", ((ev: CustomEvent<StateMessage>) => sync(ev.detail)) as EventListener);
  return panel;
}

function main(): void {
  const socket = new WebSocket(wsUrl());
  const status = el<HTMLElement>("status");
  const sideCanvas = el<HTMLCanvasElement>("side-view");
  const topCanvas = el<HTMLCanvasElement>("top-view");
  const armsBox = el<HTMLElement>("arms");
  const pedalBtn = el<HTMLButtonElement>("pedal");

  const session = new UiSession(
    { send: (data) => socket.send(data) },
    {
      onHello: (hello: HelloMessage) => {
        status.textContent = `connected - ${hello.scenario} [${hello.variant}]`;
      },
      onState: (state: StateMessage) => {
        for (const panel of Array.from(armsBox.children)) {
          panel.dispatchEvent(new CustomEvent("teleosim-state", { detail: state }));
        }
      },
      onError: (reason) => {
        status.textContent = `error: ${reason}`;
      },
    },
  );

  socket.onopen = () => {
    status.textContent = "connected, waiting for hello";
  };
  socket.onmessage = (ev: MessageEvent) => session.handleMessage(String(ev.data));
  socket.onclose = () => {
    status.textContent = "disconnected";
  };

  for (let arm = 0; arm < 2; arm++) {
    armsBox.appendChild(buildArmPanel(arm, session));
  }

  pedalBtn.addEventListener("click", () => {
    session.setPedal(!session.enabled);
    pedalBtn.textContent = session.enabled ? "disable (pedal)" : "enable (pedal)";
    pedalBtn.classList.toggle("disabled", !session.enabled);
  });

  // end-effector drag on the side view: pointer motion maps to joint deltas
  // through the transposed Jacobian; no inverse kinematics involved
  let dragArm: number | null = null;
  let last: [number, number] | null = null;
  sideCanvas.addEventListener("pointerdown", (ev) => {
    if (!session.hello || !session.lastState) return;
    dragArm = ev.offsetX < sideCanvas.width / 2 ? 0 : 1;
    last = [ev.offsetX, ev.offsetY];
    sideCanvas.setPointerCapture(ev.pointerId);
  });
  sideCanvas.addEventListener("pointermove", (ev) => {
    if (dragArm === null || !last || !session.hello) return;
    const move = viewMoveVector(SIDE_VIEW, sideCanvas.width, sideCanvas.height, ev.offsetX - last[0], ev.offsetY - last[1]);
    last = [ev.offsetX, ev.offsetY];
    const deltas = dragDeltas(
      session.hello.dh_table,
      session.localQ[dragArm],
      session.hello.world_config.base_poses[dragArm],
      move,
      2.0,
    );
    session.nudgeLocalJoints(dragArm, deltas);
  });
  sideCanvas.addEventListener("pointerup", () => {
    dragArm = null;
    last = null;
  });

  // one static viewpoint by default; the top view is opt-in
  const showTop = el<HTMLInputElement>("show-top");
  showTop.addEventListener("change", () => {
    topCanvas.hidden = !showTop.checked;
  });

  const sideCtx = sideCanvas.getContext("2d");
  const topCtx = topCanvas.getContext("2d");
  const draw = () => {
    if (session.hello && session.lastState && sideCtx && topCtx) {
      drawScene(sideCtx, SIDE_VIEW, session.hello, session.lastState);
      if (!topCanvas.hidden) drawScene(topCtx, TOP_VIEW, session.hello, session.lastState);
      el<HTMLElement>("latency").textContent = `${session.latencyEstimateMs.toFixed(0)} ms jitter`;
    }
    requestAnimationFrame(draw);
  };
  requestAnimationFrame(draw);
}

main();
