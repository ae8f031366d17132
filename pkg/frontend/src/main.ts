/** Operator console wiring: two orthographic canvases (top-down and side),
 *  pointer dragging of the selected gripper, keyboard shortcuts, and the
 *  30 Hz-decoupled render loop.
 *
 *  Keys: 1/2 select arm, space toggles the gripper, F1-F4 select
 *  PT/VA/SA_LB/SA_CBF, R resets the scenario. Scroll on a view moves the
 *  gripper down/up in 5 mm steps.
 */
import { ConsoleClient } from "./client.js";
import { MODES, type Arm, type Mode } from "./messages.js";
import { buildScene, paint, type ConsoleUiState } from "./render.js";
import { ViewMapping, WORKSPACE, clamp, dragToPosition, scrollToZ } from "./viewport.js";

const params = new URLSearchParams(window.location.search);
const host = params.get("host") ?? window.location.hostname ?? "127.0.0.1";
const port = params.get("port") ?? "8000";

const topCanvas = document.getElementById("top-view") as HTMLCanvasElement;
const sideCanvas = document.getElementById("side-view") as HTMLCanvasElement;
const toolbar = document.getElementById("toolbar") as HTMLDivElement;

const mappings = {
  top: new ViewMapping("top", topCanvas.width, topCanvas.height),
  side: new ViewMapping("side", sideCanvas.width, sideCanvas.height),
};

const ui: ConsoleUiState = { connected: false, selectedArm: 1, overlayToggled: false };
const armNames: Arm[] = ["left", "right"];
// Commanded pose per arm, owned by the console between drags.
const cmdPos: [number, number, number][] = [
  [-0.2, 0.0, 0.15],
  [0.0, -0.2, 0.15],
];
let gripperClosed = [false, false];

const client = new ConsoleClient(`ws://${host}:${port}/ws`, {
  onStatus: (ok) => { ui.connected = ok; },
});
client.connect();

function pushCommand(): void {
  client.sendCommand(armNames[ui.selectedArm], cmdPos[ui.selectedArm]);
}

function attachPointer(canvas: HTMLCanvasElement, view: ViewMapping): void {
  let dragging = false;
  canvas.addEventListener("pointerdown", (ev) => {
    dragging = true;
    canvas.setPointerCapture(ev.pointerId);
  });
  canvas.addEventListener("pointerup", () => { dragging = false; });
  canvas.addEventListener("pointermove", (ev) => {
    if (!dragging) return;
    const rect = canvas.getBoundingClientRect();
    const u = ((ev.clientX - rect.left) / rect.width) * canvas.width;
    const w = ((ev.clientY - rect.top) / rect.height) * canvas.height;
    cmdPos[ui.selectedArm] = dragToPosition(view, cmdPos[ui.selectedArm], u, w);
    pushCommand();
  });
  canvas.addEventListener("wheel", (ev) => {
    ev.preventDefault();
    const notches = -Math.sign(ev.deltaY);
    cmdPos[ui.selectedArm][2] = scrollToZ(cmdPos[ui.selectedArm][2], notches);
    pushCommand();
  });
}

attachPointer(topCanvas, mappings.top);
attachPointer(sideCanvas, mappings.side);

window.addEventListener("keydown", (ev) => {
  if (ev.key === "1") ui.selectedArm = 0;
  else if (ev.key === "2") ui.selectedArm = 1;
  else if (ev.key === " ") {
    ev.preventDefault();
    const i = ui.selectedArm;
    gripperClosed[i] = !gripperClosed[i];
    client.sendGripper(armNames[i], gripperClosed[i]);
  } else if (ev.key.startsWith("F") && !Number.isNaN(Number(ev.key.slice(1)))) {
    const idx = Number(ev.key.slice(1)) - 1;
    if (idx >= 0 && idx < MODES.length) {
      ev.preventDefault();
      client.sendMode(MODES[idx]);
    }
  } else if (ev.key === "r" || ev.key === "R") {
    client.sendReset();
    gripperClosed = [false, false];
  } else if (ev.key === "v" || ev.key === "V") {
    ui.overlayToggled = !ui.overlayToggled;
  }
});

for (const mode of MODES) {
  const btn = document.createElement("button");
  btn.textContent = mode;
  btn.onclick = () => client.sendMode(mode as Mode);
  toolbar.appendChild(btn);
}
const gripBtn = document.createElement("button");
gripBtn.textContent = "gripper";
gripBtn.onclick = () => {
  const i = ui.selectedArm;
  gripperClosed[i] = !gripperClosed[i];
  client.sendGripper(armNames[i], gripperClosed[i]);
};
toolbar.appendChild(gripBtn);
const resetBtn = document.createElement("button");
resetBtn.textContent = "reset";
resetBtn.onclick = () => client.sendReset();
toolbar.appendChild(resetBtn);

const topCtx = topCanvas.getContext("2d")!;
const sideCtx = sideCanvas.getContext("2d")!;

function frame(): void {
  client.poll();
  // Mirror the tracked command into view when idle so markers follow state.
  const state = client.latest;
  if (state !== null) {
    for (let i = 0; i < 2; i++) {
      const p = state.arms[i].cmd_pose.pos;
      if (i !== ui.selectedArm) {
        cmdPos[i] = [
          clamp(p[0], WORKSPACE.x[0], WORKSPACE.x[1]),
          clamp(p[1], WORKSPACE.y[0], WORKSPACE.y[1]),
          clamp(p[2], WORKSPACE.z[0], WORKSPACE.z[1]),
        ];
      }
    }
  }
  paint(topCtx, sideCtx, buildScene(state, ui), mappings);
  requestAnimationFrame(frame);
}
requestAnimationFrame(frame);
