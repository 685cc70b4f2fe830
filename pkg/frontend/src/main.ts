// App wiring: render loop, socket, pointer/keyboard handling, overlay UI.

import * as THREE from "three";
import { OrbitControls } from "three/examples/jsm/controls/OrbitControls.js";
import { DEFAULT_MAPPER, InputMapper } from "./input";
import { applyUpdate, buildScene } from "./scene";
import { TeleopSocket } from "./socket";
import { ViewModel } from "./viewmodel";

const canvas = document.getElementById("view") as HTMLCanvasElement;
const statusEl = document.getElementById("status")!;
const recordBtn = document.getElementById("record") as HTMLButtonElement;
const resetBtn = document.getElementById("reset") as HTMLButtonElement;
const overlay = document.getElementById("overlay")!;

const vm = new ViewModel();
const mapper = new InputMapper(DEFAULT_MAPPER);
const refs = buildScene();

const renderer = new THREE.WebGLRenderer({ canvas, antialias: true });
const camera = new THREE.PerspectiveCamera(50, 1, 0.01, 10);
camera.up.set(0, 0, 1);
camera.position.set(1.1, -0.9, 0.8);
const controls = new OrbitControls(camera, canvas);
controls.target.set(0.4, 0, 0.15);

function resize(): void {
  const w = canvas.clientWidth || window.innerWidth;
  const h = canvas.clientHeight || window.innerHeight;
  renderer.setSize(w, h, false);
  camera.aspect = w / h;
  camera.updateProjectionMatrix();
}
window.addEventListener("resize", resize);

const wsUrl = `ws://${location.host}/ws`;
const socket = new TeleopSocket(
  wsUrl,
  (msg) => {
    vm.apply(msg);
    if (msg.type === "state") {
      applyUpdate(refs, msg);
      if (msg.ik_target === null) {
        mapper.syncTarget(
          { x: msg.entities.ee.p[0], y: msg.entities.ee.p[1], z: msg.entities.ee.p[2] },
          msg.entities.ee.q,
        );
      }
    }
  },
  (open) => {
    vm.setConnection(open ? "open" : "closed");
    if (open) socket.send(mapper.hello());
  },
);
socket.connect();

// pointer drag on the gizmo plane; alt/shift switches to rotation mode
let dragging = false;
let lastX = 0;
let lastY = 0;
canvas.addEventListener("pointerdown", (ev) => {
  if (!vm.dragEnabled || !ev.shiftKey) return;
  dragging = true;
  lastX = ev.clientX;
  lastY = ev.clientY;
  controls.enabled = false;
  canvas.setPointerCapture(ev.pointerId);
});
canvas.addEventListener("pointermove", (ev) => {
  if (!dragging) return;
  const right = new THREE.Vector3();
  camera.getWorldDirection(right);
  const camRight = new THREE.Vector3().crossVectors(
    new THREE.Vector3(0, 0, 1), right).negate().normalize();
  const camUp = new THREE.Vector3(0, 0, 1);
  mapper.drag(ev.clientX - lastX, ev.clientY - lastY,
              {
                right: { x: camRight.x, y: camRight.y, z: camRight.z },
                up: { x: camUp.x, y: camUp.y, z: camUp.z },
              },
              ev.altKey);
  lastX = ev.clientX;
  lastY = ev.clientY;
});
canvas.addEventListener("pointerup", () => {
  dragging = false;
  controls.enabled = true;
});

const keys = new Set<string>();
window.addEventListener("keydown", (ev) => keys.add(ev.key.toLowerCase()));
window.addEventListener("keyup", (ev) => keys.delete(ev.key.toLowerCase()));

recordBtn.addEventListener("click", () => {
  socket.send(mapper.immediate(vm.recording ? "record_stop" : "record_start"));
});
resetBtn.addEventListener("click", () => {
  socket.send(mapper.immediate("reset"));
  mapper.resetTarget();
});

let lastFlush = performance.now();
function frame(now: number): void {
  const dt = (now - lastFlush) / 1000;
  if (keys.has("q")) mapper.gripperKey(dt, true);
  if (keys.has("e")) mapper.gripperKey(dt, false);
  lastFlush = now;
  for (const msg of mapper.flush(now)) socket.send(msg);

  statusEl.textContent = vm.statusText();
  recordBtn.textContent = vm.recording ? "stop recording" : "record";
  const terminalBanner = vm.terminal !== null && vm.terminal !== "success";
  overlay.style.display =
    vm.connection !== "open" || terminalBanner ? "flex" : "none";
  overlay.textContent = vm.connection !== "open"
    ? "disconnected - retrying..."
    : `episode ended: ${vm.terminal} - press reset`;

  controls.update();
  resize();
  renderer.render(refs.scene, camera);
  requestAnimationFrame(frame);
}
requestAnimationFrame(frame);
