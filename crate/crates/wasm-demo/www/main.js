import init, { constitutive_curves, Demo } from "./pkg/biofilm_wasm.js";

const $ = (id) => document.getElementById(id);

function plot(canvas, xs, ys, color) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 36;
  const xmax = Math.max(...xs);
  const ymax = Math.max(...ys) || 1;
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#888";
  ctx.strokeRect(pad, 8, w - pad - 8, h - pad - 8);
  ctx.fillStyle = "#444";
  ctx.font = "11px sans-serif";
  ctx.fillText(ymax.toPrecision(3), 2, 16);
  ctx.fillText("0", pad - 10, h - pad + 12);
  ctx.fillText(xmax.toPrecision(3), w - 40, h - pad + 12);
  ctx.strokeStyle = color;
  ctx.lineWidth = 2;
  ctx.beginPath();
  xs.forEach((x, i) => {
    const px = pad + (x / xmax) * (w - pad - 8);
    const py = h - pad - (ys[i] / ymax) * (h - pad - 16);
    if (i === 0) ctx.moveTo(px, py);
    else ctx.lineTo(px, py);
  });
  ctx.stroke();
}

function drawCurves() {
  const mu = Number($("mu").value);
  $("mu-value").textContent = mu.toFixed(3);
  try {
    const data = constitutive_curves(mu, 200);
    const r = [], bound = [], pot = [];
    for (let i = 0; i < data.length; i += 3) {
      r.push(data[i]);
      bound.push(data[i + 1]);
      pot.push(data[i + 2]);
    }
    plot($("bound"), r, bound, "#1565c0");
    plot($("potential"), r, pot, "#2e7d32");
    $("curve-error").textContent = "";
  } catch (e) {
    $("curve-error").textContent = String(e);
  }
}

// Maps [0, 1] to a white-to-color ramp.
function heat(canvas, values, n, max, rgb) {
  const ctx = canvas.getContext("2d");
  const img = ctx.createImageData(n, n);
  for (let j = 0; j < n; j++) {
    for (let i = 0; i < n; i++) {
      const t = Math.min(1, Math.max(0, values[j * n + i] / max));
      const k = ((n - 1 - j) * n + i) * 4;
      img.data[k] = 255 - t * (255 - rgb[0]);
      img.data[k + 1] = 255 - t * (255 - rgb[1]);
      img.data[k + 2] = 255 - t * (255 - rgb[2]);
      img.data[k + 3] = 255;
    }
  }
  const off = new OffscreenCanvas(n, n);
  off.getContext("2d").putImageData(img, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(off, 0, 0, canvas.width, canvas.height);
}

let demo = null;
let running = false;

function draw() {
  const n = demo.cells();
  heat($("biomass"), demo.biomass(), n, 1, [46, 125, 50]);
  const speed = demo.speed();
  heat($("speed"), speed, n, Math.max(...speed) || 1, [21, 101, 192]);
  $("stats").textContent = [
    `t              ${demo.time().toFixed(3)}`,
    `steps          ${demo.steps()}`,
    `kinetic energy ${demo.kinetic_energy().toExponential(3)}`,
    `biomass mass   ${demo.biomass_mass().toFixed(4)}`,
    `picard iters   ${demo.picard_iterations()}`,
    `bound excess   ${demo.constraint_excess().toExponential(2)}`,
  ].join("\n");
}

function reset() {
  try {
    demo?.free();
    demo = new Demo(Number($("cells").value), Number($("seed").value), Number($("forcing").value));
    $("run-error").textContent = "";
    draw();
  } catch (e) {
    demo = null;
    $("run-error").textContent = String(e);
  }
}

function tick() {
  if (!running || !demo) return;
  try {
    demo.step(2);
    draw();
    requestAnimationFrame(tick);
  } catch (e) {
    running = false;
    $("play").textContent = "Run";
    $("run-error").textContent = String(e);
  }
}

await init();
$("mu").addEventListener("input", drawCurves);
$("reset").addEventListener("click", reset);
$("play").addEventListener("click", () => {
  running = !running;
  $("play").textContent = running ? "Pause" : "Run";
  tick();
});
$("biomass").addEventListener("click", (ev) => {
  if (!demo) return;
  const rect = ev.target.getBoundingClientRect();
  const x = (ev.clientX - rect.left) / rect.width;
  const y = 1 - (ev.clientY - rect.top) / rect.height;
  demo.add_biomass(x, y, 0.08, 0.6);
  draw();
});
drawCurves();
reset();
