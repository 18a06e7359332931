import init, { kernel_slice, simulate_path, rate_of_bump } from "./pkg/sgbh_web.js";

const $ = (id) => document.getElementById(id);

function plot(canvas, xs, series, opts = {}) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, pad = 28;
  ctx.clearRect(0, 0, w, h);
  let lo = Infinity, hi = -Infinity;
  for (const s of series) for (const v of s.ys) { lo = Math.min(lo, v); hi = Math.max(hi, v); }
  if (opts.zero) lo = Math.min(lo, 0);
  if (hi === lo) hi = lo + 1;
  const x0 = xs[0], x1 = xs[xs.length - 1];
  const px = (x) => pad + (w - 2 * pad) * (x - x0) / (x1 - x0);
  const py = (y) => h - pad - (h - 2 * pad) * (y - lo) / (hi - lo);
  ctx.strokeStyle = "#bbb";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#666";
  ctx.font = "11px sans-serif";
  ctx.fillText(hi.toPrecision(3), 2, pad + 4);
  ctx.fillText(lo.toPrecision(3), 2, h - pad);
  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.setLineDash(s.dash || []);
    ctx.lineWidth = s.width || 1.5;
    ctx.beginPath();
    s.ys.forEach((y, i) => (i ? ctx.lineTo(px(xs[i]), py(y)) : ctx.moveTo(px(xs[i]), py(y))));
    ctx.stroke();
  }
  ctx.setLineDash([]);
}

function drawKernel() {
  const t = 10 ** Number($("k-t").value), x = Number($("k-x").value), n = 199;
  const v = kernel_slice(t, x, n);
  const img = v.slice(0, n), eig = v.slice(n);
  const ys = Array.from({ length: n }, (_, i) => (i + 1) / (n + 1));
  let diff = 0;
  img.forEach((a, i) => (diff = Math.max(diff, Math.abs(a - eig[i]))));
  $("k-info").textContent = `t = ${t.toFixed(4)}, max |difference| = ${diff.toExponential(2)}`;
  plot($("k-canvas"), ys, [
    { ys: img, color: "#c33", width: 3 },
    { ys: eig, color: "#36c", dash: [6, 4] },
  ], { zero: true });
}

function runPath() {
  try {
    const view = simulate_path(Number($("s-eps").value), Number($("s-alpha").value),
      Number($("s-beta").value), BigInt($("s-seed").value));
    plot($("s-field"), view.x, [
      { ys: view.clean, color: "#333" },
      { ys: view.noisy, color: "#c33" },
    ], { zero: true });
    plot($("s-norm"), view.times, [
      { ys: view.clean_norm, color: "#333" },
      { ys: view.noisy_norm, color: "#c33" },
    ], { zero: true });
    $("s-info").textContent = "final time 0.25, lower panel: L² norm over time";
  } catch (e) {
    $("s-info").textContent = String(e);
  }
}

function runRate() {
  const mode = Number($("r-mode").value), amp = Number($("r-amp").value);
  try {
    $("r-out").textContent = rate_of_bump(amp, mode).toExponential(4);
    const amps = Array.from({ length: 21 }, (_, i) => amp * (i - 10) / 10);
    plot($("r-canvas"), amps, [{ ys: amps.map((a) => rate_of_bump(a, mode)), color: "#36c" }], { zero: true });
  } catch (e) {
    $("r-out").textContent = String(e);
  }
}

await init();
$("k-t").addEventListener("input", drawKernel);
$("k-x").addEventListener("input", drawKernel);
$("s-run").addEventListener("click", runPath);
$("r-run").addEventListener("click", runRate);
drawKernel();
runPath();
runRate();
