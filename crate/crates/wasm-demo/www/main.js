import init, { free_energy_curve, contact_profile, disorder_samples, sampling_route } from "./pkg/pinlab_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function model() {
  return { alpha: num("alpha"), family: $("family").value, strength: num("strength"), seed: BigInt(num("seed")) };
}

function guard(fn) {
  return () => {
    $("error").textContent = "";
    try {
      fn();
    } catch (e) {
      $("error").textContent = String(e.message ?? e);
    }
  };
}

function frame(canvas, xs, ys) {
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const pad = 30;
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  let [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  if (y0 === y1) { y0 -= 1; y1 += 1; }
  const sx = (x) => pad + ((x - x0) / (x1 - x0 || 1)) * (canvas.width - 2 * pad);
  const sy = (y) => canvas.height - pad - ((y - y0) / (y1 - y0)) * (canvas.height - 2 * pad);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, canvas.width - 2 * pad, canvas.height - 2 * pad);
  ctx.fillStyle = "#666";
  ctx.fillText(y1.toFixed(2), 2, pad);
  ctx.fillText(y0.toFixed(2), 2, canvas.height - pad);
  ctx.fillText(x0.toFixed(2), pad, canvas.height - 10);
  ctx.fillText(x1.toFixed(2), canvas.width - pad - 20, canvas.height - 10);
  return { ctx, sx, sy };
}

function polyline(ctx, pts, color) {
  ctx.strokeStyle = color;
  ctx.beginPath();
  pts.forEach(([x, y], i) => (i ? ctx.lineTo(x, y) : ctx.moveTo(x, y)));
  ctx.stroke();
}

function drawFreeEnergy() {
  const m = model();
  const rows = free_energy_curve(m.alpha, m.family, m.strength, num("fe-n"), num("fe-r"), -1, 2.5, 15, m.seed);
  const h = [], f = [], se = [], pure = [];
  for (let i = 0; i < rows.length; i += 4) {
    h.push(rows[i]); f.push(rows[i + 1]); se.push(rows[i + 2]); pure.push(rows[i + 3]);
  }
  const { ctx, sx, sy } = frame($("fe"), h, [...f, ...pure, 0]);
  polyline(ctx, h.map((x, i) => [sx(x), sy(pure[i])]), "#444");
  ctx.fillStyle = "#1a5fb4";
  h.forEach((x, i) => {
    ctx.fillRect(sx(x) - 3, sy(f[i]) - 3, 6, 6);
    polyline(ctx, [[sx(x), sy(f[i] - 2 * se[i])], [sx(x), sy(f[i] + 2 * se[i])]], "#1a5fb4");
  });
}

function drawProfile() {
  const m = model();
  const n = num("cp-n");
  const h = num("cp-h");
  $("cp-hv").textContent = h.toFixed(2);
  const v = contact_profile(m.alpha, m.family, m.strength, n, h, m.seed);
  const omega = v.slice(0, n), marg = v.slice(n, 2 * n), path = v.slice(2 * n);
  const xs = [...Array(n).keys()].map((i) => i + 1);
  const canvas = $("cp");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const top = frame(canvas, xs, [0, 1]);
  const lo = Math.min(...omega), hi = Math.max(...omega);
  polyline(ctx, xs.map((x, i) => [top.sx(x), top.sy((omega[i] - lo) / (hi - lo || 1))]), "#ccc");
  polyline(ctx, xs.map((x, i) => [top.sx(x), top.sy(marg[i])]), "#1a5fb4");
  ctx.strokeStyle = "#c01c28";
  xs.forEach((x, i) => {
    if (path[i] > 0) polyline(ctx, [[top.sx(x), top.sy(0)], [top.sx(x), top.sy(0.08)]], "#c01c28");
  });
}

function drawSamples() {
  const m = model();
  const n = num("ds-n"), count = num("ds-c");
  const v = disorder_samples(m.family, m.strength, n, count, m.seed);
  const xs = [...Array(n).keys()].map((i) => i + 1);
  const { ctx, sx, sy } = frame($("ds"), xs, Array.from(v));
  const colors = ["#1a5fb4", "#c01c28", "#26a269", "#e66100", "#613583", "#865e3c", "#333", "#999"];
  for (let k = 0; k < count; k++) {
    polyline(ctx, xs.map((x, i) => [sx(x), sy(v[k * n + i])]), colors[k % colors.length]);
  }
  $("route").textContent = "sampler: " + sampling_route(m.family, m.strength, n);
}

await init();
$("fe-go").onclick = guard(drawFreeEnergy);
$("ds-go").onclick = guard(drawSamples);
$("cp-h").oninput = guard(drawProfile);
for (const id of ["alpha", "family", "strength", "seed", "cp-n"]) $(id).onchange = guard(drawProfile);
guard(drawProfile)();
guard(drawSamples)();
