// Expects the wasm-bindgen output (--target web) in ./pkg.
import init, { celegansWiring, GaDemo, rankWeights, rankDecayCurve } from "./pkg/mnn_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function fail(where, err) {
  $(where).innerHTML = `<span class="error">${err.message ?? err}</span>`;
}

// Wiring heatmap: red excitatory, blue inhibitory, rows are targets.
function drawWiring() {
  let w;
  try {
    w = celegansWiring(num("w-s"), num("w-i"), num("w-c"), num("w-m"),
      num("w-p1"), num("w-p3"), num("w-p4"), num("w-seed"));
  } catch (e) { return fail("w-stats", e); }
  const n = w.size, weights = w.weights(), ends = w.layerEnds();
  const cv = $("w-canvas"), ctx = cv.getContext("2d");
  const img = ctx.createImageData(n, n);
  let max = 1e-12;
  for (const v of weights) max = Math.max(max, Math.abs(v));
  for (let i = 0; i < n * n; i++) {
    const v = weights[i] / max, a = Math.min(1, Math.sqrt(Math.abs(v)));
    const o = 4 * i;
    if (v > 0) { img.data[o] = 200; img.data[o + 1] = 40; img.data[o + 2] = 40; }
    else { img.data[o] = 40; img.data[o + 1] = 70; img.data[o + 2] = 200; }
    img.data[o + 3] = v === 0 ? 0 : 60 + 195 * a;
  }
  const off = new OffscreenCanvas(n, n);
  off.getContext("2d").putImageData(img, 0, 0);
  ctx.clearRect(0, 0, cv.width, cv.height);
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(off, 0, 0, cv.width, cv.height);
  ctx.strokeStyle = "#888";
  for (const e of ends.slice(0, 3)) {
    const p = (e / n) * cv.width;
    ctx.beginPath(); ctx.moveTo(p, 0); ctx.lineTo(p, cv.height); ctx.stroke();
    ctx.beginPath(); ctx.moveTo(0, p); ctx.lineTo(cv.width, p); ctx.stroke();
  }
  $("w-stats").textContent =
    `${n} neurons, density ${(100 * w.density).toFixed(2)}%, ` +
    `layer violations ${w.violations}, orphan targets ${w.orphans}`;
  w.free();
}

function plotLines(cv, series, yMin, yMax, xLabel) {
  const ctx = cv.getContext("2d"), W = cv.width, H = cv.height, pad = 30;
  ctx.clearRect(0, 0, W, H);
  ctx.strokeStyle = "#aaa"; ctx.strokeRect(pad, 5, W - pad - 5, H - pad - 5);
  ctx.fillStyle = "#555";
  ctx.fillText(yMax.toFixed(2), 2, 12);
  ctx.fillText(yMin.toFixed(2), 2, H - pad);
  ctx.fillText(xLabel, W / 2 - 30, H - 8);
  for (const { xs, ys, color } of series) {
    if (ys.length === 0) continue;
    const x0 = xs[0], x1 = xs[xs.length - 1] === x0 ? x0 + 1 : xs[xs.length - 1];
    ctx.strokeStyle = color; ctx.beginPath();
    ys.forEach((y, i) => {
      const px = pad + ((xs[i] - x0) / (x1 - x0)) * (W - pad - 5);
      const py = 5 + (1 - (y - yMin) / (yMax - yMin)) * (H - pad - 10);
      i === 0 ? ctx.moveTo(px, py) : ctx.lineTo(px, py);
    });
    ctx.stroke();
  }
}

let demo = null;

function resetGa() {
  if (demo) demo.free();
  demo = null;
  try {
    demo = new GaDemo(num("g-seed"), num("g-dim"), num("g-mesh"), num("g-n"),
      num("g-sep"), num("g-k"), num("g-sm"), num("g-sr"));
  } catch (e) { return fail("g-stats", e); }
  drawGa();
}

function stepGa(n) {
  if (!demo) return;
  try { demo.step(n); } catch (e) { return fail("g-stats", e); }
  drawGa();
}

function drawGa() {
  const best = demo.bestHistory(), mean = demo.meanHistory();
  const xs = [...best.keys()];
  plotLines($("g-canvas"), [
    { xs, ys: best, color: "#c22" },
    { xs, ys: mean, color: "#27c" },
  ], 0, 1, "generation");
  const [train, test] = demo.bestTrainTest();
  $("g-stats").textContent =
    `generation ${demo.generation}: best val ${best[best.length - 1].toFixed(3)} (red), ` +
    `mean ${mean[mean.length - 1].toFixed(3)} (blue); best train ${train.toFixed(3)}, test ${test.toFixed(3)}`;
}

function drawRank() {
  const scores = $("r-scores").value.split(",").map((s) => Number(s.trim())).filter((v) => !Number.isNaN(v));
  const decay = num("r-decay");
  $("r-decay-value").textContent = decay.toFixed(2);
  const decays = Array.from({ length: 20 }, (_, i) => 0.05 * (i + 1));
  let curve;
  try { curve = rankDecayCurve(scores, decays); } catch (e) { return fail("r-stats", e); }
  plotLines($("r-canvas"), [
    { xs: decays, ys: curve, color: "#c22" },
    { xs: decays, ys: decays.map(() => 0.5), color: "#bbb" },
    { xs: decays, ys: decays.map(() => -0.5), color: "#bbb" },
  ], -1, 1, "decay");
  const weights = rankWeights(decay, scores.length);
  const total = weights.reduce((a, b) => a + b, 0);
  const [here] = rankDecayCurve(scores, [decay]);
  $("r-stats").textContent =
    `normalized score at decay ${decay.toFixed(2)}: ${here.toFixed(4)}` +
    `${Math.abs(here) > 0.5 ? " (significant)" : ""}; rank weights ` +
    weights.map((w) => (w / total).toFixed(3)).join(" ");
}

await init();
$("status").textContent = "";
$("w-go").onclick = drawWiring;
$("g-reset").onclick = resetGa;
$("g-step1").onclick = () => stepGa(1);
$("g-step10").onclick = () => stepGa(10);
$("r-scores").oninput = drawRank;
$("r-decay").oninput = drawRank;
drawWiring();
resetGa();
drawRank();
