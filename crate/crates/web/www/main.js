import init, { pattern, classify_state, phase_diagram, thermometry_curve } from "./pkg/stokesdiff_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function report(el, f) {
  try {
    f();
  } catch (e) {
    $(el).textContent = "error: " + (e.message ?? e);
  }
}

// magma-like ramp, t in [0, 1]
function ramp(t) {
  const r = Math.min(255, 40 + 400 * t);
  const g = Math.max(0, Math.min(255, 320 * (t - 0.35)));
  const b = Math.max(0, Math.min(255, 90 + 300 * (t - 0.15) * (0.8 - t)));
  return [r, g, b];
}

function drawPattern() {
  report("p-out", () => {
    const size = num("p-size");
    const p = pattern(num("p-n"), num("p-mean"), num("p-var"), num("p-pair"),
      num("p-fwhm"), size, BigInt(num("p-seed")), $("p-avg").checked);
    const v = p.values();
    const max = v.reduce((a, b) => Math.max(a, b), 0) || 1;
    const img = new ImageData(size, size);
    for (let row = 0; row < size; row++) {
      for (let col = 0; col < size; col++) {
        // lowest k_y first; flip so it sits at the bottom
        const [r, g, b] = ramp(v[row * size + col] / max);
        const o = 4 * ((size - 1 - row) * size + col);
        img.data.set([r, g, b, 255], o);
      }
    }
    blit($("p-canvas"), img);
    const ctx = $("p-canvas").getContext("2d");
    const c = $("p-canvas").width / 2;
    ctx.strokeStyle = "#7fd";
    ctx.beginPath();
    ctx.arc(c, c, c * p.theta_b / p.half_angle, 0, 2 * Math.PI);
    ctx.stroke();
    $("p-out").textContent =
      `θ_b = ${(p.theta_b * 1e3).toFixed(3)} mrad (ring)\n` +
      `half-angle = ${(p.half_angle * 1e3).toFixed(3)} mrad\n` +
      `ratio = ${p.ratio.toFixed(4)}\n` +
      `large-N = ${p.large_n.toFixed(4)}`;
    p.free();
  });
}

function blit(canvas, img) {
  const tmp = new OffscreenCanvas(img.width, img.height);
  tmp.getContext("2d").putImageData(img, 0, 0);
  const ctx = canvas.getContext("2d");
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(tmp, 0, 0, canvas.width, canvas.height);
}

const LABELS = [
  ["none", [225, 225, 225]],
  ["upper violated", [214, 96, 77]],
  ["lower violated", [67, 147, 195]],
  ["moment violated", [120, 180, 90]],
  ["several", [150, 90, 170]],
  ["unphysical", [60, 60, 60]],
];
$("w-legend").innerHTML = LABELS.map(([name, [r, g, b]]) =>
  `<span><i style="background:rgb(${r},${g},${b})"></i>${name}</span>`).join("");

const W_ROWS = 80, W_COLS = 80;

function diagramRange() {
  const n = num("w-n"), m = num("w-mean");
  return { n, m, vmax: m * (n - m), pmin: -n / 2, pmax: n * (n - 1) / num("w-scale") };
}

function drawDiagram() {
  report("w-out", () => {
    const codes = phase_diagram(num("w-n"), num("w-mean"), W_ROWS, W_COLS, num("w-scale"));
    const img = new ImageData(W_COLS, W_ROWS);
    for (let i = 0; i < W_ROWS; i++) {
      for (let j = 0; j < W_COLS; j++) {
        const [r, g, b] = LABELS[codes[i * W_COLS + j]][1];
        img.data.set([r, g, b, 255], 4 * ((W_ROWS - 1 - i) * W_COLS + j));
      }
    }
    blit($("w-canvas"), img);
    const { vmax, pmin, pmax } = diagramRange();
    $("w-out").textContent =
      `x: P from ${pmin} to ${pmax.toFixed(1)}\ny: ΔN_s² from 0 to ${vmax.toFixed(1)}\n\nclick to classify a point`;
  });
}

$("w-canvas").addEventListener("click", (ev) => {
  const rect = ev.target.getBoundingClientRect();
  const fx = (ev.clientX - rect.left) / rect.width;
  const fy = 1 - (ev.clientY - rect.top) / rect.height;
  const { n, m, vmax, pmin, pmax } = diagramRange();
  const p = pmin + fx * (pmax - pmin), v = fy * vmax;
  report("w-out", () => {
    $("w-out").textContent = `ΔN_s² = ${v.toFixed(3)}\nP = ${p.toFixed(3)}\n\n` +
      classify_state(n, m, v, p);
  });
});

function drawThermometry() {
  report("t-out", () => {
    const out = thermometry_curve(num("t-n"), num("t-temp"), num("t-tau"),
      num("t-points"), BigInt(num("t-seed")));
    const fitted = out[out.length - 1];
    const pts = [];
    for (let i = 0; i + 1 < out.length; i += 2) pts.push([out[i], out[i + 1]]);
    const canvas = $("t-canvas"), ctx = canvas.getContext("2d");
    const w = canvas.width, h = canvas.height, pad = 36;
    ctx.clearRect(0, 0, w, h);
    const tmax = pts[pts.length - 1][0] || 1;
    const smax = Math.max(...pts.map((q) => q[1])) || 1;
    const X = (t) => pad + (w - 2 * pad) * t / tmax;
    const Y = (s) => h - pad - (h - 2 * pad) * s / smax;
    ctx.strokeStyle = "#888";
    ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
    ctx.fillStyle = "#333";
    ctx.fillText("0", pad - 4, h - pad + 14);
    ctx.fillText(`${(tmax * 1e3).toFixed(2)} ms`, w - pad - 30, h - pad + 14);
    ctx.fillText("peak strength", pad, pad - 8);
    ctx.fillStyle = "#c33";
    for (const [t, s] of pts) {
      ctx.beginPath();
      ctx.arc(X(t), Y(s), 3, 0, 2 * Math.PI);
      ctx.fill();
    }
    $("t-out").textContent = pts.map(([t, s]) => `${(t * 1e3).toFixed(3)} ms  ${s.toExponential(4)}`).join("\n") +
      `\n\nfitted T = ${(fitted * 1e6).toFixed(4)} µK`;
  });
}

$("p-run").addEventListener("click", drawPattern);
$("w-run").addEventListener("click", drawDiagram);
$("t-run").addEventListener("click", drawThermometry);

await init();
drawPattern();
drawDiagram();
drawThermometry();
