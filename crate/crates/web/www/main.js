import init, { similarity_heatmap, compare_engines, entry_surrogate_curve } from "./pkg/snmf_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function guard(f) {
  return () => {
    $("err").textContent = "";
    try { f(); } catch (e) { $("err").textContent = String(e); }
  };
}

function drawHeat() {
  const n = num("h-n");
  const d = similarity_heatmap($("h-method").value, n, num("h-m"), num("h-noise"), num("h-seed"));
  let lo = Infinity, hi = -Infinity;
  for (const v of d) { lo = Math.min(lo, v); hi = Math.max(hi, v); }
  const c = $("heat"), ctx = c.getContext("2d");
  const img = ctx.createImageData(n, n);
  for (let k = 0; k < d.length; k++) {
    const t = hi > lo ? (d[k] - lo) / (hi - lo) : 0;
    img.data[4 * k] = 255 * t;
    img.data[4 * k + 1] = 80 + 120 * t;
    img.data[4 * k + 2] = 255 * (1 - t);
    img.data[4 * k + 3] = 255;
  }
  const tmp = new OffscreenCanvas(n, n);
  tmp.getContext("2d").putImageData(img, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.clearRect(0, 0, c.width, c.height);
  ctx.drawImage(tmp, 0, 0, c.width, c.height);
}

function plot(canvas, series, opts = {}) {
  const ctx = canvas.getContext("2d");
  const W = canvas.width, H = canvas.height, pad = 40;
  ctx.clearRect(0, 0, W, H);
  const tf = opts.logy ? (v) => Math.log10(Math.max(v, 1e-12)) : (v) => v;
  let x0 = Infinity, x1 = -Infinity, y0 = Infinity, y1 = -Infinity;
  for (const s of series) {
    for (let k = 0; k < s.x.length; k++) {
      x0 = Math.min(x0, s.x[k]); x1 = Math.max(x1, s.x[k]);
      const y = tf(s.y[k]);
      y0 = Math.min(y0, y); y1 = Math.max(y1, y);
    }
  }
  if (y1 === y0) y1 = y0 + 1;
  if (x1 === x0) x1 = x0 + 1;
  const px = (x) => pad + (W - 2 * pad) * (x - x0) / (x1 - x0);
  const py = (y) => H - pad - (H - 2 * pad) * (tf(y) - y0) / (y1 - y0);
  ctx.strokeStyle = "#888";
  ctx.strokeRect(pad, pad, W - 2 * pad, H - 2 * pad);
  ctx.fillStyle = "#444";
  ctx.font = "11px sans-serif";
  const fmt = (v) => opts.logy ? "1e" + v.toFixed(1) : v.toPrecision(3);
  ctx.fillText(fmt(y1), 2, pad + 4);
  ctx.fillText(fmt(y0), 2, H - pad);
  ctx.fillText(x0.toPrecision(3), pad, H - pad + 14);
  ctx.fillText(x1.toPrecision(3), W - pad - 30, H - pad + 14);
  series.forEach((s, idx) => {
    ctx.strokeStyle = s.color;
    ctx.beginPath();
    for (let k = 0; k < s.x.length; k++) {
      const f = k ? "lineTo" : "moveTo";
      ctx[f](px(s.x[k]), py(s.y[k]));
    }
    ctx.stroke();
    ctx.fillStyle = s.color;
    ctx.fillText(s.label, W - pad - 120, pad + 14 + 14 * idx);
  });
  for (const m of opts.marks || []) {
    ctx.fillStyle = m.color;
    ctx.beginPath();
    ctx.arc(px(m.x), py(m.y), 4, 0, 2 * Math.PI);
    ctx.fill();
  }
}

function drawTrace() {
  const s = num("t-sweeps");
  const t = compare_engines($("t-method").value, num("t-n"), num("t-r"), num("t-noise"), num("t-seed"), s);
  const res = [t.slice(0, s), t.slice(s, 2 * s)];
  const time = [t.slice(2 * s, 3 * s), t.slice(3 * s, 4 * s)];
  const idx = Float64Array.from({ length: s }, (_, k) => k + 1);
  const useTime = $("t-time").checked;
  plot($("trace"), [
    { x: useTime ? time[0] : idx, y: res[0], color: "#c33", label: "sBSUM" },
    { x: useTime ? time[1] : idx, y: res[1], color: "#36c", label: "vBSUM" },
  ], { logy: true });
  $("t-info").textContent =
    `final residual: sBSUM ${res[0][s - 1].toFixed(3)}% in ${(1e3 * time[0][s - 1]).toFixed(1)} ms, ` +
    `vBSUM ${res[1][s - 1].toFixed(3)}% in ${(1e3 * time[1][s - 1]).toFixed(1)} ms`;
}

function drawCurve() {
  const pts = 200;
  const c = entry_surrogate_curve(num("s-n"), num("s-r"), num("s-seed"), num("s-i"), num("s-j"), pts);
  const [xCur, xNew, lift] = c;
  const v = [], g = [], gt = [];
  for (let k = 0; k < pts; k++) {
    v.push(c[4 + 3 * k]); g.push(c[5 + 3 * k]); gt.push(c[6 + 3 * k]);
  }
  const at = (arr, x) => {
    let best = 0;
    for (let k = 1; k < pts; k++) if (Math.abs(v[k] - x) < Math.abs(v[best] - x)) best = k;
    return arr[best];
  };
  plot($("curve"), [
    { x: v, y: g, color: "#333", label: "exact change" },
    { x: v, y: gt, color: "#2a2", label: "upper bound" },
  ], { marks: [{ x: xCur, y: 0, color: "#c33" }, { x: xNew, y: at(gt, xNew), color: "#36c" }] });
  $("s-info").textContent =
    `current ${xCur.toPrecision(4)} (red), bound minimizer ${xNew.toPrecision(4)} (blue), curvature lift ${lift.toPrecision(4)}`;
}

await init();
$("h-go").onclick = guard(drawHeat);
$("t-go").onclick = guard(drawTrace);
$("s-go").onclick = guard(drawCurve);
guard(drawHeat)();
guard(drawTrace)();
guard(drawCurve)();
