import init, { sawtooth, regime_curve, replicator_shares } from "./pkg/aimd_web.js";

const COLORS = ["#d1495b", "#00798c", "#edae49"];
const REGIMES = { 0: "degenerate", 1: "protocol 1 dominant", 2: "mixed", 3: "protocol 2 dominant", 4: "coordination" };

function values(id) {
  const out = {};
  for (const el of document.querySelectorAll(`#${id} [name]`)) {
    out[el.name] = el.type === "number" ? Number(el.value) : el.value;
  }
  return out;
}

function fmt(x, digits = 4) {
  return Number.isFinite(x) ? x.toFixed(digits) : "-";
}

// Plot area with axes; returns data->pixel mappers.
function frame(canvas, xmax, ymax, xlabel) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = { l: 50, r: 15, t: 12, b: 30 };
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#999";
  ctx.fillStyle = "#444";
  ctx.font = "12px system-ui";
  ctx.strokeRect(pad.l, pad.t, w - pad.l - pad.r, h - pad.t - pad.b);
  const x = (v) => pad.l + (v / xmax) * (w - pad.l - pad.r);
  const y = (v) => h - pad.b - (v / ymax) * (h - pad.t - pad.b);
  for (let k = 0; k <= 4; k++) {
    ctx.fillText(fmt((xmax * k) / 4, 1), x((xmax * k) / 4) - 10, h - pad.b + 16);
    ctx.fillText(fmt((ymax * k) / 4, 2), 4, y((ymax * k) / 4) + 4);
  }
  ctx.fillText(xlabel, w - pad.r - 40, h - 4);
  return { ctx, x, y };
}

function polyline(ctx, points, color, dash = []) {
  ctx.strokeStyle = color;
  ctx.setLineDash(dash);
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  points.forEach(([px, py], i) => (i ? ctx.lineTo(px, py) : ctx.moveTo(px, py)));
  ctx.stroke();
  ctx.setLineDash([]);
}

function report(id, fn) {
  const el = document.getElementById(id);
  try {
    el.classList.remove("error");
    el.textContent = fn();
  } catch (e) {
    el.classList.add("error");
    el.textContent = String(e.message ?? e);
  }
}

function drawSawtooth() {
  const p = values("saw");
  report("saw-out", () => {
    const out = sawtooth(p.capacity, p.alpha1, p.beta1, p.alpha2, p.beta2, Math.max(1, p.drops | 0));
    const [period, x1, x2] = out;
    const rows = [];
    for (let i = 3; i < out.length; i += 3) rows.push([out[i], out[i + 1], out[i + 2]]);
    const tmax = rows[rows.length - 1][0] || 1;
    const { ctx, x, y } = frame(document.getElementById("saw-plot"), tmax, p.capacity, "time");
    [x1, x2].forEach((peak, u) => polyline(ctx, [[x(0), y(peak)], [x(tmax), y(peak)]], COLORS[u], [4, 4]));
    [1, 2].forEach((u) => polyline(ctx, rows.map((r) => [x(r[0]), y(r[u])]), COLORS[u - 1]));
    return `limit cycle: period T = ${fmt(period)}, peaks x* = (${fmt(x1)}, ${fmt(x2)})`;
  });
}

function drawGame() {
  const s = values("saw");
  const g = values("game");
  report("game-out", () => {
    const out = regime_curve(s.capacity, s.alpha1, s.beta1, s.alpha2, s.beta2, g.lambdaMax, 400);
    const [lo, hi] = out;
    const rows = [];
    for (let i = 2; i < out.length; i += 3) rows.push([out[i], out[i + 1], out[i + 2]]);
    const { ctx, x, y } = frame(document.getElementById("game-plot"), g.lambdaMax, 1, "lambda");
    if (Number.isFinite(lo)) {
      ctx.fillStyle = "rgba(0, 121, 140, 0.12)";
      const right = Math.min(hi, g.lambdaMax);
      ctx.fillRect(x(lo), y(1), x(right) - x(lo), y(0) - y(1));
    }
    polyline(ctx, rows.filter((r) => Number.isFinite(r[1])).map((r) => [x(r[0]), y(r[1])]), COLORS[0]);
    const regimes = [];
    rows.forEach((r) => { if (regimes[regimes.length - 1] !== r[2]) regimes.push(r[2]); });
    const band = Number.isFinite(lo) ? `mixed for ${fmt(lo)} < lambda < ${fmt(hi)}` : "no mixed regime";
    return `${band}; regimes: ${regimes.map((r) => REGIMES[r]).join(" -> ")}`;
  });
}

function drawReplicator() {
  const p = values("rep");
  report("rep-out", () => {
    const out = replicator_shares(p.lambda, p.gain, p.delay, p.mode === "triple", p.horizon, p.x1, p.x2, p.x3);
    const code = out[0];
    const rows = [];
    for (let i = 1; i < out.length; i += 4) rows.push(out.slice(i, i + 4));
    const { ctx, x, y } = frame(document.getElementById("rep-plot"), p.horizon, 1, "time");
    [1, 2, 3].forEach((k) => polyline(ctx, rows.map((r) => [x(r[0]), y(r[k])]), COLORS[k - 1]));
    const last = rows[rows.length - 1];
    const outcome = code > 0 ? `fixation of protocol ${code}` : code === 0 ? "interior rest point" : "still moving at horizon";
    return `${outcome}; final shares (${fmt(last[1])}, ${fmt(last[2])}, ${fmt(last[3])})`;
  });
}

await init();
for (const [id, draw] of [["saw", () => { drawSawtooth(); drawGame(); }], ["game", drawGame], ["rep", drawReplicator]]) {
  document.getElementById(id).addEventListener("input", draw);
}
drawSawtooth();
drawGame();
drawReplicator();
