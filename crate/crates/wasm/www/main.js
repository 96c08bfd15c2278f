import init, { simulate, optimize, equivalent } from "../pkg/pacascade_wasm.js";

const $ = (id) => document.getElementById(id);
const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

function params() {
  return {
    re: parseFloat($("alpha-re").value),
    im: parseFloat($("alpha-im").value),
    k: parseInt($("k").value, 10),
    seed: parseInt($("seed").value, 10) >>> 0,
  };
}

function axes(ctx, box, xr, yr, xlabel, ylabel) {
  const { w, h, pad } = box;
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#888";
  ctx.strokeRect(pad, pad / 2, w - 1.5 * pad, h - 1.5 * pad);
  ctx.fillStyle = "#333";
  ctx.font = "12px sans-serif";
  ctx.fillText(xlabel, w / 2 - 30, h - 6);
  ctx.save();
  ctx.translate(12, h / 2 + 30);
  ctx.rotate(-Math.PI / 2);
  ctx.fillText(ylabel, 0, 0);
  ctx.restore();
  ctx.fillText(xr[0].toFixed(2), pad, h - pad + 14);
  ctx.fillText(xr[1].toFixed(2), w - pad, h - pad + 14);
  ctx.fillText(yr[1].toFixed(1), 2, pad / 2 + 10);
  ctx.fillText(yr[0].toFixed(1), 2, h - pad);
  return (x, y) => [
    pad + ((x - xr[0]) / (xr[1] - xr[0])) * (w - 1.5 * pad),
    h - pad - ((y - yr[0]) / (yr[1] - yr[0])) * (h - 1.5 * pad),
  ];
}

function box(canvas) {
  return { w: canvas.width, h: canvas.height, pad: 40 };
}

function plotAmam(series) {
  const canvas = $("amam");
  const ctx = canvas.getContext("2d");
  const all = series.flatMap((s) => s.points);
  const xmax = Math.max(...all.map((p) => p[0])) * 1.05;
  const ymax = Math.max(...all.map((p) => p[1])) * 1.05;
  const map = axes(ctx, box(canvas), [0, xmax], [0, ymax], "|input|", "|output|");
  series.forEach((s, i) => {
    ctx.fillStyle = COLORS[i % COLORS.length];
    for (const [x, y] of s.points) {
      const [px, py] = map(x, y);
      ctx.fillRect(px - 1, py - 1, 2, 2);
    }
  });
}

function plotPsd(series) {
  const canvas = $("psd");
  const ctx = canvas.getContext("2d");
  const f = series[0].freq;
  const map = axes(ctx, box(canvas), [f[0], f[f.length - 1]], [-80, 5], "frequency / symbol rate", "PSD [dB]");
  series.forEach((s, i) => {
    ctx.strokeStyle = COLORS[i % COLORS.length];
    ctx.beginPath();
    s.psd.forEach((v, j) => {
      const [px, py] = map(s.freq[j], Math.max(v, -80));
      if (j === 0) ctx.moveTo(px, py);
      else ctx.lineTo(px, py);
    });
    ctx.stroke();
  });
}

function legend(names) {
  $("legend").innerHTML = names
    .map((n, i) => `<span style="color:${COLORS[i % COLORS.length]}">■ ${n}</span>`)
    .join("");
}

function parse(text) {
  const v = JSON.parse(text);
  if (v.error) throw new Error(v.error);
  return v;
}

function report(fn) {
  try {
    fn();
  } catch (e) {
    $("summary").textContent = `error: ${e.message}`;
  }
}

function runSimulate() {
  const p = params();
  const runs = [1, 2].map((s) => parse(simulate(p.k, s, p.re, p.im, p.seed)));
  const series = runs.map((r) => ({ points: r.curves.amam, freq: r.curves.freq, psd: r.curves.psd_db }));
  legend(runs.map((r) => `scenario ${r.scenario} (g = ${r.stage_gain.toFixed(4)})`));
  plotAmam(series);
  plotPsd(series);
  $("summary").textContent = runs
    .map(
      (r) =>
        `scenario ${r.scenario}: NMSE ${r.curves.nmse_db.toFixed(2)} dB, ACLR ${r.curves.aclr_db.toFixed(2)} dB` +
        (r.warnings.length ? `\n  ${r.warnings.join("\n  ")}` : ""),
    )
    .join("\n") + `\nx_max = ${runs[0].x_max.toFixed(4)}`;
}

function runOptimize() {
  const p = params();
  const mode = $("mode").value;
  $("summary").textContent = "optimizing…";
  setTimeout(() =>
    report(() => {
      const r = parse(optimize(mode, p.k, p.re, p.im, p.seed));
      const series = [r.before, r.after].map((c) => ({ points: c.amam, freq: c.freq, psd: c.psd_db }));
      legend(["start", `optimized (${mode})`]);
      plotAmam(series);
      plotPsd(series);
      $("summary").textContent =
        `p0 = ${r.p0.toFixed(4)}\ngains = [${r.gains.map((g) => g.toFixed(4)).join(", ")}]\n` +
        `NMSE ${r.before.nmse_db.toFixed(2)} -> ${r.after.nmse_db.toFixed(2)} dB\n` +
        `ACLR ${r.before.aclr_db.toFixed(2)} -> ${r.after.aclr_db.toFixed(2)} dB\n` +
        `${r.status} after ${r.iterations} iterations`;
    }),
  );
}

function runEquivalent() {
  const p = params();
  const gains = new Float64Array($("gains").value.split(/[ ,]+/).filter(Boolean).map(Number));
  const r = parse(equivalent(gains, p.re, p.im, parseFloat($("sigma").value)));
  $("summary").textContent =
    `g~ = ${r.g_tilde.toFixed(6)}\nalpha~ = ${r.alpha_tilde[0].toFixed(6)} ${r.alpha_tilde[1] >= 0 ? "+" : "-"} ` +
    `${Math.abs(r.alpha_tilde[1]).toFixed(6)}j\nsigma~ = ${r.sigma_tilde.toExponential(4)}`;
}

await init();
$("run-sim").onclick = () => report(runSimulate);
$("run-opt").onclick = runOptimize;
$("run-eq").onclick = () => report(runEquivalent);
report(runSimulate);
