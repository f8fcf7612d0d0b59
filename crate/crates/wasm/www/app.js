import init, { scenario, select_k, study } from "./pkg/cofactor_wasm.js";

const COLORS = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd"];
const METHOD_COLORS = {
  uncontaminated: "#888", contaminated: "#d62728", kalman: "#9467bd", common_factor: "#1f77b4",
};

function showError(e) {
  document.getElementById("error").textContent = e ? String(e.message ?? e) : "";
}

function linePlot(canvas, xs, series, title) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 36;
  ctx.clearRect(0, 0, w, h);
  const all = series.flatMap((s) => s.values);
  const lo = Math.min(...all), hi = Math.max(...all);
  const x = (v) => pad + ((v - xs[0]) / (xs[xs.length - 1] - xs[0])) * (w - 2 * pad);
  const y = (v) => h - pad - ((v - lo) / (hi - lo || 1)) * (h - 2 * pad);
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#222";
  ctx.fillText(title, pad, pad - 10);
  ctx.fillText(hi.toFixed(1), 2, pad + 4);
  ctx.fillText(lo.toFixed(1), 2, h - pad);
  series.forEach((s, k) => {
    ctx.strokeStyle = s.color ?? COLORS[k % COLORS.length];
    ctx.setLineDash(s.dashed ? [4, 4] : []);
    ctx.beginPath();
    s.values.forEach((v, i) => (i ? ctx.lineTo(x(xs[i]), y(v)) : ctx.moveTo(x(xs[i]), y(v))));
    ctx.stroke();
  });
  ctx.setLineDash([]);
}

function table(el, header, rows, highlight) {
  el.innerHTML = "";
  const tr = el.insertRow();
  header.forEach((h) => { const th = document.createElement("th"); th.textContent = h; tr.appendChild(th); });
  rows.forEach((r, i) => {
    const row = el.insertRow();
    r.forEach((c) => { const td = row.insertCell(); td.textContent = c; if (highlight === i) td.className = "chosen"; });
  });
}

const fmt = (v, d = 4) => (v == null ? "-" : v.toFixed(d));

function drawScenario(form) {
  const d = JSON.parse(scenario(+form.seed.value, +form.spike.value, +form.walk.value));
  const flat = (vals, k) => vals.map(() => d.true_means[k]);
  linePlot(document.getElementById("scenario-raw"), d.times,
    d.contaminated.map((v) => ({ values: v })), "contaminated");
  linePlot(document.getElementById("scenario-clean"), d.times, [
    ...d.cleaned.map((v) => ({ values: v })),
    ...d.cleaned.map((v, k) => ({ values: flat(v, k), color: "#555", dashed: true })),
  ], "cleaned (dashed: true level)");
  table(document.getElementById("scenario-table"),
    ["series", "true", "raw mean", "cleaned mean", "cleaned se"],
    d.names.map((n, i) => [n, d.true_means[i], fmt(d.raw_means[i]), fmt(d.cleaned_means[i]), fmt(d.cleaned_se[i])]));
}

function drawK(form) {
  const r = JSON.parse(select_k(+form.seed.value, +form.threshold.value));
  table(document.getElementById("k-table"), ["K", ...r.signal_names, "improved"],
    r.rows.map((row) => [row.k, ...(row.standard_errors ?? r.signal_names.map(() => null)).map((v) => fmt(v)),
      row.improved ?? "-"]),
    r.rows.findIndex((row) => row.k === r.chosen_k));
}

function drawStudy(form) {
  const status = document.getElementById("study-status");
  status.textContent = "running...";
  // let the status text paint before the synchronous study blocks the thread
  setTimeout(() => {
    try {
      const s = JSON.parse(study(+form.reps.value, +form.seed.value));
      status.textContent = `${s.replications} replications, ${s.failures} failed. ` +
        "Histograms of the reported standard error of series 1 (true value 0.1).";
      const hs = s.histograms.filter((h) => h.series === 0);
      const canvas = document.getElementById("study-hist");
      const ctx = canvas.getContext("2d");
      const { width: w, height: h } = canvas;
      const pad = 36;
      ctx.clearRect(0, 0, w, h);
      const edges = hs[0].edges;
      const top = Math.max(...hs.flatMap((x) => x.counts));
      const x = (v) => pad + ((v - edges[0]) / (edges[edges.length - 1] - edges[0])) * (w - 2 * pad);
      hs.forEach((hist, k) => {
        ctx.strokeStyle = METHOD_COLORS[hist.method] ?? COLORS[k];
        ctx.beginPath();
        hist.counts.forEach((c, b) => {
          const yy = h - pad - (c / top) * (h - 2 * pad);
          ctx.lineTo(x(edges[b]), yy);
          ctx.lineTo(x(edges[b + 1]), yy);
        });
        ctx.stroke();
        ctx.fillStyle = ctx.strokeStyle;
        ctx.fillText(hist.method, w - pad - 120, pad + 14 * k);
      });
      ctx.fillStyle = "#222";
      ctx.fillText(edges[0].toFixed(3), pad, h - pad + 14);
      ctx.fillText(edges[edges.length - 1].toFixed(3), w - pad - 30, h - pad + 14);
      showError(null);
    } catch (e) {
      status.textContent = "";
      showError(e);
    }
  }, 10);
}

function bind(id, draw) {
  const form = document.getElementById(id);
  form.addEventListener("submit", (ev) => {
    ev.preventDefault();
    try { draw(form); showError(null); } catch (e) { showError(e); }
  });
  return form;
}

await init();
drawScenario(bind("scenario-form", drawScenario));
drawK(bind("k-form", drawK));
bind("study-form", drawStudy);
