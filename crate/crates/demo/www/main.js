import init, { metric_trace, despread_spectrum, run_mission } from "./pkg/srs_sense_demo.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function frame(ctx, xs, ys, pad) {
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  const [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  const w = ctx.canvas.width - 2 * pad, h = ctx.canvas.height - 2 * pad;
  return {
    x: (v) => pad + ((v - x0) / (x1 - x0 || 1)) * w,
    y: (v) => pad + h - ((v - y0) / (y1 - y0 || 1)) * h,
    x0, x1, y0, y1,
  };
}

function line(ctx, t, xs, ys, color, width = 1.5) {
  ctx.strokeStyle = color;
  ctx.lineWidth = width;
  ctx.beginPath();
  xs.forEach((x, i) => (i ? ctx.lineTo(t.x(x), t.y(ys[i])) : ctx.moveTo(t.x(x), t.y(ys[i]))));
  ctx.stroke();
}

function axes(ctx, t, xl, yl) {
  ctx.fillStyle = "#555";
  ctx.font = "11px sans-serif";
  ctx.fillText(`${xl}: ${t.x0.toFixed(2)} .. ${t.x1.toFixed(2)}`, 10, ctx.canvas.height - 4);
  ctx.fillText(`${yl}: ${t.y0.toFixed(2)} .. ${t.y1.toFixed(2)}`, 10, 12);
}

function guard(outId, f) {
  try {
    f();
  } catch (e) {
    $(outId).innerHTML = `<span class="err">${e.message ?? e}</span>`;
  }
}

function runMetric() {
  guard("m-out", () => {
    const r = JSON.parse(metric_trace(num("m-delta"), num("m-gap"), num("m-snr"), BigInt(num("m-seed"))));
    const ctx = $("m-plot").getContext("2d");
    ctx.clearRect(0, 0, ctx.canvas.width, ctx.canvas.height);
    const t = frame(ctx, r.n, [0, 1], 24);
    line(ctx, t, r.n, r.measured, "#9ab", 1);
    line(ctx, t, r.n, r.filtered, "#1565c0");
    line(ctx, t, r.n, r.predicted, "#e65100");
    if (r.n_sync !== null) {
      ctx.strokeStyle = "#2e7d32";
      ctx.beginPath();
      ctx.moveTo(t.x(r.n_sync), 20);
      ctx.lineTo(t.x(r.n_sync), ctx.canvas.height - 20);
      ctx.stroke();
    }
    axes(ctx, t, "window start", "M");
    const peak = Math.max(...r.predicted);
    $("m-out").textContent =
      `grey M[n], blue filtered, orange predicted, green sync point\n` +
      `predicted peak ${peak.toFixed(3)}, sync at ${r.n_sync ?? "none"}`;
  });
}

function runSpectrum() {
  guard("s-out", () => {
    const r = JSON.parse(
      despread_spectrum($("s-shifts").value, $("s-powers").value, $("s-offsets").value, num("s-snr"), BigInt(num("s-seed")))
    );
    const ctx = $("s-plot").getContext("2d");
    ctx.clearRect(0, 0, ctx.canvas.width, ctx.canvas.height);
    const floor = Math.max(...r.magnitude_db) - 50;
    const mags = r.magnitude_db.map((v) => Math.max(v, floor));
    const t = frame(ctx, r.f, mags, 24);
    ctx.strokeStyle = "#ddd";
    for (let w = 0; w < 8; w++) {
      ctx.beginPath();
      ctx.moveTo(t.x(w / 8), 20);
      ctx.lineTo(t.x(w / 8), ctx.canvas.height - 20);
      ctx.stroke();
    }
    line(ctx, t, r.f, mags, "#1565c0");
    ctx.fillStyle = "#e65100";
    for (const c of r.components) {
      ctx.beginPath();
      ctx.arc(t.x(c.f_hat), t.y(Math.max(c.gamma_db, floor)), 4, 0, 2 * Math.PI);
      ctx.fill();
    }
    axes(ctx, t, "f [cycles/subcarrier]", "|C| dB");
    $("s-out").textContent =
      `verdict ${r.verdict}\n` +
      r.components.map((c, i) => `#${i + 1}  f=${c.f_hat.toFixed(4)}  gamma=${c.gamma_db.toFixed(1)} dB  shift=${c.shift_hat ?? "-"}`).join("\n");
  });
}

function runFlight() {
  $("x-out").textContent = "flying...";
  setTimeout(() =>
    guard("x-out", () => {
      const r = JSON.parse(run_mission($("x-preset").value, BigInt(num("x-seed"))));
      const ctx = $("x-plot").getContext("2d");
      ctx.clearRect(0, 0, ctx.canvas.width, ctx.canvas.height);
      const all = r.area.concat(r.path);
      const t = frame(ctx, all.map((p) => p[0]), all.map((p) => p[1]), 20);
      line(ctx, t, r.area.concat([r.area[0]]).map((p) => p[0]), r.area.concat([r.area[0]]).map((p) => p[1]), "#999");
      line(ctx, t, r.path.map((p) => p[0]), r.path.map((p) => p[1]), "#90caf9", 1);
      const dot = (p, color, rad) => {
        ctx.fillStyle = color;
        ctx.beginPath();
        ctx.arc(t.x(p[0]), t.y(p[1]), rad, 0, 2 * Math.PI);
        ctx.fill();
      };
      ctx.font = "11px sans-serif";
      for (const u of r.ues) {
        dot(u.truth, "#222", 4);
        ctx.fillStyle = "#222";
        ctx.fillText(u.id, t.x(u.truth[0]) + 6, t.y(u.truth[1]) - 6);
        if (u.initial) dot(u.initial, "#e65100", 3);
        if (u.refined) dot(u.refined, "#2e7d32", 3);
      }
      const f = (v) => (v === null ? "-" : v.toFixed(2) + " m");
      $("x-out").textContent =
        `black truth, orange initial, green refined estimate\n` +
        `ALE initial ${f(r.ale_initial_m)}, refined ${f(r.ale_refined_m)}, flight ${(r.flight_time_s / 60).toFixed(1)} min`;
    })
  );
}

init().then(() => {
  $("status").textContent = "ready";
  $("m-run").onclick = runMetric;
  $("s-run").onclick = runSpectrum;
  $("x-run").onclick = runFlight;
  runMetric();
  runSpectrum();
});
