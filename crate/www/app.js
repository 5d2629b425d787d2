// Demo page driver: calls the three wasm operations and renders the results
// on plain canvases. Build the module first:
//   wasm-pack build crates/isene-wasm --target web --out-dir ../../www/pkg
import init, { flux_spectrum, coupling_map, gate_demo } from "./pkg/isene_wasm.js";

const $ = (id) => document.getElementById(id);
const palette = ["#7fd1a8", "#e0b06a", "#6aa7e0", "#d17f9e", "#9b8ce0", "#e0e06a", "#6ae0d1", "#e07f6a"];

function plot(canvas, series, { yLabel = "", xLabel = "", legend = [] } = {}) {
  const ctx = canvas.getContext("2d");
  const W = canvas.width, H = canvas.height, padL = 60, padB = 28, padT = 12, padR = 10;
  ctx.clearRect(0, 0, W, H);
  let xMin = Infinity, xMax = -Infinity, yMin = Infinity, yMax = -Infinity;
  for (const s of series) {
    for (let i = 0; i < s.x.length; i++) {
      xMin = Math.min(xMin, s.x[i]); xMax = Math.max(xMax, s.x[i]);
      yMin = Math.min(yMin, s.y[i]); yMax = Math.max(yMax, s.y[i]);
    }
  }
  if (yMax === yMin) { yMax += 1; yMin -= 1; }
  const pad = 0.05 * (yMax - yMin);
  yMin -= pad; yMax += pad;
  const toX = (x) => padL + (x - xMin) / (xMax - xMin) * (W - padL - padR);
  const toY = (y) => H - padB - (y - yMin) / (yMax - yMin) * (H - padB - padT);

  ctx.strokeStyle = "#2a3342"; ctx.fillStyle = "#8b98ab"; ctx.font = "11px system-ui";
  for (let k = 0; k <= 4; k++) {
    const y = yMin + (k / 4) * (yMax - yMin);
    ctx.beginPath(); ctx.moveTo(padL, toY(y)); ctx.lineTo(W - padR, toY(y)); ctx.stroke();
    ctx.fillText(y.toPrecision(3), 4, toY(y) + 4);
  }
  for (let k = 0; k <= 6; k++) {
    const x = xMin + (k / 6) * (xMax - xMin);
    ctx.fillText(x.toPrecision(3), toX(x) - 10, H - 8);
  }
  ctx.fillText(yLabel, 4, 12);
  ctx.fillText(xLabel, W - padR - 60, H - 8);

  series.forEach((s, i) => {
    ctx.strokeStyle = s.color || palette[i % palette.length];
    ctx.lineWidth = 1.6;
    ctx.beginPath();
    for (let k = 0; k < s.x.length; k++) {
      const px = toX(s.x[k]), py = toY(s.y[k]);
      if (k === 0) ctx.moveTo(px, py); else ctx.lineTo(px, py);
    }
    ctx.stroke();
  });
  legend.forEach((name, i) => {
    ctx.fillStyle = palette[i % palette.length];
    ctx.fillText(name, padL + 8 + i * 92, padT + 10);
  });
}

function fmt(x, digits = 4) { return Number(x).toPrecision(digits); }

function renderCouplings(el, data) {
  const pair = (obj) => ["12", "23", "13"].map((k) => fmt(obj[k])).join("</td><td>");
  const a = data.A.map((row) => row.map((v) => fmt(v, 3)).join("</td><td>")).join("</tr><tr><td>");
  el.innerHTML = `
    <table>
      <tr><th></th><th>(1,2)</th><th>(2,3)</th><th>(1,3)</th></tr>
      <tr><th>J / MHz</th><td>${pair(data.J_MHz)}</td></tr>
      <tr><th>&chi; / MHz</th><td>${pair(data.chi_MHz)}</td></tr>
    </table>
    <div class="stat">f<sub>r,0</sub> = <b>${fmt(data.f_r0_GHz, 6)} GHz</b>
      at line length ${fmt(data.length_mm, 4)} mm${data.length_clamped ? " (clamped: 9 GHz unreachable)" : ""}</div>
    <div class="stat">max odd-order |J| = <b>${Number(data.max_odd_J_MHz).toExponential(2)} MHz</b> (Kramers null)</div>
    <div class="stat">EDSR weights A<sub>jk</sub> (max off-diagonal <b>${fmt(data.A_offdiagonal_max, 3)}</b>):</div>
    <table><tr><td>${a}</td></tr></table>`;
}

async function main() {
  $("status").textContent = "loading wasm module...";
  await init();
  $("status").textContent = "";

  const run = () => {
    const lv = Number($("lv").value), lc = Number($("lc").value);
    $("lvVal").textContent = lv.toFixed(2) + " nH";
    $("lcVal").textContent = lc.toFixed(2) + " nH";
    $("thetaVal").textContent = Number($("theta").value).toFixed(2);
    $("status").textContent = "computing...";

    setTimeout(() => {
      const t0 = performance.now();
      const spec = JSON.parse(flux_spectrum(JSON.stringify({
        l_vertical_nh: lv, l_coupling_nh: lc, flux_loop: Number($("fluxLoop").value), points: 81,
      })));
      if (spec.error) { $("status").textContent = spec.error; return; }
      plot($("spectrum"),
        spec.energies_GHz.map((row, i) => ({ x: spec.flux_rad, y: row, color: palette[i] })),
        { yLabel: "E_g / GHz", xLabel: "flux / rad", legend: spec.labels });

      const coup = JSON.parse(coupling_map(JSON.stringify({ l_vertical_nh: lv, l_coupling_nh: lc })));
      if (coup.error) { $("status").textContent = coup.error; return; }
      renderCouplings($("couplings"), coup);

      const gate = JSON.parse(gate_demo(JSON.stringify({
        l_vertical_nh: lv, l_coupling_nh: lc,
        sequence: $("sequence").value, theta_rad: Number($("theta").value),
        rabi_divisor: 100.0,
      })));
      if (gate.error) { $("status").textContent = gate.error; return; }
      const tUs = gate.t_ns.map((t) => t * 1e-3);
      plot($("gate"), [
        { x: tUs, y: gate.W, color: palette[0] },
        { x: tUs, y: gate.theta_rel_rad.map((v) => v / Math.PI), color: palette[1] },
        { x: tUs, y: gate.pair_populations[0], color: palette[2] },
      ], { yLabel: "W, theta/pi, P_logical", xLabel: "t / us", legend: ["W(t)", "theta/pi", "P logical pair"] });
      $("gateStats").innerHTML =
        `<div class="stat">gate fidelity vs R_X(${fmt(gate.target_theta_rad, 3)}) = <b>${fmt(gate.fidelity, 6)}</b>,
         duration ${fmt(gate.t_total_ns * 1e-3, 4)} &mu;s, peak Rabi ${Number(gate.rabi_rate_GHz * 1e3).toPrecision(3)} MHz</div>`;
      $("status").textContent = `computed in ${(performance.now() - t0).toFixed(0)} ms`;
    }, 10);
  };

  $("run").addEventListener("click", run);
  for (const id of ["lv", "lc"]) {
    $(id).addEventListener("input", () => {
      $("lvVal").textContent = Number($("lv").value).toFixed(2) + " nH";
      $("lcVal").textContent = Number($("lc").value).toFixed(2) + " nH";
    });
  }
  $("theta").addEventListener("input", () => {
    $("thetaVal").textContent = Number($("theta").value).toFixed(2);
  });
  run();
}

main();
