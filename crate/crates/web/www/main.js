import init, { two_dirac, fit_points, approximate } from "./pkg/curvemeas_web.js";

const $ = (id) => document.getElementById(id);
const fmt = (x) => (x === null || x === undefined ? "-" : Number(x).toPrecision(5));

function call(f, onError) {
  try {
    return JSON.parse(f());
  } catch (e) {
    onError(e.message || String(e));
    return null;
  }
}

function fail(el) {
  return (msg) => { el.innerHTML = `<span class="err">${msg}</span>`; };
}

function twoDirac() {
  const lambda = Math.pow(10, Number($("td-lambda").value));
  $("td-value").textContent = lambda.toPrecision(4);
  const r = call(() => two_dirac(lambda), fail($("td-table")));
  if (!r) return;
  const c = r.closed_form, s = r.solver;
  $("td-plot").innerHTML = s.svg;
  $("td-table").innerHTML = `
    <tr><th></th><th>closed form</th><th>solver</th></tr>
    <tr><td>regime</td><td>${c.regime}</td><td>${s.collapsed ? "dirac" : "curve"}</td></tr>
    <tr><td>energy</td><td>${fmt(c.energy)}</td><td>${fmt(s.energy)}</td></tr>
    <tr><td>α*</td><td>${fmt(c.alpha_star)}</td><td>${fmt(s.alpha)}</td></tr>
    <tr><td>support length</td><td>${c.b_star === null ? "-" : fmt(2 * c.b_star)}</td><td>${fmt(s.support_length)}</td></tr>`;
}

const clicks = [];

function drawPad() {
  const ctx = $("pad").getContext("2d");
  ctx.clearRect(0, 0, 320, 320);
  ctx.fillStyle = "#c33";
  for (const [x, y] of clicks) {
    ctx.beginPath();
    ctx.arc(x * 320, (1 - y) * 320, 3, 0, 2 * Math.PI);
    ctx.fill();
  }
}

function fit() {
  const info = $("fit-info");
  const r = call(() => fit_points(JSON.stringify(clicks), Number($("fit-lambda").value), $("fit-mode").value), fail(info));
  if (!r) return;
  $("fit-plot").innerHTML = r.svg;
  info.innerHTML = `energy ${fmt(r.energy)}<br>W term ${fmt(r.w_term)}<br>ℒ ${fmt(r.l_term)}<br>`
    + `length ${fmt(r.support_length)}<br>${r.collapsed ? "collapsed to a point" : `${r.iterations} iterations`}`;
}

function approx() {
  const n = Number($("ap-n").value);
  $("ap-value").textContent = n;
  const r = call(() => approximate(n), fail($("ap-info")));
  if (!r) return;
  $("ap-before").innerHTML = r.svg_before;
  $("ap-after").innerHTML = r.svg_after;
  $("ap-info").textContent = `ℒ(ν) = ${fmt(r.length_functional)}, added length ${fmt(r.added_length)}, W₂ = ${fmt(r.wasserstein)}`;
}

await init();

$("td-lambda").addEventListener("input", twoDirac);
$("ap-n").addEventListener("input", approx);
$("pad").addEventListener("click", (e) => {
  const b = e.target.getBoundingClientRect();
  clicks.push([(e.clientX - b.left) / b.width, 1 - (e.clientY - b.top) / b.height]);
  drawPad();
});
$("fit-run").addEventListener("click", fit);
$("fit-clear").addEventListener("click", () => { clicks.length = 0; drawPad(); $("fit-plot").innerHTML = ""; });
twoDirac();
approx();
