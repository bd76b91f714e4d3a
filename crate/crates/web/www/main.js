import init, { FusionDemo, TilingDemo } from "./pkg/segfuse_web.js";

const $ = (id) => document.getElementById(id);
const REGIONS = ["ET", "TC", "WT"];
let demo = null;

function draw(canvas, w, h, rgba) {
  canvas.width = w;
  canvas.height = h;
  canvas.getContext("2d").putImageData(new ImageData(new Uint8ClampedArray(rgba), w, h), 0, 0);
}

function panelName(i, n) {
  if (i === 0) return "truth";
  if (i === n - 1) return "STAPLE";
  return `rater ${i}`;
}

function fuse() {
  const size = +$("size").value;
  demo?.free();
  demo = new FusionDemo(size, +$("raters").value, +$("rate").value, +$("seed").value);
  $("slice").max = size - 1;
  $("slice").value = Math.floor(size / 2);
  const n = demo.panelCount();
  $("panels").innerHTML = "";
  $("dpanel").innerHTML = "";
  for (let i = 0; i < n; i++) {
    $("panels").insertAdjacentHTML("beforeend",
      `<figure><canvas id="p${i}"></canvas><figcaption>${panelName(i, n)}</figcaption></figure>`);
    $("dpanel").insertAdjacentHTML("beforeend", `<option value="${i}">${panelName(i, n)}</option>`);
  }
  $("dpanel").value = n - 1;

  const rows = REGIONS.map((r, k) => ({ r, dice: demo.dice(k), hd: demo.hd95(k) }));
  let html = "<tr><th></th>" + [...Array(n).keys()].map((i) => `<th>${panelName(i, n)}</th>`).join("") + "</tr>";
  for (const row of rows) {
    html += `<tr><th>DSC ${row.r}</th>` + [...row.dice].map((v) => `<td>${v.toFixed(4)}</td>`).join("") + "</tr>";
  }
  for (const row of rows) {
    html += `<tr><th>HD95 ${row.r}</th>` + [...row.hd].map((v) => `<td>${v.toFixed(2)}</td>`).join("") + "</tr>";
  }
  $("scores").innerHTML = html;
  slices();
}

function slices() {
  if (!demo) return;
  const z = +$("slice").value, s = demo.size();
  for (let i = 0; i < demo.panelCount(); i++) draw($(`p${i}`), s, s, demo.sliceRgba(i, z));
  distance();
}

function distance() {
  const p = +$("dpanel").value, r = +$("dregion").value, z = +$("slice").value, s = demo.size();
  draw($("dist"), s, s, demo.distanceRgba(p, r, z, +$("dclip").value));
  $("dcap").textContent = `distance to ${REGIONS[r]}, slice ${z}; HD95 vs truth ${demo.hd95(r)[p].toFixed(2)} mm`;
}

function tiling() {
  const t = new TilingDemo(+$("tw").value, +$("th").value, +$("tp").value, +$("ts").value, $("tg").checked);
  draw($("tile-canvas"), +$("tw").value, +$("th").value, t.rgba());
  const [lo, hi] = t.range();
  $("tcap").textContent = `${t.windowCount()} windows, summed weight ${lo.toExponential(2)} to ${hi.toFixed(2)}`;
  t.free();
}

function guarded(f) {
  return () => {
    try {
      $("error").textContent = "";
      f();
    } catch (e) {
      $("error").textContent = String(e);
    }
  };
}

await init();
$("run").onclick = guarded(fuse);
$("slice").oninput = guarded(slices);
for (const id of ["dpanel", "dregion", "dclip"]) $(id).onchange = guarded(distance);
for (const id of ["tw", "th", "tp", "ts", "tg"]) $(id).onchange = guarded(tiling);
guarded(fuse)();
guarded(tiling)();
