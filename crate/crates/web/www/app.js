import init, { Scene, snippet_plan, latency_breakdown } from "./pkg/splatstream_web.js";

const $ = (id) => document.getElementById(id);

await init();
const scene = new Scene(7n, 256);
const canvas = $("view");
const ctx = canvas.getContext("2d");

function draw() {
  const start = performance.now();
  const px = scene.render(BigInt($("t").value), Number($("az").value), Number($("el").value),
    canvas.width, canvas.height);
  ctx.putImageData(new ImageData(new Uint8ClampedArray(px), canvas.width, canvas.height), 0, 0);
  $("render-time").textContent = `${(performance.now() - start).toFixed(1)} ms`;
}

function tick() {
  if ($("play").checked) {
    $("t").value = (Number($("t").value) + 1) % 600;
    draw();
  }
  requestAnimationFrame(tick);
}

function plan() {
  try {
    $("plan").textContent = snippet_plan(BigInt($("frames").value), $("passthrough").checked);
  } catch (e) {
    $("plan").textContent = String(e);
  }
}

const stages = [["camera pose", 1.5], ["spatial", 52.1], ["rendering", 9.6], ["interpolation", 19.3], ["super-resolution", 0.6]];
for (const [name, ms] of stages) {
  $("costs").insertAdjacentHTML("beforeend",
    `<label>${name} <input class="cost" type="number" value="${ms}" step="any"></label>`);
}

function latency() {
  const costs = Array.from(document.querySelectorAll(".cost"), (el) => Number(el.value));
  try {
    $("latency").textContent = latency_breakdown(new Float64Array(costs), Number($("fps").value), Number($("budget").value));
  } catch (e) {
    $("latency").textContent = String(e);
  }
}

for (const id of ["az", "el", "t"]) $(id).addEventListener("input", draw);
for (const id of ["frames", "passthrough"]) $(id).addEventListener("input", plan);
document.querySelectorAll(".cost").forEach((el) => el.addEventListener("input", latency));
for (const id of ["fps", "budget"]) $(id).addEventListener("input", latency);

draw();
plan();
latency();
tick();
