import init, { Demo } from "./pkg/genattr_wasm.js";

const $ = (id) => document.getElementById(id);
let demo;

function status(msg) {
  $("status").textContent = msg || "";
}

// Let the browser paint the status line before a long synchronous call.
const nextFrame = () => new Promise((r) => requestAnimationFrame(() => setTimeout(r, 0)));

function draw(canvasId, rgba) {
  const c = $(canvasId);
  c.width = demo.width();
  c.height = demo.height();
  c.getContext("2d").putImageData(new ImageData(new Uint8ClampedArray(rgba), c.width, c.height), 0, 0);
}

function clear(canvasId) {
  const c = $(canvasId);
  c.getContext("2d").clearRect(0, 0, c.width, c.height);
}

function quality() {
  return Number($("quality").value);
}

function guarded(fn) {
  return async (...args) => {
    try {
      await fn(...args);
    } catch (e) {
      status(e.message || String(e));
    }
  };
}

function showInfo() {
  $("info0").textContent = demo.describe(0);
  $("info1").textContent = demo.describe(1);
}

function redrawProbe(rgba) {
  draw("probe", quality() < 100 ? demo.compress(quality()) : rgba);
  clear("recon0");
  clear("recon1");
  $("scores").innerHTML = "";
}

async function loadGenerator(slot, file) {
  const bytes = new Uint8Array(await file.arrayBuffer());
  demo.load_generator(slot, bytes);
  showInfo();
  clear("probe");
  status("");
}


async function attribute() {
  status("inverting...");
  await nextFrame();
  const a = demo.attribute(Number($("restarts").value), Number($("steps").value), 0n);
  draw("recon0", a.reconstruction(0));
  draw("recon1", a.reconstruction(1));
  const losses = a.losses, scores = a.scores;
  const rows = ["A", "B"].map((name, i) => {
    const cls = i === a.chosen ? ' class="pick"' : "";
    return `<tr${cls}><td>${name}</td><td>${losses[i].toExponential(3)}</td><td>${scores[i].toFixed(4)}</td></tr>`;
  });
  const truth = a.source < 0 ? "unknown" : ["A", "B"][a.source];
  $("scores").innerHTML =
    "<tr><th></th><th>residual</th><th>confidence</th></tr>" + rows.join("") +
    `<tr><td colspan="3">picked ${["A", "B"][a.chosen]}, drawn by ${truth}</td></tr>`;
  a.free();
  status("");
}

function plotRoc(fpr, tpr) {
  const c = $("roc"), g = c.getContext("2d"), pad = 30, w = c.width - 2 * pad;
  const X = (x) => pad + x * w, Y = (y) => c.height - pad - y * w;
  g.clearRect(0, 0, c.width, c.height);
  g.strokeStyle = "#999";
  g.strokeRect(pad, pad, w, w);
  g.setLineDash([4, 4]);
  g.beginPath(); g.moveTo(X(0), Y(0)); g.lineTo(X(1), Y(1)); g.stroke();
  g.setLineDash([]);
  g.strokeStyle = "#06c";
  g.lineWidth = 2;
  g.beginPath();
  fpr.forEach((x, i) => (i ? g.lineTo(X(x), Y(tpr[i])) : g.moveTo(X(x), Y(tpr[i]))));
  g.stroke();
  g.lineWidth = 1;
  g.fillStyle = "#333";
  g.fillText("false positive rate", pad + w / 2 - 45, c.height - 8);
  g.save(); g.translate(12, pad + w / 2 + 40); g.rotate(-Math.PI / 2); g.fillText("true positive rate", 0, 0); g.restore();
}

async function runRoc() {
  status("attributing probes...");
  await nextFrame();
  const r = demo.roc(Number($("rocN").value), quality(), Number($("restarts").value), Number($("steps").value), 0n);
  plotRoc(r.fpr, r.tpr);
  $("aucLabel").textContent = `AUC ${r.auc.toFixed(4)}`;
  r.free();
  status("");
}

async function main() {
  await init();
  demo = new Demo(1n, 2n);
  showInfo();
  let clean = null;
  $("file0").onchange = guarded((e) => loadGenerator(0, e.target.files[0]));
  $("file1").onchange = guarded((e) => loadGenerator(1, e.target.files[0]));
  $("drawA").onclick = guarded(() => { clean = demo.sample(0, BigInt($("seed").value)); redrawProbe(clean); });
  $("drawB").onclick = guarded(() => { clean = demo.sample(1, BigInt($("seed").value)); redrawProbe(clean); });
  $("probeFile").onchange = guarded(async (e) => {
    clean = demo.load_probe(new Uint8Array(await e.target.files[0].arrayBuffer()));
    redrawProbe(clean);
  });
  $("quality").oninput = guarded(() => {
    $("qualityLabel").textContent = quality() < 100 ? `q${quality()}` : "lossless";
    if (clean) redrawProbe(clean);
  });
  $("attribute").onclick = guarded(attribute);
  $("rocRun").onclick = guarded(runRoc);
}

main().catch((e) => status(e.message || String(e)));
