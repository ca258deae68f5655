import init, { synthesize, wrinkles, stretch } from "./pkg/skinstretch_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
const status = (text) => { $("status").textContent = text; };

// Black through red and yellow to white; NaN is gray.
function hot(t) {
  if (!Number.isFinite(t)) return [128, 128, 128];
  const c = (u) => Math.round(Math.min(Math.max(u, 0), 1) * 255);
  const s = Math.min(Math.max(t, 0), 1);
  return [c(3 * s), c(3 * s - 1), c(3 * s - 2)];
}

// Grid rows are stored bottom first; the canvas draws +y up.
function drawGrid(canvas, grid, lo, hi, cell = 6) {
  const nx = grid.nx, ny = grid.ny, values = grid.values;
  canvas.width = nx * cell;
  canvas.height = ny * cell;
  const ctx = canvas.getContext("2d");
  const img = ctx.createImageData(nx, ny);
  for (let j = 0; j < ny; j++) {
    for (let i = 0; i < nx; i++) {
      const [r, g, b] = hot((values[j * nx + i] - lo) / (hi - lo));
      const k = 4 * ((ny - 1 - j) * nx + i);
      img.data.set([r, g, b, 255], k);
    }
  }
  const off = new OffscreenCanvas(nx, ny);
  off.getContext("2d").putImageData(img, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(off, 0, 0, canvas.width, canvas.height);
}

function drawProfile(canvas, patch) {
  const h = patch.height, s = patch.support;
  const nx = h.nx, ny = h.ny, hv = h.values, sv = s.values;
  const i = Math.floor(nx / 2);
  const col = (v) => Array.from({ length: ny }, (_, j) => v[j * nx + i]);
  const a = col(hv), b = col(sv);
  const all = a.concat(b).filter(Number.isFinite);
  const lo = Math.min(...all), hi = Math.max(...all);
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const px = (j) => 10 + (j / (ny - 1)) * (canvas.width - 20);
  const py = (z) => canvas.height - 10 - ((z - lo) / (hi - lo || 1)) * (canvas.height - 20);
  for (const [line, color] of [[a, "#000"], [b, "#1f5fbf"]]) {
    ctx.strokeStyle = color;
    ctx.beginPath();
    line.forEach((z, j) => (j ? ctx.lineTo(px(j), py(z)) : ctx.moveTo(px(j), py(z))));
    ctx.stroke();
  }
}

function guarded(label, fn) {
  return () => {
    status(`${label}...`);
    // Let the status repaint before the synchronous work starts.
    setTimeout(() => {
      const t0 = performance.now();
      try {
        fn();
        status(`${label} done in ${((performance.now() - t0) / 1000).toFixed(2)} s`);
      } catch (e) {
        status(`${label} failed: ${e.message ?? e}`);
      }
    }, 20);
  };
}

function runSynth() {
  const patch = synthesize(num("seed"), num("noise"));
  const h = patch.height;
  drawGrid($("height-map"), h, h.min(), h.max());
  drawProfile($("profile"), patch);
}

function runWrinkles() {
  const d = wrinkles(num("seed"), num("noise"), num("threshold"));
  drawGrid($("wrinkle-map"), d, 0, 1);
  $("wrinkle-caption").textContent = `Depth, 0 to 1 mm (max ${d.max().toFixed(3)} mm)`;
}

function runStretch() {
  const r = stretch(num("seed"), num("ld"), num("dfs"), num("speed"));
  drawGrid($("sigma-x"), r.sigma_x, 0, 2.5e5, 12);
  drawGrid($("sigma-y"), r.sigma_y, 0, 5e5, 12);
  drawGrid($("residual"), r.residual, 0, 1);
  const rep = JSON.parse(r.report);
  $("report").textContent = JSON.stringify(
    {
      converged: rep.converged,
      steps: rep.steps,
      classification: rep.classification,
      residual: rep.residual,
      reference: rep.reference,
      stress: rep.stress,
      injury: rep.injury,
    },
    null,
    2,
  );
}

await init();
$("synth").onclick = guarded("Synthesize", runSynth);
$("wrinkles").onclick = guarded("Wrinkle extraction", runWrinkles);
$("stretch").onclick = guarded("Stretch", runStretch);
status("Ready.");
guarded("Synthesize", runSynth)();
