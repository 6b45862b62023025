import { listBundles, loadBundle } from "./bundle.js";
import { drawRaster } from "./render.js";
import { BundleView } from "./viewer.js";

const SERVER = (window as { REFOCUSLAB_SERVER?: string }).REFOCUSLAB_SERVER
  ?? `${location.protocol}//${location.hostname}:8765`;

const bundleSelect = document.getElementById("bundle-select") as HTMLSelectElement;
const compareSelect = document.getElementById("compare-select") as HTMLSelectElement;
const slider = document.getElementById("frame-slider") as HTMLInputElement;
const frameLabel = document.getElementById("frame-label")!;
const noticeEl = document.getElementById("notice")!;
const overlayEl = document.getElementById("metric-overlay")!;
const tooltipEl = document.getElementById("tooltip")!;
const stage = document.getElementById("stage")!;
const mainCanvas = document.getElementById("main-canvas") as HTMLCanvasElement;
const compareCanvas = document.getElementById("compare-canvas") as HTMLCanvasElement;
const comparePane = document.getElementById("compare-pane")!;
const divider = document.getElementById("divider")!;

let view: BundleView | null = null;

function refresh(): void {
  if (!view) return;
  const i = view.currentIndex;
  drawRaster(mainCanvas, view.bundle.frames[i]);
  slider.value = String(i);
  const value = view.bundle.manifest.frames[i]?.value ?? i / 10;
  frameLabel.textContent = `frame ${i} / ${view.frameCount - 1} (focus ${value.toFixed(1)})`;
  if (view.compare) {
    drawRaster(compareCanvas, view.compare.target.frames[i]);
    comparePane.style.display = "block";
    comparePane.style.width = `${view.compare.divider * 100}%`;
    divider.style.display = "block";
    divider.style.left = `${view.compare.divider * 100}%`;
  } else {
    comparePane.style.display = "none";
    divider.style.display = "none";
  }
  const overlay = view.overlayText();
  overlayEl.textContent = overlay ?? "";
  overlayEl.style.display = overlay ? "block" : "none";
  noticeEl.textContent = view.notice ?? "";
  noticeEl.style.display = view.notice ? "block" : "none";
}

async function openBundle(id: string): Promise<void> {
  const bundle = await loadBundle(`${SERVER}/bundles/${id}`);
  view = new BundleView(bundle);
  view.onEvent((e) => {
    if (e.kind === "frame") refresh();
    if (e.kind === "tooltip") showTooltip(String(e.value));
    if (e.kind === "notice") refresh();
  });
  slider.max = String(view.frameCount - 1);
  slider.value = "0";
  refresh();
}

function showTooltip(text: string): void {
  tooltipEl.textContent = text;
  tooltipEl.style.display = "block";
  setTimeout(() => (tooltipEl.style.display = "none"), 1500);
}

slider.addEventListener("input", () => {
  view?.slideTo(Number(slider.value));
  refresh();
});

window.addEventListener("keydown", (e) => {
  if (!view) return;
  if (e.key === "ArrowRight") view.stepBy(1);
  if (e.key === "ArrowLeft") view.stepBy(-1);
  refresh();
});

mainCanvas.addEventListener("click", (e) => {
  if (!view) return;
  const rect = mainCanvas.getBoundingClientRect();
  view.tapToRefocus(e.clientX - rect.left, e.clientY - rect.top, rect.width, rect.height);
});

let dragging = false;
divider.addEventListener("pointerdown", () => (dragging = true));
window.addEventListener("pointerup", () => (dragging = false));
window.addEventListener("pointermove", (e) => {
  if (!dragging || !view?.compare) return;
  const rect = stage.getBoundingClientRect();
  view.setDivider((e.clientX - rect.left) / rect.width);
  refresh();
});

bundleSelect.addEventListener("change", () => {
  if (bundleSelect.value) void openBundle(bundleSelect.value);
});

compareSelect.addEventListener("change", async () => {
  if (!view) return;
  if (!compareSelect.value) {
    view.compare = null;
    view.notice = null;
    refresh();
    return;
  }
  const target = await loadBundle(`${SERVER}/bundles/${compareSelect.value}`);
  view.setCompare(target);
  refresh();
});

async function init(): Promise<void> {
  const ids = await listBundles(SERVER);
  for (const sel of [bundleSelect, compareSelect]) {
    for (const id of ids) {
      const opt = document.createElement("option");
      opt.value = id;
      opt.textContent = id;
      sel.appendChild(opt);
    }
  }
  if (ids.length > 0) {
    bundleSelect.value = ids[0];
    await openBundle(ids[0]);
  } else {
    noticeEl.textContent = "no bundles on the server";
    noticeEl.style.display = "block";
  }
}

void init();
