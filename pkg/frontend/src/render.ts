import type { Raster } from "./types.js";

/** Write a raster into a canvas 1:1 (display scaling is CSS's job). */
export function drawRaster(canvas: HTMLCanvasElement, raster: Raster): void {
  canvas.width = raster.width;
  canvas.height = raster.height;
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("2d canvas context unavailable");
  const img = ctx.createImageData(raster.width, raster.height);
  const n = raster.width * raster.height;
  for (let i = 0; i < n; i++) {
    const base = i * raster.channels;
    const r = raster.data[base];
    const g = raster.channels === 3 ? raster.data[base + 1] : r;
    const b = raster.channels === 3 ? raster.data[base + 2] : r;
    img.data[4 * i] = Math.round(r * 255);
    img.data[4 * i + 1] = Math.round(g * 255);
    img.data[4 * i + 2] = Math.round(b * 255);
    img.data[4 * i + 3] = 255;
  }
  ctx.putImageData(img, 0, 0);
}
