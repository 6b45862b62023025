import { decodePng } from "./png.js";
import type { BundleReport, Manifest, Raster } from "./types.js";

/** A fully fetched bundle: manifest, decoded frames, optional extras. */
export interface LoadedBundle {
  baseUrl: string;
  manifest: Manifest;
  frames: Raster[];
  frameUrls: string[];
  /** Per-pixel frame indices, null when the bundle ships no index map. */
  indexMap: Int32Array | null;
  indexWidth: number;
  indexHeight: number;
  report: BundleReport | null;
}

export async function fetchManifest(baseUrl: string): Promise<Manifest> {
  const res = await fetch(`${baseUrl}/manifest.json`);
  if (!res.ok) throw new Error(`bundle manifest fetch failed: HTTP ${res.status}`);
  const doc = (await res.json()) as Manifest;
  if (!Array.isArray(doc.frames) || doc.frames.length === 0) {
    throw new Error("bundle manifest lists no frames");
  }
  return doc;
}

async function fetchRaster(url: string): Promise<Raster> {
  const res = await fetch(url);
  if (!res.ok) throw new Error(`fetch failed: ${url} (HTTP ${res.status})`);
  return decodePng(new Uint8Array(await res.arrayBuffer()));
}

export async function loadBundle(baseUrl: string): Promise<LoadedBundle> {
  const manifest = await fetchManifest(baseUrl);
  const ordered = [...manifest.frames].sort((a, b) => a.index - b.index);
  const frameUrls = ordered.map((f) => `${baseUrl}/${f.path}`);
  const frames = await Promise.all(frameUrls.map(fetchRaster));

  let indexMap: Int32Array | null = null;
  let indexWidth = 0;
  let indexHeight = 0;
  if (manifest.index_map) {
    try {
      const raster = await fetchRaster(`${baseUrl}/${manifest.index_map}`);
      indexWidth = raster.width;
      indexHeight = raster.height;
      indexMap = new Int32Array(raster.width * raster.height);
      for (let i = 0; i < indexMap.length; i++) {
        indexMap[i] = Math.round(raster.data[i * raster.channels] * 255);
      }
    } catch {
      indexMap = null; // tap-to-refocus degrades gracefully
    }
  }

  let report: BundleReport | null = null;
  try {
    const res = await fetch(`${baseUrl}/report.json`);
    if (res.ok) report = (await res.json()) as BundleReport;
  } catch {
    report = null;
  }
  return { baseUrl, manifest, frames, frameUrls, indexMap, indexWidth, indexHeight, report };
}

export async function listBundles(serverUrl: string): Promise<string[]> {
  const res = await fetch(`${serverUrl}/bundles`);
  if (!res.ok) throw new Error(`bundle listing failed: HTTP ${res.status}`);
  const doc = (await res.json()) as { bundles: string[] };
  return doc.bundles;
}
