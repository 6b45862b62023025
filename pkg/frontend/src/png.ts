import type { Raster } from "./types.js";

/**
 * Minimal PNG decoder for bundle assets (8/16-bit, gray/RGB,
 * non-interlaced). Decoding index.png ourselves instead of reading pixels
 * back from a canvas keeps index values exact: canvas readback may pass
 * through color management and is not guaranteed lossless.
 */

const PNG_SIGNATURE = [0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a];

async function inflate(data: Uint8Array): Promise<Uint8Array> {
  const stream = new Blob([data as BlobPart]).stream()
    .pipeThrough(new DecompressionStream("deflate"));
  const buf = await new Response(stream).arrayBuffer();
  return new Uint8Array(buf);
}

function paeth(a: number, b: number, c: number): number {
  const p = a + b - c;
  const pa = Math.abs(p - a);
  const pb = Math.abs(p - b);
  const pc = Math.abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  return pb <= pc ? b : c;
}

function unfilter(scan: Uint8Array, height: number, stride: number, bpp: number): Uint8Array {
  const out = new Uint8Array(height * stride);
  let pos = 0;
  for (let y = 0; y < height; y++) {
    const ftype = scan[pos++];
    const row = out.subarray(y * stride, (y + 1) * stride);
    row.set(scan.subarray(pos, pos + stride));
    pos += stride;
    const prev = y > 0 ? out.subarray((y - 1) * stride, y * stride) : null;
    switch (ftype) {
      case 0:
        break;
      case 1:
        for (let i = bpp; i < stride; i++) row[i] = (row[i] + row[i - bpp]) & 0xff;
        break;
      case 2:
        if (prev) for (let i = 0; i < stride; i++) row[i] = (row[i] + prev[i]) & 0xff;
        break;
      case 3:
        for (let i = 0; i < stride; i++) {
          const left = i >= bpp ? row[i - bpp] : 0;
          const up = prev ? prev[i] : 0;
          row[i] = (row[i] + ((left + up) >> 1)) & 0xff;
        }
        break;
      case 4:
        for (let i = 0; i < stride; i++) {
          const left = i >= bpp ? row[i - bpp] : 0;
          const up = prev ? prev[i] : 0;
          const ul = prev && i >= bpp ? prev[i - bpp] : 0;
          row[i] = (row[i] + paeth(left, up, ul)) & 0xff;
        }
        break;
      default:
        throw new Error(`PNG: unknown scanline filter ${ftype}`);
    }
  }
  return out;
}

export async function decodePng(bytes: Uint8Array): Promise<Raster> {
  if (bytes.length < 8 || PNG_SIGNATURE.some((b, i) => bytes[i] !== b)) {
    throw new Error("PNG: bad signature");
  }
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  let pos = 8;
  let width = 0;
  let height = 0;
  let depth = 0;
  let colorType = 0;
  const idat: Uint8Array[] = [];
  while (pos + 8 <= bytes.length) {
    const length = view.getUint32(pos);
    const tag = String.fromCharCode(...bytes.subarray(pos + 4, pos + 8));
    const data = bytes.subarray(pos + 8, pos + 8 + length);
    pos += 12 + length;
    if (tag === "IHDR") {
      const hv = new DataView(data.buffer, data.byteOffset, data.byteLength);
      width = hv.getUint32(0);
      height = hv.getUint32(4);
      depth = data[8];
      colorType = data[9];
      if (data[10] !== 0 || data[11] !== 0 || data[12] !== 0) {
        throw new Error("PNG: unsupported compression/filter/interlace");
      }
    } else if (tag === "IDAT") {
      idat.push(data);
    } else if (tag === "IEND") {
      break;
    }
  }
  if (!width || !height) throw new Error("PNG: missing IHDR");
  if (depth !== 8 && depth !== 16) throw new Error(`PNG: unsupported bit depth ${depth}`);
  if (colorType !== 0 && colorType !== 2) throw new Error(`PNG: unsupported color type ${colorType}`);
  const channels = colorType === 0 ? 1 : 3;
  const total = idat.reduce((n, c) => n + c.length, 0);
  const joined = new Uint8Array(total);
  let off = 0;
  for (const c of idat) {
    joined.set(c, off);
    off += c.length;
  }
  const scan = await inflate(joined);
  const bpp = channels * (depth / 8);
  const stride = width * bpp;
  if (scan.length !== height * (stride + 1)) throw new Error("PNG: scanline length mismatch");
  const raw = unfilter(scan, height, stride, bpp);
  const n = width * height * channels;
  const data = new Float32Array(n);
  if (depth === 8) {
    for (let i = 0; i < n; i++) data[i] = raw[i] / 255;
  } else {
    for (let i = 0; i < n; i++) data[i] = ((raw[2 * i] << 8) | raw[2 * i + 1]) / 65535;
  }
  return { width, height, channels, data };
}
