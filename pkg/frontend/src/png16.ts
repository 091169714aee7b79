// Minimal decoder for the service's 16-bit grayscale PNGs (non-interlaced,
// bit depth 16, color type 0). Browsers flatten 16-bit PNGs to 8 bits per
// channel on canvas, which destroys the millimeter scale, so the viewer
// decodes the raw samples itself and applies its own contrast stretch.

const PNG_SIGNATURE = [0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a];

export interface Png16 {
  width: number;
  height: number;
  /** Row-major 16-bit samples (millimeters above the floor). */
  samples: Uint16Array;
}

async function inflate(data: Uint8Array): Promise<Uint8Array> {
  const ds = new DecompressionStream("deflate");
  const stream = new Blob([data as BlobPart]).stream().pipeThrough(ds);
  const buf = await new Response(stream).arrayBuffer();
  return new Uint8Array(buf);
}

function paeth(a: number, b: number, c: number): number {
  const p = a + b - c;
  const pa = Math.abs(p - a);
  const pb = Math.abs(p - b);
  const pc = Math.abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

export async function decodePng16(bytes: Uint8Array): Promise<Png16> {
  for (let i = 0; i < 8; i++) {
    if (bytes[i] !== PNG_SIGNATURE[i]) throw new Error("not a PNG");
  }
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  let pos = 8;
  let width = 0;
  let height = 0;
  const idat: Uint8Array[] = [];
  while (pos < bytes.length) {
    const len = view.getUint32(pos);
    const type = String.fromCharCode(...bytes.subarray(pos + 4, pos + 8));
    const body = bytes.subarray(pos + 8, pos + 8 + len);
    if (type === "IHDR") {
      const hv = new DataView(body.buffer, body.byteOffset, body.byteLength);
      width = hv.getUint32(0);
      height = hv.getUint32(4);
      const bitDepth = body[8];
      const colorType = body[9];
      const interlace = body[12];
      if (bitDepth !== 16 || colorType !== 0 || interlace !== 0) {
        throw new Error(
          `unsupported PNG (depth ${bitDepth}, color ${colorType}, interlace ${interlace})`,
        );
      }
    } else if (type === "IDAT") {
      idat.push(body);
    } else if (type === "IEND") {
      break;
    }
    pos += 12 + len;
  }
  const compressed = new Uint8Array(idat.reduce((n, c) => n + c.length, 0));
  let off = 0;
  for (const c of idat) {
    compressed.set(c, off);
    off += c.length;
  }
  // IDAT payload is zlib-wrapped; DecompressionStream("deflate") expects
  // exactly that framing
  const raw = await inflate(compressed);

  const bpp = 2; // one 16-bit gray sample
  const stride = width * bpp;
  const samples = new Uint16Array(width * height);
  const prev = new Uint8Array(stride);
  const cur = new Uint8Array(stride);
  for (let y = 0; y < height; y++) {
    const filter = raw[y * (stride + 1)];
    const line = raw.subarray(y * (stride + 1) + 1, (y + 1) * (stride + 1));
    for (let i = 0; i < stride; i++) {
      const a = i >= bpp ? cur[i - bpp] : 0;
      const b = prev[i];
      const c = i >= bpp ? prev[i - bpp] : 0;
      let v = line[i];
      switch (filter) {
        case 0: break;
        case 1: v = (v + a) & 0xff; break;
        case 2: v = (v + b) & 0xff; break;
        case 3: v = (v + ((a + b) >> 1)) & 0xff; break;
        case 4: v = (v + paeth(a, b, c)) & 0xff; break;
        default: throw new Error(`bad PNG filter ${filter}`);
      }
      cur[i] = v;
    }
    for (let x = 0; x < width; x++) {
      samples[y * width + x] = (cur[2 * x] << 8) | cur[2 * x + 1];
    }
    prev.set(cur);
  }
  return { width, height, samples };
}

/** Contrast-stretched 8-bit grayscale for display (max sample -> white). */
export function toImageDataPixels(png: Png16): Uint8ClampedArray<ArrayBuffer> {
  let max = 0;
  for (const s of png.samples) if (s > max) max = s;
  const scale = max > 0 ? 255 / max : 0;
  const out = new Uint8ClampedArray(new ArrayBuffer(png.width * png.height * 4));
  for (let i = 0; i < png.samples.length; i++) {
    const g = Math.round(png.samples[i] * scale);
    out[4 * i] = g;
    out[4 * i + 1] = g;
    out[4 * i + 2] = g;
    out[4 * i + 3] = 255;
  }
  return out;
}
