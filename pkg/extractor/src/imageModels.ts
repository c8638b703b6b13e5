/**
 * Pluggable image-side models (object/face detection, feature extraction).
 *
 * The default backend decodes PNGs and works from window statistics:
 * objects are high-variance windows, faces are skin-tone-dominated windows,
 * and features come from a fixed seeded random projection of per-window
 * statistics, so every output is deterministic without downloaded weights.
 */

import * as fs from "fs";
import { PNG } from "pngjs";

import { applyProjection, projectionMatrix } from "./encoding";
import { DecodeError, ModelUnavailable } from "./schema";

export interface RawDetection {
  kind: "OBJECT" | "FACE";
  bbox: [number, number, number, number];
  score: number;
  classLabel: string;
  feature: Float32Array;
}

export interface ImageModel {
  name: string;
  /** One feature row per grid cell (gridRows * gridCols rows, dimV wide). */
  globalFeatures(path: string, dimV: number): Float32Array[];
  detections(path: string, dimV: number): RawDetection[];
}

interface Decoded {
  width: number;
  height: number;
  data: Buffer; // RGBA
}

function decodePng(path: string): Decoded {
  let raw: Buffer;
  try {
    raw = fs.readFileSync(path);
  } catch (err) {
    throw new DecodeError(`cannot read image ${path}: ${err}`);
  }
  try {
    const png = PNG.sync.read(raw);
    return { width: png.width, height: png.height, data: png.data };
  } catch (err) {
    throw new DecodeError(`cannot decode ${path} as PNG: ${err}`);
  }
}

interface WindowStats {
  meanR: number;
  meanG: number;
  meanB: number;
  lumaStd: number;
  edgeEnergy: number;
  skinFrac: number;
}

function windowStats(img: Decoded, x0: number, y0: number, w: number, h: number): WindowStats {
  let sumR = 0;
  let sumG = 0;
  let sumB = 0;
  let sumL = 0;
  let sumL2 = 0;
  let edges = 0;
  let skin = 0;
  let n = 0;
  let prevLuma = 0;
  for (let y = y0; y < y0 + h; y++) {
    for (let x = x0; x < x0 + w; x++) {
      const off = (y * img.width + x) * 4;
      const r = img.data[off];
      const g = img.data[off + 1];
      const b = img.data[off + 2];
      const luma = 0.299 * r + 0.587 * g + 0.114 * b;
      sumR += r;
      sumG += g;
      sumB += b;
      sumL += luma;
      sumL2 += luma * luma;
      if (x > x0) edges += Math.abs(luma - prevLuma);
      prevLuma = luma;
      // classic RGB skin heuristic
      if (r > 95 && g > 40 && b > 20 && r > g && g > b && r - b > 15) skin += 1;
      n += 1;
    }
  }
  const meanL = sumL / n;
  const variance = Math.max(0, sumL2 / n - meanL * meanL);
  return {
    meanR: sumR / n / 255,
    meanG: sumG / n / 255,
    meanB: sumB / n / 255,
    lumaStd: Math.sqrt(variance) / 128,
    edgeEnergy: edges / n / 64,
    skinFrac: skin / n,
  };
}

function statsVector(s: WindowStats): number[] {
  return [s.meanR, s.meanG, s.meanB, s.lumaStd, s.edgeEnergy, s.skinFrac];
}

function classLabel(s: WindowStats): string {
  const channels: Array<[number, string]> = [
    [s.meanR, "red-region"],
    [s.meanG, "green-region"],
    [s.meanB, "blue-region"],
  ];
  channels.sort((a, b) => b[0] - a[0]);
  if (channels[0][0] - channels[2][0] < 0.04) return "gray-region";
  return channels[0][1];
}

function iou(a: [number, number, number, number], b: [number, number, number, number]): number {
  const x1 = Math.max(a[0], b[0]);
  const y1 = Math.max(a[1], b[1]);
  const x2 = Math.min(a[0] + a[2], b[0] + b[2]);
  const y2 = Math.min(a[1] + a[3], b[1] + b[3]);
  const inter = Math.max(0, x2 - x1) * Math.max(0, y2 - y1);
  const union = a[2] * a[3] + b[2] * b[3] - inter;
  return union > 0 ? inter / union : 0;
}

const STATS_DIM = 6;
const GRID = 7;
const MIN_OBJECT_SCORE = 0.3;
const MAX_OBJECTS = 64;
const MAX_FACES = 4;

class PatchStatsImageModel implements ImageModel {
  name = "patchstats";

  globalFeatures(path: string, dimV: number): Float32Array[] {
    const img = decodePng(path);
    const proj = projectionMatrix("global", dimV, STATS_DIM);
    const rows: Float32Array[] = [];
    const cellW = Math.max(1, Math.floor(img.width / GRID));
    const cellH = Math.max(1, Math.floor(img.height / GRID));
    for (let gy = 0; gy < GRID; gy++) {
      for (let gx = 0; gx < GRID; gx++) {
        const x0 = Math.min(gx * cellW, img.width - 1);
        const y0 = Math.min(gy * cellH, img.height - 1);
        const w = Math.min(cellW, img.width - x0);
        const h = Math.min(cellH, img.height - y0);
        const stats = windowStats(img, x0, y0, Math.max(1, w), Math.max(1, h));
        rows.push(applyProjection(proj, statsVector(stats), dimV));
      }
    }
    return rows;
  }

  detections(path: string, dimV: number): RawDetection[] {
    const img = decodePng(path);
    const proj = projectionMatrix("detection", dimV, STATS_DIM);
    const candidates: Array<{ stats: WindowStats; bbox: [number, number, number, number] }> = [];
    const scales = [
      Math.max(8, Math.floor(Math.min(img.width, img.height) / 2)),
      Math.max(8, Math.floor(Math.min(img.width, img.height) / 4)),
    ];
    for (const size of new Set(scales)) {
      const stride = Math.max(4, Math.floor(size / 2));
      for (let y = 0; y + size <= img.height; y += stride) {
        for (let x = 0; x + size <= img.width; x += stride) {
          candidates.push({
            stats: windowStats(img, x, y, size, size),
            bbox: [x, y, size, size],
          });
        }
      }
    }

    const objects = candidates
      .map((c) => ({
        ...c,
        score: Math.min(1, c.stats.lumaStd * 2 + c.stats.edgeEnergy),
      }))
      .filter((c) => c.score >= MIN_OBJECT_SCORE)
      .sort((a, b) => b.score - a.score);
    const faces = candidates
      .map((c) => ({ ...c, score: Math.min(1, c.stats.skinFrac * 1.2) }))
      .filter((c) => c.score >= 0.35)
      .sort((a, b) => b.score - a.score);

    const out: RawDetection[] = [];
    const keepNonOverlapping = (
      pool: Array<{ stats: WindowStats; bbox: [number, number, number, number]; score: number }>,
      kind: "OBJECT" | "FACE",
      cap: number
    ) => {
      const kept: Array<[number, number, number, number]> = [];
      for (const cand of pool) {
        if (kept.length >= cap) break;
        if (kept.some((k) => iou(k, cand.bbox) > 0.4)) continue;
        kept.push(cand.bbox);
        out.push({
          kind,
          bbox: cand.bbox,
          score: cand.score,
          classLabel: kind === "OBJECT" ? classLabel(cand.stats) : "",
          feature: applyProjection(proj, statsVector(cand.stats), dimV),
        });
      }
    };
    keepNonOverlapping(objects, "OBJECT", MAX_OBJECTS);
    keepNonOverlapping(faces, "FACE", MAX_FACES);
    return out;
  }
}

const IMAGE_MODELS: Record<string, () => ImageModel> = {
  patchstats: () => new PatchStatsImageModel(),
};

export function imageModel(name: string): ImageModel {
  const factory = IMAGE_MODELS[name];
  if (!factory) {
    throw new ModelUnavailable(
      `image model ${JSON.stringify(name)} is not installed; available: ${Object.keys(IMAGE_MODELS).join(", ")}`
    );
  }
  return factory();
}
