/** Base64 float32 payloads and deterministic pseudo-random features. */

/** Little-endian float32 array -> base64, matching the consumer's schema. */
export function floatsToB64(values: Float32Array | number[]): string {
  const arr = values instanceof Float32Array ? values : Float32Array.from(values);
  const buf = Buffer.alloc(arr.length * 4);
  for (let i = 0; i < arr.length; i++) {
    buf.writeFloatLE(arr[i], i * 4);
  }
  return buf.toString("base64");
}

export function b64ToFloats(payload: string): Float32Array {
  const buf = Buffer.from(payload, "base64");
  const out = new Float32Array(buf.length / 4);
  for (let i = 0; i < out.length; i++) {
    out[i] = buf.readFloatLE(i * 4);
  }
  return out;
}

/** djb2 string hash; stable across runs and platforms. */
export function hashString(s: string): number {
  let h = 5381;
  for (let i = 0; i < s.length; i++) {
    h = (h * 33) ^ s.charCodeAt(i);
  }
  return h >>> 0;
}

/** mulberry32 PRNG; small, fast, deterministic. */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

/** Approximately standard-normal draws (sum of uniforms). */
function normalish(rand: () => number): number {
  let s = 0;
  for (let i = 0; i < 6; i++) s += rand();
  return (s - 3) / Math.sqrt(0.5);
}

/** Deterministic unit-scale feature vector derived from a string key. */
export function hashVector(key: string, dim: number): Float32Array {
  const rand = mulberry32(hashString(key));
  const out = new Float32Array(dim);
  for (let i = 0; i < dim; i++) out[i] = normalish(rand);
  return out;
}

/**
 * Fixed random projection (dim x statsDim), seeded by name, used to expand
 * small patch-statistic vectors into the configured feature width.
 */
export function projectionMatrix(name: string, dim: number, statsDim: number): Float32Array {
  const rand = mulberry32(hashString(`${name}:${dim}x${statsDim}`));
  const out = new Float32Array(dim * statsDim);
  for (let i = 0; i < out.length; i++) out[i] = normalish(rand) / Math.sqrt(statsDim);
  return out;
}

export function applyProjection(
  proj: Float32Array,
  stats: number[],
  dim: number
): Float32Array {
  const out = new Float32Array(dim);
  for (let r = 0; r < dim; r++) {
    let acc = 0;
    for (let c = 0; c < stats.length; c++) acc += proj[r * stats.length + c] * stats[c];
    out[r] = acc;
  }
  return out;
}
