/** Regenerate the bundled fixture PNGs deterministically. */

import * as fs from "fs";
import * as path from "path";
import { PNG } from "pngjs";

import { mulberry32 } from "../src/encoding";

function write(png: PNG, name: string): void {
  const out = path.join(__dirname, "..", "..", "fixtures", "images", name);
  fs.mkdirSync(path.dirname(out), { recursive: true });
  fs.writeFileSync(out, PNG.sync.write(png));
  console.log(`wrote ${out}`);
}

function fill(png: PNG, fn: (x: number, y: number) => [number, number, number]): void {
  for (let y = 0; y < png.height; y++) {
    for (let x = 0; x < png.width; x++) {
      const [r, g, b] = fn(x, y);
      const off = (y * png.width + x) * 4;
      png.data[off] = r;
      png.data[off + 1] = g;
      png.data[off + 2] = b;
      png.data[off + 3] = 255;
    }
  }
}

function portrait(): void {
  const png = new PNG({ width: 64, height: 64 });
  const rand = mulberry32(7);
  fill(png, (x, y) => {
    const dx = (x - 32) / 14;
    const dy = (y - 30) / 18;
    if (dx * dx + dy * dy < 1) {
      // skin-tone ellipse
      const n = Math.floor(rand() * 12);
      return [224 - n, 172 - n, 140 - n];
    }
    return [60, 90, 160 + Math.floor(rand() * 8)];
  });
  write(png, "portrait.png");
}

function scene(): void {
  const png = new PNG({ width: 96, height: 64 });
  const rand = mulberry32(11);
  const blocks: Array<[number, number, number, number, [number, number, number]]> = [
    [6, 8, 22, 18, [200, 40, 30]],
    [40, 6, 26, 22, [30, 180, 60]],
    [70, 30, 20, 26, [40, 60, 210]],
    [14, 38, 24, 20, [220, 210, 50]],
  ];
  fill(png, (x, y) => {
    for (const [bx, by, bw, bh, color] of blocks) {
      if (x >= bx && x < bx + bw && y >= by && y < by + bh) {
        const n = Math.floor(rand() * 90); // heavy texture inside blocks
        return [
          Math.min(255, color[0] + n),
          Math.min(255, color[1] + n),
          Math.max(0, color[2] - n),
        ];
      }
    }
    return [120, 120, 120];
  });
  write(png, "scene.png");
}

function blank(): void {
  const png = new PNG({ width: 48, height: 48 });
  fill(png, () => [128, 128, 128]);
  write(png, "blank.png");
}

portrait();
scene();
blank();
