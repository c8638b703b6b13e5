/**
 * Extractor tests, including the round-trip acceptance: every emitted JSONL
 * line must load through the consumer toolkit's validators (`mmkgcap`)
 * with zero errors, and image records must obey the 64-object / 4-face /
 * 0.3-score limits.
 */

import { execFileSync } from "child_process";
import * as fs from "fs";
import * as os from "os";
import * as path from "path";
import { beforeAll, describe, expect, it } from "vitest";

import { b64ToFloats, floatsToB64 } from "../src/encoding";
import { extractArticle, extractImage, extractKbEntry, writeJsonl, KbInput } from "../src/extract";
import { ModelUnavailable } from "../src/schema";
import type { ArticleRecord, ImageRecord, KbEntryRecord } from "../src/schema";

const FIXTURES = path.join(__dirname, "..", "fixtures");
const DIM_E = 16;
const DIM_V = 32;
const OPTS = { dimE: DIM_E, dimV: DIM_V };

function readFixtureArticle(name: string): string {
  return fs.readFileSync(path.join(FIXTURES, "articles", `${name}.txt`), "utf8");
}

let articles: ArticleRecord[];
let images: ImageRecord[];
let kbEntries: KbEntryRecord[];
let outDir: string;

beforeAll(() => {
  const articleFiles = fs.readdirSync(path.join(FIXTURES, "articles")).sort();
  articles = articleFiles.map((f) =>
    extractArticle(path.basename(f, ".txt"), readFixtureArticle(path.basename(f, ".txt")), OPTS)
  );
  const imageFiles = fs.readdirSync(path.join(FIXTURES, "images")).sort();
  images = imageFiles.map((f) =>
    extractImage(path.basename(f, ".png"), path.join(FIXTURES, "images", f), OPTS)
  );
  const kbInputs = fs
    .readFileSync(path.join(FIXTURES, "kb_entities.jsonl"), "utf8")
    .split("\n")
    .filter((l) => l.trim())
    .map((l) => JSON.parse(l) as KbInput);
  kbEntries = kbInputs.map((inp) => extractKbEntry(inp, FIXTURES, OPTS));
  outDir = fs.mkdtempSync(path.join(os.tmpdir(), "mmkg-extract-"));
  writeJsonl(articles, path.join(outDir, "articles.jsonl"));
  writeJsonl(images, path.join(outDir, "images.jsonl"));
  writeJsonl(kbEntries, path.join(outDir, "kb.jsonl"));
});

describe("encoding", () => {
  it("round-trips float32 payloads bit-exactly", () => {
    const values = Float32Array.from([1.5, -2.25, 3e-7, 0]);
    expect(Array.from(b64ToFloats(floatsToB64(values)))).toEqual(Array.from(values));
  });
});

describe("article extraction", () => {
  it("empty text yields a record with empty lists", () => {
    const rec = extractArticle("empty", "", OPTS);
    expect(rec.entities).toEqual([]);
    expect(rec.triples).toEqual([]);
    expect(rec.coref_chains).toEqual([]);
    expect(rec.token_features).toBeNull();
  });

  it("finds entities and at least one triple in the race article", () => {
    const rec = articles.find((a) => a.article_id === "race_win")!;
    expect(rec.entities.length).toBeGreaterThanOrEqual(1);
    expect(rec.triples.length).toBeGreaterThanOrEqual(1);
    const surfaces = rec.entities.map((e) => e.surface);
    expect(surfaces).toContain("Fernando Alonso");
    expect(surfaces).toContain("Toyota Motors");
  });

  it("byte spans slice back to the exact surface strings", () => {
    for (const rec of articles) {
      const bytes = Buffer.from(rec.text, "utf8");
      for (const ent of rec.entities) {
        const [s, e] = ent.char_span;
        expect(bytes.subarray(s, e).toString("utf8")).toBe(ent.surface);
      }
      for (const tri of rec.triples) {
        const [s, e] = tri.relation_span;
        expect(bytes.subarray(s, e).toString("utf8")).toBe(tri.relation_text);
      }
    }
  });

  it("repeated names produce a coreference chain of length >= 2", () => {
    const rec = articles.find((a) => a.article_id === "race_win")!;
    const alonsoIds = rec.entities.filter((e) => e.surface === "Alonso").map((e) => e.id);
    expect(alonsoIds.length).toBeGreaterThanOrEqual(2);
    const chain = rec.coref_chains.find((c) => c.includes(alonsoIds[0]));
    expect(chain).toBeDefined();
    expect(chain!.length).toBeGreaterThanOrEqual(2);
  });

  it("embeds entities with the configured dimension", () => {
    const rec = articles.find((a) => a.article_id === "alliance")!;
    for (const ent of rec.entities) {
      expect(b64ToFloats(ent.embedding!).length).toBe(DIM_E);
    }
    const tokens = rec.text.split(/\s+/).filter((w) => w.length > 0).length;
    expect(b64ToFloats(rec.token_features!).length).toBe(tokens * DIM_E);
  });

  it("is deterministic", () => {
    const text = readFixtureArticle("alliance");
    const a = JSON.stringify(extractArticle("x", text, OPTS));
    const b = JSON.stringify(extractArticle("x", text, OPTS));
    expect(a).toBe(b);
  });
});

describe("image extraction", () => {
  it("a blank image yields a valid record with zero detections", () => {
    const rec = images.find((i) => i.image_id === "blank")!;
    expect(rec.detections).toEqual([]);
    expect(b64ToFloats(rec.global_features).length).toBe(49 * DIM_V);
  });

  it("the portrait contains at least one FACE with d_v features", () => {
    const rec = images.find((i) => i.image_id === "portrait")!;
    const faces = rec.detections.filter((d) => d.kind === "FACE");
    expect(faces.length).toBeGreaterThanOrEqual(1);
    for (const f of faces) {
      expect(b64ToFloats(f.feature).length).toBe(DIM_V);
    }
  });

  it("obeys the 64-object / 4-face / 0.3-score limits", () => {
    for (const rec of images) {
      const objects = rec.detections.filter((d) => d.kind === "OBJECT");
      const faces = rec.detections.filter((d) => d.kind === "FACE");
      expect(objects.length).toBeLessThanOrEqual(64);
      expect(faces.length).toBeLessThanOrEqual(4);
      for (const obj of objects) {
        expect(obj.score).toBeGreaterThanOrEqual(0.3);
        expect(obj.score).toBeLessThanOrEqual(1.0);
      }
    }
    // the busy scene actually reaches the object cap
    const scene = images.find((i) => i.image_id === "scene")!;
    expect(scene.detections.filter((d) => d.kind === "OBJECT").length).toBe(64);
  });
});

describe("kb extraction", () => {
  it("emits one entry per input, duplicates included (dedup is the loader's job)", () => {
    expect(kbEntries.length).toBe(4);
    const ids = kbEntries.map((e) => e.wiki_id);
    expect(ids.filter((w) => w === "Q_Fernando_Alonso").length).toBe(2);
    for (const entry of kbEntries) {
      expect(b64ToFloats(entry.entity_embedding).length).toBe(DIM_E);
      expect(b64ToFloats(entry.image_feature).length).toBe(DIM_V);
    }
  });
});

describe("pluggable models", () => {
  it("raises ModelUnavailable for unknown backends", () => {
    expect(() => extractArticle("x", "Some text.", { ...OPTS, textModelName: "corenlp" })).toThrow(
      ModelUnavailable
    );
    expect(() =>
      extractImage("x", path.join(FIXTURES, "images", "blank.png"), {
        ...OPTS,
        imageModelName: "yolo",
      })
    ).toThrow(ModelUnavailable);
  });
});

describe("round-trip through the consumer toolkit", () => {
  const run = (args: string[]): string => {
    try {
      return execFileSync("mmkgcap", args, { encoding: "utf8" });
    } catch (err: any) {
      throw new Error(
        `mmkgcap ${args.join(" ")} failed:\n${err.stdout ?? ""}${err.stderr ?? ""}`
      );
    }
  };

  it("articles, images and captions validate with zero errors", () => {
    const output = run([
      "validate",
      "--articles",
      path.join(outDir, "articles.jsonl"),
      "--images",
      path.join(outDir, "images.jsonl"),
      "--dim-e",
      String(DIM_E),
      "--dim-v",
      String(DIM_V),
    ]);
    expect(output).toContain("articles ok: 3 records");
    expect(output).toContain("images ok: 3 records");
  });

  it("kb entries validate and the loader drops the duplicate", () => {
    const output = run([
      "kb",
      "validate",
      "--kb",
      path.join(outDir, "kb.jsonl"),
      "--dim-e",
      String(DIM_E),
      "--dim-v",
      String(DIM_V),
    ]);
    expect(output).toContain("3 entries");
    expect(output).toContain("1 duplicates dropped");
  });
});

describe("cli", () => {
  it("extract articles/images/kb writes the same records as the library", () => {
    const cliDir = fs.mkdtempSync(path.join(os.tmpdir(), "mmkg-cli-"));
    const node = process.execPath;
    const cli = path.join(__dirname, "..", "dist", "src", "cli.js");
    execFileSync(node, [
      cli, "articles", "--in", path.join(FIXTURES, "articles"),
      "--out", path.join(cliDir, "articles.jsonl"), "--dim-e", String(DIM_E), "--dim-v", String(DIM_V),
    ]);
    execFileSync(node, [
      cli, "images", "--in", path.join(FIXTURES, "images"),
      "--out", path.join(cliDir, "images.jsonl"), "--dim-e", String(DIM_E), "--dim-v", String(DIM_V),
    ]);
    execFileSync(node, [
      cli, "kb", "--in", path.join(FIXTURES, "kb_entities.jsonl"),
      "--out", path.join(cliDir, "kb.jsonl"), "--dim-e", String(DIM_E), "--dim-v", String(DIM_V),
    ]);
    for (const name of ["articles.jsonl", "images.jsonl", "kb.jsonl"]) {
      expect(fs.readFileSync(path.join(cliDir, name), "utf8")).toBe(
        fs.readFileSync(path.join(outDir, name), "utf8")
      );
    }
  });
});
