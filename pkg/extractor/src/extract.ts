/**
 * Extraction entry points: raw article text / PNG images / entity lists in,
 * consumer-schema JSONL records out.
 *
 * Character spans are converted to byte offsets into the UTF-8 text, and
 * every emitted span is verified to slice back to its surface string.
 */

import * as fs from "fs";
import * as path from "path";

import { floatsToB64, hashVector } from "./encoding";
import { imageModel } from "./imageModels";
import {
  ArticleRecord,
  EntityRecord,
  ImageRecord,
  KbEntryRecord,
  SpanMismatch,
  TripleRecord,
} from "./schema";
import { textModel, tokenize } from "./textModels";

export interface ExtractOptions {
  dimE: number;
  dimV: number;
  textModelName?: string;
  imageModelName?: string;
  maxArticleTokens?: number;
}

const DEFAULTS = { textModelName: "rules", imageModelName: "patchstats", maxArticleTokens: 512 };

/** Cumulative UTF-8 byte offset for every character index (length n+1). */
function byteOffsets(text: string): number[] {
  const offsets = new Array<number>(text.length + 1);
  offsets[0] = 0;
  for (let i = 0; i < text.length; i++) {
    const code = text.codePointAt(i)!;
    let width: number;
    if (code < 0x80) width = 1;
    else if (code < 0x800) width = 2;
    else if (code < 0x10000) width = 3;
    else width = 4;
    if (code >= 0x10000) {
      // surrogate pair occupies two char indices
      offsets[i + 1] = offsets[i];
      offsets[i + 2] = offsets[i] + width;
      i += 1;
      continue;
    }
    offsets[i + 1] = offsets[i] + width;
  }
  return offsets;
}

function verifySpan(text: string, byteStart: number, byteEnd: number, surface: string): void {
  const sliced = Buffer.from(text, "utf8").subarray(byteStart, byteEnd).toString("utf8");
  if (sliced !== surface) {
    throw new SpanMismatch(
      `span [${byteStart}, ${byteEnd}) reads ${JSON.stringify(sliced)}, expected ${JSON.stringify(surface)}`
    );
  }
}

export function extractArticle(
  articleId: string,
  text: string,
  options: ExtractOptions
): ArticleRecord {
  const opts = { ...DEFAULTS, ...options };
  const model = textModel(opts.textModelName);
  const tokens = tokenize(text);
  const offsets = byteOffsets(text);
  const mentions = model.mentions(tokens);

  const entities: EntityRecord[] = mentions.map((m, idx) => {
    const start = offsets[m.charStart];
    const end = offsets[m.charEnd];
    verifySpan(text, start, end, m.surface);
    return {
      id: `e${idx}`,
      surface: m.surface,
      entity_class: m.entityClass,
      char_span: [start, end],
      wiki_id: m.gazetteer ? `Q_${m.surface.replace(/\s+/g, "_")}` : null,
      embedding: floatsToB64(hashVector(`ent:${m.surface}`, opts.dimE)),
    };
  });

  const triples: TripleRecord[] = model.relations(tokens, mentions).map((hit) => {
    const start = offsets[hit.charStart];
    const end = offsets[hit.charEnd];
    verifySpan(text, start, end, hit.text);
    return {
      head_id: `e${hit.headIndex}`,
      relation_text: hit.text,
      relation_span: [start, end],
      tail_id: `e${hit.tailIndex}`,
      relation_embedding: floatsToB64(hashVector(`rel:${hit.text}`, opts.dimE)),
    };
  });

  const chains = model
    .corefGroups(mentions)
    .map((group) =>
      group
        .slice()
        .sort((a, b) => mentions[a].charStart - mentions[b].charStart)
        .map((idx) => `e${idx}`)
    );

  const words = text.split(/\s+/).filter((w) => w.length > 0).slice(0, opts.maxArticleTokens);
  let tokenFeatures: string | null = null;
  if (words.length > 0) {
    const rows = words.map((w, i) => hashVector(`tok:${i}:${w}`, opts.dimE));
    const flat = new Float32Array(rows.length * opts.dimE);
    rows.forEach((row, i) => flat.set(row, i * opts.dimE));
    tokenFeatures = floatsToB64(flat);
  }

  return {
    article_id: articleId,
    text,
    entities,
    triples,
    coref_chains: chains,
    token_features: tokenFeatures,
  };
}

export function extractImage(
  imageId: string,
  imagePath: string,
  options: ExtractOptions
): ImageRecord {
  const opts = { ...DEFAULTS, ...options };
  const model = imageModel(opts.imageModelName);
  const grid = model.globalFeatures(imagePath, opts.dimV);
  const flat = new Float32Array(grid.length * opts.dimV);
  grid.forEach((row, i) => flat.set(row, i * opts.dimV));
  const detections = model.detections(imagePath, opts.dimV).map((d) => ({
    kind: d.kind,
    bbox: d.bbox,
    score: d.score,
    class_label: d.classLabel,
    feature: floatsToB64(d.feature),
  }));
  return { image_id: imageId, global_features: floatsToB64(flat), detections };
}

export interface KbInput {
  wiki_id: string;
  name: string;
  image: string; // path, relative to the input file
}

export function extractKbEntry(
  input: KbInput,
  baseDir: string,
  options: ExtractOptions
): KbEntryRecord {
  const opts = { ...DEFAULTS, ...options };
  const model = imageModel(opts.imageModelName);
  const imagePath = path.isAbsolute(input.image)
    ? input.image
    : path.join(baseDir, input.image);
  const grid = model.globalFeatures(imagePath, opts.dimV);
  // one image per entity: pool the grid into a single feature vector
  const pooled = new Float32Array(opts.dimV);
  for (const row of grid) {
    for (let i = 0; i < opts.dimV; i++) pooled[i] += row[i] / grid.length;
  }
  return {
    wiki_id: input.wiki_id,
    name: input.name,
    entity_embedding: floatsToB64(hashVector(`ent:${input.name}`, opts.dimE)),
    image_feature: floatsToB64(pooled),
  };
}

export function writeJsonl(records: object[], outPath: string): void {
  const lines = records.map((r) => JSON.stringify(r)).join("\n");
  fs.writeFileSync(outPath, records.length ? lines + "\n" : "");
}
