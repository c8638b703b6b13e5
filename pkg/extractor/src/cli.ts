#!/usr/bin/env node
/**
 * extract articles|images|kb --in <path> --out <file.jsonl>
 *                            [--dim-e 1024] [--dim-v 2048]
 *                            [--text-model rules] [--image-model patchstats]
 *
 * articles: --in is a directory of .txt files (file stem becomes article_id)
 * images:   --in is a directory of .png files (file stem becomes image_id)
 * kb:       --in is a JSONL file of {wiki_id, name, image} rows; image paths
 *           resolve relative to that file
 */

import * as fs from "fs";
import * as path from "path";

import { extractArticle, extractImage, extractKbEntry, writeJsonl, KbInput } from "./extract";
import { ModelUnavailable, DecodeError, SpanMismatch } from "./schema";

interface Args {
  mode: string;
  inPath: string;
  outPath: string;
  dimE: number;
  dimV: number;
  textModelName: string;
  imageModelName: string;
}

function parseArgs(argv: string[]): Args {
  const [mode, ...rest] = argv;
  if (!mode || !["articles", "images", "kb"].includes(mode)) {
    throw new Error("usage: extract articles|images|kb --in <path> --out <file> [--dim-e N] [--dim-v N]");
  }
  const flags = new Map<string, string>();
  for (let i = 0; i < rest.length; i += 2) {
    if (!rest[i].startsWith("--") || i + 1 >= rest.length) {
      throw new Error(`malformed flag near ${rest[i]}`);
    }
    flags.set(rest[i].slice(2), rest[i + 1]);
  }
  const required = (name: string): string => {
    const v = flags.get(name);
    if (v === undefined) throw new Error(`missing required flag --${name}`);
    return v;
  };
  return {
    mode,
    inPath: required("in"),
    outPath: required("out"),
    dimE: Number(flags.get("dim-e") ?? 1024),
    dimV: Number(flags.get("dim-v") ?? 2048),
    textModelName: flags.get("text-model") ?? "rules",
    imageModelName: flags.get("image-model") ?? "patchstats",
  };
}

function listFiles(dir: string, ext: string): string[] {
  return fs
    .readdirSync(dir)
    .filter((f) => f.endsWith(ext))
    .sort()
    .map((f) => path.join(dir, f));
}

export function run(argv: string[]): void {
  const args = parseArgs(argv);
  const options = {
    dimE: args.dimE,
    dimV: args.dimV,
    textModelName: args.textModelName,
    imageModelName: args.imageModelName,
  };
  if (args.mode === "articles") {
    const records = listFiles(args.inPath, ".txt").map((file) =>
      extractArticle(path.basename(file, ".txt"), fs.readFileSync(file, "utf8"), options)
    );
    writeJsonl(records, args.outPath);
    console.log(`wrote ${records.length} article records to ${args.outPath}`);
  } else if (args.mode === "images") {
    const records = listFiles(args.inPath, ".png").map((file) =>
      extractImage(path.basename(file, ".png"), file, options)
    );
    writeJsonl(records, args.outPath);
    console.log(`wrote ${records.length} image records to ${args.outPath}`);
  } else {
    const lines = fs
      .readFileSync(args.inPath, "utf8")
      .split("\n")
      .filter((l) => l.trim().length > 0);
    const baseDir = path.dirname(args.inPath);
    const records = lines.map((line) =>
      extractKbEntry(JSON.parse(line) as KbInput, baseDir, options)
    );
    writeJsonl(records, args.outPath);
    console.log(`wrote ${records.length} kb entries to ${args.outPath}`);
  }
}

if (require.main === module) {
  try {
    run(process.argv.slice(2));
  } catch (err) {
    if (
      err instanceof ModelUnavailable ||
      err instanceof DecodeError ||
      err instanceof SpanMismatch
    ) {
      console.error(`${err.constructor.name}: ${err.message}`);
    } else {
      console.error(String(err instanceof Error ? err.message : err));
    }
    process.exit(1);
  }
}
