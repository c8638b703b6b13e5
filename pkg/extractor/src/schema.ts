/** Output record shapes: the consumer toolkit's JSONL wire formats. */

export type EntityClass =
  | "PERSON"
  | "ORG"
  | "FACILITY"
  | "ARTIFACT"
  | "GPE"
  | "DATE"
  | "OTHER";

export interface EntityRecord {
  id: string;
  surface: string;
  entity_class: EntityClass;
  char_span: [number, number]; // byte offsets into the UTF-8 text
  wiki_id: string | null;
  embedding: string | null; // base64 float32, d_e entries
}

export interface TripleRecord {
  head_id: string;
  relation_text: string;
  relation_span: [number, number];
  tail_id: string;
  relation_embedding: string | null;
}

export interface ArticleRecord {
  article_id: string;
  text: string;
  entities: EntityRecord[];
  triples: TripleRecord[];
  coref_chains: string[][];
  token_features: string | null; // base64 float32, L_T x d_e row-major
}

export interface DetectionRecord {
  kind: "OBJECT" | "FACE";
  bbox: [number, number, number, number]; // x, y, w, h pixels
  score: number;
  class_label: string;
  feature: string; // base64 float32, d_v entries
}

export interface ImageRecord {
  image_id: string;
  global_features: string; // base64 float32, R x d_v row-major
  detections: DetectionRecord[];
}

export interface KbEntryRecord {
  wiki_id: string;
  name: string;
  entity_embedding: string;
  image_feature: string;
}

export class ModelUnavailable extends Error {}
export class SpanMismatch extends Error {}
export class DecodeError extends Error {}
