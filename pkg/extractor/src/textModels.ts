/**
 * Pluggable text-side models (NER, open relation extraction, coreference).
 *
 * The default backend is deterministic and rule-based: capitalized-run
 * mention detection with gazetteer classing, verb-pattern relation
 * extraction between adjacent mentions in a sentence, and exact-surface
 * coreference. It needs no downloaded weights, so extraction output is
 * stable across machines; real models can be swapped in behind the same
 * interface.
 */

import { ModelUnavailable } from "./schema";
import { EntityClass } from "./schema";

export interface Token {
  text: string;
  charStart: number; // character offsets; converted to bytes by the caller
  charEnd: number;
  sentenceStart: boolean;
  gapFromPrev: string; // literal text between the previous token and this one
}

export interface Mention {
  surface: string;
  charStart: number;
  charEnd: number;
  entityClass: EntityClass;
  gazetteer: boolean;
}

export interface RelationHit {
  headIndex: number; // indices into the mention list
  tailIndex: number;
  text: string;
  charStart: number;
  charEnd: number;
}

export interface TextModel {
  name: string;
  mentions(tokens: Token[]): Mention[];
  relations(tokens: Token[], mentions: Mention[]): RelationHit[];
  corefGroups(mentions: Mention[]): number[][];
}

const PERSON_HINTS = new Set([
  "Alonso", "Hamilton", "Fernando", "Lewis", "Bottas", "Norris", "Sainz",
  "Saikawa", "Senard", "Ghosn", "Maria", "John", "Anna", "Hitoro",
]);
const ORGS = new Set([
  "Toyota", "Ferrari", "Renault", "Nissan", "McLaren", "Honda", "Alpine",
  "NASA", "UNICEF", "Wikipedia",
]);
const ORG_SUFFIX = new Set(["Inc", "Corp", "Motors", "Team", "Ltd", "Group", "FC"]);
const GPES = new Set([
  "Monza", "Japan", "France", "Tokyo", "Paris", "Texas", "Austin", "Suzuka",
  "Spa", "Italy", "Yokohama",
]);
const FACILITY_SUFFIX = new Set(["Stadium", "Circuit", "Museum", "Airport", "Bridge"]);
const MONTHS = new Set([
  "January", "February", "March", "April", "May", "June", "July",
  "August", "September", "October", "November", "December",
]);
const VERBS = new Set([
  "is", "was", "are", "were", "won", "wins", "drives", "drove", "joined",
  "joins", "leads", "led", "visited", "visits", "met", "meets", "signed",
  "signs", "bought", "announced", "said", "celebrated", "celebrates",
  "races", "raced", "beat", "defeated", "acquired", "hired", "launched",
  "unveiled", "partnered", "chairs", "runs", "ran",
]);

export function tokenize(text: string): Token[] {
  const tokens: Token[] = [];
  const re = /\S+/g;
  let match: RegExpExecArray | null;
  let sentenceStart = true;
  let prevEnd = 0;
  while ((match = re.exec(text)) !== null) {
    let word = match[0];
    let start = match.index;
    // strip surrounding punctuation but remember trailing sentence enders
    const endsSentence = /[.!?]$/.test(word);
    const leading = word.match(/^[("'`[]+/);
    if (leading) {
      start += leading[0].length;
      word = word.slice(leading[0].length);
    }
    const trailing = word.match(/[)"'`\],.!?;:]+$/);
    if (trailing) {
      word = word.slice(0, word.length - trailing[0].length);
    }
    if (word.length > 0) {
      tokens.push({
        text: word,
        charStart: start,
        charEnd: start + word.length,
        sentenceStart,
        gapFromPrev: text.slice(prevEnd, start),
      });
      prevEnd = start + word.length;
    }
    sentenceStart = endsSentence;
  }
  return tokens;
}

function isCapitalized(word: string): boolean {
  return /^[A-Z][A-Za-z0-9'-]*$/.test(word);
}

function inAnyGazetteer(word: string): boolean {
  return (
    PERSON_HINTS.has(word) ||
    ORGS.has(word) ||
    ORG_SUFFIX.has(word) ||
    GPES.has(word) ||
    FACILITY_SUFFIX.has(word) ||
    MONTHS.has(word)
  );
}

function classify(words: string[]): EntityClass {
  const last = words[words.length - 1];
  if (words.every((w) => MONTHS.has(w) || /^\d{1,4},?$/.test(w))) return "DATE";
  if (ORGS.has(words[0]) || words.some((w) => ORGS.has(w)) || ORG_SUFFIX.has(last)) return "ORG";
  if (FACILITY_SUFFIX.has(last)) return "FACILITY";
  if (words.some((w) => GPES.has(w))) return "GPE";
  if (words.some((w) => PERSON_HINTS.has(w))) return "PERSON";
  if (words.length >= 2) return "PERSON";
  return "OTHER";
}

class RuleBasedTextModel implements TextModel {
  name = "rules";

  mentions(tokens: Token[]): Mention[] {
    const found: Mention[] = [];
    let i = 0;
    while (i < tokens.length) {
      const tok = tokens[i];
      // standalone year
      if (/^(19|20)\d{2}$/.test(tok.text)) {
        found.push({
          surface: tok.text,
          charStart: tok.charStart,
          charEnd: tok.charEnd,
          entityClass: "DATE",
          gazetteer: false,
        });
        i += 1;
        continue;
      }
      if (!isCapitalized(tok.text)) {
        i += 1;
        continue;
      }
      // a run may only extend over a literal single space within one sentence,
      // so the joined surface equals the text slice exactly
      let j = i;
      while (
        j + 1 < tokens.length &&
        isCapitalized(tokens[j + 1].text) &&
        !tokens[j + 1].sentenceStart &&
        tokens[j + 1].gapFromPrev === " "
      ) {
        j += 1;
      }
      const words = tokens.slice(i, j + 1).map((t) => t.text);
      const runLen = j - i + 1;
      const keep =
        runLen >= 2 || !tokens[i].sentenceStart || inAnyGazetteer(tokens[i].text);
      if (keep) {
        found.push({
          surface: words.join(" "),
          charStart: tokens[i].charStart,
          charEnd: tokens[j].charEnd,
          entityClass: classify(words),
          gazetteer: words.some(inAnyGazetteer),
        });
      }
      i = j + 1;
    }
    return found;
  }

  relations(tokens: Token[], mentions: Mention[]): RelationHit[] {
    const hits: RelationHit[] = [];
    const mentionAt = new Map<number, number>(); // token index -> mention index
    for (let m = 0; m < mentions.length; m++) {
      for (let t = 0; t < tokens.length; t++) {
        if (tokens[t].charStart === mentions[m].charStart) {
          mentionAt.set(t, m);
        }
      }
    }
    const mentionTokens = [...mentionAt.keys()].sort((a, b) => a - b);
    for (let k = 0; k + 1 < mentionTokens.length; k++) {
      const leftTok = mentionTokens[k];
      const rightTok = mentionTokens[k + 1];
      const left = mentions[mentionAt.get(leftTok)!];
      const right = mentions[mentionAt.get(rightTok)!];
      // stay within one sentence
      let leftEnd = leftTok;
      while (leftEnd + 1 < tokens.length && tokens[leftEnd + 1].charStart < left.charEnd) {
        leftEnd += 1;
      }
      const gap = tokens.slice(leftEnd + 1, rightTok);
      if (gap.length < 1 || gap.length > 6) continue;
      if (gap.some((t) => t.sentenceStart)) continue;
      if (!gap.some((t) => VERBS.has(t.text.toLowerCase()))) continue;
      if (gap.some((t) => isCapitalized(t.text))) continue;
      hits.push({
        headIndex: mentionAt.get(leftTok)!,
        tailIndex: mentionAt.get(rightTok)!,
        text: gap.map((t) => t.text).join(" "),
        charStart: gap[0].charStart,
        charEnd: gap[gap.length - 1].charEnd,
      });
    }
    return hits;
  }

  corefGroups(mentions: Mention[]): number[][] {
    const bySurface = new Map<string, number[]>();
    mentions.forEach((m, idx) => {
      const group = bySurface.get(m.surface) ?? [];
      group.push(idx);
      bySurface.set(m.surface, group);
    });
    return [...bySurface.values()].filter((g) => g.length >= 2);
  }
}

const TEXT_MODELS: Record<string, () => TextModel> = {
  rules: () => new RuleBasedTextModel(),
};

export function textModel(name: string): TextModel {
  const factory = TEXT_MODELS[name];
  if (!factory) {
    throw new ModelUnavailable(
      `text model ${JSON.stringify(name)} is not installed; available: ${Object.keys(TEXT_MODELS).join(", ")}`
    );
  }
  return factory();
}
