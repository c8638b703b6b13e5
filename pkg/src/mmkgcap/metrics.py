"""Caption evaluation: BLEU-4, ROUGE-L, CIDEr-D, entity F1, entity masking.

Metric tokenization (applied uniformly to hypotheses and references): the
text is lowercased, every ASCII punctuation character is replaced by a space,
and the result is split on whitespace.  Entity F1 instead compares raw
surface strings case-sensitively.

BLEU-4 is corpus-level with modified n-gram precisions floored at 1e-9
(so a zero precision never produces log 0 and a perfect match stays exactly
1.0) and the standard brevity penalty.  ROUGE-L is the mean per-instance
LCS F-measure with beta = 1.2.  CIDEr-D uses 1..4-gram TF-IDF vectors with
clipped products, a Gaussian length penalty (sigma = 6, lengths in tokens)
and a factor of 10, with document frequencies from the reference corpus.
"""

from __future__ import annotations

import string
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .core import CaptionRecord
from .errors import AlignmentError, CorpusTooSmall, EmptyCorpus, SchemaError

_PUNCT_TABLE = str.maketrans({ch: " " for ch in string.punctuation})

Entity = tuple[str, str]  # (surface, entity_class)


def tokenize_caption(text: str) -> list[str]:
    """Lowercase, replace punctuation with spaces, split on whitespace."""
    return text.lower().translate(_PUNCT_TABLE).split()


@dataclass(frozen=True)
class EvalInstance:
    hypothesis: tuple[str, ...]
    references: tuple[tuple[str, ...], ...]
    hyp_entities: tuple[Entity, ...] = ()
    ref_entities: tuple[Entity, ...] = ()

    def __post_init__(self):
        if not self.references:
            raise SchemaError("an EvalInstance needs at least one reference")


@dataclass(frozen=True)
class CorpusReport:
    bleu4: float
    rouge_l: float
    cider_d: float
    entity_precision: Optional[float]
    entity_recall: Optional[float]
    entity_f1: Optional[float]
    mode: str = "standard"

    def to_json(self) -> dict:
        return {
            "bleu4": self.bleu4,
            "rouge_l": self.rouge_l,
            "cider_d": self.cider_d,
            "entity_precision": self.entity_precision,
            "entity_recall": self.entity_recall,
            "entity_f1": self.entity_f1,
            "mode": self.mode,
        }


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu4(corpus: Sequence[EvalInstance]) -> float:
    """Corpus BLEU with 1..4-gram modified precisions and brevity penalty."""
    if not corpus:
        raise EmptyCorpus("bleu4 needs a non-empty corpus")
    matched = [0] * 4
    total = [0] * 4
    hyp_len = 0
    ref_len = 0
    for inst in corpus:
        hyp = inst.hypothesis
        hyp_len += len(hyp)
        # effective reference length: closest to the hypothesis, ties -> shorter
        ref_len += min(
            (abs(len(r) - len(hyp)), len(r)) for r in inst.references
        )[1]
        for n in range(1, 5):
            counts = _ngrams(hyp, n)
            max_ref = Counter()
            for ref in inst.references:
                ref_counts = _ngrams(ref, n)
                for gram, c in ref_counts.items():
                    if c > max_ref[gram]:
                        max_ref[gram] = c
            matched[n - 1] += sum(min(c, max_ref[gram]) for gram, c in counts.items())
            total[n - 1] += sum(counts.values())
    precisions = [
        max(matched[i] / total[i] if total[i] > 0 else 0.0, 1e-9) for i in range(4)
    ]
    if hyp_len == 0:
        return 0.0
    bp = 1.0 if hyp_len > ref_len else float(np.exp(1.0 - ref_len / hyp_len))
    return float(bp * np.exp(np.mean([np.log(p) for p in precisions])))


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for i in range(1, len(a) + 1):
        cur = [0] * (len(b) + 1)
        for j in range(1, len(b) + 1):
            if a[i - 1] == b[j - 1]:
                cur[j] = prev[j - 1] + 1
            else:
                cur[j] = max(prev[j], cur[j - 1])
        prev = cur
    return prev[len(b)]


def rouge_l(corpus: Sequence[EvalInstance], beta: float = 1.2) -> float:
    """Mean per-instance LCS F-measure (max over references)."""
    if not corpus:
        raise EmptyCorpus("rouge_l needs a non-empty corpus")
    scores = []
    for inst in corpus:
        best = 0.0
        for ref in inst.references:
            lcs = _lcs_length(inst.hypothesis, ref)
            if lcs == 0 or not inst.hypothesis or not ref:
                continue
            prec = lcs / len(inst.hypothesis)
            rec = lcs / len(ref)
            denom = rec + beta * beta * prec
            if denom > 0:
                best = max(best, (1 + beta * beta) * prec * rec / denom)
        scores.append(best)
    return float(np.mean(scores))


def cider_d(corpus: Sequence[EvalInstance], sigma: float = 6.0) -> float:
    """CIDEr-D over the corpus; document frequencies come from the references."""
    if not corpus:
        raise EmptyCorpus("cider_d needs a non-empty corpus")
    if len(corpus) < 2:
        raise CorpusTooSmall("cider_d needs at least 2 instances for document frequencies")
    doc_freq: Counter = Counter()
    for inst in corpus:
        seen = set()
        for ref in inst.references:
            for n in range(1, 5):
                seen.update(_ngrams(ref, n).keys())
        doc_freq.update(seen)
    log_images = np.log(float(len(corpus)))

    def tfidf(tokens: Sequence[str]):
        vecs = []
        norms = []
        for n in range(1, 5):
            counts = _ngrams(tokens, n)
            vec = {
                gram: c * (log_images - np.log(max(1.0, doc_freq[gram])))
                for gram, c in counts.items()
            }
            vecs.append(vec)
            norms.append(float(np.sqrt(sum(v * v for v in vec.values()))))
        return vecs, norms, len(tokens)

    total = 0.0
    for inst in corpus:
        hyp_vec, hyp_norm, hyp_len = tfidf(inst.hypothesis)
        inst_score = np.zeros(4)
        for ref in inst.references:
            ref_vec, ref_norm, ref_length = tfidf(ref)
            delta = float(hyp_len - ref_length)
            penalty = np.exp(-(delta * delta) / (2.0 * sigma * sigma))
            for n in range(4):
                val = sum(
                    min(w, ref_vec[n].get(gram, 0.0)) * ref_vec[n].get(gram, 0.0)
                    for gram, w in hyp_vec[n].items()
                )
                if hyp_norm[n] > 0 and ref_norm[n] > 0:
                    val /= hyp_norm[n] * ref_norm[n]
                else:
                    val = 0.0
                inst_score[n] += val * penalty
        total += float(np.mean(inst_score)) / len(inst.references) * 10.0
    return total / len(corpus)


def entity_f1(corpus: Sequence[EvalInstance]) -> tuple[float, float, float]:
    """Micro-averaged exact-surface entity precision/recall/F1 (case-sensitive)."""
    matched = 0
    n_hyp = 0
    n_ref = 0
    for inst in corpus:
        hyp_counts = Counter(surface for surface, _ in inst.hyp_entities)
        ref_counts = Counter(surface for surface, _ in inst.ref_entities)
        matched += sum((hyp_counts & ref_counts).values())
        n_hyp += sum(hyp_counts.values())
        n_ref += sum(ref_counts.values())
    precision = matched / n_hyp if n_hyp else 0.0
    recall = matched / n_ref if n_ref else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def mask_entities(tokens: Sequence[str], entities: Sequence[Entity]) -> list[str]:
    """Replace entity token spans by their class label, longest match first.

    Entity surfaces are normalized with the metric tokenizer before matching;
    unmatched entities leave the stream unchanged.  Idempotent because class
    labels are uppercase while metric tokens are lowercased.
    """
    patterns = []
    for surface, cls in entities:
        toks = tuple(tokenize_caption(surface))
        if toks:
            patterns.append((toks, cls))
    patterns.sort(key=lambda p: -len(p[0]))
    out: list[str] = []
    i = 0
    tokens = list(tokens)
    while i < len(tokens):
        for toks, cls in patterns:
            if tuple(tokens[i : i + len(toks)]) == toks:
                out.append(cls)
                i += len(toks)
                break
        else:
            out.append(tokens[i])
            i += 1
    return out


def gazetteer_entities(text: str, gazetteer: Sequence[Entity]) -> list[Entity]:
    """Trivial recognizer: longest-match scan of known surfaces in raw text.

    The text splits on whitespace with edge punctuation stripped per token;
    surfaces match case-sensitively.
    """
    tokens = [tok.strip(string.punctuation) for tok in text.split()]
    patterns = []
    for surface, cls in gazetteer:
        toks = tuple(surface.split())
        if toks:
            patterns.append((toks, surface, cls))
    patterns.sort(key=lambda p: -len(p[0]))
    found: list[Entity] = []
    i = 0
    while i < len(tokens):
        for toks, surface, cls in patterns:
            if tuple(tokens[i : i + len(toks)]) == toks:
                found.append((surface, cls))
                i += len(toks)
                break
        else:
            i += 1
    return found


def evaluate_corpus(
    hyps: Sequence[CaptionRecord],
    refs: Sequence[CaptionRecord],
    mode: str = "standard",
    hyp_entities: Optional[Mapping[str, Sequence[Entity]]] = None,
    ref_entities: Optional[Mapping[str, Sequence[Entity]]] = None,
) -> CorpusReport:
    """Full corpus report; hyps and refs align by image_id.

    Entities are supplied per image id.  When hypothesis entities are absent
    the reference surfaces double as a gazetteer scanned over each hypothesis.
    In entity_masked mode both sides are masked with their own entity lists
    and the entity F1 columns are omitted.
    """
    if mode not in ("standard", "entity_masked"):
        raise SchemaError(f"unknown evaluation mode {mode!r}")
    hyp_by_id: dict[str, CaptionRecord] = {}
    for rec in hyps:
        if rec.image_id in hyp_by_id:
            raise AlignmentError(f"duplicate hypothesis for image {rec.image_id!r}")
        hyp_by_id[rec.image_id] = rec
    ref_by_id: dict[str, CaptionRecord] = {}
    for rec in refs:
        if rec.image_id in ref_by_id:
            raise AlignmentError(f"duplicate reference for image {rec.image_id!r}")
        ref_by_id[rec.image_id] = rec
    if set(hyp_by_id) != set(ref_by_id):
        missing = set(hyp_by_id) ^ set(ref_by_id)
        raise AlignmentError(f"hypothesis/reference ids do not align: {sorted(missing)[:5]}")
    if not hyp_by_id:
        raise EmptyCorpus("no aligned caption pairs")

    ref_entities = ref_entities or {}
    instances = []
    for image_id in sorted(hyp_by_id):
        hyp_rec = hyp_by_id[image_id]
        ref_rec = ref_by_id[image_id]
        refs_ents = tuple(ref_entities.get(image_id, ()))
        if hyp_entities is not None:
            hyp_ents = tuple(hyp_entities.get(image_id, ()))
        else:
            hyp_ents = tuple(gazetteer_entities(hyp_rec.caption_text, refs_ents))
        hyp_tokens = tokenize_caption(hyp_rec.caption_text)
        ref_tokens = tokenize_caption(ref_rec.caption_text)
        if mode == "entity_masked":
            hyp_tokens = mask_entities(hyp_tokens, hyp_ents)
            ref_tokens = mask_entities(ref_tokens, refs_ents)
        instances.append(
            EvalInstance(
                hypothesis=tuple(hyp_tokens),
                references=(tuple(ref_tokens),),
                hyp_entities=hyp_ents,
                ref_entities=refs_ents,
            )
        )
    scores = {
        "bleu4": bleu4(instances),
        "rouge_l": rouge_l(instances),
        "cider_d": cider_d(instances),
    }
    if mode == "standard":
        precision, recall, f1 = entity_f1(instances)
        return CorpusReport(
            **scores, entity_precision=precision, entity_recall=recall, entity_f1=f1
        )
    return CorpusReport(**scores, entity_precision=None, entity_recall=None, entity_f1=None, mode=mode)
