"""Desk-scale synthetic corpus: articles, images, captions and a matching KB.

Every named entity in the pool owns a latent vector; entity embeddings and
visual features are fixed linear images of that latent, shared with the KB
entries, so a matcher trained on the KB can link article entities to the
image's detections.  Captions mention the sampled entities, which makes exact
reproduction measurable and gives entity F1 a ground truth.

With ``graph_only_signal`` the article token features and the image grid are
identical across samples; the only way to tell samples apart is through the
graph nodes.  That corpus separates the full model from the no-graph ablation.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import (
    ArticleAnnotations,
    CaptionRecord,
    CorefChain,
    DataConfig,
    Detection,
    DetectionKind,
    EntityClass,
    EntityMention,
    ImageAnnotations,
    RelationTriple,
    save_articles,
    save_captions,
    save_images,
)
from .kb import KnowledgeBase, KnowledgeBaseEntry, save_kb

PERSONS = ("Alonso", "Hamilton", "Bottas", "Norris", "Sainz", "Ocon", "Gasly", "Perez")
ORGS = ("Toyota", "Ferrari", "McLaren", "Renault", "Honda", "Alpine")
VERBS = ("drives for", "races with", "leads", "joins")
PLACES = ("Monza", "Suzuka", "Spa", "Austin", "Imola")


@dataclass(frozen=True)
class ToyCorpusConfig:
    n_samples: int = 50
    d_e: int = 16
    d_v: int = 32
    d_latent: int = 12
    latent_scale: float = 3.0
    grid_rows: int = 4
    n_persons: int = 8
    n_orgs: int = 6
    graph_only_signal: bool = False
    seed: int = 0


@dataclass
class ToyCorpus:
    articles: list[ArticleAnnotations]
    images: list[ImageAnnotations]
    captions: list[CaptionRecord]
    kb: KnowledgeBase
    ref_entities: dict[str, list[tuple[str, str]]]  # image_id -> (surface, class)
    data_config: DataConfig


def _byte_span(text: str, surface: str, from_offset: int = 0) -> tuple[int, int]:
    # toy texts are ASCII, so byte offsets equal character offsets
    start = text.index(surface, from_offset)
    return start, start + len(surface)


def generate_toy_corpus(cfg: ToyCorpusConfig = ToyCorpusConfig()) -> ToyCorpus:
    rng = np.random.default_rng(cfg.seed)
    persons = PERSONS[: cfg.n_persons]
    orgs = ORGS[: cfg.n_orgs]
    pool = [(name, EntityClass.PERSON) for name in persons] + [
        (name, EntityClass.ORG) for name in orgs
    ]

    proj_e = rng.standard_normal((cfg.d_latent, cfg.d_e))
    proj_v = rng.standard_normal((cfg.d_latent, cfg.d_v))
    latents = {
        name: cfg.latent_scale * rng.standard_normal(cfg.d_latent) for name, _ in pool
    }

    def entity_vec(name: str) -> np.ndarray:
        return (latents[name] @ proj_e).astype(np.float32)

    def visual_vec(name: str) -> np.ndarray:
        return (latents[name] @ proj_v).astype(np.float32)

    kb_entries = tuple(
        KnowledgeBaseEntry(
            wiki_id=f"Q_{name}",
            name=name,
            entity_embedding=entity_vec(name),
            image_feature=visual_vec(name),
        )
        for name, _ in pool
    )

    combos = list(itertools.product(range(len(persons)), range(len(orgs)), range(len(VERBS))))
    rng.shuffle(combos)
    if cfg.n_samples > len(combos):
        raise ValueError(f"cannot draw {cfg.n_samples} distinct samples from {len(combos)} combos")

    shared_tokens = rng.standard_normal((8, cfg.d_e)).astype(np.float32)
    shared_grid = rng.standard_normal((cfg.grid_rows, cfg.d_v)).astype(np.float32)

    articles, images, captions = [], [], []
    ref_entities: dict[str, list[tuple[str, str]]] = {}
    for i in range(cfg.n_samples):
        p_idx, o_idx, v_idx = combos[i]
        person, org, verb = persons[p_idx], orgs[o_idx], VERBS[v_idx]
        place = PLACES[i % len(PLACES)]
        article_id = f"art{i:03d}"
        image_id = f"img{i:03d}"
        text = f"{person} {verb} {org} at {place}. {person} celebrated the result."

        p1 = _byte_span(text, person)
        o1 = _byte_span(text, org)
        v1 = _byte_span(text, verb)
        p2 = _byte_span(text, person, p1[1])
        mentions = (
            EntityMention("e0", person, EntityClass.PERSON, p1, f"Q_{person}", entity_vec(person)),
            EntityMention("e1", org, EntityClass.ORG, o1, f"Q_{org}", entity_vec(org)),
            EntityMention("e2", person, EntityClass.PERSON, p2, f"Q_{person}", entity_vec(person)),
        )
        triple = RelationTriple(
            head_id="e0",
            relation_text=verb,
            relation_span=v1,
            tail_id="e1",
            relation_embedding=None,
        )
        n_tokens = len(text.split())
        if cfg.graph_only_signal:
            token_features = np.repeat(shared_tokens[:1], n_tokens, axis=0)
            grid = shared_grid
        else:
            token_features = rng.standard_normal((n_tokens, cfg.d_e)).astype(np.float32)
            grid = rng.standard_normal((cfg.grid_rows, cfg.d_v)).astype(np.float32)
        articles.append(
            ArticleAnnotations(
                article_id=article_id,
                text=text,
                entities=mentions,
                triples=(triple,),
                coref_chains=(CorefChain(("e0", "e2")),),
                token_features=token_features,
            )
        )
        detections = (
            Detection(
                kind=DetectionKind.FACE,
                bbox=(8.0, 8.0, 32.0, 32.0),
                score=float(0.6 + 0.3 * rng.random()),
                feature=visual_vec(person),
            ),
            Detection(
                kind=DetectionKind.OBJECT,
                bbox=(50.0, 20.0, 60.0, 40.0),
                score=float(0.5 + 0.4 * rng.random()),
                class_label="car",
                feature=visual_vec(org),
            ),
        )
        images.append(
            ImageAnnotations(image_id=image_id, global_features=grid, detections=detections)
        )
        if cfg.graph_only_signal:
            caption = f"{person} leads {org}"
        else:
            caption = f"{person} {verb} {org} in {place}"
        captions.append(
            CaptionRecord(image_id=image_id, article_id=article_id, caption_text=caption)
        )
        ref_entities[image_id] = [(person, "PERSON"), (org, "ORG")]

    return ToyCorpus(
        articles=articles,
        images=images,
        captions=captions,
        kb=KnowledgeBase(entries=kb_entries),
        ref_entities=ref_entities,
        data_config=DataConfig(d_e=cfg.d_e, d_v=cfg.d_v),
    )


def write_corpus(corpus: ToyCorpus, out_dir) -> None:
    """Write articles/images/captions/kb/entities files for the CLI pipeline."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_articles(corpus.articles, out / "articles.jsonl")
    save_images(corpus.images, out / "images.jsonl")
    save_captions(corpus.captions, out / "captions.jsonl")
    save_kb(corpus.kb, out / "kb.jsonl")
    with open(out / "entities.jsonl", "w", encoding="utf-8") as fh:
        for image_id, ents in corpus.ref_entities.items():
            fh.write(
                json.dumps(
                    {
                        "image_id": image_id,
                        "entities": [
                            {"surface": s, "entity_class": c} for s, c in ents
                        ],
                    }
                )
                + "\n"
            )
