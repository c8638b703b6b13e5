"""External multi-modal knowledge base: (named entity, image) pairs.

``kb.jsonl`` holds one ``{"wiki_id", "name", "entity_embedding", "image_feature"}``
record per line, with the feature payloads base64 float32.  Exactly one image
per entity; duplicates by wiki_id are dropped on load (first one wins).
"""

from __future__ import annotations

from dataclasses import dataclass, field
import numpy as np

from .core import DataConfig, _iter_jsonl, _require, _write_jsonl, b64_to_vec, vec_to_b64
from .errors import RatioError, SchemaError


@dataclass(frozen=True, eq=False)
class KnowledgeBaseEntry:
    wiki_id: str
    name: str
    entity_embedding: np.ndarray
    image_feature: np.ndarray

    def __post_init__(self):
        self.entity_embedding.flags.writeable = False
        self.image_feature.flags.writeable = False

    def __eq__(self, other):
        if not isinstance(other, KnowledgeBaseEntry):
            return NotImplemented
        return (
            (self.wiki_id, self.name) == (other.wiki_id, other.name)
            and np.array_equal(self.entity_embedding, other.entity_embedding)
            and np.array_equal(self.image_feature, other.image_feature)
        )


@dataclass(frozen=True)
class KnowledgeBase:
    entries: tuple[KnowledgeBaseEntry, ...]
    index: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.index and self.entries:
            object.__setattr__(
                self, "index", {e.wiki_id: i for i, e in enumerate(self.entries)}
            )
        if len(self.index) != len(self.entries):
            raise SchemaError("knowledge base index inconsistent with entries")

    def __len__(self) -> int:
        return len(self.entries)

    def entity_matrix(self) -> np.ndarray:
        if not self.entries:
            return np.zeros((0, 0), dtype=np.float32)
        return np.stack([e.entity_embedding for e in self.entries])

    def image_matrix(self) -> np.ndarray:
        if not self.entries:
            return np.zeros((0, 0), dtype=np.float32)
        return np.stack([e.image_feature for e in self.entries])


def entry_from_json(obj: dict, cfg: DataConfig) -> KnowledgeBaseEntry:
    where = f"kb entry {obj.get('wiki_id', '?')!r}"
    emb = _require(obj, "entity_embedding", where)
    img = _require(obj, "image_feature", where)
    if not isinstance(emb, str) or not isinstance(img, str):
        raise SchemaError(f"{where}: feature payloads must be base64 strings")
    return KnowledgeBaseEntry(
        wiki_id=str(_require(obj, "wiki_id", where)),
        name=str(_require(obj, "name", where)),
        entity_embedding=b64_to_vec(emb, cfg.d_e),
        image_feature=b64_to_vec(img, cfg.d_v),
    )


def entry_to_json(entry: KnowledgeBaseEntry) -> dict:
    return {
        "wiki_id": entry.wiki_id,
        "name": entry.name,
        "entity_embedding": vec_to_b64(entry.entity_embedding),
        "image_feature": vec_to_b64(entry.image_feature),
    }


def load_kb(path, cfg: DataConfig = DataConfig()) -> tuple[KnowledgeBase, int]:
    """Load kb.jsonl, dropping duplicate wiki_ids (first occurrence wins).

    Returns the base and the number of duplicates dropped.
    """
    entries: list[KnowledgeBaseEntry] = []
    seen: set[str] = set()
    duplicates = 0
    for obj in _iter_jsonl(path):
        entry = entry_from_json(obj, cfg)
        if entry.wiki_id in seen:
            duplicates += 1
            continue
        seen.add(entry.wiki_id)
        entries.append(entry)
    return KnowledgeBase(entries=tuple(entries)), duplicates


def save_kb(kb: KnowledgeBase, path) -> None:
    _write_jsonl([entry_to_json(e) for e in kb.entries], path)


def split_kb(kb: KnowledgeBase, ratio: float, seed: int) -> tuple[KnowledgeBase, KnowledgeBase]:
    """Deterministic disjoint train/held-out split; train gets round(ratio * n)."""
    if not (0.0 < ratio < 1.0):
        raise RatioError(f"split ratio must be in (0, 1), got {ratio}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(kb.entries))
    n_train = int(round(ratio * len(kb.entries)))
    train_idx = sorted(order[:n_train].tolist())
    held_idx = sorted(order[n_train:].tolist())
    train = KnowledgeBase(entries=tuple(kb.entries[i] for i in train_idx))
    held = KnowledgeBase(entries=tuple(kb.entries[i] for i in held_idx))
    return train, held


@dataclass(frozen=True)
class SynthKbConfig:
    """Clustered-latent generator settings for a desk-scale separable KB.

    Entity embeddings and image features of the same entry are linear images
    of one shared latent (cluster center + per-entry noise), so a linear
    matcher can recover the pairing exactly.
    """

    n_entities: int = 200
    n_clusters: int = 8
    d_e: int = 16
    d_v: int = 32
    d_latent: int = 12
    center_scale: float = 3.0
    within_scale: float = 1.0
    observation_noise: float = 0.01
    seed: int = 0


def synth_kb(cfg: SynthKbConfig) -> KnowledgeBase:
    """Generate a synthetic KB with known cluster structure."""
    rng = np.random.default_rng(cfg.seed)
    proj_e = rng.standard_normal((cfg.d_latent, cfg.d_e))
    proj_v = rng.standard_normal((cfg.d_latent, cfg.d_v))
    centers = cfg.center_scale * rng.standard_normal((cfg.n_clusters, cfg.d_latent))
    entries = []
    for i in range(cfg.n_entities):
        cluster = i % cfg.n_clusters
        latent = centers[cluster] + cfg.within_scale * rng.standard_normal(cfg.d_latent)
        emb = latent @ proj_e + cfg.observation_noise * rng.standard_normal(cfg.d_e)
        img = latent @ proj_v + cfg.observation_noise * rng.standard_normal(cfg.d_v)
        entries.append(
            KnowledgeBaseEntry(
                wiki_id=f"Q{i}",
                name=f"entity_{i}",
                entity_embedding=emb.astype(np.float32),
                image_feature=img.astype(np.float32),
            )
        )
    return KnowledgeBase(entries=tuple(entries))
