"""Domain types and JSONL (de)serialization shared by the whole toolkit.

File formats
------------
``articles.jsonl``  one article record per line::

    {"article_id": ..., "text": ...,
     "entities": [{"id", "surface", "entity_class", "char_span": [s, e],
                   "wiki_id", "embedding"}],
     "triples":  [{"head_id", "relation_text", "relation_span": [s, e],
                   "tail_id", "relation_embedding"}],
     "coref_chains": [[id, ...], ...],
     "token_features": <b64 or null>}

``images.jsonl``  one image record per line::

    {"image_id": ..., "global_features": <b64>,
     "detections": [{"kind", "bbox": [x, y, w, h], "score",
                     "class_label", "feature"}]}

``captions.jsonl``  ``{"image_id", "article_id", "caption_text"}`` per line.

``graph.json``  a single graph: ``{"d_e", "d_v", "nodes": [...], "edges": [...]}``.

All feature vectors are base64-encoded little-endian 32-bit floats, so fixture
files are diff-able and round-trip bit-exactly.  Character spans are byte
offsets into the UTF-8 encoding of the article text.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionError, ReferenceError, SchemaError


class EntityClass(Enum):
    PERSON = "PERSON"
    ORG = "ORG"
    FACILITY = "FACILITY"
    ARTIFACT = "ARTIFACT"
    GPE = "GPE"
    DATE = "DATE"
    OTHER = "OTHER"


class DetectionKind(Enum):
    OBJECT = "OBJECT"
    FACE = "FACE"


class NodeKind(Enum):
    HEAD = "HEAD"
    RELATION = "RELATION"
    TAIL = "TAIL"
    OBJECT = "OBJECT"
    FACE = "FACE"


TEXT_NODE_KINDS = frozenset({NodeKind.HEAD, NodeKind.RELATION, NodeKind.TAIL})
IMAGE_NODE_KINDS = frozenset({NodeKind.OBJECT, NodeKind.FACE})


class EdgeKind(Enum):
    TRIPLE = "TRIPLE"
    COREF_REWIRE = "COREF_REWIRE"
    CROSS_MODAL = "CROSS_MODAL"


@dataclass(frozen=True)
class DataConfig:
    """Dimensions and length limits; production-scale defaults, desk tests shrink them."""

    d_e: int = 1024
    d_v: int = 2048
    max_article_len: int = 512
    max_caption_len: int = 50


# ---------------------------------------------------------------------------
# base64 float32 payloads


def vec_to_b64(vec: np.ndarray) -> str:
    arr = np.ascontiguousarray(np.asarray(vec, dtype="<f4"))
    return base64.b64encode(arr.tobytes()).decode("ascii")


def b64_to_vec(payload: str, expected_dim: Optional[int] = None) -> np.ndarray:
    try:
        raw = base64.b64decode(payload.encode("ascii"), validate=True)
    except Exception as exc:
        raise SchemaError(f"invalid base64 payload: {exc}") from exc
    if len(raw) % 4 != 0:
        raise SchemaError("float payload length is not a multiple of 4 bytes")
    arr = np.frombuffer(raw, dtype="<f4").copy()
    if expected_dim is not None and arr.shape[0] != expected_dim:
        raise DimensionError(f"expected vector of dim {expected_dim}, got {arr.shape[0]}")
    return arr


def mat_to_b64(mat: np.ndarray) -> str:
    arr = np.ascontiguousarray(np.asarray(mat, dtype="<f4"))
    if arr.ndim != 2:
        raise DimensionError(f"expected a 2-d matrix, got shape {arr.shape}")
    return vec_to_b64(arr.reshape(-1))


def b64_to_mat(payload: str, cols: int) -> np.ndarray:
    flat = b64_to_vec(payload)
    if cols <= 0:
        raise DimensionError("matrix column count must be positive")
    if flat.shape[0] % cols != 0:
        raise DimensionError(
            f"payload of {flat.shape[0]} floats does not tile into rows of {cols}"
        )
    return flat.reshape(-1, cols)


def _freeze(arr: Optional[np.ndarray]) -> Optional[np.ndarray]:
    if arr is not None:
        arr.flags.writeable = False
    return arr


def _same_opt_array(a: Optional[np.ndarray], b: Optional[np.ndarray]) -> bool:
    if a is None or b is None:
        return a is None and b is None
    return a.shape == b.shape and np.array_equal(a, b)


# ---------------------------------------------------------------------------
# article-side types


@dataclass(frozen=True, eq=False)
class EntityMention:
    id: str
    surface: str
    entity_class: EntityClass
    char_span: tuple[int, int]
    wiki_id: Optional[str] = None
    embedding: Optional[np.ndarray] = None

    def __post_init__(self):
        start, end = self.char_span
        if not (isinstance(start, int) and isinstance(end, int)) or start < 0 or start >= end:
            raise SchemaError(f"entity {self.id!r}: char_span must satisfy 0 <= start < end")
        _freeze(self.embedding)

    def __eq__(self, other):
        if not isinstance(other, EntityMention):
            return NotImplemented
        return (
            (self.id, self.surface, self.entity_class, self.char_span, self.wiki_id)
            == (other.id, other.surface, other.entity_class, other.char_span, other.wiki_id)
            and _same_opt_array(self.embedding, other.embedding)
        )


@dataclass(frozen=True, eq=False)
class RelationTriple:
    head_id: str
    relation_text: str
    relation_span: tuple[int, int]
    tail_id: str
    relation_embedding: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.relation_text:
            raise SchemaError("relation_text must be non-empty")
        if self.head_id == self.tail_id:
            raise SchemaError(f"triple head and tail must differ, both are {self.head_id!r}")
        start, end = self.relation_span
        if start < 0 or start >= end:
            raise SchemaError("relation_span must satisfy 0 <= start < end")
        _freeze(self.relation_embedding)

    def __eq__(self, other):
        if not isinstance(other, RelationTriple):
            return NotImplemented
        return (
            (self.head_id, self.relation_text, self.relation_span, self.tail_id)
            == (other.head_id, other.relation_text, other.relation_span, other.tail_id)
            and _same_opt_array(self.relation_embedding, other.relation_embedding)
        )


@dataclass(frozen=True)
class CorefChain:
    mention_ids: tuple[str, ...]

    def __post_init__(self):
        if len(self.mention_ids) < 2:
            raise SchemaError("coref chain needs at least 2 mentions")
        if len(set(self.mention_ids)) != len(self.mention_ids):
            raise SchemaError("coref chain mention ids must be distinct")


@dataclass(frozen=True, eq=False)
class ArticleAnnotations:
    article_id: str
    text: str
    entities: tuple[EntityMention, ...] = ()
    triples: tuple[RelationTriple, ...] = ()
    coref_chains: tuple[CorefChain, ...] = ()
    token_features: Optional[np.ndarray] = None

    def __post_init__(self):
        _freeze(self.token_features)

    def entity_by_id(self, entity_id: str) -> EntityMention:
        for ent in self.entities:
            if ent.id == entity_id:
                return ent
        raise ReferenceError(f"unknown entity id {entity_id!r}")

    def __eq__(self, other):
        if not isinstance(other, ArticleAnnotations):
            return NotImplemented
        return (
            self.article_id == other.article_id
            and self.text == other.text
            and self.entities == other.entities
            and self.triples == other.triples
            and self.coref_chains == other.coref_chains
            and _same_opt_array(self.token_features, other.token_features)
        )


def validate_article(art: ArticleAnnotations, cfg: DataConfig) -> ArticleAnnotations:
    """Check all cross-field invariants; returns the article unchanged."""
    text_len = len(art.text.encode("utf-8"))
    seen_ids = set()
    for ent in art.entities:
        if ent.id in seen_ids:
            raise SchemaError(f"duplicate entity id {ent.id!r} in article {art.article_id!r}")
        seen_ids.add(ent.id)
        if ent.char_span[1] > text_len:
            raise SchemaError(
                f"entity {ent.id!r} span {ent.char_span} exceeds text byte length {text_len}"
            )
        if ent.embedding is not None and ent.embedding.shape != (cfg.d_e,):
            raise DimensionError(
                f"entity {ent.id!r}: embedding dim {ent.embedding.shape} != ({cfg.d_e},)"
            )
    for tri in art.triples:
        for ref in (tri.head_id, tri.tail_id):
            if ref not in seen_ids:
                raise ReferenceError(f"triple cites unknown entity id {ref!r}")
        if tri.relation_embedding is not None and tri.relation_embedding.shape != (cfg.d_e,):
            raise DimensionError(f"relation embedding dim != ({cfg.d_e},)")
    chained = set()
    spans = {ent.id: ent.char_span for ent in art.entities}
    for chain in art.coref_chains:
        for mid in chain.mention_ids:
            if mid not in seen_ids:
                raise ReferenceError(f"coref chain cites unknown entity id {mid!r}")
            if mid in chained:
                raise SchemaError(f"entity {mid!r} appears in more than one coref chain")
            chained.add(mid)
        starts = [spans[mid][0] for mid in chain.mention_ids]
        if starts != sorted(starts):
            raise SchemaError("coref chain mention ids must be sorted by span start")
    if art.token_features is not None:
        if art.token_features.ndim != 2 or art.token_features.shape[1] != cfg.d_e:
            raise DimensionError(
                f"token_features must be (L_T, {cfg.d_e}), got {art.token_features.shape}"
            )
        if art.token_features.shape[0] > cfg.max_article_len:
            raise SchemaError(
                f"token_features has {art.token_features.shape[0]} rows "
                f"> max article length {cfg.max_article_len}"
            )
    return art


# ---------------------------------------------------------------------------
# image-side types


@dataclass(frozen=True, eq=False)
class Detection:
    kind: DetectionKind
    bbox: tuple[float, float, float, float]
    score: float
    feature: np.ndarray
    class_label: str = ""

    def __post_init__(self):
        x, y, w, h = self.bbox
        if w <= 0 or h <= 0:
            raise SchemaError(f"detection bbox must have positive extent, got w={w}, h={h}")
        if not (0.0 <= self.score <= 1.0):
            raise SchemaError(f"detection score {self.score} outside [0, 1]")
        _freeze(self.feature)

    def __eq__(self, other):
        if not isinstance(other, Detection):
            return NotImplemented
        return (
            (self.kind, self.bbox, self.score, self.class_label)
            == (other.kind, other.bbox, other.score, other.class_label)
            and np.array_equal(self.feature, other.feature)
        )


@dataclass(frozen=True, eq=False)
class ImageAnnotations:
    image_id: str
    global_features: np.ndarray
    detections: tuple[Detection, ...] = ()

    def __post_init__(self):
        _freeze(self.global_features)

    def __eq__(self, other):
        if not isinstance(other, ImageAnnotations):
            return NotImplemented
        return (
            self.image_id == other.image_id
            and np.array_equal(self.global_features, other.global_features)
            and self.detections == other.detections
        )


def validate_image(img: ImageAnnotations, cfg: DataConfig) -> ImageAnnotations:
    if img.global_features.ndim != 2 or img.global_features.shape[1] != cfg.d_v:
        raise DimensionError(
            f"global_features must be (R, {cfg.d_v}), got {img.global_features.shape}"
        )
    for i, det in enumerate(img.detections):
        if det.feature.shape != (cfg.d_v,):
            raise DimensionError(
                f"detection {i}: feature dim {det.feature.shape} != ({cfg.d_v},)"
            )
    return img


# ---------------------------------------------------------------------------
# graph types


@dataclass(frozen=True, eq=False)
class GraphNode:
    node_id: str
    kind: NodeKind
    label: str
    feature: np.ndarray
    source_ref: str = ""

    def __post_init__(self):
        _freeze(self.feature)

    @property
    def is_text(self) -> bool:
        return self.kind in TEXT_NODE_KINDS

    def __eq__(self, other):
        if not isinstance(other, GraphNode):
            return NotImplemented
        return (
            (self.node_id, self.kind, self.label, self.source_ref)
            == (other.node_id, other.kind, other.label, other.source_ref)
            and np.array_equal(self.feature, other.feature)
        )


@dataclass(frozen=True)
class GraphEdge:
    src: str
    dst: str
    kind: EdgeKind


@dataclass(frozen=True, eq=False)
class MultiModalGraph:
    nodes: tuple[GraphNode, ...] = ()
    edges: tuple[GraphEdge, ...] = ()

    def node_ids(self) -> list[str]:
        return [n.node_id for n in self.nodes]

    def node_by_id(self, node_id: str) -> GraphNode:
        for n in self.nodes:
            if n.node_id == node_id:
                return n
        raise ReferenceError(f"unknown node id {node_id!r}")

    def __eq__(self, other):
        if not isinstance(other, MultiModalGraph):
            return NotImplemented
        return self.nodes == other.nodes and self.edges == other.edges


def validate_graph(graph: MultiModalGraph, cfg: Optional[DataConfig] = None) -> MultiModalGraph:
    ids = set()
    for node in graph.nodes:
        if node.node_id in ids:
            raise SchemaError(f"duplicate node id {node.node_id!r}")
        ids.add(node.node_id)
        if cfg is not None:
            want = cfg.d_e if node.is_text else cfg.d_v
            if node.feature.shape != (want,):
                raise DimensionError(
                    f"node {node.node_id!r}: feature dim {node.feature.shape} != ({want},)"
                )
    kinds = {n.node_id: n.kind for n in graph.nodes}
    seen_edges = set()
    for edge in graph.edges:
        for endpoint in (edge.src, edge.dst):
            if endpoint not in ids:
                raise SchemaError(f"edge endpoint {endpoint!r} is not a node")
        key = (edge.src, edge.dst, edge.kind)
        if key in seen_edges:
            raise SchemaError(f"duplicate edge {key}")
        seen_edges.add(key)
        if edge.kind is EdgeKind.CROSS_MODAL:
            if kinds[edge.src] not in TEXT_NODE_KINDS or kinds[edge.dst] not in IMAGE_NODE_KINDS:
                raise SchemaError(
                    f"CROSS_MODAL edge {edge.src!r}->{edge.dst!r} must run text -> image"
                )
    return graph


@dataclass(frozen=True)
class CaptionRecord:
    image_id: str
    article_id: str
    caption_text: str
    caption_tokens: tuple[int, ...] = ()


def validate_caption(rec: CaptionRecord, cfg: DataConfig) -> CaptionRecord:
    if len(rec.caption_tokens) > cfg.max_caption_len:
        raise SchemaError(
            f"caption has {len(rec.caption_tokens)} tokens > max {cfg.max_caption_len}"
        )
    return rec


# ---------------------------------------------------------------------------
# JSON record parsing


def _require(obj: dict, key: str, line_info: str):
    if key not in obj:
        raise SchemaError(f"{line_info}: missing field {key!r}")
    return obj[key]


def _opt_vec(value, dim: int) -> Optional[np.ndarray]:
    if value is None:
        return None
    if not isinstance(value, str):
        raise SchemaError("feature payloads must be base64 strings")
    return b64_to_vec(value, dim)


def _span(value, line_info: str) -> tuple[int, int]:
    if not (isinstance(value, list) and len(value) == 2):
        raise SchemaError(f"{line_info}: span must be a [start, end] pair")
    return int(value[0]), int(value[1])


def article_from_json(obj: dict, cfg: DataConfig) -> ArticleAnnotations:
    where = f"article {obj.get('article_id', '?')!r}"
    entities = []
    for ent in _require(obj, "entities", where):
        cls_name = _require(ent, "entity_class", where)
        try:
            cls = EntityClass(cls_name)
        except ValueError:
            raise SchemaError(f"{where}: unknown entity_class {cls_name!r}") from None
        entities.append(
            EntityMention(
                id=str(_require(ent, "id", where)),
                surface=str(_require(ent, "surface", where)),
                entity_class=cls,
                char_span=_span(_require(ent, "char_span", where), where),
                wiki_id=ent.get("wiki_id"),
                embedding=_opt_vec(ent.get("embedding"), cfg.d_e),
            )
        )
    triples = []
    for tri in _require(obj, "triples", where):
        triples.append(
            RelationTriple(
                head_id=str(_require(tri, "head_id", where)),
                relation_text=str(_require(tri, "relation_text", where)),
                relation_span=_span(_require(tri, "relation_span", where), where),
                tail_id=str(_require(tri, "tail_id", where)),
                relation_embedding=_opt_vec(tri.get("relation_embedding"), cfg.d_e),
            )
        )
    chains = [CorefChain(tuple(str(m) for m in ids)) for ids in _require(obj, "coref_chains", where)]
    tf = obj.get("token_features")
    token_features = b64_to_mat(tf, cfg.d_e) if tf is not None else None
    art = ArticleAnnotations(
        article_id=str(_require(obj, "article_id", where)),
        text=str(_require(obj, "text", where)),
        entities=tuple(entities),
        triples=tuple(triples),
        coref_chains=tuple(chains),
        token_features=token_features,
    )
    return validate_article(art, cfg)


def article_to_json(art: ArticleAnnotations) -> dict:
    return {
        "article_id": art.article_id,
        "text": art.text,
        "entities": [
            {
                "id": e.id,
                "surface": e.surface,
                "entity_class": e.entity_class.value,
                "char_span": list(e.char_span),
                "wiki_id": e.wiki_id,
                "embedding": vec_to_b64(e.embedding) if e.embedding is not None else None,
            }
            for e in art.entities
        ],
        "triples": [
            {
                "head_id": t.head_id,
                "relation_text": t.relation_text,
                "relation_span": list(t.relation_span),
                "tail_id": t.tail_id,
                "relation_embedding": (
                    vec_to_b64(t.relation_embedding) if t.relation_embedding is not None else None
                ),
            }
            for t in art.triples
        ],
        "coref_chains": [list(c.mention_ids) for c in art.coref_chains],
        "token_features": (
            mat_to_b64(art.token_features) if art.token_features is not None else None
        ),
    }


def image_from_json(obj: dict, cfg: DataConfig) -> ImageAnnotations:
    where = f"image {obj.get('image_id', '?')!r}"
    detections = []
    for det in _require(obj, "detections", where):
        kind_name = _require(det, "kind", where)
        try:
            kind = DetectionKind(kind_name)
        except ValueError:
            raise SchemaError(f"{where}: unknown detection kind {kind_name!r}") from None
        bbox = _require(det, "bbox", where)
        if not (isinstance(bbox, list) and len(bbox) == 4):
            raise SchemaError(f"{where}: bbox must be [x, y, w, h]")
        feature = det.get("feature")
        if not isinstance(feature, str):
            raise SchemaError(f"{where}: detection feature payload required")
        detections.append(
            Detection(
                kind=kind,
                bbox=tuple(float(v) for v in bbox),
                score=float(_require(det, "score", where)),
                class_label=str(det.get("class_label") or ""),
                feature=b64_to_vec(feature, cfg.d_v),
            )
        )
    gf = _require(obj, "global_features", where)
    if not isinstance(gf, str):
        raise SchemaError(f"{where}: global_features payload required")
    img = ImageAnnotations(
        image_id=str(_require(obj, "image_id", where)),
        global_features=b64_to_mat(gf, cfg.d_v),
        detections=tuple(detections),
    )
    return validate_image(img, cfg)


def image_to_json(img: ImageAnnotations) -> dict:
    return {
        "image_id": img.image_id,
        "global_features": mat_to_b64(img.global_features),
        "detections": [
            {
                "kind": d.kind.value,
                "bbox": list(d.bbox),
                "score": d.score,
                "class_label": d.class_label,
                "feature": vec_to_b64(d.feature),
            }
            for d in img.detections
        ],
    }


def caption_from_json(obj: dict) -> CaptionRecord:
    where = "caption record"
    return CaptionRecord(
        image_id=str(_require(obj, "image_id", where)),
        article_id=str(_require(obj, "article_id", where)),
        caption_text=str(_require(obj, "caption_text", where)),
    )


def caption_to_json(rec: CaptionRecord) -> dict:
    return {
        "image_id": rec.image_id,
        "article_id": rec.article_id,
        "caption_text": rec.caption_text,
    }


def graph_from_json(obj: dict) -> MultiModalGraph:
    where = "graph"
    d_e = int(_require(obj, "d_e", where))
    d_v = int(_require(obj, "d_v", where))
    nodes = []
    for nd in _require(obj, "nodes", where):
        kind_name = _require(nd, "kind", where)
        try:
            kind = NodeKind(kind_name)
        except ValueError:
            raise SchemaError(f"{where}: unknown node kind {kind_name!r}") from None
        dim = d_e if kind in TEXT_NODE_KINDS else d_v
        nodes.append(
            GraphNode(
                node_id=str(_require(nd, "node_id", where)),
                kind=kind,
                label=str(_require(nd, "label", where)),
                feature=b64_to_vec(_require(nd, "feature", where), dim),
                source_ref=str(nd.get("source_ref") or ""),
            )
        )
    edges = []
    for ed in _require(obj, "edges", where):
        kind_name = _require(ed, "kind", where)
        try:
            ekind = EdgeKind(kind_name)
        except ValueError:
            raise SchemaError(f"{where}: unknown edge kind {kind_name!r}") from None
        edges.append(
            GraphEdge(src=str(_require(ed, "src", where)), dst=str(_require(ed, "dst", where)), kind=ekind)
        )
    graph = MultiModalGraph(nodes=tuple(nodes), edges=tuple(edges))
    return validate_graph(graph)


def graph_to_json(graph: MultiModalGraph, cfg: DataConfig) -> dict:
    return {
        "d_e": cfg.d_e,
        "d_v": cfg.d_v,
        "nodes": [
            {
                "node_id": n.node_id,
                "kind": n.kind.value,
                "label": n.label,
                "feature": vec_to_b64(n.feature),
                "source_ref": n.source_ref,
            }
            for n in graph.nodes
        ],
        "edges": [{"src": e.src, "dst": e.dst, "kind": e.kind.value} for e in graph.edges],
    }


# ---------------------------------------------------------------------------
# file-level loaders / savers


def _iter_jsonl(path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"file not found: {path}")
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if not isinstance(obj, dict):
                raise SchemaError(f"{path}:{lineno}: record must be a JSON object")
            records.append(obj)
    return records


def _write_jsonl(objs: Sequence[dict], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for obj in objs:
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")


def load_articles(path, cfg: DataConfig = DataConfig()) -> list[ArticleAnnotations]:
    return [article_from_json(obj, cfg) for obj in _iter_jsonl(path)]


def load_article_annotations(path, cfg: DataConfig = DataConfig()) -> ArticleAnnotations:
    """Load a file holding exactly one article record."""
    records = _iter_jsonl(path)
    if len(records) != 1:
        raise SchemaError(f"{path}: expected exactly one record, found {len(records)}")
    return article_from_json(records[0], cfg)


def save_articles(articles: Sequence[ArticleAnnotations], path) -> None:
    _write_jsonl([article_to_json(a) for a in articles], path)


def load_images(path, cfg: DataConfig = DataConfig()) -> list[ImageAnnotations]:
    return [image_from_json(obj, cfg) for obj in _iter_jsonl(path)]


def load_image_annotations(path, cfg: DataConfig = DataConfig()) -> ImageAnnotations:
    records = _iter_jsonl(path)
    if len(records) != 1:
        raise SchemaError(f"{path}: expected exactly one record, found {len(records)}")
    return image_from_json(records[0], cfg)


def save_images(images: Sequence[ImageAnnotations], path) -> None:
    _write_jsonl([image_to_json(i) for i in images], path)


def load_captions(path) -> list[CaptionRecord]:
    return [caption_from_json(obj) for obj in _iter_jsonl(path)]


def save_captions(captions: Sequence[CaptionRecord], path) -> None:
    _write_jsonl([caption_to_json(c) for c in captions], path)


def save_graph(graph: MultiModalGraph, path, cfg: DataConfig) -> None:
    validate_graph(graph, cfg)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(graph_to_json(graph, cfg), fh, ensure_ascii=False)
        fh.write("\n")


def load_graph(path) -> MultiModalGraph:
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: invalid JSON: {exc}") from exc
    return graph_from_json(obj)
