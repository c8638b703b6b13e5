"""Builders for the text sub-graph, the image sub-graph and the merged graph.

Text sub-graph: every triple contributes head -> relation -> tail with one
relation node per triple.  For each coreference chain only the earliest
mention (smallest span start, then end, then id) survives; edges incident to
removed mentions are rewired to the representative and tagged COREF_REWIRE.

Image sub-graph: detected objects below the score cutoff are dropped, the
rest are kept in descending score order up to the configured caps.  No
intra-image edges.

Merged graph: node/edge union plus CROSS_MODAL edges for every (text, visual)
pair scoring strictly above the matcher threshold.

Builders are pure and order-canonical: nodes sort by (kind, id), edges by
(src, dst, kind), so equal inputs serialize identically.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .core import (
    ArticleAnnotations,
    DataConfig,
    Detection,
    DetectionKind,
    EdgeKind,
    EntityMention,
    GraphEdge,
    GraphNode,
    ImageAnnotations,
    MultiModalGraph,
    NodeKind,
    IMAGE_NODE_KINDS,
    TEXT_NODE_KINDS,
)
from .errors import SchemaError
from .matcher import MatcherParams, match_entities


def _canonical(nodes: dict[str, GraphNode], edges: list[GraphEdge]) -> MultiModalGraph:
    ordered_nodes = tuple(sorted(nodes.values(), key=lambda n: (n.kind.value, n.node_id)))
    ordered_edges = tuple(sorted(set(edges), key=lambda e: (e.src, e.dst, e.kind.value)))
    return MultiModalGraph(nodes=ordered_nodes, edges=ordered_edges)


def coref_representatives(annotations: ArticleAnnotations) -> dict[str, str]:
    """Map every mention id to its chain representative (identity if unchained)."""
    spans = {ent.id: ent.char_span for ent in annotations.entities}
    rep = {ent.id: ent.id for ent in annotations.entities}
    for chain in annotations.coref_chains:
        winner = min(chain.mention_ids, key=lambda mid: (spans[mid][0], spans[mid][1], mid))
        for mid in chain.mention_ids:
            rep[mid] = winner
    return rep


def _entity_feature(ent: EntityMention, d_e: int) -> np.ndarray:
    if ent.embedding is not None:
        return np.asarray(ent.embedding, dtype=np.float32)
    return np.zeros(d_e, dtype=np.float32)


def _relation_feature(tri, head: EntityMention, tail: EntityMention, d_e: int) -> np.ndarray:
    if tri.relation_embedding is not None:
        return np.asarray(tri.relation_embedding, dtype=np.float32)
    present = [e.embedding for e in (head, tail) if e.embedding is not None]
    if not present:
        return np.zeros(d_e, dtype=np.float32)
    return (sum(np.asarray(p, dtype=np.float64) for p in present) / len(present)).astype(
        np.float32
    )


def build_text_subgraph(
    annotations: ArticleAnnotations, cfg: DataConfig = DataConfig()
) -> MultiModalGraph:
    """Text sub-graph over the article's triples after coreference dedup."""
    rep = coref_representatives(annotations)
    by_id = {ent.id: ent for ent in annotations.entities}
    nodes: dict[str, GraphNode] = {}
    edges: list[GraphEdge] = []

    def entity_node(mention_id: str, role: NodeKind) -> str:
        ent = by_id[mention_id]
        if mention_id not in nodes:
            nodes[mention_id] = GraphNode(
                node_id=mention_id,
                kind=role,
                label=ent.surface,
                feature=_entity_feature(ent, cfg.d_e),
                source_ref=f"entity:{mention_id}",
            )
        return mention_id

    for t_idx, tri in enumerate(annotations.triples):
        head = annotations.entity_by_id(tri.head_id)
        tail = annotations.entity_by_id(tri.tail_id)
        h_rep = rep.get(tri.head_id, tri.head_id)
        t_rep = rep.get(tri.tail_id, tri.tail_id)
        entity_node(h_rep, NodeKind.HEAD)
        entity_node(t_rep, NodeKind.TAIL)
        rel_id = f"rel{t_idx}"
        nodes[rel_id] = GraphNode(
            node_id=rel_id,
            kind=NodeKind.RELATION,
            label=tri.relation_text,
            feature=_relation_feature(tri, head, tail, cfg.d_e),
            source_ref=f"triple:{t_idx}",
        )
        head_kind = EdgeKind.TRIPLE if h_rep == tri.head_id else EdgeKind.COREF_REWIRE
        tail_kind = EdgeKind.TRIPLE if t_rep == tri.tail_id else EdgeKind.COREF_REWIRE
        edges.append(GraphEdge(src=h_rep, dst=rel_id, kind=head_kind))
        edges.append(GraphEdge(src=rel_id, dst=t_rep, kind=tail_kind))

    return _canonical(nodes, edges)


@dataclass(frozen=True)
class ImageSubgraphLimits:
    max_objects: int = 64
    max_faces: int = 4
    min_score: float = 0.3


def build_image_subgraph(
    image_annotations: ImageAnnotations,
    limits: ImageSubgraphLimits = ImageSubgraphLimits(),
) -> MultiModalGraph:
    """Object/face nodes after score filtering and per-kind caps; no edges."""
    objects: list[tuple[int, Detection]] = []
    faces: list[tuple[int, Detection]] = []
    for idx, det in enumerate(image_annotations.detections):
        if det.kind is DetectionKind.OBJECT:
            if det.score >= limits.min_score:
                objects.append((idx, det))
        else:
            faces.append((idx, det))
    # stable sort keeps the original order among equal scores
    objects.sort(key=lambda item: -item[1].score)
    faces.sort(key=lambda item: -item[1].score)
    nodes: dict[str, GraphNode] = {}
    for idx, det in objects[: limits.max_objects]:
        nodes[f"obj{idx}"] = GraphNode(
            node_id=f"obj{idx}",
            kind=NodeKind.OBJECT,
            label=det.class_label or "object",
            feature=np.asarray(det.feature, dtype=np.float32),
            source_ref=f"detection:{idx}",
        )
    for idx, det in faces[: limits.max_faces]:
        nodes[f"face{idx}"] = GraphNode(
            node_id=f"face{idx}",
            kind=NodeKind.FACE,
            label="face",
            feature=np.asarray(det.feature, dtype=np.float32),
            source_ref=f"detection:{idx}",
        )
    return _canonical(nodes, [])


def validate_text_subgraph(graph: MultiModalGraph) -> MultiModalGraph:
    for node in graph.nodes:
        if node.kind not in TEXT_NODE_KINDS:
            raise SchemaError(f"text sub-graph holds non-text node {node.node_id!r}")
    for edge in graph.edges:
        if edge.kind is EdgeKind.CROSS_MODAL:
            raise SchemaError("text sub-graph may not hold CROSS_MODAL edges")
    return graph


def validate_image_subgraph(
    graph: MultiModalGraph, limits: ImageSubgraphLimits = ImageSubgraphLimits()
) -> MultiModalGraph:
    kinds = Counter(n.kind for n in graph.nodes)
    for node in graph.nodes:
        if node.kind not in IMAGE_NODE_KINDS:
            raise SchemaError(f"image sub-graph holds non-image node {node.node_id!r}")
    if graph.edges:
        raise SchemaError("image sub-graph has no internal edges")
    if kinds[NodeKind.OBJECT] > limits.max_objects:
        raise SchemaError(f"image sub-graph exceeds {limits.max_objects} objects")
    if kinds[NodeKind.FACE] > limits.max_faces:
        raise SchemaError(f"image sub-graph exceeds {limits.max_faces} faces")
    return graph


def build_mmkg(
    text_sg: MultiModalGraph,
    image_sg: MultiModalGraph,
    matcher_params: MatcherParams,
    threshold: float = 0.4,
    link_relations: bool = True,
) -> MultiModalGraph:
    """Union of both sub-graphs plus CROSS_MODAL edges above the threshold.

    ``link_relations=False`` restricts cross-modal linking to HEAD/TAIL nodes.
    """
    nodes: dict[str, GraphNode] = {}
    for node in list(text_sg.nodes) + list(image_sg.nodes):
        if node.node_id in nodes:
            raise SchemaError(f"node id {node.node_id!r} appears in both sub-graphs")
        nodes[node.node_id] = node
    edges = list(text_sg.edges) + list(image_sg.edges)
    text_nodes = [
        n
        for n in text_sg.nodes
        if n.is_text and (link_relations or n.kind is not NodeKind.RELATION)
    ]
    visual_nodes = [n for n in image_sg.nodes if n.kind in IMAGE_NODE_KINDS]
    for text_id, visual_id, _sim in match_entities(
        text_nodes, visual_nodes, matcher_params, threshold
    ):
        edges.append(GraphEdge(src=text_id, dst=visual_id, kind=EdgeKind.CROSS_MODAL))
    return _canonical(nodes, edges)


@dataclass(frozen=True)
class GraphStats:
    node_counts: dict[str, int]
    edge_counts: dict[str, int]
    connected_components: int


def graph_stats(graph: MultiModalGraph) -> GraphStats:
    """Exact per-kind counts plus components of the undirected projection."""
    node_counts = {kind.value: 0 for kind in NodeKind}
    for node in graph.nodes:
        node_counts[node.kind.value] += 1
    edge_counts = {kind.value: 0 for kind in EdgeKind}
    for edge in graph.edges:
        edge_counts[edge.kind.value] += 1

    index = {n.node_id: i for i, n in enumerate(graph.nodes)}
    neighbors: list[list[int]] = [[] for _ in graph.nodes]
    for edge in graph.edges:
        a, b = index[edge.src], index[edge.dst]
        neighbors[a].append(b)
        neighbors[b].append(a)
    seen = [False] * len(graph.nodes)
    components = 0
    for start in range(len(graph.nodes)):
        if seen[start]:
            continue
        components += 1
        stack = [start]
        seen[start] = True
        while stack:
            cur = stack.pop()
            for nxt in neighbors[cur]:
                if not seen[nxt]:
                    seen[nxt] = True
                    stack.append(nxt)
    return GraphStats(
        node_counts=node_counts, edge_counts=edge_counts, connected_components=components
    )
