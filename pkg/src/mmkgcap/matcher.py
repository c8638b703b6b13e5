"""Cross-modal entity matching.

Entity embeddings and image features are linearly projected into a common
space; similarity is the cosine of the projections.  Training minimizes a
bidirectional hinge loss where, for each positive pair, the hardest in-batch
negative entity and negative image must score at least ``delta`` below the
positive.  Subgradient at the hinge boundary is 0 and argmax ties break
toward the lowest batch index, so gradients are deterministic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .core import DataConfig, GraphNode, b64_to_vec, vec_to_b64
from .errors import BatchTooSmall, DimensionError, DivergenceError, SchemaError
from .kb import KnowledgeBase
from .trainer import AdamState, OptimConfig, adam_step, clip_gradients, lr_at_step


@dataclass(frozen=True, eq=False)
class MatcherParams:
    W_e: np.ndarray  # (d, d_e)
    W_v: np.ndarray  # (d, d_v)
    delta: float = 0.2

    def __post_init__(self):
        if self.delta <= 0:
            raise SchemaError(f"margin delta must be positive, got {self.delta}")
        if self.W_e.ndim != 2 or self.W_v.ndim != 2 or self.W_e.shape[0] != self.W_v.shape[0]:
            raise DimensionError(
                f"projections must share the common dim: {self.W_e.shape} vs {self.W_v.shape}"
            )
        if not (np.isfinite(self.W_e).all() and np.isfinite(self.W_v).all()):
            raise SchemaError("matcher parameters must be finite")

    @property
    def d(self) -> int:
        return self.W_e.shape[0]

    @property
    def d_e(self) -> int:
        return self.W_e.shape[1]

    @property
    def d_v(self) -> int:
        return self.W_v.shape[1]

    def __eq__(self, other):
        if not isinstance(other, MatcherParams):
            return NotImplemented
        return (
            self.delta == other.delta
            and np.array_equal(self.W_e, other.W_e)
            and np.array_equal(self.W_v, other.W_v)
        )


@dataclass(frozen=True)
class MatchBatch:
    """Positive (entity_embedding, image_feature) pairs; negatives are in-batch."""

    pairs: tuple[tuple[np.ndarray, np.ndarray], ...]

    def __len__(self) -> int:
        return len(self.pairs)

    def matrices(self) -> tuple[np.ndarray, np.ndarray]:
        ents = np.stack([np.asarray(e, dtype=np.float64) for e, _ in self.pairs])
        imgs = np.stack([np.asarray(v, dtype=np.float64) for _, v in self.pairs])
        return ents, imgs


def init_matcher_params(
    d: int, d_e: int, d_v: int, delta: float = 0.2, seed: int = 0
) -> MatcherParams:
    rng = np.random.default_rng(seed)
    return MatcherParams(
        W_e=rng.standard_normal((d, d_e)) / np.sqrt(d_e),
        W_v=rng.standard_normal((d, d_v)) / np.sqrt(d_v),
        delta=delta,
    )


def similarity(entity_embedding, image_feature, params: MatcherParams) -> float:
    """Cosine of the projected vectors; 0.0 if either projection is zero."""
    u_e = np.asarray(entity_embedding, dtype=np.float64)
    u_v = np.asarray(image_feature, dtype=np.float64)
    if u_e.shape != (params.d_e,):
        raise DimensionError(f"entity embedding dim {u_e.shape} != ({params.d_e},)")
    if u_v.shape != (params.d_v,):
        raise DimensionError(f"image feature dim {u_v.shape} != ({params.d_v},)")
    a = params.W_e @ u_e
    b = params.W_v @ u_v
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def _similarity_matrix(
    ents: ad.Tensor | np.ndarray, imgs: ad.Tensor | np.ndarray, w_e: ad.Tensor, w_v: ad.Tensor
) -> ad.Tensor:
    """All-pairs cosine of projections as an autodiff tensor, S[i, j] = sim(e_i, v_j)."""
    pe = ad.matmul(ad.as_tensor(ents), ad.transpose(w_e, (1, 0)))
    pv = ad.matmul(ad.as_tensor(imgs), ad.transpose(w_v, (1, 0)))
    ne = ad.tsqrt(ad.tsum(ad.mul(pe, pe), axis=1, keepdims=True))
    nv = ad.tsqrt(ad.tsum(ad.mul(pv, pv), axis=1, keepdims=True))
    return ad.matmul(ad.div(pe, ne), ad.transpose(ad.div(pv, nv), (1, 0)))


def margin_loss(
    batch: MatchBatch, params: MatcherParams
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean bidirectional hinge loss over the batch plus exact gradients.

    For positive i the realized negatives are the in-batch argmax of
    sim(e_j, v_i) over j != i and sim(e_i, v_k) over k != i.
    """
    n = len(batch)
    if n < 2:
        raise BatchTooSmall(f"margin loss needs a batch of >= 2 pairs, got {n}")
    ents, imgs = batch.matrices()
    if ents.shape[1] != params.d_e or imgs.shape[1] != params.d_v:
        raise DimensionError(
            f"batch dims ({ents.shape[1]}, {imgs.shape[1]}) != params "
            f"({params.d_e}, {params.d_v})"
        )
    w_e = ad.Tensor(params.W_e, requires_grad=True)
    w_v = ad.Tensor(params.W_v, requires_grad=True)
    sims = _similarity_matrix(ents, imgs, w_e, w_v)

    # realized hardest negatives, diag excluded; np.argmax takes the lowest index on ties
    off_diag = sims.data + np.where(np.eye(n, dtype=bool), -np.inf, 0.0)
    hardest_ent = off_diag.argmax(axis=0)  # for column i: entity e' maximizing sim(e', v_i)
    hardest_img = off_diag.argmax(axis=1)  # for row i: image v' maximizing sim(e_i, v')

    idx = np.arange(n)
    pos = ad.pick(sims, idx, idx)
    neg_ent = ad.pick(sims, hardest_ent, idx)
    neg_img = ad.pick(sims, idx, hardest_img)
    hinge_ent = ad.relu(ad.add(ad.add(neg_ent, ad.mul(pos, -1.0)), params.delta))
    hinge_img = ad.relu(ad.add(ad.add(neg_img, ad.mul(pos, -1.0)), params.delta))
    loss = ad.tmean(ad.add(hinge_ent, hinge_img))
    ad.backward(loss)
    grads = {
        "W_e": w_e.grad if w_e.grad is not None else np.zeros_like(params.W_e),
        "W_v": w_v.grad if w_v.grad is not None else np.zeros_like(params.W_v),
    }
    return float(loss.data), grads


def retrieval_recall_at_1(kb: KnowledgeBase, params: MatcherParams) -> float:
    """Fraction of entities whose own image is the top-1 retrieval."""
    if len(kb) == 0:
        return 0.0
    ents = kb.entity_matrix().astype(np.float64)
    imgs = kb.image_matrix().astype(np.float64)
    pe = ents @ params.W_e.T
    pv = imgs @ params.W_v.T
    ne = np.linalg.norm(pe, axis=1, keepdims=True)
    nv = np.linalg.norm(pv, axis=1, keepdims=True)
    pe = np.divide(pe, ne, out=np.zeros_like(pe), where=ne > 0)
    pv = np.divide(pv, nv, out=np.zeros_like(pv), where=nv > 0)
    sims = pe @ pv.T
    return float(np.mean(sims.argmax(axis=1) == np.arange(len(kb))))


@dataclass(frozen=True)
class TrainMatcherConfig:
    epochs: int = 50
    d: int = 32
    delta: float = 0.2
    optim: OptimConfig = field(
        default_factory=lambda: OptimConfig(
            base_lr=0.05,
            init_lr=1e-4,
            warmup_steps=20,
            total_steps=10000,
            weight_decay=0.0,
            clip_norm=5.0,
            batch_size=32,
            seed=0,
        )
    )
    rescale_schedule: bool = True  # stretch/shrink the schedule to the actual step count


@dataclass
class EpochLog:
    epoch: int
    loss: float
    recall_at_1: float
    lr: float


def train_matcher(
    kb_train: KnowledgeBase,
    kb_val: KnowledgeBase,
    config: TrainMatcherConfig = TrainMatcherConfig(),
) -> tuple[MatcherParams, list[EpochLog]]:
    """Train projections on KB positives; returns the best-recall parameters.

    Deterministic for a fixed config seed.  Validation recall is measured on
    kb_val after every epoch; the returned parameters are the ones from the
    best epoch (ties keep the earlier epoch).  Zero epochs returns the seeded
    initialization unchanged.
    """
    if len(kb_train) == 0:
        raise SchemaError("kb_train must be non-empty")
    d_e = kb_train.entries[0].entity_embedding.shape[0]
    d_v = kb_train.entries[0].image_feature.shape[0]
    params = init_matcher_params(config.d, d_e, d_v, config.delta, config.optim.seed)
    rng = np.random.default_rng(config.optim.seed)

    batch_size = max(2, config.optim.batch_size)
    steps_per_epoch = max(1, len(kb_train) // batch_size)
    optim = config.optim
    if config.rescale_schedule and config.epochs > 0:
        total = config.epochs * steps_per_epoch
        warmup = min(optim.warmup_steps, max(0, total - 1))
        optim = replace(optim, total_steps=total, warmup_steps=warmup)

    tensors = {"W_e": params.W_e.copy(), "W_v": params.W_v.copy()}
    state = AdamState.init(tensors)
    best = (float(-1.0), tensors)
    log: list[EpochLog] = []
    step = 0
    for epoch in range(config.epochs):
        order = rng.permutation(len(kb_train))
        epoch_losses = []
        lr = 0.0
        for b in range(steps_per_epoch):
            chosen = order[b * batch_size : (b + 1) * batch_size]
            if len(chosen) < 2:
                continue
            batch = MatchBatch(
                pairs=tuple(
                    (
                        kb_train.entries[i].entity_embedding.astype(np.float64),
                        kb_train.entries[i].image_feature.astype(np.float64),
                    )
                    for i in chosen
                )
            )
            current = MatcherParams(W_e=tensors["W_e"], W_v=tensors["W_v"], delta=config.delta)
            loss, grads = margin_loss(batch, current)
            if not np.isfinite(loss):
                raise DivergenceError(f"non-finite matcher loss at epoch {epoch}")
            grads = clip_gradients(grads, optim.clip_norm)
            lr = lr_at_step(min(step, optim.total_steps), optim)
            tensors, state = adam_step(tensors, grads, state, lr, optim)
            step += 1
            epoch_losses.append(loss)
        eval_params = MatcherParams(W_e=tensors["W_e"], W_v=tensors["W_v"], delta=config.delta)
        recall = retrieval_recall_at_1(kb_val if len(kb_val) else kb_train, eval_params)
        log.append(
            EpochLog(
                epoch=epoch,
                loss=float(np.mean(epoch_losses)) if epoch_losses else 0.0,
                recall_at_1=recall,
                lr=lr,
            )
        )
        if recall > best[0]:
            best = (recall, {k: v.copy() for k, v in tensors.items()})
    if config.epochs == 0:
        return params, log
    return (
        MatcherParams(W_e=best[1]["W_e"], W_v=best[1]["W_v"], delta=config.delta),
        log,
    )


def match_entities(
    text_nodes: Sequence[GraphNode],
    visual_nodes: Sequence[GraphNode],
    params: MatcherParams,
    threshold: float = 0.4,
) -> list[tuple[str, str, float]]:
    """All (text, visual, sim) pairs with sim strictly above the threshold.

    Text nodes whose feature vector is all zeros carry no embedding and are
    skipped.  Output is sorted by (text_node_id, visual_node_id) so parallel
    scoring would not change the result.
    """
    if not (-1.0 < threshold < 1.0):
        raise ValueError(f"threshold must lie in (-1, 1), got {threshold}")
    matches: list[tuple[str, str, float]] = []
    for tnode in text_nodes:
        if not np.any(tnode.feature):
            continue
        for vnode in visual_nodes:
            sim = similarity(tnode.feature, vnode.feature, params)
            if sim > threshold:
                matches.append((tnode.node_id, vnode.node_id, sim))
    matches.sort(key=lambda m: (m[0], m[1]))
    return matches


# ---------------------------------------------------------------------------
# checkpoint io


def save_matcher(params: MatcherParams, path, seed: int = 0) -> None:
    doc = {
        "d": params.d,
        "d_e": params.d_e,
        "d_v": params.d_v,
        "delta": params.delta,
        "seed": seed,
        "W_e": vec_to_b64(params.W_e.reshape(-1)),
        "W_v": vec_to_b64(params.W_v.reshape(-1)),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_matcher(path) -> MatcherParams:
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"checkpoint not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: invalid JSON: {exc}") from exc
    for key in ("d", "d_e", "d_v", "delta", "W_e", "W_v"):
        if key not in doc:
            raise SchemaError(f"{path}: missing checkpoint field {key!r}")
    d, d_e, d_v = int(doc["d"]), int(doc["d_e"]), int(doc["d_v"])
    w_e = b64_to_vec(doc["W_e"], d * d_e).astype(np.float64).reshape(d, d_e)
    w_v = b64_to_vec(doc["W_v"], d * d_v).astype(np.float64).reshape(d, d_v)
    return MatcherParams(W_e=w_e, W_v=w_v, delta=float(doc["delta"]))


def matcher_data_config(path, **overrides) -> DataConfig:
    """DataConfig whose dims come from a matcher checkpoint header."""
    params = load_matcher(path)
    return DataConfig(d_e=params.d_e, d_v=params.d_v, **overrides)
