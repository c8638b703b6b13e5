"""Joint training of the graph encoder and the caption decoder.

Input features and the matcher stay frozen; gradients flow from the caption
NLL through the decoder's cross-attention into the graph encoder via the
graph segment of the memory.  Training is single-threaded and deterministic
for a fixed seed; gradient accumulation order over a batch is fixed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .core import ArticleAnnotations, CaptionRecord, ImageAnnotations, MultiModalGraph, b64_to_vec, vec_to_b64
from .decoder import (
    Ablation,
    BOS,
    DecoderConfig,
    EOS,
    Memory,
    PAD,
    Vocabulary,
    assemble_memory,
    build_vocabulary,
    generate,
    init_decoder_params,
    logits_t,
    memory_rows_t,
)
from .errors import DivergenceError, LengthError, SchemaError
from .gat import (
    GatParams,
    NodeEncoding,
    encode_graph_t,
    gat_forward,
    gat_param_dict,
    gat_params_from_dict,
    init_gat_params,
)
from .matcher import MatcherParams
from .trainer import AdamState, OptimConfig, adam_step, clip_gradients, lr_at_step


@dataclass(frozen=True)
class TrainCaptionerConfig:
    decoder: DecoderConfig = DecoderConfig()
    epochs: int = 200
    ablation: Ablation = Ablation.FULL
    gat_heads: int = 4
    gat_leaky: float = 0.2
    add_reverse_edges: bool = False
    optim: OptimConfig = field(
        default_factory=lambda: OptimConfig(
            base_lr=3e-3,
            init_lr=1e-5,
            warmup_steps=50,
            total_steps=10000,
            weight_decay=0.0,
            clip_norm=5.0,
            batch_size=16,
            seed=0,
        )
    )
    rescale_schedule: bool = True


@dataclass
class CaptioningModel:
    """Trained GAT + decoder parameters with the vocabulary they were built for."""

    cfg: DecoderConfig
    gat: GatParams
    decoder: dict[str, np.ndarray]
    vocab: Vocabulary
    ablation: Ablation = Ablation.FULL
    add_reverse_edges: bool = False


@dataclass
class CaptionEpochLog:
    epoch: int
    per_token_loss: float
    lr: float


Sample = tuple[ArticleAnnotations, ImageAnnotations, CaptionRecord]


def _tokenize_gold(caption: CaptionRecord, vocab: Vocabulary, max_len: int) -> list[int]:
    ids = vocab.encode(caption.caption_text) + [EOS]
    if len(ids) > max_len:
        raise LengthError(
            f"caption {caption.image_id!r} has {len(ids)} tokens (incl. EOS) > {max_len}"
        )
    return ids


def _graph_rows_for_sample(
    graph: MultiModalGraph,
    ablation: Ablation,
    gat_tensors: dict[str, Tensor],
    leaky: float,
    add_reverse: bool,
    cfg: DecoderConfig,
) -> tuple[Tensor | np.ndarray, bool]:
    """Graph memory segment for one sample, staying on the tape when encoded."""
    if ablation is Ablation.WITHOUT_GRAPH or not graph.nodes:
        return np.zeros((0, cfg.d_model)), False
    if ablation is Ablation.IMAGE_SUBGRAPH_ONLY:
        feats = [np.asarray(n.feature, dtype=np.float64) for n in graph.nodes if not n.is_text]
        return (np.stack(feats) if feats else np.zeros((0, cfg.d_v))), True
    encoded = encode_graph_t(graph, gat_tensors, leaky, add_reverse)
    if ablation is Ablation.TEXT_SUBGRAPH_ONLY:
        text_idx = [i for i, n in enumerate(graph.nodes) if n.is_text]
        if not text_idx:
            return np.zeros((0, cfg.d_model)), False
        encoded = ad.gather_rows(encoded, text_idx)
    return encoded, False


def _sample_loss_t(
    article: ArticleAnnotations,
    image: ImageAnnotations,
    gold: list[int],
    graph: MultiModalGraph,
    ablation: Ablation,
    gat_tensors: dict[str, Tensor],
    dec_tensors: dict[str, Tensor],
    cfg: DecoderConfig,
    leaky: float,
    add_reverse: bool,
) -> Tensor:
    text = article.token_features if article.token_features is not None else np.zeros((0, cfg.d_e))
    graph_rows, graph_is_raw = _graph_rows_for_sample(
        graph, ablation, gat_tensors, leaky, add_reverse, cfg
    )
    rows = memory_rows_t(
        np.asarray(text, dtype=np.float64),
        np.asarray(image.global_features, dtype=np.float64),
        graph_rows,
        graph_is_raw,
        dec_tensors,
    )
    prefix = [BOS] + gold[:-1]
    lsm = ad.log_softmax(logits_t(rows, prefix, dec_tensors, cfg), axis=-1)
    positions = [i for i, tok in enumerate(gold) if tok != PAD]
    picked = ad.pick(lsm, positions, [gold[i] for i in positions])
    return ad.mul(ad.tsum(picked), -1.0)


def train_captioner(
    dataset: Sequence[Sample],
    graphs: Sequence[MultiModalGraph],
    matcher: Optional[MatcherParams],
    config: TrainCaptionerConfig = TrainCaptionerConfig(),
) -> tuple[CaptioningModel, list[CaptionEpochLog]]:
    """Optimize GAT + decoder on (article, image, caption, graph) samples.

    The matcher argument is accepted for provenance only; its parameters are
    frozen (it already shaped the graphs).  Returns the final model plus the
    per-epoch per-token loss log.
    """
    if len(dataset) == 0:
        raise SchemaError("dataset must be non-empty")
    if len(graphs) != len(dataset):
        raise SchemaError(f"{len(graphs)} graphs for {len(dataset)} samples")
    cfg = config.decoder
    vocab = build_vocabulary([cap.caption_text for _, _, cap in dataset])
    golds = [_tokenize_gold(cap, vocab, cfg.max_caption_len) for _, _, cap in dataset]

    gat_params = init_gat_params(
        d_e=cfg.d_e,
        d_v=cfg.d_v,
        d_model=cfg.d_model,
        heads=config.gat_heads,
        leaky_slope=config.gat_leaky,
        seed=config.optim.seed,
    )
    dec_params = init_decoder_params(len(vocab), cfg, seed=config.optim.seed + 1)
    tensors: dict[str, np.ndarray] = {f"gat.{k}": v for k, v in gat_param_dict(gat_params).items()}
    tensors.update({f"dec.{k}": v for k, v in dec_params.items()})

    batch_size = max(1, config.optim.batch_size)
    batches_per_epoch = (len(dataset) + batch_size - 1) // batch_size
    optim = config.optim
    if config.rescale_schedule and config.epochs > 0:
        total = config.epochs * batches_per_epoch
        warmup = min(optim.warmup_steps, max(0, total - 1))
        optim = replace(optim, total_steps=total, warmup_steps=warmup)

    state = AdamState.init(tensors)
    rng = np.random.default_rng(config.optim.seed)
    log: list[CaptionEpochLog] = []
    step = 0
    for epoch in range(config.epochs):
        order = rng.permutation(len(dataset))
        epoch_loss = 0.0
        epoch_tokens = 0
        lr = 0.0
        for b in range(batches_per_epoch):
            chosen = order[b * batch_size : (b + 1) * batch_size]
            if len(chosen) == 0:
                continue
            leafs = ad.param_tensors(tensors)
            gat_tensors = {k[len("gat."):]: t for k, t in leafs.items() if k.startswith("gat.")}
            dec_tensors = {k[len("dec."):]: t for k, t in leafs.items() if k.startswith("dec.")}
            batch_loss = 0.0
            batch_tokens = 0
            for i in chosen:
                article, image, _cap = dataset[i]
                loss_t = _sample_loss_t(
                    article,
                    image,
                    golds[i],
                    graphs[i],
                    config.ablation,
                    gat_tensors,
                    dec_tensors,
                    cfg,
                    config.gat_leaky,
                    config.add_reverse_edges,
                )
                ad.backward(loss_t)
                batch_loss += float(loss_t.data)
                batch_tokens += len(golds[i])
            if not np.isfinite(batch_loss):
                raise DivergenceError(f"non-finite caption loss at epoch {epoch}")
            grads = ad.collect_grads(leafs)
            grads = {k: g / batch_tokens for k, g in grads.items()}
            grads = clip_gradients(grads, optim.clip_norm)
            lr = lr_at_step(min(step, optim.total_steps), optim)
            tensors, state = adam_step(tensors, grads, state, lr, optim)
            step += 1
            epoch_loss += batch_loss
            epoch_tokens += batch_tokens
        log.append(
            CaptionEpochLog(
                epoch=epoch,
                per_token_loss=epoch_loss / max(1, epoch_tokens),
                lr=lr,
            )
        )
    model = CaptioningModel(
        cfg=cfg,
        gat=gat_params_from_dict(
            {k[len("gat."):]: v for k, v in tensors.items() if k.startswith("gat.")},
            config.gat_leaky,
        ),
        decoder={k[len("dec."):]: v for k, v in tensors.items() if k.startswith("dec.")},
        vocab=vocab,
        ablation=config.ablation,
        add_reverse_edges=config.add_reverse_edges,
    )
    return model, log


def memory_for_sample(
    model: CaptioningModel,
    article: ArticleAnnotations,
    image: ImageAnnotations,
    graph: MultiModalGraph,
) -> Memory:
    """Assemble inference memory honoring the model's ablation setting."""
    if model.ablation in (Ablation.FULL, Ablation.TEXT_SUBGRAPH_ONLY) and graph.nodes:
        encodings = gat_forward(graph, model.gat, model.add_reverse_edges)
    else:
        encodings: list[NodeEncoding] = []
    return assemble_memory(
        article.token_features,
        image.global_features,
        encodings,
        model.ablation,
        graph=graph,
        cfg=model.cfg,
    )


def caption_sample(
    model: CaptioningModel,
    article: ArticleAnnotations,
    image: ImageAnnotations,
    graph: MultiModalGraph,
    mode: str = "greedy",
    max_len: Optional[int] = None,
    beam_size: int = 1,
    length_norm: float = 0.0,
) -> str:
    memory = memory_for_sample(model, article, image, graph)
    ids = generate(
        memory,
        model.decoder,
        model.cfg,
        mode=mode,
        max_len=max_len if max_len is not None else model.cfg.max_caption_len,
        beam_size=beam_size,
        length_norm=length_norm,
    )
    return model.vocab.decode(ids)


# ---------------------------------------------------------------------------
# checkpoint io


def save_captioner(model: CaptioningModel, path) -> None:
    tensors: dict[str, np.ndarray] = {f"gat.{k}": v for k, v in gat_param_dict(model.gat).items()}
    tensors.update({f"dec.{k}": v for k, v in model.decoder.items()})
    doc = {
        "config": {
            "d_model": model.cfg.d_model,
            "n_layers": model.cfg.n_layers,
            "n_heads": model.cfg.n_heads,
            "ffn_mult": model.cfg.ffn_mult,
            "max_caption_len": model.cfg.max_caption_len,
            "max_article_len": model.cfg.max_article_len,
            "d_e": model.cfg.d_e,
            "d_v": model.cfg.d_v,
            "gat_leaky": model.gat.leaky_slope,
            "ablation": model.ablation.value,
            "add_reverse_edges": model.add_reverse_edges,
        },
        "vocab": list(model.vocab.tokens),
        "tensors": {
            name: {"shape": list(arr.shape), "data": vec_to_b64(arr.reshape(-1))}
            for name, arr in tensors.items()
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_captioner(path) -> CaptioningModel:
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"checkpoint not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: invalid JSON: {exc}") from exc
    for key in ("config", "vocab", "tensors"):
        if key not in doc:
            raise SchemaError(f"{path}: missing checkpoint field {key!r}")
    raw_cfg = doc["config"]
    cfg = DecoderConfig(
        d_model=int(raw_cfg["d_model"]),
        n_layers=int(raw_cfg["n_layers"]),
        n_heads=int(raw_cfg["n_heads"]),
        ffn_mult=int(raw_cfg["ffn_mult"]),
        max_caption_len=int(raw_cfg["max_caption_len"]),
        max_article_len=int(raw_cfg["max_article_len"]),
        d_e=int(raw_cfg["d_e"]),
        d_v=int(raw_cfg["d_v"]),
    )
    tensors: dict[str, np.ndarray] = {}
    for name, entry in doc["tensors"].items():
        shape = tuple(int(s) for s in entry["shape"])
        flat = b64_to_vec(entry["data"], int(np.prod(shape)) if shape else 1)
        tensors[name] = flat.astype(np.float64).reshape(shape)
    gat = gat_params_from_dict(
        {k[len("gat."):]: v for k, v in tensors.items() if k.startswith("gat.")},
        float(raw_cfg.get("gat_leaky", 0.2)),
    )
    decoder = {k[len("dec."):]: v for k, v in tensors.items() if k.startswith("dec.")}
    return CaptioningModel(
        cfg=cfg,
        gat=gat,
        decoder=decoder,
        vocab=Vocabulary(tokens=tuple(doc["vocab"])),
        ablation=Ablation(raw_cfg.get("ablation", "full")),
        add_reverse_edges=bool(raw_cfg.get("add_reverse_edges", False)),
    )
