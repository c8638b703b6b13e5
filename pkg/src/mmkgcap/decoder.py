"""Toy transformer caption decoder over concatenated text/image/graph memory.

Memory rows are the article token features, the flattened image grid and the
graph encodings, in that order, each mapped to d_model by a segment-specific
projection and tagged with a learned segment embedding (text memory rows also
get learned positions).  The decoder itself is N pre-norm transformer layers
with causal self-attention, cross-attention over the memory and a feed-forward
block, trained with summed token negative log-likelihood.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .core import MultiModalGraph
from .errors import (
    DimensionError,
    EmptyMemory,
    LengthError,
    SchemaError,
    UnknownTokenId,
)
from .gat import NodeEncoding

NEG_MASK = -1e30

PAD, BOS, EOS, UNK = 0, 1, 2, 3
SPECIAL_TOKENS = ("<pad>", "<bos>", "<eos>", "<unk>")


@dataclass(frozen=True)
class Vocabulary:
    """Bijective token <-> id map with fixed special ids 0..3."""

    tokens: tuple[str, ...]

    def __post_init__(self):
        if tuple(self.tokens[:4]) != SPECIAL_TOKENS:
            raise SchemaError(f"vocabulary must start with {SPECIAL_TOKENS}")
        if len(set(self.tokens)) != len(self.tokens):
            raise SchemaError("vocabulary tokens must be unique")
        object.__setattr__(self, "_ids", {t: i for i, t in enumerate(self.tokens)})

    def __len__(self) -> int:
        return len(self.tokens)

    def id_of(self, token: str) -> int:
        return self._ids.get(token, UNK)

    def encode(self, text: str) -> list[int]:
        return [self.id_of(tok) for tok in text.split()]

    def decode(self, ids: Sequence[int]) -> str:
        words = []
        for i in ids:
            if i in (PAD, BOS, EOS):
                continue
            if not (0 <= i < len(self.tokens)):
                raise UnknownTokenId(f"token id {i} outside vocabulary of {len(self.tokens)}")
            words.append(self.tokens[i])
        return " ".join(words)


def build_vocabulary(texts: Sequence[str]) -> Vocabulary:
    """Whitespace-token vocabulary: specials then sorted unique corpus tokens."""
    seen = sorted({tok for text in texts for tok in text.split()})
    return Vocabulary(tokens=SPECIAL_TOKENS + tuple(seen))


class Ablation(Enum):
    FULL = "full"
    WITHOUT_GRAPH = "no-graph"
    IMAGE_SUBGRAPH_ONLY = "image-sg"
    TEXT_SUBGRAPH_ONLY = "text-sg"


@dataclass(frozen=True)
class DecoderConfig:
    d_model: int = 64
    n_layers: int = 2
    n_heads: int = 4
    ffn_mult: int = 4
    max_caption_len: int = 50
    max_article_len: int = 512
    d_e: int = 16
    d_v: int = 32

    def __post_init__(self):
        if self.n_layers < 1:
            raise SchemaError("decoder needs at least one layer")
        if self.d_model % self.n_heads != 0:
            raise SchemaError(f"d_model {self.d_model} not divisible by {self.n_heads} heads")


@dataclass(frozen=True, eq=False)
class Memory:
    """Raw memory segments; projection to d_model happens inside the decoder.

    ``graph`` rows are GAT encodings (d_model) unless ``graph_is_raw`` marks
    them as raw visual features (d_v), as in the image-sub-graph ablation.
    """

    text: np.ndarray  # (L_T, d_e)
    image: np.ndarray  # (R, d_v)
    graph: np.ndarray  # (|V^G|, d_model) or (|V^G|, d_v) when graph_is_raw
    graph_is_raw: bool = False

    @property
    def n_rows(self) -> int:
        return self.text.shape[0] + self.image.shape[0] + self.graph.shape[0]

    @property
    def segment_tags(self) -> np.ndarray:
        return np.concatenate(
            [
                np.zeros(self.text.shape[0], dtype=np.int64),
                np.ones(self.image.shape[0], dtype=np.int64),
                np.full(self.graph.shape[0], 2, dtype=np.int64),
            ]
        )


def _rows(mat: Optional[np.ndarray], cols: int) -> np.ndarray:
    if mat is None:
        return np.zeros((0, cols))
    arr = np.asarray(mat, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"memory segment must be 2-d, got shape {arr.shape}")
    return arr


def assemble_memory(
    article_feats: Optional[np.ndarray],
    image_feats: Optional[np.ndarray],
    graph_encodings: Sequence[NodeEncoding],
    ablation_flags: Ablation = Ablation.FULL,
    graph: Optional[MultiModalGraph] = None,
    cfg: DecoderConfig = DecoderConfig(),
) -> Memory:
    """Stack the (text, image, graph) segments honoring the ablation flags.

    The graph argument supplies node kinds / raw features and is required for
    the two sub-graph ablations.
    """
    text = _rows(article_feats, cfg.d_e)
    image = _rows(image_feats, cfg.d_v)
    if text.shape[0] and text.shape[1] != cfg.d_e:
        raise DimensionError(f"text rows have dim {text.shape[1]}, expected {cfg.d_e}")
    if image.shape[0] and image.shape[1] != cfg.d_v:
        raise DimensionError(f"image rows have dim {image.shape[1]}, expected {cfg.d_v}")

    graph_is_raw = False
    if ablation_flags is Ablation.WITHOUT_GRAPH:
        graph_rows = np.zeros((0, cfg.d_model))
    elif ablation_flags is Ablation.IMAGE_SUBGRAPH_ONLY:
        if graph is None:
            raise SchemaError("IMAGE_SUBGRAPH_ONLY needs the graph for raw visual features")
        feats = [
            np.asarray(n.feature, dtype=np.float64) for n in graph.nodes if not n.is_text
        ]
        graph_rows = np.stack(feats) if feats else np.zeros((0, cfg.d_v))
        graph_is_raw = True
    elif ablation_flags is Ablation.TEXT_SUBGRAPH_ONLY:
        if graph is None:
            raise SchemaError("TEXT_SUBGRAPH_ONLY needs the graph to filter text nodes")
        text_ids = {n.node_id for n in graph.nodes if n.is_text}
        rows = [e.vector for e in graph_encodings if e.node_id in text_ids]
        graph_rows = np.stack(rows) if rows else np.zeros((0, cfg.d_model))
    else:
        rows = [e.vector for e in graph_encodings]
        graph_rows = np.stack(rows) if rows else np.zeros((0, cfg.d_model))
    graph_rows = np.asarray(graph_rows, dtype=np.float64)
    if graph_rows.shape[0]:
        want = cfg.d_v if graph_is_raw else cfg.d_model
        if graph_rows.shape[1] != want:
            raise DimensionError(f"graph rows have dim {graph_rows.shape[1]}, expected {want}")

    memory = Memory(text=text, image=image, graph=graph_rows, graph_is_raw=graph_is_raw)
    if memory.n_rows == 0:
        raise EmptyMemory("all memory segments are empty")
    return memory


# ---------------------------------------------------------------------------
# parameters


def init_decoder_params(
    vocab_size: int, cfg: DecoderConfig, seed: int = 0
) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(seed)
    d = cfg.d_model

    def glorot(n_in, n_out):
        return np.sqrt(2.0 / (n_in + n_out)) * rng.standard_normal((n_in, n_out))

    params: dict[str, np.ndarray] = {
        "tok_emb": 0.1 * rng.standard_normal((vocab_size, d)),
        "pos_emb": 0.1 * rng.standard_normal((cfg.max_caption_len + 1, d)),
        "seg_emb": 0.1 * rng.standard_normal((3, d)),
        "mem_pos": 0.1 * rng.standard_normal((cfg.max_article_len, d)),
        "mem_text": glorot(cfg.d_e, d),
        "mem_text_b": np.zeros(d),
        "mem_img": glorot(cfg.d_v, d),
        "mem_img_b": np.zeros(d),
        "ln_f.g": np.ones(d),
        "ln_f.b": np.zeros(d),
        "W_out": glorot(d, vocab_size),
        "b_out": np.zeros(vocab_size),
    }
    for i in range(cfg.n_layers):
        for block in ("self", "cross"):
            for w in ("Wq", "Wk", "Wv", "Wo"):
                params[f"L{i}.{block}.{w}"] = glorot(d, d)
            for b in ("bq", "bk", "bv", "bo"):
                params[f"L{i}.{block}.{b}"] = np.zeros(d)
        params[f"L{i}.ffn.W1"] = glorot(d, cfg.ffn_mult * d)
        params[f"L{i}.ffn.b1"] = np.zeros(cfg.ffn_mult * d)
        params[f"L{i}.ffn.W2"] = glorot(cfg.ffn_mult * d, d)
        params[f"L{i}.ffn.b2"] = np.zeros(d)
        for ln in ("ln1", "ln2", "ln3"):
            params[f"L{i}.{ln}.g"] = np.ones(d)
            params[f"L{i}.{ln}.b"] = np.zeros(d)
    return params


# ---------------------------------------------------------------------------
# forward graph


def _attention_block(
    prefix: str,
    q_src: Tensor,
    kv_src: Tensor,
    mask_add: Optional[np.ndarray],
    t: dict[str, Tensor],
    n_heads: int,
) -> Tensor:
    d = q_src.shape[-1]
    dh = d // n_heads
    T = q_src.shape[0]
    S = kv_src.shape[0]

    def split(x: Tensor, n: int) -> Tensor:
        return ad.transpose(ad.reshape(x, (n, n_heads, dh)), (1, 0, 2))

    q = split(ad.add(ad.matmul(q_src, t[f"{prefix}.Wq"]), t[f"{prefix}.bq"]), T)
    k = split(ad.add(ad.matmul(kv_src, t[f"{prefix}.Wk"]), t[f"{prefix}.bk"]), S)
    v = split(ad.add(ad.matmul(kv_src, t[f"{prefix}.Wv"]), t[f"{prefix}.bv"]), S)
    scores = ad.mul(ad.matmul(q, ad.transpose(k, (0, 2, 1))), 1.0 / np.sqrt(dh))
    if mask_add is not None:
        scores = ad.add(scores, ad.Tensor(mask_add))
    attn = ad.softmax(scores, axis=-1)
    out = ad.matmul(attn, v)  # (H, T, dh)
    merged = ad.reshape(ad.transpose(out, (1, 0, 2)), (T, d))
    return ad.add(ad.matmul(merged, t[f"{prefix}.Wo"]), t[f"{prefix}.bo"])


def _ln(prefix: str, x: Tensor, t: dict[str, Tensor]) -> Tensor:
    return ad.layer_norm(x, t[f"{prefix}.g"], t[f"{prefix}.b"])


def memory_rows_t(
    memory_text: np.ndarray,
    memory_image: np.ndarray,
    graph_rows: Tensor | np.ndarray,
    graph_is_raw: bool,
    t: dict[str, Tensor],
) -> Tensor:
    """Project raw memory segments to d_model rows (text, image, graph order)."""
    parts: list[Tensor] = []
    seg = t["seg_emb"]
    if memory_text.shape[0]:
        rows = ad.add(ad.matmul(ad.Tensor(memory_text), t["mem_text"]), t["mem_text_b"])
        rows = ad.add(rows, ad.slice_axis(t["mem_pos"], 0, 0, memory_text.shape[0]))
        parts.append(ad.add(rows, ad.gather_rows(seg, [0])))
    if memory_image.shape[0]:
        rows = ad.add(ad.matmul(ad.Tensor(memory_image), t["mem_img"]), t["mem_img_b"])
        parts.append(ad.add(rows, ad.gather_rows(seg, [1])))
    graph_t = ad.as_tensor(graph_rows)
    if graph_t.shape[0]:
        if graph_is_raw:
            graph_t = ad.add(ad.matmul(graph_t, t["mem_img"]), t["mem_img_b"])
        parts.append(ad.add(graph_t, ad.gather_rows(seg, [2])))
    if not parts:
        raise EmptyMemory("all memory segments are empty")
    return parts[0] if len(parts) == 1 else ad.concat(parts, axis=0)


def logits_t(
    mem_rows: Tensor,
    prefix_ids: Sequence[int],
    t: dict[str, Tensor],
    cfg: DecoderConfig,
) -> Tensor:
    """Per-position vocabulary logits (T, |V|) for a teacher-forced prefix."""
    vocab_size = t["tok_emb"].shape[0]
    ids = list(prefix_ids)
    if not ids:
        raise SchemaError("prefix must be non-empty (start with BOS)")
    for i in ids:
        if not (0 <= i < vocab_size):
            raise UnknownTokenId(f"token id {i} outside vocabulary of {vocab_size}")
    if len(ids) > t["pos_emb"].shape[0]:
        raise LengthError(
            f"prefix of {len(ids)} exceeds position capacity {t['pos_emb'].shape[0]}"
        )
    T = len(ids)
    x = ad.add(ad.gather_rows(t["tok_emb"], ids), ad.slice_axis(t["pos_emb"], 0, 0, T))
    causal = np.where(np.tril(np.ones((T, T), dtype=bool)), 0.0, NEG_MASK)
    for i in range(cfg.n_layers):
        normed = _ln(f"L{i}.ln1", x, t)
        x = ad.add(x, _attention_block(f"L{i}.self", normed, normed, causal, t, cfg.n_heads))
        x = ad.add(x, _attention_block(f"L{i}.cross", _ln(f"L{i}.ln2", x, t), mem_rows, None, t, cfg.n_heads))
        h = _ln(f"L{i}.ln3", x, t)
        h = ad.add(ad.matmul(h, t[f"L{i}.ffn.W1"]), t[f"L{i}.ffn.b1"])
        h = ad.relu(h)
        h = ad.add(ad.matmul(h, t[f"L{i}.ffn.W2"]), t[f"L{i}.ffn.b2"])
        x = ad.add(x, h)
    x = _ln("ln_f", x, t)
    return ad.add(ad.matmul(x, t["W_out"]), t["b_out"])


def _const_tensors(params: dict[str, np.ndarray]) -> dict[str, Tensor]:
    return {k: ad.Tensor(v) for k, v in params.items()}


def decoder_forward(
    memory: Memory, prefix_ids: Sequence[int], params: dict[str, np.ndarray], cfg: DecoderConfig
) -> np.ndarray:
    """Logits (T, |V|) with no gradient tracking."""
    t = _const_tensors(params)
    rows = memory_rows_t(memory.text, memory.image, memory.graph, memory.graph_is_raw, t)
    return logits_t(rows, prefix_ids, t, cfg).data


def decoder_step(
    memory: Memory, prefix_ids: Sequence[int], params: dict[str, np.ndarray], cfg: DecoderConfig
) -> np.ndarray:
    """Next-token probability vector given the prefix (softmax of last logits)."""
    logits = decoder_forward(memory, prefix_ids, params, cfg)[-1]
    shifted = logits - logits.max()
    e = np.exp(shifted)
    return e / e.sum()


def caption_loss(
    memory: Memory,
    gold_ids: Sequence[int],
    params: dict[str, np.ndarray],
    cfg: DecoderConfig,
) -> tuple[float, dict[str, np.ndarray]]:
    """Summed negative log-likelihood of the gold tokens plus exact gradients.

    PAD positions are excluded from the sum.  The teacher-forced prefix is
    BOS followed by the gold tokens shifted right by one.
    """
    gold = list(gold_ids)
    if len(gold) > cfg.max_caption_len:
        raise LengthError(f"gold caption of {len(gold)} exceeds {cfg.max_caption_len}")
    tensors = ad.param_tensors(params)
    if not gold:
        return 0.0, ad.collect_grads(tensors)
    rows = memory_rows_t(memory.text, memory.image, memory.graph, memory.graph_is_raw, tensors)
    prefix = [BOS] + gold[:-1]
    lsm = ad.log_softmax(logits_t(rows, prefix, tensors, cfg), axis=-1)
    positions = [i for i, tok in enumerate(gold) if tok != PAD]
    picked = ad.pick(lsm, positions, [gold[i] for i in positions])
    loss = ad.mul(ad.tsum(picked), -1.0)
    ad.backward(loss)
    return float(loss.data), ad.collect_grads(tensors)


# ---------------------------------------------------------------------------
# generation

StepFn = Callable[[tuple[int, ...]], np.ndarray]


def greedy_search(step_fn: StepFn, max_len: int) -> list[int]:
    """Argmax decoding (lowest id wins ties); stops at EOS or max_len."""
    prefix: tuple[int, ...] = (BOS,)
    out: list[int] = []
    for _ in range(max_len):
        token = int(np.argmax(step_fn(prefix)))
        if token == EOS:
            break
        out.append(token)
        prefix = prefix + (token,)
    return out


def beam_search(
    step_fn: StepFn, max_len: int, beam_size: int, length_norm: float = 0.0
) -> list[int]:
    """Beam decoding by total log-probability with optional length norm.

    Candidates sort by (-score, token sequence) so ties resolve to the lowest
    token ids, making beam(1) coincide with greedy search.
    """
    live: list[tuple[float, tuple[int, ...]]] = [(0.0, (BOS,))]
    completed: list[tuple[float, tuple[int, ...]]] = []
    for _ in range(max_len):
        if not live:
            break
        candidates: list[tuple[float, tuple[int, ...]]] = []
        for score, prefix in live:
            log_probs = np.log(np.maximum(step_fn(prefix), 1e-300))
            for token, lp in enumerate(log_probs):
                candidates.append((score + float(lp), prefix + (token,)))
        candidates.sort(key=lambda c: (-c[0], c[1]))
        live = []
        for score, seq in candidates[:beam_size]:
            if seq[-1] == EOS:
                completed.append((score, seq[1:-1]))
            else:
                live.append((score, seq))
    completed.extend((score, seq[1:]) for score, seq in live)

    def ranking(item: tuple[float, tuple[int, ...]]):
        score, seq = item
        if length_norm > 0.0 and len(seq) > 0:
            score = score / (len(seq) ** length_norm)
        return (-score, seq)

    completed.sort(key=ranking)
    return list(completed[0][1])


def generate(
    memory: Memory,
    params: dict[str, np.ndarray],
    cfg: DecoderConfig,
    mode: str = "greedy",
    max_len: int = 50,
    beam_size: int = 1,
    length_norm: float = 0.0,
) -> list[int]:
    """Decode a caption token id sequence (BOS/EOS excluded from the output)."""
    if max_len > cfg.max_caption_len:
        raise LengthError(f"max_len {max_len} exceeds configured {cfg.max_caption_len}")
    t = _const_tensors(params)
    rows = memory_rows_t(memory.text, memory.image, memory.graph, memory.graph_is_raw, t)

    def step_fn(prefix: tuple[int, ...]) -> np.ndarray:
        logits = logits_t(rows, list(prefix), t, cfg).data[-1]
        shifted = logits - logits.max()
        e = np.exp(shifted)
        return e / e.sum()

    if mode == "greedy":
        return greedy_search(step_fn, max_len)
    if mode == "beam":
        return beam_search(step_fn, max_len, beam_size, length_norm)
    raise SchemaError(f"unknown decoding mode {mode!r}")
