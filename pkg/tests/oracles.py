"""Independent reference implementations used as test oracles.

Everything here is deliberately written in a different style from the package
(per-edge loops, explicit enumeration, dict bookkeeping) so agreement is
meaningful evidence rather than shared code.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from typing import Callable, Sequence

import numpy as np


def finite_difference(
    f: Callable[[], float], arrays: dict[str, np.ndarray], eps: float = 1e-5
) -> dict[str, np.ndarray]:
    """Central finite differences of f() w.r.t. every entry of every array.

    f must read the array objects in-place (closure), they are mutated and
    restored entry by entry.
    """
    grads = {}
    for name, arr in arrays.items():
        g = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            fp = f()
            flat[i] = orig - eps
            fm = f()
            flat[i] = orig
            gflat[i] = (fp - fm) / (2.0 * eps)
        grads[name] = g
    return grads


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    # the 1e-2 scale floor keeps central-difference roundoff (~1e-11) from
    # dominating parameters whose true gradient is exactly zero (e.g. a key
    # bias, which cancels inside the softmax)
    denom = max(np.abs(analytic).max(initial=0.0), np.abs(numeric).max(initial=0.0), 1e-2)
    return float(np.abs(analytic - numeric).max(initial=0.0) / denom)


# ---------------------------------------------------------------------------
# text sub-graph brute force


def reference_text_subgraph(article, d_e: int = 4):
    """Brute-force rule-by-rule builder: returns (nodes, edges) as plain dicts.

    nodes: id -> dict(kind, label, feature); edges: set of (src, dst, kind).
    Relation node ids follow the rel{i} convention so outputs are comparable.
    d_e sets the zero-vector width for mentions without embeddings.
    """
    span = {e.id: e.char_span for e in article.entities}
    ent = {e.id: e for e in article.entities}
    rep = {e.id: e.id for e in article.entities}
    for chain in article.coref_chains:
        ordered = sorted(chain.mention_ids, key=lambda m: (span[m][0], span[m][1], m))
        for m in chain.mention_ids:
            rep[m] = ordered[0]

    def feature_of(entity_id):
        e = ent[entity_id]
        if e.embedding is not None:
            return np.asarray(e.embedding, dtype=np.float32)
        return np.zeros(d_e, dtype=np.float32)

    nodes = {}
    edges = set()
    roles = {}
    for idx, tri in enumerate(article.triples):
        h = rep[tri.head_id]
        t = rep[tri.tail_id]
        if h not in roles:
            roles[h] = "HEAD"
        if t not in roles:
            roles[t] = "TAIL"
        nodes[h] = {"kind": roles[h], "label": ent[h].surface, "feature": feature_of(h)}
        nodes[t] = {"kind": roles[t], "label": ent[t].surface, "feature": feature_of(t)}
        if tri.relation_embedding is not None:
            rel_feat = np.asarray(tri.relation_embedding, dtype=np.float32)
        else:
            parts = [
                np.asarray(ent[x].embedding, dtype=np.float64)
                for x in (tri.head_id, tri.tail_id)
                if ent[x].embedding is not None
            ]
            rel_feat = (
                (np.mean(parts, axis=0)).astype(np.float32)
                if parts
                else np.zeros(d_e, dtype=np.float32)
            )
        rid = f"rel{idx}"
        nodes[rid] = {"kind": "RELATION", "label": tri.relation_text, "feature": rel_feat}
        edges.add((h, rid, "TRIPLE" if h == tri.head_id else "COREF_REWIRE"))
        edges.add((rid, t, "TRIPLE" if t == tri.tail_id else "COREF_REWIRE"))
    return nodes, edges


# ---------------------------------------------------------------------------
# matcher oracles


def reference_cosine(u_e, u_v, w_e, w_v):
    a = np.zeros(w_e.shape[0])
    for r in range(w_e.shape[0]):
        for c in range(w_e.shape[1]):
            a[r] += w_e[r, c] * u_e[c]
    b = np.zeros(w_v.shape[0])
    for r in range(w_v.shape[0]):
        for c in range(w_v.shape[1]):
            b[r] += w_v[r, c] * u_v[c]
    na = float(np.sqrt((a * a).sum()))
    nb = float(np.sqrt((b * b).sum()))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(a @ b / (na * nb))


def reference_margin_loss(pairs, w_e, w_v, delta) -> float:
    """Enumerate all in-batch negatives for each positive, mean of hinge sums."""
    n = len(pairs)
    sims = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            sims[i, j] = reference_cosine(pairs[i][0], pairs[j][1], w_e, w_v)
    total = 0.0
    for i in range(n):
        neg_e = max(sims[j, i] for j in range(n) if j != i)
        neg_v = max(sims[i, k] for k in range(n) if k != i)
        total += max(0.0, delta + neg_e - sims[i, i]) + max(0.0, delta + neg_v - sims[i, i])
    return total / n


def reference_all_pairs_matches(text_nodes, visual_nodes, w_e, w_v, threshold):
    """Exhaustive filter over all (text, visual) pairs with sim > threshold."""
    out = set()
    for t in text_nodes:
        if not np.any(np.asarray(t.feature)):
            continue
        for v in visual_nodes:
            sim = reference_cosine(
                np.asarray(t.feature, dtype=np.float64),
                np.asarray(v.feature, dtype=np.float64),
                w_e,
                w_v,
            )
            if sim > threshold:
                out.add((t.node_id, v.node_id))
    return out


# ---------------------------------------------------------------------------
# GAT slow reference


def slow_gat_layer(x, W, a, mask, slope, average):
    """Per-node, per-edge attention layer as explicit loops."""
    heads, d_out, _ = W.shape
    n = x.shape[0]
    head_outs = []
    for h in range(heads):
        proj = np.stack([W[h] @ x[i] for i in range(n)])
        out = np.zeros((n, d_out))
        for i in range(n):
            neigh = [j for j in range(n) if mask[i, j]]
            raw = []
            for j in neigh:
                z = float(a[h] @ np.concatenate([proj[i], proj[j]]))
                raw.append(z if z > 0 else slope * z)
            raw = np.asarray(raw)
            e = np.exp(raw - raw.max())
            alpha = e / e.sum()
            for weight, j in zip(alpha, neigh):
                out[i] += weight * proj[j]
        head_outs.append(out)
    if average:
        return sum(head_outs) / heads
    return np.concatenate(head_outs, axis=1)


def slow_gat_forward(graph, params, add_reverse=False):
    n = len(graph.nodes)
    index = {node.node_id: i for i, node in enumerate(graph.nodes)}
    mask = np.eye(n, dtype=bool)
    for edge in graph.edges:
        mask[index[edge.dst], index[edge.src]] = True
        if add_reverse:
            mask[index[edge.src], index[edge.dst]] = True
    x0 = np.stack(
        [
            np.asarray(node.feature, dtype=np.float64)
            @ (params.p_text if node.is_text else params.p_visual)
            for node in graph.nodes
        ]
    )
    h1 = slow_gat_layer(x0, params.layer1.W, params.layer1.a, mask, params.leaky_slope, False)
    h1 = np.where(h1 > 0, h1, np.exp(np.minimum(h1, 0.0)) - 1.0)  # elu, alpha=1
    return slow_gat_layer(h1, params.layer2.W, params.layer2.a, mask, params.leaky_slope, True)


# ---------------------------------------------------------------------------
# decoder slow reference


def _slow_softmax(v):
    e = np.exp(v - v.max())
    return e / e.sum()


def _slow_ln(x, g, b, eps=1e-5):
    out = np.zeros_like(x)
    for i in range(x.shape[0]):
        mu = x[i].mean()
        var = x[i].var()
        out[i] = (x[i] - mu) / np.sqrt(var + eps) * g + b
    return out


def _slow_mha(prefix, q_src, kv_src, causal, params, n_heads):
    d = q_src.shape[1]
    dh = d // n_heads
    T, S = q_src.shape[0], kv_src.shape[0]
    q = q_src @ params[f"{prefix}.Wq"] + params[f"{prefix}.bq"]
    k = kv_src @ params[f"{prefix}.Wk"] + params[f"{prefix}.bk"]
    v = kv_src @ params[f"{prefix}.Wv"] + params[f"{prefix}.bv"]
    merged = np.zeros((T, d))
    for h in range(n_heads):
        sl = slice(h * dh, (h + 1) * dh)
        for i in range(T):
            scores = np.empty(S)
            for j in range(S):
                scores[j] = q[i, sl] @ k[j, sl] / np.sqrt(dh)
                if causal and j > i:
                    scores[j] = -1e30
            alpha = _slow_softmax(scores)
            for j in range(S):
                merged[i, sl] += alpha[j] * v[j, sl]
    return merged @ params[f"{prefix}.Wo"] + params[f"{prefix}.bo"]


def slow_decoder_logits(memory, prefix_ids, params, cfg):
    """Loop-based re-implementation of the decoder forward pass."""
    rows = []
    if memory.text.shape[0]:
        projected = memory.text @ params["mem_text"] + params["mem_text_b"]
        projected = projected + params["mem_pos"][: memory.text.shape[0]]
        rows.extend(projected + params["seg_emb"][0])
    if memory.image.shape[0]:
        projected = memory.image @ params["mem_img"] + params["mem_img_b"]
        rows.extend(projected + params["seg_emb"][1])
    if memory.graph.shape[0]:
        graph_rows = memory.graph
        if memory.graph_is_raw:
            graph_rows = graph_rows @ params["mem_img"] + params["mem_img_b"]
        rows.extend(graph_rows + params["seg_emb"][2])
    mem = np.stack(rows)
    T = len(prefix_ids)
    x = params["tok_emb"][list(prefix_ids)] + params["pos_emb"][:T]
    for i in range(cfg.n_layers):
        normed = _slow_ln(x, params[f"L{i}.ln1.g"], params[f"L{i}.ln1.b"])
        x = x + _slow_mha(f"L{i}.self", normed, normed, True, params, cfg.n_heads)
        normed = _slow_ln(x, params[f"L{i}.ln2.g"], params[f"L{i}.ln2.b"])
        x = x + _slow_mha(f"L{i}.cross", normed, mem, False, params, cfg.n_heads)
        normed = _slow_ln(x, params[f"L{i}.ln3.g"], params[f"L{i}.ln3.b"])
        h = np.maximum(normed @ params[f"L{i}.ffn.W1"] + params[f"L{i}.ffn.b1"], 0.0)
        x = x + h @ params[f"L{i}.ffn.W2"] + params[f"L{i}.ffn.b2"]
    x = _slow_ln(x, params["ln_f.g"], params["ln_f.b"])
    return x @ params["W_out"] + params["b_out"]


# ---------------------------------------------------------------------------
# search / components / metric oracles


def exhaustive_best_path(step_fn, vocab_size, max_len, bos, eos):
    """Enumerate every decode path and return the best (score, tokens)."""
    best = (-np.inf, None)

    def visit(prefix, tokens, score):
        nonlocal best
        log_probs = np.log(np.maximum(step_fn(tuple(prefix)), 1e-300))
        for tok in range(vocab_size):
            s = score + float(log_probs[tok])
            if tok == eos:
                if s > best[0] or (s == best[0] and best[1] is not None and tokens < best[1]):
                    best = (s, list(tokens))
            elif len(tokens) + 1 <= max_len:
                new_tokens = tokens + [tok]
                if len(new_tokens) == max_len:
                    if s > best[0] or (s == best[0] and best[1] is not None and new_tokens < best[1]):
                        best = (s, new_tokens)
                else:
                    visit(prefix + [tok], new_tokens, s)

    visit([bos], [], 0.0)
    return best


def union_find_components(n_nodes, edges):
    parent = list(range(n_nodes))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    return len({find(i) for i in range(n_nodes)})


def slow_cider_d(hyps: Sequence[Sequence[str]], refs: Sequence[Sequence[str]], sigma=6.0):
    """Array-based CIDEr-D re-implementation over a single-reference corpus."""
    n_inst = len(hyps)
    df = defaultdict(int)
    for ref in refs:
        grams = set()
        for n in range(1, 5):
            for i in range(len(ref) - n + 1):
                grams.add(tuple(ref[i : i + n]))
        for g in grams:
            df[g] += 1

    def vec(tokens, n):
        counts = Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))
        return {
            g: c * (np.log(n_inst) - np.log(max(1.0, df[g]))) for g, c in counts.items()
        }

    scores = []
    for hyp, ref in zip(hyps, refs):
        per_n = []
        delta = len(hyp) - len(ref)
        pen = np.exp(-(delta**2) / (2 * sigma**2))
        for n in range(1, 5):
            hv, rv = vec(hyp, n), vec(ref, n)
            num = sum(min(hv[g], rv.get(g, 0.0)) * rv.get(g, 0.0) for g in hv)
            nh = np.sqrt(sum(x * x for x in hv.values()))
            nr = np.sqrt(sum(x * x for x in rv.values()))
            per_n.append((num / (nh * nr) if nh > 0 and nr > 0 else 0.0) * pen)
        scores.append(np.mean(per_n) * 10.0)
    return float(np.mean(scores))
