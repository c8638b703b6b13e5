"""Command-line surface for the pipeline.

Typical flow:

    mmkgcap synth-corpus --out data/ --samples 50 --seed 0
    mmkgcap train-matcher --kb data/kb.jsonl --epochs 50 --out matcher.ckpt
    mmkgcap build-graph --articles data/articles.jsonl --images data/images.jsonl \
        --pairs data/captions.jsonl --matcher matcher.ckpt --out graphs/
    mmkgcap train-captioner --data data/ --graphs graphs/ --matcher matcher.ckpt \
        --ablation full --out cap.ckpt
    mmkgcap generate --ckpt cap.ckpt --data data/ --graphs graphs/ --out hyps.jsonl
    mmkgcap evaluate --hyps hyps.jsonl --refs data/captions.jsonl \
        --entities data/entities.jsonl --report report.json
"""

from __future__ import annotations

import functools
import json
from dataclasses import replace
from pathlib import Path

import click

from . import core
from .captioner import (
    TrainCaptionerConfig,
    caption_sample,
    load_captioner,
    save_captioner,
    train_captioner,
)
from .decoder import Ablation, DecoderConfig
from .errors import MmkgError, SchemaError
from .graph import (
    ImageSubgraphLimits,
    build_image_subgraph,
    build_mmkg,
    build_text_subgraph,
    graph_stats,
)
from .kb import SynthKbConfig, load_kb, save_kb, split_kb, synth_kb
from .matcher import (
    TrainMatcherConfig,
    load_matcher,
    match_entities,
    save_matcher,
    train_matcher,
)
from .metrics import evaluate_corpus
from .toydata import ToyCorpusConfig, generate_toy_corpus, write_corpus
from .trainer import OptimConfig, config_as_json, load_optim_config


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except MmkgError as exc:
            raise click.ClickException(str(exc)) from exc

    return wrapper


def print_config_option(fn):
    def callback(ctx, _param, value):
        if value:
            click.echo(config_as_json(OptimConfig()))
            ctx.exit(0)

    return click.option(
        "--print-config",
        is_flag=True,
        expose_value=False,
        is_eager=True,
        callback=callback,
        help="Print optimizer defaults as JSON and exit.",
    )(fn)


def _optim(config_path, **overrides) -> OptimConfig:
    base = load_optim_config(config_path) if config_path else OptimConfig()
    overrides = {k: v for k, v in overrides.items() if v is not None}
    return replace(base, **overrides)


@click.group()
@click.version_option(package_name="mmkgcap")
def main():
    """Multi-modal knowledge-graph captioning toolkit."""


# ---------------------------------------------------------------------------
# kb


@main.group()
def kb():
    """Knowledge-base utilities."""


@kb.command("validate")
@click.option("--kb", "kb_path", required=True, type=click.Path(exists=True))
@click.option("--dim-e", default=1024, show_default=True)
@click.option("--dim-v", default=2048, show_default=True)
@handle_errors
def kb_validate(kb_path, dim_e, dim_v):
    base, dups = load_kb(kb_path, core.DataConfig(d_e=dim_e, d_v=dim_v))
    click.echo(f"ok: {len(base)} entries, {dups} duplicates dropped")


@kb.command("synth")
@click.option("--entities", default=200, show_default=True)
@click.option("--clusters", default=8, show_default=True)
@click.option("--dim-e", default=16, show_default=True)
@click.option("--dim-v", default=32, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
@handle_errors
def kb_synth(entities, clusters, dim_e, dim_v, seed, out):
    base = synth_kb(
        SynthKbConfig(
            n_entities=entities, n_clusters=clusters, d_e=dim_e, d_v=dim_v, seed=seed
        )
    )
    save_kb(base, out)
    click.echo(f"wrote {len(base)} entries to {out}")


# ---------------------------------------------------------------------------
# data validation / synthesis


@main.command("validate")
@click.option("--articles", type=click.Path(exists=True))
@click.option("--images", type=click.Path(exists=True))
@click.option("--captions", type=click.Path(exists=True))
@click.option("--kb", "kb_path", type=click.Path(exists=True))
@click.option("--dim-e", default=1024, show_default=True)
@click.option("--dim-v", default=2048, show_default=True)
@handle_errors
def validate_cmd(articles, images, captions, kb_path, dim_e, dim_v):
    """Validate data files against the JSONL schemas."""
    cfg = core.DataConfig(d_e=dim_e, d_v=dim_v)
    if not any([articles, images, captions, kb_path]):
        raise click.ClickException("nothing to validate; pass at least one file")
    if articles:
        n = len(core.load_articles(articles, cfg))
        click.echo(f"articles ok: {n} records")
    if images:
        n = len(core.load_images(images, cfg))
        click.echo(f"images ok: {n} records")
    if captions:
        recs = core.load_captions(captions)
        for rec in recs:
            core.validate_caption(rec, cfg)
        click.echo(f"captions ok: {len(recs)} records")
    if kb_path:
        base, dups = load_kb(kb_path, cfg)
        click.echo(f"kb ok: {len(base)} entries, {dups} duplicates dropped")


@main.command("synth-corpus")
@click.option("--out", required=True, type=click.Path())
@click.option("--samples", default=50, show_default=True)
@click.option("--dim-e", default=16, show_default=True)
@click.option("--dim-v", default=32, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--graph-only-signal", is_flag=True, help="Captions predictable only from graph nodes.")
@handle_errors
def synth_corpus(out, samples, dim_e, dim_v, seed, graph_only_signal):
    """Write a synthetic desk-scale corpus (articles/images/captions/kb/entities)."""
    corpus = generate_toy_corpus(
        ToyCorpusConfig(
            n_samples=samples,
            d_e=dim_e,
            d_v=dim_v,
            seed=seed,
            graph_only_signal=graph_only_signal,
        )
    )
    write_corpus(corpus, out)
    click.echo(f"wrote {samples} samples to {out}")


# ---------------------------------------------------------------------------
# matcher


@main.command("train-matcher")
@click.option("--kb", "kb_path", required=True, type=click.Path(exists=True))
@click.option("--epochs", default=50, show_default=True)
@click.option("--batch", default=32, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--d", "common_dim", default=32, show_default=True, help="Common space dimension.")
@click.option("--delta", default=0.2, show_default=True, help="Hinge margin.")
@click.option("--val-ratio", default=0.2, show_default=True)
@click.option("--dim-e", default=16, show_default=True)
@click.option("--dim-v", default=32, show_default=True)
@click.option("--optim-config", type=click.Path(exists=True), help="JSON/TOML OptimConfig file.")
@click.option("--out", required=True, type=click.Path())
@print_config_option
@handle_errors
def train_matcher_cmd(kb_path, epochs, batch, seed, common_dim, delta, val_ratio, dim_e, dim_v, optim_config, out):
    base, dups = load_kb(kb_path, core.DataConfig(d_e=dim_e, d_v=dim_v))
    if dups:
        click.echo(f"note: dropped {dups} duplicate entries")
    train, val = split_kb(base, 1.0 - val_ratio, seed)
    if optim_config:
        optim = _optim(optim_config, batch_size=batch, seed=seed)
    else:
        optim = replace(TrainMatcherConfig().optim, batch_size=batch, seed=seed)
    cfg = TrainMatcherConfig(epochs=epochs, d=common_dim, delta=delta, optim=optim)
    params, log = train_matcher(train, val, cfg)
    save_matcher(params, out, seed=seed)
    for entry in log:
        click.echo(
            f"epoch {entry.epoch:3d} loss {entry.loss:.4f} recall@1 {entry.recall_at_1:.3f} lr {entry.lr:.2e}"
        )
    best = max((e.recall_at_1 for e in log), default=0.0)
    click.echo(f"saved {out} (best recall@1 {best:.3f})")


@main.command("match")
@click.option("--graph-text", required=True, type=click.Path(exists=True))
@click.option("--graph-image", required=True, type=click.Path(exists=True))
@click.option("--matcher", "matcher_path", required=True, type=click.Path(exists=True))
@click.option("--threshold", default=0.4, show_default=True)
@click.option("--out", type=click.Path(), help="Write matches as JSONL (default stdout).")
@handle_errors
def match_cmd(graph_text, graph_image, matcher_path, threshold, out):
    """Score cross-modal pairs between a text and an image sub-graph."""
    params = load_matcher(matcher_path)
    text_sg = core.load_graph(graph_text)
    image_sg = core.load_graph(graph_image)
    pairs = match_entities(
        [n for n in text_sg.nodes if n.is_text],
        [n for n in image_sg.nodes if not n.is_text],
        params,
        threshold,
    )
    lines = [
        json.dumps({"text_node_id": t, "visual_node_id": v, "sim": s}) for t, v, s in pairs
    ]
    if out:
        Path(out).write_text("\n".join(lines) + ("\n" if lines else ""))
        click.echo(f"wrote {len(lines)} matches to {out}")
    else:
        for line in lines:
            click.echo(line)


# ---------------------------------------------------------------------------
# graphs


def _load_pairs(articles, images, pairs_path):
    art_by_id = {a.article_id: a for a in articles}
    img_by_id = {i.image_id: i for i in images}
    if pairs_path:
        pairs = []
        for rec in core.load_captions(pairs_path):
            if rec.article_id not in art_by_id:
                raise SchemaError(f"pairs file cites unknown article {rec.article_id!r}")
            if rec.image_id not in img_by_id:
                raise SchemaError(f"pairs file cites unknown image {rec.image_id!r}")
            pairs.append((art_by_id[rec.article_id], img_by_id[rec.image_id]))
        return pairs
    if len(articles) != len(images):
        raise SchemaError(
            f"{len(articles)} articles vs {len(images)} images; pass --pairs to align them"
        )
    return list(zip(articles, images))


def graph_filename(article_id: str, image_id: str) -> str:
    return f"{article_id}__{image_id}.json"


@main.command("build-graph")
@click.option("--articles", required=True, type=click.Path(exists=True))
@click.option("--images", required=True, type=click.Path(exists=True))
@click.option("--pairs", type=click.Path(exists=True), help="captions.jsonl supplying (article, image) pairs.")
@click.option("--matcher", "matcher_path", required=True, type=click.Path(exists=True))
@click.option("--threshold", default=0.4, show_default=True)
@click.option("--max-objects", default=64, show_default=True)
@click.option("--max-faces", default=4, show_default=True)
@click.option("--min-score", default=0.3, show_default=True)
@click.option("--link-relations/--no-link-relations", default=True, show_default=True)
@click.option("--emit-subgraphs", is_flag=True, help="Also write the text/image sub-graphs.")
@click.option("--out", required=True, type=click.Path())
@handle_errors
def build_graph_cmd(
    articles,
    images,
    pairs,
    matcher_path,
    threshold,
    max_objects,
    max_faces,
    min_score,
    link_relations,
    emit_subgraphs,
    out,
):
    """Build one merged graph per (article, image) pair plus a stats TSV."""
    params = load_matcher(matcher_path)
    cfg = core.DataConfig(d_e=params.d_e, d_v=params.d_v)
    art_list = core.load_articles(articles, cfg)
    img_list = core.load_images(images, cfg)
    limits = ImageSubgraphLimits(max_objects=max_objects, max_faces=max_faces, min_score=min_score)
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = ["article_id\timage_id\tnodes\tedges\tcross_modal\tcomponents"]
    for art, img in _load_pairs(art_list, img_list, pairs):
        text_sg = build_text_subgraph(art, cfg)
        image_sg = build_image_subgraph(img, limits)
        merged = build_mmkg(text_sg, image_sg, params, threshold, link_relations)
        stem = f"{art.article_id}__{img.image_id}"
        if emit_subgraphs:
            core.save_graph(text_sg, out_dir / f"{stem}.text.json", cfg)
            core.save_graph(image_sg, out_dir / f"{stem}.image.json", cfg)
        core.save_graph(merged, out_dir / graph_filename(art.article_id, img.image_id), cfg)
        stats = graph_stats(merged)
        rows.append(
            "\t".join(
                [
                    art.article_id,
                    img.image_id,
                    str(sum(stats.node_counts.values())),
                    str(sum(stats.edge_counts.values())),
                    str(stats.edge_counts["CROSS_MODAL"]),
                    str(stats.connected_components),
                ]
            )
        )
    (out_dir / "stats.tsv").write_text("\n".join(rows) + "\n")
    click.echo(f"wrote {len(rows) - 1} graphs to {out_dir}")


# ---------------------------------------------------------------------------
# captioner


ABLATIONS = {a.value: a for a in Ablation}


def _load_dataset(data_dir, cfg: core.DataConfig):
    data = Path(data_dir)
    articles = {a.article_id: a for a in core.load_articles(data / "articles.jsonl", cfg)}
    images = {i.image_id: i for i in core.load_images(data / "images.jsonl", cfg)}
    captions = core.load_captions(data / "captions.jsonl")
    dataset = []
    for cap in captions:
        if cap.article_id not in articles:
            raise SchemaError(f"caption cites unknown article {cap.article_id!r}")
        if cap.image_id not in images:
            raise SchemaError(f"caption cites unknown image {cap.image_id!r}")
        dataset.append((articles[cap.article_id], images[cap.image_id], cap))
    return dataset


def _load_graphs(graphs_dir, dataset):
    graphs = []
    for art, img, _cap in dataset:
        path = Path(graphs_dir) / graph_filename(art.article_id, img.image_id)
        if not path.exists():
            raise SchemaError(f"missing graph file {path}")
        graphs.append(core.load_graph(path))
    return graphs


@main.command("train-captioner")
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True))
@click.option("--graphs", "graphs_dir", required=True, type=click.Path(exists=True))
@click.option("--matcher", "matcher_path", required=True, type=click.Path(exists=True))
@click.option("--ablation", type=click.Choice(sorted(ABLATIONS)), default="full", show_default=True)
@click.option("--epochs", default=60, show_default=True)
@click.option("--batch", default=16, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--d-model", default=64, show_default=True)
@click.option("--layers", default=2, show_default=True)
@click.option("--heads", default=4, show_default=True)
@click.option("--optim-config", type=click.Path(exists=True), help="JSON/TOML OptimConfig file.")
@click.option("--out", required=True, type=click.Path())
@print_config_option
@handle_errors
def train_captioner_cmd(
    data_dir, graphs_dir, matcher_path, ablation, epochs, batch, seed, d_model, layers, heads, optim_config, out
):
    matcher = load_matcher(matcher_path)
    data_cfg = core.DataConfig(d_e=matcher.d_e, d_v=matcher.d_v)
    dataset = _load_dataset(data_dir, data_cfg)
    graphs = _load_graphs(graphs_dir, dataset)
    if optim_config:
        optim = _optim(optim_config, batch_size=batch, seed=seed)
    else:
        optim = replace(TrainCaptionerConfig().optim, batch_size=batch, seed=seed)
    cfg = TrainCaptionerConfig(
        decoder=DecoderConfig(
            d_model=d_model,
            n_layers=layers,
            n_heads=heads,
            ffn_mult=2,
            d_e=matcher.d_e,
            d_v=matcher.d_v,
        ),
        epochs=epochs,
        ablation=ABLATIONS[ablation],
        optim=optim,
    )
    model, log = train_captioner(dataset, graphs, matcher, cfg)
    save_captioner(model, out)
    for entry in log:
        click.echo(f"epoch {entry.epoch:3d} per-token loss {entry.per_token_loss:.4f} lr {entry.lr:.2e}")
    click.echo(f"saved {out}")


@main.command("generate")
@click.option("--ckpt", required=True, type=click.Path(exists=True))
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True))
@click.option("--graphs", "graphs_dir", required=True, type=click.Path(exists=True))
@click.option("--beam", default=1, show_default=True, help="Beam size; 1 means greedy.")
@click.option("--max-len", default=50, show_default=True)
@click.option("--length-norm", default=0.0, show_default=True)
@click.option("--out", required=True, type=click.Path())
@handle_errors
def generate_cmd(ckpt, data_dir, graphs_dir, beam, max_len, length_norm, out):
    """Decode captions for every record in captions.jsonl (used as the pair list)."""
    model = load_captioner(ckpt)
    data_cfg = core.DataConfig(d_e=model.cfg.d_e, d_v=model.cfg.d_v)
    dataset = _load_dataset(data_dir, data_cfg)
    graphs = _load_graphs(graphs_dir, dataset)
    mode = "greedy" if beam <= 1 else "beam"
    records = []
    for (art, img, cap), graph in zip(dataset, graphs):
        text = caption_sample(
            model,
            art,
            img,
            graph,
            mode=mode,
            max_len=min(max_len, model.cfg.max_caption_len),
            beam_size=beam,
            length_norm=length_norm,
        )
        records.append(
            core.CaptionRecord(image_id=cap.image_id, article_id=cap.article_id, caption_text=text)
        )
    core.save_captions(records, out)
    click.echo(f"wrote {len(records)} captions to {out}")


# ---------------------------------------------------------------------------
# evaluation


def _load_entities(path):
    entities = {}
    for obj in core._iter_jsonl(path):
        image_id = str(obj.get("image_id"))
        ents = []
        for e in obj.get("entities", []):
            ents.append((str(e["surface"]), str(e.get("entity_class", "OTHER"))))
        entities[image_id] = ents
    return entities


@main.command("evaluate")
@click.option("--hyps", required=True, type=click.Path(exists=True))
@click.option("--refs", required=True, type=click.Path(exists=True))
@click.option("--entities", "entities_path", type=click.Path(exists=True))
@click.option(
    "--mode",
    type=click.Choice(["standard", "entity-masked"]),
    default="standard",
    show_default=True,
)
@click.option("--report", "report_path", type=click.Path())
@handle_errors
def evaluate_cmd(hyps, refs, entities_path, mode, report_path):
    hyp_records = core.load_captions(hyps)
    ref_records = core.load_captions(refs)
    ref_entities = _load_entities(entities_path) if entities_path else None
    report = evaluate_corpus(
        hyp_records,
        ref_records,
        mode="entity_masked" if mode == "entity-masked" else "standard",
        ref_entities=ref_entities,
    )
    doc = report.to_json()
    click.echo(json.dumps(doc, indent=2))
    if report_path:
        Path(report_path).write_text(json.dumps(doc, indent=2) + "\n")


if __name__ == "__main__":
    main()
