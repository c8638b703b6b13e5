"""Knowledge-base loading, dedup, splitting and the synthetic generator."""

import json

import numpy as np
import pytest

from mmkgcap.core import DataConfig, vec_to_b64
from mmkgcap.errors import RatioError
from mmkgcap.kb import (
    KnowledgeBase,
    KnowledgeBaseEntry,
    SynthKbConfig,
    load_kb,
    save_kb,
    split_kb,
    synth_kb,
)

CFG = DataConfig(d_e=4, d_v=6)


def entry(wiki_id, seed=0):
    rng = np.random.default_rng(seed)
    return KnowledgeBaseEntry(
        wiki_id=wiki_id,
        name=f"name-{wiki_id}",
        entity_embedding=rng.standard_normal(4).astype(np.float32),
        image_feature=rng.standard_normal(6).astype(np.float32),
    )


def write_kb_file(path, entries):
    with open(path, "w") as fh:
        for e in entries:
            fh.write(
                json.dumps(
                    {
                        "wiki_id": e.wiki_id,
                        "name": e.name,
                        "entity_embedding": vec_to_b64(e.entity_embedding),
                        "image_feature": vec_to_b64(e.image_feature),
                    }
                )
                + "\n"
            )


def test_empty_file(tmp_path):
    path = tmp_path / "kb.jsonl"
    path.write_text("")
    kb, dups = load_kb(path, CFG)
    assert len(kb) == 0 and dups == 0


def test_duplicate_wiki_id_first_wins(tmp_path):
    first = entry("Q1", seed=1)
    second = entry("Q1", seed=2)
    path = tmp_path / "kb.jsonl"
    write_kb_file(path, [first, second])
    kb, dups = load_kb(path, CFG)
    assert len(kb) == 1 and dups == 1
    assert kb.entries[0] == first


def test_200_entry_fixture_index(tmp_path):
    entries = [entry(f"Q{i}", seed=i) for i in range(200)]
    path = tmp_path / "kb.jsonl"
    write_kb_file(path, entries)
    kb, dups = load_kb(path, CFG)
    assert len(kb) == 200 and dups == 0
    # linear-scan oracle: every wiki_id resolves to its own position
    for pos, e in enumerate(entries):
        scan = next(i for i, k in enumerate(kb.entries) if k.wiki_id == e.wiki_id)
        assert kb.index[e.wiki_id] == scan == pos


def test_save_load_roundtrip(tmp_path):
    kb = KnowledgeBase(entries=tuple(entry(f"Q{i}", seed=i) for i in range(5)))
    path = tmp_path / "kb.jsonl"
    save_kb(kb, path)
    loaded, _ = load_kb(path, CFG)
    assert loaded.entries == kb.entries


def test_split_sizes_and_disjoint():
    kb = KnowledgeBase(entries=tuple(entry(f"Q{i}", seed=i) for i in range(10)))
    train, held = split_kb(kb, 0.8, seed=7)
    assert (len(train), len(held)) == (8, 2)
    train_ids = {e.wiki_id for e in train.entries}
    held_ids = {e.wiki_id for e in held.entries}
    assert not train_ids & held_ids
    assert train_ids | held_ids == {e.wiki_id for e in kb.entries}


def test_split_deterministic():
    kb = KnowledgeBase(entries=tuple(entry(f"Q{i}", seed=i) for i in range(10)))
    a = split_kb(kb, 0.8, seed=7)
    b = split_kb(kb, 0.8, seed=7)
    assert [e.wiki_id for e in a[0].entries] == [e.wiki_id for e in b[0].entries]
    assert [e.wiki_id for e in a[1].entries] == [e.wiki_id for e in b[1].entries]


@pytest.mark.parametrize("ratio", [0.0, 1.0, -0.5, 2.0])
def test_split_ratio_error(ratio):
    kb = KnowledgeBase(entries=tuple(entry(f"Q{i}") for i in range(4)))
    with pytest.raises(RatioError):
        split_kb(kb, ratio, seed=0)


def test_synth_kb_shapes_and_determinism():
    cfg = SynthKbConfig(n_entities=24, n_clusters=4, d_e=8, d_v=10, d_latent=6, seed=3)
    kb1 = synth_kb(cfg)
    kb2 = synth_kb(cfg)
    assert len(kb1) == 24
    assert kb1.entries[0].entity_embedding.shape == (8,)
    assert kb1.entries[0].image_feature.shape == (10,)
    assert kb1.entries == kb2.entries
