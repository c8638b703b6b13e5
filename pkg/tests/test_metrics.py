"""Metric golden values (hand-computed), properties, masking, corpus reports."""

import numpy as np
import pytest

from mmkgcap.core import CaptionRecord
from mmkgcap.errors import AlignmentError, CorpusTooSmall, EmptyCorpus, SchemaError
from mmkgcap.metrics import (
    EvalInstance,
    bleu4,
    cider_d,
    entity_f1,
    evaluate_corpus,
    gazetteer_entities,
    mask_entities,
    rouge_l,
    tokenize_caption,
)

from oracles import slow_cider_d


def inst(hyp, ref, hyp_ents=(), ref_ents=()):
    return EvalInstance(
        hypothesis=tuple(hyp.split()),
        references=(tuple(ref.split()),),
        hyp_entities=tuple(hyp_ents),
        ref_entities=tuple(ref_ents),
    )


def test_tokenize_caption():
    assert tokenize_caption("Alonso, wins the Race!") == ["alonso", "wins", "the", "race"]
    assert tokenize_caption("") == []


def test_instance_needs_reference():
    with pytest.raises(SchemaError):
        EvalInstance(hypothesis=("a",), references=())


# ---------------------------------------------------------------------------
# BLEU


def test_bleu_identical_pair():
    corpus = [inst("a man rides a horse", "a man rides a horse")]
    assert bleu4(corpus) == pytest.approx(1.0, abs=1e-12)


def test_bleu_disjoint_near_zero():
    corpus = [inst("x y z w", "a b c d")]
    assert bleu4(corpus) == pytest.approx(1e-9, rel=1e-6)


def test_bleu_hand_computed_tally():
    # p1=5/6, p2=3/5, p3=1/4, p4 floored at 1e-9; equal lengths so BP=1
    corpus = [inst("the cat sat on the mat", "the cat is on the mat")]
    assert bleu4(corpus) == pytest.approx(0.003343701524882112, abs=1e-12)


def test_bleu_brevity_penalty():
    # hyp shorter than ref: BP = exp(1 - 6/4); all 4-gram-free overlap
    corpus = [inst("the cat on mat", "the cat is on the mat")]
    got = bleu4(corpus)
    assert got < bleu4([inst("the cat is on the mat", "the cat is on the mat")])


def test_bleu_empty_corpus():
    with pytest.raises(EmptyCorpus):
        bleu4([])


# ---------------------------------------------------------------------------
# ROUGE-L


def test_rouge_identical():
    assert rouge_l([inst("a b c d", "a b c d")]) == pytest.approx(1.0, abs=1e-12)


def test_rouge_disjoint():
    assert rouge_l([inst("a b", "x y")]) == pytest.approx(0.0, abs=0)


def test_rouge_hand_dp_table():
    # LCS("a b c d", "a c b d") = 3; P = R = 3/4 so F = 3/4 for any beta
    assert rouge_l([inst("a b c d", "a c b d")]) == pytest.approx(0.75, abs=1e-12)


def test_rouge_asymmetric_lengths():
    # LCS("a b", "a b c d") = 2, P = 1, R = 1/2, beta=1.2:
    # F = (1+1.44)*1*0.5 / (0.5 + 1.44*1) = 1.22/1.94
    got = rouge_l([inst("a b", "a b c d")])
    assert got == pytest.approx((1 + 1.44) * 0.5 / (0.5 + 1.44), abs=1e-12)


# ---------------------------------------------------------------------------
# CIDEr-D


def test_cider_identical_distinct_refs_maximal():
    corpus = [
        inst("a b c d e", "a b c d e"),
        inst("f g h i j", "f g h i j"),
        inst("k l m n o", "k l m n o"),
    ]
    assert cider_d(corpus) == pytest.approx(10.0, abs=1e-9)


def test_cider_disjoint_zero():
    corpus = [
        inst("x y z w v", "a b c d e"),
        inst("f g h i j", "f g h i j"),
    ]
    per_instance_disjoint = cider_d(corpus)
    assert per_instance_disjoint < 10.0
    # the disjoint instance itself contributes 0: removing it doubles the mean
    corpus2 = [inst("f g h i j", "f g h i j"), inst("p q r s t", "p q r s t")]
    assert cider_d(corpus2) == pytest.approx(10.0, abs=1e-9)


def test_cider_matches_slow_reference():
    rng = np.random.default_rng(0)
    vocab = [f"w{i}" for i in range(12)]
    for _ in range(10):
        hyps, refs = [], []
        for _ in range(4):
            hyps.append([vocab[i] for i in rng.integers(0, 12, size=int(rng.integers(2, 9)))])
            refs.append([vocab[i] for i in rng.integers(0, 12, size=int(rng.integers(2, 9)))])
        corpus = [
            EvalInstance(hypothesis=tuple(h), references=(tuple(r),))
            for h, r in zip(hyps, refs)
        ]
        assert cider_d(corpus) == pytest.approx(slow_cider_d(hyps, refs), abs=1e-9)


def test_cider_three_instance_golden():
    corpus = [
        inst("the cat sat on the mat", "the cat is on the mat"),
        inst("a dog runs fast", "a dog runs quickly"),
        inst("birds fly south in winter", "birds fly south in winter"),
    ]
    expect = slow_cider_d(
        [list(i.hypothesis) for i in corpus], [list(i.references[0]) for i in corpus]
    )
    assert cider_d(corpus) == pytest.approx(expect, abs=1e-9)
    assert expect > 0


def test_cider_needs_two_instances():
    with pytest.raises(CorpusTooSmall):
        cider_d([inst("a b", "a b")])
    with pytest.raises(EmptyCorpus):
        cider_d([])


# ---------------------------------------------------------------------------
# entity F1


def test_entity_f1_perfect():
    ents = (("Alonso", "PERSON"), ("Toyota", "ORG"))
    p, r, f = entity_f1([inst("x", "x", ents, ents)])
    assert (p, r, f) == (1.0, 1.0, 1.0)


def test_entity_f1_disjoint():
    p, r, f = entity_f1([inst("x", "x", (("Alonso", "PERSON"),), (("Hamilton", "PERSON"),))])
    assert (p, r, f) == (0.0, 0.0, 0.0)


def test_entity_f1_micro_hand_count():
    # counts (matched, hyp, ref) = (1, 2, 1) and (1, 1, 2): P = R = F1 = 2/3
    i1 = inst("x", "x", (("A", "PERSON"), ("B", "ORG")), (("A", "PERSON"),))
    i2 = inst("x", "x", (("C", "PERSON"),), (("C", "PERSON"), ("D", "ORG")))
    p, r, f = entity_f1([i1, i2])
    assert p == pytest.approx(2 / 3, abs=1e-12)
    assert r == pytest.approx(2 / 3, abs=1e-12)
    assert f == pytest.approx(2 / 3, abs=1e-12)


def test_entity_f1_case_sensitive_and_multiset():
    i1 = inst("x", "x", (("alonso", "PERSON"),), (("Alonso", "PERSON"),))
    assert entity_f1([i1])[2] == 0.0
    i2 = inst(
        "x",
        "x",
        (("A", "PERSON"), ("A", "PERSON")),
        (("A", "PERSON"),),
    )
    p, r, _ = entity_f1([i2])
    assert (p, r) == (0.5, 1.0)


def test_entity_f1_swap_symmetry():
    rng = np.random.default_rng(1)
    names = [f"N{i}" for i in range(6)]
    instances = []
    swapped = []
    for _ in range(10):
        hyp = tuple((names[i], "PERSON") for i in rng.integers(0, 6, size=3))
        ref = tuple((names[i], "PERSON") for i in rng.integers(0, 6, size=4))
        instances.append(inst("x", "x", hyp, ref))
        swapped.append(inst("x", "x", ref, hyp))
    p1, r1, f1_ = entity_f1(instances)
    p2, r2, f2_ = entity_f1(swapped)
    assert (p1, r1) == (r2, p2)
    assert f1_ == pytest.approx(f2_, abs=1e-12)


def test_entity_recall_monotone_under_matched_append():
    base = inst("x", "x", (("A", "PERSON"),), (("A", "PERSON"), ("B", "ORG")))
    more = inst("x", "x", (("A", "PERSON"), ("B", "ORG")), (("A", "PERSON"), ("B", "ORG")))
    assert entity_f1([more])[1] >= entity_f1([base])[1]


# ---------------------------------------------------------------------------
# masking


def test_mask_no_entities():
    toks = ["alonso", "wins"]
    assert mask_entities(toks, []) == toks


def test_mask_simple_replacement():
    toks = tokenize_caption("Alonso celebrates")
    assert mask_entities(toks, [("Alonso", "PERSON")]) == ["PERSON", "celebrates"]


def test_mask_longest_match_wins():
    toks = tokenize_caption("the New York Times reported")
    ents = [("New York", "GPE"), ("New York Times", "ORG")]
    assert mask_entities(toks, ents) == ["the", "ORG", "reported"]


def test_mask_idempotent():
    toks = tokenize_caption("Alonso drives in New York")
    ents = [("Alonso", "PERSON"), ("New York", "GPE")]
    once = mask_entities(toks, ents)
    assert mask_entities(once, ents) == once


def test_mask_unmatched_entity_leaves_tokens():
    toks = ["some", "words"]
    assert mask_entities(toks, [("Alonso", "PERSON")]) == toks


# ---------------------------------------------------------------------------
# gazetteer + corpus report


def test_gazetteer_longest_match_and_multiset():
    gaz = [("New York Times", "ORG"), ("New York", "GPE"), ("Alonso", "PERSON")]
    found = gazetteer_entities("Alonso reads the New York Times with Alonso.", gaz)
    assert found == [("Alonso", "PERSON"), ("New York Times", "ORG"), ("Alonso", "PERSON")]


def caption(image_id, text):
    return CaptionRecord(image_id=image_id, article_id=f"a-{image_id}", caption_text=text)


def test_evaluate_identity_corpus():
    refs = [caption("i1", "Alonso wins the race today"), caption("i2", "Toyota builds a fast car")]
    ents = {
        "i1": [("Alonso", "PERSON")],
        "i2": [("Toyota", "ORG")],
    }
    report = evaluate_corpus(refs, refs, "standard", ref_entities=ents)
    assert report.bleu4 == pytest.approx(1.0, abs=1e-9)
    assert report.rouge_l == pytest.approx(1.0, abs=1e-9)
    assert report.entity_f1 == pytest.approx(1.0, abs=1e-12)
    assert report.cider_d > 0


def test_evaluate_alignment_error():
    with pytest.raises(AlignmentError):
        evaluate_corpus([caption("i1", "x")], [caption("i2", "x")])
    with pytest.raises(AlignmentError):
        evaluate_corpus(
            [caption("i1", "x"), caption("i1", "y")],
            [caption("i1", "x"), caption("i2", "y")],
        )


def test_entity_masked_mode_equalizes_name_swaps():
    """Pairs differing only in person names score BLEU-4 = 1 after masking."""
    hyps = [
        caption("i1", "Hamilton celebrates victory with the happy crowd"),
        caption("i2", "Bottas waves to fans after the long race"),
    ]
    refs = [
        caption("i1", "Alonso celebrates victory with the happy crowd"),
        caption("i2", "Norris waves to fans after the long race"),
    ]
    hyp_ents = {"i1": [("Hamilton", "PERSON")], "i2": [("Bottas", "PERSON")]}
    ref_ents = {"i1": [("Alonso", "PERSON")], "i2": [("Norris", "PERSON")]}
    report = evaluate_corpus(
        hyps, refs, "entity_masked", hyp_entities=hyp_ents, ref_entities=ref_ents
    )
    assert report.bleu4 == pytest.approx(1.0, abs=1e-9)
    assert report.entity_f1 is None and report.entity_precision is None
    # same pairs in standard mode score below 1
    standard = evaluate_corpus(hyps, refs, "standard", hyp_entities=hyp_ents, ref_entities=ref_ents)
    assert standard.bleu4 < 1.0
    assert standard.entity_f1 == 0.0


def test_evaluate_five_instance_fixture_matches_componentwise():
    rng = np.random.default_rng(2)
    words = ["alpha", "beta", "gamma", "delta", "eps", "zeta"]
    hyps, refs = [], []
    for i in range(5):
        hyps.append(caption(f"i{i}", " ".join(rng.choice(words, size=5))))
        refs.append(caption(f"i{i}", " ".join(rng.choice(words, size=5))))
    report = evaluate_corpus(hyps, refs, "standard")
    instances = [
        EvalInstance(
            hypothesis=tuple(tokenize_caption(h.caption_text)),
            references=(tuple(tokenize_caption(r.caption_text)),),
        )
        for h, r in zip(sorted(hyps, key=lambda c: c.image_id), sorted(refs, key=lambda c: c.image_id))
    ]
    assert report.bleu4 == pytest.approx(bleu4(instances), abs=1e-12)
    assert report.rouge_l == pytest.approx(rouge_l(instances), abs=1e-12)
    assert report.cider_d == pytest.approx(cider_d(instances), abs=1e-12)


def test_report_json_fields():
    refs = [caption("i1", "a b c d"), caption("i2", "e f g h")]
    report = evaluate_corpus(refs, refs, "standard")
    doc = report.to_json()
    assert set(doc) == {
        "bleu4",
        "rouge_l",
        "cider_d",
        "entity_precision",
        "entity_recall",
        "entity_f1",
        "mode",
    }


def test_all_bounded_metrics_in_range():
    rng = np.random.default_rng(3)
    words = ["a", "b", "c", "d", "e"]
    instances = []
    for _ in range(20):
        hyp = tuple(rng.choice(words, size=int(rng.integers(1, 8))))
        ref = tuple(rng.choice(words, size=int(rng.integers(1, 8))))
        instances.append(EvalInstance(hypothesis=hyp, references=(ref,)))
    assert 0.0 <= bleu4(instances) <= 1.0
    assert 0.0 <= rouge_l(instances) <= 1.0
    assert cider_d(instances) >= 0.0
