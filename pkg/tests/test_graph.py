from __future__ import annotations

import random

import numpy as np
import pytest

from graphex.curation import COUNT_ORIENTATION, RawKeyphraseRow, curate
from graphex.graph import UnknownLeafError, build, degree_stats

from helpers import (
    brute_degree,
    brute_edge_count,
    brute_unique_token_count,
    make_dataset,
)


def dataset_of(*pairs):
    rows = [RawKeyphraseRow(text, leaf, 1.0, 1.0) for text, leaf in pairs]
    return curate(rows, orientation=COUNT_ORIENTATION)


def leaf_texts(dataset, leaf):
    return [kp.text for kp in dataset.leaves[leaf]]


def test_build_two_keyphrase_leaf_has_expected_csr():
    model = build(dataset_of(("a b", 1)))
    graph = model.leaf(1)
    assert graph.num_tokens == 2
    assert graph.num_edges == 2
    assert graph.offsets.tolist() == [0, 1, 2]
    assert graph.edges.tolist() == [0, 0]


def test_headphones_leaf_degrees_match_full_scan(headphones_dataset, headphones_model):
    texts = leaf_texts(headphones_dataset, 42)
    graph = headphones_model.leaf(42)
    for token in ["headphones", "audeze", "xbox", "wireless", "maxwell", "gaming", "bluetooth"]:
        token_id = headphones_model.vocabulary.lookup(token)
        assert token_id is not None
        assert len(graph.adjacency(token_id)) == brute_degree(texts, token)
    assert len(graph.adjacency(10_000)) == 0


def test_headphones_leaf_stats_match_full_scan(headphones_dataset, headphones_model):
    texts = leaf_texts(headphones_dataset, 42)
    stats = degree_stats(headphones_model, 42)
    assert stats.num_tokens == brute_unique_token_count(texts) == 7
    assert stats.num_edges == brute_edge_count(texts) == 13
    assert stats.avg_degree == pytest.approx(13 / 7)


def test_degree_stats_single_keyphrase():
    model = build(dataset_of(("a b", 5)))
    stats = degree_stats(model, 5)
    assert (stats.num_tokens, stats.num_edges, stats.avg_degree) == (2, 2, 1.0)


def test_degree_stats_unknown_leaf_raises():
    model = build(dataset_of(("a b", 5)))
    with pytest.raises(UnknownLeafError):
        degree_stats(model, 6)


def test_duplicate_tokens_inside_keyphrase_produce_one_edge():
    model = build(dataset_of(("spare spare tire", 3)))
    graph = model.leaf(3)
    assert graph.num_edges == 2
    record = model.keyphrase(0)
    assert len(record.token_ids) == 2


def test_leaves_are_isolated_but_share_string_and_token_tables():
    dataset = dataset_of(("shared phrase", 1), ("shared phrase", 2), ("only here", 2))
    model = build(dataset)
    assert model.num_keyphrases == 3
    assert model.kp_texts == ["only here", "shared phrase"]
    one, two = model.leaf(1), model.leaf(2)
    assert one.num_keyphrases == 1
    assert two.num_keyphrases == 2
    assert set(one.edges.tolist()) == {0}
    assert set(two.edges.tolist()) == {1, 2}
    # Same text, same string table slot, distinct keyphrase ids.
    assert model.kp_text(0) == model.kp_text(2) == "shared phrase"
    assert model.kp_text(1) == "only here"
    assert model.kp_text_ref[0] == model.kp_text_ref[2]


def test_keyphrase_ids_are_contiguous_per_leaf_in_sorted_order():
    rng = random.Random(3)
    dataset = make_dataset(rng, 400, vocab_size=60, leaf_ids=[9, 4, 7])
    model = build(dataset)
    expected_base = 0
    for leaf_id in sorted(dataset.leaves):
        graph = model.leaf(leaf_id)
        assert graph.kp_base == expected_base
        texts = [model.kp_text(k) for k in range(graph.kp_base, graph.kp_base + graph.num_keyphrases)]
        assert texts == sorted(texts)
        assert texts == leaf_texts(dataset, leaf_id)
        expected_base += graph.num_keyphrases
    assert expected_base == model.num_keyphrases


def test_token_ids_follow_sorted_surface_order():
    model = build(dataset_of(("zebra apple", 1), ("mango", 1)))
    assert model.vocabulary.surfaces() == ["apple", "mango", "zebra"]


def test_graph_edges_match_membership_both_ways_on_random_models():
    rng = random.Random(17)
    for _ in range(10):
        dataset = make_dataset(rng, 120, vocab_size=25, leaf_ids=[1, 2], min_len=1, max_len=4)
        model = build(dataset)
        for leaf_id, group in dataset.leaves.items():
            graph = model.leaf(leaf_id)
            texts = [kp.text for kp in group]
            # Forward: each CSR edge corresponds to real token membership.
            for row, token_id in enumerate(graph.token_rows.tolist()):
                token = model.vocabulary.surface(token_id)
                for kp_id in graph.adjacency_row(row).tolist():
                    assert token in set(model.kp_text(kp_id).split())
            # Backward: every membership pair appears exactly once.
            edge_pairs = []
            for row, token_id in enumerate(graph.token_rows.tolist()):
                token = model.vocabulary.surface(token_id)
                edge_pairs.extend((token, kp_id) for kp_id in graph.adjacency_row(row).tolist())
            expected = {
                (token, graph.kp_base + idx)
                for idx, text in enumerate(texts)
                for token in set(text.split())
            }
            assert len(edge_pairs) == len(expected)
            assert set(edge_pairs) == expected


def test_offsets_are_monotone_and_cover_all_edges():
    rng = random.Random(23)
    dataset = make_dataset(rng, 300, vocab_size=40, leaf_ids=[1, 2, 3])
    model = build(dataset)
    for leaf_id in model.leaf_categories:
        graph = model.leaf(leaf_id)
        offsets = graph.offsets
        assert offsets[0] == 0
        assert offsets[-1] == graph.num_edges
        assert np.all(np.diff(offsets) >= 1)
        assert len(offsets) == graph.num_tokens + 1
        rows = graph.token_rows.tolist()
        assert rows == sorted(rows)
        within = (graph.edges >= graph.kp_base) & (graph.edges < graph.kp_base + graph.num_keyphrases)
        assert bool(within.all())


def test_build_is_deterministic_across_input_order():
    rng = random.Random(29)
    rows = [
        RawKeyphraseRow(" ".join(f"w{rng.randint(0, 20)}" for _ in range(rng.randint(1, 4))),
                        rng.choice([5, 6]), float(rng.randint(0, 99)), float(rng.randint(0, 99)))
        for _ in range(200)
    ]
    shuffled = rows[:]
    rng.shuffle(shuffled)
    first = build(curate(rows))
    second = build(curate(shuffled))
    assert first.kp_texts == second.kp_texts
    assert first.vocabulary.surfaces() == second.vocabulary.surfaces()
    for leaf_id in first.leaf_categories:
        a, b = first.leaf(leaf_id), second.leaf(leaf_id)
        assert a.edges.tolist() == b.edges.tolist()
        assert a.offsets.tolist() == b.offsets.tolist()
        assert a.token_rows.tolist() == b.token_rows.tolist()


def test_build_empty_dataset_yields_model_with_no_leaves():
    dataset = curate([], orientation=COUNT_ORIENTATION)
    model = build(dataset)
    assert model.num_keyphrases == 0
    assert model.leaf_categories == []
    with pytest.raises(UnknownLeafError):
        model.leaf(1)


def test_keyphrase_record_exposes_scores_in_canonical_form(headphones_model):
    record = next(iter(headphones_model.keyphrases_in_leaf(42)))
    assert record.text == "audeze headphones"
    # Rank orientation: canonical search negates the raw rank.
    assert record.search == -3.0
    assert record.recall == -3.0
    assert record.length == 2
