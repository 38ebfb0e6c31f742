from __future__ import annotations

import random

import pytest

from graphex.vocab import Normalizer, Vocabulary, tokenize, unique_tokens


def test_tokenize_lowercases_and_splits_whitespace_runs():
    assert tokenize("Audeze Maxwell  gaming\theadphones") == [
        "audeze", "maxwell", "gaming", "headphones",
    ]


def test_tokenize_strips_edge_punctuation_only():
    assert tokenize("(wireless) headphones, usb-c!") == ["wireless", "headphones", "usb-c"]
    assert tokenize("'quoted' o'neill") == ["quoted", "o'neill"]


def test_tokenize_drops_tokens_that_normalize_to_empty():
    assert tokenize("... headphones !!!") == ["headphones"]
    assert tokenize("") == []
    assert tokenize(" \t \n ") == []


def test_tokenize_applies_nfc_normalization():
    composed = "café"
    decomposed = "café"
    assert tokenize(composed) == tokenize(decomposed)


def test_tokenize_custom_stemmer_runs_after_cleanup():
    chop = Normalizer(stemmer=lambda t: t.rstrip("s"))
    assert tokenize("Headphones, cables", chop) == ["headphone", "cable"]


def test_tokenize_idempotent_on_random_strings():
    rng = random.Random(7)
    alphabet = "abcXYZ09 .,!()'\t-é"
    for _ in range(500):
        text = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 30)))
        once = tokenize(text)
        assert tokenize(" ".join(once)) == once


def test_unique_tokens_keeps_first_occurrence_order():
    assert unique_tokens(["b", "a", "b", "c", "a"]) == ["b", "a", "c"]
    assert unique_tokens([]) == []


def test_vocabulary_assigns_dense_ids_in_insertion_order():
    vocab = Vocabulary()
    ids = [vocab.intern(t) for t in ["gaming", "headphones", "gaming", "xbox"]]
    assert ids == [0, 1, 0, 2]
    assert len(vocab) == 3
    assert [vocab.surface(i) for i in range(3)] == ["gaming", "headphones", "xbox"]


def test_vocabulary_roundtrip_is_bijective():
    vocab = Vocabulary()
    tokens = [f"t{i}" for i in range(100)]
    for token in tokens:
        vocab.intern(token)
    for token in tokens:
        token_id = vocab.lookup(token)
        assert token_id is not None
        assert vocab.surface(token_id) == token


def test_vocabulary_rejects_empty_and_whitespace_tokens():
    vocab = Vocabulary()
    with pytest.raises(ValueError):
        vocab.intern("")
    with pytest.raises(ValueError):
        vocab.intern("two words")
    with pytest.raises(ValueError):
        vocab.intern("tab\tbed")


def test_frozen_vocabulary_rejects_writes_and_reports_absent():
    vocab = Vocabulary()
    vocab.intern("known")
    vocab.freeze()
    assert vocab.frozen
    assert vocab.lookup("known") == 0
    assert vocab.lookup("unknown") is None
    with pytest.raises(RuntimeError):
        vocab.intern("unknown")


def test_vocabulary_surface_rejects_out_of_range_ids():
    vocab = Vocabulary()
    vocab.intern("only")
    with pytest.raises(IndexError):
        vocab.surface(1)
    with pytest.raises(IndexError):
        vocab.surface(-1)


def test_from_surfaces_rebuilds_identical_table():
    vocab = Vocabulary()
    for token in ["c", "a", "b"]:
        vocab.intern(token)
    clone = Vocabulary.from_surfaces(vocab.surfaces())
    assert clone.frozen
    assert clone.surfaces() == ["c", "a", "b"]
    assert clone.lookup("a") == 1
