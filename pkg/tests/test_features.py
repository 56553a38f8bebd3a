import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opencoding.features import (
    SparseVector,
    fit_tfidf,
    fit_vocabulary,
    load_tfidf,
    save_tfidf,
    transform,
    transform_many,
)
from opencoding.textprep import Document


def doc(*tokens, record_id="x"):
    return Document(record_id, tuple(tokens))


class TestSparseVector:
    def test_requires_increasing_indices(self):
        with pytest.raises(ValueError, match="strictly increasing"):
            SparseVector([2, 1], [1.0, 1.0])

    def test_drops_explicit_zeros(self):
        vec = SparseVector([0, 3, 7], [1.0, 0.0, 2.0])
        assert vec.as_dict() == {0: 1.0, 7: 2.0}

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError, match="finite"):
            SparseVector([0], [float("nan")])


class TestFitVocabulary:
    def test_hand_counted_document_frequencies(self):
        vocab = fit_vocabulary([doc("krieg", "krieg", "frieden"), doc("frieden")])
        assert set(vocab.term_to_index) == {"krieg", "frieden"}
        assert vocab.n_docs == 2
        df = {t: int(vocab.doc_freq[i]) for t, i in vocab.term_to_index.items()}
        assert df == {"krieg": 1, "frieden": 2}

    def test_single_document(self):
        vocab = fit_vocabulary([doc("a-less", "tokens")])
        assert len(vocab) == 2
        assert all(int(f) == 1 for f in vocab.doc_freq)

    def test_bigrams(self):
        vocab = fit_vocabulary([doc("zu", "viele")], ngram_range=(1, 2))
        assert set(vocab.term_to_index) == {"zu", "viele", "zu viele"}

    def test_empty_corpus(self):
        with pytest.raises(ValueError, match="empty training corpus"):
            fit_vocabulary([])


class TestTransform:
    # Hand computation for the two-document corpus above:
    #   idf(krieg)   = ln(3/2) + 1 = 1.4054651081
    #   idf(frieden) = ln(3/3) + 1 = 1.0
    #   raw = (2 * 1.4054651081, 1.0) = (2.8109302162, 1.0)
    #   norm = sqrt(2.8109302162^2 + 1) = 2.9835078 -> (0.94216, 0.33518)
    def test_hand_computed_tfidf(self):
        model = fit_tfidf([doc("krieg", "krieg", "frieden"), doc("frieden")])
        vec = transform(doc("krieg", "krieg", "frieden"), model)
        values = {model.vocabulary.terms[i]: v for i, v in vec}
        assert values["krieg"] == pytest.approx(0.94216, abs=1e-4)
        assert values["frieden"] == pytest.approx(0.33518, abs=1e-4)

    def test_all_oov_document(self):
        model = fit_tfidf([doc("krieg")])
        assert transform(doc("frieden", "steuern"), model).nnz == 0

    def test_single_term_unit_vector(self):
        model = fit_tfidf([doc("krieg", "krieg", "frieden"), doc("frieden")])
        vec = transform(doc("frieden"), model)
        assert vec.as_dict() == {model.vocabulary.term_to_index["frieden"]: 1.0}

    def test_unnormalized_counts_times_idf(self):
        model = fit_tfidf([doc("krieg", "krieg", "frieden"), doc("frieden")], l2_normalize=False)
        vec = transform(doc("krieg", "krieg", "frieden"), model)
        values = {model.vocabulary.terms[i]: v for i, v in vec}
        assert values["krieg"] == pytest.approx(2 * (math.log(1.5) + 1), abs=1e-12)
        assert values["frieden"] == pytest.approx(1.0, abs=1e-12)


def test_idf_monotone_in_document_frequency():
    docs = [doc("haeufig", "selten"), doc("haeufig"), doc("haeufig")]
    model = fit_tfidf(docs)
    rare = model.idf[model.vocabulary.term_to_index["selten"]]
    common = model.idf[model.vocabulary.term_to_index["haeufig"]]
    assert rare > common > 0


def test_transform_many_matches_per_document():
    docs = [doc("krieg", "frieden"), doc("steuern"), doc()]
    model = fit_tfidf(docs)
    X = transform_many(docs, model)
    assert X.shape == (3, len(model.vocabulary))
    for i, d in enumerate(docs):
        row = X.getrow(i).toarray().ravel()
        dense = np.zeros(len(model.vocabulary))
        for j, v in transform(d, model):
            dense[j] = v
        assert np.array_equal(row, dense)


def test_serialization_round_trip(tmp_path):
    docs = [doc("krieg", "krieg", "frieden"), doc("frieden", "steuern")]
    model = fit_tfidf(docs, ngram_range=(1, 2))
    path = tmp_path / "features.json"
    save_tfidf(model, path)
    loaded = load_tfidf(path)
    assert loaded.vocabulary.term_to_index == model.vocabulary.term_to_index
    assert np.array_equal(loaded.idf, model.idf)
    assert np.array_equal(loaded.vocabulary.doc_freq, model.vocabulary.doc_freq)
    probe = doc("krieg", "frieden", "steuern")
    assert transform(probe, loaded) == transform(probe, model)


def test_serialization_rejects_unknown_version(tmp_path):
    path = tmp_path / "features.json"
    path.write_text('{"format_version": 99}', encoding="utf-8")
    with pytest.raises(ValueError, match="version"):
        load_tfidf(path)


token = st.sampled_from(
    ["krieg", "frieden", "steuern", "rente", "umwelt", "miete", "schule", "euro"]
)
corpus = st.lists(
    st.lists(token, min_size=0, max_size=6), min_size=1, max_size=12
)


@given(corpus)
@settings(max_examples=100, deadline=None)
def test_norm_is_zero_or_one(token_lists):
    docs = [doc(*tokens, record_id=str(i)) for i, tokens in enumerate(token_lists)]
    fittable = [d for d in docs if d.tokens]
    if not fittable:
        return
    model = fit_tfidf(fittable)
    for d in docs:
        norm = transform(d, model).norm()
        assert norm == pytest.approx(0.0, abs=1e-12) or norm == pytest.approx(1.0, rel=1e-12)


@given(corpus)
@settings(max_examples=100, deadline=None)
def test_df_round_trip(token_lists):
    # Re-transforming the training set must reproduce the df counts the fit saw.
    docs = [doc(*tokens, record_id=str(i)) for i, tokens in enumerate(token_lists)]
    if not any(d.tokens for d in docs):
        return
    model = fit_tfidf(docs)
    X = transform_many(docs, model)
    recomputed = np.asarray((X != 0).sum(axis=0)).ravel()
    assert np.array_equal(recomputed, model.vocabulary.doc_freq)
