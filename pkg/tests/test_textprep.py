import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opencoding.textprep import (
    Document,
    NormalizationRules,
    RawAnswer,
    dictionary_lemmatizer,
    identity_lemmatizer,
    lemmatize,
    load_lemma_dictionary,
    normalize,
    prepare_document,
    tokenize,
)


class TestNormalize:
    def test_umlaut_folding(self):
        assert normalize("Flüchtlingspolitik") == "fluechtlingspolitik"

    def test_empty_input(self):
        assert normalize("") == ""

    def test_party_entity_after_umlaut_fold(self):
        assert normalize("die Grünen!!") == "die_gruenen"

    def test_party_entity_matches_folded_spelling(self):
        assert normalize("die gruenen") == "die_gruenen"

    def test_linke_disambiguation(self):
        assert normalize("Die Linke") == "die_linke"

    def test_plain_links_untouched(self):
        assert normalize("links abbiegen") == "links abbiegen"

    def test_digits_become_separators(self):
        assert normalize("paragraph 218 gesetz") == "paragraph gesetz"

    def test_mixed_alphanumerics_split(self):
        # digit deletion turns "g20gipfel" into two fragments
        assert normalize("g20gipfel") == "g gipfel"

    def test_eszett(self):
        assert normalize("Straße") == "strasse"

    def test_decomposed_umlaut(self):
        decomposed = "Flüchtlinge"  # u + combining diaeresis
        assert normalize(decomposed) == "fluechtlinge"

    def test_keep_numbers_when_configured(self):
        rules = NormalizationRules(drop_numbers=False)
        assert normalize("hartz 4", rules) == "hartz 4"


class TestTokenize:
    def test_single_letter_removal(self):
        assert tokenize("a b krieg") == ["krieg"]

    def test_plain_answer(self):
        assert tokenize("zu viele nichtwaehler") == ["zu", "viele", "nichtwaehler"]

    def test_entity_token_survives(self):
        assert tokenize("die_gruenen und steuern") == ["die_gruenen", "und", "steuern"]

    def test_keep_single_letters_when_configured(self):
        rules = NormalizationRules(drop_single_letters=False)
        assert tokenize("a b krieg", rules) == ["a", "b", "krieg"]


class TestLemmatize:
    def test_identity_default(self):
        doc = Document("1", ("probleme", "krieg"))
        assert lemmatize(doc, identity_lemmatizer).tokens == ("probleme", "krieg")

    def test_dictionary_mapping(self):
        lemmatizer = dictionary_lemmatizer({"probleme": "problem"})
        doc = Document("1", ("probleme",))
        assert lemmatize(doc, lemmatizer).tokens == ("problem",)

    def test_unknown_token_passes_through(self):
        lemmatizer = dictionary_lemmatizer({"probleme": "problem"})
        doc = Document("1", ("unbekannt",))
        assert lemmatize(doc, lemmatizer).tokens == ("unbekannt",)

    def test_dictionary_file(self, tmp_path):
        path = tmp_path / "lemmas.tsv"
        path.write_text("# comment\nprobleme\tproblem\nkriege krieg\n", encoding="utf-8")
        mapping = load_lemma_dictionary(path)
        assert mapping == {"probleme": "problem", "kriege": "krieg"}

    def test_dictionary_file_rejects_bad_line(self, tmp_path):
        path = tmp_path / "lemmas.tsv"
        path.write_text("nur-eine-spalte\n", encoding="utf-8")
        with pytest.raises(ValueError, match="lemmas.tsv:1"):
            load_lemma_dictionary(path)


def test_prepare_document_full_path():
    answer = RawAnswer("42", "Zu viele Flüchtlinge! 100%")
    doc = prepare_document(answer)
    assert doc.record_id == "42"
    assert doc.tokens == ("zu", "viele", "fluechtlinge")
    assert doc.token_count == 3


def test_rules_reject_whitespace_replacement():
    with pytest.raises(ValueError, match="whitespace"):
        NormalizationRules(entity_rules=(("x", "two words"),))


def test_rules_reject_uppercase_replacement():
    with pytest.raises(ValueError, match="lowercase"):
        NormalizationRules(entity_rules=(("x", "Die_Gruenen"),))


# Answers are short free text; this covers what respondents type, including
# umlauts, digits, punctuation, and party mentions in both spellings.
_chars = st.text(
    alphabet=list(
        "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZäöüÄÖÜßé"
        " \t.,!?\"'-_0123456789()/:;"
    ),
    max_size=40,
)
_party = st.sampled_from(
    ["die grünen", "die gruenen", "grüne", "die_gruenen", "die linke", "linke", "den Grünen"]
)
answer_text = _chars | st.builds(lambda a, p, b: f"{a} {p} {b}", _chars, _party, _chars)


@given(answer_text)
@settings(max_examples=300, deadline=None)
def test_normalize_idempotent(text):
    once = normalize(text)
    assert normalize(once) == once


@given(answer_text)
@settings(max_examples=200, deadline=None)
def test_default_rules_leave_no_bad_tokens(text):
    tokens = tokenize(normalize(text))
    for token in tokens:
        assert len(token) > 1
        assert not re.search(r"\d", token)
        assert not re.search(r"[^\w]", token)


@given(answer_text)
@settings(max_examples=100, deadline=None)
def test_determinism(text):
    a = prepare_document(RawAnswer("x", text))
    b = prepare_document(RawAnswer("x", text))
    assert a == b


@given(answer_text)
@settings(max_examples=200, deadline=None)
def test_entity_tokens_never_split(text):
    tokens = tokenize(normalize(text))
    joined = " ".join(tokens)
    # A replacement token either survives whole or is absent; no fragments
    # like "die_" or "_gruenen" may appear.
    for fragment in ("die_ ", " _gruenen", "die_ linke"):
        assert fragment not in joined
    for token in tokens:
        if "_" in token:
            assert token in ("die_gruenen", "die_linke") or "_" in text
