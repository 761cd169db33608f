import random

import pytest

from conftest import make_dataset
from regiolex.corpus import normalize_text
from regiolex.errors import ValidationError
from regiolex.features import Vocabulary, build_vocab, remove_word, tokenize, vectorize


class TestTokenize:
    def test_two_tokens(self):
        assert tokenize("Kei Ahnig") == ["Kei", "Ahnig"]

    def test_empty(self):
        assert tokenize("") == []

    def test_double_space_after_normalization(self):
        assert tokenize(normalize_text("a  b")) == ["a", "b"]

    def test_punctuation_attached(self):
        assert tokenize("bim, oder?") == ["bim,", "oder?"]


class TestBuildVocab:
    def test_min_count_two(self):
        data = make_dataset({"A": ["a a b", "a c"]})
        vocab = build_vocab(data, min_count=2)
        assert vocab.index == {"a": 0}

    def test_min_count_one_orders_by_freq_then_lex(self):
        data = make_dataset({"A": ["a a b", "a c"]})
        vocab = build_vocab(data, min_count=1)
        assert vocab.index == {"a": 0, "b": 1, "c": 2}

    def test_deterministic(self):
        data = make_dataset({"A": ["x y z y", "z q x"], "B": ["q x"]})
        a = build_vocab(data, min_count=1)
        b = build_vocab(data, min_count=1)
        assert a.words == b.words

    def test_empty_vocab_advises_lower_min_count(self):
        data = make_dataset({"A": ["a b c"]})
        with pytest.raises(ValidationError, match="min_count"):
            build_vocab(data, min_count=5)

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValidationError):
            build_vocab(make_dataset({"A": []}), min_count=1)

    def test_indices_dense(self):
        data = make_dataset({"A": ["c c b b a a a"]})
        vocab = build_vocab(data, min_count=1)
        assert sorted(vocab.index.values()) == list(range(len(vocab)))

    def test_duplicate_words_rejected(self):
        with pytest.raises(ValidationError, match="duplicate"):
            Vocabulary(words=["a", "a"])


class TestVectorize:
    VOCAB = Vocabulary(words=["a", "b"])

    def test_counts(self):
        assert vectorize("a b a", self.VOCAB) == {0: 2, 1: 1}

    def test_oov_yields_empty(self):
        assert vectorize("zzz", self.VOCAB) == {}

    def test_truncation_at_256(self):
        text = " ".join(["a"] * 300)
        assert vectorize(text, self.VOCAB, max_len=256) == {0: 256}

    def test_no_zero_counts_stored(self):
        vec = vectorize("a zzz", self.VOCAB)
        assert all(count > 0 for count in vec.values())


class TestRemoveWord:
    def test_all_occurrences(self):
        assert remove_word("a b a c", "a") == "b c"

    def test_single_word_to_empty(self):
        assert remove_word("a", "a") == ""

    def test_case_sensitive(self):
        with pytest.raises(ValidationError, match="not a token"):
            remove_word("Isch guet", "isch")

    def test_non_token_rejected(self):
        with pytest.raises(ValidationError, match="not a token"):
            remove_word("a b", "c")

    def test_tokenize_commutes_with_removal(self):
        rng = random.Random(0)
        alphabet = ["a", "b", "c", "dd", "e"]
        for _ in range(200):
            tokens = [rng.choice(alphabet) for _ in range(rng.randint(1, 12))]
            text = " ".join(tokens)
            word = rng.choice(tokens)
            assert tokenize(remove_word(text, word)) == [t for t in tokens if t != word]

    def test_vectorize_drops_full_count_inside_window(self):
        vocab = Vocabulary(words=["a", "b", "c"])
        rng = random.Random(1)
        for _ in range(100):
            tokens = [rng.choice(["a", "b", "c", "zz"]) for _ in range(rng.randint(1, 20))]
            text = " ".join(tokens)
            word = rng.choice(tokens)
            before = vectorize(text, vocab, max_len=256)
            after = vectorize(remove_word(text, word), vocab, max_len=256)
            expected = dict(before)
            if word in vocab:
                expected.pop(vocab.index[word], None)
            assert after == expected


class TestVocabularyPersistence:
    def test_reconstruction_preserves_mapping(self):
        data = make_dataset({"A": ["w1 w2 w2 w3 w3 w3"]})
        vocab = build_vocab(data, min_count=1)
        clone = Vocabulary(words=list(vocab.words), min_count=vocab.min_count)
        assert clone.index == vocab.index
