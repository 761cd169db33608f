"""Tokenization, vocabulary construction, sparse count vectors, and the
word-ablation primitive used by the leave-one-word-out engine.

Tokens are case-sensitive whitespace tokens: orthographic variation (Kei vs.
kei) is itself a region signal, so no case folding is applied and punctuation
is kept attached.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix

from .corpus import Dataset
from .errors import ValidationError

# A sparse count vector: feature index -> positive count.
SparseVector = dict[int, int]


@dataclass
class Vocabulary:
    """Word -> dense feature index mapping, ordered by descending training
    frequency with lexicographic tie-break."""

    words: list[str]
    min_count: int = 1

    def __post_init__(self):
        self.index = {w: i for i, w in enumerate(self.words)}
        if len(self.index) != len(self.words):
            raise ValidationError("vocabulary contains duplicate words")

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self.index


def tokenize(text: str) -> list[str]:
    """Split normalized text on spaces; a token is any maximal non-space run."""
    return text.split()


def build_vocab(train: Dataset, min_count: int = 2) -> Vocabulary:
    """Build the training-set vocabulary: words with frequency >= min_count,
    indexed by descending frequency, ties broken lexicographically."""
    if not train.instances:
        raise ValidationError("cannot build a vocabulary from an empty dataset")
    counts: Counter[str] = Counter()
    for inst in train.instances:
        counts.update(tokenize(inst.text))
    kept = sorted(
        (w for w, c in counts.items() if c >= min_count),
        key=lambda w: (-counts[w], w),
    )
    if not kept:
        raise ValidationError(
            f"vocabulary is empty at min_count={min_count}; lower min_count"
        )
    return Vocabulary(words=kept, min_count=min_count)


def vectorize(text: str, vocab: Vocabulary, max_len: int = 256) -> SparseVector:
    """Count in-vocabulary tokens among the first max_len tokens.
    Out-of-vocabulary tokens contribute nothing; all-OOV text yields {}."""
    vec: SparseVector = {}
    for tok in tokenize(text)[:max_len]:
        idx = vocab.index.get(tok)
        if idx is not None:
            vec[idx] = vec.get(idx, 0) + 1
    return vec


def to_csr(texts: list[str], vocab: Vocabulary, max_len: int = 256) -> csr_matrix:
    """Stack count vectors for a batch of texts into a CSR matrix."""
    data: list[int] = []
    indices: list[int] = []
    indptr = [0]
    for text in texts:
        vec = vectorize(text, vocab, max_len)
        for idx in sorted(vec):
            indices.append(idx)
            data.append(vec[idx])
        indptr.append(len(indices))
    return csr_matrix(
        (np.asarray(data, dtype=np.float64),
         np.asarray(indices, dtype=np.int32),
         np.asarray(indptr, dtype=np.int32)),
        shape=(len(texts), len(vocab)),
    )


def remove_word(text: str, word: str) -> str:
    """Delete every token exactly equal to word (case-sensitive) and rejoin
    the remaining tokens with single spaces. The word must be a token of the
    text; callers iterate only over the instance's own unique words."""
    tokens = tokenize(text)
    if word not in tokens:
        raise ValidationError(f"{word!r} is not a token of the text")
    return " ".join(t for t in tokens if t != word)
